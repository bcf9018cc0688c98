"""Numerical Finsler geometry toolkit.

Computes the pointwise geometric objects of a Finsler metric (fundamental
tensor through Ricci scalar, Landsberg tensors, Chern covariant
derivatives), integrates over the projectivized fibers, and verifies the
diffeomorphism-invariance identities, the Einstein representation of the
curvature differential, the weakly-Landsberg constancy result and the
quadratic-Ricci dichotomy on a zoo of built-in and user-defined metrics.
"""

__version__ = "0.1.0"

from . import expressions, geometry, identities, jets, metrics, quadrature
from .geometry import GeometryFrame, TangentSample, TensorValue
from .identities import ClassificationReport, IdentityReport
from .metrics import MetricModel, builtin, parse_metric_dsl

__all__ = [
    "__version__",
    "expressions",
    "geometry",
    "identities",
    "jets",
    "metrics",
    "quadrature",
    "GeometryFrame",
    "TangentSample",
    "TensorValue",
    "ClassificationReport",
    "IdentityReport",
    "MetricModel",
    "builtin",
    "parse_metric_dsl",
]
