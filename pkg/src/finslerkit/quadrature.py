"""Quadrature on the projectivized fibers and on periodic base manifolds.

The fiber of directions at x is parametrized by the Euclidean unit sphere;
on that section the projectivized volume form pulls back to the standard
sphere measure times the weight det(g)/F^n, so every fiber integral is a
weighted sphere quadrature.  Rules are tensor products of Gauss-Legendre
and trapezoid factors, spectrally accurate for the smooth integrands the
identity checks produce.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import GeometryFrame
from .metrics import MetricModel

__all__ = [
    "SphereRule",
    "sphere_rule",
    "sphere_area",
    "fiber_weight",
    "fiber_volume",
    "fiber_average_scalar",
    "fiber_average_oneform",
    "section_invariance_check",
    "base_integral_torus",
]

DEFAULT_RESOLUTION = {2: 128, 3: 32, 4: 24}

# Node batch fed to one geometry frame; bounds peak memory at high jet order.
DEFAULT_CHUNK = 2048


@dataclass(frozen=True)
class SphereRule:
    """Nodes and positive weights on the Euclidean unit sphere S^{n-1};
    weights sum to the sphere area."""

    dim: int
    nodes: np.ndarray
    weights: np.ndarray
    resolution: int

    def __len__(self) -> int:
        return len(self.weights)


def sphere_area(n: int) -> float:
    return {2: 2.0 * np.pi, 3: 4.0 * np.pi, 4: 2.0 * np.pi**2}[n]


def sphere_rule(n: int, resolution: int | None = None) -> SphereRule:
    """Product quadrature on S^{n-1} for n in {2, 3, 4}.

    n=2: equispaced trapezoid (spectral for periodic integrands);
    n=3: Gauss-Legendre in the polar cosine x trapezoid in azimuth;
    n=4: Gauss-Legendre in both polar angles x trapezoid in azimuth.
    """
    if n not in (2, 3, 4):
        raise ValueError(f"sphere_rule supports n in {{2, 3, 4}}, got {n}")
    resolution = DEFAULT_RESOLUTION[n] if resolution is None else int(resolution)
    if resolution < 8:
        raise ValueError("resolution must be >= 8")
    if n == 2:
        theta = 2.0 * np.pi * np.arange(resolution) / resolution
        nodes = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
        weights = np.full(resolution, 2.0 * np.pi / resolution)
        return SphereRule(2, nodes, weights, resolution)
    theta = 2.0 * np.pi * np.arange(2 * resolution) / (2 * resolution)
    w_theta = np.full(2 * resolution, 2.0 * np.pi / (2 * resolution))
    if n == 3:
        t, wt = np.polynomial.legendre.leggauss(resolution)
        s = np.sqrt(1.0 - t * t)
        nodes = np.stack(
            [
                np.outer(s, np.cos(theta)),
                np.outer(s, np.sin(theta)),
                np.outer(t, np.ones_like(theta)),
            ],
            axis=-1,
        ).reshape(-1, 3)
        weights = np.outer(wt, w_theta).ravel()
        return SphereRule(3, nodes, weights, resolution)
    # n == 4: u = (cos p1, sin p1 cos p2, sin p1 sin p2 cos t, sin p1 sin p2 sin t),
    # dA = sin^2 p1 sin p2 dp1 dp2 dt
    z1, wz1 = np.polynomial.legendre.leggauss(resolution)
    p1 = 0.5 * np.pi * (z1 + 1.0)
    wp1 = 0.5 * np.pi * wz1 * np.sin(p1) ** 2
    t2, wt2 = np.polynomial.legendre.leggauss(resolution)
    s2 = np.sqrt(1.0 - t2 * t2)
    u = np.empty((resolution, resolution, 2 * resolution, 4))
    u[..., 0] = np.cos(p1)[:, None, None]
    u[..., 1] = np.sin(p1)[:, None, None] * t2[None, :, None]
    u[..., 2] = np.sin(p1)[:, None, None] * s2[None, :, None] * np.cos(theta)
    u[..., 3] = np.sin(p1)[:, None, None] * s2[None, :, None] * np.sin(theta)
    weights = (wp1[:, None, None] * wt2[None, :, None] * w_theta).ravel()
    return SphereRule(4, u.reshape(-1, 4), weights, resolution)


def _check_homogeneity(model, x, nodes, evaluator, degree, tol=1e-6):
    probe = nodes[:: max(1, len(nodes) // 3)][:3]
    f1 = np.asarray(evaluator(x, probe), dtype=np.float64)
    f2 = np.asarray(evaluator(x, 2.0 * probe), dtype=np.float64)
    err = np.max(np.abs(f2 - 2.0**degree * f1))
    if err > tol * (1.0 + np.max(np.abs(f1))):
        raise ValueError(
            f"integrand is not {degree}-homogeneous (residual {err:.3e}); "
            "declared degree inconsistent with the evaluator"
        )


def fiber_weight(model: MetricModel, x, u) -> np.ndarray:
    """det(g(x,u)) / F(x,u)^n on a batch of directions."""
    frame = GeometryFrame(model, np.asarray(x, dtype=np.float64), np.asarray(u, dtype=np.float64), 2)
    return frame.fiber_weight()


def _weights_at(model, x, nodes, chunk) -> np.ndarray:
    out = np.empty(len(nodes))
    for lo in range(0, len(nodes), chunk):
        out[lo : lo + chunk] = fiber_weight(model, x, nodes[lo : lo + chunk])
    return out


def fiber_volume(
    model: MetricModel, x, rule: SphereRule, chunk: int = DEFAULT_CHUNK
) -> float:
    """The fiber volume integral of the projectivized volume form at x."""
    w = _weights_at(model, x, rule.nodes, chunk)
    if np.any(w <= 0.0):
        raise ValueError(f"{model.name}: nonpositive fiber weight; integration refused")
    return float(np.sum(rule.weights * w))


def fiber_average_scalar(
    model: MetricModel,
    x,
    f,
    rule: SphereRule,
    chunk: int = DEFAULT_CHUNK,
    check_homogeneity: bool = True,
) -> float:
    """Fiberwise average of a 0-homogeneous scalar evaluator f(x, u)."""
    if check_homogeneity:
        _check_homogeneity(model, x, rule.nodes, f, 0)
    w = _weights_at(model, x, rule.nodes, chunk)
    vals = np.asarray(f(x, rule.nodes), dtype=np.float64)
    return float(np.sum(rule.weights * w * vals) / np.sum(rule.weights * w))


def fiber_average_oneform(
    model: MetricModel,
    x,
    theta,
    degree: float,
    rule: SphereRule,
    chunk: int = DEFAULT_CHUNK,
    check_homogeneity: bool = True,
) -> np.ndarray:
    """Fiberwise average of an r-homogeneous 1-form: each component is
    integrated with the F^{-r} reweighting that makes the average section
    independent."""
    x = np.asarray(x, dtype=np.float64)
    if check_homogeneity:
        _check_homogeneity(
            model, x, rule.nodes, lambda xx, uu: np.asarray(theta(xx, uu))[..., 0], degree
        )
    w = _weights_at(model, x, rule.nodes, chunk)
    comp = np.asarray(theta(x, rule.nodes), dtype=np.float64)
    if degree != 0.0:
        Fvals = np.sqrt(np.maximum(model.value(x, rule.nodes), 0.0))
        comp = comp * np.power(Fvals, -degree)[..., None]
    num = np.sum(rule.weights[:, None] * w[:, None] * comp, axis=0)
    return num / np.sum(rule.weights * w)


def section_invariance_check(
    model: MetricModel, x, rule: SphereRule, lam: float, chunk: int = DEFAULT_CHUNK
) -> float:
    """Recompute the fiber volume on the scaled section y = lam*u; the
    contracted form picks lam^n while the weight picks lam^{-n}, so the
    relative difference is pure roundoff."""
    if lam <= 0.0:
        raise ValueError("section scale must be positive")
    base = fiber_volume(model, x, rule, chunk)
    w = _weights_at(model, x, lam * rule.nodes, chunk)
    scaled = float(np.sum(rule.weights * w) * lam**model.dim)
    return abs(scaled - base) / base


def base_integral_torus(
    model: MetricModel,
    f,
    rule: SphereRule,
    base_resolution: int = 12,
    chunk: int = DEFAULT_CHUNK,
    fiber_scale: bool = False,
) -> float:
    """Integral over the projectivized tangent bundle of a 2pi-periodic
    model: tensor-product trapezoid over the torus base of the fiber
    integrals of the 0-homogeneous scalar f(x, u).

    With ``fiber_scale`` the absolute integrand is also accumulated and the
    pair (integral, l1_mass) is returned for normalization.
    """
    if not model.claims_periodic:
        raise ValueError(f"{model.name} is not 2pi-periodic; torus integration refused")
    n = model.dim
    grid_1d = 2.0 * np.pi * np.arange(base_resolution) / base_resolution
    mesh = np.meshgrid(*([grid_1d] * n), indexing="ij")
    points = np.stack([m.ravel() for m in mesh], axis=-1)
    cell = (2.0 * np.pi / base_resolution) ** n
    total = 0.0
    l1 = 0.0
    for x in points:
        w = _weights_at(model, x, rule.nodes, chunk)
        vals = np.asarray(f(x, rule.nodes), dtype=np.float64)
        total += cell * float(np.sum(rule.weights * w * vals))
        l1 += cell * float(np.sum(rule.weights * w * np.abs(vals)))
    if fiber_scale:
        return total, l1
    return total
