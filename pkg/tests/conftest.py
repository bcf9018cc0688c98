import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from finslerkit import metrics


@pytest.fixture(scope="session")
def zoo():
    """Validated built-in models, constructed once per session."""
    return {
        "euclid2": metrics.builtin("euclidean", 2),
        "euclid3": metrics.builtin("euclidean", 3),
        "mink3": metrics.builtin("minkowski_randers", 3, b=(0.5, 0.0, 0.0)),
        "funk2": metrics.builtin("funk", 2),
        "funk3": metrics.builtin("funk", 3),
        "sphere3": metrics.builtin("sphere_round", 3, 1.0),
        "sphere4": metrics.builtin("sphere_round", 4, 1.0),
        "torus2": metrics.builtin("torus_conformal", 2, 0.1),
        "torus3": metrics.builtin("torus_conformal", 3, 0.1),
        "randers3": metrics.builtin("randers", 3),
    }
