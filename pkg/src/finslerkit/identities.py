"""Checkers for the integral identities and classification of metrics.

Each checker evaluates both sides of one identity at one base point by
fiber quadrature over the frame pipeline and reports absolute and relative
residuals; the relative one is measured against the larger of the side
magnitudes and the L1 mass of the integrands, so that an identity whose
sides cancel a genuinely nonzero integrand is graded by how much
cancellation the quadrature actually achieved.

Theorem checks with unmet hypotheses refuse instead of failing: a refusal
is information about the model, not about the implementation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import geometry, jets, quadrature
from .expressions import parse_expression
from .geometry import GeometryFrame, _values
from .metrics import MetricModel, base_grid
from .quadrature import SphereRule

__all__ = [
    "IdentityReport",
    "ClassificationReport",
    "BaseFunction",
    "check_lemma2",
    "check_lemma1",
    "check_main_theorem",
    "check_schur_corollary",
    "check_berwald_theorem",
    "check_stokes_torus",
    "check_bianchi",
    "check_section_invariance",
    "check_algebra",
    "classify",
    "estimate_rho",
    "default_directions",
]

DEFAULT_CHUNK = 2048

# identity tolerances: exact-AD algebra 1e-9, quadrature identities by dim
def default_tolerance(identity: str, dim: int) -> float:
    if identity in ("lemma2", "lemma1", "main", "stokes"):
        return 1e-6 if dim == 2 else 1e-5
    if identity == "section":
        return 1e-12
    if identity in ("schur", "berwald"):
        return 1e-7
    if identity == "bianchi":
        return 1e-6
    return 1e-6


@dataclass(frozen=True)
class IdentityReport:
    """Outcome of one identity check at one base point."""

    identity: str
    model: str
    point: tuple
    lhs: tuple
    rhs: tuple
    abs_residual: float
    rel_residual: float
    tolerance: float
    verdict: str  # "pass" | "fail" | "refused"
    resolution: int
    order: int
    note: str = ""

    @staticmethod
    def build(identity, model, point, lhs, rhs, scale, tolerance, resolution, order, note=""):
        lhs = np.atleast_1d(np.asarray(lhs, dtype=np.float64))
        rhs = np.atleast_1d(np.asarray(rhs, dtype=np.float64))
        abs_res = float(np.max(np.abs(lhs - rhs)))
        scale = max(float(scale), 1e-30)
        rel = abs_res / scale
        return IdentityReport(
            identity=identity,
            model=model,
            point=tuple(float(v) for v in np.atleast_1d(point)),
            lhs=tuple(float(v) for v in lhs),
            rhs=tuple(float(v) for v in rhs),
            abs_residual=abs_res,
            rel_residual=rel,
            tolerance=float(tolerance),
            verdict="pass" if rel <= tolerance else "fail",
            resolution=resolution,
            order=order,
            note=note,
        )

    @staticmethod
    def refusal(identity, model, point, tolerance, resolution, order, note):
        return IdentityReport(
            identity=identity,
            model=model,
            point=tuple(float(v) for v in np.atleast_1d(point)),
            lhs=(),
            rhs=(),
            abs_residual=float("nan"),
            rel_residual=float("nan"),
            tolerance=float(tolerance),
            verdict="refused",
            resolution=resolution,
            order=order,
            note=note,
        )


@dataclass(frozen=True)
class ClassificationReport:
    """Einstein / weakly-Landsberg / quadratic-Ricci / Riemannian verdicts."""

    model: str
    einstein: bool
    rho_values: tuple
    einstein_variance: float
    weakly_landsberg: bool
    max_mean_landsberg: float
    berwald_quadratic: bool
    quadratic_deviation: float
    riemannian: bool
    riemannian_deviation: float


class BaseFunction:
    """A smooth function of the base point with an exact gradient, built
    from an expression over x1..xn."""

    def __init__(self, source: str, dim: int):
        self.source = source
        self.dim = dim
        self._expr = parse_expression(source, dim)

    def value(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        xs = [x[..., i] for i in range(self.dim)]
        ys = [np.zeros_like(xs[0]) for _ in range(self.dim)]
        return np.asarray(self._expr(xs, ys), dtype=np.float64)

    def gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        ctx = jets.get_context(self.dim, 1)
        point = np.concatenate([x, np.zeros_like(x)], axis=-1)
        seeds = jets.seed(ctx, point)
        val = self._expr(seeds[: self.dim], seeds[self.dim :])
        grad = np.zeros(x.shape)
        if not isinstance(val, jets.Jet):
            return grad
        mi = np.zeros(2 * self.dim, dtype=np.int64)
        for i in range(self.dim):
            mi[:] = 0
            mi[i] = 1
            grad[..., i] = val.partial(mi)
        return grad


def default_directions(n: int, count: int | None = None, seed_value: int = 2718) -> np.ndarray:
    count = count or (2 * n + 4)
    rng = np.random.default_rng(seed_value)
    d = rng.standard_normal((count, n))
    return d / np.linalg.norm(d, axis=-1, keepdims=True)


def estimate_rho(
    model: MetricModel, x, directions: np.ndarray | None = None, order: int = 5
) -> tuple[float, float]:
    """Direction-mean and direction-variance of Ric/L at one base point."""
    dirs = default_directions(model.dim) if directions is None else directions
    frame = GeometryFrame(model, np.asarray(x, dtype=np.float64), dirs, order)
    vals = frame.ricci.value() / frame.L.value()
    return float(vals.mean()), float(vals.max() - vals.min())


# -- integrand evaluation -----------------------------------------------------


def _chunked(n_nodes: int, chunk: int):
    for lo in range(0, n_nodes, chunk):
        yield lo, min(lo + chunk, n_nodes)


def _lemma_integrands(model, x, nodes, order, want_lhs=True, want_rhs=True, unfolded=False):
    """Per-node values of the diffeomorphism-identity integrands and weight.

    lhs_i = S_{|0} y_i / L, rhs_i = -2 pfrak_{|0} y_i / L with S the Ricci
    combination; y_i is lowered with g.  The rhs trace can optionally be
    kept outside the dynamical derivative (g^{ab}_{|0} = 0 makes the two
    agree to roundoff).
    """
    n = model.dim
    frame = GeometryFrame(model, x, nodes, order)
    w = frame.fiber_weight()
    y_low = _values(frame.y_low)
    Lval = frame.L.value()
    direction = y_low / Lval[:, None]
    lhs = rhs = rhs_unfolded = None
    if want_lhs:
        lhs = frame.ric_combination_dyn.value()[:, None] * direction
    if want_rhs:
        rhs = -2.0 * frame.pfrak_dyn.value()[:, None] * direction
        if unfolded:
            rhs_unfolded = -2.0 * frame.identity1_rhs_unfolded().value()[:, None] * direction
    return w, lhs, rhs, rhs_unfolded


def check_lemma2(
    model: MetricModel,
    rho: BaseFunction | str,
    x,
    rule: SphereRule,
    tolerance: float | None = None,
    chunk: int = DEFAULT_CHUNK,
) -> IdentityReport:
    """Representation of the differential of a base function as a fiber
    average: d rho(x) times the fiber volume against n times the integral
    of (y^a d_a rho) y_i / F^2.  Holds for every metric and every rho, so a
    failure signals a quadrature or pipeline defect, never the model."""
    if isinstance(rho, str):
        rho = BaseFunction(rho, model.dim)
    x = np.asarray(x, dtype=np.float64)
    tolerance = default_tolerance("lemma2", model.dim) if tolerance is None else tolerance
    n = model.dim
    grad = rho.gradient(x)
    vol = 0.0
    rhs = np.zeros(n)
    for lo, hi in _chunked(len(rule.nodes), chunk):
        nodes = rule.nodes[lo:hi]
        wq = rule.weights[lo:hi]
        frame = GeometryFrame(model, x, nodes, 2)
        w = frame.fiber_weight()
        y_low = _values(frame.y_low)
        Lval = frame.L.value()
        integrand = (nodes @ grad)[:, None] * y_low / Lval[:, None]
        vol += float(np.sum(wq * w))
        rhs += n * np.einsum("k,k,ki->i", wq, w, integrand)
    lhs = grad * vol
    scale = max(np.max(np.abs(lhs)), np.max(np.abs(rhs)), vol)
    return IdentityReport.build(
        "lemma2", model.name, x, lhs, rhs, scale, tolerance, rule.resolution, 2,
        note=f"rho={rho.source}",
    )


def check_lemma1(
    model: MetricModel,
    x,
    rule: SphereRule,
    tolerance: float | None = None,
    order: int = 7,
    chunk: int = DEFAULT_CHUNK,
    compare_unfolded: bool = True,
) -> IdentityReport:
    """Pointwise integral identity of the diffeomorphism-invariant
    curvature functional: the fiber integral of {g^{ab}Ric_{.a.b} -
    (n+2)Ric/F^2}_{|0} y_i/F^2 equals -2 times that of pfrak_{|0} y_i/F^2,
    for every positive definite metric."""
    x = np.asarray(x, dtype=np.float64)
    tolerance = default_tolerance("lemma1", model.dim) if tolerance is None else tolerance
    if not model.claims_positive_definite:
        return IdentityReport.refusal(
            "lemma1", model.name, x, tolerance, rule.resolution, order,
            "model is not positive definite; compact fibers unavailable",
        )
    n = model.dim
    lhs = np.zeros(n)
    rhs = np.zeros(n)
    rhs_alt = np.zeros(n)
    l1_lhs = np.zeros(n)
    l1_rhs = np.zeros(n)
    vol = 0.0
    for lo, hi in _chunked(len(rule.nodes), chunk):
        nodes = rule.nodes[lo:hi]
        wq = rule.weights[lo:hi]
        w, lhs_v, rhs_v, rhs_u = _lemma_integrands(
            model, x, nodes, order, unfolded=compare_unfolded
        )
        lhs += np.einsum("k,k,ki->i", wq, w, lhs_v)
        rhs += np.einsum("k,k,ki->i", wq, w, rhs_v)
        if rhs_u is not None:
            rhs_alt += np.einsum("k,k,ki->i", wq, w, rhs_u)
        l1_lhs += np.einsum("k,k,ki->i", wq, w, np.abs(lhs_v))
        l1_rhs += np.einsum("k,k,ki->i", wq, w, np.abs(rhs_v))
        vol += float(np.sum(wq * w))
    # graded against the achieved cancellation when the integrands are
    # nonzero, and against the fiber volume when they vanish identically
    scale = max(
        np.max(np.abs(lhs)), np.max(np.abs(rhs)), np.max(l1_lhs), np.max(l1_rhs), vol
    )
    note = ""
    if compare_unfolded:
        note = f"traced-vs-unfolded rhs gap {float(np.max(np.abs(rhs - rhs_alt))):.3e}"
    return IdentityReport.build(
        "lemma1", model.name, x, lhs, rhs, scale, tolerance, rule.resolution, order,
        note=note,
    )


def check_main_theorem(
    model: MetricModel,
    x,
    rule: SphereRule,
    tolerance: float | None = None,
    order: int = 7,
    grid_step: float = 0.05,
    chunk: int = DEFAULT_CHUNK,
    einstein_tolerance: float = 1e-6,
    directions: np.ndarray | None = None,
) -> IdentityReport:
    """Einstein representation: (n-2) d rho = -2n <pfrak_{|0} omega> with
    the degree-1 fiber averaging; refused when the model is not Einstein."""
    x = np.asarray(x, dtype=np.float64)
    n = model.dim
    tolerance = default_tolerance("main", model.dim) if tolerance is None else tolerance
    dirs = default_directions(n) if directions is None else directions

    rho0, var0 = estimate_rho(model, x, dirs)
    if var0 > einstein_tolerance * (1.0 + abs(rho0)):
        return IdentityReport.refusal(
            "main", model.name, x, tolerance, rule.resolution, order,
            f"model is not Einstein at x (Ric/L direction spread {var0:.3e})",
        )

    # five-point central stencil for d rho on axis lines through x
    stencil = np.array([1.0, -8.0, 8.0, -1.0]) / (12.0 * grid_step)
    offsets = np.array([-2.0, -1.0, 1.0, 2.0]) * grid_step
    lhs = np.zeros(n)
    for i in range(n):
        samples = []
        for off in offsets:
            xs = x.copy()
            xs[i] += off
            samples.append(estimate_rho(model, xs, dirs)[0])
        lhs[i] = (n - 2) * float(stencil @ samples)

    rhs = np.zeros(n)
    vol = 0.0
    for lo, hi in _chunked(len(rule.nodes), chunk):
        nodes = rule.nodes[lo:hi]
        wq = rule.weights[lo:hi]
        frame = GeometryFrame(model, x, nodes, order)
        w = frame.fiber_weight()
        y_low = _values(frame.y_low)
        Lval = frame.L.value()
        integrand = frame.pfrak_dyn.value()[:, None] * y_low / Lval[:, None]
        rhs += -2.0 * n * np.einsum("k,k,ki->i", wq, w, integrand)
        vol += float(np.sum(wq * w))
    rhs /= vol
    scale = max(np.max(np.abs(lhs)), np.max(np.abs(rhs)), abs(rho0))
    return IdentityReport.build(
        "main", model.name, x, lhs, rhs, scale, tolerance, rule.resolution, order,
        note=f"rho={rho0:.9g}",
    )


def check_schur_corollary(
    model: MetricModel,
    grid: np.ndarray,
    rule: SphereRule | None = None,
    tolerance: float | None = None,
    landsberg_tolerance: float = 1e-7,
    einstein_tolerance: float = 1e-6,
    order: int = 7,
    directions: np.ndarray | None = None,
) -> IdentityReport:
    """Constancy of the Einstein factor for weakly Landsberg metrics in
    dimension >= 3; both Schur-condition variants are evaluated and logged."""
    n = model.dim
    tolerance = default_tolerance("schur", n) if tolerance is None else tolerance
    resolution = rule.resolution if rule is not None else 0
    grid = np.asarray(grid, dtype=np.float64)
    if n < 3:
        return IdentityReport.refusal(
            "schur", model.name, grid[0], tolerance, resolution, order,
            "dimension 2 is outside the corollary's hypotheses",
        )
    dirs = default_directions(n) if directions is None else directions

    rhos = []
    max_P = 0.0
    max_printed = 0.0
    max_expanded = 0.0
    for x in grid:
        rho, var = estimate_rho(model, x, dirs)
        if var > einstein_tolerance * (1.0 + abs(rho)):
            return IdentityReport.refusal(
                "schur", model.name, x, tolerance, resolution, order,
                f"model is not Einstein (spread {var:.3e} at x={x.tolist()})",
            )
        rhos.append(rho)
        frame = GeometryFrame(model, x, dirs, order)
        max_P = max(max_P, float(np.max(np.abs(_values(frame.mean_landsberg)))))
        max_printed = max(
            max_printed, float(np.max(np.abs(frame.schur_scalar("as_printed").value())))
        )
        max_expanded = max(
            max_expanded, float(np.max(np.abs(frame.schur_scalar("as_expanded").value())))
        )
    note = (
        f"max|P_i|={max_P:.3e}, schur printed={max_printed:.3e}, "
        f"expanded={max_expanded:.3e}"
    )
    if max_P > landsberg_tolerance and max_expanded > landsberg_tolerance:
        return IdentityReport.refusal(
            "schur", model.name, grid[0], tolerance, resolution, order,
            "model is not weakly Landsberg and the expanded Schur scalar is nonzero; " + note,
        )
    rhos = np.asarray(rhos)
    mean = float(rhos.mean())
    spread = float(np.max(np.abs(rhos - mean)))
    scale = max(1.0, abs(mean))
    return IdentityReport.build(
        "schur", model.name, grid[0], [spread], [0.0], scale, tolerance,
        resolution, order, note=note + f", rho={mean:.9g}",
    )


def check_berwald_theorem(
    model: MetricModel,
    grid: np.ndarray,
    directions: np.ndarray | None = None,
    tolerance: float | None = None,
    quadratic_tolerance: float = 1e-6,
    einstein_tolerance: float = 1e-6,
    ricci_flat_tolerance: float = 1e-8,
) -> IdentityReport:
    """Quadratic-Ricci dichotomy: an Einstein metric with quadratic Ricci
    scalar is globally Ricci-flat or has constant Einstein factor.  A
    non-quadratic model is recorded as out of scope, not failed."""
    n = model.dim
    tolerance = default_tolerance("berwald", n) if tolerance is None else tolerance
    grid = np.asarray(grid, dtype=np.float64)
    dirs = default_directions(n, 2 * n + 4) if directions is None else directions
    if n < 3:
        return IdentityReport.refusal(
            "berwald", model.name, grid[0], tolerance, 0, 6,
            "dimension 2 is outside the theorem's hypotheses",
        )
    max_dev = 0.0
    rhos = []
    max_ric = 0.0
    for x in grid:
        res = geometry.quadratic_ric_test(model, x, dirs, tol=quadratic_tolerance)
        max_dev = max(max_dev, res["max_deviation"])
        if not res["is_quadratic"]:
            return IdentityReport.refusal(
                "berwald", model.name, x, tolerance, 0, 6,
                f"Ricci scalar is not quadratic (deviation {res['max_deviation']:.3e}); "
                "theorem not applicable",
            )
        rho, var = estimate_rho(model, x, dirs)
        if var > einstein_tolerance * (1.0 + abs(rho)):
            return IdentityReport.refusal(
                "berwald", model.name, x, tolerance, 0, 6,
                f"model is not Einstein (spread {var:.3e})",
            )
        rhos.append(rho)
        frame = GeometryFrame(model, x, dirs, 5)
        max_ric = max(max_ric, float(np.max(np.abs(frame.ricci.value()))))
    rhos = np.asarray(rhos)
    spread = float(np.max(np.abs(rhos - rhos.mean())))
    flat = max_ric <= ricci_flat_tolerance
    constant = spread <= tolerance * max(1.0, abs(float(rhos.mean())))
    branch = "ricci-flat" if flat else "constant-rho"
    if not (flat or constant):
        return IdentityReport.build(
            "berwald", model.name, grid[0], [spread], [0.0], max(1.0, abs(float(rhos.mean()))),
            tolerance, 0, 6,
            note=f"quadratic (dev {max_dev:.3e}) but neither branch holds",
        )
    return IdentityReport.build(
        "berwald", model.name, grid[0], [spread if not flat else 0.0], [0.0],
        max(1.0, abs(float(rhos.mean()))), tolerance, 0, 6,
        note=f"branch={branch}, max|Ric|={max_ric:.3e}, quad dev={max_dev:.3e}",
    )


def check_stokes_torus(
    model: MetricModel,
    rule: SphereRule,
    base_resolution: int = 12,
    tolerance: float | None = None,
    chunk: int = DEFAULT_CHUNK,
) -> IdentityReport:
    """Boundary-free integration identities on a periodic model: the bundle
    integral of u_{|0} (horizontal divergence of u y^i delta_i, with u the
    (-1)-homogeneous sin(x1) y1/L) and of the vertical divergence of
    sin(x1) F dot{d}_1 both vanish."""
    tolerance = default_tolerance("stokes", model.dim) if tolerance is None else tolerance
    if not model.claims_periodic:
        return IdentityReport.refusal(
            "stokes", model.name, np.zeros(model.dim), tolerance, rule.resolution, 4,
            "model base is not 2pi-periodic",
        )
    n = model.dim

    def horizontal(x, u):
        # u_{|0} for the (-1)-homogeneous u = sin(x1) y^1 / L
        frame = GeometryFrame(model, x, u, 4)
        uval = jets.sin(frame.x_jets[0]) * frame.y_jets[0] / frame.L
        return frame.dynamical(frame.chern_h(uval, "")).value()

    def vertical(x, u):
        # div(Y^i dot{d}_i) = Y^i_{.i} + 2 C_i Y^i - n (y_i/F^2) Y^i
        # for the 1-homogeneous field Y^i = sin(x1) F delta^i_1
        frame = GeometryFrame(model, x, u, 4)
        Y = jets.sin(frame.x_jets[0]) * jets.sqrt(frame.L)
        div = Y.diff_y(0)
        div = div + 2.0 * frame.mean_cartan[0] * Y
        div = div - float(n) * (frame.y_low[0] / frame.L) * Y
        return div.value()

    num_h, l1_h = quadrature.base_integral_torus(
        model, horizontal, rule, base_resolution, chunk, fiber_scale=True
    )
    num_v, l1_v = quadrature.base_integral_torus(
        model, vertical, rule, base_resolution, chunk, fiber_scale=True
    )
    total_volume = quadrature.base_integral_torus(
        model, lambda x, u: np.ones(len(u)), rule, base_resolution, chunk
    )
    lhs = np.array([num_h, num_v]) / total_volume
    scale = max(1.0, l1_h / total_volume, l1_v / total_volume)
    return IdentityReport.build(
        "stokes", model.name, np.zeros(n), lhs, np.zeros(2), scale, tolerance,
        rule.resolution, 4,
        note=f"base_resolution={base_resolution}",
    )


def check_bianchi(
    model: MetricModel,
    x,
    tolerance: float | None = None,
) -> IdentityReport:
    """Vanishing divergence of the Einstein tensor for Riemannian models."""
    tolerance = default_tolerance("bianchi", model.dim) if tolerance is None else tolerance
    x = np.asarray(x, dtype=np.float64)
    if not model.claims_riemannian:
        return IdentityReport.refusal(
            "bianchi", model.name, x, tolerance, 0, 7,
            "classical contracted identity needs a Riemannian model",
        )
    residual = geometry.contracted_bianchi_riemannian(model, x)
    scale = 1.0
    return IdentityReport.build(
        "bianchi", model.name, x, residual, np.zeros_like(residual), scale,
        tolerance, 0, 7,
    )


def check_section_invariance(
    model: MetricModel,
    x,
    rule: SphereRule,
    lam: float = 2.0,
    tolerance: float | None = None,
) -> IdentityReport:
    tolerance = default_tolerance("section", model.dim) if tolerance is None else tolerance
    res = quadrature.section_invariance_check(model, x, rule, lam)
    return IdentityReport.build(
        "section", model.name, x, [res], [0.0], 1.0, tolerance, rule.resolution, 2,
        note=f"lambda={lam:g}",
    )


def check_algebra(
    model: MetricModel,
    x,
    y,
    tolerance: float = 1e-9,
    order: int = 7,
) -> IdentityReport:
    """Bundle of the exact-AD algebraic invariants at one tangent sample:
    metric compatibility, the y-contractions, the trace identity
    g^{ij}_{.i} = -2C^j, spray reproduction by the Christoffels, and the
    homogeneity ladder.  All residuals are pure roundoff, so the tolerance
    is absolute."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = model.dim
    fr = GeometryFrame(model, x, y, order)
    fr2 = GeometryFrame(model, x, 2.0 * y, order)
    res = {}

    def peak(arr) -> float:
        return float(np.max(np.abs(arr)))

    g_h = fr.chern_h(fr.g, "dd")
    res["g_ij|k"] = peak(_values(g_h))
    ginv_h = fr.chern_h(fr.g_inv, "uu")
    res["g^ij|k"] = peak(_values(ginv_h))
    L_dyn = fr.dynamical(fr.chern_h(fr.L, ""))
    res["L|0"] = peak(L_dyn.value()) / max(1.0, peak(fr.L.value()))

    c_contract = 0.0
    for i in range(n):
        for j in range(n):
            acc = sum((fr.cartan[i, j, k] * fr.y_jets[k]).value() for k in range(n))
            c_contract = max(c_contract, peak(acc))
    res["y^k C_ijk"] = c_contract
    res["y^i P_i"] = peak(sum((fr.mean_landsberg[i] * fr.y_jets[i]).value() for i in range(n)))

    trace = 0.0
    for j in range(n):
        acc = sum(fr.g_inv[i, j].diff_y(i).value() for i in range(n))
        acc = acc + 2.0 * sum((fr.g_inv[j, a] * fr.mean_cartan[a]).value() for a in range(n))
        trace = max(trace, peak(acc))
    res["g^ij_.i + 2C^j"] = trace

    spray_rep = 0.0
    for i in range(n):
        acc = sum(
            (fr.christoffel[i, j, k] * fr.y_jets[j] * fr.y_jets[k]).value()
            for j in range(n)
            for k in range(n)
        )
        spray_rep = max(spray_rep, peak(acc - 2.0 * fr.spray[i].value()))
    res["y^j y^k Gamma - 2G"] = spray_rep / max(1.0, peak(_values(fr.spray)))

    # homogeneity ladder: f(x, 2y) = 2^r f(x, y)
    ladder = {
        "g: 0-hom": (_values(fr.g), _values(fr2.g), 0),
        "omega: 0-hom": (_values(fr.hilbert), _values(fr2.hilbert), 0)
        if model.claims_positive_definite
        else None,
        "C: -1-hom": (_values(fr.cartan), _values(fr2.cartan), -1),
        "mean C: -1-hom": (_values(fr.mean_cartan), _values(fr2.mean_cartan), -1),
        "P: 0-hom": (_values(fr.landsberg), _values(fr2.landsberg), 0),
        "mean P: 0-hom": (_values(fr.mean_landsberg), _values(fr2.mean_landsberg), 0),
        "G: 2-hom": (_values(fr.spray), _values(fr2.spray), 2),
        "N: 1-hom": (_values(fr.nonlinear), _values(fr2.nonlinear), 1),
        "Gamma: 0-hom": (_values(fr.christoffel), _values(fr2.christoffel), 0),
        "Ric: 2-hom": (fr.ricci.value(), fr2.ricci.value(), 2),
    }
    for name, entry in ladder.items():
        if entry is None:
            continue
        v1, v2, r = entry
        res[name] = peak(v2 - 2.0**r * v1) / (1.0 + peak(v1))

    if model.claims_positive_definite:
        om = _values(fr.hilbert)
        F = np.sqrt(fr.L.value())
        res["y^i omega_i - F"] = peak(
            np.einsum("...i,...i->...", om, np.broadcast_to(y, om.shape)) - F
        ) / max(1.0, peak(F))
        ginv = _values(fr.g_inv)
        res["g^ij omega_i omega_j - 1"] = peak(
            np.einsum("...ij,...i,...j->...", ginv, om, om) - 1.0
        )
        om_dyn = fr.dynamical(fr.chern_h(fr.hilbert, "d"))
        res["omega_i|0"] = peak(_values(om_dyn))

    worst = max(res.values())
    worst_name = max(res, key=res.get)
    point = x if x.ndim == 1 else x[0]
    return IdentityReport.build(
        "algebra", model.name, point, [worst], [0.0], 1.0, tolerance, 0, order,
        note=f"worst={worst_name}; " + ", ".join(f"{k}={v:.1e}" for k, v in res.items()),
    )


def classify(
    model: MetricModel,
    grid: np.ndarray | None = None,
    directions: np.ndarray | None = None,
    rule: SphereRule | None = None,
    einstein_tolerance: float = 1e-6,
    landsberg_tolerance: float = 1e-7,
    quadratic_tolerance: float = 1e-6,
    riemannian_tolerance: float = 1e-9,
) -> ClassificationReport:
    """Einstein / weakly-Landsberg / quadratic-Ricci / Riemannian verdicts
    over a base grid."""
    n = model.dim
    grid = base_grid(model, per_axis=3) if grid is None else np.asarray(grid, dtype=np.float64)
    dirs = default_directions(n) if directions is None else directions
    rhos = []
    max_var = 0.0
    einstein = True
    max_P = 0.0
    max_quad_dev = 0.0
    quadratic = True
    max_riem_dev = 0.0
    riemannian = True
    for x in grid:
        rho, var = estimate_rho(model, x, dirs)
        rhos.append(rho)
        max_var = max(max_var, var)
        if var > einstein_tolerance * (1.0 + abs(rho)):
            einstein = False
        frame = GeometryFrame(model, x, dirs, 6)
        max_P = max(max_P, float(np.max(np.abs(_values(frame.mean_landsberg)))))
        g_vals = _values(frame.g)
        dev = float(np.max(np.abs(g_vals - g_vals[:1])))
        max_riem_dev = max(max_riem_dev, dev)
        if dev > riemannian_tolerance * (1.0 + float(np.max(np.abs(g_vals)))):
            riemannian = False
        res = geometry.quadratic_ric_test(model, x, dirs, tol=quadratic_tolerance)
        max_quad_dev = max(max_quad_dev, res["max_deviation"])
        if not res["is_quadratic"]:
            quadratic = False
    weakly = max_P <= landsberg_tolerance
    return ClassificationReport(
        model=model.name,
        einstein=einstein,
        rho_values=tuple(float(r) for r in rhos),
        einstein_variance=max_var,
        weakly_landsberg=weakly,
        max_mean_landsberg=max_P,
        berwald_quadratic=quadratic,
        quadratic_deviation=max_quad_dev,
        riemannian=riemannian,
        riemannian_deviation=max_riem_dev,
    )
