"""Metric models: the contract between metric data and the geometry kernels.

A model bundles the squared metric function L(x, y), its conic domain, a
sampling box for the base chart, and capability flags.  Every constructor
validates 2-homogeneity of L in y and nondegeneracy of the vertical Hessian
on random domain samples before handing the model out; a function failing
those checks is not a metric and is rejected outright.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import jets
from .expressions import MetricExpr, ParseError, parse_expression

__all__ = [
    "MetricModel",
    "ModelValidationError",
    "builtin",
    "builtin_names",
    "parse_metric_dsl",
    "parse_metric_file",
    "domain_sample",
]

VALIDATION_SAMPLES = 50
VALIDATION_TOL = 1e-9
_COND_LIMIT = 1e12


class ModelValidationError(ValueError):
    """The candidate L is not a usable pseudo-Finsler metric."""


@dataclass(frozen=True)
class MetricModel:
    """A squared metric L on a conic domain, evaluable on jets and arrays.

    ``lagrangian(xs, ys)`` receives per-variable sequences (columns of plain
    arrays, or seeded jets) and returns L in kind.  ``domain(x, y)`` is the
    conic predicate A; sampling stays inside ``base_box`` (shape (n, 2)).
    """

    name: str
    dim: int
    lagrangian: Callable
    domain: Callable[[np.ndarray, np.ndarray], np.ndarray]
    base_box: np.ndarray
    claims_positive_definite: bool = True
    claims_riemannian: bool = False
    claims_x_independent: bool = False
    claims_periodic: bool = False
    params: dict = field(default_factory=dict)

    def value(self, x, y) -> np.ndarray:
        """L at (x, y); both arrays of shape (..., n)."""
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        xs = [x[..., i] for i in range(self.dim)]
        ys = [y[..., i] for i in range(self.dim)]
        return np.asarray(self.lagrangian(xs, ys), dtype=np.float64)

    def lagrangian_jet(self, ctx: jets.JetContext, x, y) -> jets.Jet:
        """L as a jet of ``ctx.order`` at the (batched) point (x, y)."""
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        point = np.concatenate(np.broadcast_arrays(x, y), axis=-1)
        seeds = jets.seed(ctx, point)
        out = self.lagrangian(seeds[: self.dim], seeds[self.dim :])
        if not isinstance(out, jets.Jet):
            out = jets.constant(ctx, out)
        return out

    def in_domain(self, x, y) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        ok = np.asarray(self.domain(x, y), dtype=bool)
        return ok & (np.linalg.norm(y, axis=-1) > 0)

    def __repr__(self) -> str:
        return f"MetricModel({self.name!r}, dim={self.dim})"


# -- validation ---------------------------------------------------------------


def _vertical_hessian_values(model: MetricModel, x, y) -> np.ndarray:
    """g_ij = (1/2) d^2 L / dy_i dy_j at a batch of samples, shape (..., n, n)."""
    n = model.dim
    ctx = jets.get_context(n, 2)
    L = model.lagrangian_jet(ctx, x, y)
    batch = np.broadcast_shapes(np.shape(x)[:-1], np.shape(y)[:-1])
    g = np.empty(batch + (n, n))
    mi = np.zeros(2 * n, dtype=np.int64)
    for i in range(n):
        for j in range(i, n):
            mi[:] = 0
            mi[n + i] += 1
            mi[n + j] += 1
            g[..., i, j] = 0.5 * L.partial(mi)
            g[..., j, i] = g[..., i, j]
    return g


def validate_model(
    model: MetricModel,
    samples: int = VALIDATION_SAMPLES,
    tol: float = VALIDATION_TOL,
    seed: int = 1905,
) -> MetricModel:
    """Run the acceptance invariants on random domain samples; raise on failure."""
    x, y = domain_sample(model, samples, seed=seed)
    n = model.dim

    ctx1 = jets.get_context(n, 1)
    L = model.lagrangian_jet(ctx1, x, y)
    Lval = L.value()
    euler = -2.0 * Lval
    mi = np.zeros(2 * n, dtype=np.int64)
    for i in range(n):
        mi[:] = 0
        mi[n + i] = 1
        euler = euler + y[..., i] * L.partial(mi)
    bad = np.abs(euler) > tol * (1.0 + np.abs(Lval))
    if np.any(bad):
        k = int(np.argmax(np.abs(euler)))
        raise ModelValidationError(
            f"{model.name}: L is not 2-homogeneous in y "
            f"(Euler residual {euler[k]:.3e} at x={x[k]}, y={y[k]})"
        )

    g = _vertical_hessian_values(model, x, y)
    cond = np.linalg.cond(g)
    if np.any(~np.isfinite(cond)) or np.any(cond > _COND_LIMIT):
        k = int(np.argmax(cond))
        raise ModelValidationError(
            f"{model.name}: fundamental tensor degenerate "
            f"(cond {cond[k]:.3e} at x={x[k]}, y={y[k]})"
        )
    if model.claims_positive_definite:
        eig = np.linalg.eigvalsh(g)
        if np.any(eig <= 0):
            k = int(np.argmin(eig.min(axis=-1)))
            raise ModelValidationError(
                f"{model.name}: fundamental tensor not positive definite "
                f"(min eigenvalue {eig.min():.3e} at x={x[k]}, y={y[k]})"
            )
    if model.claims_riemannian:
        # quadraticity: vertical Hessian must not depend on the direction
        rng = np.random.default_rng(seed + 1)
        dirs = rng.standard_normal((20, n))
        dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
        gdir = _vertical_hessian_values(model, x[:1], dirs)
        dev = np.max(np.abs(gdir - gdir[:1]))
        if dev > 1e-9 * (1.0 + np.max(np.abs(gdir))):
            raise ModelValidationError(
                f"{model.name}: claims_riemannian but the vertical Hessian of L "
                f"varies with direction (max deviation {dev:.3e})"
            )

    # conic: scaling y must not leave the domain
    if not np.all(model.in_domain(x, 2.0 * y)):
        raise ModelValidationError(f"{model.name}: domain predicate is not conic")
    return model


# -- sampling -----------------------------------------------------------------


def domain_sample(
    model: MetricModel, count: int, seed: int = 0, max_tries: int = 200
) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic (x, y) samples: x uniform in the base box, y uniform on
    the Euclidean unit sphere, rejected against the domain predicate."""
    if count < 1:
        raise ValueError("sample count must be >= 1")
    rng = np.random.default_rng(seed)
    lo = model.base_box[:, 0]
    hi = model.base_box[:, 1]
    xs = np.empty((0, model.dim))
    ys = np.empty((0, model.dim))
    for _ in range(max_tries):
        m = max(count, 2 * (count - len(xs)))
        x = rng.uniform(lo, hi, size=(m, model.dim))
        y = rng.standard_normal((m, model.dim))
        y /= np.linalg.norm(y, axis=-1, keepdims=True)
        ok = model.in_domain(x, y)
        xs = np.concatenate([xs, x[ok]])
        ys = np.concatenate([ys, y[ok]])
        if len(xs) >= count:
            return xs[:count], ys[:count]
    raise ModelValidationError(
        f"{model.name}: domain predicate rejected nearly all samples"
    )


def base_grid(model: MetricModel, per_axis: int = 5, shrink: float = 0.7) -> np.ndarray:
    """Regular lattice of base points inside the model's sampling box."""
    lo = model.base_box[:, 0]
    hi = model.base_box[:, 1]
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo) * shrink
    axes = [np.linspace(mid[i] - half[i], mid[i] + half[i], per_axis) for i in range(model.dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


# -- built-in families ----------------------------------------------------------


def _domain_all(x, y):
    return np.ones(np.broadcast_shapes(x.shape[:-1], y.shape[:-1]), dtype=bool)


def _box(n: int, half: float) -> np.ndarray:
    return np.array([[-half, half]] * n, dtype=np.float64)


def _sq_norm(vs):
    total = vs[0] * vs[0]
    for v in vs[1:]:
        total = total + v * v
    return total


def _euclidean(n: int) -> MetricModel:
    return MetricModel(
        name=f"euclidean({n})",
        dim=n,
        lagrangian=lambda xs, ys: _sq_norm(ys),
        domain=_domain_all,
        base_box=_box(n, 1.0),
        claims_riemannian=True,
        claims_x_independent=True,
        claims_periodic=True,
    )


def _minkowski_randers(n: int, b) -> MetricModel:
    b = np.asarray(b, dtype=np.float64)
    if b.shape != (n,):
        raise ModelValidationError(f"minkowski_randers: b must have length {n}")
    bnorm = float(np.linalg.norm(b))
    if bnorm >= 1.0:
        raise ModelValidationError(
            f"minkowski_randers: |b| = {bnorm:.3f} violates the norm condition |b| < 1"
        )

    def L(xs, ys):
        beta = sum(float(b[i]) * ys[i] for i in range(n) if b[i] != 0.0)
        F = jets.sqrt(_sq_norm(ys)) + beta
        return F * F

    return MetricModel(
        name=f"minkowski_randers({n})",
        dim=n,
        lagrangian=L,
        domain=_domain_all,
        base_box=_box(n, 1.0),
        claims_riemannian=bool(bnorm == 0.0),
        claims_x_independent=True,
        claims_periodic=True,
        params={"b": b.tolist()},
    )


def _riemannian(n: int, g_exprs) -> MetricModel:
    mat = [[parse_expression(g_exprs[i][j], n) for j in range(n)] for i in range(n)]

    def L(xs, ys):
        total = None
        for i in range(n):
            for j in range(n):
                term = mat[i][j](xs, ys) * ys[i] * ys[j]
                total = term if total is None else total + term
        return total

    return MetricModel(
        name=f"riemannian({n})",
        dim=n,
        lagrangian=L,
        domain=_domain_all,
        base_box=_box(n, 1.0),
        claims_riemannian=True,
        params={"g": [[e.source for e in row] for row in mat]},
    )


def _sphere_round(n: int, radius: float = 1.0) -> MetricModel:
    # single stereographic chart; conformal factor 4R^4 / (R^2 + |x|^2)^2
    if radius <= 0:
        raise ModelValidationError("sphere_round: radius must be positive")
    R2 = radius * radius

    def L(xs, ys):
        conf = (4.0 * R2 * R2) / ((_sq_norm(xs) + R2) ** 2)
        return conf * _sq_norm(ys)

    return MetricModel(
        name=f"sphere_round({n},{radius:g})",
        dim=n,
        lagrangian=L,
        domain=_domain_all,
        base_box=_box(n, 1.0),
        claims_riemannian=True,
        params={"radius": radius},
    )


def _torus_conformal(n: int, amplitude: float) -> MetricModel:
    if not 0.0 <= amplitude < 0.3:
        raise ModelValidationError(
            f"torus_conformal: amplitude {amplitude} outside [0, 0.3)"
        )

    def L(xs, ys):
        phase = jets.sin(xs[0])
        for xi in xs[1:]:
            phase = phase + jets.sin(xi)
        return jets.exp(2.0 * amplitude * phase) * _sq_norm(ys)

    return MetricModel(
        name=f"torus_conformal({n},{amplitude:g})",
        dim=n,
        lagrangian=L,
        domain=_domain_all,
        base_box=np.array([[0.0, 2.0 * np.pi]] * n),
        claims_riemannian=True,
        claims_periodic=True,
        params={"amplitude": amplitude},
    )


def _randers(n: int, alpha=None, beta=None) -> MetricModel:
    """Randers metric F = sqrt(a_ij y^i y^j) + b_i(x) y^i over a Riemannian a."""
    if alpha is None:
        alpha = [["1" if i == j else "0" for j in range(n)] for i in range(n)]
    if beta is None:
        beta = ["0.3*sin(x2)"] + ["0"] * (n - 1)
    a_mat = [[parse_expression(alpha[i][j], n) for j in range(n)] for i in range(n)]
    b_vec = [parse_expression(beta[i], n) for i in range(n)]

    def L(xs, ys):
        quad = None
        for i in range(n):
            for j in range(n):
                term = a_mat[i][j](xs, ys) * ys[i] * ys[j]
                quad = term if quad is None else quad + term
        lin = None
        for i in range(n):
            term = b_vec[i](xs, ys) * ys[i]
            lin = term if lin is None else lin + term
        F = jets.sqrt(quad) + lin
        return F * F

    model = MetricModel(
        name=f"randers({n})",
        dim=n,
        lagrangian=L,
        domain=_domain_all,
        base_box=_box(n, 1.0),
        params={"alpha": alpha, "beta": beta},
    )
    _check_randers_norm(model, a_mat, b_vec)
    return model


def _check_randers_norm(model, a_mat, b_vec, samples: int = 50) -> None:
    rng = np.random.default_rng(7)
    x = rng.uniform(model.base_box[:, 0], model.base_box[:, 1], size=(samples, model.dim))
    n = model.dim
    xs = [x[:, i] for i in range(n)]
    zeros = [np.zeros(samples)] * n
    a = np.empty((samples, n, n))
    b = np.empty((samples, n))
    for i in range(n):
        b[:, i] = np.broadcast_to(np.asarray(b_vec[i](xs, zeros), dtype=np.float64), (samples,))
        for j in range(n):
            a[:, i, j] = np.broadcast_to(
                np.asarray(a_mat[i][j](xs, zeros), dtype=np.float64), (samples,)
            )
    norm2 = np.einsum("sij,si,sj->s", np.linalg.inv(a), b, b)
    if np.any(norm2 >= 1.0):
        raise ModelValidationError(
            f"randers: ||beta||_alpha = {float(np.sqrt(norm2.max())):.3f} >= 1 "
            "violates the norm condition"
        )


def _funk(n: int) -> MetricModel:
    """Funk metric of the open unit ball:
    F = (sqrt((1-|x|^2)|y|^2 + <x,y>^2) + <x,y>) / (1-|x|^2)."""

    def L(xs, ys):
        x2 = _sq_norm(xs)
        xy = xs[0] * ys[0]
        for i in range(1, n):
            xy = xy + xs[i] * ys[i]
        one_minus = 1.0 - x2
        F = (jets.sqrt(one_minus * _sq_norm(ys) + xy * xy) + xy) / one_minus
        return F * F

    def domain(x, y):
        return np.sum(x * x, axis=-1) < 1.0

    half = 0.8 / np.sqrt(n)
    return MetricModel(
        name=f"funk({n})",
        dim=n,
        lagrangian=L,
        domain=domain,
        base_box=_box(n, half),
    )


_BUILTINS = {
    "euclidean": _euclidean,
    "minkowski_randers": _minkowski_randers,
    "riemannian": _riemannian,
    "sphere_round": _sphere_round,
    "torus_conformal": _torus_conformal,
    "randers": _randers,
    "funk": _funk,
}


def builtin_names() -> tuple[str, ...]:
    return tuple(sorted(_BUILTINS))


def builtin(name: str, *args, validate: bool = True, **kwargs) -> MetricModel:
    """Construct and validate one of the built-in metric families."""
    try:
        factory = _BUILTINS[name]
    except KeyError:
        raise ModelValidationError(
            f"unknown builtin metric {name!r}; choose from {builtin_names()}"
        ) from None
    model = factory(*args, **kwargs)
    return validate_model(model) if validate else model


# -- user-defined metrics -------------------------------------------------------


def parse_metric_dsl(
    source: str,
    n: int,
    name: str = "user",
    domain_expr: str | None = None,
    positive_definite: bool = True,
    periodic: bool = False,
    box_half: float = 1.0,
    validate: bool = True,
) -> MetricModel:
    """Build a MetricModel from an L expression; validation failure is an
    error because a non-2-homogeneous L is not a metric."""
    expr = parse_expression(source, n)
    domain = _domain_all
    if domain_expr is not None:
        pred = parse_expression(domain_expr, n)

        def domain(x, y, _pred=pred):
            xs = [x[..., i] for i in range(n)]
            ys = [y[..., i] for i in range(n)]
            val = np.asarray(_pred(xs, ys), dtype=np.float64)
            return np.broadcast_to(val > 0.0, np.broadcast_shapes(x.shape[:-1], y.shape[:-1]))

    model = MetricModel(
        name=name,
        dim=n,
        lagrangian=lambda xs, ys: expr(xs, ys),
        domain=domain,
        base_box=_box(n, box_half) if not periodic else np.array([[0.0, 2 * np.pi]] * n),
        claims_positive_definite=positive_definite,
        claims_periodic=periodic,
        params={"L": source},
    )
    return validate_model(model) if validate else model


def parse_metric_file(text: str, validate: bool = True) -> MetricModel:
    """Parse a plain-text metric declaration (key: value lines).

    Recognized keys: name, dim, L, domain, positive_definite, periodic,
    box_half.  Lines starting with '#' are comments.
    """
    fields: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if ":" not in line:
            raise ParseError(f"expected 'key: value' on line {lineno}", lineno)
        key, _, value = line.partition(":")
        fields[key.strip().lower()] = value.strip()
    if "dim" not in fields or "l" not in fields:
        raise ParseError("metric declaration needs at least 'dim' and 'L'", 0)
    truthy = {"true": True, "yes": True, "1": True, "false": False, "no": False, "0": False}
    return parse_metric_dsl(
        fields["l"],
        int(fields["dim"]),
        name=fields.get("name", "user"),
        domain_expr=fields.get("domain"),
        positive_definite=truthy.get(fields.get("positive_definite", "true").lower(), True),
        periodic=truthy.get(fields.get("periodic", "false").lower(), False),
        box_half=float(fields.get("box_half", "1.0")),
        validate=validate,
    )
