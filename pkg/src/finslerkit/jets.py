"""Truncated multivariate Taylor (jet) arithmetic over the chart variables.

A jet stores the Taylor coefficients (partial derivative divided by the
multi-index factorial) of a scalar function of the 2n chart variables
(x^1..x^n, y^1..y^n) at an expansion point, up to a configurable total
order K.  Multiplication is a truncated convolution, elementary functions
are univariate Taylor recurrences composed with the inner jet, so every
mixed partial of a composite expression up to order K comes out exact to
roundoff.

Coefficient arrays may carry arbitrary leading batch axes; all operations
broadcast over them, which is how quadrature nodes are evaluated in bulk.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations_with_replacement

import numpy as np

try:
    import numba

    # pin the threading layer: avoids the TBB probe and its version warning
    numba.config.THREADING_LAYER = "omp"
    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is an optional fast path
    numba = None
    _HAVE_NUMBA = False

__all__ = [
    "JetContext",
    "Jet",
    "JetError",
    "get_context",
    "seed",
    "constant",
    "sqrt",
    "exp",
    "log",
    "sin",
    "cos",
    "powr",
]

# Sentinel polynomial degree for "not a polynomial of known degree".
_NOT_POLY = 10**9

# Soft cap on the size of the temporary (batch, pairs) product array used by
# one truncated convolution, in float64 elements.
_MUL_TEMP_ELEMS = 3 * 10**7


class JetError(ValueError):
    """Invalid jet operation: order overflow, domain violation, shape mismatch."""


if _HAVE_NUMBA:

    @numba.njit(parallel=True, cache=True)
    def _conv_kernel(a, b, ai, bi, oi, out):  # pragma: no cover - jitted
        for s in numba.prange(a.shape[0]):
            for p in range(ai.shape[0]):
                out[s, oi[p]] += a[s, ai[p]] * b[s, bi[p]]

    @numba.njit(parallel=True, cache=True)
    def _inv_kernel(A, X0, ai, bi, seg, out, X):  # pragma: no cover - jitted
        n = A.shape[-1]
        for s in numba.prange(A.shape[0]):
            acc = np.empty((n, n))
            for t in range(out.shape[0]):
                acc[:, :] = 0.0
                for p in range(seg[t], seg[t + 1]):
                    for i in range(n):
                        for j in range(n):
                            v = 0.0
                            for k in range(n):
                                v += A[s, ai[p], i, k] * X[s, bi[p], k, j]
                            acc[i, j] += v
                for i in range(n):
                    for j in range(n):
                        v = 0.0
                        for k in range(n):
                            v += X0[s, i, k] * acc[k, j]
                        X[s, out[t], i, j] = -v


def _graded_exponents(nvars: int, order: int, caps: np.ndarray) -> np.ndarray:
    """All exponent vectors with total degree <= order, graded by degree.

    ``caps[v]`` bounds the degree in variable-group v (here: per variable an
    upper bound inherited from the block cap).  Enumeration is by total
    degree first, lexicographic within a degree, so a prefix of the list is
    exactly the set of indices of a lower order.
    """
    rows: list[tuple[int, ...]] = []
    for degree in range(order + 1):
        block: list[tuple[int, ...]] = []
        for combo in combinations_with_replacement(range(nvars), degree):
            e = [0] * nvars
            for v in combo:
                e[v] += 1
            if all(e[v] <= caps[v] for v in range(nvars)):
                block.append(tuple(e))
        block.sort()
        rows.extend(block)
    return np.array(rows, dtype=np.int64).reshape(len(rows), nvars)


class JetContext:
    """Truncation context: dimension, maximum order, coefficient bookkeeping.

    Parameters
    ----------
    dim : manifold dimension n >= 2; jets live over 2n variables.
    order : maximum total derivative order K >= 1.
    x_degree_cap : optional bound on the x-block degree of stored
        coefficients.  The curvature pipeline never takes more than three
        base derivatives, so capping shrinks storage considerably at high K.
    """

    def __init__(self, dim: int, order: int = 6, x_degree_cap: int | None = None):
        if dim < 2:
            raise JetError(f"manifold dimension must be >= 2, got {dim}")
        if order < 1:
            raise JetError(f"jet order must be >= 1, got {order}")
        self.dim = dim
        self.nvars = 2 * dim
        self.order = order
        self.x_cap = order if x_degree_cap is None else min(int(x_degree_cap), order)
        if self.x_cap < 0:
            raise JetError("x_degree_cap must be nonnegative")
        self.x_labels = tuple(f"x{i + 1}" for i in range(dim))
        self.y_labels = tuple(f"y{i + 1}" for i in range(dim))

        caps = np.array([self.x_cap] * dim + [order] * dim, dtype=np.int64)
        self.exponents = _graded_exponents(self.nvars, order, caps)
        self.degrees = self.exponents.sum(axis=1)
        self.xdegrees = self.exponents[:, : self.dim].sum(axis=1)
        self.ncoeff_total = len(self.exponents)

        # ncoeff(d): number of stored coefficients of degree <= d.
        self._ncoeff = np.searchsorted(self.degrees, np.arange(order + 2), side="left")

        # Positional base-(K+1) key for exponent lookup (no digit carries as
        # long as individual degrees stay <= K, which truncation guarantees).
        self._base = (order + 1) ** np.arange(self.nvars, dtype=np.int64)
        self._keys = self.exponents @ self._base
        self._key_sorter = np.argsort(self._keys)
        self._keys_sorted = self._keys[self._key_sorter]

        self._mul_tables: dict[tuple[int, int, int], tuple] = {}
        self._diff_maps: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        self._inv_pairs: dict[int, list] = {}

    def ncoeff(self, order: int) -> int:
        """Number of stored coefficients for a jet of the given order."""
        return int(self._ncoeff[min(order, self.order) + 1])

    def index_of(self, multi_index) -> int:
        mi = np.asarray(multi_index, dtype=np.int64)
        if mi.shape != (self.nvars,):
            raise JetError(f"multi-index must have length {self.nvars}")
        if np.any(mi < 0):
            raise JetError("multi-index entries must be nonnegative")
        key = int(mi @ self._base)
        pos = np.searchsorted(self._keys_sorted, key)
        if pos >= len(self._keys_sorted) or self._keys_sorted[pos] != key:
            raise JetError(
                f"multi-index {tuple(int(v) for v in mi)} outside stored range "
                f"(order {self.order}, x-degree cap {self.x_cap})"
            )
        return int(self._key_sorter[pos])

    def _lookup_keys(self, keys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Map exponent keys to coefficient indices; second array flags hits."""
        pos = np.searchsorted(self._keys_sorted, keys)
        pos = np.minimum(pos, len(self._keys_sorted) - 1)
        hit = self._keys_sorted[pos] == keys
        return self._key_sorter[pos], hit

    def mul_table(self, da: int, db: int, dout: int):
        """Convolution table for products of degree-<=da by degree-<=db jets.

        Returns (a_idx, b_idx, starts, out_idx, o_idx): flat pair lists
        sorted by output coefficient, reduceat offsets, the distinct output
        positions and the per-pair output index.
        """
        da = min(da, dout)
        db = min(db, dout)
        key = (da, db, dout)
        cached = self._mul_tables.get(key)
        if cached is not None:
            return cached
        if da > db:
            bi, ai, starts, out, oi = self.mul_table(db, da, dout)
            table = (ai, bi, starts, out, oi)
            self._mul_tables[key] = table
            return table

        a_list, b_list, o_list = [], [], []
        for d1 in range(da + 1):
            lo1, hi1 = self._ncoeff[d1], self._ncoeff[d1 + 1]
            if hi1 == lo1:
                continue
            for d2 in range(min(db, dout - d1) + 1):
                lo2, hi2 = self._ncoeff[d2], self._ncoeff[d2 + 1]
                if hi2 == lo2:
                    continue
                ia = np.arange(lo1, hi1, dtype=np.int64)
                ib = np.arange(lo2, hi2, dtype=np.int64)
                ksum = self._keys[ia][:, None] + self._keys[ib][None, :]
                oi, hit = self._lookup_keys(ksum.ravel())
                if not hit.all():
                    # pairs whose x-degree exceeds the cap are not stored
                    keep = hit
                    oi = oi[keep]
                    aa = np.repeat(ia, hi2 - lo2)[keep]
                    bb = np.tile(ib, hi1 - lo1)[keep]
                else:
                    aa = np.repeat(ia, hi2 - lo2)
                    bb = np.tile(ib, hi1 - lo1)
                a_list.append(aa)
                b_list.append(bb)
                o_list.append(oi)
        a_idx = np.concatenate(a_list)
        b_idx = np.concatenate(b_list)
        o_idx = np.concatenate(o_list)
        perm = np.argsort(o_idx, kind="stable")
        a_idx = np.ascontiguousarray(a_idx[perm])
        b_idx = np.ascontiguousarray(b_idx[perm])
        o_idx = np.ascontiguousarray(o_idx[perm])
        out, starts = np.unique(o_idx, return_index=True)
        table = (a_idx, b_idx, starts, out, o_idx)
        self._mul_tables[key] = table
        return table

    def diff_map(self, var: int) -> tuple[np.ndarray, np.ndarray]:
        """Gather map for d/dz_var: target k reads source index src[k] times fac[k].

        Targets whose source exponent falls outside the stored range (x-cap
        boundary) get src -1 / fac 0; their validity is tracked by the jet's
        x_order, not by the map.
        """
        cached = self._diff_maps.get(var)
        if cached is not None:
            return cached
        nt = self.ncoeff(self.order - 1)
        keys_t = self._keys[:nt] + self._base[var]
        src, hit = self._lookup_keys(keys_t)
        fac = (self.exponents[:nt, var] + 1).astype(np.float64)
        src = np.where(hit, src, -1)
        fac = np.where(hit, fac, 0.0)
        table = (src, fac)
        self._diff_maps[var] = table
        return table

    def inverse_table(self, dout: int):
        """Convolution pairs with nonconstant left factor, in graded order.

        Used by the matrix-inverse recurrence: segment t of (a_idx, b_idx)
        lists the decompositions of output coefficient out[t] with
        deg(a) >= 1; since segments are graded by deg(out), every b index is
        already solved when its segment is processed.
        """
        cached = self._inv_pairs.get(dout)
        if cached is not None:
            return cached
        a_idx, b_idx, starts, out, _ = self.mul_table(dout, dout, dout)
        ends = np.append(starts[1:], len(a_idx))
        aa_l, bb_l, out_l, seg = [], [], [], [0]
        for d in range(1, dout + 1):
            for s_i in (self.degrees[out] == d).nonzero()[0]:
                aa, bb = a_idx[starts[s_i] : ends[s_i]], b_idx[starts[s_i] : ends[s_i]]
                keep = self.degrees[aa] >= 1
                aa_l.append(aa[keep])
                bb_l.append(bb[keep])
                out_l.append(out[s_i])
                seg.append(seg[-1] + int(keep.sum()))
        table = (
            np.ascontiguousarray(np.concatenate(aa_l)) if aa_l else np.empty(0, np.int64),
            np.ascontiguousarray(np.concatenate(bb_l)) if bb_l else np.empty(0, np.int64),
            np.array(seg, dtype=np.int64),
            np.array(out_l, dtype=np.int64),
        )
        self._inv_pairs[dout] = table
        return table

    def __repr__(self) -> str:
        return (
            f"JetContext(dim={self.dim}, order={self.order}, "
            f"x_cap={self.x_cap}, ncoeff={self.ncoeff_total})"
        )


@lru_cache(maxsize=None)
def get_context(dim: int, order: int = 6, x_degree_cap: int | None = None) -> JetContext:
    """Shared JetContext cache; table construction is paid once per shape."""
    return JetContext(dim, order, x_degree_cap)


@dataclass(frozen=True, eq=False)
class Jet:
    """One truncated Taylor expansion (possibly batched over leading axes).

    order : total degree through which the coefficients are valid.
    x_order : x-block degree through which they are valid (drops when the
        expansion is differentiated in a base variable near the cap).
    poly_degree : exact polynomial degree when known, which lets products
        of seeds and low-degree polynomials skip most of the convolution.
    """

    ctx: JetContext
    coeffs: np.ndarray
    order: int
    x_order: int
    poly_degree: int = _NOT_POLY
    # tightest known bound on the degree of nonzero coefficients; -1 = unset
    data_degree: int = -1

    # keep numpy from broadcasting over jets; reflected dunders handle mixing
    __array_ufunc__ = None

    # -- bookkeeping ------------------------------------------------------

    @property
    def batch_shape(self) -> tuple:
        return self.coeffs.shape[:-1]

    def _effective_order(self) -> int:
        # an exact polynomial has all higher coefficients identically zero
        if self.poly_degree <= self.order:
            return self.ctx.order
        return self.order

    def _effective_x_order(self) -> int:
        if self.poly_degree <= self.order:
            return self.ctx.x_cap
        return self.x_order

    def _data_degree(self) -> int:
        # tightest degree bound on nonzero stored coefficients
        d = min(self.order, self.poly_degree)
        if self.data_degree >= 0:
            d = min(d, self.data_degree)
        return d

    def truncate(self, order: int) -> "Jet":
        if order > self._effective_order():
            raise JetError(
                f"cannot extend jet of order {self.order} to order {order}"
            )
        n = self.ctx.ncoeff(order)
        if n <= self.coeffs.shape[-1]:
            coeffs = self.coeffs[..., :n]
        else:
            pad = np.zeros(self.batch_shape + (n - self.coeffs.shape[-1],))
            coeffs = np.concatenate([self.coeffs, pad], axis=-1)
        return Jet(
            self.ctx,
            coeffs,
            order,
            self._effective_x_order(),
            self.poly_degree,
            min(self._data_degree(), order),
        )

    # -- extraction -------------------------------------------------------

    def value(self) -> np.ndarray:
        return self.coeffs[..., 0]

    def partial(self, multi_index) -> np.ndarray:
        """Raw mixed partial: Taylor coefficient times multi-index factorial."""
        mi = np.asarray(multi_index, dtype=np.int64)
        total = int(mi.sum())
        xdeg = int(mi[: self.ctx.dim].sum())
        if total > self.order or xdeg > self.x_order:
            if self.poly_degree > self.order:
                raise JetError(
                    f"partial of total order {total} (x-degree {xdeg}) exceeds jet "
                    f"validity (order {self.order}, x-order {self.x_order})"
                )
        k = self.ctx.index_of(mi)
        if k >= self.coeffs.shape[-1]:
            return np.zeros(self.batch_shape)
        fac = 1.0
        for m in mi:
            fac *= math.factorial(int(m))
        return self.coeffs[..., k] * fac

    def coefficient(self, multi_index) -> np.ndarray:
        """Taylor coefficient (factorial-divided form) at a multi-index."""
        mi = np.asarray(multi_index, dtype=np.int64)
        k = self.ctx.index_of(mi)
        if k >= self.coeffs.shape[-1]:
            return np.zeros(self.batch_shape)
        return self.coeffs[..., k]

    # -- differentiation --------------------------------------------------

    def diff(self, var: int) -> "Jet":
        """Jet of the partial derivative in chart variable ``var`` (0..2n-1)."""
        eff = self._effective_order()
        if eff < 1:
            raise JetError("jet order exhausted: cannot differentiate further")
        is_x = var < self.ctx.dim
        eff_x = self._effective_x_order()
        new_x = eff_x - 1 if is_x else eff_x
        if is_x and new_x < 0:
            raise JetError("x-degree budget exhausted: cannot differentiate in x")
        new_order = eff - 1
        src, fac = self.ctx.diff_map(var)
        n = self.ctx.ncoeff(new_order)
        src = src[:n]
        fac = fac[:n]
        safe = np.where(src >= 0, src, 0)
        avail = self.coeffs.shape[-1]
        inside = safe < avail
        gathered = np.where(
            inside,
            np.take(self.coeffs, np.where(inside, safe, 0), axis=-1),
            0.0,
        )
        coeffs = gathered * fac
        if self.poly_degree <= self.order:
            pdeg: int = max(self.poly_degree - 1, 0)
        else:
            pdeg = _NOT_POLY
        ddeg = max(self._data_degree() - 1, 0)
        return Jet(self.ctx, coeffs, new_order, min(new_x, self.ctx.x_cap), pdeg, ddeg)

    def diff_x(self, i: int) -> "Jet":
        return self.diff(i)

    def diff_y(self, i: int) -> "Jet":
        return self.diff(self.ctx.dim + i)

    # -- ring operations ---------------------------------------------------

    def _coerce(self, other) -> "Jet | None":
        if isinstance(other, Jet):
            if other.ctx is not self.ctx:
                raise JetError("jets from different contexts cannot be combined")
            return other
        if isinstance(other, (int, float, np.floating, np.integer, np.ndarray)):
            return constant(self.ctx, other)
        return None

    def __add__(self, other):
        rhs = self._coerce(other)
        if rhs is None:
            return NotImplemented
        order = min(self._effective_order(), rhs._effective_order())
        a = self.truncate(order)
        b = rhs.truncate(order)
        pdeg = max(self.poly_degree, rhs.poly_degree)
        return Jet(
            self.ctx,
            a.coeffs + b.coeffs,
            order,
            min(a.x_order, b.x_order),
            pdeg if pdeg < _NOT_POLY else _NOT_POLY,
            max(a._data_degree(), b._data_degree()),
        )

    __radd__ = __add__

    def __neg__(self):
        return Jet(
            self.ctx, -self.coeffs, self.order, self.x_order, self.poly_degree,
            self.data_degree,
        )

    def __sub__(self, other):
        rhs = self._coerce(other)
        if rhs is None:
            return NotImplemented
        return self + (-rhs)

    def __rsub__(self, other):
        rhs = self._coerce(other)
        if rhs is None:
            return NotImplemented
        return rhs + (-self)

    def mul(self, other: "Jet", order: int | None = None) -> "Jet":
        """Truncated product; ``order`` caps the result below the default."""
        natural = min(self._effective_order(), other._effective_order())
        dout = natural if order is None else min(order, natural)
        da = min(self._data_degree(), dout)
        db = min(other._data_degree(), dout)
        pa, pb = self.poly_degree, other.poly_degree
        pdeg = pa + pb if pa < _NOT_POLY and pb < _NOT_POLY else _NOT_POLY
        # an exact polynomial result needs no coefficients beyond its degree;
        # conversely a truncation below that degree loses exactness
        o_store = min(dout, pdeg)
        if o_store < pdeg:
            pdeg = _NOT_POLY
        a_idx, b_idx, starts, out, o_idx = self.ctx.mul_table(da, db, dout)
        nout = self.ctx.ncoeff(o_store)
        batch = np.broadcast_shapes(self.batch_shape, other.batch_shape)
        # pairs are sorted by output index, so the <nout restriction is a prefix
        cut = int(np.searchsorted(o_idx, nout))
        coeffs = np.zeros(batch + (nout,))
        if cut:
            na, nb = self.coeffs.shape[-1], other.coeffs.shape[-1]
            if _HAVE_NUMBA:
                a2 = _flat2d(self.coeffs, batch, na)
                b2 = _flat2d(other.coeffs, batch, nb)
                c2 = coeffs.reshape(-1, nout)
                _conv_kernel(a2, b2, a_idx[:cut], b_idx[:cut], o_idx[:cut], c2)
            else:
                seg_cut = int(np.searchsorted(starts, cut))
                prod = (
                    np.take(self.coeffs, a_idx[:cut], axis=-1)
                    * np.take(other.coeffs, b_idx[:cut], axis=-1)
                )
                sums = np.add.reduceat(prod, starts[:seg_cut], axis=-1)
                coeffs[..., out[:seg_cut]] = sums
        x_order = min(self._effective_x_order(), other._effective_x_order())
        return Jet(self.ctx, coeffs, o_store, x_order, pdeg, min(o_store, da + db))

    def __mul__(self, other):
        if isinstance(other, Jet):
            return self.mul(other)
        if isinstance(other, (int, float, np.floating, np.integer, np.ndarray)):
            scal = np.asarray(other, dtype=np.float64)
            return Jet(
                self.ctx,
                self.coeffs * scal[..., None],
                self.order,
                self.x_order,
                self.poly_degree,
                self.data_degree,
            )
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self.mul(reciprocal(other))
        if isinstance(other, (int, float, np.floating, np.integer, np.ndarray)):
            return self * (1.0 / np.asarray(other, dtype=np.float64))
        return NotImplemented

    def __rtruediv__(self, other):
        rhs = self._coerce(other)
        if rhs is None:
            return NotImplemented
        return rhs.mul(reciprocal(self))

    def __pow__(self, exponent):
        if isinstance(exponent, (int, np.integer)):
            k = int(exponent)
            if k < 0:
                return reciprocal(self.__pow__(-k))
            result = constant(self.ctx, np.ones(self.batch_shape))
            base = self
            while k:
                if k & 1:
                    result = result * base
                k >>= 1
                if k:
                    base = base * base
            return result
        if isinstance(exponent, (float, np.floating)):
            return powr(self, float(exponent))
        return NotImplemented


# -- construction -----------------------------------------------------------


def _flat2d(coeffs: np.ndarray, batch: tuple, n: int) -> np.ndarray:
    arr = np.broadcast_to(coeffs, batch + (n,))
    return np.ascontiguousarray(arr).reshape(-1, n)


def matrix_coeff_inverse(ctx: JetContext, A: np.ndarray, order: int) -> np.ndarray:
    """Inverse of a matrix-valued jet given as a coefficient stack.

    ``A`` has shape (batch..., ncoeff(order), n, n); the value block is a
    plain batched matrix inverse, higher coefficients solve triangularly in
    graded order from (A X)_alpha = 0.
    """
    n = A.shape[-1]
    ncoeff = ctx.ncoeff(order)
    X0 = np.linalg.inv(A[..., 0, :, :])
    X = np.zeros_like(A)
    X[..., 0, :, :] = X0
    ai, bi, seg, out = ctx.inverse_table(order)
    if len(out) == 0:
        return X
    if _HAVE_NUMBA:
        A4 = np.ascontiguousarray(A).reshape(-1, ncoeff, n, n)
        X4 = np.ascontiguousarray(X).reshape(-1, ncoeff, n, n)
        X04 = np.ascontiguousarray(X0).reshape(-1, n, n)
        _inv_kernel(A4, X04, ai, bi, seg, out, X4)
        return X4.reshape(A.shape)
    for t in range(len(out)):
        sl = slice(seg[t], seg[t + 1])
        s = np.einsum("...pij,...pjk->...ik", A[..., ai[sl], :, :], X[..., bi[sl], :, :])
        X[..., out[t], :, :] = -np.einsum("...ij,...jk->...ik", X0, s)
    return X


def scanned_degree(ctx: JetContext, coeffs: np.ndarray, order: int) -> int:
    """Highest degree block holding any nonzero coefficient."""
    for d in range(order, 0, -1):
        lo, hi = ctx.ncoeff(d - 1), ctx.ncoeff(d)
        if np.any(coeffs[..., lo:hi]):
            return d
    return 0


def constant(ctx: JetContext, value) -> Jet:
    arr = np.asarray(value, dtype=np.float64)
    coeffs = arr[..., None].copy()
    return Jet(ctx, coeffs, 0, ctx.x_cap, 0)


def seed(ctx: JetContext, point) -> list[Jet]:
    """One identity-perturbed jet per chart variable at the expansion point.

    ``point`` has shape (..., 2n); leading axes become the batch shape shared
    by every returned jet.
    """
    pt = np.asarray(point, dtype=np.float64)
    if pt.shape[-1] != ctx.nvars:
        raise JetError(
            f"seed point must supply {ctx.nvars} coordinates, got {pt.shape[-1]}"
        )
    n1 = ctx.ncoeff(1)
    jets = []
    for v in range(ctx.nvars):
        coeffs = np.zeros(pt.shape[:-1] + (n1,))
        coeffs[..., 0] = pt[..., v]
        unit = np.zeros(ctx.nvars, dtype=np.int64)
        unit[v] = 1
        coeffs[..., ctx.index_of(unit)] = 1.0
        jets.append(Jet(ctx, coeffs, 1, ctx.x_cap, 1))
    return jets


# -- elementary functions -----------------------------------------------------


def _compose(u: Jet, series: "callable") -> Jet:
    """Truncated composition f(u) from univariate Taylor coefficients of f.

    ``series(u0, m)`` returns the list [f(u0), f'(u0), f''(u0)/2!, ...] of
    length m+1, evaluated on the (batched) value array u0.  The composition
    is assembled by a Horner scheme in w = u - u0.
    """
    m = u._effective_order()
    u0 = u.value()
    c = series(u0, m)
    wdeg = min(u._data_degree(), m)
    # Treat the stored coefficients of w = u - u0 as an exact polynomial:
    # the Horner recursion below is the standard truncated composition of
    # that polynomial, so intermediate zero-padding is exact by definition.
    wcoeffs = np.concatenate(
        [np.zeros(u.batch_shape + (1,)), u.coeffs[..., 1 : u.ctx.ncoeff(wdeg)]], axis=-1
    )
    w = Jet(u.ctx, wcoeffs, wdeg, u.ctx.x_cap, wdeg)
    # The partial result entering Horner step k is multiplied by w^k overall,
    # so it only needs to be exact through order m - k; each intermediate is
    # reinterpreted as the truncated polynomial the recursion is defined on.
    result = constant(u.ctx, c[m])
    for k in range(m - 1, -1, -1):
        r = result.mul(w, order=m - k) + c[k]
        result = Jet(u.ctx, r.coeffs, r.order, u.ctx.x_cap, min(r._data_degree(), r.order))
    result = result.truncate(m)
    ddeg = scanned_degree(u.ctx, result.coeffs, m)
    return Jet(u.ctx, result.coeffs, m, u._effective_x_order(), _NOT_POLY, ddeg)


def reciprocal(f: Jet) -> Jet:
    u0 = f.value()
    if np.any(u0 == 0.0):
        raise JetError("division by a jet with zero value")

    def series(u0, m):
        c = [1.0 / u0]
        for _ in range(m):
            c.append(-c[-1] / u0)
        return c

    return _compose(f, series)


def sqrt(f):
    if isinstance(f, np.ndarray) or np.isscalar(f):
        return np.sqrt(f)
    u0 = f.value()
    if np.any(u0 <= 0.0):
        raise JetError("sqrt of a jet with nonpositive value")

    def series(u0, m):
        c = [np.sqrt(u0)]
        for k in range(1, m + 1):
            c.append(c[-1] * (1.5 - k) / (k * u0))
        return c

    return _compose(f, series)


def exp(f):
    if isinstance(f, np.ndarray) or np.isscalar(f):
        return np.exp(f)

    def series(u0, m):
        e = np.exp(u0)
        return [e / math.factorial(k) for k in range(m + 1)]

    return _compose(f, series)


def log(f):
    if isinstance(f, np.ndarray) or np.isscalar(f):
        return np.log(f)
    u0 = f.value()
    if np.any(u0 <= 0.0):
        raise JetError("log of a jet with nonpositive value")

    def series(u0, m):
        c = [np.log(u0)]
        for k in range(1, m + 1):
            c.append((-1.0) ** (k - 1) / (k * u0**k))
        return c

    return _compose(f, series)


def sin(f):
    if isinstance(f, np.ndarray) or np.isscalar(f):
        return np.sin(f)

    def series(u0, m):
        return [np.sin(u0 + k * np.pi / 2) / math.factorial(k) for k in range(m + 1)]

    return _compose(f, series)


def cos(f):
    if isinstance(f, np.ndarray) or np.isscalar(f):
        return np.cos(f)

    def series(u0, m):
        return [np.cos(u0 + k * np.pi / 2) / math.factorial(k) for k in range(m + 1)]

    return _compose(f, series)


def powr(f, r: float):
    """Real power f**r for jets with positive value."""
    if isinstance(f, np.ndarray) or np.isscalar(f):
        return np.power(f, r)
    u0 = f.value()
    if np.any(u0 <= 0.0):
        raise JetError("real power of a jet with nonpositive value")

    def series(u0, m):
        c = [np.power(u0, r)]
        for k in range(1, m + 1):
            c.append(c[-1] * (r - k + 1) / (k * u0))
        return c

    return _compose(f, series)
