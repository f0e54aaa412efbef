"""B-spline basis machinery: evaluation, derivatives, Greville abscissae, and
the refinement primitives (knot insertion and degree elevation).

All knot vectors are open (clamped): the end knots repeat ``degree + 1``
times.  Indexing is 0-based throughout.  Evaluation uses half-open knot
spans, with the single special case at the right end of the domain where the
limit from the left is returned, so the last basis function takes the value
1 there.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterDomainError, SplineError

__all__ = [
    "KnotVector",
    "BasisSpace",
    "GrevilleSet",
    "unit_interval_space",
    "bspline_basis",
    "bspline_basis_many",
    "bspline_basis_derivs",
    "bspline_basis_derivs_many",
    "greville_abscissae",
    "knot_insert",
    "degree_elevate",
    "elevate_space",
    "bspline_curve_point",
    "bspline_curve_derivs",
]

_DOMAIN_RTOL = 1e-12


def _readonly(values) -> np.ndarray:
    out = np.array(values, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class KnotVector:
    """A non-decreasing sequence of parameter values."""

    values: np.ndarray

    def __post_init__(self):
        vals = _readonly(np.atleast_1d(self.values))
        if vals.ndim != 1:
            raise SplineError("knot vector must be one-dimensional")
        if vals.size < 2:
            raise SplineError("knot vector needs at least two entries")
        if np.any(np.diff(vals) < 0.0):
            raise SplineError("knot values must be non-decreasing")
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return self.values.size

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.values[0]), float(self.values[-1])


@dataclass(frozen=True, eq=False)
class BasisSpace:
    """An open (clamped) B-spline basis of a given degree.

    The number of basis functions is ``len(knots) - degree - 1``.
    """

    knots: KnotVector
    degree: int

    def __post_init__(self):
        if not isinstance(self.knots, KnotVector):
            object.__setattr__(self, "knots", KnotVector(self.knots))
        p = self.degree
        if not isinstance(p, (int, np.integer)) or p < 0:
            raise SplineError("degree must be a non-negative integer")
        object.__setattr__(self, "degree", int(p))
        kv = self.knots.values
        n = kv.size - p - 1
        if n < p + 1:
            raise SplineError(
                f"knot vector of length {kv.size} is too short for degree {p}"
            )
        if not (np.all(kv[: p + 1] == kv[0]) and np.all(kv[-(p + 1):] == kv[-1])):
            raise SplineError(
                "knot vector must be open: end knots repeated degree + 1 times"
            )
        if kv[0] == kv[-1]:
            raise SplineError("knot vector spans an empty interval")

    @property
    def n_basis(self) -> int:
        return len(self.knots) - self.degree - 1

    @property
    def domain(self) -> tuple[float, float]:
        return self.knots.domain

    def breakpoints(self) -> tuple[np.ndarray, np.ndarray]:
        """Distinct knot values and their multiplicities."""
        kv = self.knots.values
        tol = _DOMAIN_RTOL * max(kv[-1] - kv[0], 1.0)
        uniques = [kv[0]]
        counts = [1]
        for t in kv[1:]:
            if t - uniques[-1] <= tol:
                counts[-1] += 1
            else:
                uniques.append(t)
                counts.append(1)
        return np.asarray(uniques), np.asarray(counts, dtype=int)


@dataclass(frozen=True, eq=False)
class GrevilleSet:
    """Greville abscissae of a basis, one per basis function, in order."""

    abscissae: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "abscissae", _readonly(self.abscissae))

    def __len__(self) -> int:
        return self.abscissae.size

    def __iter__(self):
        return iter(self.abscissae)

    def __getitem__(self, i):
        return self.abscissae[i]


def unit_interval_space(degree: int, interior=()) -> BasisSpace:
    """Open basis on [0, 1] with optional interior knots (values only)."""
    kv = np.concatenate([
        np.zeros(degree + 1),
        np.asarray(sorted(interior), dtype=float),
        np.ones(degree + 1),
    ])
    return BasisSpace(KnotVector(kv), degree)


def _prepare_params(space: BasisSpace, us) -> np.ndarray:
    us = np.atleast_1d(np.asarray(us, dtype=float))
    lo, hi = space.domain
    tol = _DOMAIN_RTOL * (hi - lo)
    bad = (us < lo - tol) | (us > hi + tol)
    if np.any(bad):
        u_bad = float(us[bad][0])
        raise ParameterDomainError(
            f"parameter {u_bad!r} outside knot domain [{lo!r}, {hi!r}]"
        )
    return np.clip(us, lo, hi)


def _find_spans(knots: np.ndarray, degree: int, us: np.ndarray) -> np.ndarray:
    n = knots.size - degree - 1
    spans = np.searchsorted(knots, us, side="right") - 1
    return np.clip(spans, degree, n - 1)


def _nonzero_basis(knots: np.ndarray, p: int, us: np.ndarray,
                   spans: np.ndarray) -> np.ndarray:
    """Values of the p + 1 basis functions supported on each span.

    Returns an array of shape (len(us), p + 1); column r holds the value of
    basis function ``span - p + r``.
    """
    m = us.size
    vals = np.zeros((m, p + 1))
    vals[:, 0] = 1.0
    left = np.zeros((m, p + 1))
    right = np.zeros((m, p + 1))
    for j in range(1, p + 1):
        left[:, j] = us - knots[spans + 1 - j]
        right[:, j] = knots[spans + j] - us
        saved = np.zeros(m)
        for r in range(j):
            tmp = vals[:, r] / (right[:, r + 1] + left[:, j - r])
            vals[:, r] = saved + right[:, r + 1] * tmp
            saved = left[:, j - r] * tmp
        vals[:, j] = saved
    return vals


def _nonzero_basis_derivs(knots: np.ndarray, p: int, us: np.ndarray,
                          spans: np.ndarray, max_order: int) -> np.ndarray:
    """Basis values and derivatives on each span, shape (m, max_order+1, p+1).

    Standard triangular-table recursion; derivative orders above the degree
    come out as exact zeros.
    """
    m = us.size
    ndu = np.zeros((m, p + 1, p + 1))
    ndu[:, 0, 0] = 1.0
    left = np.zeros((m, p + 1))
    right = np.zeros((m, p + 1))
    for j in range(1, p + 1):
        left[:, j] = us - knots[spans + 1 - j]
        right[:, j] = knots[spans + j] - us
        saved = np.zeros(m)
        for r in range(j):
            ndu[:, j, r] = right[:, r + 1] + left[:, j - r]
            tmp = ndu[:, r, j - 1] / ndu[:, j, r]
            ndu[:, r, j] = saved + right[:, r + 1] * tmp
            saved = left[:, j - r] * tmp
        ndu[:, j, j] = saved

    ders = np.zeros((m, max_order + 1, p + 1))
    ders[:, 0, :] = ndu[:, :, p]
    n_eff = min(max_order, p)
    a = np.zeros((m, 2, p + 1))
    for r in range(p + 1):
        s1, s2 = 0, 1
        a[:, :, :] = 0.0
        a[:, 0, 0] = 1.0
        for k in range(1, n_eff + 1):
            d = np.zeros(m)
            rk = r - k
            pk = p - k
            if r >= k:
                a[:, s2, 0] = a[:, s1, 0] / ndu[:, pk + 1, rk]
                d = a[:, s2, 0] * ndu[:, rk, pk]
            j1 = 1 if rk >= -1 else -rk
            j2 = k - 1 if r - 1 <= pk else p - r
            for j in range(j1, j2 + 1):
                a[:, s2, j] = (a[:, s1, j] - a[:, s1, j - 1]) / ndu[:, pk + 1, rk + j]
                d = d + a[:, s2, j] * ndu[:, rk + j, pk]
            if r <= pk:
                a[:, s2, k] = -a[:, s1, k - 1] / ndu[:, pk + 1, r]
                d = d + a[:, s2, k] * ndu[:, r, pk]
            ders[:, k, r] = d
            s1, s2 = s2, s1

    factor = float(p)
    for k in range(1, n_eff + 1):
        ders[:, k, :] *= factor
        factor *= p - k
    return ders


def _scatter(local: np.ndarray, spans: np.ndarray, p: int, n: int) -> np.ndarray:
    """Expand per-span values (..., m, p+1) to full vectors (..., m, n)."""
    m = spans.size
    out = np.zeros(local.shape[:-1] + (n,))
    cols = spans[:, None] - p + np.arange(p + 1)[None, :]
    idx = (np.arange(m)[:, None], cols)
    if local.ndim == 2:
        out[idx] = local
    else:
        out[:, idx[0], idx[1]] = local
    return out


def bspline_basis_many(space: BasisSpace, us) -> np.ndarray:
    """All basis values at each parameter; shape (len(us), n_basis)."""
    us = _prepare_params(space, us)
    kv = space.knots.values
    spans = _find_spans(kv, space.degree, us)
    local = _nonzero_basis(kv, space.degree, us, spans)
    return _scatter(local, spans, space.degree, space.n_basis)


def bspline_basis(space: BasisSpace, u: float) -> np.ndarray:
    """Values of every basis function at ``u``; shape (n_basis,).

    ``u`` must lie inside the knot domain (a relative slack of 1e-12 is
    forgiven and clipped).  The values are non-negative and sum to 1.
    """
    return bspline_basis_many(space, [u])[0]


def bspline_basis_derivs_many(space: BasisSpace, us, max_order: int) -> np.ndarray:
    """Basis values and derivatives, shape (len(us), max_order + 1, n_basis).

    Row 0 of the middle axis holds the values; row k the k-th derivative.
    Orders above the degree are identically zero.
    """
    if max_order < 0:
        raise SplineError("max_order must be non-negative")
    us = _prepare_params(space, us)
    kv = space.knots.values
    spans = _find_spans(kv, space.degree, us)
    local = _nonzero_basis_derivs(kv, space.degree, us, spans, max_order)
    m = us.size
    out = np.zeros((m, max_order + 1, space.n_basis))
    cols = spans[:, None] - space.degree + np.arange(space.degree + 1)[None, :]
    out[np.arange(m)[:, None, None],
        np.arange(max_order + 1)[None, :, None],
        cols[:, None, :]] = local
    return out


def bspline_basis_derivs(space: BasisSpace, u: float, max_order: int) -> np.ndarray:
    """Derivative table at a single parameter; shape (max_order + 1, n_basis)."""
    return bspline_basis_derivs_many(space, [u], max_order)[0]


def greville_abscissae(space: BasisSpace) -> GrevilleSet:
    """Greville abscissae: the mean of ``degree`` consecutive interior knots.

    One abscissa per basis function; for open knot vectors the first and last
    coincide exactly with the domain ends.  Degree 0 has no Greville points.
    """
    p = space.degree
    if p == 0:
        raise SplineError("Greville abscissae are not defined for degree 0")
    kv = space.knots.values
    n = space.n_basis
    windows = np.lib.stride_tricks.sliding_window_view(kv[1:n + p], p)
    return GrevilleSet(windows.mean(axis=1))


def _coeff_array(space: BasisSpace, coefficients) -> np.ndarray:
    coeffs = np.asarray(coefficients, dtype=float)
    if coeffs.shape[0] != space.n_basis:
        raise SplineError(
            f"expected {space.n_basis} coefficient rows, got {coeffs.shape[0]}"
        )
    return coeffs


def knot_insert(space: BasisSpace, coefficients, u_new: float):
    """Insert one knot without changing the represented function.

    Returns ``(refined_space, refined_coefficients)`` with one extra basis
    function.  The resulting multiplicity of ``u_new`` must not exceed the
    degree, and the end knots cannot be inserted.
    """
    coeffs = _coeff_array(space, coefficients)
    p = space.degree
    kv = space.knots.values
    lo, hi = space.domain
    u_new = float(u_new)
    if not (lo < u_new < hi):
        raise SplineError(f"new knot {u_new!r} must lie strictly inside ({lo}, {hi})")
    tol = _DOMAIN_RTOL * (hi - lo)
    mult = int(np.count_nonzero(np.abs(kv - u_new) <= tol))
    if mult + 1 > p:
        raise SplineError(
            f"inserting {u_new!r} would raise its multiplicity to {mult + 1}, "
            f"above the degree {p}"
        )
    k = int(_find_spans(kv, p, np.array([u_new]))[0])
    new_kv = np.insert(kv, k + 1, u_new)
    n_new = coeffs.shape[0] + 1
    new_coeffs = np.zeros((n_new,) + coeffs.shape[1:])
    new_coeffs[: k - p + 1] = coeffs[: k - p + 1]
    for i in range(k - p + 1, k + 1):
        alpha = (u_new - kv[i]) / (kv[i + p] - kv[i])
        new_coeffs[i] = alpha * coeffs[i] + (1.0 - alpha) * coeffs[i - 1]
    new_coeffs[k + 1:] = coeffs[k:]
    return BasisSpace(KnotVector(new_kv), p), new_coeffs


def elevate_space(space: BasisSpace, new_degree: int) -> BasisSpace:
    """The degree-elevated space: every distinct knot's multiplicity grows by
    the degree increment, which preserves interior continuity."""
    t = new_degree - space.degree
    if t <= 0:
        raise SplineError("new degree must exceed the current degree")
    uniques, counts = space.breakpoints()
    new_kv = np.repeat(uniques, counts + t)
    return BasisSpace(KnotVector(new_kv), new_degree)


def degree_elevate(space: BasisSpace, coefficients, new_degree: int):
    """Raise the degree without changing the represented function.

    The elevated coefficients are recovered by collocating the original
    function at the Greville abscissae of the elevated space; the elevated
    space contains the original one exactly, so this reproduces it to solver
    precision.
    """
    coeffs = _coeff_array(space, coefficients)
    elevated = elevate_space(space, new_degree)
    grev = greville_abscissae(elevated).abscissae
    interp = bspline_basis_many(elevated, grev)
    samples = bspline_basis_many(space, grev) @ coeffs
    new_coeffs = np.linalg.solve(interp, samples)
    return elevated, new_coeffs


def bspline_curve_point(space: BasisSpace, control_points, t: float) -> np.ndarray:
    """Point on a B-spline curve with the given control points."""
    controls = _coeff_array(space, control_points)
    return bspline_basis(space, t) @ controls


def bspline_curve_derivs(space: BasisSpace, control_points, ts,
                         max_order: int = 1) -> np.ndarray:
    """Curve point and parameter derivatives at each ``t``.

    Shape (len(ts), max_order + 1, point_dim); index 0 of the middle axis is
    the curve point itself.
    """
    controls = _coeff_array(space, control_points)
    ders = bspline_basis_derivs_many(space, ts, max_order)
    stacked = controls if controls.ndim > 1 else controls[:, None]
    out = np.einsum("mkn,nd->mkd", ders, stacked)
    return out if controls.ndim > 1 else out[..., 0]
