"""NURBS surface patches and trimmed patches.

A trimmed patch restricts a surface to the band between two curves drawn in
the patch parameter plane.  The unit square (s, t) is mapped into the
parameter plane by blending the two curves linearly in s, and the composite
surface map chains that plane map with the patch itself, so downstream code
integrates over the unit square regardless of trimming.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateTrimError, GeometryError, SingularFrameError
from .splines import (
    BasisSpace,
    KnotVector,
    bspline_basis_derivs_many,
    bspline_basis_many,
    bspline_curve_derivs,
    unit_interval_space,
)

__all__ = [
    "SurfaceFrame",
    "FrameBatch",
    "NurbsPatch",
    "TrimmingCurve",
    "TrimmedPatch",
    "surface_point",
    "surface_frame",
    "trim_map",
    "trim_jacobian",
    "trimmed_frame",
    "build_quarter_cylinder",
]

_PARALLEL_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class SurfaceFrame:
    """Local geometry at one parameter point.

    ``area_element`` is the norm of the tangent cross product, in the
    coordinates the frame was requested in; for trimmed patches it already
    includes the plane-map Jacobian determinant.
    """

    position: np.ndarray
    tangent_u: np.ndarray
    tangent_v: np.ndarray
    unit_normal: np.ndarray
    area_element: float


@dataclass(frozen=True, eq=False)
class FrameBatch:
    """Frames at many parameter points, stored as arrays (rows align)."""

    positions: np.ndarray
    tangents_u: np.ndarray
    tangents_v: np.ndarray
    normals: np.ndarray
    areas: np.ndarray

    def __len__(self) -> int:
        return self.positions.shape[0]

    def frame(self, i: int) -> SurfaceFrame:
        return SurfaceFrame(
            self.positions[i],
            self.tangents_u[i],
            self.tangents_v[i],
            self.normals[i],
            float(self.areas[i]),
        )


@dataclass(frozen=True, eq=False)
class NurbsPatch:
    """Tensor-product NURBS surface.

    ``control_points`` has shape (A, B, 3) and ``weights`` (A, B), with A
    control points along u and B along v.  ``flip_normal`` reverses the
    reported surface normal so the patch can be oriented outward regardless
    of how the control net is wound.
    """

    space_u: BasisSpace
    space_v: BasisSpace
    control_points: np.ndarray
    weights: np.ndarray
    flip_normal: bool = False

    def __post_init__(self):
        cps = np.array(self.control_points, dtype=float)
        wts = np.array(self.weights, dtype=float)
        a, b = self.space_u.n_basis, self.space_v.n_basis
        if cps.shape != (a, b, 3):
            raise GeometryError(
                f"control point grid must have shape {(a, b, 3)}, got {cps.shape}"
            )
        if wts.shape != (a, b):
            raise GeometryError(
                f"weight grid must have shape {(a, b)}, got {wts.shape}"
            )
        if np.any(wts <= 0.0):
            raise GeometryError("weights must be strictly positive")
        cps.setflags(write=False)
        wts.setflags(write=False)
        object.__setattr__(self, "control_points", cps)
        object.__setattr__(self, "weights", wts)
        object.__setattr__(self, "flip_normal", bool(self.flip_normal))

    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        flat = self.control_points.reshape(-1, 3)
        return flat.min(axis=0), flat.max(axis=0)

    def points_at(self, params: np.ndarray) -> np.ndarray:
        params = np.asarray(params, dtype=float).reshape(-1, 2)
        nu = bspline_basis_many(self.space_u, params[:, 0])
        nv = bspline_basis_many(self.space_v, params[:, 1])
        wgt = np.einsum("ma,mb,ab->m", nu, nv, self.weights)
        num = np.einsum("ma,mb,abk->mk", nu, nv,
                        self.weights[:, :, None] * self.control_points)
        return num / wgt[:, None]

    def point(self, u: float, v: float) -> np.ndarray:
        return self.points_at(np.array([[u, v]]))[0]

    def frames_at(self, params: np.ndarray) -> FrameBatch:
        params = np.asarray(params, dtype=float).reshape(-1, 2)
        du = bspline_basis_derivs_many(self.space_u, params[:, 0], 1)
        dv = bspline_basis_derivs_many(self.space_v, params[:, 1], 1)
        wx = self.weights[:, :, None] * self.control_points
        den = np.einsum("ma,mb,ab->m", du[:, 0], dv[:, 0], self.weights)
        den_u = np.einsum("ma,mb,ab->m", du[:, 1], dv[:, 0], self.weights)
        den_v = np.einsum("ma,mb,ab->m", du[:, 0], dv[:, 1], self.weights)
        num = np.einsum("ma,mb,abk->mk", du[:, 0], dv[:, 0], wx)
        num_u = np.einsum("ma,mb,abk->mk", du[:, 1], dv[:, 0], wx)
        num_v = np.einsum("ma,mb,abk->mk", du[:, 0], dv[:, 1], wx)
        pos = num / den[:, None]
        tan_u = (num_u - pos * den_u[:, None]) / den[:, None]
        tan_v = (num_v - pos * den_v[:, None]) / den[:, None]
        return _finish_frames(params, pos, tan_u, tan_v, self.flip_normal)

    def frame(self, u: float, v: float) -> SurfaceFrame:
        return self.frames_at(np.array([[u, v]])).frame(0)


def _finish_frames(params, pos, tan_u, tan_v, flip: bool) -> FrameBatch:
    cross = np.cross(tan_u, tan_v)
    areas = np.linalg.norm(cross, axis=1)
    scale = np.linalg.norm(tan_u, axis=1) * np.linalg.norm(tan_v, axis=1)
    degenerate = areas <= _PARALLEL_TOL * np.maximum(scale, 1e-300)
    if np.any(degenerate):
        i = int(np.argmax(degenerate))
        raise SingularFrameError(
            f"surface tangents are parallel at parameter {tuple(params[i])}"
        )
    normals = cross / areas[:, None]
    if flip:
        normals = -normals
    return FrameBatch(pos, tan_u, tan_v, normals, areas)


@dataclass(frozen=True, eq=False)
class TrimmingCurve:
    """B-spline curve in the unit parameter square of a patch.

    The knot vector is rescaled to [0, 1] on construction; control points
    must stay inside the unit square.
    """

    space: BasisSpace
    control_points: np.ndarray

    def __post_init__(self):
        cps = np.array(self.control_points, dtype=float)
        if cps.ndim != 2 or cps.shape[1] != 2:
            raise GeometryError("trim curve control points must have shape (n, 2)")
        if cps.shape[0] != self.space.n_basis:
            raise GeometryError(
                f"trim curve expects {self.space.n_basis} control points, "
                f"got {cps.shape[0]}"
            )
        if np.any(cps < -1e-9) or np.any(cps > 1.0 + 1e-9):
            raise GeometryError("trim curve control points must lie in [0, 1]^2")
        np.clip(cps, 0.0, 1.0, out=cps)
        lo, hi = self.space.domain
        if (lo, hi) != (0.0, 1.0):
            rescaled = (self.space.knots.values - lo) / (hi - lo)
            space = BasisSpace(KnotVector(rescaled), self.space.degree)
            object.__setattr__(self, "space", space)
        cps.setflags(write=False)
        object.__setattr__(self, "control_points", cps)

    def evaluate(self, ts, max_order: int = 1) -> np.ndarray:
        """Points and parameter derivatives, shape (len(ts), max_order+1, 2)."""
        return bspline_curve_derivs(self.space, self.control_points, ts, max_order)

    def reversed(self) -> "TrimmingCurve":
        knots = 1.0 - self.space.knots.values[::-1]
        space = BasisSpace(KnotVector(knots), self.space.degree)
        return TrimmingCurve(space, self.control_points[::-1].copy())


def _plane_map(curve_a: TrimmingCurve, curve_b: TrimmingCurve,
               params: np.ndarray):
    """Blend the curves: positions (m, 2), Jacobians (m, 2, 2), determinants."""
    s = params[:, 0]
    t = params[:, 1]
    ca = curve_a.evaluate(t, 1)
    cb = curve_b.evaluate(t, 1)
    pos = (1.0 - s)[:, None] * ca[:, 0] + s[:, None] * cb[:, 0]
    jac = np.empty((params.shape[0], 2, 2))
    jac[:, :, 0] = cb[:, 0] - ca[:, 0]
    jac[:, :, 1] = (1.0 - s)[:, None] * ca[:, 1] + s[:, None] * cb[:, 1]
    det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
    return pos, jac, det


@dataclass(frozen=True, eq=False)
class TrimmedPatch:
    """Region of a patch between two parameter-plane curves.

    Both curves must run in the same direction; the second is reversed
    automatically when its ends pair up better that way.  The plane map must
    keep a strictly positive Jacobian determinant; this is sampled on a grid
    at construction and enforced again at every evaluation.
    """

    base: NurbsPatch
    curve_a: TrimmingCurve
    curve_b: TrimmingCurve
    validation_samples: int = field(default=17, repr=False)

    def __post_init__(self):
        a0, a1 = self.curve_a.evaluate([0.0, 1.0], 0)[:, 0]
        b0, b1 = self.curve_b.evaluate([0.0, 1.0], 0)[:, 0]
        keep = np.linalg.norm(a0 - b0) + np.linalg.norm(a1 - b1)
        swap = np.linalg.norm(a0 - b1) + np.linalg.norm(a1 - b0)
        if swap < keep:
            object.__setattr__(self, "curve_b", self.curve_b.reversed())
        m = self.validation_samples
        grid = np.stack(
            np.meshgrid(np.linspace(0, 1, m), np.linspace(0, 1, m), indexing="ij"),
            axis=-1,
        ).reshape(-1, 2)
        _, _, det = _plane_map(self.curve_a, self.curve_b, grid)
        if np.any(det <= 0.0):
            i = int(np.argmin(det))
            raise DegenerateTrimError(
                f"trim map folds over: Jacobian determinant {det[i]:.3e} at "
                f"parameter {tuple(grid[i])}"
            )

    @property
    def flip_normal(self) -> bool:
        return self.base.flip_normal

    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        return self.base.bbox()

    def plane_points(self, params: np.ndarray) -> np.ndarray:
        params = np.asarray(params, dtype=float).reshape(-1, 2)
        pos, _, _ = _plane_map(self.curve_a, self.curve_b, params)
        return pos

    def points_at(self, params: np.ndarray) -> np.ndarray:
        return self.base.points_at(self.plane_points(params))

    def point(self, s: float, t: float) -> np.ndarray:
        return self.points_at(np.array([[s, t]]))[0]

    def frames_at(self, params: np.ndarray) -> FrameBatch:
        params = np.asarray(params, dtype=float).reshape(-1, 2)
        pos, jac, det = _plane_map(self.curve_a, self.curve_b, params)
        if np.any(det <= 0.0):
            i = int(np.argmin(det))
            raise DegenerateTrimError(
                f"trim map folds over: Jacobian determinant {det[i]:.3e} at "
                f"parameter {tuple(params[i])}"
            )
        inner = self.base.frames_at(pos)
        tan_s = inner.tangents_u * jac[:, 0, 0, None] + \
            inner.tangents_v * jac[:, 1, 0, None]
        tan_t = inner.tangents_u * jac[:, 0, 1, None] + \
            inner.tangents_v * jac[:, 1, 1, None]
        # positive determinant keeps the chained cross product parallel to the
        # base normal, so the area element just picks up the factor det
        return FrameBatch(inner.positions, tan_s, tan_t,
                          inner.normals, inner.areas * det)

    def frame(self, s: float, t: float) -> SurfaceFrame:
        return self.frames_at(np.array([[s, t]])).frame(0)


def surface_point(patch: NurbsPatch, u: float, v: float) -> np.ndarray:
    """Point on the surface at (u, v)."""
    return patch.point(u, v)


def surface_frame(patch: NurbsPatch, u: float, v: float) -> SurfaceFrame:
    """Position, tangents, unit normal, and area element at (u, v)."""
    return patch.frame(u, v)


def trim_map(patch: TrimmedPatch, s: float, t: float) -> np.ndarray:
    """Patch parameter pair corresponding to unit-square coordinates (s, t)."""
    return patch.plane_points(np.array([[s, t]]))[0]


def trim_jacobian(patch: TrimmedPatch, s: float, t: float) -> np.ndarray:
    """2x2 Jacobian of the plane map at (s, t); its determinant is positive."""
    params = np.array([[s, t]])
    _, jac, det = _plane_map(patch.curve_a, patch.curve_b, params)
    if det[0] <= 0.0:
        raise DegenerateTrimError(
            f"trim map folds over: Jacobian determinant {det[0]:.3e} at "
            f"parameter {(s, t)}"
        )
    return jac[0]


def trimmed_frame(patch: TrimmedPatch, s: float, t: float) -> SurfaceFrame:
    """Frame of the composite map; the area element includes both Jacobians."""
    return patch.frame(s, t)


def straight_trim_pair(u_start: float, u_end: float) -> tuple[TrimmingCurve, TrimmingCurve]:
    """Vertical trim lines u = u_start and u = u_end across the full v range."""
    line = unit_interval_space(1)
    first = TrimmingCurve(line, np.array([[u_start, 0.0], [u_start, 1.0]]))
    second = TrimmingCurve(line, np.array([[u_end, 0.0], [u_end, 1.0]]))
    return first, second


def build_quarter_cylinder(radius: float = 1.0, length: float = 1.0,
                           exact_arc: bool = False) -> NurbsPatch:
    """Quarter cylinder surface: a quadratic arc in u swept linearly in v.

    With ``exact_arc`` the middle weight is sqrt(2)/2 and the cross section
    is an exact circular arc; otherwise the traditional rounded value 0.7 is
    used, which leaves a small radial deviation near mid-arc.
    """
    if radius <= 0.0 or length <= 0.0:
        raise GeometryError("radius and length must be positive")
    w_mid = float(np.sqrt(2.0) / 2.0) if exact_arc else 0.7
    space_u = unit_interval_space(2)
    space_v = unit_interval_space(1)
    arc = np.array([[radius, 0.0], [radius, radius], [0.0, radius]])
    control = np.zeros((3, 2, 3))
    control[:, 0, :2] = arc
    control[:, 1, :2] = arc
    control[:, 1, 2] = length
    weights = np.array([[1.0, 1.0], [w_mid, w_mid], [1.0, 1.0]])
    return NurbsPatch(space_u, space_v, control, weights)
