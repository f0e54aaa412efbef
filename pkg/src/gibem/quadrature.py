"""Numerical integration over patch parameter rectangles.

The unit square of each patch is first cut into rectangles along lines
through the interior collocation abscissae.  Rectangles near the source
point are split recursively (quad-tree) until their size is comparable to
their distance from it; the rectangle containing the source itself is
integrated with a triangle fan around the source whose degenerate mapping
absorbs the 1/r singularity of the displacement kernel.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import QuadratureError
from .kernels import Material, kelvin_T_many, kelvin_U_many
from .splines import BasisSpace, greville_abscissae

__all__ = [
    "GaussRule",
    "IntegrationRegion",
    "gauss_rule",
    "region_partition",
    "quadtree_refine",
    "singular_quadrature_points",
    "integrate_block",
    "integrate_singular",
]

log = logging.getLogger(__name__)

MAX_GAUSS_ORDER = 64


@dataclass(frozen=True, eq=False)
class GaussRule:
    """Gauss-Legendre nodes and weights on [-1, 1]."""

    nodes: np.ndarray
    weights: np.ndarray

    @property
    def order(self) -> int:
        return self.nodes.size


@lru_cache(maxsize=None)
def _cached_rule(order: int) -> GaussRule:
    nodes, weights = np.polynomial.legendre.leggauss(order)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return GaussRule(nodes, weights)


def gauss_rule(order: int) -> GaussRule:
    """Gauss-Legendre rule of the given order (1 to 64 points)."""
    if not isinstance(order, (int, np.integer)) or not 1 <= order <= MAX_GAUSS_ORDER:
        raise QuadratureError(
            f"Gauss order must be an integer in [1, {MAX_GAUSS_ORDER}], got {order!r}"
        )
    return _cached_rule(int(order))


@dataclass(frozen=True)
class IntegrationRegion:
    """Axis-aligned rectangle in a patch's unit parameter square."""

    u0: float
    u1: float
    v0: float
    v1: float
    depth: int = 0

    def __post_init__(self):
        if not (self.u0 < self.u1 and self.v0 < self.v1):
            raise QuadratureError(f"empty integration region {self}")

    @property
    def area(self) -> float:
        return (self.u1 - self.u0) * (self.v1 - self.v0)

    def corners(self) -> np.ndarray:
        return np.array(
            [
                [self.u0, self.v0],
                [self.u1, self.v0],
                [self.u1, self.v1],
                [self.u0, self.v1],
            ]
        )

    def contains(self, param, tol: float = 1e-12) -> bool:
        """True when the point lies in the closed rectangle (with slack)."""
        u, v = param
        return (
            self.u0 - tol <= u <= self.u1 + tol
            and self.v0 - tol <= v <= self.v1 + tol
        )

    def split(self) -> list["IntegrationRegion"]:
        um = 0.5 * (self.u0 + self.u1)
        vm = 0.5 * (self.v0 + self.v1)
        d = self.depth + 1
        return [
            IntegrationRegion(self.u0, um, self.v0, vm, d),
            IntegrationRegion(um, self.u1, self.v0, vm, d),
            IntegrationRegion(self.u0, um, vm, self.v1, d),
            IntegrationRegion(um, self.u1, vm, self.v1, d),
        ]

    def gauss_points(self, rule: GaussRule):
        """Tensor Gauss points and weights scaled to the rectangle."""
        gu = 0.5 * (self.u0 + self.u1) + 0.5 * (self.u1 - self.u0) * rule.nodes
        gv = 0.5 * (self.v0 + self.v1) + 0.5 * (self.v1 - self.v0) * rule.nodes
        params = np.stack(
            [np.repeat(gu, rule.order), np.tile(gv, rule.order)], axis=1
        )
        wts = np.outer(rule.weights, rule.weights).reshape(-1) * (self.area / 4.0)
        return params, wts


def _cut_lines(space: BasisSpace, extra) -> np.ndarray:
    cuts = [0.0, 1.0]
    interior = greville_abscissae(space).abscissae[1:-1]
    cuts.extend(float(g) for g in interior)
    cuts.extend(float(e) for e in extra)
    cuts = sorted(set(cuts))
    out = [cuts[0]]
    for c in cuts[1:]:
        if c - out[-1] > 1e-12:
            out.append(c)
    if not (out[0] == 0.0 and out[-1] == 1.0):
        raise QuadratureError("cut lines must stay inside the unit square")
    return np.asarray(out)


def region_partition(field_u: BasisSpace, field_v: BasisSpace,
                     extra_u=(), extra_v=()) -> list[IntegrationRegion]:
    """Rectangles bounded by lines through the interior collocation abscissae.

    Collocation points land on region corners by construction, which is what
    the singular integration scheme expects.  Extra cut positions may be
    supplied per direction.
    """
    lines_u = _cut_lines(field_u, extra_u)
    lines_v = _cut_lines(field_v, extra_v)
    return [
        IntegrationRegion(lines_u[i], lines_u[i + 1], lines_v[j], lines_v[j + 1])
        for i in range(lines_u.size - 1)
        for j in range(lines_v.size - 1)
    ]


_SAMPLE_GRID = np.stack(
    np.meshgrid([0.0, 0.5, 1.0], [0.0, 0.5, 1.0], indexing="ij"), axis=-1
).reshape(-1, 2)


def _region_samples(region: IntegrationRegion) -> np.ndarray:
    lo = np.array([region.u0, region.v0])
    size = np.array([region.u1 - region.u0, region.v1 - region.v0])
    return lo + _SAMPLE_GRID * size


def quadtree_refine(regions, source_point, point_fn, threshold: float = 1.0,
                    max_depth: int = 6) -> list[IntegrationRegion]:
    """Split regions until their mapped size is below ``threshold`` times the
    distance to ``source_point``.

    ``point_fn`` maps an (m, 2) parameter array to (m, 3) surface points.
    Regions already containing the source must not be passed here; they are
    the singular integration's job.  Hitting the depth cap logs a warning and
    keeps the region.
    """
    source_point = np.asarray(source_point, dtype=float)
    out: list[IntegrationRegion] = []
    stack = list(regions)
    capped = 0
    while stack:
        region = stack.pop()
        mapped = point_fn(_region_samples(region))
        corners = mapped[[0, 2, 8, 6]]
        edges = np.linalg.norm(corners - np.roll(corners, -1, axis=0), axis=1)
        size = float(edges.max())
        dist = float(np.linalg.norm(mapped - source_point, axis=1).min())
        if size > threshold * dist:
            if region.depth >= max_depth:
                capped += 1
                out.append(region)
            else:
                stack.extend(region.split())
        else:
            out.append(region)
    if capped:
        log.warning(
            "quad-tree depth cap %d reached for %d region(s) near source %s",
            max_depth, capped, np.array2string(source_point, precision=4),
        )
    return out


def singular_quadrature_points(region: IntegrationRegion, source_param,
                               rule: GaussRule):
    """Quadrature points for an integrand with a 1/r singularity at
    ``source_param`` inside (or on the boundary of) the region.

    The rectangle is fanned into triangles sharing the source as a vertex;
    each triangle is the image of a collapsed quadrilateral whose mapping
    Jacobian vanishes linearly at the source, cancelling the singularity.
    Returns parameters (m, 2) and weights (m,) in the parameter plane.
    """
    s = np.asarray(source_param, dtype=float)
    if not region.contains(s, tol=1e-9):
        raise QuadratureError(
            f"singular point {tuple(s)} lies outside region {region}"
        )
    corners = region.corners()
    x01 = 0.5 * (rule.nodes + 1.0)
    w01 = 0.5 * rule.weights
    xi = np.repeat(x01, rule.order)
    eta = np.tile(x01, rule.order)
    ww = np.outer(w01, w01).reshape(-1)
    params = []
    weights = []
    for k in range(4):
        v1 = corners[k]
        v2 = corners[(k + 1) % 4]
        twice_area = abs(
            (v1[0] - s[0]) * (v2[1] - s[1]) - (v2[0] - s[0]) * (v1[1] - s[1])
        )
        if twice_area <= 1e-14 * max(region.area, 1e-30):
            continue  # source sits on this edge; the triangle is flat
        pts = (
            s[None, :]
            + xi[:, None] * ((v1 - s)[None, :] + eta[:, None] * (v2 - v1)[None, :])
        )
        params.append(pts)
        weights.append(ww * xi * twice_area)
    if not params:
        raise QuadratureError("all fan triangles degenerate; region is empty")
    return np.concatenate(params), np.concatenate(weights)


def _mapped_frames(surface, params, wts, transform):
    frames = surface.frames_at(params)
    pts = frames.positions
    normals = frames.normals
    if transform is not None:
        pts = pts @ transform.T
        normals = normals @ transform.T
    scaled = wts * frames.areas
    return pts, normals, scaled


def integrate_block(region: IntegrationRegion, source_point, surface,
                    basis_fn, material: Material, rule: GaussRule,
                    traction_fn=None, transform=None, want_matrix=True):
    """Regular Gauss integration of the kernel blocks over one region.

    Returns ``(blocks, rhs)`` where ``blocks`` is (n_fields, 3, 3) holding
    the traction-kernel integral against each displacement basis function
    (or None when ``want_matrix`` is false), and ``rhs`` is the 3-vector of
    the displacement kernel integrated against the supplied traction (zero
    when no traction is given).  ``transform`` reflects the patch through a
    symmetry plane: geometry is mapped by it and the blocks are multiplied
    by it on the right, which is the mirrored displacement transform.
    """
    params, wts = region.gauss_points(rule)
    return _accumulate(source_point, surface, params, wts, basis_fn, material,
                       traction_fn, transform, want_matrix)


def integrate_singular(region: IntegrationRegion, source_param, source_point,
                       surface, basis_fn, material: Material, rule: GaussRule,
                       traction_fn=None, subtract=None, transform=None,
                       want_matrix=True):
    """Integration over the region containing the source point.

    The displacement-kernel side is weakly singular and the fan mapping
    integrates it directly.  For the traction kernel the basis values at the
    source parameter (``subtract``) are subtracted, leaving a weakly
    singular remainder; the subtracted rank-one part is not computed here.
    It is recovered later from the rigid-body identity in assembly.
    """
    params, wts = singular_quadrature_points(region, source_param, rule)
    return _accumulate(source_point, surface, params, wts, basis_fn, material,
                       traction_fn, transform, want_matrix, subtract=subtract)


def _accumulate(source_point, surface, params, wts, basis_fn, material,
                traction_fn, transform, want_matrix, subtract=None):
    pts, normals, scaled = _mapped_frames(surface, params, wts, transform)
    blocks = None
    if want_matrix:
        tk = kelvin_T_many(source_point, pts, normals, material)
        basis = basis_fn(params)
        if subtract is not None:
            basis = basis - subtract[None, :]
        blocks = np.einsum("m,mij,mf->fij", scaled, tk, basis)
        if transform is not None:
            blocks = blocks @ transform
    rhs = np.zeros(3)
    if traction_fn is not None:
        uk = kelvin_U_many(source_point, pts, material)
        trac = traction_fn(pts, normals)
        rhs = np.einsum("m,mij,mj->i", scaled, uk, trac)
    return blocks, rhs
