"""Collocation, DOF numbering, and dense system assembly.

Each patch contributes a tensor grid of collocation points at the Greville
parameters of its field spaces. Points that coincide in global coordinates
are merged into one node, and the three displacement components of a node
form three consecutive rows/columns of the dense system.

The traction kernel is strongly singular, so rows are built in two parts.
Away from the collocation point the integrand is smooth and handled by
Gauss quadrature on quad-tree refined regions. On patches the point lies
on, the basis value at the point is subtracted from the integrand, which
weakens the singularity enough for the triangle-fan scheme; the subtracted
part is restored through the free-term closure, which fixes each diagonal
block from the requirement that a rigid translation of the (mirror
completed) closed surface produces no traction.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    CollocationMismatchWarning,
    ModelError,
    QuadratureError,
    UnsupportedModelError,
)
from .kernels import kelvin_T_many, kelvin_U_many
from .model import symmetry_group
from .quadrature import gauss_rule, quadtree_refine, region_partition, \
    singular_quadrature_points

__all__ = [
    "CollocationNode",
    "CollocationSet",
    "DofMap",
    "DenseSystem",
    "PartialSystem",
    "collocation_points",
    "assemble",
    "free_term_rigid_body",
    "neumann_rhs",
]


@dataclass(frozen=True, eq=False)
class CollocationNode:
    """One merged collocation point.

    aliases lists every (patch index, field parameter) pair that landed on
    this node; the first entry is the owner used for nodal field values.
    """

    index: int
    position: np.ndarray
    aliases: tuple


@dataclass(frozen=True, eq=False)
class DofMap:
    """Per-patch grids of global node ids, flat index a * n_v + b."""

    grids: tuple
    n_nodes: int

    @property
    def n_dof(self):
        return 3 * self.n_nodes


@dataclass(frozen=True, eq=False)
class CollocationSet:
    nodes: tuple
    dof_map: DofMap
    merge_tol: float

    def __len__(self):
        return len(self.nodes)

    @property
    def positions(self):
        return np.array([node.position for node in self.nodes])


@dataclass(frozen=True, eq=False)
class DenseSystem:
    matrix: np.ndarray
    rhs: np.ndarray

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=float)
        rhs = np.asarray(self.rhs, dtype=float)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ModelError(f"system matrix must be square, got {mat.shape}")
        if rhs.shape != (mat.shape[0],):
            raise ModelError(
                f"rhs length {rhs.shape} does not match matrix {mat.shape}"
            )
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "rhs", rhs)

    @property
    def n_dof(self):
        return self.matrix.shape[0]


@dataclass(frozen=True, eq=False)
class PartialSystem:
    """Assembled kernel blocks before the free-term closure.

    t_blocks holds every computed traction-kernel contribution (with the
    singular parts already weakened by basis subtraction). row_sums[n] is
    the plain kernel integral of row n summed over mirror images, and
    node_values[n] holds the owner-patch basis values at node n, so that
    node_values[n] @ coefficients interpolates the displacement there.
    """

    t_blocks: np.ndarray
    row_sums: np.ndarray
    node_values: np.ndarray


def collocation_points(model, config=None):
    """Greville collocation grid of every patch, merged across patches."""
    cfg = config if config is not None else model.config
    tol = cfg.resolved_merge_tol(model.bbox_diagonal())

    patch_of = []
    params = []
    counts = []
    positions = []
    for k, (patch, pair) in enumerate(zip(model.patches, model.field_pairs)):
        grid = pair.greville_params()
        pos = patch.points_at(grid)
        counts.append(len(grid))
        patch_of.extend([k] * len(grid))
        params.extend(grid)
        positions.append(pos)
    positions = np.concatenate(positions, axis=0)
    total = len(positions)

    parent = list(range(total))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    diff = positions[:, None, :] - positions[None, :, :]
    dist = np.sqrt((diff * diff).sum(axis=2))
    merge_i, merge_j = np.nonzero(np.triu(dist < tol, k=1))
    for i, j in zip(merge_i, merge_j):
        ri, rj = find(int(i)), find(int(j))
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)

    near = np.triu((dist >= tol) & (dist < 10.0 * tol), k=1)
    mismatched = [
        (int(i), int(j))
        for i, j in zip(*np.nonzero(near))
        if find(int(i)) != find(int(j))
    ]
    if mismatched:
        worst = max(dist[i, j] for i, j in mismatched)
        warnings.warn(
            f"{len(mismatched)} collocation point pair(s) almost coincide "
            f"(separation < {10.0 * tol:.3e}, worst {worst:.3e}) but were "
            f"not merged; check patch connectivity",
            CollocationMismatchWarning,
            stacklevel=2,
        )

    node_id = {}
    order = []
    for i in range(total):
        root = find(i)
        if root not in node_id:
            node_id[root] = len(order)
            order.append(root)
    members = [[] for _ in order]
    for i in range(total):
        members[node_id[find(i)]].append(i)

    nodes = []
    for idx, group in enumerate(members):
        pos = positions[group].mean(axis=0)
        pos.flags.writeable = False
        aliases = tuple((patch_of[i], np.array(params[i])) for i in group)
        nodes.append(CollocationNode(idx, pos, aliases))

    grids = []
    offset = 0
    for k, count in enumerate(counts):
        ids = np.array(
            [node_id[find(offset + i)] for i in range(count)], dtype=int
        )
        pair = model.field_pairs[k]
        grids.append(ids.reshape(pair.n_u, pair.n_v))
        offset += count
    dof_map = DofMap(tuple(grids), len(nodes))
    return CollocationSet(tuple(nodes), dof_map, tol)


class _PatchContext:
    """Per-patch scratch data shared across matrix rows."""

    def __init__(self, patch, pair, cfg):
        self.patch = patch
        self.pair = pair
        self.regions = region_partition(pair.space_u, pair.space_v)
        self.rule = gauss_rule(cfg.gauss_order)
        self.singular_rule = gauss_rule(cfg.singular_gauss_order)
        self._region_data = {}
        self._fan_data = {}
        self._sample_memo = {}

        side = 17
        grid = np.linspace(0.0, 1.0, side)
        uu, vv = np.meshgrid(grid, grid, indexing="ij")
        self.seed_params = np.column_stack([uu.ravel(), vv.ravel()])
        self.seed_positions = patch.points_at(self.seed_params)
        cells = self.seed_positions.reshape(side, side, 3)
        spacing = max(
            np.linalg.norm(np.diff(cells, axis=0), axis=2).max(),
            np.linalg.norm(np.diff(cells, axis=1), axis=2).max(),
        )
        self.reject_radius = 3.0 * spacing + 1e-30

    def sampler(self, params):
        key = params.tobytes()
        hit = self._sample_memo.get(key)
        if hit is None:
            hit = self.patch.points_at(params)
            self._sample_memo[key] = hit
        return hit

    def region_data(self, region):
        key = (region.u0, region.u1, region.v0, region.v1)
        hit = self._region_data.get(key)
        if hit is None:
            params, wts = region.gauss_points(self.rule)
            frames = self.patch.frames_at(params)
            basis = self.pair.values(params)
            hit = (frames.positions, frames.normals, wts * frames.areas, basis)
            self._region_data[key] = hit
        return hit

    def fan_data(self, region, param):
        key = (region.u0, region.u1, region.v0, region.v1, param[0], param[1])
        hit = self._fan_data.get(key)
        if hit is None:
            pts, wts = singular_quadrature_points(
                region, param, self.singular_rule
            )
            frames = self.patch.frames_at(pts)
            basis = self.pair.values(pts) - self.pair.value_at(*param)
            hit = (frames.positions, frames.normals, wts * frames.areas, basis)
            self._fan_data[key] = hit
        return hit

    def project(self, target):
        """Closest point on the patch, Gauss-Newton from the best seed."""
        d2 = ((self.seed_positions - target) ** 2).sum(axis=1)
        best = int(np.argmin(d2))
        if d2[best] > self.reject_radius**2:
            return None, np.sqrt(d2[best])
        param = self.seed_params[best].copy()
        for _ in range(50):
            frame = self.patch.frame(param[0], param[1])
            res = frame.position - target
            grad = np.array(
                [res @ frame.tangent_u, res @ frame.tangent_v]
            )
            hess = np.array(
                [
                    [frame.tangent_u @ frame.tangent_u,
                     frame.tangent_u @ frame.tangent_v],
                    [frame.tangent_u @ frame.tangent_v,
                     frame.tangent_v @ frame.tangent_v],
                ]
            )
            try:
                step = np.linalg.solve(hess, -grad)
            except np.linalg.LinAlgError:
                break
            new_param = np.clip(param + step, 0.0, 1.0)
            moved = np.abs(new_param - param).max()
            param = new_param
            if moved < 1e-14:
                break
        dist = np.linalg.norm(self.patch.point(param[0], param[1]) - target)
        return param, dist


def _singular_params(node, patch_index, ctx, target, on_self, tol):
    if on_self:
        hits = [p for pk, p in node.aliases if pk == patch_index]
        if hits:
            return hits
    param, dist = ctx.project(target)
    if param is not None and dist < tol:
        return [param]
    return []


def _split_singular(regions, params, depth=0):
    """Pair each region holding a singular parameter with exactly one."""
    if depth > 40:
        raise QuadratureError(
            "could not separate singular parameters into distinct regions"
        )
    singular = []
    regular = []
    for region in regions:
        inside = [p for p in params if region.contains(p, tol=1e-9)]
        if not inside:
            regular.append(region)
        elif len(inside) == 1:
            singular.append((region, inside[0]))
        else:
            sub_s, sub_r = _split_singular(region.split(), inside, depth + 1)
            singular.extend(sub_s)
            regular.extend(sub_r)
    return singular, regular


def _engine(model, colloc, cfg, want_matrix, want_rhs, load):
    group = symmetry_group(model.symmetry_planes)
    contexts = [
        _PatchContext(patch, pair, cfg)
        for patch, pair in zip(model.patches, model.field_pairs)
    ]
    n_nodes = len(colloc.nodes)
    n_dof = 3 * n_nodes
    material = model.material

    t_blocks = np.zeros((n_dof, n_dof)) if want_matrix else None
    row_sums = np.zeros((n_nodes, 3, 3)) if want_matrix else None
    node_values = np.zeros((n_nodes, n_nodes)) if want_matrix else None
    rhs = np.zeros(n_dof) if want_rhs else None
    blocks_view = (
        t_blocks.reshape(n_nodes, 3, n_nodes, 3) if want_matrix else None
    )

    for node in colloc.nodes:
        n = node.index
        for g_index, mirror in enumerate(group):
            target = mirror @ node.position
            on_self = g_index == 0 or np.linalg.norm(
                target - node.position
            ) < colloc.merge_tol
            for k, ctx in enumerate(contexts):
                sing = _singular_params(
                    node, k, ctx, target, on_self, colloc.merge_tol
                )
                parts = []
                if sing:
                    fan_pairs, regular = _split_singular(ctx.regions, sing)
                    for region, param in fan_pairs:
                        parts.append(ctx.fan_data(region, param))
                else:
                    regular = ctx.regions
                regular = quadtree_refine(
                    regular,
                    target,
                    ctx.sampler,
                    threshold=cfg.quadtree_threshold,
                    max_depth=cfg.quadtree_max_depth,
                )
                parts.extend(ctx.region_data(region) for region in regular)

                positions = np.concatenate([p[0] for p in parts])
                normals = np.concatenate([p[1] for p in parts])
                weights = np.concatenate([p[2] for p in parts])
                basis = np.concatenate([p[3] for p in parts])
                if g_index:
                    positions = positions @ mirror.T
                    normals = normals @ mirror.T

                if want_matrix:
                    kernel = kelvin_T_many(
                        node.position, positions, normals, material
                    )
                    contrib = np.einsum(
                        "m,mij,mf->ijf", weights, kernel, basis
                    )
                    row_sums[n] += contrib.sum(axis=2)
                    if g_index:
                        contrib = np.einsum("ijf,jl->ilf", contrib, mirror)
                    ids = colloc.dof_map.grids[k].ravel()
                    blocks_view[n][:, ids, :] += contrib.transpose(0, 2, 1)
                if want_rhs:
                    tractions = load.traction(normals, cfg.excavation_sign)
                    u_kernel = kelvin_U_many(node.position, positions, material)
                    rhs[3 * n:3 * n + 3] += np.einsum(
                        "m,mij,mj->i", weights, u_kernel, tractions
                    )
        if want_matrix:
            owner_patch, owner_param = node.aliases[0]
            values = contexts[owner_patch].pair.value_at(*owner_param)
            ids = colloc.dof_map.grids[owner_patch].ravel()
            node_values[n, ids] += values

    partial = (
        PartialSystem(t_blocks, row_sums, node_values) if want_matrix else None
    )
    return partial, rhs


def free_term_rigid_body(partial, exterior=False):
    """Complete the diagonal blocks from the rigid-translation identity.

    For every row the untreated part of its singular integrals, together
    with the free term, equals one 3x3 matrix. On a closed (mirror
    completed) surface that matrix must cancel the row's plain kernel
    integral when the whole surface translates rigidly, which determines it
    without ever evaluating a strongly singular integral. The exterior
    formulation shifts the same identity by the identity matrix.
    """
    n_nodes = partial.row_sums.shape[0]
    matrix = partial.t_blocks.copy()
    view = matrix.reshape(n_nodes, 3, n_nodes, 3)
    eye = np.eye(3)
    for n in range(n_nodes):
        closure = -partial.row_sums[n]
        if exterior:
            closure = closure + eye
        view[n] += np.einsum("m,ij->imj", partial.node_values[n], closure)
    return matrix


def assemble(model, colloc=None, config=None):
    """Full dense collocation system for a model, closure included."""
    cfg = config if config is not None else model.config
    if colloc is None:
        colloc = collocation_points(model, cfg)
    if not model.closed:
        raise UnsupportedModelError(
            "free-term closure requires a closed surface; open models are "
            "only supported when mirror images close them (set closed=True "
            "in that case)"
        )
    partial, rhs = _engine(
        model,
        colloc,
        cfg,
        want_matrix=True,
        want_rhs=model.load is not None,
        load=model.load,
    )
    matrix = free_term_rigid_body(partial, model.exterior)
    if rhs is None:
        rhs = np.zeros(matrix.shape[0])
    return DenseSystem(matrix, rhs)


def neumann_rhs(model, colloc=None, load=None, config=None):
    """Right-hand side from a virgin stress state, without the matrix."""
    cfg = config if config is not None else model.config
    if colloc is None:
        colloc = collocation_points(model, cfg)
    if load is None:
        load = model.load
    if load is None:
        raise ModelError("no load state given and the model carries none")
    _, rhs = _engine(
        model, colloc, cfg, want_matrix=False, want_rhs=True, load=load
    )
    return rhs
