"""Dense solve, rigid-mode handling, field evaluation, refinement driver.

Pure Neumann interior problems carry a rigid-motion nullspace. The modes
that survive the declared mirror symmetries are pinned at an automatically
chosen, well-conditioned set of displacement components, and the reported
coefficients are post-normalized by subtracting the best-fit surviving
rigid motion. Exterior problems need neither step, the decay condition
already removes the nullspace.
"""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ModelError, SingularMatrixError
from .assembly import DenseSystem, assemble, collocation_points
from .model import reflection_matrix

__all__ = [
    "Solution",
    "solve",
    "solve_model",
    "surviving_rigid_modes",
    "pin_rigid_motion",
    "remove_rigid_motion",
    "evaluate_displacement",
    "elevate_model_order",
    "refinement_study",
]


@dataclass(frozen=True, eq=False)
class Solution:
    """Displacement coefficients plus solve metadata."""

    coefficients: np.ndarray
    colloc: object
    field_orders: tuple
    residual: float

    @property
    def dof_count(self):
        return len(self.coefficients)


def solve(system):
    """LU solve with a residual check, for one assembled dense system."""
    matrix = system.matrix
    rhs = system.rhs
    if not (np.all(np.isfinite(matrix)) and np.all(np.isfinite(rhs))):
        raise ModelError("system contains non-finite entries")
    with warnings.catch_warnings():
        # scipy warns on near-singular input; the pivot check below raises
        warnings.simplefilter("ignore")
        lu, piv = scipy.linalg.lu_factor(matrix)
    diag = np.abs(np.diag(lu))
    scale = diag.max() if diag.size else 0.0
    bad = np.nonzero(diag <= 1e-14 * max(scale, 1.0))[0]
    if bad.size:
        raise SingularMatrixError(int(bad[0]))
    coeffs = scipy.linalg.lu_solve((lu, piv), rhs)
    denom = np.linalg.norm(rhs)
    residual = np.linalg.norm(matrix @ coeffs - rhs)
    residual = residual / denom if denom > 0 else residual
    return coeffs, float(residual)


def surviving_rigid_modes(symmetry_planes):
    """Rigid-motion fields compatible with the declared mirror symmetries.

    Returns a list of callables mapping positions (m, 3) to mode fields
    (m, 3). Without symmetry there are six: three translations and three
    rotations about the coordinate axes.
    """
    mats = [reflection_matrix(p) for p in symmetry_planes]
    modes = []
    for axis in range(3):
        e = np.zeros(3)
        e[axis] = 1.0
        if all(np.allclose(m @ e, e) for m in mats):
            vec = e.copy()
            modes.append(lambda pts, v=vec: np.broadcast_to(
                v, (len(pts), 3)).copy())
    for axis in range(3):
        e = np.zeros(3)
        e[axis] = 1.0
        # reflections reverse rotation axes unless the axis is the plane
        # normal; det(M) M e == e is the invariance condition
        if all(np.allclose(-(m @ e), e) for m in mats):
            vec = e.copy()
            modes.append(lambda pts, v=vec: np.cross(v, pts))
    return modes


def _mode_matrix(modes, positions):
    cols = [mode(positions).ravel() for mode in modes]
    if not cols:
        return np.zeros((3 * len(positions), 0))
    return np.column_stack(cols)


def pin_rigid_motion(matrix, rhs, colloc, symmetry_planes=()):
    """Replace a well-chosen set of rows by zero-displacement constraints.

    One row per surviving rigid mode is overwritten with an identity row.
    The rows are picked by column-pivoted QR on the mode value matrix so
    the constrained mode combinations stay well conditioned.
    """
    modes = surviving_rigid_modes(symmetry_planes)
    if not modes:
        return matrix, rhs, ()
    z = _mode_matrix(modes, colloc.positions)
    _, _, pivots = scipy.linalg.qr(z.T, pivoting=True)
    rows = tuple(int(r) for r in pivots[: len(modes)])
    matrix = matrix.copy()
    rhs = rhs.copy()
    for r in rows:
        matrix[r, :] = 0.0
        matrix[r, r] = 1.0
        rhs[r] = 0.0
    return matrix, rhs, rows


def remove_rigid_motion(colloc, coefficients, symmetry_planes=()):
    """Subtract the best-fit surviving rigid motion from the coefficients.

    Coefficients are compared against rigid fields sampled at the node
    positions; the least-squares fit is removed. With flat patch geometry
    a rigid field's exact coefficient vector equals its node samples, so
    this removes pinning artifacts without touching the elastic part.
    """
    modes = surviving_rigid_modes(symmetry_planes)
    if not modes:
        return coefficients
    z = _mode_matrix(modes, colloc.positions)
    fit, *_ = np.linalg.lstsq(z, coefficients, rcond=None)
    return coefficients - z @ fit


def solve_model(model, config=None):
    """Collocate, assemble, solve, and normalize one model."""
    cfg = config if config is not None else model.config
    colloc = collocation_points(model, cfg)
    system = assemble(model, colloc, cfg)
    matrix, rhs = system.matrix, system.rhs
    if not model.exterior:
        matrix, rhs, _ = pin_rigid_motion(
            matrix, rhs, colloc, model.symmetry_planes
        )
        system = DenseSystem(matrix, rhs)
    coeffs, residual = solve(system)
    if not model.exterior:
        coeffs = remove_rigid_motion(colloc, coeffs, model.symmetry_planes)
    orders = tuple(pair.orders for pair in model.field_pairs)
    return Solution(coeffs, colloc, orders, residual)


def evaluate_displacement(model, solution, patch_index, u, v):
    """Displacement vector at field parameters (u, v) of one patch."""
    if not 0 <= patch_index < model.n_patches:
        raise ModelError(
            f"patch index {patch_index} out of range 0..{model.n_patches - 1}"
        )
    pair = model.field_pairs[patch_index]
    values = pair.value_at(u, v)
    ids = solution.colloc.dof_map.grids[patch_index].ravel()
    coeffs = solution.coefficients.reshape(-1, 3)
    return values @ coeffs[ids]


def evaluate_displacement_many(model, solution, patch_index, params):
    """Displacement vectors at an (m, 2) array of field parameters."""
    if not 0 <= patch_index < model.n_patches:
        raise ModelError(
            f"patch index {patch_index} out of range 0..{model.n_patches - 1}"
        )
    params = np.atleast_2d(np.asarray(params, dtype=float))
    pair = model.field_pairs[patch_index]
    values = pair.values(params)
    ids = solution.colloc.dof_map.grids[patch_index].ravel()
    coeffs = solution.coefficients.reshape(-1, 3)
    return values @ coeffs[ids]


def elevate_model_order(model, new_order):
    """Raise every patch's field order; geometry stays untouched."""
    pairs = [pair.elevated(new_order) for pair in model.field_pairs]
    return model.with_field_pairs(pairs)


def refinement_study(model, orders, probe=None, csv_path=None):
    """Solve at several field orders and report a probe functional.

    probe is (patch_index, u, v); the functional is the displacement
    magnitude there. Returns rows (order, dof_count, functional, residual)
    and optionally writes them as CSV.
    """
    orders = list(orders)
    if orders != sorted(orders) or len(set(orders)) != len(orders):
        raise ModelError(f"orders must be strictly increasing, got {orders}")
    if probe is None:
        probe = (0, 0.5, 0.5)
    patch_index, u, v = probe

    current = max(max(pair.orders) for pair in model.field_pairs)
    rows = []
    for order in orders:
        if order < current:
            raise ModelError(
                f"cannot lower field order from {current} to {order}"
            )
        stage = model if order == current else elevate_model_order(model, order)
        sol = solve_model(stage)
        disp = evaluate_displacement(stage, sol, patch_index, u, v)
        rows.append((order, sol.dof_count, float(np.linalg.norm(disp)),
                     sol.residual))
    if csv_path is not None:
        with open(csv_path, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["order", "dof_count", "functional", "residual"])
            for row in rows:
                writer.writerow([row[0], row[1], repr(row[2]), repr(row[3])])
    return rows
