"""Point-force (Kelvin) fundamental solutions for 3D linear elastostatics.

``kelvin_U`` is the displacement influence matrix and ``kelvin_T`` the
traction influence matrix, oriented so that the boundary identity reads

    c(P) u(P) + int T(P, Q) u(Q) dS = int U(P, Q) t(Q) dS

with the normal pointing out of the domain.  Consequently the closed-surface
identity  int T dS = -I  holds for any surface enclosing the source point.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import KernelSingularityError, ModelError

__all__ = ["Material", "kelvin_U", "kelvin_T", "kelvin_U_many", "kelvin_T_many"]


@dataclass(frozen=True)
class Material:
    """Isotropic elastic material."""

    youngs_modulus: float
    poisson_ratio: float

    def __post_init__(self):
        if not self.youngs_modulus > 0.0:
            raise ModelError("Young's modulus must be positive")
        if not -1.0 < self.poisson_ratio < 0.5:
            raise ModelError("Poisson ratio must lie in (-1, 0.5)")

    @property
    def shear_modulus(self) -> float:
        return self.youngs_modulus / (2.0 * (1.0 + self.poisson_ratio))


def _radii(source: np.ndarray, points: np.ndarray):
    diff = points - source
    r = np.linalg.norm(diff, axis=-1)
    if np.any(r == 0.0):
        raise KernelSingularityError("field point coincides with the source point")
    return diff / r[..., None], r


def kelvin_U_many(source, points, material: Material) -> np.ndarray:
    """Displacement kernel at many field points; shape (m, 3, 3)."""
    source = np.asarray(source, dtype=float)
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    rdir, r = _radii(source, points)
    nu = material.poisson_ratio
    g = material.shear_modulus
    c = 1.0 / (16.0 * np.pi * g * (1.0 - nu))
    out = (3.0 - 4.0 * nu) * np.eye(3)[None, :, :] + \
        rdir[:, :, None] * rdir[:, None, :]
    return c * out / r[:, None, None]


def kelvin_T_many(source, points, normals, material: Material) -> np.ndarray:
    """Traction kernel at many field points; shape (m, 3, 3).

    ``normals`` are unit normals at the field points, pointing out of the
    domain the identity is written for.
    """
    source = np.asarray(source, dtype=float)
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    normals = np.asarray(normals, dtype=float).reshape(-1, 3)
    rdir, r = _radii(source, points)
    nu = material.poisson_ratio
    k = 1.0 / (8.0 * np.pi * (1.0 - nu))
    two_nu = 1.0 - 2.0 * nu
    drdn = np.einsum("mi,mi->m", rdir, normals)
    sym = two_nu * np.eye(3)[None, :, :] + \
        3.0 * rdir[:, :, None] * rdir[:, None, :]
    rot = normals[:, :, None] * rdir[:, None, :] - \
        rdir[:, :, None] * normals[:, None, :]
    return -k / r[:, None, None] ** 2 * (drdn[:, None, None] * sym + two_nu * rot)


def kelvin_U(source, field, material: Material) -> np.ndarray:
    """Displacement at ``field`` per unit point force at ``source``; 3x3."""
    return kelvin_U_many(source, np.asarray(field, dtype=float)[None, :], material)[0]


def kelvin_T(source, field, normal, material: Material) -> np.ndarray:
    """Traction influence matrix at ``field`` with surface normal ``normal``."""
    return kelvin_T_many(
        source,
        np.asarray(field, dtype=float)[None, :],
        np.asarray(normal, dtype=float)[None, :],
        material,
    )[0]
