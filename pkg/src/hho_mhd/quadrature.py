"""Quadrature on polyhedral cells and polygonal faces by sub-simplex splitting.

Simplex rules are collapsed (conical) Gauss-Jacobi products: positive weights
and exact for any requested total degree.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

from .errors import GeometryError
from .mesh import PolyMesh

# Integrals involving the trigonometric manufactured solution use this exactness.
MMS_DEGREE = 14


@dataclass(frozen=True)
class QuadRule:
    points: np.ndarray
    weights: np.ndarray
    degree: int

    def integrate(self, values: np.ndarray):
        return np.tensordot(self.weights, values, axes=(0, 0))


def _gauss_jacobi01(n: int, alpha: float):
    x, w = roots_jacobi(n, alpha, 0.0)
    return 0.5 * (x + 1.0), w / 2.0 ** (alpha + 1.0)


@lru_cache(maxsize=None)
def reference_tet_rule(degree: int):
    """Rule on the tetrahedron (0,0,0),(1,0,0),(0,1,0),(0,0,1)."""
    n = max(1, (degree + 2) // 2)
    a, wa = _gauss_jacobi01(n, 2.0)
    b, wb = _gauss_jacobi01(n, 1.0)
    c, wc = _gauss_jacobi01(n, 0.0)
    A, B, C = np.meshgrid(a, b, c, indexing="ij")
    W = wa[:, None, None] * wb[None, :, None] * wc[None, None, :]
    x = A
    y = B * (1.0 - A)
    z = C * (1.0 - A) * (1.0 - B)
    pts = np.stack([x.ravel(), y.ravel(), z.ravel()], axis=1)
    return pts, W.ravel()


@lru_cache(maxsize=None)
def reference_triangle_rule(degree: int):
    """Rule on the triangle (0,0),(1,0),(0,1)."""
    n = max(1, (degree + 2) // 2)
    a, wa = _gauss_jacobi01(n, 1.0)
    b, wb = _gauss_jacobi01(n, 0.0)
    A, B = np.meshgrid(a, b, indexing="ij")
    pts = np.stack([A.ravel(), (B * (1.0 - A)).ravel()], axis=1)
    return pts, (wa[:, None] * wb[None, :]).ravel()


def tet_rule(v0, v1, v2, v3, degree: int) -> QuadRule:
    ref_pts, ref_w = reference_tet_rule(degree)
    jac = np.stack([v1 - v0, v2 - v0, v3 - v0], axis=1)
    det = np.linalg.det(jac)
    if det <= 0.0:
        raise GeometryError(f"degenerate sub-tetrahedron (signed volume {det / 6:g})")
    return QuadRule(v0 + ref_pts @ jac.T, ref_w * det, degree)


def triangle_rule(v0, v1, v2, degree: int) -> QuadRule:
    ref_pts, ref_w = reference_triangle_rule(degree)
    e1, e2 = v1 - v0, v2 - v0
    area2 = np.linalg.norm(np.cross(e1, e2))
    if area2 <= 0.0:
        raise GeometryError("degenerate sub-triangle")
    pts = v0 + ref_pts[:, :1] * e1 + ref_pts[:, 1:] * e2
    return QuadRule(pts, ref_w * area2, degree)


def _concat(rules, degree):
    return QuadRule(
        np.concatenate([r.points for r in rules]),
        np.concatenate([r.weights for r in rules]),
        degree,
    )


def _face_triangles(mesh: PolyMesh, f: int):
    pts = mesh.vertices[mesh.faces[f]]
    if len(pts) == 3:
        return [(pts[0], pts[1], pts[2])]
    c = mesh.face_centroid[f]
    return [(c, a, b) for a, b in zip(pts, np.roll(pts, -1, axis=0))]


def face_rule(mesh: PolyMesh, f: int, deg: int) -> QuadRule:
    """Rule on face ``f``: triangles as-is, other polygons fanned from the centroid."""
    if deg < 0:
        raise ValueError("degree must be non-negative")
    return _concat([triangle_rule(a, b, c, deg) for a, b, c in _face_triangles(mesh, f)], deg)


def cell_rule(mesh: PolyMesh, t: int, deg: int) -> QuadRule:
    """Rule on cell ``t``: each face triangle is coned to the cell star point."""
    if deg < 0:
        raise ValueError("degree must be non-negative")
    if mesh.is_tetrahedron(t):
        f0 = mesh.cell_faces[t][0]
        tri = mesh.vertices[mesh.faces[f0]]
        if mesh.cell_signs[t][0] < 0:
            tri = tri[::-1]
        apex = mesh.vertices[np.setdiff1d(mesh.cell_vertices[t], mesh.faces[f0])[0]]
        # outward face orientation makes (tri, apex) negatively oriented
        return tet_rule(tri[0], tri[2], tri[1], apex, deg)
    s = mesh.cell_star[t]
    rules = []
    for f, sg in zip(mesh.cell_faces[t], mesh.cell_signs[t]):
        for a, b, c in _face_triangles(mesh, f):
            if sg < 0:
                b, c = c, b
            rules.append(tet_rule(s, a, b, c, deg))
    return _concat(rules, deg)
