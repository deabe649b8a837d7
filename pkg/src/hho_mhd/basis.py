"""Scaled monomial bases on cells and faces, projectors and the hybrid interpolator.

Cell bases are 3-variate monomials ((x - x_T)/h_T)^a, face bases 2-variate
monomials in the face frame ((x - x_F).t1/h_F, (x - x_F).t2/h_F)^a. Monomials are
ordered by total degree, so a degree-k basis is a prefix of any higher-degree
basis; the L2-orthonormalization keeps this property (triangular change of basis)
and makes the first function the normalized constant.

Vector fields are handled component by component. Coefficient blocks of vector
quantities are stored component-major: index ``i * n + a`` for component ``i``
and scalar basis function ``a``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import comb

import numpy as np
import scipy.linalg as sla

from .errors import ConditioningError
from .mesh import PolyMesh
from .quadrature import MMS_DEGREE, QuadRule, cell_rule, face_rule


def dim_cell(k: int) -> int:
    return comb(k + 3, 3)


def dim_face(k: int) -> int:
    return comb(k + 2, 2)


@lru_cache(maxsize=None)
def monomial_exponents(degree: int, dim: int) -> np.ndarray:
    out = []
    for d in range(degree + 1):
        if dim == 3:
            for a in range(d, -1, -1):
                for b in range(d - a, -1, -1):
                    out.append((a, b, d - a - b))
        else:
            for a in range(d, -1, -1):
                out.append((a, d - a))
    return np.array(out, dtype=np.int64)


def _powers(y: np.ndarray, degree: int) -> np.ndarray:
    # pw[p, n, d] = y[n, d] ** p
    pw = np.ones((degree + 1,) + y.shape)
    for p in range(1, degree + 1):
        pw[p] = pw[p - 1] * y
    return pw


@dataclass
class BasisSpec:
    """Scaled monomial basis on a cell (dim 3) or a face (dim 2)."""

    degree: int
    dim: int
    center: np.ndarray
    scale: float
    frame: np.ndarray | None = None
    coeffs: np.ndarray | None = field(default=None, repr=False)

    @property
    def size(self) -> int:
        return dim_cell(self.degree) if self.dim == 3 else dim_face(self.degree)

    @property
    def orthonormal(self) -> bool:
        return self.coeffs is not None

    def local_coords(self, points: np.ndarray) -> np.ndarray:
        y = (np.atleast_2d(points) - self.center) / self.scale
        if self.dim == 2:
            y = y @ self.frame.T
        return y

    def monomials(self, points: np.ndarray) -> np.ndarray:
        y = self.local_coords(points)
        ex = monomial_exponents(self.degree, self.dim)
        pw = _powers(y, self.degree)
        vals = np.ones((y.shape[0], len(ex)))
        for d in range(self.dim):
            vals *= pw[ex[:, d], :, d].T
        return vals

    def monomial_gradients(self, points: np.ndarray) -> np.ndarray:
        """Physical gradients of the monomials, shape (n_points, size, 3); cells only."""
        if self.dim != 3:
            raise ValueError("gradients are only available on cell bases")
        y = self.local_coords(points)
        ex = monomial_exponents(self.degree, 3)
        pw = _powers(y, self.degree)
        grads = np.empty((y.shape[0], len(ex), 3))
        for d in range(3):
            g = ex[:, d].astype(float)[None, :] * pw[np.maximum(ex[:, d] - 1, 0), :, d].T
            for e in range(3):
                if e != d:
                    g = g * pw[ex[:, e], :, e].T
            grads[:, :, d] = g / self.scale
        return grads

    def values(self, points: np.ndarray, n: int | None = None) -> np.ndarray:
        v = self.monomials(points)
        if self.coeffs is not None:
            v = v @ self.coeffs
        return v if n is None else v[:, :n]

    def gradients(self, points: np.ndarray, n: int | None = None) -> np.ndarray:
        g = self.monomial_gradients(points)
        if self.coeffs is not None:
            g = np.einsum("qmd,mn->qnd", g, self.coeffs)
        return g if n is None else g[:, :n]


def mass_matrix(spec: BasisSpec, rule: QuadRule, n: int | None = None) -> np.ndarray:
    v = spec.values(rule.points, n)
    return (v * rule.weights[:, None]).T @ v


def orthonormalize(spec: BasisSpec, rule: QuadRule, passes: int = 2) -> BasisSpec:
    """L2-orthonormalize by Cholesky-based Gram-Schmidt, repeated for stability."""
    if rule.degree < 2 * spec.degree:
        raise ValueError("quadrature not exact enough for the mass matrix")
    raw = BasisSpec(spec.degree, spec.dim, spec.center, spec.scale, spec.frame)
    v = raw.monomials(rule.points)
    coeffs = np.eye(spec.size)
    for _ in range(passes):
        w = v @ coeffs
        m = (w * rule.weights[:, None]).T @ w
        try:
            L = np.linalg.cholesky(m)
        except np.linalg.LinAlgError as exc:
            raise ConditioningError("mass matrix is not positive definite") from exc
        coeffs = coeffs @ sla.solve_triangular(L, np.eye(spec.size), lower=True).T
    return BasisSpec(spec.degree, spec.dim, spec.center, spec.scale, spec.frame, coeffs)


def cell_basis(mesh: PolyMesh, t: int, degree: int, orthonormal: bool = True,
               rule: QuadRule | None = None) -> BasisSpec:
    spec = BasisSpec(degree, 3, mesh.cell_centroid[t].copy(), float(mesh.cell_diameter[t]))
    if not orthonormal:
        return spec
    return orthonormalize(spec, rule or cell_rule(mesh, t, 2 * degree))


def face_basis(mesh: PolyMesh, f: int, degree: int, orthonormal: bool = True,
               rule: QuadRule | None = None) -> BasisSpec:
    spec = BasisSpec(degree, 2, mesh.face_centroid[f].copy(), float(mesh.face_diameter[f]),
                     mesh.face_frame[f].copy())
    if not orthonormal:
        return spec
    return orthonormalize(spec, rule or face_rule(mesh, f, 2 * degree))


def l2_project(func, spec: BasisSpec, rule: QuadRule, n: int | None = None) -> np.ndarray:
    """L2 projection of ``func`` onto the first ``n`` basis functions of ``spec``.

    Scalar functions give shape (n,), vector ones (3, n).
    """
    vals = np.asarray(func(rule.points), dtype=float)
    phi = spec.values(rule.points, n)
    m = (phi * rule.weights[:, None]).T @ phi
    rhs = (phi * rule.weights[:, None]).T @ vals
    sol = np.linalg.solve(m, rhs)
    return sol if sol.ndim == 1 else sol.T


def elliptic_project(func, grad, spec: BasisSpec, rule: QuadRule, n: int) -> np.ndarray:
    """Elliptic projection onto the first ``n`` cell basis functions.

    Gradients are L2-projected onto gradients of the space and the mean is
    matched. ``grad`` returns (n_pts, 3) for scalar or (n_pts, 3, 3) with
    [i, j] = d_j v_i for vector fields.
    """
    w = rule.weights
    phi = spec.values(rule.points, n)
    dphi = spec.gradients(rule.points, n)
    stiff = np.einsum("q,qad,qbd->ab", w, dphi, dphi)
    mean = w @ phi
    g = np.asarray(grad(rule.points), dtype=float)
    vals = np.asarray(func(rule.points), dtype=float)
    bordered = np.zeros((n + 1, n + 1))
    bordered[:n, :n] = stiff
    bordered[:n, n] = mean
    bordered[n, :n] = mean
    if g.ndim == 2:
        rhs = np.append(np.einsum("q,qad,qd->a", w, dphi, g), w @ vals)
        return np.linalg.solve(bordered, rhs)[:n]
    rhs = np.vstack([np.einsum("q,qad,qid->ai", w, dphi, g), w @ vals])
    return np.linalg.solve(bordered, rhs)[:n].T


@dataclass
class HybridField:
    """Vector hybrid unknown: one P^k(T)^3 block per cell, one P^k(F)^3 block per face."""

    k: int
    cell: np.ndarray
    face: np.ndarray

    @classmethod
    def zeros(cls, mesh: PolyMesh, k: int) -> "HybridField":
        return cls(k, np.zeros((mesh.n_cells, 3 * dim_cell(k))),
                   np.zeros((mesh.n_faces, 3 * dim_face(k))))

    @property
    def size(self) -> int:
        return self.cell.size + self.face.size

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.cell.ravel(), self.face.ravel()])

    @classmethod
    def from_vector(cls, vec: np.ndarray, mesh: PolyMesh, k: int) -> "HybridField":
        nc = mesh.n_cells * 3 * dim_cell(k)
        return cls(k, vec[:nc].reshape(mesh.n_cells, -1).copy(),
                   vec[nc:].reshape(mesh.n_faces, -1).copy())

    def local(self, mesh: PolyMesh, t: int) -> np.ndarray:
        """Local vector on cell ``t``: cell block then faces in cell order."""
        return np.concatenate([self.cell[t]] + [self.face[f] for f in mesh.cell_faces[t]])

    def __sub__(self, other: "HybridField") -> "HybridField":
        return HybridField(self.k, self.cell - other.cell, self.face - other.face)

    def __add__(self, other: "HybridField") -> "HybridField":
        return HybridField(self.k, self.cell + other.cell, self.face + other.face)


@dataclass
class CellScalarField:
    """Broken P^k scalar field plus the multiplier of its zero-mean constraint."""

    k: int
    coeffs: np.ndarray
    multiplier: float = 0.0

    @classmethod
    def zeros(cls, mesh: PolyMesh, k: int) -> "CellScalarField":
        return cls(k, np.zeros((mesh.n_cells, dim_cell(k))))


class MeshBases:
    """Orthonormal cell/face bases and cached quadrature for a mesh and degree k.

    Cell bases carry degree max(k+1, 2k) so that P^k, P^{k+1} and P^{2k} are all
    prefixes of one basis.
    """

    def __init__(self, mesh: PolyMesh, k: int):
        self.mesh = mesh
        self.k = k
        self.cell_degree = max(k + 1, 2 * k)
        self.op_degree = 2 * self.cell_degree
        self.n_k = dim_cell(k)
        self.n_k1 = dim_cell(k + 1)
        self.n_2k = dim_cell(2 * k)
        self.m_k = dim_face(k)
        self._cell_rules = [cell_rule(mesh, t, self.op_degree) for t in range(mesh.n_cells)]
        self._face_rules = [face_rule(mesh, f, self.op_degree) for f in range(mesh.n_faces)]
        self.cells = [cell_basis(mesh, t, self.cell_degree, rule=self._cell_rules[t])
                      for t in range(mesh.n_cells)]
        self.faces = [face_basis(mesh, f, k, rule=self._face_rules[f])
                      for f in range(mesh.n_faces)]
        self._mms_cell = {}
        self._mms_face = {}

    def cell_rule(self, t: int) -> QuadRule:
        return self._cell_rules[t]

    def face_rule(self, f: int) -> QuadRule:
        return self._face_rules[f]

    def mms_cell_rule(self, t: int) -> QuadRule:
        if t not in self._mms_cell:
            self._mms_cell[t] = cell_rule(self.mesh, t, MMS_DEGREE)
        return self._mms_cell[t]

    def mms_face_rule(self, f: int) -> QuadRule:
        if f not in self._mms_face:
            self._mms_face[f] = face_rule(self.mesh, f, MMS_DEGREE)
        return self._mms_face[f]


def l2_project_cell(func, bases: MeshBases, t: int, n: int | None = None) -> np.ndarray:
    return l2_project(func, bases.cells[t], bases.mms_cell_rule(t), n or bases.n_k)


def l2_project_face(func, bases: MeshBases, f: int) -> np.ndarray:
    return l2_project(func, bases.faces[f], bases.mms_face_rule(f))


def interpolate(func, mesh: PolyMesh, k: int, bases: MeshBases | None = None) -> HybridField:
    """Hybrid interpolant: L2 projections on every cell and every face."""
    bases = bases or MeshBases(mesh, k)
    out = HybridField.zeros(mesh, k)
    for t in range(mesh.n_cells):
        out.cell[t] = l2_project_cell(func, bases, t).ravel()
    for f in range(mesh.n_faces):
        out.face[f] = l2_project_face(func, bases, f).ravel()
    return out
