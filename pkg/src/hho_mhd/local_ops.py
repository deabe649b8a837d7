"""Per-cell HHO operators: potential, divergence and gradient reconstructions,
stabilized diffusion form, pressure coupling and the skew-symmetrized
convective trilinear form.

All reconstructions act component by component, so they are first built on
the scalar local space ``P^k(T) x P^k(F_1) x ... x P^k(F_n)`` (size ``NS``) and
then lifted to vector fields. The local vector layout (size ``NL = 3 NS``) is:
cell block (component-major), then each face of the cell in order, each block
component-major. ``cidx[i, s]`` gives the vector index of component ``i`` of
scalar local unknown ``s``.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .basis import MeshBases
from .errors import AssemblyError, ConditioningError
from .mesh import PolyMesh


def component_index(nk: int, mk: int, n_faces: int) -> np.ndarray:
    cidx = np.empty((3, nk + n_faces * mk), dtype=np.int64)
    for i in range(3):
        cidx[i, :nk] = i * nk + np.arange(nk)
        for j in range(n_faces):
            off = 3 * nk + j * 3 * mk + i * mk
            cidx[i, nk + j * mk: nk + (j + 1) * mk] = off + np.arange(mk)
    return cidx


@dataclass
class LocalOps:
    cell: int
    k: int
    n_k: int
    n_k1: int
    n_2k: int
    m_k: int
    n_faces: int
    h: float
    cidx: np.ndarray
    R: np.ndarray  # (n_k1, NS) potential reconstruction
    D: np.ndarray  # (3, n_k, NS) divergence reconstruction, per direction
    G: np.ndarray  # (3, n_2k, NS) gradient reconstruction, per direction
    stiffness: np.ndarray  # (n_k1, n_k1)
    mass: np.ndarray  # (n_k, n_k) cell mass on P^k
    mean: np.ndarray  # (n_k,) integrals of the cell basis functions
    a_s: np.ndarray  # (NS, NS) scalar diffusion form
    s_s: np.ndarray  # (NS, NS) scalar stabilization
    norm1_s: np.ndarray  # (NS, NS) H1-like seminorm
    theta: np.ndarray = field(repr=False)  # (n_k, 3, NS, n_k) convective tensor

    @property
    def ns(self) -> int:
        return self.n_k + self.n_faces * self.m_k

    @property
    def nl(self) -> int:
        return 3 * self.ns

    def _lift(self, mat: np.ndarray) -> np.ndarray:
        out = np.zeros((self.nl, self.nl))
        for i in range(3):
            out[np.ix_(self.cidx[i], self.cidx[i])] = mat
        return out

    @property
    def a(self) -> np.ndarray:
        return self._lift(self.a_s)

    @property
    def s(self) -> np.ndarray:
        return self._lift(self.s_s)

    @property
    def norm1(self) -> np.ndarray:
        return self._lift(self.norm1_s)

    @property
    def r(self) -> np.ndarray:
        """Potential reconstruction, output component-major over P^{k+1}."""
        out = np.zeros((3 * self.n_k1, self.nl))
        for i in range(3):
            out[i * self.n_k1:(i + 1) * self.n_k1, self.cidx[i]] = self.R
        return out

    @property
    def div(self) -> np.ndarray:
        out = np.zeros((self.n_k, self.nl))
        for j in range(3):
            out[:, self.cidx[j]] = self.D[j]
        return out

    @property
    def grad(self) -> np.ndarray:
        """Gradient reconstruction as (3, 3, n_2k, NL), entry [i, j] for d_j v_i."""
        out = np.zeros((3, 3, self.n_2k, self.nl))
        for i in range(3):
            for j in range(3):
                out[i, j][:, self.cidx[i]] = self.G[j]
        return out

    @property
    def d(self) -> np.ndarray:
        """Pressure coupling d_T(v, q) = -(D_T v, q)_T as (NL, n_k)."""
        return -(self.mass @ self.div).T

    def components(self, local: np.ndarray) -> np.ndarray:
        return local[self.cidx]


def build_local_ops(mesh: PolyMesh, t: int, k: int, bases: MeshBases) -> LocalOps:
    cb = bases.cells[t]
    rule = bases.cell_rule(t)
    w = rule.weights
    nk, nk1, n2k, mk = bases.n_k, bases.n_k1, bases.n_2k, bases.m_k
    nmax = max(nk1, n2k)
    fs = mesh.cell_faces[t]
    nf = len(fs)
    ns = nk + nf * mk
    h = float(mesh.cell_diameter[t])

    psi = cb.values(rule.points, nmax)
    dpsi = cb.gradients(rule.points, nmax)
    mass = (psi * w[:, None]).T @ psi
    stiff = np.einsum("q,qad,qbd->ab", w, dpsi[:, :nk1], dpsi[:, :nk1])

    # right-hand sides of the reconstructions
    B = np.zeros((nk1, ns))
    B[:, :nk] = stiff[:, :nk]
    grad_rhs = np.zeros((3, n2k, ns))
    grad_rhs[:, :, :nk] = -np.einsum("q,qb,qad->dab", w, psi[:, :nk], dpsi[:, :n2k])
    stab_faces = []
    trace_ops = []
    for j, (f, sg) in enumerate(zip(fs, mesh.cell_signs[t])):
        fr = bases.face_rule(f)
        wf = fr.weights
        n = sg * mesh.face_normal[f]
        psi_f = cb.values(fr.points, nmax)
        ndpsi = cb.gradients(fr.points, nk1) @ n
        xf = bases.faces[f].values(fr.points)
        cols = slice(nk + j * mk, nk + (j + 1) * mk)
        B[:, :nk] -= (ndpsi * wf[:, None]).T @ psi_f[:, :nk]
        B[:, cols] += (ndpsi * wf[:, None]).T @ xf
        face_moment = (psi_f[:, :n2k] * wf[:, None]).T @ xf
        grad_rhs[:, :, cols] += n[:, None, None] * face_moment[None]
        mf = (xf * wf[:, None]).T @ xf
        proj_f = np.linalg.solve(mf, (xf * wf[:, None]).T @ psi_f[:, :nk1])
        stab_faces.append((cols, mf, proj_f))
        trace = np.zeros((len(wf), ns))
        trace[:, :nk] = -psi_f[:, :nk]
        trace[:, cols] = xf
        trace_ops.append((trace * wf[:, None]).T @ trace)

    mean = w @ psi[:, :nk1]
    bordered = np.zeros((nk1 + 1, nk1 + 1))
    bordered[:nk1, :nk1] = stiff
    bordered[:nk1, nk1] = mean
    bordered[nk1, :nk1] = mean
    rhs = np.zeros((nk1 + 1, ns))
    rhs[:nk1] = B
    rhs[nk1, :nk] = mean[:nk]
    try:
        R = sla.solve(bordered, rhs)[:nk1]
    except (np.linalg.LinAlgError, sla.LinAlgWarning) as exc:
        raise ConditioningError(f"singular potential reconstruction in cell {t}") from exc

    m2k = mass[:n2k, :n2k]
    G = np.stack([np.linalg.solve(m2k, grad_rhs[j]) for j in range(3)])
    mk_mass = mass[:nk, :nk]
    D = np.stack([np.linalg.solve(mk_mass, grad_rhs[j][:nk]) for j in range(3)])

    proj_t = np.linalg.solve(mk_mass, mass[:nk, :nk1])
    delta_t = -proj_t @ R
    delta_t[:, :nk] += np.eye(nk)
    s_s = delta_t.T @ stiff[:nk, :nk] @ delta_t
    for cols, mf, proj_f in stab_faces:
        delta_f = -proj_f @ R
        delta_f[:, cols] += np.eye(mk)
        s_s += delta_f.T @ mf @ delta_f / h
    a_s = R.T @ stiff @ R + s_s
    if np.abs(a_s - a_s.T).max() > 1e-12 * max(1.0, np.abs(a_s).max()):
        raise AssemblyError(f"asymmetric local diffusion matrix in cell {t}")
    a_s = 0.5 * (a_s + a_s.T)

    norm1_s = np.zeros((ns, ns))
    norm1_s[:nk, :nk] = stiff[:nk, :nk]
    norm1_s += sum(trace_ops) / h

    gq = np.einsum("qa,jas->qjs", psi[:, :n2k], G)
    theta = np.einsum("q,qa,qjs,qb->ajsb", w, psi[:, :nk], gq, psi[:, :nk], optimize=True)

    return LocalOps(
        cell=t, k=k, n_k=nk, n_k1=nk1, n_2k=n2k, m_k=mk, n_faces=nf, h=h,
        cidx=_cidx_cached(nk, mk, nf), R=R, D=D, G=G, stiffness=stiff, mass=mk_mass,
        mean=mean[:nk], a_s=a_s, s_s=s_s, norm1_s=norm1_s, theta=theta,
    )


_CIDX = {}


def _cidx_cached(nk, mk, nf):
    key = (nk, mk, nf)
    if key not in _CIDX:
        _CIDX[key] = component_index(nk, mk, nf)
    return _CIDX[key]


def build_all_local_ops(bases: MeshBases, workers: int = 1) -> list:
    mesh, k = bases.mesh, bases.k

    def one(t):
        return build_local_ops(mesh, t, k, bases)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, range(mesh.n_cells)))
    return [one(t) for t in range(mesh.n_cells)]


def build_rT(mesh: PolyMesh, t: int, k: int, bases: MeshBases) -> np.ndarray:
    return build_local_ops(mesh, t, k, bases).r


def build_DT(mesh: PolyMesh, t: int, k: int, bases: MeshBases) -> np.ndarray:
    return build_local_ops(mesh, t, k, bases).div


def build_GT(mesh: PolyMesh, t: int, k: int, bases: MeshBases) -> np.ndarray:
    return build_local_ops(mesh, t, k, bases).grad


def build_aT(mesh: PolyMesh, t: int, k: int, bases: MeshBases) -> np.ndarray:
    return build_local_ops(mesh, t, k, bases).a


def build_dT(mesh: PolyMesh, t: int, k: int, bases: MeshBases) -> np.ndarray:
    return build_local_ops(mesh, t, k, bases).d


def convection_matrix(ops: LocalOps, v: np.ndarray) -> np.ndarray:
    """Scalar skew matrix N(v) with t_T(v, w, z) = sum_i w_i^T N(v) z_i."""
    vt = ops.components(v)[:, :ops.n_k]
    P = np.einsum("ajsb,ja->sb", ops.theta, vt)
    N = np.zeros((ops.ns, ops.ns))
    N[:, :ops.n_k] += 0.5 * P
    N[:ops.n_k, :] -= 0.5 * P.T
    return N


def apply_tT(v: np.ndarray, w: np.ndarray, z: np.ndarray, ops: LocalOps) -> float:
    N = convection_matrix(ops, v)
    wc, zc = ops.components(w), ops.components(z)
    return float(np.einsum("is,st,it->", wc, N, zc))


def tT_gradient(v: np.ndarray, w: np.ndarray, ops: LocalOps) -> np.ndarray:
    """The linear form z -> t_T(v, w, z) as a local vector."""
    N = convection_matrix(ops, v)
    out = np.zeros(ops.nl)
    out[ops.cidx] = ops.components(w) @ N
    return out


def tT_partials(v: np.ndarray, w: np.ndarray, ops: LocalOps):
    """Derivatives of ``tT_gradient(v, w)`` with respect to ``v`` and ``w``."""
    nk = ops.n_k
    N = convection_matrix(ops, v)
    jw = ops._lift(N.T)
    wc = ops.components(w)
    dv = np.zeros((3, ops.ns, 3, nk))
    dv[:, :nk] += 0.5 * np.einsum("ajst,is->itja", ops.theta, wc)
    dv -= 0.5 * np.einsum("ajtb,ib->itja", ops.theta, wc[:, :nk])
    jv = np.zeros((ops.nl, ops.nl))
    jv[np.ix_(ops.cidx.ravel(), ops.cidx[:, :nk].ravel())] = dv.reshape(3 * ops.ns, 3 * nk)
    return jv, jw
