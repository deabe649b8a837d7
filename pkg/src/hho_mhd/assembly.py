"""Global unknowns, residual/Jacobian assembly, static condensation, inf-sup probe.

Two numberings are used. The *full* numbering stores every hybrid unknown:
``[u (cells, faces) | b (cells, faces) | q | r | lambda_q | lambda_r]`` where the
cell and face blocks follow :class:`HybridField`. The *reduced* numbering is the
one of the discrete problem: velocity unknowns on boundary faces are dropped, and
magnetic unknowns on boundary faces are expressed in the face frame (t1, t2)
with the normal component removed. ``layout.P`` maps reduced to full; its
columns are orthonormal so ``P.T`` restricts.

Reduced ordering: ``[u cells | u interior faces | b cells | b faces | q | r |
lambda_q, lambda_r]``. Static condensation eliminates all cell unknowns of u and
b and all pressure coefficients but the first one of each cell; the cell bases
are orthonormal and start with the constant, so that first coefficient alone
carries the cell mean and the zero-mean multipliers only couple to it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .basis import CellScalarField, HybridField, MeshBases, dim_cell, dim_face
from .errors import AssemblyError, CondensationError
from .local_ops import LocalOps, build_all_local_ops
from .mesh import PolyMesh


@dataclass
class ModelParams:
    nu_k: float = 0.1
    nu_m: float = 0.1
    rho: float = 1.0
    f: Callable | None = None
    g: Callable | None = None

    def __post_init__(self):
        if not (self.nu_k > 0 and self.nu_m > 0):
            raise ValueError("viscosity and magnetic diffusivity must be positive")


@dataclass
class SystemState:
    u: HybridField
    b: HybridField
    q: CellScalarField
    r: CellScalarField

    @classmethod
    def zeros(cls, mesh: PolyMesh, k: int) -> "SystemState":
        return cls(HybridField.zeros(mesh, k), HybridField.zeros(mesh, k),
                   CellScalarField.zeros(mesh, k), CellScalarField.zeros(mesh, k))


@dataclass
class DofLayout:
    k: int
    n_cells: int
    n_faces: int
    n_k: int
    m_k: int
    n_hybrid: int
    n_full: int
    n_reduced: int
    P: sp.csr_matrix
    u_cell: np.ndarray
    u_face: np.ndarray
    b_cell: np.ndarray
    b_face: list
    q: np.ndarray
    r: np.ndarray
    lam_q: int
    lam_r: int
    elim: np.ndarray
    retained: np.ndarray

    # full-numbering offsets
    @property
    def off_b(self) -> int:
        return self.n_hybrid

    @property
    def off_q(self) -> int:
        return 2 * self.n_hybrid

    @property
    def off_r(self) -> int:
        return 2 * self.n_hybrid + self.n_cells * self.n_k

    def counts(self) -> dict:
        return {"reduced": self.n_reduced, "retained": len(self.retained),
                "eliminated": self.elim.size}

    def state_to_vector(self, state: SystemState) -> np.ndarray:
        full = np.concatenate([state.u.to_vector(), state.b.to_vector(),
                               state.q.coeffs.ravel(), state.r.coeffs.ravel(),
                               [state.q.multiplier, state.r.multiplier]])
        return self.P.T @ full

    def vector_to_state(self, x: np.ndarray, mesh: PolyMesh) -> SystemState:
        full = self.P @ x
        nh, nc, nk = self.n_hybrid, self.n_cells, self.n_k
        u = HybridField.from_vector(full[:nh], mesh, self.k)
        b = HybridField.from_vector(full[nh:2 * nh], mesh, self.k)
        q = CellScalarField(self.k, full[2 * nh:2 * nh + nc * nk].reshape(nc, nk).copy(),
                            float(full[-2]))
        r = CellScalarField(self.k, full[2 * nh + nc * nk:2 * nh + 2 * nc * nk].reshape(nc, nk).copy(),
                            float(full[-1]))
        return SystemState(u, b, q, r)


def build_layout(mesh: PolyMesh, k: int) -> DofLayout:
    nk, mk = dim_cell(k), dim_face(k)
    nc, nf = mesh.n_cells, mesh.n_faces
    n_hyb = nc * 3 * nk + nf * 3 * mk
    n_full = 2 * n_hyb + 2 * nc * nk + 2
    rows, cols, vals = [], [], []
    counter = 0

    def take(n):
        nonlocal counter
        out = np.arange(counter, counter + n)
        counter += n
        return out

    def cell_full(offset, t):
        return offset + t * 3 * nk + np.arange(3 * nk)

    def face_full(offset, f):
        return offset + nc * 3 * nk + f * 3 * mk + np.arange(3 * mk)

    u_cell = np.empty((nc, 3 * nk), dtype=np.int64)
    for t in range(nc):
        u_cell[t] = take(3 * nk)
        rows.append(cell_full(0, t)), cols.append(u_cell[t]), vals.append(np.ones(3 * nk))
    u_face = -np.ones((nf, 3 * mk), dtype=np.int64)
    for f in mesh.interior_faces:
        u_face[f] = take(3 * mk)
        rows.append(face_full(0, f)), cols.append(u_face[f]), vals.append(np.ones(3 * mk))
    b_cell = np.empty((nc, 3 * nk), dtype=np.int64)
    for t in range(nc):
        b_cell[t] = take(3 * nk)
        rows.append(cell_full(n_hyb, t)), cols.append(b_cell[t]), vals.append(np.ones(3 * nk))
    b_face = []
    for f in range(nf):
        full = face_full(n_hyb, f)
        if mesh.face_boundary[f]:
            red = take(2 * mk)
            frame = mesh.face_frame[f]
            for a in range(2):
                for i in range(3):
                    rows.append(full[i * mk:(i + 1) * mk])
                    cols.append(red[a * mk:(a + 1) * mk])
                    vals.append(np.full(mk, frame[a, i]))
        else:
            red = take(3 * mk)
            rows.append(full), cols.append(red), vals.append(np.ones(3 * mk))
        b_face.append(red)
    q = take(nc * nk).reshape(nc, nk)
    r = take(nc * nk).reshape(nc, nk)
    rows.append(2 * n_hyb + np.arange(2 * nc * nk))
    cols.append(np.concatenate([q.ravel(), r.ravel()]))
    vals.append(np.ones(2 * nc * nk))
    lam = take(2)
    rows.append(np.array([n_full - 2, n_full - 1])), cols.append(lam), vals.append(np.ones(2))
    n_red = counter
    P = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n_full, n_red))
    elim = np.hstack([u_cell, b_cell, q[:, 1:], r[:, 1:]])
    mask = np.ones(n_red, dtype=bool)
    mask[elim.ravel()] = False
    return DofLayout(k=k, n_cells=nc, n_faces=nf, n_k=nk, m_k=mk, n_hybrid=n_hyb,
                     n_full=n_full, n_reduced=n_red, P=P, u_cell=u_cell, u_face=u_face,
                     b_cell=b_cell, b_face=b_face, q=q, r=r, lam_q=int(lam[0]),
                     lam_r=int(lam[1]), elim=elim, retained=np.flatnonzero(mask))


@dataclass
class _CellGroup:
    """Cells with the same number of faces, with stacked local operators."""

    cells: np.ndarray
    gidx: np.ndarray  # (nc, 3, NS) full hybrid index of each scalar-component unknown
    a_s: np.ndarray
    theta: np.ndarray
    mkd: np.ndarray  # (nc, 3, nk, NS): mass @ D per direction
    mean0: np.ndarray
    norm1_s: np.ndarray


def _batched_convection(theta, vt):
    nk = vt.shape[-1]
    P = np.einsum("eajsb,eja->esb", theta, vt)
    N = np.zeros(P.shape[:2] + (P.shape[1],))
    N[:, :, :nk] += 0.5 * P
    N[:, :nk, :] -= 0.5 * P.transpose(0, 2, 1)
    return N


def _batched_dv(theta, w):
    nk = theta.shape[1]
    out = -0.5 * np.einsum("eajtb,eib->eitja", theta, w[:, :, :nk], optimize=True)
    out[:, :, :nk] += 0.5 * np.einsum("eajst,eis->eitja", theta, w, optimize=True)
    return out


class Discretization:
    """Mesh + degree + bases + all local operators + global layout."""

    def __init__(self, mesh: PolyMesh, k: int, workers: int = 1, cell_order=None):
        self.mesh = mesh
        self.k = k
        self.workers = workers
        self.bases = MeshBases(mesh, k)
        self.ops: list[LocalOps] = build_all_local_ops(self.bases, workers)
        self.layout = build_layout(mesh, k)
        self.n_k, self.m_k = self.bases.n_k, self.bases.m_k
        order = np.arange(mesh.n_cells) if cell_order is None else np.asarray(cell_order)
        self.groups = self._make_groups(order)
        self._load_cache = {}

    def _make_groups(self, order):
        mesh, nk, mk = self.mesh, self.n_k, self.m_k
        nc = mesh.n_cells
        by_nf = {}
        for t in order:
            by_nf.setdefault(len(mesh.cell_faces[t]), []).append(int(t))
        groups = []
        for nf in sorted(by_nf):
            cells = np.array(by_nf[nf])
            ops = [self.ops[t] for t in cells]
            ns = nk + nf * mk
            gidx = np.empty((len(cells), 3, ns), dtype=np.int64)
            for e, t in enumerate(cells):
                for i in range(3):
                    gidx[e, i, :nk] = t * 3 * nk + i * nk + np.arange(nk)
                    for j, f in enumerate(mesh.cell_faces[t]):
                        gidx[e, i, nk + j * mk: nk + (j + 1) * mk] = (
                            nc * 3 * nk + f * 3 * mk + i * mk + np.arange(mk))
            groups.append(_CellGroup(
                cells=cells, gidx=gidx,
                a_s=np.stack([o.a_s for o in ops]),
                theta=np.stack([o.theta for o in ops]),
                mkd=np.stack([np.einsum("ab,jbs->jas", o.mass, o.D) for o in ops]),
                mean0=np.array([o.mean[0] for o in ops]),
                norm1_s=np.stack([o.norm1_s for o in ops]),
            ))
        return groups

    # ------------------------------------------------------------------ loads
    def cell_moments(self, func) -> np.ndarray:
        """Moments (func_i, psi_a)_T for all cells, shape (n_cells, 3 * n_k)."""
        nc, nk = self.mesh.n_cells, self.n_k
        rules = [self.bases.mms_cell_rule(t) for t in range(nc)]
        pts = np.concatenate([r.points for r in rules])
        vals = np.asarray(func(pts), dtype=float)
        out = np.empty((nc, 3 * nk))
        start = 0
        for t, rule in enumerate(rules):
            n = len(rule.weights)
            phi = self.bases.cells[t].values(rule.points, nk) * rule.weights[:, None]
            out[t] = (phi.T @ vals[start:start + n]).T.ravel()
            start += n
        return out

    def l2_norm_sq(self, func) -> float:
        """||func||^2 over the mesh with the MMS quadrature."""
        total = 0.0
        for t in range(self.mesh.n_cells):
            rule = self.bases.mms_cell_rule(t)
            vals = np.asarray(func(rule.points), dtype=float).reshape(len(rule.weights), -1)
            total += rule.weights @ np.sum(vals ** 2, axis=1)
        return float(total)

    def loads(self, params: ModelParams) -> np.ndarray:
        """Full-numbering load vector: (f, v_T) and (g, w_T) on cell unknowns only."""
        key = (id(params.f), id(params.g))
        if key not in self._load_cache:
            lay = self.layout
            out = np.zeros(lay.n_full)
            ncell = self.mesh.n_cells * 3 * self.n_k
            if params.f is not None:
                out[:ncell] = self.cell_moments(params.f).ravel()
            if params.g is not None:
                out[lay.off_b:lay.off_b + ncell] = self.cell_moments(params.g).ravel()
            self._load_cache[key] = out
        return self._load_cache[key]

    # --------------------------------------------------------------- assembly
    def _split(self, full):
        lay = self.layout
        nh, nc, nk = lay.n_hybrid, lay.n_cells, lay.n_k
        return (full[:nh], full[nh:2 * nh], full[2 * nh:2 * nh + nc * nk].reshape(nc, nk),
                full[2 * nh + nc * nk:2 * nh + 2 * nc * nk].reshape(nc, nk), full[-2], full[-1])

    def residual_full(self, full: np.ndarray, params: ModelParams) -> np.ndarray:
        lay = self.layout
        nk = self.n_k
        U, B, Q, R, lq, lr = self._split(full)
        res = np.zeros(lay.n_full)
        for g in self.groups:
            u, b = U[g.gidx], B[g.gidx]
            q, r = Q[g.cells], R[g.cells]
            nu_ = _batched_convection(g.theta, u[:, :, :nk])
            nb_ = _batched_convection(g.theta, b[:, :, :nk])
            ru = (params.nu_k * np.einsum("est,eit->eis", g.a_s, u)
                  + np.einsum("est,eis->eit", nu_, u) - np.einsum("est,eis->eit", nb_, b)
                  - np.einsum("eias,ea->eis", g.mkd, q))
            rb = (params.nu_m * np.einsum("est,eit->eis", g.a_s, b)
                  + np.einsum("est,eis->eit", nu_, b) - np.einsum("est,eis->eit", nb_, u)
                  - np.einsum("eias,ea->eis", g.mkd, r))
            rq = np.einsum("eias,eis->ea", g.mkd, u)
            rr = np.einsum("eias,eis->ea", g.mkd, b)
            rq[:, 0] += lq * g.mean0
            rr[:, 0] += lr * g.mean0
            np.add.at(res, g.gidx.ravel(), ru.ravel())
            np.add.at(res, lay.off_b + g.gidx.ravel(), rb.ravel())
            res[lay.off_q + (g.cells[:, None] * nk + np.arange(nk)).ravel()] += rq.ravel()
            res[lay.off_r + (g.cells[:, None] * nk + np.arange(nk)).ravel()] += rr.ravel()
            res[-2] += g.mean0 @ q[:, 0]
            res[-1] += g.mean0 @ r[:, 0]
        return res - self.loads(params)

    def residual(self, x: np.ndarray, params: ModelParams) -> np.ndarray:
        lay = self.layout
        return lay.P.T @ self.residual_full(lay.P @ x, params)

    def jacobian_full(self, full: np.ndarray, params: ModelParams) -> sp.csr_matrix:
        lay = self.layout
        nk = self.n_k
        U, B, *_ = self._split(full)
        rows, cols, vals = [], [], []
        for g in self.groups:
            nc, _, ns = g.gidx.shape
            u, b = U[g.gidx], B[g.gidx]
            nu_ = _batched_convection(g.theta, u[:, :, :nk])
            nb_ = _batched_convection(g.theta, b[:, :, :nk])
            dv_u = _batched_dv(g.theta, u)
            dv_b = _batched_dv(g.theta, b)
            n3 = 3 * ns
            nloc = 2 * n3 + 2 * nk
            L = np.zeros((nc, nloc, nloc))
            blocks = {
                (0, 0): (params.nu_k * g.a_s + nu_.transpose(0, 2, 1), dv_u),
                (0, 1): (-nb_.transpose(0, 2, 1), -dv_b),
                (1, 0): (-nb_.transpose(0, 2, 1), dv_b),
                (1, 1): (params.nu_m * g.a_s + nu_.transpose(0, 2, 1), -dv_u),
            }
            for (bi, bj), (diag, dv) in blocks.items():
                blk = np.zeros((nc, 3, ns, 3, ns))
                for i in range(3):
                    blk[:, i, :, i, :] = diag
                blk[:, :, :, :, :nk] += dv
                L[:, bi * n3:(bi + 1) * n3, bj * n3:(bj + 1) * n3] = blk.reshape(nc, n3, n3)
            coup = -g.mkd.transpose(0, 1, 3, 2).reshape(nc, n3, nk)
            L[:, :n3, 2 * n3:2 * n3 + nk] = coup
            L[:, n3:2 * n3, 2 * n3 + nk:] = coup
            L[:, 2 * n3:2 * n3 + nk, :n3] = -coup.transpose(0, 2, 1)
            L[:, 2 * n3 + nk:, n3:2 * n3] = -coup.transpose(0, 2, 1)
            qi = lay.off_q + g.cells[:, None] * nk + np.arange(nk)
            gl = np.hstack([g.gidx.reshape(nc, -1), lay.off_b + g.gidx.reshape(nc, -1),
                            qi, qi + lay.n_cells * nk])
            rows.append(np.broadcast_to(gl[:, :, None], L.shape).ravel())
            cols.append(np.broadcast_to(gl[:, None, :], L.shape).ravel())
            vals.append(L.ravel())
            for off, lam in ((lay.off_q, lay.n_full - 2), (lay.off_r, lay.n_full - 1)):
                mean_rows = off + g.cells * nk
                rows += [mean_rows, np.full(nc, lam)]
                cols += [np.full(nc, lam), mean_rows]
                vals += [g.mean0, g.mean0]
        J = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(lay.n_full, lay.n_full))
        return J.tocsr()

    def jacobian(self, x: np.ndarray, params: ModelParams) -> sp.csr_matrix:
        P = self.layout.P
        return (P.T @ self.jacobian_full(P @ x, params) @ P).tocsr()

    # ----------------------------------------------------- global forms
    def _gather(self, field: HybridField):
        vec = field.to_vector()
        return [vec[g.gidx] for g in self.groups]

    def a_h(self, v: HybridField, w: HybridField) -> float:
        return float(sum(np.einsum("eis,est,eit->", vv, g.a_s, ww)
                         for g, vv, ww in zip(self.groups, self._gather(v), self._gather(w))))

    def norm1_sq(self, v: HybridField) -> float:
        return float(sum(np.einsum("eis,est,eit->", vv, g.norm1_s, vv)
                         for g, vv in zip(self.groups, self._gather(v))))

    def t_h(self, v: HybridField, w: HybridField, z: HybridField) -> float:
        total = 0.0
        for g, vv, ww, zz in zip(self.groups, self._gather(v), self._gather(w), self._gather(z)):
            N = _batched_convection(g.theta, vv[:, :, :self.n_k])
            total += np.einsum("eis,est,eit->", ww, N, zz)
        return float(total)

    def d_h(self, v: HybridField, q: CellScalarField) -> float:
        total = 0.0
        for g, vv in zip(self.groups, self._gather(v)):
            total -= np.einsum("eias,eis,ea->", g.mkd, vv, q.coeffs[g.cells])
        return float(total)

    def divergence(self, v: HybridField) -> np.ndarray:
        """Coefficients of D_T v_T for every cell, shape (n_cells, n_k)."""
        out = np.empty((self.mesh.n_cells, self.n_k))
        for g, vv in zip(self.groups, self._gather(v)):
            mass = np.stack([self.ops[t].mass for t in g.cells])
            out[g.cells] = np.linalg.solve(mass, np.einsum("eias,eis->ea", g.mkd, vv)[..., None])[..., 0]
        return out


def A_h(disc: Discretization, x: SystemState, y: SystemState, params: ModelParams) -> float:
    return (params.nu_k * disc.a_h(x.u, y.u) + params.nu_m * disc.a_h(x.b, y.b)
            + disc.d_h(y.u, x.q) + disc.d_h(y.b, x.r) - disc.d_h(x.u, y.q) - disc.d_h(x.b, y.r))


def T_h(disc: Discretization, x: SystemState, y: SystemState, z: SystemState) -> float:
    return (disc.t_h(x.u, y.u, z.u) - disc.t_h(x.b, y.b, z.u)
            + disc.t_h(x.u, y.b, z.b) - disc.t_h(x.b, y.u, z.b))


def apriori_constant(disc: Discretization, state: SystemState, params: ModelParams) -> float:
    """Smallest C with (nu_k|u|_1^2 + nu_m|b|_1^2)^(1/2) <= C max(nu)^(-1/2) (|f|^2 + |g|^2)^(1/2)."""
    lhs = np.sqrt(params.nu_k * disc.norm1_sq(state.u) + params.nu_m * disc.norm1_sq(state.b))
    src = sum(disc.l2_norm_sq(fn) for fn in (params.f, params.g) if fn is not None)
    if src <= 0.0:
        return 0.0
    return float(lhs * np.sqrt(max(params.nu_k, params.nu_m)) / np.sqrt(src))


def energy_balance(disc: Discretization, state: SystemState, params: ModelParams):
    """Both sides of nu_k a_h(u,u) + nu_m a_h(b,b) = (f, u_h) + (g, b_h)."""
    lhs = params.nu_k * disc.a_h(state.u, state.u) + params.nu_m * disc.a_h(state.b, state.b)
    full = np.concatenate([state.u.to_vector(), state.b.to_vector()])
    rhs = float(disc.loads(params)[:full.size] @ full)
    return float(lhs), rhs


def _as_vector(state, disc: Discretization) -> np.ndarray:
    if isinstance(state, SystemState):
        return disc.layout.state_to_vector(state)
    return np.asarray(state, dtype=float)


def assemble_residual(state, params: ModelParams, disc: Discretization) -> np.ndarray:
    """G(U) = A_h(U, .) + T_h(U, U, .) - F_h(.) in the reduced numbering."""
    return disc.residual(_as_vector(state, disc), params)


def assemble_jacobian(state, params: ModelParams, disc: Discretization) -> sp.csr_matrix:
    return disc.jacobian(_as_vector(state, disc), params)


@dataclass
class CondensationRecord:
    eliminated: np.ndarray
    retained: np.ndarray
    block_inverse: sp.csr_matrix
    J_er: sp.csr_matrix
    g_e: np.ndarray
    size: int


def static_condense(J: sp.spmatrix, g: np.ndarray, layout: DofLayout):
    """Eliminate cell-interior unknowns of ``J x = g``; returns (S, rhs, record)."""
    J = sp.csr_matrix(J)
    elim = layout.elim
    nc, ne = elim.shape
    E = elim.ravel()
    Rr = layout.retained
    J_e = J[E]
    jee = J_e[:, E].tocoo()
    rb = jee.row // ne
    if np.any(rb != jee.col // ne):
        raise AssemblyError("eliminated unknowns of different cells are coupled")
    blocks = np.zeros((nc, ne, ne))
    np.add.at(blocks, (rb, jee.row % ne, jee.col % ne), jee.data)
    svals = np.linalg.svd(blocks, compute_uv=False)
    bad = np.flatnonzero(svals[:, -1] <= 1e-13 * svals[:, 0])
    if len(bad):
        raise CondensationError(int(bad[0]))
    inv = np.linalg.inv(blocks)
    block_inv = sp.bsr_matrix((inv, np.arange(nc), np.arange(nc + 1)),
                              shape=(nc * ne, nc * ne)).tocsr()
    J_er = J_e[:, Rr]
    J_r = J[Rr]
    J_re = J_r[:, E]
    S = (J_r[:, Rr] - J_re @ (block_inv @ J_er)).tocsc()
    g_e = g[E]
    rhs = g[Rr] - J_re @ (block_inv @ g_e)
    return S, rhs, CondensationRecord(E, Rr, block_inv, J_er, g_e, J.shape[0])


def recover_interior(record: CondensationRecord, x_retained: np.ndarray) -> np.ndarray:
    x = np.zeros(record.size)
    x[record.retained] = x_retained
    x[record.eliminated] = record.block_inverse @ (record.g_e - record.J_er @ x_retained)
    return x


def infsup_probe(disc: Discretization) -> float:
    """Smallest inf-sup constant of d_h on U_{h,0} x P^k_0 (dense; small meshes only).

    Velocity measured in the H1-like seminorm, pressure in L2.
    """
    lay = disc.layout
    nk = disc.n_k
    nc = disc.mesh.n_cells
    vel = np.concatenate([lay.u_cell.ravel(), lay.u_face[lay.u_face >= 0]])
    vel_full = (lay.P[:lay.n_hybrid][:, vel]).toarray()  # full hybrid <- velocity reduced
    n1 = np.zeros((lay.n_hybrid, lay.n_hybrid))
    Bm = np.zeros((nc * nk, lay.n_hybrid))
    for g in disc.groups:
        for e, t in enumerate(g.cells):
            for i in range(3):
                ix = g.gidx[e, i]
                n1[np.ix_(ix, ix)] += g.norm1_s[e]
                # d_h(v, q) = -(D v, q)
                Bm[np.ix_(t * nk + np.arange(nk), ix)] -= g.mkd[e, i]
    N = vel_full.T @ n1 @ vel_full
    Bv = Bm @ vel_full
    X = sla.solve(N, Bv.T, assume_a="pos")
    S = Bv @ X
    const = np.zeros(nc * nk)
    const[::nk] = np.sqrt(disc.mesh.cell_volume)
    const /= np.linalg.norm(const)
    Z = sla.null_space(const[None, :])
    ev = sla.eigvalsh(Z.T @ S @ Z)
    return float(np.sqrt(max(ev[0], 0.0)))
