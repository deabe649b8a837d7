"""Manufactured solution on the unit cube, its sources, and discrete error measures.

All fields take points of shape (n, 3). Vector gradients are returned as
(n, 3, 3) arrays with entry [i, j] = d_j v_i.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .assembly import Discretization, ModelParams, SystemState
from .basis import HybridField, interpolate, l2_project_cell
from .errors import DegenerateProblemError

PI = np.pi


def _cyclic_field(x, a, b, c):
    """F = sin(pi xa)^2 sin(pi xb) sin(pi xc) sin(pi (xb - xc)) with derivatives.

    Returns (value, gradient wrt (xa, xb, xc), Laplacian).
    """
    sa, sb, sc = np.sin(PI * x[:, a]), np.sin(PI * x[:, b]), np.sin(PI * x[:, c])
    ca, cb, cc = np.cos(PI * x[:, a]), np.cos(PI * x[:, b]), np.cos(PI * x[:, c])
    d = np.sin(PI * (x[:, b] - x[:, c]))
    e = np.cos(PI * (x[:, b] - x[:, c]))
    val = sa ** 2 * sb * sc * d
    ga = 2 * PI * sa * ca * sb * sc * d
    gb = sa ** 2 * sc * PI * (cb * d + sb * e)
    gc = sa ** 2 * sb * PI * (cc * d - sc * e)
    laa = 2 * PI ** 2 * np.cos(2 * PI * x[:, a]) * sb * sc * d
    lbb = 2 * PI ** 2 * sa ** 2 * sc * (cb * e - sb * d)
    lcc = -2 * PI ** 2 * sa ** 2 * sb * (sc * d + cc * e)
    return val, (ga, gb, gc), laa + lbb + lcc


class ExactSolution:
    """The trigonometric MHD solution: u vanishes on the boundary, b.n = 0, r = 0."""

    def u(self, x):
        return np.stack([_cyclic_field(x, i, (i + 1) % 3, (i + 2) % 3)[0] for i in range(3)], axis=1)

    def grad_u(self, x):
        out = np.empty((len(x), 3, 3))
        for i in range(3):
            idx = (i, (i + 1) % 3, (i + 2) % 3)
            _, g, _ = _cyclic_field(x, *idx)
            for pos, j in enumerate(idx):
                out[:, i, j] = g[pos]
        return out

    def lap_u(self, x):
        return np.stack([_cyclic_field(x, i, (i + 1) % 3, (i + 2) % 3)[2] for i in range(3)], axis=1)

    def b(self, x):
        s, c = np.sin(PI * x), np.cos(PI * x)
        return np.stack([-0.5 * s[:, 0] * c[:, 1] * c[:, 2],
                         c[:, 0] * s[:, 1] * c[:, 2],
                         -0.5 * c[:, 0] * c[:, 1] * s[:, 2]], axis=1)

    def grad_b(self, x):
        s, c = np.sin(PI * x), np.cos(PI * x)
        out = np.empty((len(x), 3, 3))
        out[:, 0] = -0.5 * PI * np.stack([c[:, 0] * c[:, 1] * c[:, 2], -s[:, 0] * s[:, 1] * c[:, 2],
                                          -s[:, 0] * c[:, 1] * s[:, 2]], axis=1)
        out[:, 1] = PI * np.stack([-s[:, 0] * s[:, 1] * c[:, 2], c[:, 0] * c[:, 1] * c[:, 2],
                                   -c[:, 0] * s[:, 1] * s[:, 2]], axis=1)
        out[:, 2] = -0.5 * PI * np.stack([-s[:, 0] * c[:, 1] * s[:, 2], -c[:, 0] * s[:, 1] * s[:, 2],
                                          c[:, 0] * c[:, 1] * c[:, 2]], axis=1)
        return out

    def lap_b(self, x):
        # every component is a product of sines/cosines of pi x_j
        return -3 * PI ** 2 * self.b(x)

    def q(self, x):
        return np.prod(np.sin(2 * PI * x), axis=1)

    def grad_q(self, x):
        s, c = np.sin(2 * PI * x), np.cos(2 * PI * x)
        return 2 * PI * np.stack([c[:, 0] * s[:, 1] * s[:, 2], s[:, 0] * c[:, 1] * s[:, 2],
                                  s[:, 0] * s[:, 1] * c[:, 2]], axis=1)

    def r(self, x):
        return np.zeros(len(x))

    def grad_r(self, x):
        return np.zeros((len(x), 3))

    def p(self, x, rho: float = 1.0):
        """Fluid pressure rho q - rho |b|^2 / 2."""
        b = self.b(x)
        return rho * self.q(x) - 0.5 * rho * np.einsum("ni,ni->n", b, b)


def _advect(v, grad_w):
    """(v . grad) w pointwise."""
    return np.einsum("nij,nj->ni", grad_w, v)


def exact_sources(params: ModelParams, sol: ExactSolution | None = None):
    """Closed-form (f, g) for the exact solution with the given viscosities."""
    sol = sol or ExactSolution()

    def f(x):
        u, b = sol.u(x), sol.b(x)
        return (-params.nu_k * sol.lap_u(x) + _advect(u, sol.grad_u(x))
                - _advect(b, sol.grad_b(x)) + sol.grad_q(x))

    def g(x):
        u, b = sol.u(x), sol.b(x)
        return (-params.nu_m * sol.lap_b(x) + _advect(u, sol.grad_b(x))
                - _advect(b, sol.grad_u(x)) + sol.grad_r(x))

    return f, g


def mms_params(nu_k: float = 0.1, nu_m: float = 0.1, rho: float = 1.0) -> ModelParams:
    params = ModelParams(nu_k=nu_k, nu_m=nu_m, rho=rho)
    params.f, params.g = exact_sources(params)
    return params


@dataclass
class ErrorReport:
    h: float
    n_cells: int
    E_a_u: float
    E_a_b: float
    E_q: float
    E_p: float
    E_0_u: float
    E_0_b: float
    dofs: dict = field(default_factory=dict)

    NAMES = ("E_a_u", "E_a_b", "E_q", "E_p", "E_0_u", "E_0_b")

    def as_dict(self) -> dict:
        return {name: getattr(self, name) for name in self.NAMES}


def norm0h_sq(disc: Discretization, v: HybridField) -> float:
    """sum_T ||v_T||^2_T + h_T ||v_F||^2_dT with orthonormal bases."""
    mesh = disc.mesh
    total = float(np.sum(v.cell ** 2))
    face_sq = np.sum(v.face ** 2, axis=1)
    for t in range(mesh.n_cells):
        total += mesh.cell_diameter[t] * face_sq[mesh.cell_faces[t]].sum()
    return total


def _relative(num_sq: float, den_sq: float, what: str) -> float:
    if den_sq <= 0.0:
        raise DegenerateProblemError(f"zero reference norm for {what}")
    return float(np.sqrt(max(num_sq, 0.0) / den_sq))


def project_scalar(func, disc: Discretization) -> np.ndarray:
    return np.stack([l2_project_cell(func, disc.bases, t) for t in range(disc.mesh.n_cells)])


def recover_fluid_pressure(state: SystemState, disc: Discretization, rho: float = 1.0,
                           sol: ExactSolution | None = None):
    """Pointwise p_h = rho q_h - rho |b_T|^2 / 2 on each cell's MMS nodes.

    Returns (list of p_h arrays per cell, E_p).
    """
    sol = sol or ExactSolution()
    bases, nk = disc.bases, disc.n_k
    values, num, den = [], 0.0, 0.0
    for t in range(disc.mesh.n_cells):
        rule = bases.mms_cell_rule(t)
        psi = bases.cells[t].values(rule.points, nk)
        qh = psi @ state.q.coeffs[t]
        bh = psi @ state.b.cell[t].reshape(3, nk).T
        ph = rho * qh - 0.5 * rho * np.einsum("ni,ni->n", bh, bh)
        p = sol.p(rule.points, rho)
        values.append(ph)
        num += rule.weights @ (ph - p) ** 2
        den += rule.weights @ p ** 2
    if den <= 0.0:
        return values, 0.0 if num <= 0.0 else float("inf")
    return values, float(np.sqrt(num / den))


def compute_errors(state: SystemState, disc: Discretization, params: ModelParams,
                   sol: ExactSolution | None = None) -> ErrorReport:
    sol = sol or ExactSolution()
    mesh, k = disc.mesh, disc.k
    Iu = interpolate(sol.u, mesh, k, disc.bases)
    Ib = interpolate(sol.b, mesh, k, disc.bases)
    eu, eb = state.u - Iu, state.b - Ib
    pq = project_scalar(sol.q, disc)
    _, E_p = recover_fluid_pressure(state, disc, params.rho, sol)
    return ErrorReport(
        h=mesh.h, n_cells=mesh.n_cells,
        E_a_u=_relative(params.nu_k * disc.a_h(eu, eu), disc.a_h(Iu, Iu), "a_h(Iu, Iu)"),
        E_a_b=_relative(params.nu_m * disc.a_h(eb, eb), disc.a_h(Ib, Ib), "a_h(Ib, Ib)"),
        E_q=_relative(float(np.sum((state.q.coeffs - pq) ** 2)), float(np.sum(pq ** 2)), "pi q"),
        E_p=E_p,
        E_0_u=_relative(norm0h_sq(disc, eu), norm0h_sq(disc, Iu), "Iu"),
        E_0_b=_relative(norm0h_sq(disc, eb), norm0h_sq(disc, Ib), "Ib"),
        dofs=dict(disc.layout.counts()),
    )


def convergence_rates(reports: list) -> list:
    """Empirical rates log(E_i/E_{i+1}) / log(h_i/h_{i+1}) for consecutive pairs."""
    rates = []
    for a, b in zip(reports[:-1], reports[1:]):
        lh = np.log(a.h / b.h)
        row = {"h_coarse": a.h, "h_fine": b.h}
        for name in ErrorReport.NAMES:
            ea, eb = getattr(a, name), getattr(b, name)
            row[name] = float(np.log(ea / eb) / lh) if ea > 0 and eb > 0 else float("nan")
        rates.append(row)
    return rates
