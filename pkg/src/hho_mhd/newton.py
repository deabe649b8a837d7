"""Plain Newton iteration on the statically condensed system."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import reverse_cuthill_mckee

from .assembly import (Discretization, ModelParams, SystemState, recover_interior,
                       static_condense)
from .errors import NonConvergenceError, SolverError
from .mesh import PolyMesh


@dataclass
class NewtonConfig:
    tol: float = 1e-6
    abs_floor: float = 1e-13
    max_iter: int = 25
    initial: np.ndarray | None = None

    def __post_init__(self):
        if not 0.0 < self.tol < 1.0:
            raise ValueError("tolerance must lie in (0, 1)")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


@dataclass
class SolveReport:
    iterations: int
    history: list
    factorization: list = field(default_factory=list)
    wall_time: float = 0.0
    n_retained: int = 0
    n_reduced: int = 0

    @property
    def relative_residual(self) -> float:
        return self.history[-1] / self.history[0] if self.history[0] > 0 else 0.0


def fill_reducing_order(S: sp.spmatrix) -> np.ndarray:
    """Reverse Cuthill-McKee on the symmetrized pattern, multipliers kept last.

    The two multiplier rows are dense and would otherwise dominate the band.
    The pattern of the condensed matrix does not change between Newton steps,
    so the ordering is computed once per discretization.
    """
    n = S.shape[0]
    core = sp.csr_matrix(S[:n - 2][:, :n - 2])
    core.data = np.abs(core.data)
    perm = reverse_cuthill_mckee(sp.csr_matrix(core + core.T), symmetric_mode=True)
    return np.concatenate([perm, [n - 2, n - 1]]).astype(np.int64)


def newton_step(disc: Discretization, x: np.ndarray, params: ModelParams,
                G: np.ndarray | None = None, order: np.ndarray | None = None):
    """Solve DG(x) delta = -G(x) by static condensation; returns (delta, stats, order)."""
    if G is None:
        G = disc.residual(x, params)
    J = disc.jacobian(x, params)
    S, rhs, rec = static_condense(J, -G, disc.layout)
    # At the zero state the convective blocks vanish numerically and sparse
    # products drop them, so the pattern is only complete once x != 0.
    if order is None and np.any(x):
        order = fill_reducing_order(S)
    try:
        if order is None:
            lu = spla.splu(S)
            xr = lu.solve(rhs)
        else:
            lu = spla.splu(sp.csc_matrix(S[order][:, order]), permc_spec="NATURAL")
            xr = np.empty_like(rhs)
            xr[order] = lu.solve(rhs[order])
    except RuntimeError as exc:
        raise SolverError(f"singular condensed matrix: {exc}") from exc
    if not np.all(np.isfinite(xr)):
        raise SolverError("non-finite condensed solution")
    stats = {"n": S.shape[0], "nnz": S.nnz, "nnz_lu": lu.L.nnz + lu.U.nnz}
    return recover_interior(rec, xr), stats, order


def solve_discretization(disc: Discretization, params: ModelParams,
                         config: NewtonConfig | None = None):
    """Newton iteration from ``config.initial`` (zero by default).

    ``history[n]`` is the l2 norm of G(U^(n)); at least one correction is
    always applied, so an exact initial root reports one iteration.
    Returns (state, report, reduced vector).
    """
    config = config or NewtonConfig()
    start = time.perf_counter()
    lay = disc.layout
    x = np.zeros(lay.n_reduced) if config.initial is None else np.array(config.initial, float)
    G = disc.residual(x, params)
    history = [float(np.linalg.norm(G))]
    facts = []
    order = None
    for it in range(1, config.max_iter + 1):
        delta, stats, order = newton_step(disc, x, params, G, order)
        facts.append(stats)
        x = x + delta
        G = disc.residual(x, params)
        history.append(float(np.linalg.norm(G)))
        if history[-1] <= config.tol * history[0] or history[-1] <= config.abs_floor:
            break
    else:
        raise NonConvergenceError(history)
    report = SolveReport(iterations=it, history=history, factorization=facts,
                         wall_time=time.perf_counter() - start,
                         n_retained=len(lay.retained), n_reduced=lay.n_reduced)
    return lay.vector_to_state(x, disc.mesh), report, x


def solve(mesh: PolyMesh, k: int, params: ModelParams, config: NewtonConfig | None = None,
          workers: int = 1):
    """Build the discretization and run Newton; returns (SystemState, SolveReport)."""
    disc = Discretization(mesh, k, workers=workers)
    state, report, _ = solve_discretization(disc, params, config)
    return state, report
