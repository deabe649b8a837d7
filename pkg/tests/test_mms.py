import itertools

import numpy as np
import pytest
import sympy as sy

from hho_mhd.assembly import Discretization, SystemState
from hho_mhd.basis import HybridField, interpolate
from hho_mhd.errors import DegenerateProblemError
from hho_mhd.mesh import build_cube_tet_mesh
from hho_mhd.mms import (ErrorReport, ExactSolution, compute_errors, convergence_rates, exact_sources,
                         mms_params, norm0h_sq, project_scalar, recover_fluid_pressure)
from hho_mhd.newton import NewtonConfig, solve_discretization
from hho_mhd.quadrature import cell_rule, face_rule

SOL = ExactSolution()


def sympy_fields():
    x = sy.symbols("x1:4")
    s = lambda v: sy.sin(sy.pi * v)
    c = lambda v: sy.cos(sy.pi * v)
    u = [s(x[0]) ** 2 * s(x[1]) * s(x[2]) * s(x[1] - x[2]),
         s(x[0]) * s(x[1]) ** 2 * s(x[2]) * s(x[2] - x[0]),
         s(x[0]) * s(x[1]) * s(x[2]) ** 2 * s(x[0] - x[1])]
    b = [-s(x[0]) * c(x[1]) * c(x[2]) / 2, c(x[0]) * s(x[1]) * c(x[2]),
         -c(x[0]) * c(x[1]) * s(x[2]) / 2]
    q = sy.sin(2 * sy.pi * x[0]) * sy.sin(2 * sy.pi * x[1]) * sy.sin(2 * sy.pi * x[2])
    return x, u, b, q


@pytest.fixture(scope="module")
def sym():
    x, u, b, q = sympy_fields()
    lam = lambda e: sy.lambdify([x], e, "numpy")
    grad = lambda v: [[lam(sy.diff(vi, xj)) for xj in x] for vi in v]
    lap = lambda v: [lam(sum(sy.diff(vi, xj, 2) for xj in x)) for vi in v]
    return {"u": [lam(e) for e in u], "b": [lam(e) for e in b], "gu": grad(u), "gb": grad(b),
            "lu": lap(u), "lb": lap(b), "gq": [lam(sy.diff(q, xj)) for xj in x],
            "divu": lam(sum(sy.diff(u[i], x[i]) for i in range(3))),
            "divb": lam(sum(sy.diff(b[i], x[i]) for i in range(3)))}


def sample(rng, n=1000):
    return rng.uniform(0, 1, size=(n, 3))


def test_closed_forms_match_sympy(rng, sym):
    pts = sample(rng, 200)
    cols = pts.T
    ev = lambda fs: np.stack([np.broadcast_to(f(cols), len(pts)) for f in fs], axis=1)
    assert np.allclose(SOL.u(pts), ev(sym["u"]), atol=1e-13)
    assert np.allclose(SOL.b(pts), ev(sym["b"]), atol=1e-13)
    for name, key in (("grad_u", "gu"), ("grad_b", "gb")):
        ref = np.stack([ev(row) for row in sym[key]], axis=1)
        assert np.allclose(getattr(SOL, name)(pts), ref, atol=1e-12)
    assert np.allclose(SOL.lap_u(pts), ev(sym["lu"]), atol=1e-11)
    assert np.allclose(SOL.lap_b(pts), ev(sym["lb"]), atol=1e-11)
    assert np.allclose(SOL.grad_q(pts), ev(sym["gq"]), atol=1e-12)


def test_symbolic_divergence_free():
    x, u, b, _ = sympy_fields()
    for v in (u, b):
        div = sum(sy.diff(v[i], x[i]) for i in range(3))
        assert sy.simplify(sy.expand_trig(div)) == 0


def test_sampled_divergence_free(rng):
    pts = sample(rng)
    assert np.abs(np.einsum("nii->n", SOL.grad_u(pts))).max() <= 1e-12
    assert np.abs(np.einsum("nii->n", SOL.grad_b(pts))).max() <= 1e-12


def test_boundary_conditions(rng):
    for axis, side in itertools.product(range(3), (0.0, 1.0)):
        pts = sample(rng, 200)
        pts[:, axis] = side
        assert np.abs(SOL.u(pts)).max() <= 1e-12
        assert np.abs(SOL.b(pts)[:, axis]).max() <= 1e-12


def test_pressure_zero_mean():
    mesh = build_cube_tet_mesh(4)
    rules = [cell_rule(mesh, t, 14) for t in range(mesh.n_cells)]
    assert abs(sum(r.integrate(SOL.q(r.points)) for r in rules)) < 1e-10


def test_sources_vanish_at_corners():
    f, g = exact_sources(mms_params())
    corners = np.array(list(itertools.product((0.0, 1.0), repeat=3)))
    assert np.abs(f(corners)).max() <= 1e-12
    assert np.abs(g(corners)).max() <= 1e-12


def fd_grad(func, x, h=1e-3):
    # sixth-order central differences
    coef = [(1, 45 / 60), (2, -9 / 60), (3, 1 / 60)]
    cols = []
    for j in range(3):
        e = np.zeros(3)
        e[j] = h
        cols.append(sum(c * (func(x + m * e) - func(x - m * e)) for m, c in coef) / h)
    return np.stack(cols, axis=-1)


def fd_lap(func, x, h=1e-3):
    coef = [(0, -49 / 18), (1, 3 / 2), (2, -3 / 20), (3, 1 / 90)]
    total = 0.0
    for j in range(3):
        e = np.zeros(3)
        e[j] = h
        total = total + sum(c * (func(x + m * e) + func(x - m * e)) * (0.5 if m == 0 else 1.0)
                            for m, c in coef) / h ** 2
    return total


def test_f_matches_fd_oracle():
    params = mms_params()
    f, g = exact_sources(params)
    x = np.array([[0.3, 0.4, 0.5]])
    gu, gb = fd_grad(SOL.u, x)[0], fd_grad(SOL.b, x)[0]
    u, b = SOL.u(x)[0], SOL.b(x)[0]
    gq = fd_grad(SOL.q, x)[0]
    f_fd = -params.nu_k * fd_lap(SOL.u, x)[0] + gu @ u - gb @ b + gq
    g_fd = -params.nu_m * fd_lap(SOL.b, x)[0] + gb @ u - gu @ b
    assert np.abs(f(x)[0] - f_fd).max() <= 1e-7
    assert np.abs(g(x)[0] - g_fd).max() <= 1e-7


def test_g_divergence_free_fd(rng):
    _, g = exact_sources(mms_params())
    pts = rng.uniform(0.1, 0.9, size=(20, 3))
    div = np.einsum("nii->n", fd_grad(g, pts))
    assert np.abs(div).max() <= 1e-7


def test_sources_scale_with_viscosity(rng):
    pts = sample(rng, 50)
    f1, _ = exact_sources(mms_params(0.1, 0.1))
    f2, _ = exact_sources(mms_params(0.2, 0.1))
    assert np.allclose(f2(pts) - f1(pts), -0.1 * SOL.lap_u(pts), atol=1e-12)


@pytest.fixture(scope="module")
def disc2():
    return Discretization(build_cube_tet_mesh(2), 0)


def interpolant_state(disc):
    st = SystemState.zeros(disc.mesh, disc.k)
    st.u = interpolate(SOL.u, disc.mesh, disc.k, disc.bases)
    st.b = interpolate(SOL.b, disc.mesh, disc.k, disc.bases)
    st.q.coeffs[:] = project_scalar(SOL.q, disc)
    return st


def test_interpolant_has_zero_error(disc2):
    rep = compute_errors(interpolant_state(disc2), disc2, mms_params())
    assert rep.E_a_u == 0.0 and rep.E_0_u == 0.0
    assert rep.E_a_b == 0.0 and rep.E_0_b == 0.0
    assert rep.E_q == 0.0


def test_zero_reference_is_degenerate(disc2):
    class Zero(ExactSolution):
        def u(self, x):
            return np.zeros((len(x), 3))
    with pytest.raises(DegenerateProblemError):
        compute_errors(SystemState.zeros(disc2.mesh, 0), disc2, mms_params(), Zero())


def test_pressure_recovery_without_field(disc2, rng):
    st = SystemState.zeros(disc2.mesh, 0)
    st.q.coeffs[:] = rng.normal(size=st.q.coeffs.shape)
    for rho in (1.0, 2.5):
        vals, _ = recover_fluid_pressure(st, disc2, rho)
        for t, v in enumerate(vals):
            # k = 0: q_h is the constant q_0 / sqrt(|T|)
            assert np.allclose(v, rho * st.q.coeffs[t, 0] / np.sqrt(disc2.mesh.cell_volume[t]))
    st.b = interpolate(SOL.b, disc2.mesh, 0, disc2.bases)
    vals, _ = recover_fluid_pressure(st, disc2, 0.0)
    assert all(not np.any(v) for v in vals)


@pytest.fixture(scope="module")
def solved2(disc2):
    params = mms_params()
    state, _, _ = solve_discretization(disc2, params, NewtonConfig())
    return state, params


def oracle_errors(disc, state, params):
    """Duplicate error evaluation from point values on an independent quadrature."""
    mesh, k, bases = disc.mesh, disc.k, disc.bases
    nk, mk = disc.n_k, disc.m_k
    deg = 12

    def cell_vals(coeffs, t, pts, n):
        return bases.cells[t].values(pts, n) @ coeffs.reshape(3, n).T

    def energy(field):
        total = 0.0
        for t in range(mesh.n_cells):
            ops = disc.ops[t]
            v = field.local(mesh, t)
            rv = (ops.r @ v).reshape(3, -1)
            rule = cell_rule(mesh, t, deg)
            grad_r = np.einsum("qad,ia->qid", bases.cells[t].gradients(rule.points, ops.n_k1), rv)
            dv = v[:3 * nk].reshape(3, nk) - rv[:, :nk]
            grad_d = np.einsum("qad,ia->qid", bases.cells[t].gradients(rule.points, nk), dv)
            total += rule.integrate(np.sum(grad_r ** 2 + grad_d ** 2, axis=(1, 2)))
            for j, f in enumerate(mesh.cell_faces[t]):
                fr = face_rule(mesh, f, deg)
                xf = bases.faces[f].values(fr.points, mk)
                trace = bases.cells[t].values(fr.points, ops.n_k1) @ rv.T
                gram = xf.T @ (xf * fr.weights[:, None])
                proj = np.linalg.solve(gram, (xf * fr.weights[:, None]).T @ trace)
                vf = v[3 * nk + 3 * j * mk: 3 * nk + 3 * (j + 1) * mk].reshape(3, mk).T
                diff = xf @ (vf - proj)
                total += fr.integrate(np.sum(diff ** 2, axis=1)) / mesh.cell_diameter[t]
        return total

    def norm0(field):
        total = 0.0
        for t in range(mesh.n_cells):
            rule = cell_rule(mesh, t, deg)
            total += rule.integrate(np.sum(cell_vals(field.cell[t], t, rule.points, nk) ** 2, axis=1))
            for f in mesh.cell_faces[t]:
                fr = face_rule(mesh, f, deg)
                vals = bases.faces[f].values(fr.points, mk) @ field.face[f].reshape(3, mk).T
                total += mesh.cell_diameter[t] * fr.integrate(np.sum(vals ** 2, axis=1))
        return total

    Iu = interpolate(SOL.u, mesh, k, bases)
    Ib = interpolate(SOL.b, mesh, k, bases)
    eu, eb = state.u - Iu, state.b - Ib
    num_q = den_q = num_p = den_p = 0.0
    for t in range(mesh.n_cells):
        rule = cell_rule(mesh, t, 14)
        psi = bases.cells[t].values(rule.points, nk)
        gram = psi.T @ (psi * rule.weights[:, None])
        pq = psi @ np.linalg.solve(gram, psi.T @ (rule.weights * SOL.q(rule.points)))
        qh = psi @ state.q.coeffs[t]
        num_q += rule.integrate((qh - pq) ** 2)
        den_q += rule.integrate(pq ** 2)
        bh = cell_vals(state.b.cell[t], t, rule.points, nk)
        ph = params.rho * (qh - 0.5 * np.sum(bh ** 2, axis=1))
        p = SOL.p(rule.points, params.rho)
        num_p += rule.integrate((ph - p) ** 2)
        den_p += rule.integrate(p ** 2)
    return {"E_a_u": np.sqrt(params.nu_k * energy(eu) / energy(Iu)),
            "E_a_b": np.sqrt(params.nu_m * energy(eb) / energy(Ib)),
            "E_q": np.sqrt(num_q / den_q), "E_p": np.sqrt(num_p / den_p),
            "E_0_u": np.sqrt(norm0(eu) / norm0(Iu)), "E_0_b": np.sqrt(norm0(eb) / norm0(Ib))}


def test_errors_match_duplicate_quadrature(disc2, solved2):
    state, params = solved2
    rep = compute_errors(state, disc2, params).as_dict()
    ref = oracle_errors(disc2, state, params)
    for name in rep:
        assert rep[name] == pytest.approx(ref[name], rel=1e-10), name
        assert rep[name] > 0


def test_norm0h_monotone_under_zeroing(disc2, rng):
    v = HybridField(0, rng.normal(size=(disc2.mesh.n_cells, 3)), rng.normal(size=(disc2.mesh.n_faces, 3)))
    full = norm0h_sq(disc2, v)
    for cells, faces in ((True, False), (False, True)):
        w = HybridField(0, v.cell * (not cells), v.face * (not faces))
        assert norm0h_sq(disc2, w) <= full
    w = HybridField(0, v.cell.copy(), v.face.copy())
    w.face[7] = 0.0
    assert norm0h_sq(disc2, w) <= full


def test_interpolation_error_rates():
    # solver-independent anchor: || grad(r_T I u - u) ||_T decays like h^{k+1}
    for k in (0, 1):
        errs, hs = [], []
        for n in (2, 4):
            disc = Discretization(build_cube_tet_mesh(n), k)
            Iu = interpolate(SOL.u, disc.mesh, k, disc.bases)
            total = 0.0
            for t in range(disc.mesh.n_cells):
                ops = disc.ops[t]
                rv = (ops.r @ Iu.local(disc.mesh, t)).reshape(3, -1)
                rule = disc.bases.mms_cell_rule(t)
                g = np.einsum("qad,ia->qid", disc.bases.cells[t].gradients(rule.points, ops.n_k1), rv)
                total += rule.integrate(np.sum((g - SOL.grad_u(rule.points)) ** 2, axis=(1, 2)))
            errs.append(np.sqrt(total))
            hs.append(disc.mesh.h)
        rate = np.log(errs[0] / errs[1]) / np.log(hs[0] / hs[1])
        assert rate >= k + 1 - 0.3


def test_convergence_rates_formula():
    a = ErrorReport(0.5, 1, 0.4, 0.4, 0.4, 0.4, 0.4, 0.4)
    b = ErrorReport(0.25, 1, 0.1, 0.2, 0.4, 0.05, 0.1, 0.1)
    (row,) = convergence_rates([a, b])
    assert row["E_a_u"] == pytest.approx(2.0)
    assert row["E_a_b"] == pytest.approx(1.0)
    assert row["E_q"] == pytest.approx(0.0)
    assert row["E_p"] == pytest.approx(3.0)
