import numpy as np
import pytest

from hho_mhd.mesh import (hexahedron_cell, reference_tetrahedron, tetrahedron_cell,
                          unit_cube_cell, voronoi_cell)


class SmoothField:
    """Random trigonometric vector field with closed-form gradient.

    v_i(x) = sum_m A[i, m] sin(w_m . x + phi_m)
    """

    def __init__(self, rng, modes=3, freq=2.0):
        self.A = rng.normal(size=(3, modes))
        self.w = rng.normal(scale=freq, size=(modes, 3))
        self.phi = rng.uniform(0, 2 * np.pi, size=modes)

    def __call__(self, x):
        return np.sin(x @ self.w.T + self.phi) @ self.A.T

    def grad(self, x):
        c = np.cos(x @ self.w.T + self.phi)  # (n, m)
        return np.einsum("im,nm,mj->nij", self.A, c, self.w)

    def div(self, x):
        return np.einsum("nii->n", self.grad(x))


def random_tet(rng):
    while True:
        pts = rng.uniform(-1, 1, size=(4, 3))
        vol = np.linalg.det(pts[1:] - pts[0]) / 6
        edges = [np.linalg.norm(pts[i] - pts[j]) for i in range(4) for j in range(i)]
        if abs(vol) > 0.05 * max(edges) ** 3:
            return tetrahedron_cell(pts)


def random_hex(rng):
    while True:
        m = np.eye(3) + 0.3 * rng.normal(size=(3, 3))
        if np.linalg.det(m) > 0.3:
            return hexahedron_cell(m, rng.normal(size=3))


def sample_cells(rng):
    """One cell of each family used in the operator tests."""
    return [
        ("reference_tet", reference_tetrahedron()),
        ("unit_cube", unit_cube_cell()),
        ("random_tet", random_tet(rng)),
        ("random_hex", random_hex(rng)),
        ("voronoi", voronoi_cell(rng, 20)),
    ]


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
