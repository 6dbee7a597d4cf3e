import numpy as np
import pytest

from cma import operator as op
from cma import rhs, solver, torus

# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: dict = {}


def record(tag: str, passed: bool, detail: str) -> None:
    line = f"{tag} {'PASS' if passed else 'FAIL'}: {detail}"
    ACCEPTANCE_LINES[tag] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for tag in sorted(ACCEPTANCE_LINES, key=lambda t: int(t[1:])):
        terminalreporter.write_line(ACCEPTANCE_LINES[tag])


@pytest.fixture(scope="session")
def grid1():
    return torus.make_grid(1, 64)


@pytest.fixture(scope="session")
def grid2():
    return torus.make_grid(2, 8)


def manufactured_case(m: int, amplitude: float = 0.1, min_eig: float = 0.005):
    """phi* = A (cos 2 pi x1 + cos 2 pi y2) on the flat n = 2 torus and its F."""
    grid = torus.make_grid(2, m)
    bg = op.flat_background(grid)
    spec = rhs.RhsSpec("manufactured", amplitude=amplitude)
    phi_star = op.project_zero_mean(rhs.manufactured_potential(spec, grid), bg)
    F = rhs.manufactured_F(phi_star, bg, min_eig=min_eig)
    return grid, bg, phi_star, F


@pytest.fixture(scope="session")
def solved_small():
    """Manufactured n = 2 solve on m = 12 (a couple of seconds)."""
    grid, bg, phi_star, F = manufactured_case(12)
    state, report = solver.solve(F, bg, cfg=solver.SolveConfig(damping_min_eig=0.005))
    return state, report, phi_star, F


@pytest.fixture(scope="session")
def perturbed_bg8():
    grid = torus.make_grid(2, 8)
    phi0 = grid.field(0.02 * (np.cos(2 * np.pi * grid.coords[0]) + np.cos(2 * np.pi * grid.coords[3])))
    return op.perturbed_background(phi0)
