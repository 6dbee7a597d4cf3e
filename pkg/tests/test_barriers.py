import numpy as np
import pytest

from cma import operator as op
from cma import rhs, solver, torus
from cma.errors import InvalidDimension, RoughInput, ValidationError
from cma.harness import barriers
from cma.harness.jets import PointwiseData


def smooth_state(grid, amplitude, seed=3, bandwidth=2):
    bg = op.flat_background(grid)
    F = rhs.make_F(rhs.RhsSpec("smooth", seed=seed, amplitude=amplitude, bandwidth=bandwidth), grid, bg)
    state, _ = solver.solve(F, bg)
    return state, F


def test_barriers_at_zero(grid2):
    st = op.zero_state(op.flat_background(grid2))
    assert np.allclose(barriers.delta_barrier(st, barriers.DeltaBarrierConfig()).values, 2.0)
    gcfg = barriers.GradientBarrierConfig.for_state(st)
    assert np.allclose(barriers.gradient_barrier(st, gcfg).values, 1.0)


def test_delta_barrier_c1_zero_is_trace(solved_small):
    st = solved_small[0]
    u = barriers.delta_barrier(st, barriers.DeltaBarrierConfig(C1=0.0)).values
    assert np.allclose(u, 2.0 + 0.25 * torus.laplacian(st.phi), atol=1e-12)


def test_barrier_recomputation(solved_small):
    st = solved_small[0]
    phi = st.phi.values
    H = torus.mixed_hessian(st.phi).values
    u = barriers.delta_barrier(st, barriers.DeltaBarrierConfig(C1=1.0)).values
    assert np.max(np.abs(u - np.exp(-phi) * (2.0 + np.real(H[0, 0] + H[1, 1])))) <= 1e-12
    gcfg = barriers.GradientBarrierConfig.for_state(st)
    gsq = np.sum(np.abs(torus.holomorphic_gradient(st.phi).values) ** 2, axis=0)
    A = (gcfg.B + 2) * phi - phi ** 2 / (2 * gcfg.C0)
    ug = barriers.gradient_barrier(st, gcfg).values
    assert np.max(np.abs(ug - np.exp(-A) * (gsq + 1))) <= 1e-12
    assert ug.min() >= np.exp(-A.max()) * (1 - 1e-15)


def test_a_prime_bracket(solved_small):
    st = solved_small[0]
    cfg = barriers.GradientBarrierConfig.for_state(st)
    a1 = cfg.A1(st.phi.values)
    assert np.all(a1 >= cfg.B + 1) and np.all(a1 <= cfg.B + 3)
    assert cfg.A2 == -1.0 / cfg.C0


def test_chain_rule_laplacian_matches_spectral():
    # a small smooth potential keeps both barriers spectrally resolved at m = 16
    g = torus.make_grid(2, 16)
    x = g.coords
    phi = 0.01 * (np.cos(2 * np.pi * x[0]) + np.sin(2 * np.pi * (x[1] + x[2])) + 0.5 * np.cos(2 * np.pi * x[3]))
    st = op.PotentialState(g.field(phi), op.flat_background(g))
    data = PointwiseData(st)
    lap = barriers.lap_delta_barrier(data, 1.0)
    u = barriers.delta_barrier(st, barriers.DeltaBarrierConfig(C1=1.0)).values
    assert np.max(np.abs(lap - st.laplace_phi(u))) <= 1e-10 * np.abs(lap).max()
    gcfg = barriers.GradientBarrierConfig.for_state(st)
    lapg = barriers.lap_gradient_barrier(data, gcfg)
    ug = barriers.gradient_barrier(st, gcfg).values
    assert np.max(np.abs(lapg - st.laplace_phi(ug))) <= 1e-10 * np.abs(lapg).max()


def test_yau_fit_at_zero(grid2):
    st = op.zero_state(op.flat_background(grid2))
    fit = barriers.check_yau_inequality(st, grid2.zeros(), barriers.DeltaBarrierConfig())
    assert fit.C3 == pytest.approx(2.0) and fit.C2 == pytest.approx(0.5)
    assert fit.worst_margin == pytest.approx(0.0, abs=1e-12)
    assert fit.yau_margin >= -1e-12


def test_gradient_fit_at_zero(grid2):
    st = op.zero_state(op.flat_background(grid2))
    cfg = barriers.GradientBarrierConfig.for_state(st)
    fit = barriers.check_gradient_differential_inequality(st, grid2.zeros(), cfg)
    assert fit.C == pytest.approx(2.0) and fit.eps0 == 1.0
    assert fit.worst_margin == pytest.approx(0.0, abs=1e-12)


def test_fits_on_manufactured(solved_small):
    st, _, _, F = solved_small
    dfit = barriers.check_yau_inequality(st, F, barriers.DeltaBarrierConfig())
    assert dfit.C2 > 0 and dfit.worst_margin >= -1e-12 and dfit.yau_margin >= -1e-10
    assert dfit.F_mismatch < 1e-9
    gfit = barriers.check_gradient_differential_inequality(st, F, barriers.GradientBarrierConfig.for_state(st))
    assert gfit.eps0 > 0 and gfit.worst_margin >= -1e-12


def test_fits_on_perturbed_background():
    # m = 16 keeps the solved potential under the rough-input threshold
    grid = torus.make_grid(2, 16)
    x = grid.coords
    bg = op.perturbed_background(grid.field(0.02 * (np.cos(2 * np.pi * x[0]) + np.cos(2 * np.pi * x[3]))))
    F = rhs.make_F(rhs.RhsSpec("smooth", seed=1, amplitude=0.2, bandwidth=1), bg.grid, bg)
    st, _ = solver.solve(F, bg)
    cfg = barriers.DeltaBarrierConfig.for_background(bg)
    assert cfg.C1 + bg.inf_bisec == pytest.approx(1.1)
    dfit = barriers.check_yau_inequality(st, F, cfg)
    assert dfit.C2 > 0 and dfit.yau_margin >= -1e-8
    gfit = barriers.check_gradient_differential_inequality(st, F, barriers.GradientBarrierConfig.for_state(st))
    assert gfit.eps0 > 0


def test_doubling_amplitude_does_not_decrease_c3():
    grid = torus.make_grid(2, 16)
    c3 = []
    for a in (0.1, 0.2):
        st, F = smooth_state(grid, a, bandwidth=1)
        c3.append(barriers.check_yau_inequality(st, F, barriers.DeltaBarrierConfig()).C3)
    assert c3[1] >= c3[0]


def test_rough_input_rejected():
    grid = torus.make_grid(2, 8)
    bg = op.flat_background(grid)
    F = rhs.make_F(rhs.RhsSpec("cusp", amplitude=0.5), grid, bg)
    st, _ = solver.solve(F, bg)
    with pytest.raises(RoughInput):
        barriers.check_yau_inequality(st, F, barriers.DeltaBarrierConfig())
    with pytest.raises(RoughInput):
        barriers.check_gradient_differential_inequality(st, F, barriers.GradientBarrierConfig.for_state(st))


def test_yau_needs_n2(grid1):
    st = op.zero_state(op.flat_background(grid1))
    with pytest.raises(InvalidDimension):
        barriers.check_yau_inequality(st, grid1.zeros(), barriers.DeltaBarrierConfig())


def test_c1_constraint(grid2):
    with pytest.raises(ValidationError):
        barriers.DeltaBarrierConfig(C1=0.05).validate(op.flat_background(grid2))


def test_integration_by_parts(solved_small):
    lhs, rhs_ = barriers.integration_by_parts_gap(solved_small[0])
    assert abs(lhs - rhs_) <= 1e-9
