"""Acceptance criteria A1-A11.

Each test records one PASS/FAIL line (shown in the terminal summary) and then
asserts the criterion at its stated tolerance.
"""
import os
import time

import numpy as np
import pytest

from cma import cli
from cma import operator as op
from cma import rhs, solver, torus
from cma.errors import SubcriticalExponent
from cma.harness import barriers, ladder, pointwise as pw, sweep

from conftest import manufactured_case, record

A2_CFG = solver.SolveConfig(damping_min_eig=0.005)


def poisson_oracle(F):
    """Zero-mean solution of phi_{1 1bar} = e^F - 1 on the n = 1 torus."""
    return np.real(torus.ifftn(torus.fftn(np.exp(F.values) - 1.0) * F.grid.inverse_complex_laplacian))


def solve_a1(m, seed):
    grid = torus.make_grid(1, m)
    bg = op.flat_background(grid)
    F = rhs.make_F(rhs.RhsSpec("smooth", seed=seed, amplitude=0.5, bandwidth=8), grid, bg)
    t0 = time.perf_counter()
    state, report = solver.solve(F, bg)
    return state, F, time.perf_counter() - t0


@pytest.fixture(scope="module")
def a1_cases():
    return [solve_a1(256, s) for s in range(10)]


def solve_a2(m):
    grid, bg, phi_star, F = manufactured_case(m, 0.1, min_eig=0.005)
    t0 = time.perf_counter()
    state, report = solver.solve(F, bg, cfg=A2_CFG)
    return state, F, phi_star, time.perf_counter() - t0


@pytest.fixture(scope="module")
def a2_case():
    return solve_a2(24)


A8_AMPS = (0.5, 1.0, 2.0)


@pytest.fixture(scope="module")
def a8_rows():
    out, times = {}, {}
    for m in (16, 32):
        bg = op.flat_background(torus.make_grid(2, m))
        fam = [rhs.RhsSpec("cusp", amplitude=a, beta=0.6) for a in A8_AMPS]
        t0 = time.perf_counter()
        rows = sweep.sweep_estimates(fam, bg, p0=8.0)
        times[m] = time.perf_counter() - t0
        out[m] = {r.spec.amplitude: r for r in rows}
    return out, times


def test_A1_n1_exact_oracle(a1_cases):
    errs = [np.max(np.abs(st.phi.values - poisson_oracle(F))) for st, F, _ in a1_cases]
    slowest = max(t for _, _, t in a1_cases)
    ok = max(errs) <= 1e-9 and slowest <= 5.0
    record("A1", ok, f"max sup error {max(errs):.2e} (<= 1e-9), slowest solve {slowest:.2f} s (<= 5 s)")
    assert ok


def test_A2_manufactured_n2(a2_case):
    state, F, phi_star, wall = a2_case
    err = float(np.max(np.abs(state.phi.values - phi_star.values)))
    ok = err <= 1e-6 and wall <= 60.0
    record("A2", ok, f"sup error {err:.2e} (<= 1e-6), solve {wall:.1f} s (<= 60 s)")
    assert ok


def test_A3_derivative_consistency(a2_case):
    state = a2_case[0]
    grid, bg = state.grid, state.bg
    rng = np.random.default_rng(3)
    psi = np.real(torus.ifftn(torus.fftn(rng.standard_normal(grid.shape))
                              * np.exp(-0.05 * np.abs(grid.laplacian_symbol))))
    psi = grid.field(psi / np.abs(psi).max())
    F = grid.zeros()
    r0 = op.residual(state, F, bg).values
    lin = op.linearized_apply(state, psi, bg).values
    errs = []
    for t in (1e-4, 1e-5):
        st = op.PotentialState(state.phi.with_values(state.phi.values + t * psi.values), bg, check_mean=False)
        errs.append(np.max(np.abs((op.residual(st, F, bg).values - r0) / t - lin)))
    ratio = errs[0] / errs[1]
    ok = 5 <= ratio <= 20
    record("A3", ok, f"FD error ratio {ratio:.2f} over t = 1e-4, 1e-5 (in [5, 20])")
    assert ok


def test_A4_sos():
    t0 = time.perf_counter()
    res = [pw.sos_suite(n, 100_000, seed=n) for n in (2, 3, 4, 5)]
    wall = time.perf_counter() - t0
    rel = max(r["max_rel_error"] for r in res)
    low = min(r["min_margin"] for r in res)
    ok = rel <= 1e-10 and low >= -1e-12 and wall <= 30.0
    record("A4", ok, f"4 x 1e5 samples: max rel error {rel:.1e} (<= 1e-10), "
                     f"min margin {low:.2e} (>= -1e-12), {wall:.1f} s (<= 30 s)")
    assert ok


def test_A5_amgm_and_helper():
    low = min(min(pw.amgm_suite(n, 100_000, seed=n)["min_margin"],
                  pw.elementary_suite(n, 100_000, seed=n)["min_margin"]) for n in (2, 3, 4, 5))
    eq_amgm = abs(pw.check_amgm(np.zeros(2)))
    eq_elem = max(abs(pw.check_elementary(s * s, s, s, 2)) for s in (1e-3, 0.5, 1.0, 7.0, 1e3))
    ok = low >= -1e-12 and eq_amgm <= 1e-10 and eq_elem <= 1e-10
    record("A5", ok, f"min margin {low:.2e} (>= -1e-12); equality cases |margin| "
                     f"{eq_amgm:.1e}, {eq_elem:.1e} (<= 1e-10)")
    assert ok


def test_A6_young_constants():
    worst = 0.0
    for n in (2, 3, 4):
        for eps in (0.1, 1.0, 10.0):
            exact = ((n - 1) / (n * eps)) ** (n - 1) / n
            smax = eps ** (-(n - 1))  # the maximand is negative beyond this point
            s = np.linspace(0.0, smax, 2_000_001)
            f = s - eps * s ** (n / (n - 1))
            k = int(np.argmax(f))
            # refine around the grid maximum
            s = np.linspace(s[max(k - 1, 0)], s[min(k + 1, len(s) - 1)], 200_001)
            brute = np.max(s - eps * s ** (n / (n - 1)))
            worst = max(worst, abs(brute / exact - 1), abs(pw.young_constant(eps, n) / exact - 1))
    spot = pw.young_constant(1.0, 2)
    ok = worst <= 1e-6 and abs(spot - 0.25) <= 1e-6 * 0.25
    record("A6", ok, f"max relative deviation {worst:.1e} (<= 1e-6); n=2, eps=1 gives {spot:.10f}")
    assert ok


def test_A7_moser_exponents():
    d = ladder.moser_exponents("delta", 8.0, 2)
    g = ladder.moser_exponents("gradient", 8.0, 2)
    ok = np.allclose(d, (4 / 3, 3 / 2), rtol=1e-15) and np.allclose(g, (8 / 7, 7 / 6), rtol=1e-15)
    raised = 0
    for mode in ("delta", "gradient"):
        try:
            ladder.moser_exponents(mode, 4.0, 2)
        except SubcriticalExponent:
            raised += 1
    ok = ok and raised == 2
    record("A7", ok, f"delta (q0, b) = ({d[0]:.6f}, {d[1]:.6f}), gradient ({g[0]:.6f}, {g[1]:.6f}); "
                     f"p0 = 2n raised in {raised}/2 modes")
    assert ok


def _drift(a, b):
    return abs(b / a - 1)


def test_A8_cusp_signature(a8_rows):
    rows, times = a8_rows
    failed = [(m, a) for m in rows for a, r in rows[m].items() if r.status != "ok"]
    if failed:
        record("A8", False, f"solves failed for (m, A) = {failed}")
        pytest.fail(f"cusp solves failed: {failed}")
    w = max(_drift(rows[16][a].w1p_norm, rows[32][a].w1p_norm) for a in A8_AMPS)
    growth = min(rows[32][a].sup_lap_F / rows[16][a].sup_lap_F for a in A8_AMPS)
    lap = max(_drift(rows[16][a].sup_n_plus_lap, rows[32][a].sup_n_plus_lap) for a in A8_AMPS)
    grad = max(_drift(rows[16][a].sup_grad_phi, rows[32][a].sup_grad_phi) for a in A8_AMPS)
    total = sum(times.values())
    clauses = {"W1p drift < 2%": w < 0.02, "sup|lap F| growth >= 1.5x": growth >= 1.5,
               "sup(n+lap phi) drift < 5%": lap < 0.05, "sup|grad phi| drift < 5%": grad < 0.05,
               "<= 15 min": total <= 900}
    ok = all(clauses.values())
    bad = [k for k, v in clauses.items() if not v]
    record("A8", ok, f"m 16->32: W1p drift {w:.2%}, sup|lap F| growth {growth:.3f}x, "
                     f"sup(n+lap phi) drift {lap:.2%}, sup|grad phi| drift {grad:.2%}, {total:.0f} s"
                     + (f"; failing: {', '.join(bad)}" if bad else ""))
    assert ok, bad


def _ladders_ok(lads):
    return all(l.monotone() and 0.9 <= l.limit_ratio <= 1.0 and l.exponents[-1] >= 64 for l in lads)


def test_A9_ladder_closure(a1_cases, a2_case, a8_rows):
    lads = []
    a1_coarse = []
    for (st, F, _), seed in zip(a1_cases, range(10)):
        fine = sweep.barrier_ladders(st, 8.0)
        lads += fine.values()
        a1_coarse.append((fine, sweep.barrier_ladders(solve_a1(128, seed)[0], 8.0)))
    a2_fine = sweep.barrier_ladders(a2_case[0], 8.0)
    a2_coarse = sweep.barrier_ladders(solve_a2(12)[0], 8.0)
    lads += a2_fine.values()
    rows, _ = a8_rows
    for m in rows:
        for r in rows[m].values():
            if r.status == "ok":
                lads += r.ladders.values()
    ratios = [l.limit_ratio for l in lads]
    closed = _ladders_ok(lads)
    drifts = [_drift(c[k].C, f[k].C) for f, c in a1_coarse + [(a2_fine, a2_coarse)] for k in f]
    ok = closed and max(drifts) < 0.10
    record("A9", ok, f"{len(lads)} ladders monotone: {all(l.monotone() for l in lads)}, limit ratio in "
                     f"[{min(ratios):.4f}, {max(ratios):.4f}] (in [0.9, 1]); "
                     f"max C drift under refinement {max(drifts):.2e} (< 0.1)")
    assert ok


def test_A10_differential_inequalities(a2_case):
    state, F, _, _ = a2_case
    yau = barriers.check_yau_inequality(state, F, barriers.DeltaBarrierConfig.for_background(state.bg))
    grad = barriers.check_gradient_differential_inequality(
        state, F, barriers.GradientBarrierConfig.for_state(state))
    lhs, rhs_ = barriers.integration_by_parts_gap(state)
    gap = abs(lhs - rhs_)
    ok = yau.C2 > 0 and grad.eps0 > 0 and gap <= 1e-9
    record("A10", ok, f"C2 = {yau.C2:.4g} (> 0), eps0 = {grad.eps0:.4g} (> 0), "
                      f"integration by parts gap {gap:.1e} (<= 1e-9)")
    assert ok


A11_CONFIGS = {
    "solve": "[run]\ncommand = solve\n[grid]\nn = 2\nm = 8\n[rhs]\nkind = smooth\namplitude = 0.2\nbandwidth = 2\n",
    "sweep": ("[run]\ncommand = sweep\n[grid]\nn = 1\nm = 64\n[rhs]\nkind = smooth\n"
              "[family]\namplitudes = 0.1, 0.3\nseeds = 0, 1\n"),
    "moser": "[run]\ncommand = moser\n[grid]\nn = 2\nm = 8\n[rhs]\nkind = manufactured\namplitude = 0.05\n",
    "sobolev": "[run]\ncommand = sobolev\n[grid]\nn = 2\nm = 8\n",
    "check-inequalities": "[run]\ncommand = check-inequalities\n[inequalities]\nsamples = 5000\n",
}


def _tree(path):
    return {name: open(os.path.join(path, name), "rb").read() for name in sorted(os.listdir(path))}


def test_A11_determinism(tmp_path):
    mismatched = []
    nfiles = 0
    for cmd, text in A11_CONFIGS.items():
        cfg = tmp_path / f"{cmd}.cfg"
        cfg.write_text(text)
        trees = []
        for k, threads in enumerate((1, 2)):
            out = tmp_path / f"{cmd}-{k}"
            assert cli.main([cmd, "--config", str(cfg), "--out", str(out), "--threads", str(threads)]) == 0
            trees.append(_tree(out))
        nfiles += len(trees[0])
        if trees[0] != trees[1]:
            mismatched.append(cmd)
    ok = not mismatched
    record("A11", ok, f"{len(A11_CONFIGS)} commands run twice (1 and 2 threads), {nfiles} artifacts "
                      f"byte-identical" + (f"; differing: {mismatched}" if mismatched else ""))
    assert ok
