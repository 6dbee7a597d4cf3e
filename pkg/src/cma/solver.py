"""Damped Newton-Krylov solver with amplitude continuation in F."""
from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from . import torus
from .errors import (ContinuationStalled, LinearSolveFailed, NotPositive,
                     PositivityLost, ValidationError)
from .operator import (KahlerBackground, PotentialState, _check_lambda, integrate_g,
                       make_state, normalize_F, residual, zero_state)
from .torus import ScalarField

log = logging.getLogger(__name__)

GMRES_RESTART = 50
GMRES_MAX_ITER = 500
FORCING_MAX = 1e-2


@dataclass
class SolveConfig:
    continuation_steps: int = 8
    newton_tol: float = 1e-10
    max_newton: int = 30
    linear_tol: float = 1e-8
    damping_min_eig: float = 0.05
    max_halvings: int = 40

    def __post_init__(self):
        self.validate()

    def validate(self):
        if int(self.continuation_steps) != self.continuation_steps or self.continuation_steps < 1:
            raise ValidationError("continuation_steps", "integer >= 1")
        for name in ("newton_tol", "linear_tol", "damping_min_eig"):
            if not getattr(self, name) > 0:
                raise ValidationError(name, "> 0")
        if not self.damping_min_eig < 0.1:
            raise ValidationError("damping_min_eig", "< 0.1")
        if self.max_newton < 1:
            raise ValidationError("max_newton", ">= 1")
        if self.max_halvings < 0:
            raise ValidationError("max_halvings", ">= 0")


@dataclass
class StepInfo:
    residual_before: float
    residual_after: float
    damping: float
    halvings: int
    min_eig: float
    linear_iterations: int


@dataclass
class SolveReport:
    """Convergence history and solution norms of one solve.

    ``to_dict`` gives the JSON layout; wall time is kept out of it so that
    reports are reproducible byte for byte.
    """
    n: int
    m: int
    lam: int
    continuation_steps: int
    retried: bool = False
    residual_history: list = field(default_factory=list)  # one list per stage
    damping_history: list = field(default_factory=list)
    newton_steps: int = 0
    final_min_eig: float = float("nan")
    final_residual: float = float("nan")
    sup_phi: float = float("nan")
    sup_grad_phi: float = float("nan")
    sup_n_plus_lap: float = float("nan")
    w3p: float = float("nan")
    p0: float = float("nan")
    wall_time: float = 0.0

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("wall_time")
        return d


def _mean_coefficient_symbol(state, lam):
    """Inverse symbol of the constant-coefficient operator with averaged g_phi^{-1}."""
    grid = state.grid
    ginv = state.inverse
    s = np.zeros(grid.shape, dtype=complex)
    syms = grid.hess_symbols
    for i in range(grid.n):
        for j in range(i, grid.n):
            # coefficient of psi_{i jbar} in Delta_phi is (G^{-1})_{ji}
            c = np.mean(ginv[j, i])
            if i == j:
                s = s + c.real * syms[i, j]
            else:
                s = s + 2.0 * np.real(c * syms[i, j])
    s = np.real(s)
    if lam == 0:
        s.flat[0] = 1.0
    else:
        s = s + lam
    return 1.0 / s


def linear_solve(state: PotentialState, rhs: ScalarField, lam: int = 0,
                 cfg: SolveConfig | None = None, tol: float | None = None) -> tuple:
    """Solve (Delta_phi + lam) psi = rhs with preconditioned GMRES.

    For lam = 0 the rhs is first projected to zero mean against dvol_phi
    (density det(g + phi_{i jbar})), the operator is bordered with the g-mean
    so it is invertible, and psi is returned with zero g-mean.

    ``tol`` overrides ``cfg.linear_tol`` (Newton uses a looser forcing term
    while the nonlinear residual is still large).  Returns ``(psi, iterations)``.
    """
    cfg = cfg or SolveConfig()
    tol = cfg.linear_tol if tol is None else tol
    _check_lambda(lam)
    grid = state.grid
    bg = state.bg
    b = np.array(rhs.values, dtype=float)
    if lam == 0:
        b = b - np.mean(b * state.det) / np.mean(state.det)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return grid.zeros(), 0
    shape = grid.shape
    dens = None if bg.flat else bg.det / bg.volume

    def apply(x):
        x = x.reshape(shape)
        y = state.laplace_phi(x)
        if lam == 0:
            y = y + (np.mean(x) if dens is None else np.mean(x * dens))
        else:
            y = y + lam * x
        return y.ravel()

    inv = grid.half(_mean_coefficient_symbol(state, lam))

    def precond(r):
        return torus.irfftn(torus.rfftn(r.reshape(shape)) * inv, shape).ravel()

    N = grid.size
    A = LinearOperator((N, N), matvec=apply, dtype=float)
    M = LinearOperator((N, N), matvec=precond, dtype=float)
    count = [0]

    def cb(_):
        count[0] += 1

    x0 = None
    for _ in range(3):
        x, info = gmres(A, b.ravel(), x0=x0, rtol=0.1 * tol, atol=0.0,
                        restart=GMRES_RESTART, maxiter=GMRES_MAX_ITER // GMRES_RESTART + 1,
                        M=M, callback=cb, callback_type="pr_norm")
        rel = np.linalg.norm(apply(x) - b.ravel()) / bnorm
        if rel <= tol:
            break
        if count[0] >= GMRES_MAX_ITER:
            break
        x0 = x
    else:
        rel = np.linalg.norm(apply(x) - b.ravel()) / bnorm
    if rel > tol:
        raise LinearSolveFailed(
            f"GMRES reached relative residual {rel:.3e} > {tol:.1e} "
            f"after {count[0]} iterations"
        )
    x = x.reshape(shape)
    if lam == 0:
        x = x - integrate_g(x, bg) / bg.volume
    return grid.field(x, "psi"), count[0]


def newton_step(state: PotentialState, F_t: ScalarField, bg: KahlerBackground,
                lam: int = 0, cfg: SolveConfig | None = None) -> tuple:
    """One damped Newton step.  Returns ``(new_state, StepInfo)``.

    Accepts the first t in 1, 1/2, 1/4, ... whose iterate keeps
    min_eig >= damping_min_eig and lowers the sup residual (or already meets
    newton_tol).
    """
    cfg = cfg or SolveConfig()
    r = residual(state, F_t, bg, lam)
    r0 = r.max_abs()
    # forcing term ~ residual keeps the local convergence quadratic
    eta = min(FORCING_MAX, max(cfg.linear_tol, 0.1 * r0))
    delta, its = linear_solve(state, r.with_values(-r.values), lam, cfg, tol=eta)
    t = 1.0
    positivity_blocked = False
    for halvings in range(cfg.max_halvings + 1):
        trial = state.phi.with_values(state.phi.values + t * delta.values)
        cand = PotentialState(trial, bg, check_mean=False)
        if cand.min_eig >= cfg.damping_min_eig:
            positivity_blocked = False
            r1 = residual(cand, F_t, bg, lam).max_abs()
            if r1 < r0 or r1 <= cfg.newton_tol:
                if lam == 0:
                    cand = make_state(trial, bg, lam)
                return cand, StepInfo(r0, r1, t, halvings, cand.min_eig, its)
        else:
            positivity_blocked = True
        t *= 0.5
    if positivity_blocked:
        raise PositivityLost(
            f"line search could not keep min eigenvalue >= {cfg.damping_min_eig} "
            f"(residual {r0:.3e})"
        )
    raise ContinuationStalled(f"line search found no residual decrease from {r0:.3e}")


def _run_path(F: ScalarField, bg: KahlerBackground, lam: int, cfg: SolveConfig,
              steps: int, report: SolveReport) -> PotentialState:
    state = zero_state(bg)
    report.residual_history = []
    report.damping_history = []
    report.newton_steps = 0
    for k in range(1, steps + 1):
        F_t = normalize_F(F.with_values(F.values * (k / steps)), bg)
        hist = []
        damp = []
        res = residual(state, F_t, bg, lam).max_abs()
        hist.append(res)
        it = 0
        while res > cfg.newton_tol:
            if it >= cfg.max_newton:
                raise ContinuationStalled(
                    f"stage {k}/{steps} still at residual {res:.3e} after {it} Newton steps"
                )
            try:
                state, info = newton_step(state, F_t, bg, lam, cfg)
            except ContinuationStalled as exc:
                raise ContinuationStalled(f"stage {k}/{steps}: {exc}") from exc
            res = info.residual_after
            hist.append(res)
            damp.append(info.damping)
            it += 1
            log.debug("stage %d step %d residual %.3e t=%g gmres=%d", k, it, res,
                      info.damping, info.linear_iterations)
        report.residual_history.append(hist)
        report.damping_history.append(damp)
        report.newton_steps += it
    return state


def solve(F: ScalarField, bg: KahlerBackground, lam: int = 0,
          cfg: SolveConfig | None = None, p0: float = 8.0) -> tuple:
    """Solve log det(g + phi_{i jbar})/det g = F - lam phi by continuation t F, t = k/K.

    F is renormalized at every stage.  A stalled continuation is retried once
    with twice as many stages; positivity and linear-solver failures propagate.
    Returns ``(state, SolveReport)``.
    """
    cfg = cfg or SolveConfig()
    _check_lambda(lam)
    if F.grid != bg.grid:
        raise ValueError("F and background live on different grids")
    t0 = time.perf_counter()
    grid = bg.grid
    steps = int(cfg.continuation_steps)
    report = SolveReport(grid.n, grid.m, lam, steps, p0=float(p0))
    try:
        state = _run_path(F, bg, lam, cfg, steps, report)
    except ContinuationStalled as exc:
        log.info("continuation stalled (%s); retrying with %d stages", exc, 2 * steps)
        steps *= 2
        report.continuation_steps = steps
        report.retried = True
        state = _run_path(F, bg, lam, cfg, steps, report)
    fill_report(report, state, F, lam, p0)
    report.wall_time = time.perf_counter() - t0
    log.info("solve n=%d m=%d finished in %.2fs (%d Newton steps)", grid.n, grid.m,
             report.wall_time, report.newton_steps)
    return state, report


def fill_report(report: SolveReport, state: PotentialState, F: ScalarField, lam: int,
                p0: float) -> None:
    Fn = normalize_F(F, state.bg)
    report.final_min_eig = state.min_eig
    report.final_residual = residual(state, Fn, state.bg, lam).max_abs()
    report.sup_phi = state.phi.max_abs()
    report.sup_grad_phi = float(np.sqrt(grad_norm_sq(state.phi, state.bg).max()))
    report.sup_n_plus_lap = float(state.trace_g().max())
    report.w3p = w3p_seminorm(state, p0)


def grad_norm_sq(f: ScalarField, bg: KahlerBackground) -> np.ndarray:
    """|grad f|^2 = g^{k lbar} f_k f_lbar."""
    grad = torus.holomorphic_gradient(f)
    if bg.flat:
        return grad.norm_sq()
    return grad.norm_sq(bg.inverse)


def w3p_seminorm(state: PotentialState, p0: float) -> float:
    """L^{p0}(dvol_g) norm of sqrt(sum |d_k phi_{i jbar}|^2 + |d_kbar phi_{i jbar}|^2).

    Derivatives are flat coordinate derivatives; the third-derivative arrays
    are accumulated one component at a time to bound memory.
    """
    grid = state.grid
    n = grid.n
    fh = torus.fftn(state.phi.values)
    syms = grid.hess_symbols
    acc = np.zeros(grid.shape)
    for (i, j), s in syms.items():
        mult = 1 if i == j else 2  # (i, j) and (j, i) have equal moduli
        for k in range(n):
            for d in (grid.d_hol[k], grid.d_antihol[k]):
                acc += mult * np.abs(torus.ifftn(fh * (d * s))) ** 2
    weight = None if state.bg.flat else state.bg.det
    return torus.lp_norm(np.sqrt(acc), p0, weight)
