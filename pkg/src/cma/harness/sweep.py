"""Solve a family of right-hand sides and tabulate solution norms against norms of F."""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .. import torus
from ..errors import CMAError
from ..operator import KahlerBackground
from ..rhs import RhsSpec, make_F, w1p_norm
from ..solver import SolveConfig, solve
from .barriers import DeltaBarrierConfig, GradientBarrierConfig, delta_barrier, gradient_barrier
from .ladder import MoserLadder, moser_track

log = logging.getLogger(__name__)

COLUMNS = ("w1p_norm", "sup_lap_F", "sup_phi", "sup_grad_phi", "sup_n_plus_lap", "w3p",
           "ladder_ratio_delta", "ladder_ratio_grad")
HEADER = COLUMNS + ("status",)


@dataclass
class SweepRow:
    spec: RhsSpec
    status: str = "ok"
    message: str = ""
    w1p_norm: float = math.nan
    sup_lap_F: float = math.nan
    sup_phi: float = math.nan
    sup_grad_phi: float = math.nan
    sup_n_plus_lap: float = math.nan
    w3p: float = math.nan
    ladder_ratio_delta: float = math.nan  # stays nan for n = 1
    ladder_ratio_grad: float = math.nan
    ladders: dict = field(default_factory=dict)
    report: object = None
    state: object = None

    def values(self) -> tuple:
        return tuple(getattr(self, c) for c in COLUMNS)


def lap_g(F, bg: KahlerBackground) -> np.ndarray:
    """Delta_g F = g^{k lbar} F_{k lbar}."""
    if bg.flat:
        return torus.complex_laplacian(F)
    H = torus.mixed_hessian(F).values
    return np.real(np.einsum("ij...,ji...->...", bg.inverse, H))


def barrier_ladders(state, p0: float) -> dict:
    """Delta (n >= 2) and gradient barrier ladders under the normalized dvol_phi weight."""
    n = state.grid.n
    weight = state.det  # e^F det g
    out = {}
    if n >= 2:
        u = delta_barrier(state, DeltaBarrierConfig.for_background(state.bg))
        out["delta"] = moser_track(u, weight, "delta", p0, n)
    u = gradient_barrier(state, GradientBarrierConfig.for_state(state))
    out["gradient"] = moser_track(u, weight, "gradient", p0, n)
    return out


def evaluate_spec(spec: RhsSpec, bg: KahlerBackground, cfg: SolveConfig | None = None,
                  p0: float = 8.0, lam: int = 0, keep_state: bool = False,
                  min_eig: float = 0.1) -> SweepRow:
    row = SweepRow(spec)
    try:
        F = make_F(spec, bg.grid, bg, min_eig=min_eig)
        w1p = w1p_norm(F, p0, bg)
        slap = float(np.abs(lap_g(F, bg)).max())
        state, report = solve(F, bg, lam, cfg, p0)
        ladders = barrier_ladders(state, p0)
    except CMAError as exc:
        row.status = type(exc).__name__
        row.message = str(exc)
        log.warning("sweep row %s failed: %s", spec, exc)
        return row
    row.w1p_norm, row.sup_lap_F = w1p, slap
    row.sup_phi = report.sup_phi
    row.sup_grad_phi = report.sup_grad_phi
    row.sup_n_plus_lap = report.sup_n_plus_lap
    row.w3p = report.w3p
    if "delta" in ladders:
        row.ladder_ratio_delta = ladders["delta"].limit_ratio
    row.ladder_ratio_grad = ladders["gradient"].limit_ratio
    row.ladders = ladders
    row.report = report
    if keep_state:
        row.state = state
    return row


def sweep_estimates(family: list, bg: KahlerBackground, cfg: SolveConfig | None = None,
                    p0: float = 8.0, lam: int = 0, threads: int = 1,
                    keep_states: bool = False, min_eig: float = 0.1) -> list:
    """One row per spec, sorted by ||F||_{W^{1,p0}}; failed rows go last in input order."""
    def job(spec):
        return evaluate_spec(spec, bg, cfg, p0, lam, keep_states, min_eig)

    if threads > 1 and len(family) > 1:
        with ThreadPoolExecutor(min(threads, len(family))) as ex:
            rows = list(ex.map(job, family))
    else:
        rows = [job(s) for s in family]
    order = sorted(range(len(rows)),
                   key=lambda i: (math.isnan(rows[i].w1p_norm), rows[i].w1p_norm, i))
    return [rows[i] for i in order]


def ladder_constants(row: SweepRow) -> dict:
    return {k: v.C for k, v in row.ladders.items()}


__all__ = ["COLUMNS", "HEADER", "SweepRow", "MoserLadder", "barrier_ladders", "evaluate_spec",
           "lap_g", "ladder_constants", "sweep_estimates"]
