"""Barrier functions for the Laplacian and gradient bounds and their pointwise checks."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import torus
from ..errors import InvalidDimension, RoughInput, ValidationError
from ..operator import KahlerBackground, PotentialState
from ..torus import ScalarField
from .jets import PointwiseData

# relative spectral amplitude of phi allowed in modes |k|_inf >= m/4
ROUGH_TAIL = 1e-6


@dataclass
class DeltaBarrierConfig:
    C1: float = 1.0
    C2: float | None = None  # fitted
    C3: float | None = None  # fitted

    @classmethod
    def for_background(cls, bg: KahlerBackground) -> "DeltaBarrierConfig":
        """C1 = 1 on the flat torus, 1 - inf_bisec + 0.1 otherwise."""
        if bg.flat:
            return cls(1.0)
        return cls(1.0 - bg.inf_bisec + 0.1)

    def validate(self, bg: KahlerBackground):
        if not self.C1 + bg.inf_bisec >= 0.1:
            raise ValidationError("C1", f"C1 + inf_bisec >= 0.1 (inf_bisec = {bg.inf_bisec:.4g})")
        return self


@dataclass
class GradientBarrierConfig:
    B: float
    C0: float
    eps0: float | None = None  # fitted
    C: float | None = None  # fitted

    @classmethod
    def for_state(cls, state: PotentialState) -> "GradientBarrierConfig":
        return cls(B=state.bg.B, C0=1.0 + state.phi.max_abs())

    def A(self, t):
        return (self.B + 2.0) * t - t ** 2 / (2.0 * self.C0)

    def A1(self, t):
        return self.B + 2.0 - t / self.C0

    @property
    def A2(self) -> float:
        return -1.0 / self.C0


def delta_barrier(state: PotentialState, cfg: DeltaBarrierConfig) -> ScalarField:
    """u = exp(-C1 phi) (n + Delta phi)."""
    u = np.exp(-cfg.C1 * state.phi.values) * state.trace_g()
    return state.grid.field(u, "u_delta")


def gradient_barrier(state: PotentialState, cfg: GradientBarrierConfig) -> ScalarField:
    """u = exp(-A(phi)) (|grad phi|^2 + 1), |grad phi|^2 = g^{k lbar} phi_k phi_lbar."""
    grad = torus.holomorphic_gradient(state.phi)
    gsq = grad.norm_sq(None if state.bg.flat else state.bg.inverse)
    u = np.exp(-cfg.A(state.phi.values)) * (gsq + 1.0)
    return state.grid.field(u, "u_grad")


def require_resolved(state: PotentialState) -> float:
    """Raise RoughInput unless phi is spectrally resolved below m/4."""
    tail = torus.spectral_tail_fraction(state.phi, state.grid.m // 4)
    if tail > ROUGH_TAIL:
        raise RoughInput(
            f"potential has relative spectral tail {tail:.2e} > {ROUGH_TAIL:g} beyond |k| = m/4; "
            "pointwise differential checks need resolved data"
        )
    return tail


@dataclass
class DeltaFit:
    C2: float
    C3: float
    worst_margin: float  # min of Delta_phi u - (C2 w^{n/(n-1)} + e^{-C1 phi} Delta F - C3)
    yau_margin: float  # min of the pointwise margin of the sharper curvature form
    lap_u: np.ndarray
    F_mismatch: float  # sup |F given - F from the equation|


@dataclass
class GradientFit:
    eps0: float
    C: float
    worst_margin: float
    lap_u: np.ndarray
    F_mismatch: float


def _prepare(state, F, lam):
    require_resolved(state)
    data = PointwiseData(state, lam)
    mismatch = float(np.max(np.abs(data.F - F.values))) if F is not None else float("nan")
    return data, mismatch


def lap_delta_barrier(data: PointwiseData, C1: float) -> np.ndarray:
    """Delta_phi of exp(-C1 phi)(n + Delta phi), by the chain rule."""
    w = data.n_plus_lap
    wk, wkl = data.n_plus_lap_derivs()
    core = data.lap_phi_of_product(C1, 0.0, w, wk, wkl)
    return np.exp(-C1 * data.phi) * core


def lap_gradient_barrier(data: PointwiseData, cfg: GradientBarrierConfig) -> np.ndarray:
    s = data.grad_sq + 1.0
    sk, skl = data.grad_sq_derivs()
    a1 = cfg.A1(data.phi)
    core = data.lap_phi_of_product(a1, cfg.A2, s, sk, skl)
    return np.exp(-cfg.A(data.phi)) * core


def check_yau_inequality(state: PotentialState, F: ScalarField | None,
                         cfg: DeltaBarrierConfig, lam: int = 0) -> DeltaFit:
    """Fit C2, C3 in  C2 w^{n/(n-1)} + e^{-C1 phi} Delta F - C3 <= Delta_phi u,  w = n + Delta phi.

    C2 is taken from the curvature form of the inequality, half of
    min e^{-C1 phi - F/(n-1)} (C1 + inf_bisec), which leaves the other half to
    absorb the linear term; C3 is then the smallest nonnegative constant that
    makes the inequality hold at every grid point.  ``yau_margin`` reports the
    curvature form itself (no fitted constants) and should be >= 0 up to rounding.
    """
    n = state.grid.n
    if n < 2:
        raise InvalidDimension("the Laplacian barrier inequality needs n >= 2")
    bg = state.bg
    cfg.validate(bg)
    data, mismatch = _prepare(state, F, lam)
    C1 = cfg.C1
    inf_b = bg.inf_bisec
    w = data.n_plus_lap
    lap_u = lap_delta_barrier(data, C1)
    Ft = data.F_tilde
    e1 = np.exp(-C1 * data.phi)
    power = w ** (n / (n - 1))
    curv = np.exp(-C1 * data.phi - Ft / (n - 1)) * (C1 + inf_b)
    lapF = data.lap_F

    # curvature form: uses the metric part of F only
    lapFt = lapF - lam * (data.n_plus_lap - n) if lam else lapF
    yau_rhs = e1 * (lapFt - n * n * inf_b - C1 * n * w) + curv * power
    yau_margin = float(np.min(lap_u - yau_rhs))

    C2 = 0.5 * float(curv.min())
    lhs = C2 * power + e1 * lapF
    C3 = max(0.0, float(np.max(lhs - lap_u)))
    worst = float(np.min(lap_u - (lhs - C3)))
    if not C2 > 0:
        raise AssertionError(f"fitted C2 = {C2} is not positive")
    cfg.C2, cfg.C3 = C2, C3
    return DeltaFit(C2, C3, worst, yau_margin, lap_u, mismatch)


def check_gradient_differential_inequality(state: PotentialState, F: ScalarField | None,
                                           cfg: GradientBarrierConfig,
                                           lam: int = 0) -> GradientFit:
    """Fit eps0, C in
    Delta_phi u >= eps0 |grad phi|^{2+2/n} + e^{-A(phi)} (n + Delta phi) - C |grad F||grad phi| - C.

    eps0 is half the pointwise minimum of the quadratic-gradient lower bound
    e^{-A} |grad phi|^2 ((1/C0) g_phi^{i jbar} phi_i phi_jbar + (A' - B) tr_phi g)
    divided by |grad phi|^{2+2/n}; C is then the smallest nonnegative constant
    for which the inequality holds at every grid point.  When grad phi vanishes
    identically any eps0 works and 1 is returned.
    """
    n = state.grid.n
    data, mismatch = _prepare(state, F, lam)
    lap_u = lap_gradient_barrier(data, cfg)
    phi = data.phi
    eA = np.exp(-cfg.A(phi))
    gsq = data.grad_sq
    X = gsq ** (1.0 + 1.0 / n)
    Q = eA * gsq * (data.grad_sq_phi / cfg.C0 + (cfg.A1(phi) - cfg.B) * data.trace_inv)
    mask = gsq > 1e-14 * max(1.0, float(gsq.max()))
    eps0 = 0.5 * float(np.min(Q[mask] / X[mask])) if mask.any() else 1.0
    if not eps0 > 0:
        raise AssertionError(f"fitted eps0 = {eps0} is not positive")
    grad_phi = np.sqrt(gsq)
    rhs0 = eps0 * X + eA * data.n_plus_lap
    weight = data.grad_F * grad_phi + 1.0
    C = max(0.0, float(np.max((rhs0 - lap_u) / weight)))
    worst = float(np.min(lap_u - (rhs0 - C * weight)))
    cfg.eps0, cfg.C = eps0, C
    return GradientFit(eps0, C, worst, lap_u, mismatch)


def integration_by_parts_gap(state: PotentialState) -> tuple:
    """(int |grad phi|^2 dvol_g, -int phi Delta phi dvol_g)."""
    bg = state.bg
    grad = torus.holomorphic_gradient(state.phi)
    gsq = grad.norm_sq(None if bg.flat else bg.inverse)
    lap = state.trace_g() - state.grid.n
    w = bg.det
    lhs = float(np.mean(gsq * w))
    rhs = float(-np.mean(state.phi.values * lap * w))
    return lhs, rhs
