"""Barrier functions, pointwise inequality checks, norm ladders, Sobolev probes and sweeps."""
from .barriers import (DeltaBarrierConfig, DeltaFit, GradientBarrierConfig, GradientFit,
                       check_gradient_differential_inequality, check_yau_inequality,
                       delta_barrier, gradient_barrier, integration_by_parts_gap)
from .ladder import MoserLadder, moser_exponents, moser_track
from .pointwise import (InequalitySample, amgm_suite, check_amgm, check_elementary, check_sos,
                        elementary_equality_point, elementary_suite, sos_suite, young_closed_form,
                        young_constant)
from .sobolev import SobolevBound, sobolev_probe
from .sweep import HEADER, SweepRow, barrier_ladders, sweep_estimates

__all__ = [
    "DeltaBarrierConfig", "DeltaFit", "GradientBarrierConfig", "GradientFit",
    "check_gradient_differential_inequality", "check_yau_inequality", "delta_barrier",
    "gradient_barrier", "integration_by_parts_gap", "MoserLadder", "moser_exponents",
    "moser_track", "InequalitySample", "amgm_suite", "check_amgm", "check_elementary",
    "check_sos", "elementary_equality_point", "elementary_suite", "sos_suite",
    "young_closed_form", "young_constant", "SobolevBound", "sobolev_probe", "HEADER",
    "SweepRow", "barrier_ladders", "sweep_estimates",
]
