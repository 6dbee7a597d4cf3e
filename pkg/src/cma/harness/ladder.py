"""L^p norm ladders of a barrier function along the Moser iteration exponents."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import torus
from ..errors import InvalidDimension, SubcriticalExponent

MODES = ("delta", "gradient")
TARGET_EXPONENT = 64.0


@dataclass
class MoserLadder:
    mode: str
    n: int
    p0: float
    q0: float
    b: float
    exponents: np.ndarray  # norm exponents b^k, k = 0..K
    p_schedule: np.ndarray  # iteration parameter p_k (b^k for delta, b^k / q0 for gradient)
    norms: np.ndarray
    C: float  # smallest constant making every per-step recurrence hold
    sup: float
    limit_ratio: float  # norms[-1] / sup

    @property
    def K(self) -> int:
        return len(self.exponents) - 1

    def monotone(self, rtol: float = 1e-12) -> bool:
        return bool(np.all(np.diff(self.norms) >= -rtol * self.norms[:-1]))

    def rows(self):
        """(k, p_k, norm) triples for CSV output; p_k is the norm exponent."""
        return [(k, float(p), float(v)) for k, (p, v) in enumerate(zip(self.exponents, self.norms))]


def moser_exponents(mode: str, p0: float, n: int) -> tuple:
    """(q0, b) for the Laplacian ('delta') or gradient iteration.

    delta: 1/q0 + 2/p0 = 1, b = n / ((n-1) q0).
    gradient: 1/q0 + 1/p0 = 1, b = 2n / ((2n-1) q0).
    Both need p0 > 2n for b > 1.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if mode == "delta" and n < 2:
        raise InvalidDimension("the Laplacian ladder needs n >= 2")
    if not p0 > 2 * n:
        raise SubcriticalExponent(f"p0 = {p0} <= 2n = {2 * n}: exponent base b <= 1")
    if mode == "delta":
        q0 = p0 / (p0 - 2.0)
        b = n / ((n - 1) * q0)
    else:
        q0 = p0 / (p0 - 1.0)
        b = 2 * n / ((2 * n - 1) * q0)
    return q0, b


def ladder_length(b: float, target: float = TARGET_EXPONENT) -> int:
    """Smallest K with b^K >= target."""
    K = int(np.ceil(np.log(target) / np.log(b) - 1e-12))
    return max(K, 1)


def moser_track(u, weight, mode: str, p0: float, n: int) -> MoserLadder:
    """Norm ladder of ``u`` under the unit-mass version of ``weight``.

    Norm exponents are b^k for k = 0..K with b^K >= 64.  The fitted constant
    is the smallest C with
      delta:     ||u||_{p b} <= (p C)^{2 q0 / p} ||u||_p,         p = b^k
      gradient:  ||u||_{b^{k+1}} <= (p C)^{1 / (2p)} ||u||_{b^k},  p = b^k / q0
    at every step.
    """
    q0, b = moser_exponents(mode, p0, n)
    vals = np.abs(np.asarray(u.values if hasattr(u, "values") else u, dtype=float))
    w = None if weight is None else np.asarray(getattr(weight, "values", weight), dtype=float)
    K = ladder_length(b)
    exps = b ** np.arange(K + 1)
    norms = np.array([torus.lp_norm(vals, p, w, normalize=True) for p in exps])
    ps = exps if mode == "delta" else exps / q0
    logC = -np.inf
    for k in range(K):
        lr = np.log(norms[k + 1] / norms[k]) if norms[k] > 0 else 0.0
        p = ps[k]
        if mode == "delta":
            val = p / (2.0 * q0) * lr - np.log(p)
        else:
            val = 2.0 * p * lr - np.log(p)
        logC = max(logC, val)
    top = float(vals.max() if w is None else vals[w > 0].max())
    ratio = float(norms[-1] / top) if top > 0 else 1.0
    return MoserLadder(mode, n, float(p0), float(q0), float(b), exps, ps, norms,
                       float(np.exp(logC)), top, ratio)
