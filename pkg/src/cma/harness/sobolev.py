"""Lower bounds for the two Sobolev constants on the flat unit torus.

The defining ratios are maximized over a fixed list of trial functions, so
the running maximum is a certified lower bound for the true constant.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .. import torus
from ..errors import InvalidDimension, ValidationError
from ..rhs import smooth_cutoff, torus_distance
from ..torus import TorusGrid

VARIANTS = ("two-norm", "one-norm")
MIN_TRIALS = 100
BUMP_RADIUS = 0.45


@dataclass
class SobolevBound:
    variant: str
    n: int
    m: int
    trials: int
    bound: float
    argmax_class: str  # "constant", "bump" or "random"
    argmax_trial: int  # index into ``history`` (0 constant, 1 bump, 2.. random)
    history: np.ndarray  # running maximum over the trial sequence

    def to_dict(self) -> dict:
        return {"variant": self.variant, "n": self.n, "m": self.m, "trials": self.trials,
                "bound": self.bound, "argmax_class": self.argmax_class,
                "argmax_trial": self.argmax_trial}


def sobolev_ratio(f: np.ndarray, grid: TorusGrid, variant: str) -> float:
    """Ratio of the two sides of the Sobolev inequality for one trial f (volume 1).

    two-norm: ||f||_{2n/(n-1)}^2 / (int |grad f|^2 + int f^2)
    one-norm: ||f||_{2n/(2n-1)} / int (|grad f| + |f|)
    with |grad f|^2 = delta^{k lbar} f_k f_lbar.
    """
    n = grid.n
    fld = grid.field(f)
    gsq = torus.holomorphic_gradient(fld).norm_sq()
    if variant == "two-norm":
        if n < 2:
            raise InvalidDimension("the L^2 Sobolev inequality needs n >= 2")
        num = torus.lp_norm(f, 2.0 * n / (n - 1)) ** 2
        den = float(np.mean(gsq) + np.mean(f ** 2))
    elif variant == "one-norm":
        num = torus.lp_norm(f, 2.0 * n / (2 * n - 1))
        den = float(np.mean(np.sqrt(gsq)) + np.mean(np.abs(f)))
    else:
        raise ValueError(f"variant must be one of {VARIANTS}")
    return num / den if den > 0 else 0.0


def band_limited(grid: TorusGrid, bandwidth: int, rng: np.random.Generator) -> np.ndarray:
    """Real trigonometric polynomial with |k_a| <= bandwidth, coefficients decaying like 1/(1+|k|^2).

    Coefficients are drawn mode by mode in a fixed order, so the function does
    not depend on the grid size.
    """
    K = int(bandwidth)
    if 2 * K >= grid.m:
        raise ValidationError("bandwidth", f"2 * bandwidth < m = {grid.m}")
    modes = np.array(list(itertools.product(range(-K, K + 1), repeat=grid.dim)))
    coef = rng.standard_normal(len(modes)) + 1j * rng.standard_normal(len(modes))
    coef /= 1.0 + np.sum(modes.astype(float) ** 2, axis=1)
    spec = np.zeros(grid.shape, dtype=complex)
    np.add.at(spec, tuple((modes % grid.m).T), coef)
    # random offset so that trials range from oscillatory to nearly constant
    spec.flat[0] = rng.uniform(-2.0, 2.0) * np.abs(coef).sum() / np.sqrt(len(modes))
    return np.real(torus.ifftn(spec)) * grid.size


def bump(grid: TorusGrid, radius: float = BUMP_RADIUS) -> np.ndarray:
    return smooth_cutoff(torus_distance(grid) / radius)


def sobolev_probe(grid: TorusGrid, variant: str = "two-norm", trials: int = MIN_TRIALS,
                  seed: int = 0, bandwidth: int = 3) -> SobolevBound:
    """Maximize the Sobolev ratio over the constant, a fixed-width bump and random trials.

    ``trials`` counts the random band-limited functions; trial i uses the i-th
    child of ``SeedSequence(seed)``, so a longer run extends a shorter one.
    """
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    if trials < MIN_TRIALS:
        raise ValidationError("trials", f">= {MIN_TRIALS}")
    if variant == "two-norm" and grid.n < 2:
        raise InvalidDimension("the L^2 Sobolev inequality needs n >= 2")
    ratios = [sobolev_ratio(np.ones(grid.shape), grid, variant),
              sobolev_ratio(bump(grid), grid, variant)]
    for child in np.random.SeedSequence(seed).spawn(trials):
        f = band_limited(grid, bandwidth, np.random.default_rng(child))
        ratios.append(sobolev_ratio(f, grid, variant))
    ratios = np.array(ratios)
    best = int(np.argmax(ratios))
    cls = "constant" if best == 0 else "bump" if best == 1 else "random"
    return SobolevBound(variant, grid.n, grid.m, trials, float(ratios[best]), cls, best,
                        np.maximum.accumulate(ratios))
