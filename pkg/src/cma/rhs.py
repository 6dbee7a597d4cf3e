"""Right-hand sides F: smooth random, mollified cusps, manufactured data."""
from __future__ import annotations

from dataclasses import dataclass, field
import itertools

import numpy as np

from . import torus
from .errors import ConstraintViolated, InvalidExponent, NotPositive, ValidationError
from .operator import KahlerBackground, PotentialState, normalize_F, project_zero_mean
from .torus import ScalarField, TorusGrid

KINDS = ("smooth", "cusp", "manufactured")


@dataclass
class RhsSpec:
    kind: str = "smooth"
    seed: int = 0
    amplitude: float = 0.5
    bandwidth: int = 4
    center: tuple = field(default_factory=tuple)  # empty: origin
    beta: float = 0.6
    r0: float = 0.25
    delta: float | None = None  # None: two grid spacings
    p0: float = 8.0
    # manufactured data: phi* = amplitude * sum of cos(2 pi x) over the listed axes
    axes: tuple = (0, 3)

    def validate(self, n: int | None = None) -> "RhsSpec":
        if self.kind not in KINDS:
            raise ValidationError("kind", f"one of {', '.join(KINDS)}")
        if self.kind == "cusp" and not 0.05 < self.beta < 0.95:
            raise InvalidExponent(f"beta must lie in (0.05, 0.95), got {self.beta}")
        if not self.r0 > 0:
            raise ValidationError("r0", "> 0")
        if self.bandwidth < 0:
            raise ValidationError("bandwidth", ">= 0")
        if n is not None and not self.p0 > 2 * n:
            raise ValidationError("p0", f"p0 > 2n = {2 * n}")
        return self


def smooth_random_F(spec: RhsSpec, grid: TorusGrid, bg: KahlerBackground) -> ScalarField:
    """Random trigonometric polynomial with |k_a| <= K per axis, sup-scaled to A, normalized.

    Coefficients are drawn mode by mode in a fixed order, so the trigonometric
    polynomial does not depend on the grid (as long as 2K < m); only the sup
    scaling, taken over grid points, does.
    """
    K = int(spec.bandwidth)
    if spec.amplitude == 0 or K == 0:
        return grid.zeros()
    if 2 * K >= grid.m:
        raise ValidationError("bandwidth", f"2K < m = {grid.m}")
    rng = np.random.default_rng(spec.seed)
    modes = np.array(list(itertools.product(range(-K, K + 1), repeat=grid.dim)))
    coef = rng.standard_normal(len(modes)) + 1j * rng.standard_normal(len(modes))
    coef /= 1.0 + np.sum(modes.astype(float) ** 2, axis=1)
    spec_arr = np.zeros(grid.shape, dtype=complex)
    idx = tuple((modes % grid.m).T)
    np.add.at(spec_arr, idx, coef)
    spec_arr.flat[0] = 0.0
    vals = np.real(torus.ifftn(spec_arr))
    top = np.abs(vals).max()
    if top == 0:
        return grid.zeros()
    F = grid.field(vals * (spec.amplitude / top), "F")
    return normalize_F(F, bg)


def smooth_cutoff(t: np.ndarray) -> np.ndarray:
    """C-infinity step: 1 on [0, 1/2], 0 on [1, inf)."""
    u = np.clip(2.0 * np.asarray(t, dtype=float) - 1.0, 0.0, 1.0)

    def bump(s):
        out = np.zeros_like(s)
        pos = s > 0
        out[pos] = np.exp(-1.0 / s[pos])
        return out

    a = bump(1.0 - u)
    b = bump(u)
    return a / (a + b)


def torus_distance(grid: TorusGrid, center=()) -> np.ndarray:
    """Flat distance to ``center`` on the unit-period torus (nearest lattice translate)."""
    c = tuple(center) or (0.0,) * grid.dim
    if len(c) != grid.dim:
        raise ValidationError("center", f"{grid.dim} real coordinates")
    sq = 0.0
    for a in range(grid.dim):
        d = np.abs(grid.coords[a] - c[a]) % 1.0
        d = np.minimum(d, 1.0 - d)
        sq = sq + d ** 2
    return np.broadcast_to(np.sqrt(sq), grid.shape)


def cusp_F(spec: RhsSpec, grid: TorusGrid, bg: KahlerBackground) -> ScalarField:
    """A * chi(rho / r0) * (rho^2 + delta^2)^(beta / 2), normalized.

    Its gradient behaves like rho^(beta - 1) away from the mollified tip, so the
    W^{1,p} norm stays bounded as delta -> 0 exactly when p < 2n / (1 - beta).
    """
    if not 0.05 < spec.beta < 0.95:
        raise InvalidExponent(f"beta must lie in (0.05, 0.95), got {spec.beta}")
    delta = 2.0 * grid.h if spec.delta is None else float(spec.delta)
    if delta < grid.h * (1 - 1e-12):
        raise ConstraintViolated(f"delta = {delta:g} is below the grid spacing {grid.h:g}")
    if spec.amplitude == 0:
        return grid.zeros()
    rho = torus_distance(grid, spec.center)
    vals = spec.amplitude * smooth_cutoff(rho / spec.r0) * (rho ** 2 + delta ** 2) ** (spec.beta / 2)
    return normalize_F(grid.field(vals, "F"), bg)


def manufactured_F(phi_star: ScalarField, bg: KahlerBackground,
                   min_eig: float = 0.1) -> ScalarField:
    """F = log det(g + Hess phi*) - log det g, normalized.

    ``min_eig`` is the positivity margin demanded of g + Hess phi*.
    """
    state = PotentialState(project_zero_mean(phi_star, bg), bg)
    if state.min_eig < min_eig:
        raise NotPositive(f"g + Hess(phi*) has min eigenvalue {state.min_eig:.4g} < {min_eig}")
    return normalize_F(phi_star.grid.field(state.log_det_ratio, "F"), bg)


def manufactured_potential(spec: RhsSpec, grid: TorusGrid) -> ScalarField:
    """phi* = A * sum over ``spec.axes`` of cos(2 pi x_axis)."""
    vals = np.zeros(grid.shape)
    for a in spec.axes:
        if not 0 <= a < grid.dim:
            raise ValidationError("axes", f"real axis indices in [0, {grid.dim})")
        vals = vals + np.cos(2 * np.pi * grid.coords[a])
    return grid.field(spec.amplitude * vals, "phi_star")


def make_F(spec: RhsSpec, grid: TorusGrid, bg: KahlerBackground,
           min_eig: float = 0.1) -> ScalarField:
    spec.validate()
    if spec.kind == "smooth":
        return smooth_random_F(spec, grid, bg)
    if spec.kind == "cusp":
        return cusp_F(spec, grid, bg)
    return manufactured_F(manufactured_potential(spec, grid), bg, min_eig)


def w1p_norm(F: ScalarField, p: float, bg: KahlerBackground) -> float:
    """(||F||_p^p + || |grad F| ||_p^p)^(1/p) over dvol_g, |grad F|^2 = g^{k lbar} F_k F_lbar."""
    if not p >= 1:
        raise InvalidExponent(f"p must be >= 1, got {p}")
    grad = torus.holomorphic_gradient(F)
    gn = np.sqrt(grad.norm_sq(None if bg.flat else bg.inverse))
    w = None if bg.flat else bg.det
    if np.isinf(p):
        return max(F.max_abs(), float(gn.max()))
    a = torus.lp_norm(F.values, p, w)
    b = torus.lp_norm(gn, p, w)
    return float((a ** p + b ** p) ** (1.0 / p)) if max(a, b) > 0 else 0.0
