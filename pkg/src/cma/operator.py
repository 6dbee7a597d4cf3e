"""The complex Monge-Ampere residual, its linearization and the background metric.

The equation solved on the torus is

    log det(g + phi_{i jbar}) - log det(g) = F - lam * phi,

with lam in {-1, 0, 1}.  For lam = 0, F must satisfy int e^F dvol_g = Vol and
phi is pinned by int phi dvol_g = 0.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import torus
from .errors import InvalidDimension, NotPositive
from .torus import HermitianField, ScalarField, TorusGrid

MIN_BACKGROUND_EIG = 0.1
ALLOWED_LAMBDA = (-1, 0, 1)


# -- pointwise n x n Hermitian algebra (n <= 2, closed forms) -----------------

def herm_det(G: dict, n: int) -> np.ndarray:
    if n == 1:
        return G[0, 0]
    return G[0, 0] * G[1, 1] - np.abs(G[0, 1]) ** 2


def herm_min_eig(G: dict, n: int) -> np.ndarray:
    if n == 1:
        return G[0, 0]
    half_tr = 0.5 * (G[0, 0] + G[1, 1])
    half_diff = 0.5 * (G[0, 0] - G[1, 1])
    return half_tr - np.sqrt(half_diff ** 2 + np.abs(G[0, 1]) ** 2)


def herm_inverse(G: dict, n: int, det=None) -> np.ndarray:
    """Matrix inverse as a full (n, n, *shape) complex array."""
    if det is None:
        det = herm_det(G, n)
    shape = np.shape(G[0, 0])
    out = np.empty((n, n) + shape, dtype=complex)
    if n == 1:
        out[0, 0] = 1.0 / G[0, 0]
        return out
    out[0, 0] = G[1, 1] / det
    out[1, 1] = G[0, 0] / det
    out[0, 1] = -G[0, 1] / det
    out[1, 0] = -np.conj(G[0, 1]) / det
    return out


def entries_of(values: np.ndarray) -> dict:
    """Upper-triangle dict view of an (n, n, ...) Hermitian array."""
    n = values.shape[0]
    out = {}
    for i in range(n):
        for j in range(i, n):
            out[i, j] = values[i, j].real if i == j else values[i, j]
    return out


# -- background -----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Curvature:
    tensor: np.ndarray  # R[i, j, k, l] = R_{i jbar k lbar}
    ricci: np.ndarray  # g^{i jbar} R_{i jbar k lbar}, shape (n, n, ...)
    frame_tensor: np.ndarray  # R in a g-orthonormal frame at every point
    bisec_min: np.ndarray  # min over orthonormal pairs of R(e, ebar, f, fbar) per point
    holo_min: np.ndarray  # min over unit e of R(e, ebar, e, ebar) per point
    inf_bisec: float
    B: float


class KahlerBackground:
    """Flat metric, or g = I + Hess(phi0) for a small periodic potential phi0."""

    def __init__(self, grid: TorusGrid, phi0: ScalarField | None = None):
        self.grid = grid
        if phi0 is None or not np.any(phi0.values):
            self.mode = "flat"
            self.phi0 = grid.zeros()
        else:
            if phi0.grid != grid:
                raise ValueError("phi0 lives on a different grid")
            self.mode = "perturbed"
            self.phi0 = phi0
        self._entries = self._metric_entries()
        eig = herm_min_eig(self._entries, grid.n)
        if float(np.min(eig)) < MIN_BACKGROUND_EIG:
            raise NotPositive(
                f"background metric min eigenvalue {float(np.min(eig)):.4g} < {MIN_BACKGROUND_EIG}"
            )
        if self.flat:
            self.B = 0.0
            self.inf_bisec = 0.0
            self.volume = 1.0
            self.curvature = None
        else:
            curv = compute_curvature(self)
            self.curvature = curv
            self.B = curv.B
            self.inf_bisec = curv.inf_bisec
            self.volume = float(np.mean(self.det))

    @property
    def flat(self) -> bool:
        return self.mode == "flat"

    def _metric_entries(self) -> dict:
        n = self.grid.n
        if self.mode == "flat":
            return {(i, j): (1.0 if i == j else 0.0) for i in range(n) for j in range(i, n)}
        hess = torus.hessian_entries(self.grid, torus.fftn(self.phi0.values))
        return {ij: (v + 1.0 if ij[0] == ij[1] else v) for ij, v in hess.items()}

    @property
    def entries(self) -> dict:
        return self._entries

    @cached_property
    def g(self) -> HermitianField:
        full = {k: np.broadcast_to(v, self.grid.shape) for k, v in self._entries.items()}
        return HermitianField(self.grid, torus.stack_hermitian(self.grid, full))

    @cached_property
    def det(self) -> np.ndarray:
        d = herm_det(self._entries, self.grid.n)
        return np.broadcast_to(np.asarray(d, dtype=float), self.grid.shape)

    @cached_property
    def log_det(self) -> np.ndarray:
        return np.log(self.det)

    @cached_property
    def inverse(self) -> np.ndarray:
        full = {k: np.broadcast_to(v, self.grid.shape) for k, v in self._entries.items()}
        return herm_inverse(full, self.grid.n)

    def dvol(self) -> np.ndarray:
        """Density of dvol_g against the flat grid measure."""
        return self.det


def flat_background(grid: TorusGrid) -> KahlerBackground:
    return KahlerBackground(grid)


def perturbed_background(phi0: ScalarField) -> KahlerBackground:
    return KahlerBackground(phi0.grid, phi0)


_PAULI = np.array([[[1, 0], [0, 1]], [[0, 1], [1, 0]],
                   [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]], dtype=complex)


def min_quadratic_on_sphere(c, b, K, iters: int = 100):
    """Lower bound (tight up to bisection accuracy) of c + b.x + x.K.x over |x| = 1.

    Vectorized over leading axes: c (N,), b (N, 3), K (N, 3, 3) symmetric.
    Uses the concave dual  d(mu) = c + mu - sum beta_i^2 / (4 (lam_i - mu)),
    mu < lam_min, whose maximum equals the constrained minimum; every value of
    d is a lower bound, so the result never overestimates the minimum.
    """
    lam, V = np.linalg.eigh(K)
    beta2 = np.einsum("nia,ni->na", V, b) ** 2
    lo = lam[:, 0] - 0.5 * np.sqrt(beta2.sum(axis=1)) - 1e-12
    hi = lam[:, 0].copy()

    def dprime(mu):
        gap = lam - mu[:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(beta2 > 0, beta2 / (4.0 * gap ** 2), 0.0)
        return 1.0 - t.sum(axis=1)

    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        up = dprime(mid) > 0
        lo = np.where(up, mid, lo)
        hi = np.where(up, hi, mid)
    gap = lam - lo[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(beta2 > 0, beta2 / (4.0 * gap), 0.0)
    return c + lo - t.sum(axis=1)


def _sphere_minima(Rf):
    """Minima of bisectional (orthonormal pairs) and holomorphic sectional curvature, n = 2.

    A unit vector e corresponds to the projector e e^H = (I + x.sigma) / 2 with
    x on the unit sphere; both curvatures are then quadratic in x.
    """
    T = np.real(np.einsum("nijkl,aij,bkl->nab", Rf, _PAULI, _PAULI))
    c = 0.25 * T[:, 0, 0]
    lin = T[:, 1:, 0]
    lin_t = T[:, 0, 1:]
    Q = T[:, 1:, 1:]
    Qs = 0.5 * (Q + np.swapaxes(Q, 1, 2))
    orth = min_quadratic_on_sphere(c, 0.25 * (lin - lin_t), -0.25 * Qs)
    holo = min_quadratic_on_sphere(c, 0.25 * (lin + lin_t), 0.25 * Qs)
    return orth, holo


def compute_curvature(bg: KahlerBackground) -> Curvature:
    """Curvature of g = I + Hess(phi0) and its frame-invariant lower bounds.

    R_{i jbar k lbar} = -d_k d_lbar g_{i jbar} + g^{p qbar} (d_k g_{i qbar})(d_lbar g_{p jbar}).
    The tensor is rewritten in a g-orthonormal frame at every point.  For
    n = 2, ``inf_bisec`` is the infimum over all orthonormal pairs (e, f) of
    R(e, ebar, f, fbar) and ``B`` the smallest B >= 0 with
    R(e, ebar, f, fbar) >= -B and R(e, ebar, e, ebar) >= -2B for unit e, f,
    i.e. the lower bound -B (g g + g g) tested on orthonormal and equal pairs.
    Both minimizations over the unit sphere are exact up to bisection
    tolerance and err on the safe (lower) side.  For n = 1 only R_{1 1bar 1 1bar}
    exists and it plays both roles.
    """
    grid = bg.grid
    n = grid.n
    if bg.flat:
        zeros = np.zeros((n,) * 4 + grid.shape)
        z2 = np.zeros(grid.shape)
        return Curvature(zeros, np.zeros((n, n) + grid.shape), zeros, z2, z2, 0.0, 0.0)
    fh = torus.fftn(bg.phi0.values)
    dk, dkb = torus.hessian_derivatives(grid, fh)
    d4 = torus.hessian_second_derivatives(grid, fh)  # [k, l, i, j]
    ginv = bg.inverse  # matrix inverse, g^{p qbar} = ginv[q, p]
    quad = np.einsum("qp...,kiq...,lpj...->ijkl...", ginv, dk, dkb)
    R = -np.transpose(d4, (2, 3, 0, 1) + tuple(range(4, 4 + grid.dim))) + quad
    ricci = np.einsum("ji...,ijkl...->kl...", ginv, R)

    # g-orthonormal frames: columns e_a with sum g_{i jbar} e_a^i conj(e_b^j) = delta_ab
    gmat = np.moveaxis(bg.g.values.reshape(n, n, -1), -1, 0)
    w, U = np.linalg.eigh(gmat)
    E = np.conj(U) / np.sqrt(w)[:, None, :]  # (N, i, a)
    Rflat = np.moveaxis(R.reshape((n,) * 4 + (-1,)), -1, 0)
    Rf = np.einsum("nijkl,nia,njb,nkc,nld->nabcd", Rflat, E, np.conj(E), E, np.conj(E))
    if n == 1:
        orth = holo = np.real(Rf[:, 0, 0, 0, 0])
        inf_bisec = float(orth.min())
        B = max(0.0, -0.5 * float(holo.min()))
    else:
        orth, holo = _sphere_minima(Rf)
        inf_bisec = float(orth.min())
        B = max(0.0, -float(orth.min()), -0.5 * float(holo.min()))
    frame = np.moveaxis(Rf, 0, -1).reshape((n,) * 4 + grid.shape)
    return Curvature(R, ricci, frame, orth.reshape(grid.shape), holo.reshape(grid.shape),
                     inf_bisec, B)


# -- potentials -----------------------------------------------------------------

class PotentialState:
    """A Kahler potential phi with cached g_phi = g + phi_{i jbar} data."""

    def __init__(self, phi: ScalarField, bg: KahlerBackground, check_mean: bool = True):
        if phi.grid != bg.grid:
            raise ValueError("potential and background live on different grids")
        self.phi = phi
        self.bg = bg
        self.grid = bg.grid
        if check_mean:
            mean = integrate_g(phi.values, bg)
            if abs(mean) > 1e-12 * max(1.0, phi.max_abs()):
                raise ValueError(f"potential has nonzero g-mean {mean:.3e}")
        n = self.grid.n
        self._hess = torus.hessian_entries(self.grid, torus.fftn(phi.values))
        bgE = bg.entries
        self.G = {ij: self._hess[ij] + bgE[ij] for ij in self._hess}
        self.det = herm_det(self.G, n)
        self.min_eig_field = herm_min_eig(self.G, n)
        self.min_eig = float(self.min_eig_field.min())

    @cached_property
    def hess(self) -> HermitianField:
        return HermitianField(self.grid, torus.stack_hermitian(self.grid, self._hess))

    @property
    def hess_entries(self) -> dict:
        return self._hess

    def require_positive(self) -> None:
        if not self.min_eig > 0:
            raise NotPositive(f"g + Hess(phi) has min eigenvalue {self.min_eig:.4g} <= 0")

    @cached_property
    def log_det_ratio(self) -> np.ndarray:
        self.require_positive()
        return np.log(self.det) - self.bg.log_det

    @cached_property
    def inverse(self) -> np.ndarray:
        """Matrix inverse of g_phi, shape (n, n, *grid.shape)."""
        self.require_positive()
        return herm_inverse(self.G, self.grid.n, self.det)

    @cached_property
    def _lin_coeffs(self):
        self.require_positive()
        if self.grid.n == 1:
            return (1.0 / self.G[0, 0],)
        d = self.det
        return (self.G[1, 1] / d, self.G[0, 0] / d, np.conj(self.G[0, 1]) / d)

    def laplace_phi(self, psi: np.ndarray) -> np.ndarray:
        """Delta_phi psi = g_phi^{i jbar} psi_{i jbar} for a real array psi."""
        h = torus.hessian_entries_real(self.grid, psi)
        c = self._lin_coeffs
        if self.grid.n == 1:
            return c[0] * h[0, 0]
        return c[0] * h[0, 0] + c[1] * h[1, 1] - 2.0 * np.real(c[2] * h[0, 1])

    def trace_g(self) -> np.ndarray:
        """n + Delta phi = g^{i jbar}(g + phi)_{i jbar}."""
        if self.bg.flat:
            return sum(self.G[i, i] for i in range(self.grid.n))
        ginv = self.bg.inverse
        Gfull = torus.stack_hermitian(self.grid, self.G)
        return np.real(np.einsum("ij...,ji...->...", ginv, Gfull))


def integrate_g(values, bg: KahlerBackground) -> float:
    """int f dvol_g on the grid."""
    if bg.flat:
        return float(np.mean(values))
    return float(np.mean(values * bg.det))


def make_state(phi: ScalarField, bg: KahlerBackground, lam: int = 0) -> PotentialState:
    """Project (for lam = 0) and wrap phi; raise NotPositive if g_phi degenerates."""
    if lam == 0:
        phi = project_zero_mean(phi, bg)
    state = PotentialState(phi, bg, check_mean=(lam == 0))
    state.require_positive()
    return state


def zero_state(bg: KahlerBackground) -> PotentialState:
    return PotentialState(bg.grid.zeros(), bg)


def _check_lambda(lam):
    if lam not in ALLOWED_LAMBDA:
        raise ValueError(f"lambda must be one of {ALLOWED_LAMBDA}, got {lam}")


def residual(state: PotentialState, F: ScalarField, bg: KahlerBackground | None = None,
             lam: int = 0) -> ScalarField:
    """log det(g + phi_{i jbar}) - log det g - F + lam * phi, pointwise."""
    _check_lambda(lam)
    r = state.log_det_ratio - F.values
    if lam:
        r = r + lam * state.phi.values
    return state.grid.field(r, "residual")


def linearized_apply(state: PotentialState, psi: ScalarField, bg: KahlerBackground | None = None,
                     lam: int = 0) -> ScalarField:
    """Frechet derivative of :func:`residual` at ``state`` applied to psi."""
    _check_lambda(lam)
    out = state.laplace_phi(psi.values)
    if lam:
        out = out + lam * psi.values
    return state.grid.field(out, "linearized")


def normalize_F(F: ScalarField, bg: KahlerBackground) -> ScalarField:
    """Shift F by a constant so that int e^F dvol_g = Vol."""
    v = F.values
    top = v.max()
    mass = integrate_g(np.exp(v - top), bg)
    c = np.log(bg.volume) - np.log(mass) - top
    return F.with_values(v + c)


def project_zero_mean(phi: ScalarField, bg: KahlerBackground) -> ScalarField:
    mean = integrate_g(phi.values, bg) / bg.volume
    return phi.with_values(phi.values - mean)


def volume_form_phi(state: PotentialState, F: ScalarField, check: float | None = None) -> np.ndarray:
    """Density e^F det g of dvol_phi against the flat grid measure.

    With ``check`` set, also asserts that det(g_phi)/det(g) and e^{residual + F}
    agree to that tolerance (a pure consistency check on the cached data).
    """
    w = np.exp(F.values) * state.bg.det
    if check is not None:
        ratio = state.det / state.bg.det
        recon = np.exp(residual(state, F).values + F.values)
        err = float(np.max(np.abs(ratio - recon) / np.maximum(ratio, 1e-300)))
        if err > check:
            raise AssertionError(f"volume form mismatch {err:.3e}")
    return w


def complex_dimension_at_least(grid: TorusGrid, n: int, what: str) -> None:
    if grid.n < n:
        raise InvalidDimension(f"{what} requires complex dimension >= {n}")
