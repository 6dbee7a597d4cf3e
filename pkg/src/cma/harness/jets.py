"""Pointwise derivative data of a solved potential, assembled by the chain rule.

Every derivative of u = e^{f(phi)} s and of F = log det g_phi - log det g is
built from spectral derivatives of phi and phi0 (up to fourth order), so the
pointwise identities behind the barrier inequalities hold to rounding error
even where F itself is poorly resolved on the grid.

Matrix arrays have shape (n, n, *grid.shape) with M[i, j] ~ (i, jbar).
"""
from __future__ import annotations

from functools import cached_property

import numpy as np

from .. import torus
from ..operator import PotentialState


def mm(*mats):
    out = mats[0]
    for b in mats[1:]:
        out = np.einsum("ij...,jk...->ik...", out, b)
    return out


def tr(a):
    return np.einsum("ii...->...", a)


def hermitian_inverse(a):
    n = a.shape[0]
    if n == 1:
        return 1.0 / a
    det = a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
    out = np.empty_like(a)
    out[0, 0] = a[1, 1] / det
    out[1, 1] = a[0, 0] / det
    out[0, 1] = -a[0, 1] / det
    out[1, 0] = -a[1, 0] / det
    return out


def _full_hess_symbols(grid):
    out = {}
    for (i, j), s in grid.hess_symbols.items():
        out[i, j] = s
        if i != j:
            out[j, i] = np.conj(s)
    return out


class Jets:
    """Spectral derivatives of one real potential up to the order needed."""

    def __init__(self, grid, values):
        self.grid = grid
        self.n = grid.n
        self.fh = torus.fftn(values)

    def _ifft(self, sym):
        return torus.ifftn(self.fh * sym)

    @cached_property
    def d1(self):
        """phi_k, shape (n, ...)."""
        return np.stack([self._ifft(s) for s in self.grid.d_hol])

    @cached_property
    def hess(self):
        """phi_{i jbar}."""
        full = _full_hess_symbols(self.grid)
        n = self.n
        out = np.empty((n, n) + self.grid.shape, dtype=complex)
        for (i, j), s in full.items():
            out[i, j] = self._ifft(s)
        return out

    @cached_property
    def hol_hess(self):
        """phi_{k i} (both holomorphic)."""
        n = self.n
        d = self.grid.d_hol
        out = np.empty((n, n) + self.grid.shape, dtype=complex)
        for k in range(n):
            for i in range(k, n):
                out[k, i] = self._ifft(d[k] * d[i])
                out[i, k] = out[k, i]
        return out

    @cached_property
    def third(self):
        """(d_k phi_{i jbar}, d_kbar phi_{i jbar}), each indexed [k, i, j]."""
        return torus.hessian_derivatives(self.grid, self.fh)

    @cached_property
    def fourth(self):
        """d_k d_lbar phi_{i jbar}, indexed [k, l, i, j]."""
        return torus.hessian_second_derivatives(self.grid, self.fh)


class PointwiseData:
    """Metric, F and barrier ingredients at every grid point of a state.

    ``lam`` enters only through F = log det(g_phi)/det(g) + lam * phi.
    """

    def __init__(self, state: PotentialState, lam: int = 0):
        self.state = state
        self.grid = state.grid
        self.n = state.grid.n
        self.lam = lam
        bg = state.bg
        self.flat = bg.flat
        self.phi = state.phi.values
        self.jp = Jets(self.grid, self.phi)
        self.j0 = None if self.flat else Jets(self.grid, bg.phi0.values)
        n = self.n
        eye = np.eye(n).reshape((n, n) + (1,) * self.grid.dim)
        self.g = eye if self.flat else bg.g.values
        self.P = eye if self.flat else hermitian_inverse(self.g)  # g^{-1}
        self.G = self.g + self.jp.hess
        self.Ginv = hermitian_inverse(self.G)

    # -- metric quantities -------------------------------------------------------

    @cached_property
    def dg(self):
        """(d_k g, d_kbar g, d_k d_lbar g), or None on the flat background."""
        if self.flat:
            return None
        t, tb = self.j0.third
        return t, tb, self.j0.fourth

    @cached_property
    def dG(self):
        t, tb = self.jp.third
        e = self.jp.fourth
        if self.flat:
            return t, tb, e
        t0, tb0, e0 = self.dg
        return t + t0, tb + tb0, e + e0

    def pair(self, a, b):
        """g_phi^{i jbar} a_i conj(b_j) for holomorphic derivative vectors a, b."""
        return np.einsum("ji...,i...,j...->...", self.Ginv, a, np.conj(b))

    def pair_g(self, a, b):
        return np.einsum("ji...,i...,j...->...", np.broadcast_to(self.P, self.G.shape), a, np.conj(b))

    @cached_property
    def n_plus_lap(self):
        """n + Delta phi = tr(g^{-1} g_phi)."""
        return np.real(tr(mm(self.P, self.G))) if not self.flat else np.real(tr(self.G))

    @cached_property
    def trace_inv(self):
        """g_phi^{i jbar} g_{i jbar} = tr(g_phi^{-1} g)."""
        return np.real(tr(mm(self.Ginv, self.g)))

    @cached_property
    def lap_phi_phi(self):
        """Delta_phi phi = n - tr(g_phi^{-1} g)."""
        return self.n - self.trace_inv

    @cached_property
    def grad_sq(self):
        """|grad phi|^2 = g^{k lbar} phi_k phi_lbar."""
        return np.real(self.pair_g(self.jp.d1, self.jp.d1))

    @cached_property
    def grad_sq_phi(self):
        """g_phi^{k lbar} phi_k phi_lbar."""
        return np.real(self.pair(self.jp.d1, self.jp.d1))

    # -- F from the equation --------------------------------------------------------

    @cached_property
    def F_tilde(self):
        """log det g_phi - log det g (the part of F fixed by the metric)."""
        return self.state.log_det_ratio

    @cached_property
    def F(self):
        return self.F_tilde + self.lam * self.phi

    @cached_property
    def F_d1(self):
        dG, dGb, _ = self.dG
        n = self.n
        out = np.stack([tr(mm(self.Ginv, dG[k])) for k in range(n)])
        if not self.flat:
            dg, _, _ = self.dg
            out = out - np.stack([tr(mm(self.P, dg[k])) for k in range(n)])
        if self.lam:
            out = out + self.lam * self.jp.d1
        return out

    @cached_property
    def F_hess(self):
        """F_{k lbar}."""
        dG, dGb, EG = self.dG
        n = self.n
        out = np.empty((n, n) + self.grid.shape, dtype=complex)
        for k in range(n):
            for l in range(n):
                v = tr(mm(self.Ginv, EG[k, l])) - tr(mm(self.Ginv, dGb[l], self.Ginv, dG[k]))
                if not self.flat:
                    dg, dgb, Eg = self.dg
                    v = v - tr(mm(self.P, Eg[k, l])) + tr(mm(self.P, dgb[l], self.P, dg[k]))
                out[k, l] = v
        if self.lam:
            out = out + self.lam * self.jp.hess
        return out

    @cached_property
    def lap_F(self):
        """Delta F = g^{k lbar} F_{k lbar}."""
        return np.real(tr(mm(self.P, self.F_hess))) if not self.flat else np.real(tr(self.F_hess))

    @cached_property
    def grad_F(self):
        """|grad F| with respect to g."""
        return np.sqrt(np.maximum(np.real(self.pair_g(self.F_d1, self.F_d1)), 0.0))

    # -- scalar building blocks for the barriers -------------------------------------

    def n_plus_lap_derivs(self):
        """(w_k, w_{k lbar}) for w = tr(g^{-1} g_phi)."""
        dG, dGb, EG = self.dG
        n = self.n
        wk = np.stack([tr(mm(self.P, dG[k])) for k in range(n)]) if not self.flat else \
            np.stack([tr(dG[k]) for k in range(n)])
        wkl = np.empty((n, n) + self.grid.shape, dtype=complex)
        for k in range(n):
            for l in range(n):
                wkl[k, l] = tr(EG[k, l]) if self.flat else tr(mm(self.P, EG[k, l]))
        if not self.flat:
            P, G = self.P, self.G
            dg, dgb, Eg = self.dg
            for k in range(n):
                wk[k] = wk[k] - tr(mm(P, dg[k], P, G))
                for l in range(n):
                    wkl[k, l] += (
                        -tr(mm(P, dgb[l], P, dG[k])) - tr(mm(P, dg[k], P, dGb[l]))
                        + tr(mm(P, dgb[l], P, dg[k], P, G)) + tr(mm(P, dg[k], P, dgb[l], P, G))
                        - tr(mm(P, Eg[k, l], P, G))
                    )
        return wk, wkl

    def grad_sq_derivs(self):
        """(s_i, s_{i jbar}) for s = |grad phi|^2 = sum conj(phi_l) (g^{-1})_{lk} phi_k."""
        jp = self.jp
        v = jp.d1
        vb = np.conj(v)
        H = jp.hess
        Q = jp.hol_hess
        t, tb = jp.third
        n = self.n
        P = np.broadcast_to(self.P, (n, n) + self.grid.shape)
        # d_i conj(phi_l) = phi_{i lbar};  d_jbar conj(phi_l) = conj(phi_{l j})
        A1 = H  # [i, l]
        A2 = np.conj(np.swapaxes(Q, 0, 1))  # [j, l] = conj(Q[l, j])
        A3 = np.swapaxes(tb, 0, 1)  # [i, j, l] = tb[j, i, l]
        # d_i phi_k = Q[k, i]; d_jbar phi_k = H[k, j]; d_i d_jbar phi_k = t[i, k, j]
        B1 = np.swapaxes(Q, 0, 1)  # [i, k]
        B2 = np.swapaxes(H, 0, 1)  # [j, k]
        B3 = np.swapaxes(t, 1, 2)  # [i, j, k]
        e = np.einsum
        si = e("il...,lk...,k...->i...", A1, P, v) + e("l...,lk...,ik...->i...", vb, P, B1)
        S = (e("ijl...,lk...,k...->ij...", A3, P, v)
             + e("l...,lk...,ijk...->ij...", vb, P, B3)
             + e("il...,lk...,jk...->ij...", A1, P, B2)
             + e("jl...,lk...,ik...->ij...", A2, P, B1))
        if not self.flat:
            dg, dgb, Eg = self.dg
            Pd = np.stack([-mm(self.P, dg[i], self.P) for i in range(n)])
            Pdb = np.stack([-mm(self.P, dgb[j], self.P) for j in range(n)])
            Pdd = np.empty((n, n, n, n) + self.grid.shape, dtype=complex)
            for i in range(n):
                for j in range(n):
                    Pdd[i, j] = (mm(self.P, dgb[j], self.P, dg[i], self.P)
                                 + mm(self.P, dg[i], self.P, dgb[j], self.P)
                                 - mm(self.P, Eg[i, j], self.P))
            si = si + e("l...,ilk...,k...->i...", vb, Pd, v)
            S = S + (e("l...,ijlk...,k...->ij...", vb, Pdd, v)
                     + e("il...,jlk...,k...->ij...", A1, Pdb, v)
                     + e("jl...,ilk...,k...->ij...", A2, Pd, v)
                     + e("l...,ilk...,jk...->ij...", vb, Pd, B2)
                     + e("l...,jlk...,ik...->ij...", vb, Pdb, B1))
        return si, S

    def lap_phi_of_product(self, a1: float, a2, s, s_d1, s_hess):
        """Delta_phi (e^f s) / e^f for f = -A(phi) with A' = a1 (array) and A'' = a2.

        Uses Delta_phi(e^f s) = e^f [Delta_phi s + s (Delta_phi f + |df|^2_phi)
        + 2 Re <df, ds>_phi].
        """
        v = self.jp.d1
        f_d1 = -a1 * v
        lap_f = -a1 * self.lap_phi_phi - a2 * self.grad_sq_phi
        lap_s = np.real(tr(mm(self.Ginv, s_hess)))
        cross = 2.0 * np.real(self.pair(f_d1, s_d1))
        return lap_s + s * (lap_f + np.real(self.pair(f_d1, f_d1))) + cross
