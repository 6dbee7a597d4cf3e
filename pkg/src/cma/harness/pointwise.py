"""Pointwise algebraic inequalities behind the gradient and Laplacian estimates.

All checks work in a frame where g = I and phi_{i jbar} = diag(lambda_i).
Single-sample functions return plain floats; the ``*_batch`` variants are
vectorized over a leading sample axis and back the randomized suites.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from ..errors import ConstraintViolated, InvalidDimension

SOS_REL_TOL = 1e-10
MARGIN_TOL = -1e-12


@dataclass
class InequalitySample:
    n: int
    lam: np.ndarray  # eigenvalues lambda_i > -1
    grad: np.ndarray  # phi_i, complex
    d2: np.ndarray  # phi_{k i}, complex n x n
    a1: float  # A'

    def __post_init__(self):
        self.lam = np.asarray(self.lam, dtype=float)
        self.grad = np.asarray(self.grad, dtype=complex)
        self.d2 = np.asarray(self.d2, dtype=complex)
        if self.lam.shape != (self.n,) or self.grad.shape != (self.n,) or self.d2.shape != (self.n, self.n):
            raise ValueError("sample arrays do not match the dimension n")
        if not np.all(1.0 + self.lam > 0):
            raise ConstraintViolated("every 1 + lambda_i must be positive")


# -- sum of squares identity ------------------------------------------------------

def sos_batch(lam, grad, d2, a1):
    """Expanded and factored forms of sum_{k,i} |A' phi_i phi_k - phi_{ki}|^2 / (1 + lambda_i).

    Shapes: lam (N, n), grad (N, n), d2 (N, n, n) indexed [k, i], a1 (N,).
    Returns ``(expanded, factored, scale)`` where ``scale`` is the sum of the
    magnitudes of all expanded terms (the yardstick for relative error).
    """
    w = 1.0 / (1.0 + lam)  # (N, i)
    a = a1[:, None, None]
    pp = grad[:, :, None] * grad[:, None, :]  # [k, i] -> phi_k phi_i
    abs_g2 = np.abs(grad) ** 2
    t1 = (a1 ** 2)[:, None, None] * abs_g2[:, None, :] * abs_g2[:, :, None]
    t2 = np.abs(d2) ** 2
    t3 = a * 2.0 * np.real(pp * np.conj(d2))
    wk = w[:, None, :]  # weight indexed by i (last axis)
    expanded = np.sum(wk * (t1 + t2 - t3), axis=(1, 2))
    factored = np.sum(wk * np.abs(a * pp - d2) ** 2, axis=(1, 2))
    scale = np.sum(wk * (np.abs(t1) + np.abs(t2) + np.abs(t3)), axis=(1, 2))
    return expanded, factored, scale


def check_sos(sample: InequalitySample) -> tuple:
    """(expanded, factored, margin) for one sample; margin is the factored value."""
    e, f, s = sos_batch(sample.lam[None], sample.grad[None], sample.d2[None],
                        np.array([sample.a1], dtype=float))
    rel = abs(e[0] - f[0]) / max(s[0], np.finfo(float).tiny)
    if rel > SOS_REL_TOL:
        raise AssertionError(f"expansion and factorization differ by {rel:.2e} (relative)")
    if f[0] < MARGIN_TOL:
        raise AssertionError(f"factored form is negative: {f[0]:.3e}")
    return float(e[0]), float(f[0]), float(f[0])


# -- arithmetic-geometric mean bound ---------------------------------------------

def amgm_batch(lam):
    """sum 1/(1+lambda_i) - (n + sum lambda)^{1/(n-1)} exp(-F/(n-1)),  e^F = prod(1 + lambda_i)."""
    lam = np.asarray(lam, dtype=float)
    n = lam.shape[-1]
    if n < 2:
        raise InvalidDimension("the trace/determinant bound needs n >= 2")
    one = 1.0 + lam
    lhs = np.sum(1.0 / one, axis=-1)
    # (n + sum lambda) e^{-F} with e^F = prod(1 + lambda); direct products keep rounding small
    rhs = (np.sum(one, axis=-1) / np.prod(one, axis=-1)) ** (1.0 / (n - 1))
    return lhs - rhs


def check_amgm(lam) -> float:
    lam = np.asarray(lam, dtype=float)
    if lam.ndim != 1:
        raise ValueError("expected one eigenvalue tuple")
    if not np.all(1.0 + lam > 0):
        raise ConstraintViolated("every 1 + lambda_i must be positive")
    margin = float(amgm_batch(lam[None])[0])
    if margin < MARGIN_TOL:
        raise AssertionError(f"trace/determinant bound violated: margin {margin:.3e}")
    return margin


# -- elementary helper inequality --------------------------------------------------

def elementary_batch(x, y, s, n: int):
    """x/y + s^{1/(n-1)} - n (n-1)^{(1-n)/n} x^{1/n}."""
    if n < 2:
        raise InvalidDimension("the helper inequality needs n >= 2")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    s = np.asarray(s, dtype=float)
    if np.any(y > s):
        raise ConstraintViolated("helper inequality requires y <= s")
    if np.any(y <= 0) or np.any(x < 0):
        raise ConstraintViolated("helper inequality requires x >= 0 and y > 0")
    return x / y + s ** (1.0 / (n - 1)) - n * (n - 1) ** ((1.0 - n) / n) * x ** (1.0 / n)


def check_elementary(x: float, y: float, s: float, n: int) -> float:
    margin = float(elementary_batch(x, y, s, n))
    if margin < MARGIN_TOL:
        raise AssertionError(f"helper inequality violated: margin {margin:.3e}")
    return margin


def elementary_equality_point(s: float, n: int) -> tuple:
    """(x, y, s) with y = s and x = s^{n/(n-1)} / (n-1), where the helper inequality is an equality."""
    x = s ** (n / (n - 1)) / (n - 1)
    return x, s, s


# -- Young's inequality constant ---------------------------------------------------

def young_closed_form(eps: float, n: int) -> float:
    return ((n - 1) / (n * eps)) ** (n - 1) / n


def young_constant(eps: float, n: int) -> float:
    """max_{s >= 0} (s - eps s^{n/(n-1)}) by bounded scalar maximization.

    The maximand is negative beyond s = eps^{-(n-1)}, so the search runs on
    that bracket (rescaled to [0, 1]).  Cross-checked against the closed form.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    if n < 2:
        raise InvalidDimension("Young constant needs n >= 2")
    top = eps ** (-(n - 1))
    q = n / (n - 1)

    def neg(t):
        s = t * top
        return -(s - eps * s ** q) / top

    res = minimize_scalar(neg, bounds=(0.0, 1.0), method="bounded",
                          options={"xatol": 1e-12, "maxiter": 500})
    value = -res.fun * top
    closed = young_closed_form(eps, n)
    if abs(value - closed) > 1e-6 * closed:
        raise AssertionError(f"Young constant {value} disagrees with closed form {closed}")
    return float(value)


# -- randomized suites ---------------------------------------------------------------

def _log_uniform_lambda(rng, size):
    # 1 + lambda log-uniform on (0.01, 1001), i.e. lambda in (-0.99, 1000)
    return np.exp(rng.uniform(np.log(0.01), np.log(1001.0), size)) - 1.0


def _blocks(count: int, block: int):
    out = []
    start = 0
    while start < count:
        out.append(min(block, count - start))
        start += block
    return out


def _run_blocks(fn, seed: int, count: int, threads: int, block: int = 10000):
    sizes = _blocks(count, block)
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))
    jobs = [(np.random.default_rng(s), k) for s, k in zip(seeds, sizes)]
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            return list(ex.map(lambda a: fn(*a), jobs))
    return [fn(*a) for a in jobs]


def sos_suite(n: int, count: int, seed: int = 0, threads: int = 1) -> dict:
    """Random samples: lambda log-uniform, gradients and symmetric phi_{ki} complex Gaussian,
    A' uniform on [1, 5]."""
    def block(rng, k):
        lam = _log_uniform_lambda(rng, (k, n))
        grad = rng.standard_normal((k, n)) + 1j * rng.standard_normal((k, n))
        d2 = rng.standard_normal((k, n, n)) + 1j * rng.standard_normal((k, n, n))
        d2 = 0.5 * (d2 + np.swapaxes(d2, 1, 2))
        a1 = rng.uniform(1.0, 5.0, k)
        e, f, s = sos_batch(lam, grad, d2, a1)
        rel = np.abs(e - f) / s
        return float(rel.max()), float(f.min())

    res = _run_blocks(block, seed, count, threads)
    rel = max(r[0] for r in res)
    low = min(r[1] for r in res)
    return {"n": n, "samples": count, "max_rel_error": rel, "min_margin": low,
            "passed": bool(rel <= SOS_REL_TOL and low >= MARGIN_TOL)}


def amgm_suite(n: int, count: int, seed: int = 0, threads: int = 1) -> dict:
    def block(rng, k):
        return float(amgm_batch(_log_uniform_lambda(rng, (k, n))).min())

    low = min(_run_blocks(block, seed, count, threads))
    return {"n": n, "samples": count, "min_margin": low, "passed": bool(low >= MARGIN_TOL)}


def elementary_suite(n: int, count: int, seed: int = 0, threads: int = 1) -> dict:
    """s log-uniform on (1e-3, 1e3), y uniform on (0, s], x log-uniform on (1e-6, 1e6)."""
    def block(rng, k):
        s = np.exp(rng.uniform(np.log(1e-3), np.log(1e3), k))
        y = s * (1.0 - rng.uniform(0.0, 1.0, k))  # (0, s]
        x = np.exp(rng.uniform(np.log(1e-6), np.log(1e6), k))
        return float(elementary_batch(x, y, s, n).min())

    low = min(_run_blocks(block, seed, count, threads))
    return {"n": n, "samples": count, "min_margin": low, "passed": bool(low >= MARGIN_TOL)}
