"""Flat complex torus C^n / (Z + iZ)^n: grids, fields and spectral calculus.

Real axes are ordered (x1, y1, x2, y2) and z^j = x^j + i y^j.  Every axis has
period 1, so the total volume is 1 and grid quadrature is a plain mean.

Two families of Fourier symbols are used:

* first-order derivatives zero the Nyquist mode, so the holomorphic and
  antiholomorphic gradients of a real field are exact conjugates;
* the mixed Hessian uses ``a_i(k) * b_j(k)`` built from the *unzeroed*
  symbols.  Its diagonal is the full spectral Laplacian (kernel = constants
  only) and ``sum det(Hess f)`` vanishes exactly on the grid, which keeps the
  discrete Monge-Ampere problem compatible.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.fft as sfft

from .errors import InvalidDimension, InvalidExponent, InvalidResolution

_MAX_M = {1: 512, 2: 48}
_FFT_WORKERS = 1


def set_fft_workers(n: int) -> None:
    """Number of threads scipy.fft may use for every transform."""
    global _FFT_WORKERS
    _FFT_WORKERS = max(1, int(n))


def fftn(a):
    return sfft.fftn(a, workers=_FFT_WORKERS)


def ifftn(a):
    return sfft.ifftn(a, workers=_FFT_WORKERS)


def rfftn(a):
    return sfft.rfftn(a, workers=_FFT_WORKERS)


def irfftn(a, shape):
    return sfft.irfftn(a, s=shape, workers=_FFT_WORKERS)


def _admissible_m(m: int) -> bool:
    # powers of two, or three times a power of two (24, 48 are used for n = 2)
    if m < 8:
        return False
    odd = m
    while odd % 2 == 0:
        odd //= 2
    return odd in (1, 3)


@dataclass(frozen=True, eq=False)
class TorusGrid:
    n: int
    m: int

    @property
    def dim(self) -> int:
        return 2 * self.n

    @property
    def shape(self) -> tuple:
        return (self.m,) * self.dim

    @property
    def size(self) -> int:
        return self.m ** self.dim

    @property
    def h(self) -> float:
        return 1.0 / self.m

    def __eq__(self, other):
        return isinstance(other, TorusGrid) and (self.n, self.m) == (other.n, other.m)

    def __hash__(self):
        return hash((self.n, self.m))

    def _axis(self, values, axis):
        shape = [1] * self.dim
        shape[axis] = self.m
        return np.asarray(values).reshape(shape)

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        return sfft.fftfreq(self.m, 1.0 / self.m)

    @cached_property
    def coords(self) -> tuple:
        """Broadcastable coordinate arrays, one per real axis."""
        x = np.arange(self.m) / self.m
        return tuple(self._axis(x, a) for a in range(self.dim))

    def x(self, j: int) -> np.ndarray:
        return self.coords[2 * (j - 1)]

    def y(self, j: int) -> np.ndarray:
        return self.coords[2 * (j - 1) + 1]

    @cached_property
    def _k(self):
        return tuple(self._axis(self.wavenumbers, a) for a in range(self.dim))

    @cached_property
    def _k0(self):
        k0 = self.wavenumbers.copy()
        k0[self.m // 2] = 0.0
        return tuple(self._axis(k0, a) for a in range(self.dim))

    @cached_property
    def d_real(self) -> tuple:
        """First-derivative symbols 2*pi*i*k per real axis, Nyquist zeroed."""
        return tuple(2j * np.pi * k for k in self._k0)

    @cached_property
    def d_hol(self) -> tuple:
        """Symbols of d/dz^j = (d/dx - i d/dy) / 2, Nyquist zeroed."""
        d = self.d_real
        return tuple(0.5 * (d[2 * j] - 1j * d[2 * j + 1]) for j in range(self.n))

    @cached_property
    def d_antihol(self) -> tuple:
        d = self.d_real
        return tuple(0.5 * (d[2 * j] + 1j * d[2 * j + 1]) for j in range(self.n))

    @cached_property
    def hess_symbols(self) -> dict:
        """Symbols of d^2/dz^i dzbar^j keyed by (i, j), 0-based, i <= j."""
        k = self._k
        a = [np.pi * (k[2 * j + 1] + 1j * k[2 * j]) for j in range(self.n)]
        b = [np.pi * (1j * k[2 * j] - k[2 * j + 1]) for j in range(self.n)]
        out = {}
        for i in range(self.n):
            for j in range(i, self.n):
                s = a[i] * b[j]
                out[i, j] = s.real if i == j else s
        return out

    @cached_property
    def real_hess_symbols(self) -> list:
        """Real, even symbols in half-spectrum layout, one per real Hessian component.

        Order: diagonal entries, then real and imaginary parts of each
        off-diagonal entry (i < j).  Used with :func:`rfftn` / :func:`irfftn`.
        """
        out = []
        for (i, j), s in self.hess_symbols.items():
            if i == j:
                out.append(((i, j, "re"), self.half(s)))
        for (i, j), s in self.hess_symbols.items():
            if i != j:
                out.append(((i, j, "re"), self.half(s.real)))
                out.append(((i, j, "im"), self.half(s.imag)))
        return out

    def half(self, sym) -> np.ndarray:
        """Restrict an even full-layout symbol to the rfftn half-spectrum layout."""
        sym = np.broadcast_to(sym, self.shape)
        return np.ascontiguousarray(sym[..., : self.m // 2 + 1])

    @cached_property
    def laplacian_symbol(self) -> np.ndarray:
        """Flat real Laplacian, sum over axes of -(2 pi k)^2 (Nyquist kept)."""
        return sum(-(2 * np.pi * k) ** 2 for k in self._k)

    @cached_property
    def inverse_complex_laplacian(self) -> np.ndarray:
        """Inverse symbol of trace(Hess) = Laplacian / 4; identity on the mean mode."""
        s = 0.25 * self.laplacian_symbol
        s = np.broadcast_to(s, self.shape).copy()
        s.flat[0] = 1.0
        inv = 1.0 / s
        return inv

    def field(self, values, name: str = "") -> "ScalarField":
        return ScalarField(self, values, name)

    def zeros(self) -> "ScalarField":
        return ScalarField(self, np.zeros(self.shape))


def make_grid(n: int, m: int) -> TorusGrid:
    """Build a torus grid with ``m`` samples per real axis."""
    if n not in (1, 2):
        raise InvalidDimension(f"complex dimension must be 1 or 2, got {n}")
    if not isinstance(m, (int, np.integer)) or not _admissible_m(int(m)) or m > _MAX_M[n]:
        raise InvalidResolution(
            f"m must be 2^a or 3*2^a with 8 <= m <= {_MAX_M[n]} for n={n}, got {m}"
        )
    return TorusGrid(int(n), int(m))


def _frozen(values, dtype):
    arr = np.array(values, dtype=dtype, copy=True)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: TorusGrid
    values: np.ndarray
    name: str = ""

    def __post_init__(self):
        vals = np.broadcast_to(np.asarray(self.values, dtype=float), self.grid.shape)
        if not np.all(np.isfinite(vals)):
            raise ValueError("scalar field contains non-finite values")
        object.__setattr__(self, "values", _frozen(vals, float))

    def with_values(self, values, name=None) -> "ScalarField":
        return ScalarField(self.grid, values, self.name if name is None else name)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))


@dataclass(frozen=True, eq=False)
class ComplexGradient:
    """Holomorphic derivatives phi_j, stacked along the first axis."""

    grid: TorusGrid
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values, complex))

    def conj(self) -> "ComplexGradient":
        return ComplexGradient(self.grid, np.conj(self.values))

    def norm_sq(self, g_inv=None) -> np.ndarray:
        """g^{k lbar} phi_k phi_lbar; identity metric when ``g_inv`` is None."""
        v = self.values
        if g_inv is None:
            return np.sum(np.abs(v) ** 2, axis=0)
        return np.real(np.einsum("k...,kl...,l...->...", np.conj(v), g_inv, v))


@dataclass(frozen=True, eq=False)
class HermitianField:
    """An n x n Hermitian matrix per grid point, shape (n, n, *grid.shape)."""

    grid: TorusGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        v = 0.5 * (v + np.conj(np.swapaxes(v, 0, 1)))
        object.__setattr__(self, "values", _frozen(v, complex))

    def trace(self) -> np.ndarray:
        return np.real(np.einsum("ii...->...", self.values))

    def __getitem__(self, ij):
        return self.values[ij]


def _spectrum(f) -> np.ndarray:
    vals = f.values if isinstance(f, ScalarField) else f
    return fftn(vals)


def holomorphic_gradient(f: ScalarField) -> ComplexGradient:
    fh = _spectrum(f)
    g = f.grid
    return ComplexGradient(g, np.stack([ifftn(fh * s) for s in g.d_hol]))


def antiholomorphic_gradient(f: ScalarField) -> ComplexGradient:
    fh = _spectrum(f)
    g = f.grid
    return ComplexGradient(g, np.stack([ifftn(fh * s) for s in g.d_antihol]))


def real_gradient(f: ScalarField) -> np.ndarray:
    """Real partial derivatives along (x1, y1, ...), shape (2n, *grid.shape)."""
    fh = _spectrum(f)
    return np.stack([np.real(ifftn(fh * s)) for s in f.grid.d_real])


def hessian_entries(grid: TorusGrid, fh: np.ndarray) -> dict:
    """Mixed Hessian entries from a precomputed spectrum ``fh``.

    Returns ``{(i, j): array}`` for i <= j; diagonal entries are real.
    """
    syms = grid.hess_symbols
    out = {}
    if grid.n == 1:
        out[0, 0] = np.real(ifftn(fh * syms[0, 0]))
        return out
    both = ifftn(fh * (syms[0, 0] + 1j * syms[1, 1]))
    out[0, 0] = both.real
    out[1, 1] = both.imag
    out[0, 1] = ifftn(fh * syms[0, 1])
    return out


def hessian_entries_real(grid: TorusGrid, x: np.ndarray) -> dict:
    """Same as :func:`hessian_entries` for a real array, via real transforms."""
    xh = rfftn(x)
    out = {}
    for (i, j, part), sym in grid.real_hess_symbols:
        v = irfftn(xh * sym, grid.shape)
        if i == j:
            out[i, j] = v
        elif part == "re":
            out[i, j] = v.astype(complex)
        else:
            out[i, j] = out[i, j] + 1j * v
    return out


def stack_hermitian(grid: TorusGrid, entries: dict) -> np.ndarray:
    n = grid.n
    out = np.empty((n, n) + grid.shape, dtype=complex)
    for i in range(n):
        for j in range(i, n):
            out[i, j] = entries[i, j]
            if i != j:
                out[j, i] = np.conj(entries[i, j])
    return out


def mixed_hessian(f: ScalarField) -> HermitianField:
    """f_{i jbar} = d^2 f / dz^i dzbar^j at every grid point."""
    g = f.grid
    return HermitianField(g, stack_hermitian(g, hessian_entries(g, _spectrum(f))))


def laplacian(f: ScalarField) -> np.ndarray:
    """Flat real Laplacian (sum of second derivatives along all 2n axes)."""
    return np.real(ifftn(_spectrum(f) * f.grid.laplacian_symbol))


def complex_laplacian(f: ScalarField) -> np.ndarray:
    """Flat Delta f = delta^{i jbar} f_{i jbar}, one quarter of the real Laplacian."""
    return 0.25 * laplacian(f)


def hessian_derivatives(grid: TorusGrid, fh: np.ndarray) -> tuple:
    """Third derivatives d_k f_{i jbar} and d_kbar f_{i jbar}.

    Both arrays have shape (n, n, n, *grid.shape) indexed [k, i, j].
    """
    n = grid.n
    syms = grid.hess_symbols
    full = {}
    for (i, j), s in syms.items():
        full[i, j] = s
        if i != j:
            full[j, i] = np.conj(s)
    dk = np.empty((n, n, n) + grid.shape, dtype=complex)
    dkb = np.empty_like(dk)
    for k in range(n):
        for i in range(n):
            for j in range(n):
                s = full[i, j]
                dk[k, i, j] = ifftn(fh * (grid.d_hol[k] * s))
                dkb[k, i, j] = ifftn(fh * (grid.d_antihol[k] * s))
    return dk, dkb


def hessian_second_derivatives(grid: TorusGrid, fh: np.ndarray) -> np.ndarray:
    """Fourth derivatives d_k d_lbar f_{i jbar}, shape (n, n, n, n, *shape) as [k, l, i, j]."""
    n = grid.n
    syms = grid.hess_symbols
    full = {}
    for (i, j), s in syms.items():
        full[i, j] = s
        if i != j:
            full[j, i] = np.conj(s)
    out = np.empty((n,) * 4 + grid.shape, dtype=complex)
    for k in range(n):
        for l in range(n):
            outer = full[k, l]
            for i in range(n):
                for j in range(n):
                    out[k, l, i, j] = ifftn(fh * (outer * full[i, j]))
    return out


def _values(f):
    return f.values if isinstance(f, ScalarField) else np.asarray(f)


def integrate(f, weight=None) -> float:
    """Grid quadrature h^{2n} * sum(f * weight); exact for band-limited data."""
    v = _values(f)
    if weight is not None:
        v = v * _values(weight)
    return float(np.mean(v))


def lp_norm(f, p: float, weight=None, normalize: bool = False) -> float:
    """(int |f|^p weight)^(1/p); ``p = inf`` gives the grid maximum of |f|.

    With ``normalize=True`` the weight is rescaled to unit mass first, which
    makes the norm nondecreasing in p.
    """
    if not p >= 1:
        raise InvalidExponent(f"p must be >= 1, got {p}")
    a = np.abs(_values(f))
    w = None if weight is None else np.broadcast_to(_values(weight), a.shape)
    if np.isinf(p):
        return float(a.max() if w is None else a[w > 0].max())
    top = a.max()
    if top == 0.0:
        return 0.0
    r = (a / top) ** p
    mass = 1.0
    if w is not None:
        r = r * w
        if normalize:
            mass = float(np.mean(w))
    return float(top * (np.mean(r) / mass) ** (1.0 / p))


def spectral_tail_fraction(f, cutoff: int) -> float:
    """Fraction of spectral amplitude (max coefficient) at |k|_inf >= cutoff."""
    v = _values(f)
    g_shape = v.shape
    fh = np.abs(fftn(v))
    m = g_shape[0]
    k = np.abs(sfft.fftfreq(m, 1.0 / m))
    mask = np.zeros(g_shape, dtype=bool)
    for a in range(v.ndim):
        shape = [1] * v.ndim
        shape[a] = m
        mask |= (k >= cutoff).reshape(shape)
    top = fh.max()
    if top == 0.0:
        return 0.0
    return float(fh[mask].max(initial=0.0) / top)


_MAGIC = "CMAFIELD"


def write_field(path, f: ScalarField, name: str | None = None) -> None:
    """Binary dump: one ASCII header line, then little-endian float64 values.

    Header: ``CMAFIELD 1 n=<n> m=<m> name=<name>\\n``.  Values follow in C
    (row-major) order over the axes (x1, y1, x2, y2).
    """
    label = name or f.name or "field"
    if any(c.isspace() for c in label):
        raise ValueError("field name must not contain whitespace")
    header = f"{_MAGIC} 1 n={f.grid.n} m={f.grid.m} name={label}\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes())


def read_field(path) -> ScalarField:
    data = Path(path).read_bytes()
    end = data.index(b"\n")
    parts = data[:end].decode("ascii").split()
    if len(parts) != 5 or parts[0] != _MAGIC or parts[1] != "1":
        raise ValueError(f"{path}: not a field file")
    meta = dict(p.split("=", 1) for p in parts[2:])
    grid = make_grid(int(meta["n"]), int(meta["m"]))
    vals = np.frombuffer(data[end + 1:], dtype="<f8")
    if vals.size != grid.size:
        raise ValueError(f"{path}: expected {grid.size} values, found {vals.size}")
    return ScalarField(grid, vals.reshape(grid.shape), meta["name"])
