import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cma import torus
from cma.errors import InvalidDimension, InvalidExponent, InvalidResolution


def test_make_grid_sizes():
    g = torus.make_grid(1, 256)
    assert g.size == 65536 and g.h == 1 / 256
    g2 = torus.make_grid(2, 16)
    assert g2.size == 16 ** 4 and g2.dim == 4


@pytest.mark.parametrize("n,m,err", [(3, 16, InvalidDimension), (0, 16, InvalidDimension),
                                     (1, 4, InvalidResolution), (1, 20, InvalidResolution),
                                     (2, 64, InvalidResolution), (1, 1024, InvalidResolution)])
def test_make_grid_rejects(n, m, err):
    with pytest.raises(err):
        torus.make_grid(n, m)


def test_holomorphic_gradient_oracles():
    g = torus.make_grid(2, 16)
    x1, y1 = g.x(1), g.y(1)
    assert np.allclose(torus.holomorphic_gradient(g.field(np.full(g.shape, 3.0))).values, 0)
    grad = torus.holomorphic_gradient(g.field(np.cos(2 * np.pi * x1) + 0 * x1)).values
    assert np.allclose(grad[0], -np.pi * np.sin(2 * np.pi * x1), atol=1e-12)
    assert np.allclose(grad[1], 0, atol=1e-12)
    grad = torus.holomorphic_gradient(g.field(np.sin(2 * np.pi * y1) + 0 * x1)).values
    assert np.allclose(grad[0], -1j * np.pi * np.cos(2 * np.pi * y1), atol=1e-12)


def test_antiholomorphic_is_conjugate():
    g = torus.make_grid(2, 8)
    f = g.field(np.random.default_rng(0).standard_normal(g.shape))
    a = torus.holomorphic_gradient(f).conj().values
    b = torus.antiholomorphic_gradient(f).values
    assert np.array_equal(a, b)


def test_mixed_hessian_oracles():
    g = torus.make_grid(2, 16)
    x1, y2 = g.x(1), g.y(2)
    H = torus.mixed_hessian(g.field(np.full(g.shape, 2.0))).values
    assert np.allclose(H, 0)
    H = torus.mixed_hessian(g.field(np.cos(2 * np.pi * x1) + 0 * y2)).values
    assert np.allclose(H[0, 0], -np.pi ** 2 * np.cos(2 * np.pi * x1), atol=1e-10)
    assert np.allclose(H[0, 1], 0, atol=1e-10) and np.allclose(H[1, 1], 0, atol=1e-10)
    # f = sin(2 pi x1) sin(2 pi y2): f_{1 2bar} = (1/4)(d_x1)(i d_y2) f
    f = np.sin(2 * np.pi * x1) * np.sin(2 * np.pi * y2)
    H = torus.mixed_hessian(g.field(f)).values
    oracle = 0.25 * 1j * (2 * np.pi) ** 2 * np.cos(2 * np.pi * x1) * np.cos(2 * np.pi * y2)
    assert np.allclose(H[0, 1], oracle, atol=1e-10)
    assert np.allclose(H[1, 0], np.conj(oracle), atol=1e-10)


def test_trace_is_quarter_laplacian_and_integrates_to_zero():
    g = torus.make_grid(2, 8)
    f = g.field(np.random.default_rng(1).standard_normal(g.shape))
    tr = torus.mixed_hessian(f).trace()
    assert np.allclose(tr, 0.25 * torus.laplacian(f), atol=1e-10 * np.abs(tr).max())
    assert abs(torus.integrate(tr)) <= 1e-10 * f.max_abs()


def test_integrate_and_lp_norm_oracles():
    g = torus.make_grid(1, 64)
    c = np.cos(2 * np.pi * g.x(1)) + 0 * g.y(1)
    assert torus.integrate(np.ones(g.shape)) == pytest.approx(1.0)
    assert abs(torus.integrate(c)) < 1e-15
    assert torus.integrate(c ** 2) == pytest.approx(0.5, abs=1e-14)
    assert torus.lp_norm(np.full(g.shape, 2.0), 5) == pytest.approx(2.0)
    assert torus.lp_norm(c, np.inf) == pytest.approx(1.0)
    assert torus.lp_norm(c, 2) == pytest.approx(np.sqrt(0.5), abs=1e-14)
    with pytest.raises(InvalidExponent):
        torus.lp_norm(c, 0.5)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_lp_norm_monotone_in_p(seed):
    g = torus.make_grid(1, 16)
    rng = np.random.default_rng(seed)
    f = rng.standard_normal(g.shape)
    w = rng.uniform(0.1, 2.0, g.shape)
    norms = [torus.lp_norm(f, p, w, normalize=True) for p in (1, 2, 4, 8, np.inf)]
    assert all(b >= a * (1 - 1e-12) for a, b in zip(norms, norms[1:]))


def test_pure_mode_derivative_accuracy():
    g = torus.make_grid(1, 32)
    x = g.x(1) + 0 * g.y(1)
    d = torus.real_gradient(g.field(np.sin(2 * np.pi * 3 * x)))
    exact = 2 * np.pi * 3 * np.cos(2 * np.pi * 3 * x)
    assert np.max(np.abs(d[0] - exact)) <= 1e-12 * np.abs(exact).max()


def test_field_roundtrip(tmp_path):
    g = torus.make_grid(2, 8)
    f = g.field(np.random.default_rng(2).standard_normal(g.shape), "phi")
    p = tmp_path / "phi.cmafield"
    torus.write_field(p, f)
    back = torus.read_field(p)
    assert back.grid == g and back.name == "phi" and np.array_equal(back.values, f.values)
    assert p.read_bytes().startswith(b"CMAFIELD 1 n=2 m=8 name=phi\n")


def test_scalar_field_rejects_nonfinite():
    g = torus.make_grid(1, 8)
    with pytest.raises(ValueError):
        g.field(np.full(g.shape, np.nan))
