import math

import numpy as np
import pytest

from ymtorus import gaugefield as gf
from ymtorus import lattice
from ymtorus.lattice import GridError

GRIDS = (8, 16, 32)


@pytest.mark.parametrize("N", GRIDS)
def test_derivative_of_constant_is_zero(N):
    f = np.ones((N, N, 3)) * [0.3, -1.0, 2.0]
    for ax in ("x", "y"):
        assert np.abs(lattice.spectral_derivative(f, ax)).max() < 1e-13


@pytest.mark.parametrize("N", (4, 8, 16, 32))
def test_derivative_of_sine_is_exact(N):
    X, Y = lattice.Grid(N).coordinates()
    f = np.zeros((N, N, 3))
    f[..., 0] = np.sin(2 * np.pi * X)
    d = lattice.spectral_derivative(f, "x")
    assert np.abs(d[..., 0] - 2 * np.pi * np.cos(2 * np.pi * X)).max() <= 1e-12
    assert np.abs(lattice.spectral_derivative(f, "y")).max() <= 1e-12


@pytest.mark.parametrize("N", GRIDS)
def test_derivative_skew_adjoint(N, rng):
    f = lattice.band_limit(rng.standard_normal((N, N, 3)))
    g = lattice.band_limit(rng.standard_normal((N, N, 3)))
    for ax in ("x", "y"):
        s = lattice.l2_inner(lattice.spectral_derivative(f, ax), g) + lattice.l2_inner(
            f, lattice.spectral_derivative(g, ax))
        assert abs(s) < 1e-10


@pytest.mark.parametrize("N", GRIDS)
def test_norms(N, rng):
    c = 1.7
    f = np.zeros((N, N, 3))
    f[..., 0] = c
    assert lattice.l2_norm(f) == pytest.approx(c, rel=1e-14)
    for t in (1e-3, 0.05, -0.4):
        A = gf.example_ray(N, t)
        assert lattice.l2_norm(A.a) == pytest.approx(math.sqrt(2) * abs(t), rel=1e-14)
        assert lattice.sobolev_norm(A.a, 2, 1) == pytest.approx(math.sqrt(2) * abs(t), rel=1e-14)
    assert lattice.sobolev_norm(np.zeros((2, N, N, 3)), 3, 1) == 0.0
    g, h = rng.standard_normal((2, N, N, 3))
    assert lattice.l2_inner(g, h) == pytest.approx(lattice.fourier_l2_inner(g, h), rel=1e-10)


@pytest.mark.parametrize("p", (2.0, 3.0, 4.0))
def test_ray_scaling_ratio(p):
    ratios = []
    for t in np.logspace(-3, -1, 20):
        A = gf.example_ray(16, t)
        ratios.append(lattice.sobolev_norm(A.a, p, 1) / lattice.lp_norm(gf.curvature(A), p) ** 0.5)
    ratios = np.array(ratios)
    assert np.ptp(ratios) / ratios.mean() < 1e-10


def test_sobolev_norm_of_plane_wave():
    N = 16
    X, _ = lattice.Grid(N).coordinates()
    f = np.zeros((N, N, 3))
    f[..., 2] = np.sin(2 * np.pi * X)
    # |f|^2 + |grad f|^2 averages to (1 + 4 pi^2) / 2
    assert lattice.sobolev_norm(f, 2, 1) == pytest.approx(math.sqrt((1 + 4 * math.pi**2) / 2),
                                                          rel=1e-13)


def test_random_smooth_is_grid_independent():
    a16 = lattice.random_smooth(np.random.default_rng(3), 16, (2,))
    a32 = lattice.random_smooth(np.random.default_rng(3), 32, (2,))
    assert np.allclose(a32[:, ::2, ::2], a16, atol=1e-13)


def test_mode_roundtrip(rng):
    f = rng.standard_normal((16, 16, 3))
    Kh, wh = lattice.to_modes(f)
    assert np.allclose(lattice.from_modes(Kh, wh), f, atol=1e-13)


@pytest.mark.parametrize("N", (3, 7, 2))
def test_bad_grid(N):
    with pytest.raises(GridError):
        lattice.Grid(N)


def test_bad_exponent():
    with pytest.raises(ValueError):
        lattice.sobolev_norm(np.zeros((8, 8, 3)), 0.5)
