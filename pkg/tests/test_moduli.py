import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_connection
from ymtorus import gaugefield as gf
from ymtorus import lattice, lie, moduli
from ymtorus.errors import DegenerateRay, NonCommuting
from ymtorus.moduli import PillowcasePoint, Stratum

angle = st.floats(-20, 20, allow_nan=False)


def transverse_ray(N, base, seed=0):
    """t -> Gamma + t (exact + non-harmonic slice direction)."""
    rng = np.random.default_rng(seed)
    flat = gf.Connection(base, np.zeros((2, N, N, 3)))
    exact = gf.covariant_d(flat, lattice.random_smooth(rng, N))
    b = gf.coulomb_project(lattice.random_smooth(rng, N, (2,)), base)
    ws = base.workspace(N)
    Kh, wh = lattice.to_modes(b)
    b = lattice.from_modes(np.where(ws.kernel_K, 0, Kh), np.where(ws.kernel_w, 0, wh))
    d = exact / lattice.l2_norm(exact) + b / lattice.l2_norm(b)
    return lambda t: gf.Connection(base, t * d)


# -- holonomy ------------------------------------------------------------------------


@pytest.mark.parametrize("ab", [(0.0, 0.0), (0.7, 2.1), (math.pi, 0.3), (5.0, -1.0)])
def test_flat_holonomy_exact(ab):
    rho = moduli.holonomy(gf.Connection.flat(16, *ab))
    assert np.abs(rho.h_mu - lie.exponential(ab[0] * lie.K)).max() < 1e-13
    assert np.abs(rho.h_gamma - lie.exponential(ab[1] * lie.K)).max() < 1e-13
    assert rho.commutator_norm < 1e-14


def test_product_holonomy_identity():
    rho = moduli.holonomy(gf.Connection.flat(8))
    assert np.array_equal(rho.h_mu, lie.IDENTITY)
    assert np.array_equal(rho.h_gamma, lie.IDENTITY)


def test_holonomy_gauge_invariance_second_order():
    """Conjugacy class of the x-loop holonomy under a periodic gauge transform."""
    errs = []
    for N in (16, 32, 64):
        rng = np.random.default_rng(5)
        A = random_connection(rng, N, amp=0.1)
        s = gf.gauge_exp(0.1 * lattice.random_smooth(rng, N))
        h0 = moduli.holonomy(A)
        h1 = moduli.holonomy(gf.gauge_apply(s, A))
        errs.append(max(abs(lie.norm(lie.logarithm(h0.h_mu)) - lie.norm(lie.logarithm(h1.h_mu))),
                        abs(lie.norm(lie.logarithm(h0.h_gamma))
                            - lie.norm(lie.logarithm(h1.h_gamma)))))
    slopes = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
    assert all(s == pytest.approx(2.0, abs=0.25) for s in slopes), (errs, slopes)


def test_refined_holonomy_converges():
    rng = np.random.default_rng(2)
    A = random_connection(rng, 16, amp=0.1)
    exact = moduli.holonomy(A, refine=64).h_mu
    e1 = np.abs(moduli.holonomy(A, refine=1).h_mu - exact).max()
    e4 = np.abs(moduli.holonomy(A, refine=4).h_mu - exact).max()
    assert e4 < e1 / 10


# -- pillowcase ----------------------------------------------------------------------


def test_round_trip_on_flat_grid():
    for a in np.linspace(0, 2 * np.pi, 13):
        for b in np.linspace(0, 2 * np.pi, 13):
            p = moduli.to_pillowcase(moduli.holonomy(gf.Connection.flat(8, a, b)))
            assert moduli.pillowcase_dist(p, (a, b)) < 1e-10


@given(angle, angle)
def test_reduction_identifications(a, b):
    p = moduli.reduce(a, b)
    assert 0 <= p.alpha <= math.pi and 0 <= p.beta < 2 * math.pi
    assert moduli.reduce(p) == p
    assert moduli.pillowcase_dist(p, moduli.reduce(2 * math.pi - a, 2 * math.pi - b)) < 1e-9
    assert moduli.pillowcase_dist(p, moduli.reduce(a + 2 * math.pi, b - 4 * math.pi)) < 1e-9


def test_non_flat_is_non_commuting():
    rng = np.random.default_rng(0)
    A = random_connection(rng, 16, amp=0.5)
    with pytest.raises(NonCommuting):
        moduli.to_pillowcase(moduli.holonomy(A))


def test_classify():
    c = moduli.classify(PillowcasePoint(0.0, 0.0))
    assert c is Stratum.CENTRAL and c.zariski_dim == 6
    a = moduli.classify(PillowcasePoint(math.pi / 2, 1.0))
    assert a is Stratum.ABELIAN and a.zariski_dim == 2
    assert moduli.classify(PillowcasePoint(math.pi, math.pi)) is Stratum.CENTRAL
    assert moduli.classify(PillowcasePoint(0.0, math.pi)) is Stratum.CENTRAL
    assert moduli.classify(PillowcasePoint(-math.pi, 3 * math.pi)) is Stratum.CENTRAL


def test_strata_match_cohomology():
    rng = np.random.default_rng(1)
    pts = [(0, 0), (0, math.pi), (math.pi, 0), (math.pi, math.pi)]
    pts += [tuple(rng.uniform(0.1, 3.0, 2)) for _ in range(5)]
    for ab in pts:
        p = PillowcasePoint(*ab)
        assert gf.cohomology_dims(p.base())[1] == moduli.classify(p).zariski_dim


def test_distance_values():
    p = PillowcasePoint(0.4, 2.0)
    assert moduli.pillowcase_dist(p, p) == 0.0
    for beta in np.linspace(0.1, 2 * np.pi - 0.1, 17):
        d = moduli.pillowcase_dist((0.0, 0.0), (0.0, beta))
        assert d == pytest.approx(min(beta, 2 * np.pi - beta), abs=1e-14)


@given(angle, angle, angle, angle)
def test_distance_symmetric(a, b, c, d):
    assert moduli.pillowcase_dist((a, b), (c, d)) == pytest.approx(
        moduli.pillowcase_dist((c, d), (a, b)), abs=1e-12)


# -- nearest flat connection ---------------------------------------------------------


def test_nearest_flat_on_ray():
    t = 0.05
    nf = moduli.nearest_flat(gf.example_ray(16, t))
    assert moduli.pillowcase_dist(nf.point, (0.0, 0.0)) <= 1e-6
    assert nf.dist == pytest.approx(math.sqrt(2) * t, abs=1e-8)


def test_nearest_flat_orbit_mode_reaches_cone():
    # conjugation by the gauge orbit lets the ray reach a commuting pair
    t = 0.05
    nf = moduli.nearest_flat(gf.example_ray(16, t), mode="orbit")
    assert nf.dist <= math.sqrt(2) * t
    assert nf.dist == pytest.approx(t, rel=1e-6)


@pytest.mark.parametrize("ab", [(0.3, 1.2), (math.pi / 2, math.pi / 2), (0.0, 0.0), (2.5, 5.0)])
def test_nearest_flat_of_flat(ab):
    nf = moduli.nearest_flat(gf.Connection.flat(16, *ab))
    assert moduli.pillowcase_dist(nf.point, ab) <= 1e-10
    assert nf.dist <= 1e-10


# -- lambda scans ---------------------------------------------------------------------


@pytest.mark.parametrize("p", (2.0, 3.0, 4.0))
def test_scan_ray(p):
    scan = moduli.lambda_scan(lambda t: gf.example_ray(16, t), np.logspace(-3, -1, 20), p=p)
    assert scan.lam == pytest.approx(0.5, abs=0.005)
    assert scan.r2 >= 0.9999


def test_scan_transverse():
    base = gf.FlatBase(math.pi / 2, math.pi / 2)
    scan = moduli.lambda_scan(transverse_ray(16, base), np.logspace(-3, -1, 12), workers=2)
    assert scan.lam == pytest.approx(1.0, abs=0.05)


def test_scan_harmonic_ray_is_degenerate():
    base = gf.FlatBase(math.pi / 2, math.pi / 2)
    ray = lambda t: gf.Connection.constant(16, t * lie.K, 0.5 * t * lie.K, base)  # noqa: E731
    with pytest.raises(DegenerateRay):
        moduli.lambda_scan(ray, np.logspace(-3, -1, 5))


def test_write_scan(tmp_path):
    scan = moduli.lambda_scan(lambda t: gf.example_ray(8, t), np.logspace(-3, -1, 4))
    moduli.write_scan(scan, tmp_path / "s.csv", tmp_path / "s.json")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == ",".join(moduli.SCAN_HEADER) and len(lines) == 5
    assert '"lambda"' in (tmp_path / "s.json").read_text()
