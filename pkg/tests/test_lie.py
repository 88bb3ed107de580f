import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ymtorus import lie

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
vec3 = arrays(np.float64, 3, elements=finite)
quat = arrays(np.float64, 4, elements=finite).filter(lambda q: np.linalg.norm(q) > 1e-3)


def test_bracket_relations():
    assert np.array_equal(lie.bracket(lie.I, lie.J), 2 * lie.K)
    assert np.array_equal(lie.bracket(lie.J, lie.K), 2 * lie.I)
    assert np.array_equal(lie.bracket(lie.K, lie.I), 2 * lie.J)
    assert np.allclose(lie.bracket(lie.I + lie.J, lie.K), 2 * lie.I - 2 * lie.J, atol=0)


@given(vec3, vec3, vec3, finite)
def test_bracket_bilinear_antisymmetric(x, y, z, c):
    scale = 1 + np.abs(x).max() * (1 + np.abs(y).max() + np.abs(z).max()) * (1 + abs(c))
    assert np.all(lie.bracket(x, x) == 0)
    assert np.allclose(lie.bracket(x, y), -lie.bracket(y, x), atol=1e-12 * scale)
    assert np.allclose(lie.bracket(c * x + y, z), c * lie.bracket(x, z) + lie.bracket(y, z),
                       atol=1e-12 * scale * 10)


def test_jacobi_and_ad_invariance(rng):
    x, y, z = rng.standard_normal((3, 1000, 3))
    br = lie.bracket
    jac = br(x, br(y, z)) + br(y, br(z, x)) + br(z, br(x, y))
    assert np.abs(jac).max() <= 1e-12 * np.abs(br(x, br(y, z))).max()
    inv = lie.inner(br(z, x), y) + lie.inner(x, br(z, y))
    assert np.abs(inv).max() < 1e-12


def test_inner_orthonormal(rng):
    assert lie.inner(lie.I, lie.I) == 1.0
    assert lie.inner(lie.I, lie.J) == 0.0
    x = rng.standard_normal((50, 3))
    assert np.allclose(lie.norm(x) ** 2, np.sum(x * x, axis=-1), rtol=1e-14)


def test_exponential_values():
    assert np.array_equal(lie.exponential(np.zeros(3)), lie.IDENTITY)
    assert np.allclose(lie.exponential(math.pi * lie.I), -lie.IDENTITY, atol=1e-15)
    a = 0.7
    m = lie.group_matrix(lie.exponential(a * lie.K))
    assert np.allclose(m, np.diag([np.exp(1j * a), np.exp(-1j * a)]), atol=1e-15)


def test_matrix_representation_matches_bracket(rng):
    x, y = rng.standard_normal((2, 3))
    mx, my = lie.to_matrix(x), lie.to_matrix(y)
    assert np.allclose(lie.from_matrix(mx @ my - my @ mx), lie.bracket(x, y), atol=1e-13)
    # exponential agrees with the matrix exponential
    from scipy.linalg import expm

    assert np.allclose(lie.group_matrix(lie.exponential(x)), expm(mx), atol=1e-12)


@given(vec3)
def test_exp_log_roundtrip(x):
    # the logarithm is the principal branch, |x| < pi
    x = x * (3.0 / (1.0 + np.linalg.norm(x)))
    assert np.allclose(lie.logarithm(lie.exponential(x)), x, atol=1e-10)


@settings(max_examples=50)
@given(quat, vec3, vec3)
def test_adjoint_isometry(q, x, y):
    g = lie.qnormalize(q)
    lhs = lie.inner(lie.adjoint(g, x), lie.adjoint(g, y))
    assert abs(lhs - lie.inner(x, y)) <= 1e-12 * (1 + np.linalg.norm(x) * np.linalg.norm(y))


def test_adjoint_values():
    x = np.array([0.3, -1.2, 0.5])
    assert np.array_equal(lie.adjoint(lie.IDENTITY, x), x)
    for t in (0.1, 0.8, 2.5):
        out = lie.adjoint(lie.exponential(t * lie.K), lie.I)
        assert np.allclose(out, math.cos(2 * t) * lie.I + math.sin(2 * t) * lie.J, atol=1e-14)


def test_long_product_stays_unitary(rng):
    g = lie.IDENTITY
    steps = lie.exponential(0.1 * rng.standard_normal((10_000, 3)))
    for s in steps:
        g = lie.multiply(g, s)
    assert lie.unitarity_defect(g) < 1e-12
    assert abs(np.linalg.det(lie.group_matrix(g)) - 1) < 1e-12
