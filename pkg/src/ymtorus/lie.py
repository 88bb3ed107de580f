"""su(2) and SU(2) kernel.

Algebra elements are coordinate triples ``(c_I, c_J, c_K)`` in the basis

    I = [[0, i], [i, 0]],  J = [[0, -1], [1, 0]],  K = [[i, 0], [0, -i]]

with ``[I, J] = 2K``, ``[J, K] = 2I``, ``[K, I] = 2J``.  The basis is
orthonormal for the Ad-invariant inner product ``-tr(xy)/2``, so the inner
product is the Euclidean dot product of coordinates.

Since ``IJ = K`` and ``I^2 = J^2 = K^2 = -1``, the matrices multiply like the
quaternion units.  Group elements are stored as unit quaternions
``(w, x, y, z)`` meaning ``w*1 + x*I + y*J + z*K``.

Every function broadcasts over leading axes, so the same code handles single
elements and whole lattice fields of shape ``(..., 3)`` / ``(..., 4)``.
"""

import numpy as np

I = np.array([1.0, 0.0, 0.0])
J = np.array([0.0, 1.0, 0.0])
K = np.array([0.0, 0.0, 1.0])

IDENTITY = np.array([1.0, 0.0, 0.0, 0.0])

_MATRIX_BASIS = np.array(
    [
        [[0, 1j], [1j, 0]],
        [[0, -1], [1, 0]],
        [[1j, 0], [0, -1j]],
    ]
)


def bracket(xi, eta):
    """Lie bracket; the structure constants make it twice the cross product."""
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    x0, x1, x2 = xi[..., 0], xi[..., 1], xi[..., 2]
    y0, y1, y2 = eta[..., 0], eta[..., 1], eta[..., 2]
    return 2.0 * np.stack([x1 * y2 - x2 * y1, x2 * y0 - x0 * y2, x0 * y1 - x1 * y0], axis=-1)


def inner(xi, eta):
    return np.sum(np.asarray(xi) * np.asarray(eta), axis=-1)


def norm(xi):
    return np.sqrt(inner(xi, xi))


def to_matrix(xi):
    """2x2 complex matrix of an algebra element (or stack of them)."""
    xi = np.asarray(xi, dtype=float)
    return np.tensordot(xi, _MATRIX_BASIS, axes=([-1], [0]))


def from_matrix(m):
    """Inverse of :func:`to_matrix` using the orthonormality ``-tr(xy)/2``."""
    m = np.asarray(m)
    out = [-0.5 * np.trace(m @ b, axis1=-2, axis2=-1).real for b in _MATRIX_BASIS]
    return np.stack(out, axis=-1)


# -- group -------------------------------------------------------------------


def qmul(p, q):
    """Quaternion product ``p q``."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    pw, pv = p[..., :1], p[..., 1:]
    qw, qv = q[..., :1], q[..., 1:]
    w = pw * qw - np.sum(pv * qv, axis=-1, keepdims=True)
    v = pw * qv + qw * pv + np.cross(pv, qv)
    return np.concatenate([w, v], axis=-1)


def qconj(q):
    q = np.array(q, dtype=float)
    q[..., 1:] *= -1.0
    return q


def qnormalize(q):
    q = np.asarray(q, dtype=float)
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


def multiply(g, h):
    """Group product, renormalized so long chains stay on SU(2)."""
    return qnormalize(qmul(g, h))


def inverse(g):
    return qconj(g)


def exponential(xi):
    """exp(xi) = cos|xi| + sin|xi| xi/|xi|, using sinc to stay smooth at 0."""
    xi = np.asarray(xi, dtype=float)
    theta = norm(xi)[..., None]
    # np.sinc(x) = sin(pi x)/(pi x)
    s = np.sinc(theta / np.pi)
    return np.concatenate([np.cos(theta), s * xi], axis=-1)


def logarithm(g):
    """Principal logarithm, the algebra element of norm in [0, pi]."""
    g = qnormalize(g)
    w = np.clip(g[..., :1], -1.0, 1.0)
    v = g[..., 1:]
    vn = np.linalg.norm(v, axis=-1, keepdims=True)
    theta = np.arctan2(vn, w)
    scale = np.where(vn > 0, theta / np.where(vn > 0, vn, 1.0), 1.0)
    return scale * v


def adjoint(g, xi):
    """Ad(g) xi = g xi g^{-1}, returned in I, J, K coordinates."""
    xi = np.asarray(xi, dtype=float)
    pure = np.concatenate([np.zeros(xi.shape[:-1] + (1,)), xi], axis=-1)
    return qmul(qmul(g, pure), qconj(g))[..., 1:]


def group_matrix(g):
    """2x2 special-unitary matrix of a unit quaternion."""
    g = np.asarray(g, dtype=float)
    eye = np.eye(2)
    return g[..., :1, None] * eye + to_matrix(g[..., 1:])


def unitarity_defect(g):
    """max(|U U^* - 1|, |det U - 1|) for diagnostic checks."""
    m = group_matrix(g)
    uu = m @ np.conj(np.swapaxes(m, -1, -2))
    d1 = np.abs(uu - np.eye(2)).max(axis=(-2, -1))
    d2 = np.abs(np.linalg.det(m) - 1.0)
    return np.maximum(d1, d2)
