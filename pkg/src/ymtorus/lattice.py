"""Periodic N x N grid on the unit torus with Fourier-spectral calculus.

Field layout (all plain float arrays, grid axes always at positions -3, -2
with index order ``[ix, iy]``):

    scalar / 0-form   (N, N, 3)
    two-form          (N, N, 3)      coefficient of dx^dy
    one-form          (2, N, N, 3)   components (b_x, b_y)

The discrete function space is the span of Fourier modes ``|k_x|, |k_y| < N/2``.
The Nyquist row and column are removed by :func:`band_limit`; derivatives
zero them as well, so every operator built here maps that space to itself and
the discrete adjoints are exact.

Algebra-valued fields are diagonalized for ``ad K`` by splitting them into the
real K-coordinate and the complex combination ``w = c_I + i c_J``, on which
``[K, .]`` acts as multiplication by ``2i``.  :class:`SpectralWorkspace`
holds the resulting per-mode symbols of the flat covariant derivative.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft as sfft

GRID_AXES = (-3, -2)


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class Grid:
    N: int

    def __post_init__(self):
        if self.N < 4 or self.N % 2:
            raise GridError(f"grid size must be even and >= 4, got {self.N}")

    @property
    def h(self):
        return 1.0 / self.N

    def coordinates(self):
        """(X, Y) arrays of shape (N, N) with X[ix, iy] = ix / N."""
        s = np.arange(self.N) / self.N
        return np.meshgrid(s, s, indexing="ij")


def grid_size(f):
    f = np.asarray(f)
    n1, n2 = f.shape[-3], f.shape[-2]
    if n1 != n2:
        raise GridError(f"non-square grid {n1}x{n2}")
    return n1


@lru_cache(maxsize=None)
def _integer_modes(N):
    k = np.fft.fftfreq(N, d=1.0 / N)
    return k


@lru_cache(maxsize=None)
def nyquist_mask(N):
    """True on the Nyquist row/column, shape (N, N)."""
    k = _integer_modes(N)
    nyq = k == -N // 2
    return nyq[:, None] | nyq[None, :]


@lru_cache(maxsize=None)
def derivative_symbols(N):
    """2*pi*k with the Nyquist entry zeroed, shaped for broadcasting."""
    k = 2.0 * np.pi * _integer_modes(N)
    k[N // 2] = 0.0
    return k[:, None], k[None, :]


def _fft(f):
    return sfft.fft2(f, axes=GRID_AXES)


def _ifft(F):
    return sfft.ifft2(F, axes=GRID_AXES)


fft_field = _fft


def ifft_field(F):
    return _ifft(F).real


def _mode_view(mask):
    return mask[:, :, None]


def band_limit(f):
    """Remove the Nyquist row and column from a field."""
    f = np.asarray(f, dtype=float)
    N = grid_size(f)
    F = np.where(_mode_view(nyquist_mask(N)), 0.0, _fft(f))
    return _ifft(F).real


def spectral_derivative(f, axis):
    """Exact derivative of the band-limited interpolant along ``axis``.

    ``axis`` is ``"x"``/``0`` or ``"y"``/``1``.  Works on any field whose grid
    axes are at positions (-3, -2).
    """
    f = np.asarray(f, dtype=float)
    N = grid_size(f)
    kx, ky = derivative_symbols(N)
    if axis in ("x", 0):
        sym = kx[:, :, None]
    elif axis in ("y", 1):
        sym = ky[:, :, None]
    else:
        raise ValueError(f"axis must be 'x' or 'y', got {axis!r}")
    return _ifft(1j * sym * _fft(f)).real


def gradient(f):
    """(d_x f, d_y f) stacked on a new leading axis."""
    return np.stack([spectral_derivative(f, "x"), spectral_derivative(f, "y")])


def _check_same(f, g):
    if f.shape != g.shape:
        raise GridError(f"shape mismatch: {f.shape} vs {g.shape}")


def l2_inner(f, g):
    """h^2 * sum over sites (and one-form components) of <f, g>."""
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    _check_same(f, g)
    N = grid_size(f)
    return float(np.sum(f * g)) / N**2


def l2_norm(f):
    return np.sqrt(max(l2_inner(f, f), 0.0))


def fourier_l2_inner(f, g):
    """Same pairing evaluated on the Fourier side (Parseval)."""
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    _check_same(f, g)
    N = grid_size(f)
    return float(np.sum(np.conj(_fft(f)) * _fft(g)).real) / N**4


def _pointwise_components(f):
    f = np.asarray(f, dtype=float)
    if f.ndim == 4:
        # one-form (2, N, N, 3) -> (N, N, 6)
        return np.moveaxis(f, 0, -2).reshape(f.shape[1], f.shape[2], -1)
    if f.ndim == 3:
        return f
    raise GridError(f"expected a scalar, two-form or one-form field, got shape {f.shape}")


def lp_norm(f, p=2.0):
    """(h^2 sum |f|^p)^(1/p) with |f| the pointwise Euclidean norm."""
    return sobolev_norm(f, p, order=0)


def sobolev_norm(f, p=2.0, order=1):
    """W^{order,p} norm with flat spectral gradients.

    ``(h^2 sum (|f|^p + |grad f|^p))^(1/p)``; ``p = inf`` gives the max norm.
    """
    if p < 1:
        raise ValueError(f"Sobolev exponent must be >= 1, got {p}")
    if order not in (0, 1):
        raise ValueError(f"order must be 0 or 1, got {order}")
    c = _pointwise_components(f)
    N = c.shape[0]
    mag = np.sqrt(np.sum(c * c, axis=-1))
    terms = [mag]
    if order == 1:
        g = gradient(c)
        terms.append(np.sqrt(np.sum(g * g, axis=(0, -1))))
    if np.isinf(p):
        return float(max(t.max() for t in terms))
    total = sum(np.sum(t**p) for t in terms) / N**2
    return float(total ** (1.0 / p))


# -- ad K eigenbasis ---------------------------------------------------------


def to_modes(f):
    """Fourier coefficients of the K-coordinate and of w = c_I + i c_J."""
    f = np.asarray(f, dtype=float)
    Kh = sfft.fft2(f[..., 2], axes=(-2, -1))
    wh = sfft.fft2(f[..., 0] + 1j * f[..., 1], axes=(-2, -1))
    return Kh, wh


@lru_cache(maxsize=None)
def _reflection(N):
    r = (-np.arange(N)) % N
    return r[:, None], r[None, :]


def modes_from_fft(Fh):
    """(K-hat, w-hat) from Fourier coefficients of the I, J, K coordinates."""
    return Fh[..., 2], Fh[..., 0] + 1j * Fh[..., 1]


def fft_from_modes(Kh, wh):
    """Inverse of :func:`modes_from_fft` for real fields."""
    rx, ry = _reflection(Kh.shape[-1])
    wr = np.conj(wh[..., rx, ry])
    return np.stack([0.5 * (wh + wr), -0.5j * (wh - wr), Kh], axis=-1)


def from_modes(Kh, wh):
    Kf = sfft.ifft2(Kh, axes=(-2, -1)).real
    w = sfft.ifft2(wh, axes=(-2, -1))
    return np.stack([w.real, w.imag, Kf], axis=-1)


@dataclass(frozen=True)
class SpectralWorkspace:
    """Per-mode symbols of the flat covariant derivative at Gamma(alpha, beta).

    ``d_Gamma`` acts on mode k of the K-part as ``i * kappa_K`` and on the
    w-part as ``i * kappa_w`` with ``kappa_w = 2 pi k + 2 (alpha, beta)``.
    Eigenvalues of the flat Laplacian are ``|kappa|^2``.
    """

    N: int
    alpha: float
    beta: float
    kernel_threshold: float
    kx_K: np.ndarray
    ky_K: np.ndarray
    kx_w: np.ndarray
    ky_w: np.ndarray
    lam_K: np.ndarray
    lam_w: np.ndarray
    kernel_K: np.ndarray
    kernel_w: np.ndarray
    resolved: np.ndarray
    inv_K: np.ndarray
    inv_w: np.ndarray

    @property
    def eigenvalues(self):
        """All resolved-mode eigenvalues (K-modes once, w-modes counted twice)."""
        r = self.resolved
        return np.concatenate([self.lam_K[r], self.lam_w[r], self.lam_w[r]])

    @property
    def max_eigenvalue(self):
        r = self.resolved
        return float(max(self.lam_K[r].max(), self.lam_w[r].max()))

    def inverse_laplacian(self):
        """Pseudo-inverse symbols (kernel and Nyquist modes mapped to zero)."""
        return self.inv_K, self.inv_w


DEFAULT_KERNEL_REL = 1e-10


@lru_cache(maxsize=256)
def spectral_workspace(N, alpha=0.0, beta=0.0, kernel_threshold=None):
    """Cached workspace keyed by (N, alpha, beta, kernel_threshold).

    ``kernel_threshold=None`` means ``1e-10`` times the largest resolved
    eigenvalue.
    """
    Grid(N)
    kx, ky = derivative_symbols(N)
    kx_K = np.broadcast_to(kx, (N, N)).copy()
    ky_K = np.broadcast_to(ky, (N, N)).copy()
    kx_w = kx_K + 2.0 * alpha
    ky_w = ky_K + 2.0 * beta
    lam_K = kx_K**2 + ky_K**2
    lam_w = kx_w**2 + ky_w**2
    resolved = ~nyquist_mask(N)
    if kernel_threshold is None:
        top = max(lam_K[resolved].max(), lam_w[resolved].max())
        kernel_threshold = DEFAULT_KERNEL_REL * top
    for arr in (kx_K, ky_K, kx_w, ky_w, lam_K, lam_w, resolved):
        arr.setflags(write=False)
    kernel_K = (lam_K < kernel_threshold) & resolved
    kernel_w = (lam_w < kernel_threshold) & resolved
    inv = []
    for lam, ker in ((lam_K, kernel_K), (lam_w, kernel_w)):
        drop = ker | ~resolved
        inv.append(np.where(drop, 0.0, 1.0 / np.where(drop, 1.0, lam)))
    for arr in (kernel_K, kernel_w, *inv):
        arr.setflags(write=False)
    return SpectralWorkspace(
        N, float(alpha), float(beta), float(kernel_threshold),
        kx_K, ky_K, kx_w, ky_w, lam_K, lam_w, kernel_K, kernel_w, resolved, *inv,
    )


def random_smooth(rng, N, leading=(), kmax=2, decay=1.0):
    """Random real trigonometric polynomial with modes |k_i| <= kmax.

    Coefficients are drawn in an order that does not depend on ``N``, so the
    same generator state produces the same continuous field on every grid.
    Amplitudes fall off like ``(1 + |k|^2)^(-decay)``.
    """
    leading = tuple(leading)
    X, Y = Grid(N).coordinates()
    out = np.zeros(leading + (N, N, 3))
    for kx in range(-kmax, kmax + 1):
        for ky in range(-kmax, kmax + 1):
            # (kx, ky) and (-kx, -ky) give the same real modes
            if (kx, ky) < (0, 0) and (-kx, -ky) != (kx, ky):
                continue
            amp = (1.0 + kx * kx + ky * ky) ** (-decay)
            phase = 2.0 * np.pi * (kx * X + ky * Y)
            a = rng.standard_normal(leading + (3,)) * amp
            b = rng.standard_normal(leading + (3,)) * amp
            if kx == 0 and ky == 0:
                b = np.zeros_like(b)
            out += a[..., None, None, :] * np.cos(phase)[..., None]
            out += b[..., None, None, :] * np.sin(phase)[..., None]
    return out
