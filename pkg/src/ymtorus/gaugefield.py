"""SU(2) connections on the flat 2-torus and their covariant calculus.

A connection is a flat diagonal base ``Gamma(alpha, beta) = alpha K dx +
beta K dy`` plus a perturbation one-form ``a`` on the grid.  Curvature is

    F = d_x c_y - d_y c_x + [c_x, c_y]

with ``c = Gamma + a``.  With this convention ``F(A + b) = F(A) + d_A b +
[b_x, b_y]`` holds exactly and ``F`` is gauge covariant.  Every operator
returns band-limited fields, and the codifferentials are the exact discrete
adjoints of the covariant derivatives for the grid L^2 pairing.
"""

from dataclasses import dataclass

import numpy as np

from . import lie
from .errors import AmbiguousKernel, NoConvergence
from .lattice import (
    band_limit,
    derivative_symbols,
    fft_field,
    fft_from_modes,
    ifft_field,
    modes_from_fft,
    nyquist_mask,
    from_modes,
    grid_size,
    l2_inner,
    l2_norm,
    sobolev_norm,
    spectral_derivative,
    spectral_workspace,
    to_modes,
)


@dataclass(frozen=True)
class FlatBase:
    alpha: float = 0.0
    beta: float = 0.0

    def components(self):
        """Constant algebra values (c_x, c_y) of Gamma(alpha, beta)."""
        return self.alpha * lie.K, self.beta * lie.K

    def as_oneform(self, N):
        cx, cy = self.components()
        out = np.zeros((2, N, N, 3))
        out[0] = cx
        out[1] = cy
        return out

    def workspace(self, N, kernel_threshold=None):
        return spectral_workspace(N, self.alpha, self.beta, kernel_threshold)


PRODUCT = FlatBase(0.0, 0.0)


@dataclass(frozen=True, eq=False)
class Connection:
    """``Gamma(base) + a`` with ``a`` a one-form of shape (2, N, N, 3)."""

    base: FlatBase
    a: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        if a.ndim != 4 or a.shape[0] != 2 or a.shape[-1] != 3:
            raise ValueError(f"perturbation must have shape (2, N, N, 3), got {a.shape}")
        grid_size(a)
        object.__setattr__(self, "a", a)

    @property
    def N(self):
        return self.a.shape[1]

    def total(self):
        return self.a + self.base.as_oneform(self.N)

    def rebased(self, base):
        """Same connection, perturbation re-expressed relative to ``base``."""
        return Connection(base, self.total() - base.as_oneform(self.N))

    def with_a(self, a):
        return Connection(self.base, a)

    @classmethod
    def flat(cls, N, alpha=0.0, beta=0.0):
        return cls(FlatBase(alpha, beta), np.zeros((2, N, N, 3)))

    @classmethod
    def constant(cls, N, xi, eta, base=PRODUCT):
        """base + xi dx + eta dy for constant algebra elements."""
        a = np.zeros((2, N, N, 3))
        a[0] = xi
        a[1] = eta
        return cls(base, a)


def example_ray(N, t):
    """The connection t I dx + t J dy over the product base."""
    return Connection.constant(N, t * lie.I, t * lie.J)


# -- exterior calculus ---------------------------------------------------------


def curvature(A):
    c = A.total()
    a = A.a
    f = spectral_derivative(a[1], "x") - spectral_derivative(a[0], "y")
    f = f + lie.bracket(c[0], c[1])
    return band_limit(f)


def energy(A):
    f = curvature(A)
    return 0.5 * l2_inner(f, f)


def covariant_d(A, phi):
    """d_A on 0-forms."""
    c = A.total()
    dx = spectral_derivative(phi, "x") + lie.bracket(c[0], phi)
    dy = spectral_derivative(phi, "y") + lie.bracket(c[1], phi)
    return band_limit(np.stack([dx, dy]))


def covariant_d1(A, b):
    """d_A on 1-forms: d_x b_y - d_y b_x + [c_x, b_y] - [c_y, b_x]."""
    c = A.total()
    f = spectral_derivative(b[1], "x") - spectral_derivative(b[0], "y")
    f = f + lie.bracket(c[0], b[1]) - lie.bracket(c[1], b[0])
    return band_limit(f)


def codifferential(A, f):
    """Adjoint of :func:`covariant_d1`, mapping 2-forms to 1-forms."""
    c = A.total()
    bx = spectral_derivative(f, "y") + lie.bracket(c[1], f)
    by = -spectral_derivative(f, "x") - lie.bracket(c[0], f)
    return band_limit(np.stack([bx, by]))


def codifferential0(A, b):
    """Adjoint of :func:`covariant_d`, mapping 1-forms to 0-forms."""
    c = A.total()
    phi = -spectral_derivative(b[0], "x") - spectral_derivative(b[1], "y")
    phi = phi - lie.bracket(c[0], b[0]) - lie.bracket(c[1], b[1])
    return band_limit(phi)


# -- flat-base spectral operators ----------------------------------------------


def _oneform_modes(b):
    Kh, wh = to_modes(b)
    return Kh, wh


def coulomb_project(b, base, kernel_threshold=None):
    """L^2-orthogonal projection onto Ker d_Gamma^* (the Coulomb slice).

    Solved mode by mode: ``b - kappa (kappa . b) / |kappa|^2`` on every mode
    with ``|kappa|^2`` above the kernel threshold; kernel modes pass through.
    """
    b = np.asarray(b, dtype=float)
    ws = base.workspace(grid_size(b), kernel_threshold)
    return from_modes(*_project_modes(*_oneform_modes(b), ws))


def _project_modes(Kh, wh, ws):
    invK, invw = ws.inverse_laplacian()
    out = []
    for h, kx, ky, inv in ((Kh, ws.kx_K, ws.ky_K, invK), (wh, ws.kx_w, ws.ky_w, invw)):
        div = kx * h[0] + ky * h[1]
        p = np.stack([h[0] - kx * div * inv, h[1] - ky * div * inv])
        p[:, ~ws.resolved] = 0.0
        out.append(p)
    return out


def flat_laplacian(f, base):
    """Hodge Laplacian of Gamma(base), mode-wise multiplication by |kappa|^2."""
    f = np.asarray(f, dtype=float)
    ws = base.workspace(grid_size(f))
    Kh, wh = to_modes(f)
    Kh = np.where(ws.resolved, ws.lam_K * Kh, 0.0)
    wh = np.where(ws.resolved, ws.lam_w * wh, 0.0)
    return from_modes(Kh, wh)


def flat_green(f, base, kernel_threshold=None):
    """Pseudo-inverse of :func:`flat_laplacian` (kernel modes sent to zero)."""
    f = np.asarray(f, dtype=float)
    ws = base.workspace(grid_size(f), kernel_threshold)
    invK, invw = ws.inverse_laplacian()
    Kh, wh = to_modes(f)
    return from_modes(invK * Kh, invw * wh)


def flat_codifferential0(b, base):
    """d_Gamma^* b evaluated in Fourier space."""
    b = np.asarray(b, dtype=float)
    ws = base.workspace(grid_size(b))
    Kh, wh = _oneform_modes(b)
    dK = -1j * (ws.kx_K * Kh[0] + ws.ky_K * Kh[1])
    dw = -1j * (ws.kx_w * wh[0] + ws.ky_w * wh[1])
    return from_modes(np.where(ws.resolved, dK, 0.0), np.where(ws.resolved, dw, 0.0))


def slice_residual(A):
    """||d_Gamma^*(A - Gamma)||_{L^2} for the stored base."""
    return l2_norm(flat_codifferential0(A.a, A.base))


def gradient_slice(A):
    """Pi_Gamma d_A^* F_A, the L^2 gradient of the energy on the Coulomb slice."""
    return gradient_and_curvature(A)[0]


def gradient_and_curvature(A):
    """(Pi_Gamma d_A^* F_A, F_A) evaluated with a minimal number of transforms.

    Same result as ``coulomb_project(codifferential(A, curvature(A)))``; the
    derivatives, band limiting and slice projection share Fourier passes.
    """
    N = A.N
    ws = A.base.workspace(N)
    kx, ky = derivative_symbols(N)
    kx = kx[:, :, None]
    ky = ky[:, :, None]
    nyq = nyquist_mask(N)[:, :, None]
    c = A.total()
    ah = fft_field(A.a)
    fh = 1j * kx * ah[1] - 1j * ky * ah[0] + fft_field(lie.bracket(c[0], c[1]))
    fh = np.where(nyq, 0.0, fh)
    f = ifft_field(fh)
    brh = fft_field(lie.bracket(c[::-1], f))
    gh = np.stack([1j * ky * fh + brh[0], -1j * kx * fh - brh[1]])
    Kh, wh = _project_modes(*modes_from_fft(gh), ws)
    return ifft_field(fft_from_modes(Kh, wh)), f


def _curvature_bracket_term(f, b):
    # adjoint of c -> <F, [b_x, c_y] - [b_y, c_x]>
    return band_limit(np.stack([lie.bracket(b[1], f), -lie.bracket(b[0], f)]))


def hessian_apply(A, b, curv=None):
    """Slice-projected Hessian of the energy at A applied to b.

    ``<H b, c> = <d_A b, d_A c> + <F_A, [b_x, c_y] - [b_y, c_x]>`` for slice c.
    Pass ``curv`` to reuse an already computed curvature.
    """
    N = A.N
    ws = A.base.workspace(N)
    kx, ky = derivative_symbols(N)
    kx = kx[:, :, None]
    ky = ky[:, :, None]
    nyq = nyquist_mask(N)[:, :, None]
    f = curvature(A) if curv is None else curv
    c = A.total()
    Kh, wh = _project_modes(*modes_from_fft(fft_field(b)), ws)
    pbh = fft_from_modes(Kh, wh)
    pb = ifft_field(pbh)
    eh = 1j * kx * pbh[1] - 1j * ky * pbh[0]
    eh = eh + fft_field(lie.bracket(c[0], pb[1]) - lie.bracket(c[1], pb[0]))
    eh = np.where(nyq, 0.0, eh)
    e = ifft_field(eh)
    # codifferential of d_A b plus the adjoint of c -> <F, [b_x, c_y] - [b_y, c_x]>
    rest = lie.bracket(c[::-1], e) + lie.bracket(pb[::-1], f)
    resth = fft_field(rest)
    out = np.stack([1j * ky * eh + resth[0], -1j * kx * eh - resth[1]])
    Kh, wh = _project_modes(*modes_from_fft(out), ws)
    return ifft_field(fft_from_modes(Kh, wh))


# -- gauge action --------------------------------------------------------------


def gauge_exp(chi):
    """Gauge transformation exp(chi) from an algebra-valued scalar field."""
    return lie.exponential(chi)


def identity_gauge(N):
    return np.broadcast_to(lie.IDENTITY, (N, N, 4)).copy()


def gauge_apply(s, A):
    """u(A) = s^{-1} A s + s^{-1} ds, re-expressed relative to A's base."""
    s = lie.qnormalize(np.asarray(s, dtype=float))
    sinv = lie.qconj(s)
    c = A.total()
    ds = np.stack([spectral_derivative(s, "x"), spectral_derivative(s, "y")])
    conj_c = lie.adjoint(sinv, c)
    maurer_cartan = lie.qmul(sinv, ds)[..., 1:]
    new = band_limit(conj_c + maurer_cartan)
    return Connection(A.base, new - A.base.as_oneform(A.N))


def coulomb_gauge_fix(A, base=None, tol=1e-12, radius=5.0, max_iter=100):
    """Gauge transform A into the Coulomb slice of ``base``.

    Quasi-Newton iteration on ``u = s exp(delta)`` with the flat operator
    ``d_Gamma^* d_Gamma`` as linearization and a halving line search on the
    residual.  Returns ``(s, u(A))`` with u(A) stored relative to ``base``.
    """
    base = A.base if base is None else base
    A = A.rebased(base)
    size = sobolev_norm(A.a, 2, 1)
    if size > radius:
        raise NoConvergence(
            f"||A - Gamma||_W12 = {size:.3g} exceeds gauge-fixing radius {radius:.3g}"
        )
    s = identity_gauge(A.N)
    B = A
    res = slice_residual(B)
    for _ in range(max_iter):
        if res <= tol:
            return s, B
        r = flat_codifferential0(B.a, base)
        delta = -flat_green(r, base)
        step = 1.0
        for _ in range(30):
            trial = lie.multiply(s, gauge_exp(step * delta))
            Bt = gauge_apply(trial, A)
            rt = slice_residual(Bt)
            if rt < res:
                break
            step *= 0.5
        else:
            break
        s, B, res = trial, Bt, rt
    if res <= tol:
        return s, B
    raise NoConvergence(f"Coulomb gauge residual {res:.3g} above tolerance {tol:.3g}")


# -- harmonic cohomology ---------------------------------------------------------


def cohomology_dims(base, kernel_threshold=None, N=16):
    """Dimensions (h0, h1, h2) of the harmonic spaces of Gamma(base).

    Counted from the per-mode flat Laplacian eigenvalues; each kernel mode
    gives one harmonic 0-form and 2-form and two harmonic 1-forms.
    """
    ws = base.workspace(N, kernel_threshold)
    thr = ws.kernel_threshold
    lam = ws.eigenvalues
    near = (lam > thr / 10.0) & (lam < thr * 10.0)
    if np.any(near):
        raise AmbiguousKernel(
            f"eigenvalue {lam[near].min():.3g} within a factor 10 of threshold {thr:.3g}"
        )
    h0 = int(np.count_nonzero(ws.kernel_K) + 2 * np.count_nonzero(ws.kernel_w))
    return h0, 2 * h0, h0
