"""Kuranishi reduction of the slice Yang-Mills equation near a flat base.

Slice one-forms are split by the spectrum of the flat Laplacian into a
finite-dimensional low-mode space (eigenvalues below a cutoff ``mu``) and
its orthogonal complement.  The high-mode part of the Yang-Mills equation is
solved for ``a_perp`` given ``a_par``; what is left is the balancing map

    chi(a_par) = low-mode coordinates of Pi d_A^* F_A,  A = Gamma + a_par + a_perp,

whose zeros model the flat moduli near the base.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from . import lie
from .errors import NoConvergence
from .gaugefield import (
    Connection,
    FlatBase,
    codifferential,
    flat_green,
    flat_laplacian,
    gradient_slice,
    hessian_apply,
)
from .lattice import band_limit, from_modes, l2_norm

SPECTRAL_GAP = (2.0 * math.pi) ** 2


def default_cutoff(base, N=16):
    """Half the smallest positive slice eigenvalue.

    The resulting space is exactly the harmonic space of the base.
    """
    ws = base.workspace(N)
    lam = np.concatenate([ws.lam_K[ws.resolved], ws.lam_w[ws.resolved]])
    pos = lam[lam > ws.kernel_threshold]
    return 0.5 * float(pos.min())


def _mode_candidates(ws, sector, ix, iy):
    """Real slice one-forms carried by one Fourier mode of one ad-K sector."""
    N = ws.N
    if sector == "K":
        kx, ky = ws.kx_K[ix, iy], ws.ky_K[ix, iy]
    else:
        kx, ky = ws.kx_w[ix, iy], ws.ky_w[ix, iy]
    kap = np.array([kx, ky])
    nk = np.linalg.norm(kap)
    # slice directions: orthogonal to kappa, or both when kappa = 0
    dirs = [np.array([1.0, 0.0]), np.array([0.0, 1.0])] if nk < 1e-14 else [
        np.array([-ky, kx]) / nk
    ]
    out = []
    for v in dirs:
        for phase in (1.0, 1j):
            coef = np.zeros((2, N, N), dtype=complex)
            coef[:, ix, iy] = phase * v * N * N
            zero = np.zeros_like(coef)
            b = from_modes(coef, zero) if sector == "K" else from_modes(zero, coef)
            out.append(b)
    return out


@dataclass(frozen=True)
class LowModeSpace:
    """Orthonormal basis of slice eigenmodes of the flat Laplacian below ``mu``."""

    base: FlatBase
    N: int
    mu: float
    basis: np.ndarray  # (n, 2, N, N, 3), orthonormal for the grid L^2 pairing
    eigenvalues: np.ndarray

    @property
    def dim(self):
        return self.basis.shape[0]

    def _flat(self):
        return self.basis.reshape(self.dim, -1)

    def coords(self, b):
        """L^2 coordinates of a one-form in the basis."""
        b = np.asarray(b, dtype=float)
        return self._flat() @ b.reshape(-1) / self.N**2

    def field(self, coords):
        coords = np.asarray(coords, dtype=float)
        return np.tensordot(coords, self.basis, axes=(0, 0))

    def project(self, b):
        return self.field(self.coords(b))

    def constant_coords(self, xi, eta):
        """Coordinates of the constant one-form xi dx + eta dy."""
        return self.coords(Connection.constant(self.N, xi, eta, self.base).a)


def low_mode_space(base, N=16, mu=None):
    """Build the low-mode space of ``Gamma(base)`` for cutoff ``mu``."""
    mu = default_cutoff(base, N) if mu is None else float(mu)
    if not mu > 0:
        raise ValueError("cutoff must be positive")
    ws = base.workspace(N)
    groups = {}
    for sector, lam in (("K", ws.lam_K), ("w", ws.lam_w)):
        for ix, iy in zip(*np.nonzero((lam < mu) & ws.resolved)):
            key = round(float(lam[ix, iy]), 9)
            groups.setdefault(key, []).extend(_mode_candidates(ws, sector, ix, iy))
    vecs, eigs = [], []
    for lam in sorted(groups):
        m = np.array([c.reshape(-1) for c in groups[lam]]) / N
        u, s, vt = np.linalg.svd(m, full_matrices=False)
        rank = int(np.count_nonzero(s > 1e-8 * s.max()))
        vecs.append(vt[:rank] * N)
        eigs.extend([lam] * rank)
    basis = np.concatenate(vecs).reshape(-1, 2, N, N, 3) if vecs else np.zeros((0, 2, N, N, 3))
    return LowModeSpace(base, N, mu, basis, np.array(eigs))


def low_mode_projection(b, space):
    """Orthogonal split ``b = b_par + b_perp``."""
    b_par = space.project(b)
    return b_par, np.asarray(b, dtype=float) - b_par


def greens_operator(f, base):
    """Pseudo-inverse of the flat Laplacian on two-forms."""
    return flat_green(f, base)


def kuranishi_map(a, base):
    """kappa(a) = a + 1/2 d_Gamma^* G [a, a], with [a, a] = 2 [a_x, a_y] dx^dy."""
    a = np.asarray(a, dtype=float)
    aa = 2.0 * band_limit(lie.bracket(a[0], a[1]))
    flat = Connection(base, np.zeros_like(a))
    return a + 0.5 * codifferential(flat, greens_operator(aa, base))


@dataclass
class KuranishiSolution:
    a_par: np.ndarray  # coordinates
    a_perp: np.ndarray  # one-form
    residual: float
    iterations: int
    space: LowModeSpace

    def connection(self):
        return Connection(self.space.base, self.space.field(self.a_par) + self.a_perp)


def _upsilon(space, a_par_field, a_perp):
    """Pi_perp of the slice gradient at Gamma + a_par + a_perp."""
    A = Connection(space.base, a_par_field + a_perp)
    g = gradient_slice(A)
    return g - space.project(g), A


def solve_kuranishi(a_par, space, tol=1e-12, max_iter=200, delta=0.5, method="picard"):
    """Solve the high-mode equation for ``a_perp`` given low-mode coordinates.

    Picard iteration ``a_perp <- -G_perp Pi_perp N(a)`` where ``N`` is the
    nonlinear part of the slice gradient.  ``method="newton"`` uses
    Jacobian-free Newton steps with the slice Hessian instead.
    """
    a_par = np.asarray(a_par, dtype=float)
    if a_par.shape != (space.dim,):
        raise ValueError(f"expected {space.dim} coordinates, got shape {a_par.shape}")
    par = space.field(a_par)
    size = l2_norm(par)
    if size > delta:
        raise NoConvergence(f"||a_par|| = {size:.3g} exceeds the Kuranishi radius {delta:.3g}")
    base = space.base
    perp = np.zeros_like(par)
    ups, A = _upsilon(space, par, perp)
    res = l2_norm(ups)
    history = [res]
    for it in range(max_iter):
        if res <= tol:
            return KuranishiSolution(a_par, perp, res, it, space)
        if method == "newton":
            perp = perp + _newton_step(space, A, ups)
        else:
            # ups = Delta a_perp + Pi_perp(nonlinear); solve Delta a_perp = -Pi_perp(nonlinear)
            nonlin = ups - flat_laplacian(perp, base)
            perp = -flat_green(nonlin, base)
            perp = perp - space.project(perp)
        ups, A = _upsilon(space, par, perp)
        res = l2_norm(ups)
        history.append(res)
        if not np.isfinite(res) or (it > 5 and res > 10 * history[0] + 1e-300):
            break
    if res <= tol:
        return KuranishiSolution(a_par, perp, res, len(history) - 1, space)
    raise NoConvergence(f"Kuranishi residual {res:.3g} above tolerance {tol:.3g}")


def _newton_step(space, A, ups):
    shape = ups.shape

    def jac(v):
        v = v.reshape(shape)
        v = v - space.project(v)
        hv = hessian_apply(A, v)
        return (hv - space.project(hv)).reshape(-1)

    n = ups.size
    op = LinearOperator((n, n), matvec=jac)
    sol, info = gmres(op, -ups.reshape(-1), rtol=1e-12, atol=0.0, maxiter=200)
    step = sol.reshape(shape)
    return step - space.project(step)


def balancing(a_par, space, tol=1e-12, **kwargs):
    """Low-mode coordinates of the slice gradient at the Kuranishi solution."""
    sol = solve_kuranishi(a_par, space, tol=tol, **kwargs)
    g = gradient_slice(sol.connection())
    return space.coords(g)


def balancing_with_solution(a_par, space, tol=1e-12, **kwargs):
    sol = solve_kuranishi(a_par, space, tol=tol, **kwargs)
    return space.coords(gradient_slice(sol.connection())), sol


def write_balancing_csv(path, samples):
    """``samples``: iterable of (coords, chi, residual)."""
    samples = list(samples)
    if not samples:
        raise ValueError("no samples to write")
    n = len(samples[0][0])
    header = [f"coord_{i}" for i in range(n)] + [f"chi_{i}" for i in range(n)] + ["residual"]
    from .io import atomic_open

    with atomic_open(path, newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for coords, chi, res in samples:
            w.writerow([f"{float(v):.17g}" for v in (*coords, *chi, res)])
