"""The pillowcase of flat SU(2) connections on the torus.

Points are pairs of holonomy eigenphases ``(alpha, beta)`` modulo ``2 pi Z^2``
and the sign flip ``(alpha, beta) -> (-alpha, -beta)``.  The fundamental
domain used for canonical forms is ``alpha in [0, pi]``, ``beta in [0, 2 pi)``,
with ``beta`` folded into ``[0, pi]`` on the two edges ``alpha in {0, pi}``
where the flip fixes ``alpha``.

Holonomies are path-ordered products of cell exponentials along grid lines,
ordered so that parallel transport ``g(x + h) = g(x) exp(h c(x))`` is
covariant under :func:`ymtorus.gaugefield.gauge_apply`.
"""

import csv
import enum
import math
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from . import lie
from .errors import DegenerateRay, NonCommuting
from .gaugefield import Connection, FlatBase, coulomb_gauge_fix, curvature
from .lattice import band_limit, l2_norm, lp_norm, sobolev_norm

TWO_PI = 2.0 * math.pi
EDGE_TOL = 1e-12


# -- holonomy ------------------------------------------------------------------


def _upsample_along(f, axis, factor):
    """Trigonometric interpolation of a band-limited field along one grid axis."""
    if factor == 1:
        return f
    N = f.shape[axis]
    M = N * factor
    F = sfft.fft(f, axis=axis)
    shape = list(F.shape)
    shape[axis] = M
    G = np.zeros(shape, dtype=complex)
    half = N // 2
    lo = [slice(None)] * F.ndim
    hi = [slice(None)] * F.ndim
    lo[axis] = slice(0, half)
    hi[axis] = slice(N - half + 1, N)
    glo = list(lo)
    ghi = [slice(None)] * F.ndim
    ghi[axis] = slice(M - half + 1, M)
    G[tuple(glo)] = F[tuple(lo)]
    G[tuple(ghi)] = F[tuple(hi)]
    return sfft.ifft(G, axis=axis).real * factor


def _half_cell_shift(f, axis):
    """Values of the trigonometric interpolant at the cell midpoints x_j + h/2."""
    M = f.shape[axis]
    k = sfft.fftfreq(M, 1.0 / M)
    shape = [1] * f.ndim
    shape[axis] = M
    phase = np.exp(1j * np.pi * k / M).reshape(shape)
    return sfft.ifft(sfft.fft(f, axis=axis) * phase, axis=axis).real


def _ordered_product(c, axis, factor):
    """exp(h c_{1/2}) exp(h c_{3/2}) ... along ``axis`` for every line.

    Midpoint samples make this the exponential midpoint rule, second order
    in the cell width.
    """
    fine = _half_cell_shift(_upsample_along(c, axis, factor), axis)
    M = fine.shape[axis]
    cells = lie.exponential(np.moveaxis(fine, axis, 0) / M)
    out = cells[0]
    for j in range(1, M):
        out = lie.multiply(out, cells[j])
    return out


@dataclass(frozen=True)
class HolonomyPair:
    """Holonomies around the x and y generators.

    ``h_mu`` and ``h_gamma`` are based at the grid origin, so they commute
    exactly for a flat connection.  ``rows_mu[j]`` is the x-loop holonomy
    based at ``(0, y_j)`` and ``cols_gamma[i]`` the y-loop at ``(x_i, 0)``.
    """

    h_mu: np.ndarray
    h_gamma: np.ndarray
    rows_mu: np.ndarray = None
    cols_gamma: np.ndarray = None

    @property
    def commutator_norm(self):
        """|h_mu h_gamma h_mu^-1 h_gamma^-1 - 1| (operator norm)."""
        g = lie.multiply(lie.multiply(self.h_mu, self.h_gamma), lie.inverse(self.h_mu))
        g = lie.multiply(g, lie.inverse(self.h_gamma))
        return float(np.linalg.norm(g - lie.IDENTITY))

    def mean_phases(self):
        """Row-averaged conjugacy invariants |log h| of both families."""
        mu = self.rows_mu if self.rows_mu is not None else self.h_mu[None]
        ga = self.cols_gamma if self.cols_gamma is not None else self.h_gamma[None]
        return float(lie.norm(lie.logarithm(mu)).mean()), float(lie.norm(lie.logarithm(ga)).mean())


def holonomy(A, refine=1):
    """Path-ordered holonomies of ``A``.

    Each cell contributes the exponential of the connection at its midpoint.
    ``refine > 1`` evaluates the product on a grid ``refine`` times finer,
    using the trigonometric interpolant of the connection; the error of the
    product rule falls like ``(h / refine)^2``.
    """
    if refine < 1:
        raise ValueError("refine must be >= 1")
    c = band_limit(A.total())
    rows = _ordered_product(c[0], 0, refine)  # (N, 4), indexed by y_j
    # the y-loop at x_i starting from (x_i, 0)
    cols = _ordered_product(c[1], 1, refine)  # (N, 4), indexed by x_i
    # transport from the origin to (0, y) is not needed for based loops at (0, 0)
    return HolonomyPair(rows[0], cols[0], rows, cols)


# -- pillowcase points -----------------------------------------------------------


class Stratum(enum.Enum):
    CENTRAL = "central"
    ABELIAN = "abelian"
    IRREDUCIBLE = "irreducible"

    @property
    def stabilizer(self):
        return {"central": "Z/2", "abelian": "U(1)", "irreducible": "trivial"}[self.value]

    @property
    def zariski_dim(self):
        """Dimension of the first harmonic space at points of this stratum."""
        return {"central": 6, "abelian": 2, "irreducible": None}[self.value]


@dataclass(frozen=True)
class PillowcasePoint:
    alpha: float
    beta: float

    def reduced(self):
        return reduce(self)

    def as_tuple(self):
        return (self.alpha, self.beta)

    def base(self):
        return FlatBase(self.alpha, self.beta)


def _wrap(x):
    """Into [0, 2 pi)."""
    y = math.fmod(x, TWO_PI)
    if y < 0:
        y += TWO_PI
    if y >= TWO_PI:
        y -= TWO_PI
    return y


def _snap_edge(a):
    if abs(a) <= EDGE_TOL or abs(a - TWO_PI) <= EDGE_TOL:
        return 0.0
    if abs(a - math.pi) <= EDGE_TOL:
        return math.pi
    return a


def reduce(p, beta=None):
    """Canonical representative of a point (or of ``(alpha, beta)``)."""
    if beta is None:
        alpha, beta = (p.alpha, p.beta) if isinstance(p, PillowcasePoint) else p
    else:
        alpha = p
    a = _snap_edge(_wrap(float(alpha)))
    b = _wrap(float(beta))
    if a > math.pi:
        a, b = TWO_PI - a, _wrap(TWO_PI - b)
    if a in (0.0, math.pi) and b > math.pi:
        b = TWO_PI - b
    if b > TWO_PI - EDGE_TOL:
        b = 0.0
    return PillowcasePoint(a, b)


def _axis_and_phases(rho):
    wm, vm = rho.h_mu[0], rho.h_mu[1:]
    wg, vg = rho.h_gamma[0], rho.h_gamma[1:]
    nm, ng = np.linalg.norm(vm), np.linalg.norm(vg)
    if max(nm, ng) == 0.0:
        axis = lie.K
    else:
        axis = vm / nm if nm >= ng else vg / ng
    return math.atan2(float(vm @ axis), float(wm)), math.atan2(float(vg @ axis), float(wg))


def to_pillowcase(rho, tol=1e-8):
    """Simultaneous eigenphases of a commuting holonomy pair, reduced."""
    comm = rho.commutator_norm
    if comm > tol:
        raise NonCommuting(f"holonomy commutator {comm:.3g} exceeds tolerance {tol:.3g}")
    return reduce(*_axis_and_phases(rho))


def classify(p, tol=1e-9):
    """Central iff both phases are 0 or pi modulo the reduction."""
    q = reduce(p)

    def central(x):
        return min(abs(x), abs(x - math.pi), abs(x - TWO_PI)) <= tol

    return Stratum.CENTRAL if central(q.alpha) and central(q.beta) else Stratum.ABELIAN


def _signed_diff(x):
    return (x + math.pi) % TWO_PI - math.pi


def pillowcase_dist(p, q):
    """Quotient distance: minimum over the sign flip and 2 pi shifts."""
    pa, pb = (p.alpha, p.beta) if isinstance(p, PillowcasePoint) else p
    qa, qb = (q.alpha, q.beta) if isinstance(q, PillowcasePoint) else q
    best = math.inf
    for s in (1.0, -1.0):
        da = _signed_diff(s * qa - pa)
        db = _signed_diff(s * qb - pb)
        best = min(best, math.hypot(da, db))
    return best


def lift_near(p, ref):
    """Orbit image of ``p`` in the plane closest to the point ``ref``."""
    pa, pb = (p.alpha, p.beta) if isinstance(p, PillowcasePoint) else p
    ra, rb = ref
    best = None
    for s in (1.0, -1.0):
        a, b = s * pa, s * pb
        a += TWO_PI * round((ra - a) / TWO_PI)
        b += TWO_PI * round((rb - b) / TWO_PI)
        d = math.hypot(a - ra, b - rb)
        if best is None or d < best[0]:
            best = (d, a, b)
    return best[1], best[2]


# -- nearest flat connection ---------------------------------------------------


@dataclass
class NearestFlat:
    point: PillowcasePoint
    dist: float
    base: FlatBase
    connection: Connection  # gauge fixed, stored relative to ``base``
    gauge: np.ndarray


def _refine_diagonal(A, alpha, beta, tol, max_iter, radius):
    """Alternate Coulomb gauge fixing and the optimal diagonal shift."""
    for _ in range(max_iter):
        base = FlatBase(alpha, beta)
        s, B = coulomb_gauge_fix(A, base=base, radius=radius)
        # d/d(alpha) ||B - Gamma(alpha, beta)||^2 vanishes at zero K-mean
        shift = B.a[..., 2].mean(axis=(1, 2))
        alpha += float(shift[0])
        beta += float(shift[1])
        if math.hypot(*shift) <= tol:
            break
    base = FlatBase(alpha, beta)
    s, B = coulomb_gauge_fix(A, base=base, radius=radius)
    return base, s, B


def _chart_seed(A, rho):
    """Eigenphases read along K, lifted next to the stored base."""
    a = math.atan2(rho.h_mu[3], rho.h_mu[0])
    b = math.atan2(rho.h_gamma[3], rho.h_gamma[0])
    ref = (A.base.alpha, A.base.beta)
    return ref[0] + _signed_diff(a - ref[0]), ref[1] + _signed_diff(b - ref[1])


def nearest_flat(A, mode="chart", tol=1e-12, max_iter=50, radius=5.0, refine=1):
    """Nearest diagonal flat connection after Coulomb gauge fixing.

    ``mode="chart"`` seeds from the holonomy eigenphases read along the
    diagonal axis of A's own chart and minimizes ``||u(A) - Gamma(alpha,
    beta)||_{L^2}`` locally.  ``mode="orbit"`` also tries the
    conjugation-invariant holonomy seed and keeps the smaller distance; near
    the corners, where the flat locus is a cone of commuting constants, this
    can be strictly smaller than the chart value.

    Returns a :class:`NearestFlat`.
    """
    if mode not in ("chart", "orbit"):
        raise ValueError("mode must be 'chart' or 'orbit'")
    rho = holonomy(A, refine)
    seeds = [_chart_seed(A, rho)]
    if mode == "orbit":
        # phases along the dominant holonomy axis, no commutation check
        seeds.append(lift_near(_axis_and_phases(rho), (A.base.alpha, A.base.beta)))
    best = None
    for alpha, beta in seeds:
        base, s, B = _refine_diagonal(A, alpha, beta, tol, max_iter, radius)
        d = l2_norm(B.a)
        if best is None or d < best.dist - 1e-15:
            best = NearestFlat(reduce(base.alpha, base.beta), d, base, B, s)
    return best


# -- lambda scans --------------------------------------------------------------


@dataclass
class LambdaScan:
    lam: float
    C: float
    r2: float
    t: np.ndarray
    curvature_norm: np.ndarray
    distance: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    p: float = 2.0

    def rows(self):
        cols = (self.t, self.curvature_norm, self.distance, self.alpha, self.beta)
        for row in zip(*cols):
            yield [f"{float(v):.17g}" for v in row]

    def summary(self):
        return {"lambda": self.lam, "C": self.C, "r2": self.r2}


SCAN_HEADER = ["t", "curvature_norm", "distance", "alpha", "beta"]


def _scan_point(A, p, mode):
    nf = nearest_flat(A, mode=mode)
    dist = sobolev_norm(nf.connection.a, p, 1)
    fnorm = lp_norm(curvature(A), p)
    return fnorm, dist, nf.point


def lambda_scan(ray, t_grid, p=2.0, mode="chart", workers=1, floor=1e-12):
    """Fit ``dist_{W^{1,p}}(A(t), flat) = C ||F_{A(t)}||_{L^p}^lambda``.

    ``ray`` maps a parameter value to a Connection.  Points are evaluated in
    parallel when ``workers > 1``.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    conns = [ray(t) for t in t_grid]
    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as ex:
            pts = list(ex.map(lambda A: _scan_point(A, p, mode), conns))
    else:
        pts = [_scan_point(A, p, mode) for A in conns]
    fn = np.array([q[0] for q in pts])
    dist = np.array([q[1] for q in pts])
    alpha = np.array([q[2].alpha for q in pts])
    beta = np.array([q[2].beta for q in pts])
    if np.all(dist < floor):
        raise DegenerateRay("all distances to the flat set are below the floor; the ray is flat")
    ok = (dist >= floor) & (fn > 0)
    if np.count_nonzero(ok) < 2:
        raise DegenerateRay("fewer than two usable points on the ray")
    x, y = np.log(fn[ok]), np.log(dist[ok])
    lam, logc = np.polyfit(x, y, 1)
    resid = y - (lam * x + logc)
    ss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss if ss > 0 else 1.0
    return LambdaScan(float(lam), float(math.exp(logc)), r2, t_grid, fn, dist, alpha, beta, p)


def write_scan(scan, csv_path, json_path=None):
    from .io import atomic_open, write_json

    with atomic_open(csv_path, newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SCAN_HEADER)
        w.writerows(scan.rows())
    if json_path is not None:
        write_json(json_path, scan.summary())
