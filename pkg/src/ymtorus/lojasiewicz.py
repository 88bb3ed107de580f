"""Finite-dimensional gradient systems with closed-form Lojasiewicz data.

The corpus covers both exponents that matter for the torus: ``theta = 1/2``
(quadratic, Morse-Bott, nondegenerate double well) and ``theta = 3/4``
(quartic).  Gradient and arc-length flows are integrated with scipy's
DOP853 and stop through terminal events.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson, solve_ivp

from .errors import DidNotConverge


@dataclass(frozen=True)
class TestFunction:
    """An energy with its gradient and whatever Lojasiewicz data is known.

    ``crit_dist`` / ``zero_dist`` map a point to its distance from the
    critical / zero set when those are known in closed form.
    """

    __test__ = False  # not a pytest class

    name: str
    dim: int
    energy: object
    gradient: object
    theta: float = None
    C: float = None
    crit_dist: object = None
    zero_dist: object = None
    center: np.ndarray = None
    alpha_dist: float = None


def _as_vec(x):
    return np.atleast_1d(np.asarray(x, dtype=float))


def quadratic(n=2):
    return TestFunction(
        "quadratic", n,
        lambda x: float(np.dot(x, x)),
        lambda x: 2.0 * _as_vec(x),
        theta=0.5, C=2.0,
        crit_dist=lambda x: float(np.linalg.norm(x)),
        zero_dist=lambda x: float(np.linalg.norm(x)),
        center=np.zeros(n), alpha_dist=2.0,
    )


def quartic():
    return TestFunction(
        "quartic", 1,
        lambda x: float(_as_vec(x)[0] ** 4),
        lambda x: 4.0 * _as_vec(x) ** 3,
        theta=0.75, C=4.0,
        crit_dist=lambda x: float(abs(_as_vec(x)[0])),
        zero_dist=lambda x: float(abs(_as_vec(x)[0])),
        center=np.zeros(1), alpha_dist=4.0,
    )


def morse_bott():
    """E(x, y) = x^2, critical along the y-axis."""
    return TestFunction(
        "morse_bott", 2,
        lambda x: float(_as_vec(x)[0] ** 2),
        lambda x: np.array([2.0 * _as_vec(x)[0], 0.0]),
        theta=0.5, C=2.0,
        crit_dist=lambda x: float(abs(_as_vec(x)[0])),
        zero_dist=lambda x: float(abs(_as_vec(x)[0])),
        center=np.zeros(2), alpha_dist=2.0,
    )


def double_well():
    """E = x^2 (x - 1)^2: zeros {0, 1}, one more critical point at 1/2."""

    def e(x):
        x = _as_vec(x)[0]
        return float(x * x * (x - 1.0) ** 2)

    def g(x):
        x = _as_vec(x)[0]
        return np.array([2.0 * x * (x - 1.0) * (2.0 * x - 1.0)])

    return TestFunction(
        "double_well", 1, e, g,
        theta=0.5,
        crit_dist=lambda x: float(min(abs(_as_vec(x)[0] - c) for c in (0.0, 0.5, 1.0))),
        zero_dist=lambda x: float(min(abs(_as_vec(x)[0] - c) for c in (0.0, 1.0))),
        center=np.zeros(1), alpha_dist=2.0,
    )


def squared(f):
    """F = E^2, whose critical set near a zero of E coincides with the zero set."""
    return TestFunction(
        f"{f.name}_squared", f.dim,
        lambda x: f.energy(x) ** 2,
        lambda x: 2.0 * f.energy(x) * f.gradient(x),
        crit_dist=f.zero_dist, zero_dist=f.zero_dist, center=f.center,
        alpha_dist=None if f.alpha_dist is None else 2.0 * f.alpha_dist,
    )


CORPUS = {"quadratic": quadratic, "quartic": quartic, "morse_bott": morse_bott,
          "double_well": double_well}


@dataclass(frozen=True)
class LojConstants:
    theta: float
    C: float
    sigma: float = 1.0
    delta: float = None

    def __post_init__(self):
        if not 0.5 <= self.theta < 1.0:
            raise ValueError("theta must lie in [1/2, 1)")
        if not self.C > 0:
            raise ValueError("C must be positive")
        if not 0.0 < self.sigma <= 1.0:
            raise ValueError("sigma must lie in (0, 1]")
        if self.delta is None:
            object.__setattr__(self, "delta", self.sigma / 4.0)
        if not 0.0 < self.delta <= self.sigma / 4.0:
            raise ValueError("delta must lie in (0, sigma/4]")

    @property
    def alpha(self):
        return 1.0 / (1.0 - self.theta)

    @property
    def lam(self):
        return 2.0 / self.alpha

    @property
    def beta_dist(self):
        return self.alpha / 2.0


# -- flows -----------------------------------------------------------------------


@dataclass
class ODETrajectory:
    t: np.ndarray
    x: np.ndarray  # (n_samples, dim)
    energy: np.ndarray
    grad_norm: np.ndarray
    converged: bool
    function: TestFunction = field(repr=False, default=None)


def _sample_times(sol_t, per_step):
    if per_step <= 1 or sol_t.size < 2:
        return sol_t
    pieces = [np.linspace(a, b, per_step, endpoint=False) for a, b in zip(sol_t[:-1], sol_t[1:])]
    return np.concatenate(pieces + [sol_t[-1:]])


def _record(f, t, xs, converged):
    xs = np.asarray(xs, dtype=float).reshape(len(t), -1)
    e = np.array([f.energy(x) for x in xs])
    g = np.array([np.linalg.norm(f.gradient(x)) for x in xs])
    return ODETrajectory(np.asarray(t, dtype=float), xs, e, g, converged, f)


def flow_ode(f, x0, t_max=100.0, tol=1e-10, rtol=1e-12, atol=1e-15, per_step=32,
             t_eval=None, raise_on_failure=True):
    """Integrate x' = -grad E(x) until ||grad E|| <= tol or t_max.

    Samples are the solver steps subdivided ``per_step`` times through the
    dense output, or the explicit ``t_eval`` grid when given.
    """
    x0 = _as_vec(x0)
    if np.linalg.norm(f.gradient(x0)) <= tol:
        return _record(f, np.array([0.0]), x0[None], True)

    def rhs(t, x):
        return -f.gradient(x)

    def done(t, x):
        return np.linalg.norm(f.gradient(x)) - tol

    done.terminal = True
    done.direction = -1
    sol = solve_ivp(rhs, (0.0, t_max), x0, method="DOP853", rtol=rtol, atol=atol,
                    events=done, dense_output=True)
    converged = sol.status == 1
    if t_eval is not None:
        ts = np.asarray(t_eval, dtype=float)
        ts = ts[ts <= sol.t[-1]]
    else:
        ts = _sample_times(sol.t, per_step)
    traj = _record(f, ts, sol.sol(ts).T, converged)
    if raise_on_failure and not converged:
        raise DidNotConverge(f"gradient flow of {f.name} did not reach tol by t = {t_max}", traj)
    return traj


@dataclass
class ArcLengthPath:
    s: np.ndarray
    y: np.ndarray
    speed: np.ndarray
    length: float
    converged: bool


def arc_length_flow(f, x0, tol=1e-20, t_max=1e16, rtol=1e-13, atol=1e-30):
    """Unit-speed descent dy/ds = -grad E / ||grad E|| until ||grad E|| <= tol.

    Integrated as the gradient flow with the arc length ``s' = ||grad E||``
    carried along, then read in the ``s`` parameter; this avoids the
    discontinuous unit field at the critical point.  Returns an
    :class:`ArcLengthPath` whose ``length`` is the total arc length S0.
    """
    x0 = _as_vec(x0)
    if not f.energy(x0) > 0:
        raise ValueError("arc-length flow needs E(x0) > 0")
    n = x0.size

    def rhs(t, z):
        g = f.gradient(z[:n])
        return np.concatenate([-g, [np.linalg.norm(g)]])

    def done(t, z):
        return np.linalg.norm(f.gradient(z[:n])) - tol

    done.terminal = True
    done.direction = -1
    z0 = np.concatenate([x0, [0.0]])
    sol = solve_ivp(rhs, (0.0, t_max), z0, method="DOP853", rtol=rtol, atol=atol, events=done)
    if sol.status != 1:
        raise DidNotConverge(f"arc-length flow of {f.name} did not reach tol by t = {t_max}")
    ys = sol.y[:n].T
    svals = sol.y[n]
    speed = []
    for y in ys:
        g = f.gradient(y)
        speed.append(np.linalg.norm(g / np.linalg.norm(g)) if np.linalg.norm(g) > 0 else 0.0)
    return ArcLengthPath(svals, ys, np.array(speed), float(svals[-1]), True)


def arc_length_bound(E0, theta, C):
    """E(x0)^(1 - theta) / ((1 - theta) C), the length bound from the gradient inequality."""
    return E0 ** (1.0 - theta) / ((1.0 - theta) * C)


# -- inequalities and envelopes --------------------------------------------------


@dataclass
class DistanceFit:
    """Regression ``log E = log C + alpha log dist``.

    ``C_valid`` is the largest constant for which the fitted power holds on
    every sample.
    """

    C: float
    alpha: float
    violations: int
    n: int
    r2: float
    C_valid: float = None


def _ball_samples(rng, center, radius, n):
    dim = center.size
    v = rng.standard_normal((n, dim))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    r = radius * rng.uniform(0.0, 1.0, n) ** (1.0 / dim)
    return center + v * r[:, None]


def critical_point_from_flow(f, x0, tol=1e-12, newton_steps=20, h=1e-6):
    """Flow endpoint from x0 polished by Newton steps on the gradient."""
    x = flow_ode(f, x0, t_max=1e4, tol=1e-8, raise_on_failure=False).x[-1]
    for _ in range(newton_steps):
        g = f.gradient(x)
        if np.linalg.norm(g) <= tol:
            break
        n = x.size
        H = np.empty((n, n))
        for i in range(n):
            e = np.zeros(n)
            e[i] = h
            H[:, i] = (f.gradient(x + e) - f.gradient(x - e)) / (2 * h)
        try:
            x = x - np.linalg.lstsq(H, g, rcond=None)[0]
        except np.linalg.LinAlgError:
            break
    return x


def verify_distance_inequality(f, delta, n_samples, rng=None, target="crit", center=None,
                               margin=0.01, floor=1e-300):
    """Fit E(x) = C dist(x, S)^alpha on a ball and count violations.

    ``S`` is the critical set (``target="crit"``) or zero set (``"zero"``).
    Without a closed-form distance the flow endpoint of each sample, polished
    by Newton, stands in for its nearest critical point.  A violation is a
    sample with ``E < (1 - margin) C dist^alpha``.
    """
    rng = np.random.default_rng() if rng is None else rng
    center = f.center if center is None else _as_vec(center)
    dist_fn = f.crit_dist if target == "crit" else f.zero_dist
    xs = _ball_samples(rng, center, delta, n_samples)
    if dist_fn is None:
        d = np.array([np.linalg.norm(x - critical_point_from_flow(f, x)) for x in xs])
    else:
        d = np.array([dist_fn(x) for x in xs])
    e = np.array([f.energy(x) for x in xs])
    ok = (d > floor) & (e > floor)
    lx, ly = np.log(d[ok]), np.log(e[ok])
    alpha, logc = np.polyfit(lx, ly, 1)
    resid = ly - (alpha * lx + logc)
    ss = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss if ss > 0 else 1.0
    C = math.exp(logc)
    violations = int(np.count_nonzero(e[ok] < (1.0 - margin) * C * d[ok] ** alpha))
    c_valid = float(np.min(e[ok] / d[ok] ** alpha))
    return DistanceFit(C, float(alpha), violations, int(np.count_nonzero(ok)), r2, c_valid)


def psi_envelope(theta, c, gamma_minus_a, t):
    """Convergence envelope of a gradient flow satisfying the gradient inequality.

    Exponential for theta = 1/2, power law for theta in (1/2, 1).
    """
    if not 0.5 <= theta < 1.0:
        raise ValueError("theta must lie in [1/2, 1)")
    if not c > 0:
        raise ValueError("c must be positive")
    if not gamma_minus_a > 0:
        raise ValueError("gamma - a must be positive")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be non-negative")
    if theta == 0.5:
        out = (2.0 / c) * math.sqrt(gamma_minus_a) * np.exp(-c * c * t / 2.0)
    else:
        base = c * c * (2.0 * theta - 1.0) * t + gamma_minus_a ** (1.0 - 2.0 * theta)
        out = base ** (-(1.0 - theta) / (2.0 * theta - 1.0)) / (c * (1.0 - theta))
    return out if out.ndim else float(out)


def fit_gradient_constant(f, xs, theta, level=0.0):
    """Largest c with ||grad E(x)|| >= c |E(x) - level|^theta on the samples."""
    ratios = []
    for x in np.atleast_2d(xs):
        e = abs(f.energy(x) - level)
        if e > 0:
            ratios.append(np.linalg.norm(f.gradient(x)) / e**theta)
    if not ratios:
        raise ValueError("no samples with nonzero energy")
    return float(min(ratios))


@dataclass
class EnergyCheck:
    dissipation: float
    drop: float
    residual: float
    relative: float
    flagged: bool


def energy_identity_check(traj, threshold=1e-6):
    """Residual of int ||grad E||^2 dt = E(0) - E(T) by Simpson quadrature."""
    diss = float(simpson(traj.grad_norm**2, x=traj.t)) if traj.t.size > 1 else 0.0
    drop = float(traj.energy[0] - traj.energy[-1])
    res = abs(diss - drop)
    e0 = float(traj.energy[0])
    rel = res / e0 if e0 > 0 else res
    return EnergyCheck(diss, drop, res, rel, rel > threshold)
