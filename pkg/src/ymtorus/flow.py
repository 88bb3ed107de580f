"""Yang-Mills gradient flow on the Coulomb slice of a flat base.

The slice flow ``da/dt = -Pi_Gamma d_A^* F_A`` is split as

    da/dt = -Delta_Gamma a + N(a),   N(a) = Delta_Gamma a - Pi_Gamma d_A^* F_A

where ``Delta_Gamma`` is diagonal in the Fourier / ad-K mode basis.  The
default integrator is second-order exponential time differencing (ETD-RK2,
Cox-Matthews) with step-doubling error control; classical RK4 on the full
right-hand side is kept for cross-validation.

Along every run the dissipation integral ``int ||grad||^2 dt`` and the arc
length ``int ||grad|| dt`` are accumulated step by step with the endpoint
corrected trapezoid rule, using ``d/dt ||g||^2 = -2 <g, H g>`` from the
Hessian.
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DidNotConverge, InsufficientDecay, NotNearFlat, StepRejected
from .gaugefield import (
    Connection,
    coulomb_project,
    energy,
    flat_laplacian,
    gradient_and_curvature,
    gradient_slice,
    hessian_apply,
    slice_residual,
)
from .lattice import from_modes, l2_inner, l2_norm, to_modes

INTEGRATORS = ("etdrk2", "rk4")


@dataclass
class FlowConfig:
    t_max: float = 10.0
    grad_tol: float = 1e-10
    integrator: str = "etdrk2"
    dt0: float = 1e-3
    dt_min: float = 1e-14
    dt_max: float = math.inf
    rtol: float = 1e-9
    atol: float = 1e-15
    # cap on dt * 2 * (Rayleigh quotient of the Hessian along the gradient)
    quad_limit: float = 0.2
    record_stride: int = 1
    max_steps: int = 500_000
    keep_states: bool = True

    def __post_init__(self):
        if not self.t_max > 0:
            raise ValueError("t_max must be positive")
        if not self.grad_tol > 0:
            raise ValueError("gradient tolerance must be positive")
        if self.integrator not in INTEGRATORS:
            raise ValueError(f"integrator must be one of {INTEGRATORS}")
        if self.record_stride < 1:
            raise ValueError("record_stride must be >= 1")


@dataclass
class FlowState:
    connection: Connection
    t: float = 0.0


@dataclass
class Trajectory:
    t: np.ndarray
    energy: np.ndarray
    grad_l2: np.ndarray
    slice_residual: np.ndarray
    dist_l2: np.ndarray
    arclength: np.ndarray
    dissipation: np.ndarray
    terminal: Connection
    converged: bool
    initial: Connection
    states: list = field(default_factory=list, repr=False)
    steps: int = 0
    rejected: int = 0

    def energy_equality_residual(self):
        """|int ||grad||^2 dt - (E(0) - E(T))|."""
        return abs(self.dissipation[-1] - (self.energy[0] - self.energy[-1]))

    def distances_to_terminal(self):
        if not self.states:
            raise ValueError("trajectory was recorded without states")
        aT = self.terminal.a
        return np.array([l2_norm(a - aT) for a in self.states])

    def homotopy_parameter(self):
        """Flow time mapped to [0, 1) by s = 1 - exp(-t)."""
        return -np.expm1(-self.t)

    def write_csv(self, path):
        write_trajectory_csv(self, path)


CSV_HEADER = ["t", "energy", "grad_l2", "slice_residual", "dist_l2", "arclength"]


def format_double(x):
    return f"{float(x):.17g}"


def trajectory_rows(traj):
    cols = [traj.t, traj.energy, traj.grad_l2, traj.slice_residual, traj.dist_l2, traj.arclength]
    for row in zip(*cols):
        yield [format_double(v) for v in row]


def write_trajectory_csv(traj, path):
    from .io import atomic_open

    with atomic_open(path, newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        w.writerows(trajectory_rows(traj))


def read_trajectory_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if rows[0] != CSV_HEADER:
        raise ValueError(f"unexpected trajectory header {rows[0]}")
    data = np.array([[float(v) for v in r] for r in rows[1:]])
    return {name: data[:, i] for i, name in enumerate(CSV_HEADER)}


# -- integrators -----------------------------------------------------------------


def _phi1(z):
    small = np.abs(z) < 1e-2
    zs = np.where(small, 1.0, z)
    return np.where(small, 1.0 + z / 2.0 + z * z / 6.0 + z**3 / 24.0, np.expm1(zs) / zs)


def _phi2(z):
    small = np.abs(z) < 1e-2
    zs = np.where(small, 1.0, z)
    return np.where(
        small, 0.5 + z / 6.0 + z * z / 24.0 + z**3 / 120.0, (np.expm1(zs) - zs) / (zs * zs)
    )


def _nonlinear(A, grad=None):
    g = gradient_slice(A) if grad is None else grad
    return flat_laplacian(A.a, A.base) - g


def _etd_factors(A, dt):
    ws = A.base.workspace(A.N)
    out = []
    for lam in (ws.lam_K, ws.lam_w):
        z = -dt * np.where(ws.resolved, lam, 0.0)
        out.append((np.exp(z), dt * _phi1(z), dt * _phi2(z)))
    return out


def _etdrk2(A, dt, grad=None):
    (eK, p1K, p2K), (ew, p1w, p2w) = _etd_factors(A, dt)
    aK, aw = to_modes(A.a)
    n0K, n0w = to_modes(_nonlinear(A, grad))
    predK = eK * aK + p1K * n0K
    predw = ew * aw + p1w * n0w
    B = A.with_a(from_modes(predK, predw))
    n1K, n1w = to_modes(_nonlinear(B))
    newK = predK + p2K * (n1K - n0K)
    neww = predw + p2w * (n1w - n0w)
    return A.with_a(coulomb_project(from_modes(newK, neww), A.base))


def _rk4(A, dt, grad=None):
    def rhs(a):
        return -gradient_slice(A.with_a(a))

    a = A.a
    k1 = -grad if grad is not None else rhs(a)
    k2 = rhs(a + 0.5 * dt * k1)
    k3 = rhs(a + 0.5 * dt * k2)
    k4 = rhs(a + dt * k3)
    new = a + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return A.with_a(coulomb_project(new, A.base))


_STEPPERS = {"etdrk2": _etdrk2, "rk4": _rk4}
_ORDER = {"etdrk2": 2, "rk4": 4}


def step(state, dt, integrator="etdrk2", energy_guard=1e-12):
    """Advance one step; raises StepRejected if the energy goes up."""
    A = state.connection
    e0 = energy(A)
    B = _STEPPERS[integrator](A, dt)
    e1 = energy(B)
    if e1 > e0 + energy_guard * e0:
        raise StepRejected(f"energy increased from {e0:.17g} to {e1:.17g}")
    return FlowState(B, state.t + dt)


class _Sample:
    """Gradient, its norm, energy and the Hessian Rayleigh quotient at a state."""

    __slots__ = ("A", "g", "gg", "gn", "rho", "E")

    def __init__(self, A):
        self.A = A
        self.g, f = gradient_and_curvature(A)
        self.E = 0.5 * l2_inner(f, f)
        self.gg = l2_inner(self.g, self.g)
        self.gn = math.sqrt(self.gg)
        self.rho = l2_inner(self.g, hessian_apply(A, self.g, f)) / self.gg if self.gg else 0.0


def _hermite(dt, y0, y1, dy0, dy1):
    return 0.5 * dt * (y0 + y1) + dt * dt / 12.0 * (dy0 - dy1)


def run(initial, config=None, raise_on_failure=False):
    """Integrate the slice flow from ``initial`` until ||grad|| <= tol or t_max.

    ``initial`` may be a Connection or a FlowState.  The returned trajectory
    has ``converged=False`` when t_max (or max_steps) was reached; with
    ``raise_on_failure`` a DidNotConverge carrying it is raised instead.
    """
    config = config or FlowConfig()
    state = initial if isinstance(initial, FlowState) else FlowState(initial)
    A = state.connection
    A = A.with_a(coulomb_project(A.a, A.base))
    a0 = A.a.copy()
    stepper = _STEPPERS[config.integrator]
    order = _ORDER[config.integrator]

    t = state.t
    cur = _Sample(A)
    rec = {k: [] for k in ("t", "E", "g", "r", "d", "s", "q")}
    states = []
    arclen = 0.0
    dissip = 0.0

    def record(sample, t):
        rec["t"].append(t)
        rec["E"].append(sample.E)
        rec["g"].append(sample.gn)
        rec["r"].append(slice_residual(sample.A))
        rec["d"].append(l2_norm(sample.A.a))
        rec["s"].append(arclen)
        rec["q"].append(dissip)
        if config.keep_states:
            states.append(sample.A.a.copy())

    record(cur, t)
    dt = min(config.dt0, config.dt_max)
    nsteps = rejected = 0
    converged = cur.gn <= config.grad_tol
    since_record = 0

    while not converged and t < config.t_max and nsteps < config.max_steps:
        if cur.rho > 0:
            dt = min(dt, config.quad_limit / (2.0 * cur.rho))
        dt = min(dt, config.dt_max, config.t_max - t)
        dt = max(dt, config.dt_min)

        full = stepper(cur.A, dt, cur.g)
        half = stepper(cur.A, 0.5 * dt, cur.g)
        half = stepper(half, 0.5 * dt)
        err = l2_norm(half.a - full.a) / (2**order - 1)
        scale = config.rtol * max(l2_norm(half.a), l2_norm(cur.A.a)) + config.atol
        ratio = err / scale if scale > 0 else 0.0

        if ratio > 1.0 and dt > config.dt_min:
            rejected += 1
            dt *= max(0.2, 0.9 * ratio ** (-1.0 / (order + 1)))
            continue

        # local Richardson extrapolation
        nxt = _Sample(half.with_a(half.a + (half.a - full.a) / (2**order - 1)))
        if nxt.E > cur.E * (1.0 + 1e-12) + 1e-300 and dt > config.dt_min:
            rejected += 1
            dt *= 0.5
            continue

        # endpoint-corrected trapezoid for int g^2 and int g
        dissip += _hermite(dt, cur.gg, nxt.gg, -2 * cur.rho * cur.gg, -2 * nxt.rho * nxt.gg)
        arclen += _hermite(dt, cur.gn, nxt.gn, -cur.rho * cur.gn, -nxt.rho * nxt.gn)
        t += dt
        nsteps += 1
        since_record += 1
        cur = nxt
        converged = cur.gn <= config.grad_tol
        if since_record >= config.record_stride or converged:
            record(cur, t)
            since_record = 0

        grow = 4.0 if ratio == 0 else min(4.0, 0.9 * ratio ** (-1.0 / (order + 1)))
        dt *= max(grow, 0.2)

    if since_record:
        record(cur, t)

    traj = Trajectory(
        t=np.array(rec["t"]),
        energy=np.array(rec["E"]),
        grad_l2=np.array(rec["g"]),
        slice_residual=np.array(rec["r"]),
        dist_l2=np.array(rec["d"]),
        arclength=np.array(rec["s"]),
        dissipation=np.array(rec["q"]),
        terminal=cur.A,
        converged=bool(converged),
        initial=Connection(A.base, a0),
        states=states,
        steps=nsteps,
        rejected=rejected,
    )
    if raise_on_failure and not converged:
        raise DidNotConverge(
            f"flow stopped at t={t:.6g} with ||grad|| = {cur.gn:.3g} > {config.grad_tol:.3g}",
            traj,
        )
    return traj


# -- decay fitting -------------------------------------------------------------

REGIME_THRESHOLD = 0.98
QUANTITIES = ("energy", "distance")


@dataclass
class DecayFit:
    """Regime and rate of a decaying series.

    ``rate`` is the exponential rate r in ``C exp(-r t)`` or the power q in
    ``C t^(-q)``.  ``theta`` is the Lojasiewicz exponent implied by the
    regime (nan when undecided).
    """

    regime: str
    rate: float
    prefactor: float
    theta: float
    r2: float
    r2_exponential: float
    r2_power: float
    quantity: str = "distance"
    n_fit: int = 0
    limit_offset: float = 0.0

    @property
    def alpha(self):
        return 1.0 / (1.0 - self.theta)

    @property
    def lam(self):
        return 2.0 / self.alpha


def _linfit(x, y):
    """Least squares y = m x + b; returns (m, b, R^2)."""
    m, b = np.polyfit(x, y, 1)
    resid = y - (m * x + b)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return float(m), float(b), r2


def _theta_from(regime, rate, quantity):
    if regime == "exponential":
        return 0.5
    if regime != "power" or not rate > 0:
        return math.nan
    if quantity == "energy":
        # E ~ t^(-1/(2 theta - 1))
        return (rate + 1.0) / (2.0 * rate)
    return (1.0 + rate) / (1.0 + 2.0 * rate)


def _fit_models(t, y):
    """Log-linear and log-log fits on the later half of the log decay."""
    ly = np.log(y)
    window = ly <= 0.5 * (ly[0] + ly[-1])
    window &= t > 0
    if np.count_nonzero(window) < 3:
        window = t > 0
    tw, lw = t[window], ly[window]
    m_e, b_e, r2_e = _linfit(tw, lw)
    m_p, b_p, r2_p = _linfit(np.log(tw), lw)
    return (-m_e, math.exp(b_e), r2_e), (-m_p, math.exp(b_p), r2_p), int(tw.size)


def fit_series(t, values, quantity="distance", min_samples=20, max_ratio=0.1):
    """Classify the decay of ``values(t)`` as exponential or power law."""
    if quantity not in QUANTITIES:
        raise ValueError(f"quantity must be one of {QUANTITIES}")
    t = np.asarray(t, dtype=float)
    y = np.asarray(values, dtype=float)
    keep = np.isfinite(y) & (y > 0)
    t, y = t[keep], y[keep]
    if t.size < min_samples:
        raise InsufficientDecay(f"need at least {min_samples} positive samples, got {t.size}")
    if y[-1] / y[0] > max_ratio:
        raise InsufficientDecay(
            f"series decayed only by a factor {y[0] / y[-1]:.3g} (terminal/initial > {max_ratio})"
        )
    (r_e, c_e, r2_e), (q, c_p, r2_p), n = _fit_models(t, y)
    if max(r2_e, r2_p) < REGIME_THRESHOLD:
        regime, rate, pref, r2 = "undecided", math.nan, math.nan, max(r2_e, r2_p)
    elif r2_e >= r2_p:
        regime, rate, pref, r2 = "exponential", r_e, c_e, r2_e
    else:
        regime, rate, pref, r2 = "power", q, c_p, r2_p
    return DecayFit(regime, rate, pref, _theta_from(regime, rate, quantity), r2, r2_e, r2_p,
                    quantity, n)


def _model_value(fit, t):
    if fit.regime == "exponential":
        return fit.prefactor * math.exp(-fit.rate * t)
    if fit.regime == "power":
        return fit.prefactor * t ** (-fit.rate)
    return 0.0


def _remaining_length_guess(traj):
    """g(T) / rho(T): the arc length still to go if g decayed exponentially."""
    t, g = traj.t, traj.grad_l2
    if t.size < 2 or not (g[-1] > 0 and g[-2] > 0) or t[-1] <= t[-2]:
        return 0.0
    rho = -(math.log(g[-1]) - math.log(g[-2])) / (t[-1] - t[-2])
    return g[-1] / rho if rho > 0 else 0.0


def fit_decay(traj, quantity="distance", max_iter=100, rtol=1e-8):
    """Fit the decay of a flow trajectory.

    ``distance`` uses ``||a(t) - a(T)||`` with the terminal state standing in
    for the limit.  The proxy undershoots the true distance by roughly
    ``||a(T) - a_inf||``; that offset is seeded from the terminal gradient,
    then replaced by the fitted model's value at ``T`` until it settles.
    """
    if quantity == "energy":
        return fit_series(traj.t, traj.energy, "energy")
    if quantity != "distance":
        raise ValueError(f"quantity must be one of {QUANTITIES}")
    t = traj.t[:-1]
    d = traj.distances_to_terminal()[:-1]
    T = float(traj.t[-1])
    offset = _remaining_length_guess(traj)
    fit = fit_series(t, d + offset, "distance")
    for _ in range(max_iter):
        new = _model_value(fit, T)
        if not np.isfinite(new) or new <= 0:
            break
        done = abs(new - offset) <= rtol * new
        offset = new
        fit = fit_series(t, d + offset, "distance")
        if done:
            break
    fit.limit_offset = offset
    return fit


# -- retraction onto the flat moduli ---------------------------------------------


@dataclass
class Retraction:
    point: object
    trajectory: Trajectory
    holonomy: object
    curvature_l2: float

    def homotopy(self):
        """(s, E) samples of H([A], s) with s = 1 - exp(-t)."""
        return self.trajectory.homotopy_parameter(), self.trajectory.energy


def retract(initial, config=None, epsilon=0.1, holonomy_tol=1e-4, flat_factor=10.0, refine=1):
    """Flow ``initial`` to a flat connection and read off its pillowcase point.

    Returns ``(PillowcasePoint, Trajectory)``.  Raises NotNearFlat if the
    initial curvature exceeds ``epsilon`` or the terminal curvature exceeds
    ``flat_factor * grad_tol``; DidNotConverge propagates from the flow.
    """
    res = retract_full(initial, config, epsilon, holonomy_tol, flat_factor, refine)
    return res.point, res.trajectory


def retract_full(initial, config=None, epsilon=0.1, holonomy_tol=1e-4, flat_factor=10.0,
                 refine=1):
    """Like :func:`retract` but returns a :class:`Retraction` with diagnostics."""
    from .moduli import holonomy, to_pillowcase

    config = config or FlowConfig()
    f0 = math.sqrt(2.0 * energy(initial))
    if f0 > epsilon:
        raise NotNearFlat(f"initial ||F|| = {f0:.3g} exceeds epsilon = {epsilon:.3g}")
    traj = run(initial, config, raise_on_failure=True)
    fT = math.sqrt(2.0 * traj.energy[-1])
    if fT > flat_factor * config.grad_tol:
        raise NotNearFlat(f"terminal ||F|| = {fT:.3g} above {flat_factor} x tolerance")
    rho = holonomy(traj.terminal, refine)
    return Retraction(to_pillowcase(rho, holonomy_tol), traj, rho, fT)
