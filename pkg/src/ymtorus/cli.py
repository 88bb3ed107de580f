"""Command-line driver: ``ym <subcommand> [options]``.

Exit codes: 0 success, 1 experiment failure (no convergence, not near flat,
...), 2 configuration error.  Options may also come from a JSON file given
with ``--config``; its keys are the long option names with dashes replaced
by underscores, and command-line flags override them.  Every output file is
written atomically, CSV next to a JSON summary.
"""

import argparse
import csv
import json
import math
import os
import re
import sys

import numpy as np

from . import flow as flowmod
from . import gaugefield as gf
from . import io
from . import kuranishi as kur
from . import lattice, lie, lojasiewicz as loj, moduli, selftest
from .errors import ConfigError, YMError

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


# -- value parsing ---------------------------------------------------------------

_ANGLE = re.compile(r"^\s*(-)?\s*(?:(\d*\.?\d*(?:[eE][-+]?\d+)?)\s*\*?\s*)?(pi)?\s*(?:/\s*(\d+(?:\.\d*)?))?\s*$")


def parse_angle(text):
    """Radians as a decimal, or multiples/fractions of ``pi`` (``pi/2``, ``3pi/2``, ``-pi``)."""
    if isinstance(text, (int, float)) and not isinstance(text, bool):
        return float(text)
    s = str(text).strip().lower()
    m = _ANGLE.match(s)
    if not m or not (m.group(2) or m.group(3)):
        raise ValueError(f"not an angle: {text!r}")
    sign = -1.0 if m.group(1) else 1.0
    coef = float(m.group(2)) if m.group(2) else 1.0
    val = coef * (math.pi if m.group(3) else 1.0)
    if m.group(4):
        val /= float(m.group(4))
    return sign * val


def parse_base(text):
    if isinstance(text, (list, tuple)):
        parts = list(text)
    else:
        parts = str(text).split(",")
    if len(parts) != 2:
        raise ValueError(f"base must be 'alpha,beta', got {text!r}")
    return parse_angle(parts[0]), parse_angle(parts[1])


def parse_init(text):
    """flat | ray:<t> | random:<amplitude> | snapshot:<path>."""
    s = str(text)
    kind, _, arg = s.partition(":")
    if kind == "flat" and not arg:
        return ("flat", None)
    if kind in ("ray", "random"):
        return (kind, float(arg))
    if kind == "snapshot" and arg:
        return (kind, arg)
    raise ValueError(f"init must be flat, ray:<t>, random:<amp> or snapshot:<path>, got {text!r}")


def _positive_int(text):
    v = int(text)
    if v <= 0:
        raise ValueError("must be a positive integer")
    return v


def _seed(text):
    v = int(text)
    if not 0 <= v < 2**64:
        raise ValueError("seed must be a 64-bit unsigned integer")
    return v


def _floats(text):
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).split(",") if v.strip()]


# -- argument parser -------------------------------------------------------------


def _common(p, grid=True, base=True, init=True):
    p.add_argument("--config", help="JSON file with option values")
    if grid:
        p.add_argument("--grid", type=_positive_int, default=16, help="grid points per axis")
    if base:
        p.add_argument("--base", type=parse_base, default=(0.0, 0.0),
                       help="flat base 'alpha,beta'; accepts pi and pi/2")
    if init:
        p.add_argument("--init", type=parse_init, default=("flat", None),
                       help="flat | ray:<t> | random:<amplitude> | snapshot:<path>")
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--out", help="output path (CSV; a .json summary is written alongside)")


def _flow_options(p):
    p.add_argument("--t-max", type=float, default=10.0)
    p.add_argument("--tol", type=float, default=1e-10, help="gradient L2 tolerance")
    p.add_argument("--integrator", choices=flowmod.INTEGRATORS, default="etdrk2")
    p.add_argument("--rtol", type=float, default=1e-9)
    p.add_argument("--stride", type=_positive_int, default=1)


def build_parser():
    parser = argparse.ArgumentParser(prog="ym", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("flow", help="slice Yang-Mills flow, trajectory CSV")
    _common(p)
    _flow_options(p)
    p.add_argument("--snapshot-out", help="write the terminal connection here")
    p.add_argument("--fit", choices=("none", "distance", "energy"), default="none",
                   help="decay fit included in the summary")

    p = sub.add_parser("retract", help="flow to a flat connection and report its pillowcase point")
    _common(p)
    _flow_options(p)
    p.add_argument("--epsilon", type=float, default=0.1, help="admissible initial ||F||")
    p.add_argument("--holonomy-tol", type=float, default=1e-4)

    p = sub.add_parser("scan-lambda", help="fit dist <= C ||F||^lambda along a ray")
    _common(p, init=False)
    p.add_argument("--ray", choices=("example", "transverse", "harmonic"), default="example")
    p.add_argument("--t-min", type=float, default=1e-3)
    p.add_argument("--t-max", type=float, default=1e-1)
    p.add_argument("--points", type=_positive_int, default=20)
    p.add_argument("--p", type=float, default=2.0, help="Sobolev exponent")
    p.add_argument("--mode", choices=("chart", "orbit"), default="chart")

    p = sub.add_parser("pillowcase", help="holonomy, pillowcase point and stratum of a connection")
    _common(p)
    p.add_argument("--tol", type=float, default=1e-4, help="holonomy commutator tolerance")
    p.add_argument("--nearest", action="store_true", help="also report the nearest flat connection")

    p = sub.add_parser("kuranishi", help="sample the balancing map near a flat base")
    _common(p, init=False)
    p.add_argument("--samples", type=_positive_int, default=100)
    p.add_argument("--radius", type=float, default=0.1)
    p.add_argument("--mu", type=float, default=None, help="low-mode cutoff")
    p.add_argument("--constants", action="store_true",
                   help="sample constant pairs (xi, eta) instead of random low-mode coordinates")

    p = sub.add_parser("loja", help="finite-dimensional gradient flow diagnostics")
    _common(p, grid=False, base=False, init=False)
    p.add_argument("--function", choices=sorted(loj.CORPUS), default="quartic")
    p.add_argument("--x0", type=_floats, default=None, help="comma separated start point")
    p.add_argument("--t-max", type=float, default=1e6)
    p.add_argument("--tol", type=float, default=1e-8, help="gradient norm tolerance")

    p = sub.add_parser("selftest", help="run every module's invariant suite")
    p.add_argument("--seed", type=_seed, default=0)
    return parser


def _apply_config(parser, args, argv):
    """Re-parse with values from ``--config`` as defaults; unknown keys are errors."""
    if not getattr(args, "config", None):
        return args
    try:
        with open(args.config) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {args.config}: malformed JSON at line {exc.lineno} "
                          f"column {exc.colno}: {exc.msg}") from exc
    except OSError as exc:
        raise ConfigError(f"config {args.config}: {exc.strerror}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {args.config}: top level must be an object")
    sub = parser._subparsers._group_actions[0].choices[args.command]
    actions = {a.dest: a for a in sub._actions if a.dest not in ("help", "config")}
    defaults = {}
    for key, value in data.items():
        if key not in actions:
            raise ConfigError(f"config key '{key}' is not an option of '{args.command}'")
        act = actions[key]
        try:
            if isinstance(act, argparse._StoreTrueAction):
                if not isinstance(value, bool):
                    raise ValueError("must be true or false")
                conv = value
            elif act.type is None:
                conv = str(value)
            elif isinstance(value, (list, tuple)) and act.type in (parse_base, _floats):
                conv = act.type(value)
            else:
                if isinstance(value, (dict, list, bool)) or value is None:
                    raise ValueError(f"unexpected {type(value).__name__}")
                conv = act.type(value if isinstance(value, str) else repr(value)
                                if isinstance(value, float) else str(value))
            if act.choices is not None and conv not in act.choices:
                raise ValueError(f"must be one of {sorted(act.choices)}")
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"config key '{key}': {exc}") from exc
        defaults[key] = conv
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


# -- initial data ----------------------------------------------------------------


def make_initial(args):
    kind, arg = args.init
    if kind == "snapshot":
        return io.load_snapshot(arg)
    N = args.grid
    try:
        lattice.Grid(N)
    except lattice.GridError as exc:
        raise ConfigError(f"config key 'grid': {exc}") from exc
    base = gf.FlatBase(*args.base)
    if kind == "flat":
        return gf.Connection(base, np.zeros((2, N, N, 3)))
    if kind == "ray":
        xi, eta = arg * lie.I, arg * lie.J
        return gf.Connection.constant(N, xi, eta, base)
    rng = np.random.default_rng(args.seed)
    a = gf.coulomb_project(lattice.random_smooth(rng, N, (2,), kmax=2), base)
    norm = lattice.sobolev_norm(a, 2, 1)
    return gf.Connection(base, a * (arg / norm if norm > 0 else 0.0))


def _summary_path(out):
    root, ext = os.path.splitext(out)
    return root + ".json" if ext != ".json" else root + ".summary.json"


def _emit(args, summary):
    text = json.dumps(summary, indent=2, sort_keys=True)
    if args.out:
        io.write_json(_summary_path(args.out), summary)
    print(text)


def _flow_config(args, keep_states=False):
    try:
        return flowmod.FlowConfig(t_max=args.t_max, grad_tol=args.tol, integrator=args.integrator,
                                  rtol=args.rtol, record_stride=args.stride,
                                  keep_states=keep_states)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _write_traj(args, traj):
    if args.out:
        flowmod.write_trajectory_csv(traj, args.out)


def _traj_summary(traj):
    return {
        "converged": traj.converged,
        "steps": traj.steps,
        "rejected": traj.rejected,
        "t_final": float(traj.t[-1]),
        "energy_initial": float(traj.energy[0]),
        "energy_final": float(traj.energy[-1]),
        "grad_final": float(traj.grad_l2[-1]),
        "arclength": float(traj.arclength[-1]),
        "energy_equality_residual": float(traj.energy_equality_residual()),
        "max_slice_residual": float(traj.slice_residual.max()),
    }


# -- subcommands -----------------------------------------------------------------


def cmd_flow(args):
    A = make_initial(args)
    traj = flowmod.run(A, _flow_config(args, keep_states=args.fit == "distance"))
    _write_traj(args, traj)
    if args.snapshot_out:
        io.save_snapshot(args.snapshot_out, traj.terminal)
    summary = _traj_summary(traj)
    if args.fit != "none":
        fit = flowmod.fit_decay(traj, args.fit)
        summary["fit"] = {"regime": fit.regime, "rate": fit.rate, "theta": fit.theta,
                          "r2": fit.r2}
    _emit(args, summary)
    if not traj.converged:
        print(f"flow did not reach ||grad|| <= {args.tol:g} by t = {args.t_max:g}",
              file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def cmd_retract(args):
    A = make_initial(args)
    res = flowmod.retract_full(A, _flow_config(args), epsilon=args.epsilon,
                               holonomy_tol=args.holonomy_tol)
    _write_traj(args, res.trajectory)
    summary = _traj_summary(res.trajectory)
    summary.update({
        "alpha": res.point.alpha,
        "beta": res.point.beta,
        "stratum": moduli.classify(res.point).value,
        "commutator": res.holonomy.commutator_norm,
        "terminal_curvature": res.curvature_l2,
    })
    _emit(args, summary)
    return EXIT_OK


def _ray(args):
    N = args.grid
    base = gf.FlatBase(*args.base)
    if args.ray == "example":
        return lambda t: gf.Connection.constant(N, t * lie.I, t * lie.J, base)
    if args.ray == "harmonic":
        return lambda t: gf.Connection.constant(N, t * lie.K, np.zeros(3), base)
    rng = np.random.default_rng(args.seed)
    flat = gf.Connection(base, np.zeros((2, N, N, 3)))
    exact = gf.covariant_d(flat, lattice.random_smooth(rng, N, kmax=2))
    b = gf.coulomb_project(lattice.random_smooth(rng, N, (2,), kmax=2), base)
    ws = base.workspace(N)
    # drop the harmonic part so the direction is transverse to the flat locus
    Kh, wh = lattice.to_modes(b)
    Kh = np.where(ws.kernel_K, 0.0, Kh)
    wh = np.where(ws.kernel_w, 0.0, wh)
    b = lattice.from_modes(Kh, wh)
    direction = exact / lattice.l2_norm(exact) + b / lattice.l2_norm(b)
    return lambda t: gf.Connection(base, t * direction)


def _threads():
    raw = os.environ.get("YM_THREADS")
    if raw is None:
        return min(4, os.cpu_count() or 1)
    try:
        v = int(raw)
        if v < 1:
            raise ValueError
    except ValueError as exc:
        raise ConfigError(f"environment variable YM_THREADS must be a positive integer, got {raw!r}") from exc
    return v


def cmd_scan(args):
    if not 0 < args.t_min < args.t_max:
        raise ConfigError("config key 't_min': need 0 < t_min < t_max")
    if args.p < 1:
        raise ConfigError("config key 'p': Sobolev exponent must be >= 1")
    t_grid = np.logspace(math.log10(args.t_min), math.log10(args.t_max), args.points)
    scan = moduli.lambda_scan(_ray(args), t_grid, p=args.p, mode=args.mode, workers=_threads())
    if args.out:
        moduli.write_scan(scan, args.out)
    _emit(args, scan.summary())
    return EXIT_OK


def cmd_pillowcase(args):
    A = make_initial(args)
    rho = moduli.holonomy(A)
    p = moduli.to_pillowcase(rho, args.tol)
    stratum = moduli.classify(p)
    summary = {
        "alpha": p.alpha,
        "beta": p.beta,
        "stratum": stratum.value,
        "zariski_dim": stratum.zariski_dim,
        "commutator": rho.commutator_norm,
        "curvature_l2": math.sqrt(2.0 * gf.energy(A)),
    }
    if args.nearest:
        nf = moduli.nearest_flat(A)
        summary["nearest"] = {"alpha": nf.point.alpha, "beta": nf.point.beta, "dist": nf.dist}
    _emit(args, summary)
    return EXIT_OK


def cmd_kuranishi(args):
    N = args.grid
    base = gf.FlatBase(*args.base)
    space = kur.low_mode_space(base, N, args.mu)
    rng = np.random.default_rng(args.seed)
    samples = []
    for _ in range(args.samples):
        if args.constants:
            xi, eta = rng.standard_normal((2, 3))
            r = args.radius * rng.uniform() / math.sqrt(xi @ xi + eta @ eta)
            coords = space.constant_coords(r * xi, r * eta)
        else:
            v = rng.standard_normal(space.dim)
            coords = v * args.radius * rng.uniform() / np.linalg.norm(v)
        chi, sol = kur.balancing_with_solution(coords, space)
        samples.append((coords, chi, sol.residual))
    if args.out:
        kur.write_balancing_csv(args.out, samples)
    _emit(args, {
        "dim": space.dim,
        "mu": space.mu,
        "samples": len(samples),
        "max_residual": max(s[2] for s in samples),
        "max_chi": max(float(np.linalg.norm(s[1])) for s in samples),
    })
    return EXIT_OK


def cmd_loja(args):
    f = loj.CORPUS[args.function]()
    x0 = np.array(args.x0 if args.x0 is not None else [0.5] * f.dim, dtype=float)
    if x0.size != f.dim:
        raise ConfigError(f"config key 'x0': {f.name} needs {f.dim} coordinates")
    traj = loj.flow_ode(f, x0, t_max=args.t_max, tol=args.tol, raise_on_failure=False)
    check = loj.energy_identity_check(traj)
    summary = {
        "function": f.name,
        "converged": traj.converged,
        "t_final": float(traj.t[-1]),
        "energy_initial": float(traj.energy[0]),
        "energy_final": float(traj.energy[-1]),
        "energy_identity_relative": check.relative,
    }
    if f.energy(x0) > 0:
        summary["arc_length"] = loj.arc_length_flow(f, x0).length
    if args.out:
        header = ["t"] + [f"x{i}" for i in range(f.dim)] + ["energy", "grad_norm"]
        with io.atomic_open(args.out, newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for t, x, e, g in zip(traj.t, traj.x, traj.energy, traj.grad_norm):
                w.writerow([io.fmt(v) for v in (t, *x, e, g)])
    _emit(args, summary)
    return EXIT_OK if traj.converged else EXIT_FAIL


def cmd_selftest(args):
    results = selftest.run_all(args.seed)
    failed = 0
    for suite, checks in results.items():
        passed = sum(checks.values())
        print(f"{suite:12s} {passed}/{len(checks)} passed")
        for name, ok in checks.items():
            if not ok:
                failed += 1
                print(f"  FAILED {name}")
    return EXIT_OK if failed == 0 else EXIT_FAIL


COMMANDS = {
    "flow": cmd_flow,
    "retract": cmd_retract,
    "scan-lambda": cmd_scan,
    "pillowcase": cmd_pillowcase,
    "kuranishi": cmd_kuranishi,
    "loja": cmd_loja,
    "selftest": cmd_selftest,
}


def dispatch(argv=None):
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    try:
        args = _apply_config(parser, args, argv)
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"ym: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except YMError as exc:
        print(f"ym: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK


def main():
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
