"""Fast randomized invariant checks, one suite per module.

Each suite is a list of named checks returning a bool.  ``run_all`` is what
``ym selftest`` executes; it takes a few seconds.
"""

import math

import numpy as np

from . import flow, gaugefield as gf, kuranishi, lattice, lie, lojasiewicz as loj, moduli


def _rel(a, b):
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


def _lie_checks(rng):
    x, y, z = rng.standard_normal((3, 200, 3))
    br = lie.bracket
    jac = br(x, br(y, z)) + br(y, br(z, x)) + br(z, br(x, y))
    g = lie.qnormalize(rng.standard_normal((200, 4)))
    return {
        "bracket IJ = 2K": np.allclose(br(lie.I, lie.J), 2 * lie.K, atol=0),
        "antisymmetry": np.abs(br(x, y) + br(y, x)).max() < 1e-12,
        "jacobi": np.abs(jac).max() < 1e-12,
        "ad invariance": np.abs(lie.inner(br(z, x), y) + lie.inner(x, br(z, y))).max() < 1e-12,
        "exp inverse": np.abs(lie.multiply(lie.exponential(x), lie.exponential(-x))
                              - lie.IDENTITY).max() < 1e-12,
        "adjoint isometry": np.abs(lie.inner(lie.adjoint(g, x), lie.adjoint(g, y))
                                   - lie.inner(x, y)).max() < 1e-12,
    }


def _lattice_checks(rng):
    out = {}
    for N in (8, 16):
        f = lattice.band_limit(rng.standard_normal((N, N, 3)))
        g = lattice.band_limit(rng.standard_normal((N, N, 3)))
        for ax in ("x", "y"):
            s = lattice.l2_inner(lattice.spectral_derivative(f, ax), g) + lattice.l2_inner(
                f, lattice.spectral_derivative(g, ax))
            out[f"skew N={N} {ax}"] = abs(s) < 1e-10
        out[f"parseval N={N}"] = _rel(lattice.l2_inner(f, g), lattice.fourier_l2_inner(f, g)) < 1e-10
    A = gf.example_ray(16, 0.01)
    out["ray W12 norm"] = _rel(lattice.sobolev_norm(A.a, 2, 1), math.sqrt(2) * 0.01) < 1e-12
    return out


def _gauge_checks(rng):
    N = 16
    base = gf.FlatBase(*rng.uniform(0, math.pi, 2))
    A = gf.Connection(base, 0.3 * lattice.random_smooth(rng, N, (2,)))
    b = lattice.band_limit(lattice.random_smooth(rng, N, (2,)))
    c = lattice.band_limit(lattice.random_smooth(rng, N, (2,)))
    phi = lattice.random_smooth(rng, N)
    f = lattice.random_smooth(rng, N)
    pb = gf.coulomb_project(b, base)
    pc = gf.coulomb_project(c, base)
    # gauge products must stay resolved on the grid
    A32 = gf.Connection(base, 0.3 * lattice.random_smooth(rng, 32, (2,)))
    s = gf.gauge_exp(0.3 * lattice.random_smooth(rng, 32))
    hb = gf.hessian_apply(A, pb)
    hc = gf.hessian_apply(A, pc)
    flat = gf.Connection(base, np.zeros_like(b))
    scale = lattice.l2_norm(b) * lattice.l2_norm(f)
    return {
        "d1 adjoint": abs(lattice.l2_inner(gf.covariant_d1(A, b), f)
                          - lattice.l2_inner(b, gf.codifferential(A, f))) < 1e-10 * scale,
        "d0 adjoint": abs(lattice.l2_inner(gf.covariant_d(A, phi), b)
                          - lattice.l2_inner(phi, gf.codifferential0(A, b)))
        < 1e-10 * lattice.l2_norm(phi) * lattice.l2_norm(b),
        "projection idempotent": lattice.l2_norm(gf.coulomb_project(pb, base) - pb)
        < 1e-10 * lattice.l2_norm(b),
        "slice condition": lattice.l2_norm(gf.flat_codifferential0(pb, base))
        < 1e-10 * lattice.l2_norm(b),
        "energy gauge invariant": _rel(gf.energy(A32), gf.energy(gf.gauge_apply(s, A32))) < 1e-10,
        "hessian symmetric": abs(lattice.l2_inner(hb, pc) - lattice.l2_inner(pb, hc))
        < 1e-10 * lattice.l2_norm(hb) * lattice.l2_norm(pc),
        "hessian at flat base": lattice.l2_norm(
            gf.hessian_apply(flat, pb)
            - gf.coulomb_project(gf.codifferential(flat, gf.covariant_d1(flat, pb)), base))
        < 1e-10 * lattice.l2_norm(gf.hessian_apply(flat, pb)),
        "cohomology corner": gf.cohomology_dims(gf.PRODUCT) == (3, 6, 3),
        "cohomology interior": gf.cohomology_dims(gf.FlatBase(math.pi / 2, math.pi / 2)) == (1, 2, 1),
    }


def _flow_checks(rng):
    s0 = 0.1
    traj = flow.run(gf.example_ray(8, s0), flow.FlowConfig(t_max=1.0, grad_tol=1e-30))
    s_num = traj.terminal.a[0, 0, 0, 0]
    exact = (s0**-2 + 8.0 * traj.t[-1]) ** -0.5
    still = flow.run(gf.Connection.flat(8, 0.4, 1.1), flow.FlowConfig(t_max=1.0))
    return {
        "constant ray closed form": _rel(s_num, exact) < 1e-6,
        "energy monotone": bool(np.all(np.diff(traj.energy) <= 1e-12 * traj.energy[0])),
        "energy equality": traj.energy_equality_residual() <= 1e-6 * traj.energy[0],
        "flat data fixed": still.converged and still.arclength[-1] <= 1e-12,
    }


def _moduli_checks(rng):
    out = {}
    for _ in range(20):
        a, b = rng.uniform(-10, 10, 2)
        p = moduli.reduce(a, b)
        out.setdefault("reduce idempotent", True)
        out["reduce idempotent"] &= moduli.reduce(p) == p
        out.setdefault("flip identified", True)
        out["flip identified"] &= moduli.pillowcase_dist(p, moduli.reduce(-a, -b)) < 1e-12
    rho = moduli.holonomy(gf.Connection.flat(16, 0.7, 2.1))
    out["flat holonomy exact"] = np.abs(rho.h_mu - lie.exponential(0.7 * lie.K)).max() < 1e-13
    out["central corner"] = moduli.classify(moduli.PillowcasePoint(math.pi, math.pi)) is moduli.Stratum.CENTRAL
    nf = moduli.nearest_flat(gf.example_ray(16, 0.05))
    out["nearest flat on ray"] = abs(nf.dist - math.sqrt(2) * 0.05) < 1e-8
    return out


def _kuranishi_checks(rng):
    space = kuranishi.low_mode_space(gf.PRODUCT, 8)
    xi, eta = 0.05 * rng.standard_normal((2, 3))
    c = space.constant_coords(xi, eta)
    chi, sol = kuranishi.balancing_with_solution(c, space)
    return {
        "corner dimension 6": space.dim == 6,
        "constant a_perp vanishes": lattice.l2_norm(sol.a_perp) == 0.0,
        "pairing identity": abs(chi @ c - 2 * lie.norm(lie.bracket(xi, eta)) ** 2) < 1e-10,
    }


def _loja_checks(rng):
    q = loj.quartic()
    tr = loj.flow_ode(q, [0.5], t_max=100.0, raise_on_failure=False)
    exact = (0.5**-2 + 8 * tr.t) ** -0.5
    path = loj.arc_length_flow(q, [0.5])
    return {
        "quartic closed form": np.abs(tr.x[:, 0] - exact).max() < 1e-8,
        "arc length": abs(path.length - 0.5) < 1e-6,
        "psi at zero": abs(loj.psi_envelope(0.75, 1.0, 1.0, 0.0) - 4.0) < 1e-14,
        "energy identity": not loj.energy_identity_check(tr).flagged,
    }


SUITES = {
    "lie": _lie_checks,
    "lattice": _lattice_checks,
    "gaugefield": _gauge_checks,
    "flow": _flow_checks,
    "moduli": _moduli_checks,
    "kuranishi": _kuranishi_checks,
    "lojasiewicz": _loja_checks,
}


def run_all(seed=0):
    """{suite: {check: bool}}; exceptions count as failures."""
    results = {}
    for name, suite in SUITES.items():
        rng = np.random.default_rng(seed)
        try:
            results[name] = {k: bool(v) for k, v in suite(rng).items()}
        except Exception as exc:  # report, do not abort the other suites
            results[name] = {f"raised {type(exc).__name__}: {exc}": False}
    return results
