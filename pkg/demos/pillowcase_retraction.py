"""Flow near-flat connections to flat ones and read off pillowcase points.

Each random start is flowed to a flat connection; its holonomy pair then
commutes and its simultaneous eigenphases give a point of the pillowcase.
The same continuous initial field on a finer grid lands on the same point.
"""

import numpy as np

from ymtorus import flow
from ymtorus import gaugefield as gf
from ymtorus import lattice, moduli

cfg = flow.FlowConfig(t_max=200.0, grad_tol=1e-8, keep_states=False)
print(" seed   start base (alpha, beta)    limit point        stratum   N=32 shift")
for seed in range(6):
    points = []
    for N in (16, 32):
        rng = np.random.default_rng(seed)
        base = gf.FlatBase(rng.uniform(0, np.pi), rng.uniform(0, 2 * np.pi))
        a = gf.coulomb_project(lattice.random_smooth(rng, N, (2,)), base)
        A = gf.Connection(base, 0.03 * a / lattice.sobolev_norm(a, 2, 1))
        points.append(flow.retract(A, cfg)[0])
    p = points[0]
    print(f" {seed:4d}   ({base.alpha:.4f}, {base.beta:.4f})      ({p.alpha:.4f}, {p.beta:.4f})"
          f"   {moduli.classify(p).value:9s} {moduli.pillowcase_dist(*points):.1e}")

flat = gf.Connection.flat(16, np.pi, np.pi)
p, traj = flow.retract(flat)
print(f"\nflat start at the corner (pi, pi): {traj.steps} steps, point {p.as_tuple()}, "
      f"stratum {moduli.classify(p).value}")
