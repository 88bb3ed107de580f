"""Exponential versus power-law convergence of the Yang-Mills flow.

At an interior point of the pillowcase the flat set is a smooth surface and
the flow converges exponentially, at the rate of the first nonzero slice
eigenvalue.  At the product connection the constant mode s(I dx + J dy)
obeys ds/dt = -4 s^3 and decays like t^(-1/2).
"""

import math

import numpy as np

from ymtorus import flow
from ymtorus import gaugefield as gf
from ymtorus import lattice

N = 16
base = gf.FlatBase(math.pi / 2, math.pi / 2)
rng = np.random.default_rng(1)
a = gf.coulomb_project(lattice.random_smooth(rng, N, (2,)), base)
A = gf.Connection(base, 0.05 * a / lattice.sobolev_norm(a, 2, 1))

traj = flow.run(A, flow.FlowConfig(t_max=10.0))
fit = flow.fit_decay(traj, "distance")
print(f"interior start: converged at t = {traj.t[-1]:.3f} after {traj.steps} steps")
print(f"  regime {fit.regime}, rate {fit.rate:.3f} (2 pi^2 = {2 * math.pi**2:.3f}), "
      f"R^2 {fit.r2:.6f}")
print(f"  energy equality residual / E(0) = "
      f"{traj.energy_equality_residual() / traj.energy[0]:.1e}\n")

print("constant mode at the product connection (takes ~20 s)")
ray = flow.run(gf.example_ray(N, 0.05), flow.FlowConfig(t_max=2e5, grad_tol=1e-30))
fit = flow.fit_decay(ray, "distance")
print(f"  regime {fit.regime}, q = {fit.rate:.4f}, implied theta = {fit.theta:.4f}")
s_end = ray.terminal.a[0, 0, 0, 0]
print(f"  s(T) = {s_end:.6e}, closed form {(0.05**-2 + 8 * ray.t[-1]) ** -0.5:.6e}")
