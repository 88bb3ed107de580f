"""How far is a connection from the flat set, given its curvature?

Along the ray A_t = t I dx + t J dy at the product connection the distance
to the flat set is linear in t while the curvature is quadratic, so
dist ~ ||F||^(1/2).  Along a ray that leaves an interior flat point
transversally both are linear and the exponent is 1.
"""

import math

import numpy as np

from ymtorus import gaugefield as gf
from ymtorus import lattice, moduli

N = 16
ts = np.logspace(-3, -1, 12)

print("ray t(I dx + J dy) at the product connection")
scan = moduli.lambda_scan(lambda t: gf.example_ray(N, t), ts)
for t, f, d in zip(scan.t, scan.curvature_norm, scan.distance):
    print(f"  t = {t:.2e}   ||F|| = {f:.3e}   dist = {d:.3e}")
print(f"  fitted exponent {scan.lam:.4f}, R^2 = {scan.r2:.6f}\n")

base = gf.FlatBase(math.pi / 2, math.pi / 2)
rng = np.random.default_rng(0)
flat = gf.Connection(base, np.zeros((2, N, N, 3)))
exact = gf.covariant_d(flat, lattice.random_smooth(rng, N))
b = gf.coulomb_project(lattice.random_smooth(rng, N, (2,)), base)
ws = base.workspace(N)
Kh, wh = lattice.to_modes(b)
b = lattice.from_modes(np.where(ws.kernel_K, 0, Kh), np.where(ws.kernel_w, 0, wh))
direction = exact / lattice.l2_norm(exact) + b / lattice.l2_norm(b)

print("transverse ray at Gamma(pi/2, pi/2)")
scan = moduli.lambda_scan(lambda t: gf.Connection(base, t * direction), ts)
print(f"  fitted exponent {scan.lam:.4f}, R^2 = {scan.r2:.6f}")
