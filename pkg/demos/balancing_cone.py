"""The balancing map at the product connection vanishes on the commuting cone.

Constant pairs (xi, eta) span the six-dimensional harmonic space at the
product connection.  The reduced equation chi(xi, eta) = 0 holds exactly
when [xi, eta] = 0, and <chi, (xi, eta)> = 2 |[xi, eta]|^2: the flat set is
a cone with a quadratic singularity rather than a manifold.
"""

import numpy as np

from ymtorus import gaugefield as gf
from ymtorus import kuranishi as kur
from ymtorus import lie

space = kur.low_mode_space(gf.PRODUCT, 16)
print(f"low-mode space at the product connection: dimension {space.dim}, cutoff {space.mu:.3f}")
rng = np.random.default_rng(2)
print("   |[xi,eta]|     |chi|        <chi,a>      2|[xi,eta]|^2")
for k in range(8):
    xi = 0.05 * rng.standard_normal(3)
    eta = 0.05 * rng.standard_normal(3) if k % 2 else 0.7 * xi
    c = space.constant_coords(xi, eta)
    chi = kur.balancing(c, space)
    comm = lie.norm(lie.bracket(xi, eta))
    print(f"   {comm:.3e}    {np.linalg.norm(chi):.3e}    {chi @ c:.3e}    {2 * comm**2:.3e}")
