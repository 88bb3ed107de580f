"""SU(2) Yang-Mills gradient flow on the flat two-torus.

Modules: ``lie`` (su(2) and unit quaternions), ``lattice`` (periodic grid
spectral calculus), ``gaugefield`` (connections, curvature, Coulomb slice),
``flow`` (slice gradient flow and decay fits), ``moduli`` (holonomy,
pillowcase, nearest flat connection), ``kuranishi`` (low-mode reduction),
``lojasiewicz`` (finite-dimensional gradient systems), ``cli`` (the ``ym``
driver).
"""

from . import errors, flow, gaugefield, io, kuranishi, lattice, lie, lojasiewicz, moduli

__version__ = "0.1.0"

__all__ = [
    "errors", "flow", "gaugefield", "io", "kuranishi", "lattice", "lie", "lojasiewicz", "moduli",
]
