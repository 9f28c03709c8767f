"""Magnetic flows on surfaces.

Simulates magnetic geodesic flows on constant-curvature and conformal
surfaces, computes the Liouville-action and asymptotic-Maslov invariants
that characterize horocycle flows, and implements the critical-value and
action-potential machinery for finding closed magnetic geodesics, with
exact algebraic flows on quotients of PSL(2, R) as oracles throughout.
"""

__version__ = "0.1.0"

from . import (  # noqa: F401
    acceptance,
    critical,
    errors,
    fields,
    flow,
    invariants,
    io,
    sl2,
    surfaces,
    variation,
)
