"""Validated numerics for the equal-mass planar circular restricted three-body problem.

Layers, bottom up:

* :mod:`pcr3bp.interval`  outward-rounded interval arithmetic on numpy arrays
* :mod:`pcr3bp.model`     the rotating-frame Hamiltonian system and its constants
* :mod:`pcr3bp.taylor`, :mod:`pcr3bp.flow`  Taylor series and Lohner-type enclosures
* :mod:`pcr3bp.poincare`  half maps to the section ``y = 0`` and their inverses
* :mod:`pcr3bp.tsets`     t-sets, covering and backcovering verdicts
* :mod:`pcr3bp.symbolic`  transition matrices and entropy bounds (exact arithmetic)
* :mod:`pcr3bp.orbits`    existence of symmetric periodic orbits
* :mod:`pcr3bp.explorer`  fast floating point exploration, NOT rigorous
* :mod:`pcr3bp.cli`       the ``pcr3bp`` command
"""

from .interval import Interval, IntervalError, ilog
from .model import DEFAULT_PARAMS, ModelParams, energy, equilibria_and_h0, jacobi, omega, vector_field
from .flow import DtPolicy, LohnerSet, integrate
from .poincare import MapOptions, SectionPoint, full_map, half_map, inverse_half_map
from .tsets import CoveringClaim, CoveringPolicy, TSet, ValidatedMaps, check_relation, load_catalog
from .symbolic import CoveringGraph, build_matrix, char_poly, entropy_report
from .orbits import OrbitClaim, prove, prove_fixed_point, prove_period_two

__version__ = "0.1.0"

__all__ = [
    "CoveringClaim", "CoveringGraph", "CoveringPolicy", "DEFAULT_PARAMS", "DtPolicy", "Interval",
    "IntervalError", "LohnerSet", "MapOptions", "ModelParams", "OrbitClaim", "SectionPoint", "TSet",
    "ValidatedMaps", "build_matrix", "char_poly", "check_relation", "energy", "entropy_report",
    "equilibria_and_h0", "full_map", "half_map", "ilog", "integrate", "inverse_half_map", "jacobi",
    "load_catalog", "omega", "prove", "prove_fixed_point", "prove_period_two", "vector_field",
]
