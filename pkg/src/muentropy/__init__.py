"""Toric mu-entropy, free mu-energy minimization and thermodynamics on polytopes."""

__version__ = "0.1.0"

from .convexfn import (  # noqa: E402
    AffineFn, PiecewiseAffineConvex, SmoothedConvex, linear_from_vector, mixture, normalize,
    tight_envelope, vertex_truncate,
)
from .estimators import CanonicalDistribution, OptimalVector  # noqa: E402
from .functionals import (  # noqa: E402
    FunctionalReport, donaldson_futaki, entropy, free_energy, futaki, internal_energy, na_mu,
    na_mu_lambda, sigma,
)
from .optimizer import (  # noqa: E402
    SolverConfig, canonical_distribution, minimize_free_energy, optimize_vector,
    semistability_check,
)
from .polytope import (  # noqa: E402
    HalfSpace, Polytope, ToricSystem, blowup_cp2, from_halfspaces, lattice_system, product,
    segment, square, unit_square,
)

__all__ = [
    "AffineFn", "CanonicalDistribution", "FunctionalReport", "HalfSpace", "OptimalVector",
    "PiecewiseAffineConvex", "Polytope", "SmoothedConvex", "SolverConfig", "ToricSystem",
    "blowup_cp2", "canonical_distribution", "donaldson_futaki", "entropy", "free_energy",
    "from_halfspaces", "futaki", "internal_energy", "lattice_system", "linear_from_vector",
    "minimize_free_energy", "mixture", "na_mu", "na_mu_lambda", "normalize", "optimize_vector",
    "product", "segment", "semistability_check", "sigma", "square", "tight_envelope",
    "unit_square", "vertex_truncate",
]
