"""Wasserstein barycenters, their stability, and the experiments that probe it."""

import os

# POT scans every installed array backend when imported; keep it to numpy
for _backend in ("TENSORFLOW", "PYTORCH", "JAX", "CUPY"):
    os.environ.setdefault(f"POT_BACKEND_DISABLE_{_backend}", "1")

from .exceptions import (  # noqa: E402
    BadConfig,
    BarystabError,
    DisconnectedSupport,
    InvalidMeasureError,
    NonDeterministicPlan,
    NonOptimalPotential,
    NotConverged,
    OutOfRegime,
    SizeCapExceeded,
    SolverNotConverged,
)
from .measures import (  # noqa: E402
    DiscreteMeasure,
    Domain,
    GridSpec,
    Population,
    RegularityProfile,
    discretize_density,
    make_discrete,
    second_moment,
)
from .transport import (  # noqa: E402
    PotentialPair,
    TransportPlan,
    brenier_map_from_potential,
    c_transform,
    legendre_conjugate,
    w2_entropic,
    w2_exact,
)
from .barycenter import (  # noqa: E402
    BarycenterResult,
    barycenter_1d,
    barycenter_exact,
    barycenter_fixed_support,
    barycenter_free_support,
    barycenter_penalized,
    barycenter_two_marginal,
)
from .functionals import (  # noqa: E402
    GapReport,
    LaplacianReport,
    compute_c_rho,
    dual_gap,
    kantorovich_functional,
    strong_convexity_gap,
    variance,
    variance_functional,
    variance_inequality_check,
)
from .metrics import ExponentFit, fit_exponent, nested_w1, tv_distance  # noqa: E402
from .experiments import (  # noqa: E402
    ExperimentConfig,
    empirical_sample,
    fig1_family,
    fig2_family,
    hnet_discretize,
    remark_exponent_family,
    stability_sweep,
)

__version__ = "0.1.0"

__all__ = [
    "BadConfig",
    "BarycenterResult",
    "BarystabError",
    "DisconnectedSupport",
    "DiscreteMeasure",
    "Domain",
    "ExperimentConfig",
    "ExponentFit",
    "GapReport",
    "GridSpec",
    "InvalidMeasureError",
    "LaplacianReport",
    "NonDeterministicPlan",
    "NonOptimalPotential",
    "NotConverged",
    "OutOfRegime",
    "Population",
    "PotentialPair",
    "RegularityProfile",
    "SizeCapExceeded",
    "SolverNotConverged",
    "TransportPlan",
    "barycenter_1d",
    "barycenter_exact",
    "barycenter_fixed_support",
    "barycenter_free_support",
    "barycenter_penalized",
    "barycenter_two_marginal",
    "brenier_map_from_potential",
    "c_transform",
    "compute_c_rho",
    "discretize_density",
    "dual_gap",
    "empirical_sample",
    "fig1_family",
    "fig2_family",
    "fit_exponent",
    "hnet_discretize",
    "kantorovich_functional",
    "legendre_conjugate",
    "make_discrete",
    "nested_w1",
    "remark_exponent_family",
    "second_moment",
    "stability_sweep",
    "strong_convexity_gap",
    "tv_distance",
    "variance",
    "variance_functional",
    "variance_inequality_check",
    "w2_entropic",
    "w2_exact",
]
