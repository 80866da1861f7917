"""Recentred confidence spheres for the mean of a p-variate normal distribution.

The spheres are centred on the positive-part James-Stein estimator. Their
radius is a monotone cubic Hermite function of ``||X|| / sqrt(p)``, chosen to
minimise the scaled expected volume at the origin subject to a coverage floor.
"""

import json
from importlib import resources

from .distributions import NoncentralChi2, chi2_quantile, nc_chi2_cdf, nc_chi2_pdf
from .mc_oracle import McConfig, estimate
from .optimizer import OptimizationProblem, OptimizationResult, solve, verify_global_coverage
from .performance import coverage_probability, curve, sev
from .quadrature import QuadratureConfig, integrate
from .sphere import (
    RadiusFunction,
    RcsSpec,
    a_plus,
    casella_hwang_radius,
    ch_radius,
    constant_radius,
    contains,
    default_knots,
    hermite_radius,
    radius_eval,
    standard_radius,
)

__version__ = "0.1.0"

SHIPPED_P = (3, 5, 7, 9, 11, 13, 15, 17, 19)


def shipped_radius(p: int) -> RadiusFunction:
    """Optimised radius for ``1 - alpha = 0.95`` shipped with the package."""
    from .cli import radius_from_dict

    if p not in SHIPPED_P:
        raise ValueError(f"no shipped radius for p={p}")
    text = resources.files(__package__).joinpath("data", f"new_p{p}.json").read_text()
    return radius_from_dict(json.loads(text))
