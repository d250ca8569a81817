"""Stationary Markov chains with prescribed alpha, beta and rho mixing rates.

The pipeline runs in three stages:

* :mod:`mixforge.envelope` builds the chord scaffold of ``log2(r**x f(x))``.
* :mod:`mixforge.chain` turns its legs into two-state blocks and assembles them
  into a truncated product chain.
* :mod:`mixforge.depcoeff` computes exact dependence coefficients of finite
  joint tables.
"""

from .chain import (
    ChainSpec,
    CoeffReport,
    CoeffRow,
    build_chain,
    coeff_bounds,
    estimate_beta_empirical,
    joint_at_lag,
    sample_path,
    stationary_dist,
    transition_matrix,
    truncation_level,
    verify_theorem,
)
from .depcoeff import (
    JointPMF,
    alpha_exact,
    alpha_naive,
    beta_exact,
    product_joint,
    rho_exact,
    rho_power_oracle,
)
from .envelope import (
    LogEnvelope,
    RateFunction,
    Scaffold,
    build_scaffold,
    check_scaffold,
    chord_gap,
    chord_slope,
    envelope_sum,
    leg_for,
    next_breakpoint,
    validate_rate_function,
)
from .errors import MixforgeError
from .two_state import BlockParams, block_coeffs, compose, make_joint, make_transition

__version__ = "0.1.0"

__all__ = [
    "BlockParams", "ChainSpec", "CoeffReport", "CoeffRow", "JointPMF", "LogEnvelope",
    "MixforgeError", "RateFunction", "Scaffold", "alpha_exact", "alpha_naive", "beta_exact",
    "block_coeffs", "build_chain", "build_scaffold", "check_scaffold", "chord_gap",
    "chord_slope", "coeff_bounds", "compose", "envelope_sum", "estimate_beta_empirical",
    "joint_at_lag", "leg_for", "make_joint", "make_transition", "next_breakpoint",
    "product_joint", "rho_exact", "rho_power_oracle", "sample_path", "stationary_dist",
    "transition_matrix", "truncation_level", "validate_rate_function", "verify_theorem",
]
