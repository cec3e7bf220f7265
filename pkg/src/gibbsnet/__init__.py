"""PAC-Bayesian aggregation of one-hidden-layer networks under Gaussian priors."""

from .bounds import BoundReport, DesignMoments, compute_moments, rem_bound, worstcase_rem
from .gaussian import CandidateSpec, PriorSpec, kl_gaussian, select_rho
from .network import Activation, NetworkShape, WeightVector, forward

__version__ = "0.1.0"

__all__ = [
    "Activation",
    "BoundReport",
    "CandidateSpec",
    "DesignMoments",
    "NetworkShape",
    "PriorSpec",
    "WeightVector",
    "compute_moments",
    "forward",
    "kl_gaussian",
    "rem_bound",
    "select_rho",
    "worstcase_rem",
]
