"""Gibbs-posterior aggregation of shallow networks."""

from .estimators import (
    EWARegressor,
    MirrorAveragingClassifier,
    MirrorAveragingDensity,
    MirrorAveragingRegressor,
    ewa_predictor,
    mirror_averaging_predictor,
    rice_noise_variance,
)
from .losses import Energy, LossKind, LossModel, NumericError, logistic_phi
from .mcmc import McmcConfig, PosteriorSample, gibbs_posterior_sample
from .predictor import AggregatePredictor
from .risk import risk_eval

__all__ = [
    "AggregatePredictor",
    "EWARegressor",
    "Energy",
    "LossKind",
    "LossModel",
    "McmcConfig",
    "MirrorAveragingClassifier",
    "MirrorAveragingDensity",
    "MirrorAveragingRegressor",
    "NumericError",
    "PosteriorSample",
    "ewa_predictor",
    "gibbs_posterior_sample",
    "logistic_phi",
    "mirror_averaging_predictor",
    "rice_noise_variance",
    "risk_eval",
]
