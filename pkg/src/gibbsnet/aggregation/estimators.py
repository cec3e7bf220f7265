"""Exponentially weighted aggregation and mirror averaging of shallow networks.

The functional entry points :func:`ewa_predictor` and
:func:`mirror_averaging_predictor` work on designs that already carry the
intercept column.  The scikit-learn estimators wrap them for raw covariates.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, DensityMixin, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .. import rng as rng_mod
from ..bounds import uniform_grid_design
from ..gaussian import PriorSpec, select_rho
from ..network import Activation, NetworkShape, add_intercept
from .losses import Energy, LossKind, LossModel
from .mcmc import McmcConfig, gibbs_posterior_sample
from .predictor import AggregatePredictor


def ewa_predictor(X, y, prior: PriorSpec, beta, cfg: McmcConfig, activation,
                  rng: np.random.Generator | None = None):
    """Exponentially weighted aggregate for fixed-design regression.

    Returns ``(predictor, sample)`` where ``sample`` is the
    :class:`~gibbsnet.aggregation.mcmc.PosteriorSample` behind it.
    """
    if rng is None:
        rng = rng_mod.stream(cfg.seed, "ewa")
    energy = Energy(LossModel(LossKind.FIXED_DESIGN_SQ), prior.shape, activation, X, y, beta)
    sample = gibbs_posterior_sample(energy, prior, cfg, rng)
    pred = AggregatePredictor(prior.shape, activation, [sample.flat_draws], [len(X)])
    return pred, sample


def mirror_averaging_predictor(X, y, loss: LossModel, prior: PriorSpec, beta, cfg: McmcConfig,
                               activation, rng: np.random.Generator | None = None):
    """Mirror averaging over the posteriors of every data prefix.

    Prefix ``m = 0`` is the prior (predictive mean zero).  Prefix ``m >= 1``
    is sampled starting from the final states and scales of prefix ``m - 1``,
    with the shortened burn-in of :meth:`McmcConfig.warm` after the first.

    Returns ``(predictor, samples)`` with one sample object per prefix
    ``m >= 1``.
    """
    if not loss.kind.iid:
        raise ValueError("mirror averaging is defined for iid losses only")
    if rng is None:
        rng = rng_mod.stream(cfg.seed, "mirror-averaging")
    n = len(X)
    draws, samples = [None], []
    state = scales = None
    for m in range(1, n + 1):
        energy = Energy(loss, prior.shape, activation, X[:m], None if y is None else y[:m], beta)
        run_cfg = cfg if m == 1 else cfg.warm()
        sample = gibbs_posterior_sample(energy, prior, run_cfg, rng_mod.child(rng, "prefix", m),
                                        init=state, init_scales=scales)
        state, scales = sample.final_state, sample.scales
        draws.append(sample.flat_draws)
        samples.append(sample)
    return AggregatePredictor(prior.shape, activation, draws, list(range(n + 1))), samples


def rice_noise_variance(X, y) -> float:
    """Difference-based noise variance estimate after sorting by the first covariate."""
    y = np.asarray(y, dtype=np.float64).reshape(len(y), -1)
    if len(y) < 2:
        raise ValueError("need at least two observations to estimate the noise variance")
    X = np.asarray(X)
    order = np.argsort(X[:, 0], kind="stable") if X.ndim == 2 and X.shape[1] else np.arange(len(y))
    diff = np.diff(y[order], axis=0)
    return float(np.sum(diff**2) / (2.0 * (len(y) - 1) * y.shape[1]))


class _GibbsNetBase(BaseEstimator):
    """Shared parameters and plumbing of the aggregation estimators."""

    def __init__(self, hidden_units=3, activation="logistic", beta=1.0, rho1=None, rho2=None,
                 B1=1.0, B2=1.0, burn_in=1000, n_kept=500, thinning=2, n_chains=8,
                 proposal="random-walk", target_acceptance=0.3, random_state=0):
        self.hidden_units = hidden_units
        self.activation = activation
        self.beta = beta
        self.rho1 = rho1
        self.rho2 = rho2
        self.B1 = B1
        self.B2 = B2
        self.burn_in = burn_in
        self.n_kept = n_kept
        self.thinning = thinning
        self.n_chains = n_chains
        self.proposal = proposal
        self.target_acceptance = target_acceptance
        self.random_state = random_state

    def _mcmc_config(self) -> McmcConfig:
        return McmcConfig(self.burn_in, self.n_kept, self.thinning, self.n_chains,
                          self.proposal, self.target_acceptance, int(self.random_state))

    def _make_prior(self, shape: NetworkShape) -> PriorSpec:
        rho1, rho2 = select_rho(self.B1, self.B2, shape)
        if self.rho1 is not None:
            rho1 = self.rho1
        if self.rho2 is not None:
            rho2 = self.rho2
        return PriorSpec(rho1, rho2, shape)

    def _design(self, X):
        return add_intercept(X)

    def _check_X(self, X, reset):
        X = check_array(X, ensure_min_features=0, dtype=np.float64)
        if reset:
            self.n_features_in_ = X.shape[1]
        elif X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, model was fit with {self.n_features_in_}")
        return X

    def _setup(self, n_covariates, D2):
        self.activation_ = Activation.from_tag(self.activation)
        self.shape_ = NetworkShape(n_covariates + 1, self.hidden_units, D2)
        self.prior_ = self._make_prior(self.shape_)

    def _rng(self, label):
        return rng_mod.stream(int(self.random_state), label)

    def predict_design(self, Xd):
        check_is_fitted(self, "predictor_")
        return self.predictor_.predict_design(Xd)

    def _raw_predict(self, X):
        check_is_fitted(self, "predictor_")
        X = self._check_X(X, reset=False)
        out = self.predictor_.predict_design(self._design(X))
        return out[:, 0] if out.shape[1] == 1 else out


class _RegressionMixin:
    def _resolve_beta(self, X, y):
        if self.beta is not None:
            return float(self.beta)
        var = self.noise_var if self.noise_var is not None else rice_noise_variance(X, y)
        return 4.0 * var


class EWARegressor(_RegressionMixin, RegressorMixin, _GibbsNetBase):
    """Exponentially weighted aggregate of one-hidden-layer networks.

    Fixed-design regression: the prediction at ``x`` is the posterior mean of
    ``f_w(x)`` under ``exp{-(1/beta) sum_i ||y_i - f_w(x_i)||^2} pi(dw)``,
    computed from MCMC draws.

    Parameters
    ----------
    hidden_units : int
        Hidden width ``D1``.
    activation : str
        One of ``logistic``, ``tanh``, ``relu``, ``maiorov-gaussian``,
        ``maiorov-triangle``.
    beta : float or None
        Temperature.  ``None`` uses ``4 * noise_var``, with ``noise_var``
        estimated by first differences when not given.
    rho1, rho2 : float or None
        Prior scales of the hidden and output blocks.  ``None`` derives them
        from the weight radii ``B1``, ``B2``.
    burn_in, n_kept, thinning, n_chains, proposal, target_acceptance
        Sampler settings, see :class:`~gibbsnet.aggregation.mcmc.McmcConfig`.
    random_state : int
        Seed; equal seeds give bit-identical fits.

    Attributes
    ----------
    predictor_ : AggregatePredictor
    sample_ : PosteriorSample
    beta_ : float
    prior_ : PriorSpec
    acceptance_ : ndarray
        Post-burn-in acceptance rate of each weight block.
    """

    def __init__(self, hidden_units=3, activation="logistic", beta=None, noise_var=None,
                 rho1=None, rho2=None, B1=1.0, B2=1.0, burn_in=1000, n_kept=500, thinning=2,
                 n_chains=8, proposal="random-walk", target_acceptance=0.3, random_state=0):
        super().__init__(hidden_units, activation, beta, rho1, rho2, B1, B2, burn_in, n_kept,
                         thinning, n_chains, proposal, target_acceptance, random_state)
        self.noise_var = noise_var

    def fit(self, X, y):
        X, y = check_X_y(X, y, multi_output=True, ensure_min_features=0, y_numeric=True)
        self.n_features_in_ = X.shape[1]
        y2 = y.reshape(len(y), -1)
        self._setup(X.shape[1], y2.shape[1])
        self.beta_ = self._resolve_beta(X, y2)
        self.predictor_, self.sample_ = ewa_predictor(
            self._design(X), y2, self.prior_, self.beta_, self._mcmc_config(),
            self.activation_, self._rng("ewa"))
        self.acceptance_ = self.sample_.acceptance
        return self

    def predict(self, X):
        return self._raw_predict(X)


class _MirrorAveragingBase(_GibbsNetBase):
    def _fit_ma(self, Xd, y, loss):
        self.predictor_, self.samples_ = mirror_averaging_predictor(
            Xd, y, loss, self.prior_, self.beta_, self._mcmc_config(), self.activation_,
            self._rng("mirror-averaging"))
        self.acceptance_ = (np.mean([s.acceptance for s in self.samples_], axis=0)
                            if self.samples_ else np.full(2, np.nan))
        return self


class MirrorAveragingRegressor(_RegressionMixin, RegressorMixin, _MirrorAveragingBase):
    """Mirror averaging for random-design regression with squared loss.

    Same parameters as :class:`EWARegressor`.
    """

    def __init__(self, hidden_units=3, activation="logistic", beta=None, noise_var=None,
                 rho1=None, rho2=None, B1=1.0, B2=1.0, burn_in=1000, n_kept=500, thinning=2,
                 n_chains=8, proposal="random-walk", target_acceptance=0.3, random_state=0):
        super().__init__(hidden_units, activation, beta, rho1, rho2, B1, B2, burn_in, n_kept,
                         thinning, n_chains, proposal, target_acceptance, random_state)
        self.noise_var = noise_var

    def fit(self, X, y):
        X, y = check_X_y(X, y, multi_output=True, ensure_min_features=0, y_numeric=True)
        self.n_features_in_ = X.shape[1]
        y2 = y.reshape(len(y), -1)
        self._setup(X.shape[1], y2.shape[1])
        self.beta_ = self._resolve_beta(X, y2)
        return self._fit_ma(self._design(X), y2, LossModel(LossKind.RANDOM_DESIGN_SQ))

    def predict(self, X):
        return self._raw_predict(X)


class MirrorAveragingDensity(DensityMixin, _MirrorAveragingBase):
    """Mirror averaging density estimator with ``Q(x, g) = ||g||^2 - 2 g(x)``.

    ``||g||^2`` is taken in ``L2(mu)`` with ``mu`` represented by
    ``quadrature=(points, weights)`` (design points with intercept).  By
    default ``mu`` is Lebesgue measure on the unit cube, discretized with
    ``points_per_axis`` Gauss-Legendre nodes per covariate.
    """

    def __init__(self, hidden_units=3, activation="logistic", beta=1.0, quadrature=None,
                 points_per_axis=33, rho1=None, rho2=None, B1=1.0, B2=1.0, burn_in=1000,
                 n_kept=500, thinning=2, n_chains=8, proposal="random-walk",
                 target_acceptance=0.3, random_state=0):
        super().__init__(hidden_units, activation, beta, rho1, rho2, B1, B2, burn_in, n_kept,
                         thinning, n_chains, proposal, target_acceptance, random_state)
        self.quadrature = quadrature
        self.points_per_axis = points_per_axis

    def fit(self, X, y=None):
        X = self._check_X(X, reset=True)
        self._setup(X.shape[1], 1)
        self.beta_ = float(self.beta)
        quad = self.quadrature or uniform_grid_design(X.shape[1], self.points_per_axis)
        self.quadrature_ = quad
        return self._fit_ma(self._design(X), None, LossModel(LossKind.DENSITY, quadrature=quad))

    def predict(self, X):
        """Estimated density at ``X``."""
        return self._raw_predict(X)

    def score_samples(self, X):
        """Log of the (clipped) estimated density."""
        return np.log(np.clip(self._raw_predict(X), 1e-300, None))


class MirrorAveragingClassifier(ClassifierMixin, _MirrorAveragingBase):
    """Mirror averaging for binary classification under a convex ``phi``-risk.

    The default ``phi`` is ``log(1 + e^u)``; ``decision_function`` returns the
    aggregated score and ``predict`` its sign mapped to ``classes_``.
    """

    def __init__(self, hidden_units=3, activation="logistic", beta=1.0, loss=None,
                 rho1=None, rho2=None, B1=1.0, B2=1.0, burn_in=1000, n_kept=500, thinning=2,
                 n_chains=8, proposal="random-walk", target_acceptance=0.3, random_state=0):
        super().__init__(hidden_units, activation, beta, rho1, rho2, B1, B2, burn_in, n_kept,
                         thinning, n_chains, proposal, target_acceptance, random_state)
        self.loss = loss

    def fit(self, X, y):
        X, y = check_X_y(X, y, ensure_min_features=0)
        self.n_features_in_ = X.shape[1]
        self.classes_ = np.unique(y)
        if len(self.classes_) != 2:
            raise ValueError("binary classification needs exactly two classes")
        signs = np.where(y == self.classes_[1], 1.0, -1.0)[:, None]
        self._setup(X.shape[1], 1)
        self.beta_ = float(self.beta)
        loss = self.loss or LossModel(LossKind.PHI_RISK)
        return self._fit_ma(self._design(X), signs, loss)

    def decision_function(self, X):
        return self._raw_predict(X)

    def predict(self, X):
        return self.classes_[(self.decision_function(X) > 0).astype(int)]
