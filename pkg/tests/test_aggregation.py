import math

import numpy as np
import pytest
from sklearn.base import clone

from gibbsnet import rng as rng_mod
from gibbsnet.aggregation import (
    AggregatePredictor,
    Energy,
    EWARegressor,
    LossKind,
    LossModel,
    McmcConfig,
    MirrorAveragingClassifier,
    MirrorAveragingDensity,
    MirrorAveragingRegressor,
    NumericError,
    ewa_predictor,
    gibbs_posterior_sample,
    logistic_phi,
    mirror_averaging_predictor,
    rice_noise_variance,
    risk_eval,
)
from gibbsnet.bounds import compute_moments, uniform_grid_design
from gibbsnet.gaussian import PriorSpec
from gibbsnet.network import NetworkShape, add_intercept, forward_batch

from . import oracles

TOY = NetworkShape(1, 1, 1)
SMALL = dict(burn_in=100, n_kept=100, thinning=1, n_chains=2)


def batch_se(values, n_batches=40):
    """Standard error of the mean of chain-major draws via batch means."""
    bm = np.asarray(values).reshape(n_batches, -1).mean(axis=1)
    return bm.std(ddof=1) / math.sqrt(n_batches)


def toy_data():
    rng = np.random.default_rng(0)
    x = np.linspace(-1, 1, 8)
    y = 0.8 * np.maximum(1.2 * x, 0) + 0.3 * rng.normal(size=8)
    return x, y


class TestMcmcConfig:
    @pytest.mark.parametrize("kw", [dict(n_kept=50), dict(n_chains=1), dict(target_acceptance=0.9),
                                    dict(proposal="hmc"), dict(thinning=0)])
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            McmcConfig(**kw)

    def test_warm_shortens_burn_in(self):
        assert McmcConfig(burn_in=400).warm().burn_in == 100


class TestPriorLimit:
    def test_huge_temperature_samples_the_prior(self):
        shape = NetworkShape(2, 3, 1)
        X = add_intercept(np.linspace(0, 1, 10))
        y = np.sin(3 * X[:, 1:])
        prior = PriorSpec(0.7, 1.3, shape)
        cfg = McmcConfig(burn_in=500, n_kept=2000, thinning=2, n_chains=8)
        pred, sample = ewa_predictor(X, y, prior, 1e9, cfg, "logistic", rng_mod.stream(0, "limit"))
        draws = sample.draws
        means = draws.reshape(-1, shape.d).mean(axis=0)
        ses = np.array([batch_se(draws[:, :, j].ravel()) for j in range(shape.d)])
        assert np.all(np.abs(means) < 4 * ses)
        k = shape.n_hidden_weights
        assert np.var(draws[..., :k]) == pytest.approx(0.49, rel=0.1)
        assert np.var(draws[..., k:]) == pytest.approx(1.69, rel=0.1)
        # zero prior predictive mean: E[w2] = 0 and w2 is independent of w1
        f = forward_batch(shape, sample.flat_draws, X[:1], "logistic")[:, 0, 0]
        assert abs(pred.predict_design(X[:1])[0, 0]) < 4 * batch_se(f)


class TestSamplerAgainstQuadrature:
    def _check(self, sample, loglik):
        a, b, _, _, p = oracles.toy_posterior(loglik, 1.0, 1.0)
        for j, (grid, marg) in enumerate(((a, p.sum(axis=1)), (b, p.sum(axis=0)))):
            v = sample.draws[:, :, j].ravel()
            assert abs(v.mean() - np.sum(grid * marg)) < 3 * batch_se(v)
            assert oracles.weighted_ks(v, grid, marg) < 0.05

    @pytest.mark.parametrize("proposal", ["random-walk", "langevin"])
    def test_fixed_design_relu(self, proposal):
        x, y = toy_data()
        energy = Energy(LossModel(LossKind.FIXED_DESIGN_SQ), TOY, "relu", x[:, None], y[:, None], 0.36)
        cfg = McmcConfig(burn_in=2000, n_kept=2500, thinning=4, n_chains=8, proposal=proposal)
        sample = gibbs_posterior_sample(energy, PriorSpec(1, 1, TOY), cfg, rng_mod.stream(1, "toy"))
        self._check(sample, oracles.relu_toy_loglik(x, y, 0.36))

    def test_density_logistic(self):
        xs = np.random.default_rng(3).uniform(0, 1, 20)
        qx, qw = np.polynomial.legendre.leggauss(40)
        qx, qw = (qx + 1) / 2, qw / 2
        loss = LossModel(LossKind.DENSITY, quadrature=(qx[:, None], qw))
        energy = Energy(loss, TOY, "logistic", xs[:, None], None, 1.0)
        cfg = McmcConfig(burn_in=2000, n_kept=2500, thinning=4, n_chains=8)
        sample = gibbs_posterior_sample(energy, PriorSpec(1, 1, TOY), cfg, rng_mod.stream(2, "toy"))
        self._check(sample, oracles.density_toy_loglik(xs, 1.0, qx, qw, oracles.np_logistic))

    def test_acceptance_near_target(self):
        x, y = toy_data()
        energy = Energy(LossModel(LossKind.FIXED_DESIGN_SQ), TOY, "relu", x[:, None], y[:, None], 0.36)
        sample = gibbs_posterior_sample(energy, PriorSpec(1, 1, TOY),
                                        McmcConfig(burn_in=1000, n_kept=500), rng_mod.stream(3, "a"))
        np.testing.assert_allclose(sample.acceptance, 0.3, atol=0.1)


class TestMirrorAveraging:
    def test_empty_sample_is_exactly_zero(self):
        pred, samples = mirror_averaging_predictor(
            np.zeros((0, 2)), np.zeros((0, 1)), LossModel(LossKind.RANDOM_DESIGN_SQ),
            PriorSpec(1, 1, NetworkShape(2, 2, 1)), 1.0, McmcConfig(**SMALL), "tanh")
        assert samples == []
        X = add_intercept(np.linspace(0, 1, 5))
        assert np.all(pred.predict_design(X) == 0.0)

    def test_single_observation_against_quadrature(self):
        x0, y0 = 0.7, 0.5
        loss = LossModel(LossKind.RANDOM_DESIGN_SQ)
        cfg = McmcConfig(burn_in=2000, n_kept=2500, thinning=4, n_chains=8)
        pred, samples = mirror_averaging_predictor(np.array([[x0]]), np.array([[y0]]), loss,
                                                   PriorSpec(1, 1, TOY), 0.5, cfg, "relu",
                                                   rng_mod.stream(4, "ma"))
        x_new = np.array([[0.4]])
        per_prefix = pred.prefix_predictions(x_new)[:, 0, 0]
        assert per_prefix[0] == 0.0
        _, _, A, B, p = oracles.toy_posterior(oracles.relu_toy_loglik([x0], [y0], 0.5), 1.0, 1.0)
        post_mean = float(np.sum(p * B * np.maximum(A * 0.4, 0)))
        f = samples[0].flat_draws[:, 1] * np.maximum(samples[0].flat_draws[:, 0] * 0.4, 0)
        assert abs(per_prefix[1] - post_mean) < 3 * batch_se(f)
        assert pred.predict_design(x_new)[0, 0] == pytest.approx(0.5 * per_prefix[1], abs=1e-15)

    def test_prediction_is_mean_of_prefixes(self):
        rng = np.random.default_rng(5)
        X = add_intercept(rng.uniform(size=6))
        y = rng.normal(size=(6, 1))
        pred, _ = mirror_averaging_predictor(X, y, LossModel(LossKind.RANDOM_DESIGN_SQ),
                                             PriorSpec(1, 1, NetworkShape(2, 2, 1)), 1.0,
                                             McmcConfig(**SMALL), "logistic")
        grid = add_intercept(np.linspace(0, 1, 11))
        per = pred.prefix_predictions(grid)
        assert per.shape == (7, 11, 1)
        np.testing.assert_allclose(pred.predict_design(grid), per.mean(axis=0), rtol=0, atol=1e-15)

    def test_rejects_fixed_design(self):
        with pytest.raises(ValueError):
            mirror_averaging_predictor(np.ones((2, 1)), np.ones((2, 1)), LossModel(),
                                       PriorSpec(1, 1, TOY), 1.0, McmcConfig(**SMALL), "relu")


class TestAggregatePredictor:
    def _pred(self, seed=0):
        shape = NetworkShape(3, 2, 2)
        rng = np.random.default_rng(seed)
        return AggregatePredictor(shape, "tanh", [None, rng.normal(size=(30, shape.d)),
                                                  rng.normal(size=(20, shape.d))])

    def test_duplicating_draws_changes_nothing(self):
        pred = self._pred()
        dup = AggregatePredictor(pred.shape, pred.activation,
                                 [None] + [np.vstack([d, d]) for d in pred.prefix_draws[1:]])
        X = add_intercept(np.random.default_rng(1).uniform(size=(7, 2)))
        np.testing.assert_allclose(dup(X), pred(X), rtol=1e-14, atol=1e-15)

    def test_permuting_draws_changes_nothing(self):
        pred = self._pred()
        perm = np.random.default_rng(2).permutation(30)
        shuffled = AggregatePredictor(pred.shape, pred.activation,
                                      [None, pred.prefix_draws[1][perm], pred.prefix_draws[2]])
        X = add_intercept(np.random.default_rng(1).uniform(size=(7, 2)))
        np.testing.assert_allclose(shuffled(X), pred(X), rtol=1e-14, atol=1e-15)

    def test_csv_round_trip(self, tmp_path):
        pred = self._pred()
        path = tmp_path / "draws.csv"
        pred.to_csv(path)
        back = AggregatePredictor.from_csv(path)
        assert back.shape == pred.shape and back.activation is pred.activation
        assert back.prefix_draws[0] is None
        for a, b in zip(back.prefix_draws[1:], pred.prefix_draws[1:]):
            np.testing.assert_array_equal(a, b)

    def test_rejects_foreign_file(self, tmp_path):
        path = tmp_path / "x.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(ValueError):
            AggregatePredictor.from_csv(path)

    def test_needs_draws(self):
        with pytest.raises(ValueError):
            AggregatePredictor(TOY, "relu", [])


class TestEnergy:
    def test_non_finite_loss_raises_with_weights(self):
        y = np.array([[np.inf], [0.0]])
        energy = Energy(LossModel(), TOY, "relu", np.ones((2, 1)), y, 1.0)
        with pytest.raises(NumericError) as err:
            energy(np.array([[0.5, 0.2]]))
        np.testing.assert_array_equal(err.value.weights, [0.5, 0.2])

    @pytest.mark.parametrize("kind", ["fixed-design-sq", "density", "phi-risk"])
    def test_gradient_matches_finite_difference(self, kind):
        shape = NetworkShape(2, 3, 1)
        rng = np.random.default_rng(6)
        X = add_intercept(rng.uniform(size=5))
        y = {"fixed-design-sq": rng.normal(size=(5, 1)), "density": None,
             "phi-risk": rng.choice([-1.0, 1.0], size=(5, 1))}[kind]
        quad = uniform_grid_design(1, 9)
        loss = LossModel(kind, quadrature=quad if kind == "density" else None)
        energy = Energy(loss, shape, "tanh", X, y, 0.7)
        w = rng.normal(size=(1, shape.d))
        value, grad = energy.value_and_grad(w)
        assert value[0] == pytest.approx(energy(w)[0], rel=1e-12)
        h = 1e-6
        for i in range(shape.d):
            e = np.zeros_like(w)
            e[0, i] = h
            fd = (energy(w + e)[0] - energy(w - e)[0]) / (2 * h)
            assert grad[0, i] == pytest.approx(fd, abs=1e-5)

    def test_density_needs_quadrature(self):
        with pytest.raises(ValueError):
            LossModel(LossKind.DENSITY)


class TestRiskEval:
    def setup_method(self):
        self.moments = compute_moments(*uniform_grid_design(1, 33))
        self.f = lambda X: np.sin(3 * X[:, 1:])

    def test_exact_prediction(self):
        assert risk_eval(self.f, self.f, self.moments) == pytest.approx(0.0, abs=1e-12)

    def test_constant_offset(self):
        assert risk_eval(lambda X: self.f(X) + 0.3, self.f, self.moments) == pytest.approx(0.09, rel=1e-12)

    def test_grid_refinement(self):
        g = lambda X: 0.5 * X[:, 1:] ** 2  # noqa: E731
        coarse = risk_eval(g, self.f, self.moments)
        fine = risk_eval(g, self.f, compute_moments(*uniform_grid_design(1, 64)))
        assert coarse == pytest.approx(fine, abs=1e-6)

    def test_phi_excess_risk(self):
        assert risk_eval(self.f, self.f, self.moments, kind="phi") == pytest.approx(0.0, abs=1e-15)
        for c in (-1.0, 0.5, 2.0):
            assert risk_eval(lambda X: self.f(X) + c, self.f, self.moments, kind="phi") > 0

    def test_accepts_predictor(self):
        pred = AggregatePredictor(NetworkShape(2, 1, 1), "relu", [None])
        assert risk_eval(pred, lambda X: np.full(len(X), 0.2), self.moments) == pytest.approx(0.04)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            risk_eval(self.f, self.f, self.moments, kind="hinge")


def test_logistic_phi_is_stable():
    np.testing.assert_allclose(logistic_phi(np.array([-800.0, 0.0, 800.0])), [0.0, math.log(2), 800.0])


def test_rice_estimate():
    rng = np.random.default_rng(7)
    x = rng.uniform(size=20_000)
    y = np.sin(4 * x) + 0.3 * rng.normal(size=x.size)
    assert rice_noise_variance(x[:, None], y) == pytest.approx(0.09, rel=0.05)


class TestEstimators:
    def setup_method(self):
        rng = np.random.default_rng(8)
        self.X = rng.uniform(size=(30, 1))
        self.y = 1.5 * self.X[:, 0] + 0.1 * rng.normal(size=30)

    def test_params_and_clone(self):
        est = EWARegressor(hidden_units=4, beta=0.5, n_kept=200)
        params = est.get_params()
        assert params["hidden_units"] == 4 and params["noise_var"] is None
        twin = clone(est)
        assert twin.get_params() == params and twin is not est

    def test_ewa_fit_predict(self):
        est = EWARegressor(noise_var=0.01, B1=3, B2=3, burn_in=500, n_kept=200, n_chains=4)
        est.fit(self.X, self.y)
        assert est.beta_ == pytest.approx(0.04)
        assert est.predict(self.X).shape == (30,)
        assert est.score(self.X, self.y) > 0.8
        assert est.n_features_in_ == 1 and est.acceptance_.shape == (2,)

    def test_same_seed_same_fit(self):
        a = EWARegressor(beta=0.1, **SMALL).fit(self.X, self.y).predict(self.X)
        b = EWARegressor(beta=0.1, **SMALL).fit(self.X, self.y).predict(self.X)
        c = EWARegressor(beta=0.1, random_state=1, **SMALL).fit(self.X, self.y).predict(self.X)
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_feature_count_checked(self):
        est = EWARegressor(beta=0.1, **SMALL).fit(self.X, self.y)
        with pytest.raises(ValueError):
            est.predict(np.ones((3, 2)))

    def test_mirror_regressor(self):
        est = MirrorAveragingRegressor(beta=0.1, **SMALL).fit(self.X[:8], self.y[:8])
        assert len(est.samples_) == 8
        assert est.predict(self.X).shape == (30,)

    def test_classifier(self):
        rng = np.random.default_rng(9)
        X = rng.uniform(-1, 1, size=(40, 1))
        labels = np.where(X[:, 0] > 0, "pos", "neg")
        clf = MirrorAveragingClassifier(B1=6, B2=6, burn_in=300, n_kept=100, n_chains=4).fit(X, labels)
        assert set(clf.classes_) == {"neg", "pos"}
        assert clf.score(X, labels) >= 0.8
        with pytest.raises(ValueError):
            MirrorAveragingClassifier(**SMALL).fit(X, np.zeros(40))

    def test_density(self):
        X = np.random.default_rng(10).uniform(size=(10, 1))
        est = MirrorAveragingDensity(points_per_axis=9, **SMALL).fit(X)
        grid = np.linspace(0, 1, 5)[:, None]
        assert est.predict(grid).shape == (5,)
        assert np.all(np.isfinite(est.score_samples(grid)))
