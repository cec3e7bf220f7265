"""Monte Carlo estimates of the integrals that the analytic bounds control.

All estimators split the sample into ``batch_count`` equal batches, each
drawn from its own keyed stream, and report a standard error computed from
the batch results.  Batches are reduced in index order, so the output only
depends on the generator passed in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from . import rng as rng_mod
from .bounds import DesignMoments
from .gaussian import CandidateSpec, PriorSpec, sample
from .network import Activation, NetworkShape, WeightVector, forward_batch, split_flat, join_flat

BATCH_COUNT = 20
MIN_ESS = 50.0


@dataclass(frozen=True)
class McEstimate:
    """A Monte Carlo mean with its batch-based standard error.

    ``ess`` is the importance effective sample size (free energy only);
    ``reliable`` is False when it falls below 50.
    """

    mean: float
    std_error: float
    n_samples: int
    batch_count: int
    ess: float | None = None

    @property
    def reliable(self) -> bool:
        return self.ess is None or self.ess >= MIN_ESS


@dataclass(frozen=True)
class L2Metric:
    """Squared ``L2(mu)`` distance between networks of a fixed architecture."""

    moments: DesignMoments
    activation: Activation
    shape: NetworkShape

    def __post_init__(self):
        object.__setattr__(self, "activation", Activation.from_tag(self.activation))
        if self.moments.D0 != self.shape.D0:
            raise ValueError("design dimension does not match the network input dimension")

    def outputs(self, flat: np.ndarray) -> np.ndarray:
        """Network outputs ``(S, N, D2)`` on the metric's atoms."""
        return forward_batch(self.shape, flat, self.moments.points, self.activation)

    def sq_norm(self, values: np.ndarray) -> np.ndarray:
        """``sum_i w_i ||values[..., i, :]||^2`` over atoms."""
        return np.einsum("...no,...no,n->...", values, values, self.moments.weights)


def l2_dist_sq(w: WeightVector, w_other: WeightVector, metric: L2Metric) -> float:
    """``||f_w - f_w'||^2`` in ``L2(mu)``."""
    w.check_shape(metric.shape)
    w_other.check_shape(metric.shape)
    f = metric.outputs(np.stack([w.flatten(), w_other.flatten()]))
    return float(metric.sq_norm(f[0] - f[1]))


def _batch_sizes(n_samples: int, batch_count: int):
    base, extra = divmod(n_samples, batch_count)
    return [base + (1 if b < extra else 0) for b in range(batch_count)]


def _batched(n_samples, batch_count, rng, label, fn):
    """Run ``fn(gen, size)`` per batch on keyed child streams; returns per-batch results."""
    if n_samples < batch_count:
        raise ValueError("need at least one sample per batch")
    base = int(rng.integers(0, 2**63 - 1))
    return [fn(rng_mod.stream(base, label, b), size)
            for b, size in enumerate(_batch_sizes(n_samples, batch_count))]


def _summarize(batch_means, sizes) -> McEstimate:
    bm = np.asarray(batch_means, dtype=np.float64)
    sizes = np.asarray(sizes)
    mean = float(np.sum(bm * sizes) / sizes.sum())
    se = float(np.std(bm, ddof=1) / math.sqrt(len(bm)))
    return McEstimate(mean, se, int(sizes.sum()), len(bm))


def mc_weighted_l2(candidate: CandidateSpec, w_bar: WeightVector, metric: L2Metric,
                   n_samples: int, rng: np.random.Generator, batch_count: int = BATCH_COUNT) -> McEstimate:
    """Estimate ``E_{w ~ candidate} ||f_w - f_wbar||^2``."""
    ref = metric.outputs(w_bar.flatten()[None])[0]

    def one(gen, size):
        draws = sample(candidate, gen, size)
        return float(np.mean(metric.sq_norm(metric.outputs(draws) - ref)))

    sizes = _batch_sizes(n_samples, batch_count)
    return _summarize(_batched(n_samples, batch_count, rng, "weighted-l2", one), sizes)


def mc_G1_G2(candidate: CandidateSpec, w_bar: WeightVector, metric: L2Metric,
             n_samples: int, rng: np.random.Generator, batch_count: int = BATCH_COUNT):
    """Estimate the two parts of the orthogonal split of the weighted L2 integral.

    ``G1(w) = ||f_{w1,w2} - f_{w1,wbar2}||^2`` averaged over the candidate and
    ``G2(w1) = ||f_{w1,wbar2} - f_wbar||^2`` averaged over its hidden block.
    """
    shape = metric.shape
    ref = metric.outputs(w_bar.flatten()[None])[0]

    def one(gen, size):
        draws = sample(candidate, gen, size)
        W1, _ = split_flat(shape, draws)
        swapped = join_flat(W1, np.broadcast_to(w_bar.w2, (size,) + w_bar.w2.shape))
        f = metric.outputs(draws)
        f_sw = metric.outputs(swapped)
        return (float(np.mean(metric.sq_norm(f - f_sw))),
                float(np.mean(metric.sq_norm(f_sw - ref))))

    sizes = _batch_sizes(n_samples, batch_count)
    res = _batched(n_samples, batch_count, rng, "g1-g2", one)
    return (_summarize([r[0] for r in res], sizes), _summarize([r[1] for r in res], sizes))


def mc_free_energy(w_bar: WeightVector, prior: PriorSpec, metric: L2Metric, n, beta,
                   n_samples: int, rng: np.random.Generator, batch_count: int = BATCH_COUNT) -> McEstimate:
    """Estimate ``-(beta/n) log E_prior exp{-(n/beta) ||f_w - f_wbar||^2}``.

    Plain prior sampling with a log-sum-exp reduction.  The standard error is a
    leave-one-batch-out jackknife of the log-scale estimate, and ``ess`` is the
    effective sample size of the normalized weights.
    """
    if not beta > 0 or n < 1:
        raise ValueError("need n >= 1 and beta > 0")
    ref = metric.outputs(w_bar.flatten()[None])[0]
    scale = n / beta

    def one(gen, size):
        draws = sample(prior, gen, size)
        a = -scale * metric.sq_norm(metric.outputs(draws) - ref)
        return float(logsumexp(a)), float(logsumexp(2.0 * a))

    sizes = np.asarray(_batch_sizes(n_samples, batch_count), dtype=np.float64)
    res = _batched(n_samples, batch_count, rng, "free-energy", one)
    lse = np.array([r[0] for r in res])
    lse2 = np.array([r[1] for r in res])
    total = logsumexp(lse)
    N = sizes.sum()
    estimate = -(total - math.log(N)) / scale

    loo = np.empty(batch_count)
    for b in range(batch_count):
        keep = np.arange(batch_count) != b
        loo[b] = -(logsumexp(lse[keep]) - math.log(N - sizes[b])) / scale
    se = math.sqrt((batch_count - 1) / batch_count * np.sum((loo - loo.mean()) ** 2))
    ess = math.exp(2.0 * total - logsumexp(lse2))
    return McEstimate(float(estimate), se, int(N), batch_count, ess)
