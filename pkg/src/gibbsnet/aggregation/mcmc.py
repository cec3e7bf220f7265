"""Block-wise adaptive Metropolis sampling of Gibbs posteriors over network weights.

Each iteration updates the hidden block ``w1`` and then the output block
``w2``, each with its own proposal scale.  Scales are tuned by a
Robbins-Monro recursion on the log scale during burn-in only and are frozen
afterwards, so the kept draws come from a fixed Metropolis-within-Gibbs
kernel that leaves the posterior invariant.  All chains advance together as
one vectorized state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .. import rng as rng_mod
from ..gaussian import PriorSpec
from .losses import Energy

PROPOSALS = ("random-walk", "langevin")


@dataclass(frozen=True)
class McmcConfig:
    """Sampler settings.

    ``n_kept`` counts draws kept per chain; ``burn_in`` and ``thinning`` are
    in iterations (one iteration updates both blocks).  Warm-started runs use
    ``burn_in * warm_fraction`` iterations of burn-in.
    """

    burn_in: int = 1000
    n_kept: int = 500
    thinning: int = 2
    n_chains: int = 8
    proposal: str = "random-walk"
    target_acceptance: float = 0.3
    seed: int = 0
    warm_fraction: float = 0.25

    def __post_init__(self):
        if self.n_kept < 100:
            raise ValueError("n_kept must be >= 100")
        if self.n_chains < 2:
            raise ValueError("n_chains must be >= 2")
        if not 0.15 <= self.target_acceptance <= 0.6:
            raise ValueError("target_acceptance must lie in [0.15, 0.6]")
        if self.proposal not in PROPOSALS:
            raise ValueError(f"proposal must be one of {PROPOSALS}")
        if self.burn_in < 0 or self.thinning < 1:
            raise ValueError("burn_in must be >= 0 and thinning >= 1")

    def warm(self) -> "McmcConfig":
        return replace(self, burn_in=int(self.burn_in * self.warm_fraction))


@dataclass
class PosteriorSample:
    """Output of :func:`gibbs_posterior_sample`.

    ``draws`` has shape ``(n_chains, n_kept, d)``; ``acceptance`` holds the
    post-burn-in acceptance rate of each block averaged over chains.
    """

    draws: np.ndarray
    acceptance: np.ndarray
    scales: np.ndarray
    final_state: np.ndarray

    @property
    def flat_draws(self) -> np.ndarray:
        return self.draws.reshape(-1, self.draws.shape[-1])


def _log_target(energy: Energy, prior: PriorSpec, var, w):
    return -energy(w) - 0.5 * np.sum(w * w / var, axis=1)


def _log_target_grad(energy: Energy, prior: PriorSpec, var, w):
    e, g = energy.value_and_grad(w)
    return -e - 0.5 * np.sum(w * w / var, axis=1), -g - w / var


def gibbs_posterior_sample(energy: Energy, prior: PriorSpec, cfg: McmcConfig,
                           rng: np.random.Generator | None = None,
                           init: np.ndarray | None = None,
                           init_scales: np.ndarray | None = None) -> PosteriorSample:
    """Sample ``exp{-energy(w)} * prior(w)`` with adaptive block-wise Metropolis.

    Parameters
    ----------
    energy : Energy
        ``(1/beta) sum_i Q(Z_i, f_w)`` for the data at hand.
    init : ndarray (n_chains, d), optional
        Starting states; drawn from the prior when omitted.
    init_scales : ndarray (n_chains, 2), optional
        Starting proposal scales (e.g. from a previous run).
    """
    if rng is None:
        rng = rng_mod.stream(cfg.seed, "mcmc")
    shape = prior.shape
    C, d = cfg.n_chains, shape.d
    k = shape.n_hidden_weights
    blocks = [slice(0, k), slice(k, d)]
    sizes = [k, d - k]
    sd = prior.scale_vector()
    var = sd * sd
    langevin = cfg.proposal == "langevin"

    if init is None:
        w = sd * rng.standard_normal((C, d))
    else:
        w = np.array(init, dtype=np.float64).reshape(C, d)
    if init_scales is None:
        log_s = np.log(np.array([[0.5 * prior.rho1 / math.sqrt(sizes[0]),
                                  0.5 * prior.rho2 / math.sqrt(sizes[1])]] * C))
    else:
        log_s = np.log(np.array(init_scales, dtype=np.float64).reshape(C, 2))

    if langevin:
        lp, grad = _log_target_grad(energy, prior, var, w)
    else:
        lp, grad = _log_target(energy, prior, var, w), None

    total = cfg.burn_in + cfg.n_kept * cfg.thinning
    kept = np.empty((C, cfg.n_kept, d))
    accepted = np.zeros(2)
    n_post = 0
    for t in range(total):
        adapting = t < cfg.burn_in
        for b, blk in enumerate(blocks):
            s = np.exp(log_s[:, b])[:, None]
            z = rng.standard_normal((C, sizes[b]))
            prop = w.copy()
            if langevin:
                mean_fwd = w[:, blk] + 0.5 * s * s * grad[:, blk]
                prop[:, blk] = mean_fwd + s * z
                lp_prop, grad_prop = _log_target_grad(energy, prior, var, prop)
                mean_rev = prop[:, blk] + 0.5 * s * s * grad_prop[:, blk]
                log_q = (np.sum((prop[:, blk] - mean_fwd) ** 2, axis=1)
                         - np.sum((w[:, blk] - mean_rev) ** 2, axis=1)) / (2.0 * s[:, 0] ** 2)
                log_alpha = lp_prop - lp + log_q
            else:
                prop[:, blk] += s * z
                lp_prop = _log_target(energy, prior, var, prop)
                log_alpha = lp_prop - lp
            log_alpha = np.where(np.isnan(log_alpha), -np.inf, log_alpha)
            acc = np.log(rng.uniform(size=C)) < log_alpha
            w[acc] = prop[acc]
            lp[acc] = lp_prop[acc]
            if langevin:
                grad[acc] = grad_prop[acc]
            if adapting:
                gamma = (t + 1.0) ** -0.6
                log_s[:, b] += gamma * (np.exp(np.minimum(log_alpha, 0.0)) - cfg.target_acceptance)
            else:
                accepted[b] += acc.mean()
        if not adapting:
            n_post += 1
            j = t - cfg.burn_in
            if (j + 1) % cfg.thinning == 0:
                kept[:, j // cfg.thinning] = w
    return PosteriorSample(kept, accepted / max(n_post, 1), np.exp(log_s), w.copy())
