"""Monte Carlo verification of the analytic bounds on random desk-scale configs.

Each configuration draws a network shape (``d <= 12``), a reference weight
``w_bar``, prior scales, a candidate spread, a temperature and a 15-point
design.  The suite checks

* the integral bounds on ``G1``, ``G2`` and ``E_p ||f_w - f_wbar||^2``,
* the remainder bound against the Monte Carlo free energy for each ``n``,
* the variational inequality ``free energy <= E_p L + (beta/n) KL(p, prior)``
  for random Gaussian candidates ``p``,

each up to three standard errors.  The first unbounded configuration is a
tightness anchor: one ReLU unit kept in its linear region, where the
``G2`` bound is attained up to Monte Carlo error.  That makes the
``a1_scale`` hook (which shrinks ``A1`` and hence the ``G2`` bound) a
meaningful negative control.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .. import rng as rng_mod
from ..bounds import BoundReport, compute_moments, g1_bound, g2_bound, rem_bound
from ..gaussian import CandidateSpec, PriorSpec, kl_gaussian
from ..montecarlo import L2Metric, mc_free_energy, mc_G1_G2, mc_weighted_l2
from ..network import Activation, NetworkShape, WeightVector, add_intercept

BOUNDED_ACTIVATIONS = ("logistic", "tanh", "maiorov-gaussian", "maiorov-triangle")
MAX_VERIFY_D = 12
DESIGN_POINTS = 15


@dataclass(frozen=True, eq=False)
class VerifyConfig:
    """One random configuration of the suite."""

    regime: str
    index: int
    activation: Activation
    w_bar: WeightVector
    prior: PriorSpec
    tau1: float
    tau2: float
    beta: float
    design: np.ndarray

    @property
    def shape(self) -> NetworkShape:
        return self.w_bar.shape


def _random_shape(rng) -> NetworkShape:
    while True:
        shape = NetworkShape(int(rng.integers(2, 4)), int(rng.integers(1, 4)), int(rng.integers(1, 3)))
        if shape.d <= MAX_VERIFY_D:
            return shape


def random_config(regime: str, index: int, rng: np.random.Generator) -> VerifyConfig:
    shape = _random_shape(rng)
    if regime == "bounded":
        act = Activation.from_tag(BOUNDED_ACTIVATIONS[int(rng.integers(len(BOUNDED_ACTIVATIONS)))])
    else:
        act = Activation.RELU
    w_bar = WeightVector(0.7 * rng.standard_normal((shape.D0, shape.D1)),
                         0.7 * rng.standard_normal((shape.D1, shape.D2)))
    prior = PriorSpec(float(rng.uniform(0.3, 1.5)), float(rng.uniform(0.3, 1.5)), shape)
    tau1, tau2 = (float(v) for v in rng.uniform(0.05, 1.0, size=2))
    beta = float(rng.uniform(0.5, 2.0))
    design = add_intercept(rng.uniform(-1.0, 1.0, size=(DESIGN_POINTS, shape.D0 - 1)))
    return VerifyConfig(regime, index, act, w_bar, prior, tau1, tau2, beta, design)


def anchor_config(rng: np.random.Generator) -> VerifyConfig:
    """ReLU with ``D1 = 1`` whose pre-activations stay positive on the design."""
    shape = NetworkShape(2, 1, 1)
    w_bar = WeightVector(np.array([[3.0], [0.5]]), np.array([[1.0]]))
    design = add_intercept(rng.uniform(-1.0, 1.0, size=(DESIGN_POINTS, 1)))
    prior = PriorSpec(1.0, 1.0, shape)
    return VerifyConfig("unbounded", 0, Activation.RELU, w_bar, prior, 0.05, 0.05, 1.0, design)


def suite(n_configs: int, seed: int) -> list[VerifyConfig]:
    """The default suite: ``n_configs`` per regime, the unbounded one led by the anchor."""
    out = [random_config("bounded", i, rng_mod.stream(seed, "verify-config", 0, i))
           for i in range(n_configs)]
    if n_configs:
        out.append(anchor_config(rng_mod.stream(seed, "verify-config", 1, 0)))
    out += [random_config("unbounded", i, rng_mod.stream(seed, "verify-config", 1, i))
            for i in range(1, n_configs)]
    return out


@dataclass
class CheckRow:
    """One comparison ``estimate <= bound`` (up to ``3 * std_error``)."""

    regime: str
    config: int
    check: str
    n: int
    estimate: float
    std_error: float
    bound: float
    ess: float
    constants: dict = field(default_factory=dict)

    @property
    def margin(self) -> float:
        """``bound + 3 se - estimate``; negative means a violation."""
        return self.bound + 3.0 * self.std_error - self.estimate

    @property
    def passed(self) -> bool:
        return self.margin >= 0.0


@dataclass
class VerifyReport:
    rows: list
    config_hash: str = ""

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    @property
    def failures(self) -> list:
        return [r for r in self.rows if not r.passed]

    HEADER = ["config_hash", "regime", "config", "check", "n", "estimate", "std_error", "bound",
              "margin", "ess", "passed", "constants"]

    def write_csv(self, path) -> None:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.HEADER)
            for r in self.rows:
                consts = ";".join(f"{k}={_fmt(v)}" for k, v in r.constants.items())
                w.writerow([self.config_hash, r.regime, r.config, r.check, r.n, _fmt(r.estimate),
                            _fmt(r.std_error), _fmt(r.bound), _fmt(r.margin), _fmt(r.ess),
                            int(r.passed), consts])


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _report_constants(report: BoundReport) -> dict:
    return {**{f"c.{k}": v for k, v in report.intermediates.items()},
            **{f"in.{k}": v for k, v in report.inputs.items()}}


CHECKS = ("lemmas", "free_energy")


def check_config(cfg: VerifyConfig, ns, n_samples: int, n_candidates: int,
                 rng: np.random.Generator, a1_scale: float = 1.0, checks=CHECKS) -> list[CheckRow]:
    """Checks for one configuration: ``lemmas`` (integral bounds) and/or
    ``free_energy`` (remainder bound and variational inequality)."""
    moments = compute_moments(cfg.design, shape=cfg.shape)
    metric = L2Metric(moments, cfg.activation, cfg.shape)
    act = cfg.activation
    Msigma = act.bound if act.is_bounded else None
    base = {"D0": cfg.shape.D0, "D1": cfg.shape.D1, "D2": cfg.shape.D2, "activation": act.tag,
            "tau1": cfg.tau1, "tau2": cfg.tau2, "rho1": cfg.prior.rho1, "rho2": cfg.prior.rho2,
            "beta": cfg.beta, "M2": moments.M2, "Mbar2": moments.Mbar2, "mu_mass": moments.mu_mass,
            "Msigma": Msigma if Msigma is not None else float("nan"), "a1_scale": a1_scale}
    key = int(rng.integers(0, 2**63 - 1))
    rows = []
    if "lemmas" in checks:
        rows += _lemma_rows(cfg, metric, moments, base, n_samples, key, a1_scale)
    if "free_energy" in checks:
        rows += _free_energy_rows(cfg, metric, moments, base, ns, n_samples, n_candidates, key)
    return rows


def _lemma_rows(cfg, metric, moments, base, n_samples, key, a1_scale):
    act = cfg.activation
    Msigma = act.bound if act.is_bounded else None
    rows = []
    cand = CandidateSpec(cfg.w_bar, cfg.tau1, cfg.tau2)
    b2 = a1_scale * g2_bound(cfg.w_bar, cfg.tau1, moments)
    b1 = g1_bound(cfg.w_bar, cfg.tau1, cfg.tau2, moments, act.regime, Msigma)
    e1, e2 = mc_G1_G2(cand, cfg.w_bar, metric, n_samples, rng_mod.stream(key, "g1-g2"))
    el2 = mc_weighted_l2(cand, cfg.w_bar, metric, n_samples, rng_mod.stream(key, "weighted-l2"))
    for name, est, bound in (("G1", e1, b1), ("G2", e2, b2), ("weighted_l2", el2, b1 + b2)):
        rows.append(CheckRow(cfg.regime, cfg.index, name, 0, est.mean, est.std_error, bound,
                             float("nan"), dict(base, G1_bound=b1, G2_bound=b2)))
    return rows


def _free_energy_rows(cfg, metric, moments, base, ns, n_samples, n_candidates, key):
    act = cfg.activation
    rows = []
    for n in ns:
        rep = rem_bound(cfg.w_bar, cfg.prior, n, cfg.beta, moments, act)
        fe = mc_free_energy(cfg.w_bar, cfg.prior, metric, n, cfg.beta, n_samples,
                            rng_mod.stream(key, "free-energy", n))
        rows.append(CheckRow(cfg.regime, cfg.index, "free_energy", n, fe.mean, fe.std_error,
                             rep.value, fe.ess, dict(base, **_report_constants(rep))))
        crng = rng_mod.stream(key, "candidates", n)
        for j in range(n_candidates):
            p = random_candidate(cfg, crng)
            obj_l2 = mc_weighted_l2(p, cfg.w_bar, metric, n_samples // 10,
                                    rng_mod.stream(key, "candidate-l2", n, j))
            kl = kl_gaussian(p, cfg.prior)
            # free energy is the estimate, candidate objective the bound
            se = math.hypot(fe.std_error, obj_l2.std_error)
            rows.append(CheckRow(cfg.regime, cfg.index, f"variational[{j}]", n, fe.mean, se,
                                 obj_l2.mean + cfg.beta / n * kl, fe.ess,
                                 dict(base, kl=kl, candidate_l2=obj_l2.mean, cand_tau1=p.tau1,
                                      cand_tau2=p.tau2)))
    return rows


def random_candidate(cfg: VerifyConfig, rng: np.random.Generator) -> CandidateSpec:
    shape = cfg.shape
    shift = 0.3 * rng.standard_normal(shape.d)
    center = WeightVector.from_flat(shape, cfg.w_bar.flatten() + shift)
    tau1, tau2 = (float(v) for v in rng.uniform(0.02, 1.0, size=2))
    return CandidateSpec(center, tau1 * cfg.prior.rho1, tau2 * cfg.prior.rho2)


def verify_bounds(n_configs: int = 20, seed: int = 0, ns=(20, 100), n_samples: int = 100_000,
                  n_candidates: int = 10, a1_scale: float = 1.0, checks=CHECKS,
                  config_hash: str = "", threads: int = 1) -> VerifyReport:
    """Run the domination suite.

    ``a1_scale`` multiplies the ``G2`` bound (through the constant ``A1``);
    values below 1 are a negative control and must produce failures.
    """
    def job(cfg):
        key = 0 if cfg.regime == "bounded" else 1
        return check_config(cfg, ns, n_samples, n_candidates,
                            rng_mod.stream(seed, "verify-mc", key, cfg.index), a1_scale, checks)

    configs = suite(n_configs, seed)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(job, configs))
    else:
        parts = [job(c) for c in configs]
    return VerifyReport([r for part in parts for r in part], config_hash)
