"""Replicated experiments and rate studies.

Replication ``i`` at sample size ``n`` draws its data and its sampler
streams from keys ``(seed, label, n, i)``, so results do not depend on how
replications are scheduled across threads.  Results are reduced in
replication order.
"""

from __future__ import annotations

import csv
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .. import rng as rng_mod
from ..aggregation.estimators import ewa_predictor, mirror_averaging_predictor
from ..aggregation.losses import LossKind, LossModel
from ..aggregation.risk import risk_eval
from ..bounds import (
    BoundReport,
    SmoothnessSpec,
    barron_exponents,
    barron_rate_bound,
    select_D1_barron,
    select_D1_sobolev,
    sobolev_rate_bound,
    uniform_grid_design,
    worstcase_rem,
)
from ..gaussian import PriorSpec, select_rho
from ..network import Activation, NetworkShape
from .config import HarnessConfig
from .problems import (
    CosineDensity,
    LogitTarget,
    NetworkTarget,
    ProblemInstance,
    ReferenceTarget,
    UniformDensity,
    ZeroTarget,
    generate,
)


def build_instance(cfg: HarnessConfig, n: int | None = None) -> ProblemInstance:
    """Problem instance described by a config."""
    kind = cfg.loss_kind
    p = cfg.covariates
    name = cfg.target
    if name == "reference":
        target = ReferenceTarget()
    elif name == "zero":
        target = ZeroTarget()
    elif name == "network":
        shape = NetworkShape(p + 1, cfg.hidden_units, 1)
        target = NetworkTarget.random(shape, cfg.activation, cfg.B1, cfg.B2,
                                      rng_mod.stream(cfg.target_seed, "target-network"))
    elif name == "uniform":
        target = UniformDensity()
    elif name == "cosine":
        target = CosineDensity(cfg.density_amplitude)
    elif name == "logit":
        target = LogitTarget(ReferenceTarget(), cfg.logit_scale)
    else:
        raise ValueError(f"unknown target {name!r}")
    if kind is LossKind.PHI_RISK and name != "logit":
        target = LogitTarget(target, cfg.logit_scale)
    return ProblemInstance(kind, target, cfg.n if n is None else n, p, cfg.noise_sd,
                           cfg.target_seed, cfg.points_per_axis)


def make_prior(cfg: HarnessConfig, shape: NetworkShape) -> PriorSpec:
    rho1, rho2 = select_rho(cfg.B1, cfg.B2, shape)
    return PriorSpec(cfg.rho1 if cfg.rho1 is not None else rho1,
                     cfg.rho2 if cfg.rho2 is not None else rho2, shape)


def fit_predictor(instance: ProblemInstance, data, cfg: HarnessConfig, rng: np.random.Generator):
    """Fit the estimator matching the problem kind.  Returns ``(predictor, acceptance)``."""
    shape = NetworkShape(instance.D0, cfg.hidden_units, 1)
    act = Activation.from_tag(cfg.activation)
    prior = make_prior(cfg, shape)
    beta = cfg.resolved_beta()
    mcmc = cfg.mcmc_config(0)
    kind = instance.kind
    if kind is LossKind.FIXED_DESIGN_SQ:
        pred, sample = ewa_predictor(data.X, data.y, prior, beta, mcmc, act, rng)
        return pred, sample.acceptance
    if kind is LossKind.DENSITY:
        loss = LossModel(kind, quadrature=uniform_grid_design(instance.n_covariates,
                                                              instance.points_per_axis))
    else:
        loss = LossModel(kind)
    pred, samples = mirror_averaging_predictor(data.X, data.y, loss, prior, beta, mcmc, act, rng)
    return pred, np.mean([s.acceptance for s in samples], axis=0)


def attached_bounds(instance: ProblemInstance, cfg: HarnessConfig) -> list[BoundReport]:
    """Bound-engine values for the experiment's configuration."""
    act = Activation.from_tag(cfg.activation)
    shape = NetworkShape(instance.D0, cfg.hidden_units, 1)
    moments = instance.risk_moments()
    Msigma = act.bound if act.is_bounded else None
    beta = cfg.resolved_beta()
    rem = worstcase_rem(cfg.B1, cfg.B2, instance.n, beta, moments, Msigma, shape, act.regime)
    reports = [rem]
    if isinstance(instance.target, NetworkTarget):
        # a network target inside the radii has zero oracle term
        reports.append(BoundReport("pac_bayes_bound", cfg.C_PB * rem.value,
                                   {"oracle_term": 0.0, "worstcase_rem": rem.value},
                                   {"C_PB": cfg.C_PB}))
    return reports


@dataclass
class ExperimentResult:
    """Per-replication risks with their summary and attached bounds.

    ``wall_time`` is informational and never written to result files.
    """

    risks: np.ndarray
    acceptance: np.ndarray
    bounds: list
    config: HarnessConfig
    n: int
    hidden_units: int
    wall_time: float = 0.0
    config_hash: str = ""

    def __post_init__(self):
        if not self.config_hash:
            self.config_hash = self.config.hash

    @property
    def replications(self) -> int:
        return len(self.risks)

    @property
    def mean(self) -> float:
        return float(np.mean(self.risks))

    @property
    def std_error(self) -> float:
        if len(self.risks) < 2:
            return float("nan")
        return float(np.std(self.risks, ddof=1) / math.sqrt(len(self.risks)))

    def bound(self, name: str) -> BoundReport:
        for b in self.bounds:
            if b.name == name:
                return b
        raise KeyError(name)


def _one_replication(instance, cfg, seed, i):
    data = generate(instance, rng_mod.stream(seed, "data", instance.n, i))
    pred, acc = fit_predictor(instance, data, cfg, rng_mod.stream(seed, "sampler", instance.n, i))
    moments = instance.risk_moments()
    kind = "phi" if instance.kind is LossKind.PHI_RISK else "l2"
    return risk_eval(pred, instance.target, moments, kind=kind), acc


def run_experiment(instance: ProblemInstance, cfg: HarnessConfig, replications: int, seed: int,
                   threads: int = 1) -> ExperimentResult:
    """Fit ``replications`` independent data sets and evaluate the risk of each fit."""
    if replications < 1:
        raise ValueError("replications must be >= 1")
    start = time.perf_counter()

    def job(i):
        return _one_replication(instance, cfg, seed, i)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            out = list(pool.map(job, range(replications)))
    else:
        out = [job(i) for i in range(replications)]
    risks = np.array([r for r, _ in out])
    acc = np.array([a for _, a in out])
    return ExperimentResult(risks, acc, attached_bounds(instance, cfg), cfg, instance.n,
                            cfg.hidden_units, time.perf_counter() - start)


# ---------------------------------------------------------------------------
# rate studies
# ---------------------------------------------------------------------------


@dataclass
class RateStudyResult:
    results: list
    slope: float
    intercept: float
    rule_bounds: list
    config_hash: str

    @property
    def n_grid(self):
        return [r.n for r in self.results]

    @property
    def mean_risks(self):
        return np.array([r.mean for r in self.results])

    def monotone_within(self, k: float = 2.0) -> bool:
        """Risks nonincreasing up to ``k`` combined standard errors."""
        for a, b in zip(self.results, self.results[1:]):
            slack = k * math.hypot(a.std_error, b.std_error)
            if b.mean > a.mean + slack:
                return False
        return True


def width_for(n, cfg: HarnessConfig, D0: int) -> int:
    beta = cfg.resolved_beta()
    if cfg.width_rule == "sobolev":
        return select_D1_sobolev(n, beta, D0, cfg.smoothness_r)
    if cfg.width_rule == "barron":
        return select_D1_barron(n, beta, D0, barron_exponents(cfg.barron_s, D0)[0])
    return cfg.hidden_units


def rate_bound(n, cfg: HarnessConfig, instance: ProblemInstance) -> BoundReport:
    act = Activation.from_tag(cfg.activation)
    moments = instance.risk_moments()
    beta = cfg.resolved_beta()
    if cfg.width_rule == "barron":
        return barron_rate_bound(n, beta, instance.D0, cfg.barron_s, cfg.B1, cfg.B2, moments,
                                 cfg.approx_constant, cfg.C_PB)
    smooth = SmoothnessSpec(cfg.smoothness_r, approx_constant=cfg.approx_constant, C_PB=cfg.C_PB)
    Msigma = act.bound if act.is_bounded else 1.0
    return sobolev_rate_bound(n, beta, instance.D0, smooth, cfg.B1, cfg.B2, moments, Msigma)


def rate_study(base: ProblemInstance, n_grid, cfg: HarnessConfig, replications: int, seed: int,
               threads: int = 1) -> RateStudyResult:
    """Risk against sample size with the hidden width set by ``cfg.width_rule``.

    Returns the per-``n`` experiments and the least-squares slope of
    ``log(mean risk)`` on ``log(n)``.
    """
    n_grid = list(n_grid)
    if len(n_grid) < 4 or any(b <= a for a, b in zip(n_grid, n_grid[1:])):
        raise ValueError("n grid must be increasing with at least four points")
    results, bounds = [], []
    for n in n_grid:
        inst = base.with_n(n)
        run_cfg = cfg.replace(hidden_units=width_for(n, cfg, base.D0), n=n)
        res = run_experiment(inst, run_cfg, replications, seed, threads)
        res.config_hash = cfg.hash
        bounds.append(rate_bound(n, cfg, inst))
        results.append(res)
    slope, intercept = np.polyfit(np.log(n_grid), np.log([r.mean for r in results]), 1)
    return RateStudyResult(results, float(slope), float(intercept), bounds, cfg.hash)


# ---------------------------------------------------------------------------
# CSV output
# ---------------------------------------------------------------------------


def _f(v) -> str:
    return repr(float(v))


def write_experiment(result: ExperimentResult, out_dir, append: bool = False) -> None:
    """Write ``replications.csv``, ``summary.csv`` and ``bounds.csv``."""
    os.makedirs(out_dir, exist_ok=True)
    h = result.config_hash
    mode = "a" if append else "w"
    _rows(os.path.join(out_dir, "replications.csv"), mode,
          ["config_hash", "n", "D1", "replication", "risk", "acc_hidden", "acc_output"],
          [[h, result.n, result.hidden_units, i, _f(r), _f(a[0]), _f(a[1])]
           for i, (r, a) in enumerate(zip(result.risks, result.acceptance))])
    _rows(os.path.join(out_dir, "summary.csv"), mode,
          ["config_hash", "n", "D1", "replications", "mean_risk", "std_error"]
          + [b.name for b in result.bounds],
          [[h, result.n, result.hidden_units, result.replications, _f(result.mean),
            _f(result.std_error)] + [_f(b.value) for b in result.bounds]])
    write_bounds(result.bounds, os.path.join(out_dir, "bounds.csv"), h, mode)


def write_bounds(reports, path, config_hash: str, mode: str = "w") -> None:
    """One row per report; the columns are the union over reports."""
    cols: list[str] = []
    for b in reports:
        cols += [c for c in b.columns() if c not in cols]
    rows = []
    for b in reports:
        vals = dict(zip(b.columns(), b.row()))
        rows.append([config_hash] + [vals.get(c, "") for c in cols])
    _rows(path, mode, ["config_hash"] + cols, rows)


def write_rate_study(study: RateStudyResult, out_dir) -> None:
    os.makedirs(out_dir, exist_ok=True)
    for i, res in enumerate(study.results):
        write_experiment(res, out_dir, append=i > 0)
    h = study.config_hash
    rows = [[h, r.n, r.hidden_units, _f(r.mean), _f(r.std_error), _f(b.value)]
            for r, b in zip(study.results, study.rule_bounds)]
    _rows(os.path.join(out_dir, "rate.csv"), "w",
          ["config_hash", "n", "D1", "mean_risk", "std_error", "rate_bound"], rows)
    _rows(os.path.join(out_dir, "rate_fit.csv"), "w", ["config_hash", "slope", "intercept"],
          [[h, _f(study.slope), _f(study.intercept)]])


def _rows(path, mode, header, rows) -> None:
    new = mode == "w" or not os.path.exists(path)
    with open(path, mode, newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if new:
            w.writerow(header)
        w.writerows(rows)
