"""Flat ``key = value`` configuration for harness runs.

A config file holds one ``key = value`` pair per line; ``#`` starts a
comment.  Every key has a typed default, unknown keys are rejected, and the
hash of the resolved config is stamped on every CSV row.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
from dataclasses import dataclass, fields

from ..aggregation.losses import LossKind
from ..aggregation.mcmc import McmcConfig
from ..network import Activation, NetworkShape

MAX_D = 64
MAX_N = 500
MAX_REPLICATIONS = 500


class UsageError(ValueError):
    """Invalid configuration or command-line input."""


def _ints(text):
    return tuple(int(v) for v in str(text).split(",") if v.strip())


def _opt_float(text):
    if text is None or str(text).strip().lower() in ("", "auto", "none"):
        return None
    return float(text)


@dataclass(frozen=True)
class HarnessConfig:
    """All tunable settings of the harness.

    ``beta``, ``rho1`` and ``rho2`` accept ``auto``: ``beta`` then defaults
    to ``4 * noise_sd^2`` for regression (1 otherwise) and the prior scales
    come from the radii ``B1``, ``B2``.
    """

    # problem
    problem: str = "fixed-design-sq"
    target: str = "reference"
    target_seed: int = 0
    covariates: int = 1
    n: int = 100
    noise_sd: float = 0.3
    density_amplitude: float = 0.5
    logit_scale: float = 4.0
    points_per_axis: int = 33
    # estimator
    hidden_units: int = 3
    activation: str = "logistic"
    beta: float | None = None
    rho1: float | None = None
    rho2: float | None = None
    B1: float = 1.0
    B2: float = 1.0
    C_PB: float = 1.0
    # sampler
    burn_in: int = 400
    n_kept: int = 200
    thinning: int = 2
    n_chains: int = 4
    proposal: str = "random-walk"
    target_acceptance: float = 0.3
    # experiments
    replications: int = 20
    n_grid: tuple = (50, 100, 200, 400)
    width_rule: str = "sobolev"
    smoothness_r: float = 2.0
    barron_s: float = 2.0
    approx_constant: float = 1.0
    # bound verification
    verify_configs: int = 20
    verify_samples: int = 100_000
    verify_candidates: int = 10
    verify_n: tuple = (20, 100)
    # activation table
    table_min: float = -5.0
    table_max: float = 15.0
    table_points: int = 401

    _PARSERS = {"beta": _opt_float, "rho1": _opt_float, "rho2": _opt_float,
                "n_grid": _ints, "verify_n": _ints}

    def __post_init__(self):
        try:
            LossKind.from_tag(self.problem)
            Activation.from_tag(self.activation)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        if self.width_rule not in ("sobolev", "barron", "fixed"):
            raise UsageError(f"width_rule must be sobolev, barron or fixed, got {self.width_rule!r}")
        if self.replications < 1:
            raise UsageError("replications must be >= 1")
        if self.covariates < 0 or self.hidden_units < 1 or self.n < 1:
            raise UsageError("covariates >= 0, hidden_units >= 1 and n >= 1 are required")
        try:
            self.mcmc_config(0)
        except ValueError as exc:
            raise UsageError(str(exc)) from None

    # -- construction -----------------------------------------------------

    @classmethod
    def from_mapping(cls, values: dict) -> "HarnessConfig":
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            if key not in known:
                raise UsageError(f"unknown config key {key!r}")
            kwargs[key] = cls._coerce(key, known[key], raw)
        return cls(**kwargs)

    @classmethod
    def _coerce(cls, key, field, raw):
        if not isinstance(raw, str):
            return raw
        try:
            if key in cls._PARSERS:
                return cls._PARSERS[key](raw)
            kind = type(field.default)
            if kind is bool:
                return raw.strip().lower() in ("1", "true", "yes")
            return kind(raw.strip())
        except ValueError:
            raise UsageError(f"bad value for {key}: {raw!r}") from None

    @classmethod
    def from_file(cls, path, overrides: dict | None = None) -> "HarnessConfig":
        parser = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
        parser.optionxform = str
        try:
            with open(path) as fh:
                parser.read_string("[config]\n" + fh.read())
        except (OSError, configparser.Error) as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from None
        values = dict(parser["config"])
        values.update(overrides or {})
        return cls.from_mapping(values)

    def replace(self, **changes) -> "HarnessConfig":
        return dataclasses.replace(self, **changes)

    # -- views ------------------------------------------------------------

    def items(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(str(x) for x in v)
            yield f.name, "auto" if v is None else str(v)

    def to_text(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in self.items())

    @property
    def hash(self) -> str:
        """Short digest of the resolved settings."""
        return hashlib.sha256(self.to_text().encode()).hexdigest()[:12]

    @property
    def loss_kind(self) -> LossKind:
        return LossKind.from_tag(self.problem)

    def resolved_beta(self) -> float:
        if self.beta is not None:
            return self.beta
        if self.loss_kind in (LossKind.FIXED_DESIGN_SQ, LossKind.RANDOM_DESIGN_SQ):
            return 4.0 * self.noise_sd**2 if self.noise_sd > 0 else 1.0
        return 1.0

    def mcmc_config(self, seed: int) -> McmcConfig:
        return McmcConfig(self.burn_in, self.n_kept, self.thinning, self.n_chains,
                          self.proposal, self.target_acceptance, seed)

    def check_caps(self, allow_large: bool, ns=None, widths=None) -> None:
        """Enforce desk-scale limits on dimension, sample size and replications.

        ``ns`` and ``widths`` default to the single-run ``n`` and
        ``hidden_units``; rate studies pass their grids.
        """
        if allow_large:
            return
        n_max = max(ns or (self.n,))
        for D1 in widths or (self.hidden_units,):
            d = NetworkShape(self.covariates + 1, D1, 1).d
            if d > MAX_D:
                raise UsageError(f"d = {d} exceeds the desk cap {MAX_D}; pass --allow-large")
        if n_max > MAX_N:
            raise UsageError(f"n = {n_max} exceeds the desk cap {MAX_N}; pass --allow-large")
        if self.replications > MAX_REPLICATIONS:
            raise UsageError(f"replications = {self.replications} exceeds the desk cap "
                             f"{MAX_REPLICATIONS}; pass --allow-large")
