"""Problem instances and synthetic data for the four aggregation settings."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .. import rng as rng_mod
from ..aggregation.losses import LossKind
from ..bounds import DesignMoments, compute_moments, uniform_grid_design
from ..network import Activation, NetworkShape, WeightVector, add_intercept, forward_batch

# ---------------------------------------------------------------------------
# targets: callables on design points with intercept, returning (N, 1)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ReferenceTarget:
    """``prod_k (1 + cos(pi x_k)) / 2`` on ``[0, 1]^p``."""

    tag = "reference"

    def __call__(self, Xd):
        Xd = np.atleast_2d(Xd)
        return np.prod((1.0 + np.cos(np.pi * Xd[:, 1:])) / 2.0, axis=1)[:, None]


@dataclass(frozen=True)
class ZeroTarget:
    tag = "zero"

    def __call__(self, Xd):
        return np.zeros((np.atleast_2d(Xd).shape[0], 1))


@dataclass(frozen=True, eq=False)
class NetworkTarget:
    """A fixed network ``f_{w*}``."""

    weights: WeightVector
    activation: Activation
    tag = "network"

    def __call__(self, Xd):
        flat = self.weights.flatten()[None]
        return forward_batch(self.weights.shape, flat, np.atleast_2d(Xd), self.activation)[0]

    @classmethod
    def random(cls, shape: NetworkShape, activation, B1: float, B2: float,
               rng: np.random.Generator) -> "NetworkTarget":
        """Random direction per block, scaled to Frobenius norms ``B1`` and ``B2``."""
        w1 = rng.standard_normal((shape.D0, shape.D1))
        w2 = rng.standard_normal((shape.D1, shape.D2))
        w1 *= B1 / np.linalg.norm(w1)
        w2 *= B2 / np.linalg.norm(w2)
        return cls(WeightVector(w1, w2), Activation.from_tag(activation))


@dataclass(frozen=True)
class LogitTarget:
    """Logit ``scale * (base(x) - 1/2)`` of ``P(Y = 1 | x)``."""

    base: object = ReferenceTarget()
    scale: float = 4.0
    tag = "logit"

    def __call__(self, Xd):
        return self.scale * (self.base(Xd) - 0.5)


@dataclass(frozen=True)
class UniformDensity:
    tag = "uniform"

    def __call__(self, Xd):
        return np.ones((np.atleast_2d(Xd).shape[0], 1))

    def sample(self, rng, n, p):
        return rng.uniform(size=(n, p))


@dataclass(frozen=True)
class CosineDensity:
    """``prod_k (1 + a cos(2 pi x_k))`` on ``[0, 1]^p``, sampled by rejection."""

    amplitude: float = 0.5
    tag = "cosine"

    def __post_init__(self):
        if not 0.0 <= self.amplitude <= 1.0:
            raise ValueError("amplitude must lie in [0, 1]")

    def __call__(self, Xd):
        Xd = np.atleast_2d(Xd)
        return np.prod(1.0 + self.amplitude * np.cos(2.0 * np.pi * Xd[:, 1:]), axis=1)[:, None]

    def sample(self, rng, n, p):
        bound = (1.0 + self.amplitude) ** p
        out = np.empty((0, p))
        while len(out) < n:
            cand = rng.uniform(size=(2 * (n - len(out)) + 8, p))
            u = rng.uniform(size=len(cand))
            keep = u * bound <= self(add_intercept(cand))[:, 0]
            out = np.vstack([out, cand[keep]])
        return out[:n]


DENSITY_TARGETS = {"uniform": UniformDensity, "cosine": CosineDensity}


# ---------------------------------------------------------------------------
# problem instances
# ---------------------------------------------------------------------------


@dataclass
class Dataset:
    """Observations with intercept-augmented design ``X`` and responses ``y``.

    ``y`` is ``(n, 1)`` for regression, labels in {-1, +1} for
    classification, and None for density estimation.
    """

    X: np.ndarray
    y: np.ndarray | None

    def __len__(self):
        return len(self.X)


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """A synthetic estimation problem.

    Parameters
    ----------
    kind : LossKind
    target : callable
        ``f_P`` on design points with intercept: the regression function,
        the density, or the logit of ``P(Y = 1 | x)``.
    n : int
    n_covariates : int
        Number of covariates ``p``; networks see ``D0 = p + 1`` inputs.
    noise_sd : float
        Gaussian noise level (regression only).
    seed : int
        Fixes the design points of fixed-design problems.
    points_per_axis : int
        Quadrature resolution of ``mu`` for random-design risks.
    """

    kind: LossKind
    target: object
    n: int
    n_covariates: int = 1
    noise_sd: float = 0.0
    seed: int = 0
    points_per_axis: int = 33

    def __post_init__(self):
        object.__setattr__(self, "kind", LossKind.from_tag(self.kind))
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be >= 0")
        if self.kind is LossKind.DENSITY and not hasattr(self.target, "sample"):
            raise ValueError("density problems need a target with a sampler")

    @property
    def D0(self) -> int:
        return self.n_covariates + 1

    def with_n(self, n: int) -> "ProblemInstance":
        return ProblemInstance(self.kind, self.target, n, self.n_covariates, self.noise_sd,
                               self.seed, self.points_per_axis)

    def fixed_design(self) -> np.ndarray:
        """Design of a fixed-design problem: midpoints for one covariate, else seeded uniform."""
        p = self.n_covariates
        if p == 1:
            pts = ((np.arange(self.n) + 0.5) / self.n)[:, None]
        else:
            pts = rng_mod.stream(self.seed, "fixed-design", self.n).uniform(size=(self.n, p))
        return add_intercept(pts)

    def risk_moments(self) -> DesignMoments:
        """Measure ``mu`` of the risk: the design for fixed design, else uniform quadrature."""
        if self.kind is LossKind.FIXED_DESIGN_SQ:
            return compute_moments(self.fixed_design())
        return compute_moments(*uniform_grid_design(self.n_covariates, self.points_per_axis))


def generate(instance: ProblemInstance, rng: np.random.Generator) -> Dataset:
    """Draw one data set.  Deterministic given the generator state."""
    n, p = instance.n, instance.n_covariates
    kind = instance.kind
    if kind is LossKind.FIXED_DESIGN_SQ:
        X = instance.fixed_design()
    elif kind is LossKind.DENSITY:
        return Dataset(add_intercept(instance.target.sample(rng, n, p)), None)
    else:
        X = add_intercept(rng.uniform(size=(n, p)))
    f = np.asarray(instance.target(X), dtype=np.float64).reshape(n, 1)
    if kind is LossKind.PHI_RISK:
        y = np.where(rng.uniform(size=(n, 1)) < expit(f), 1.0, -1.0)
        return Dataset(X, y)
    return Dataset(X, f + instance.noise_sd * rng.standard_normal((n, 1)))


def integrate_density(target, n_covariates: int, points_per_axis: int = 64) -> float:
    """Mass of a density target under Gauss-Legendre quadrature on the unit cube."""
    pts, wts = uniform_grid_design(n_covariates, points_per_axis)
    return float(np.sum(wts * target(pts)[:, 0]))
