"""Block-spherical Gaussian priors and candidates over network weights."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .network import NetworkShape, WeightVector


@dataclass(frozen=True)
class PriorSpec:
    """Centered prior ``N(0, rho1^2 I) x N(0, rho2^2 I)`` on ``(w1, w2)``."""

    rho1: float
    rho2: float
    shape: NetworkShape

    def __post_init__(self):
        if not (self.rho1 > 0 and self.rho2 > 0):
            raise ValueError(f"prior scales must be positive, got {self.rho1}, {self.rho2}")

    def scale_vector(self) -> np.ndarray:
        """Per-coordinate standard deviations in the flat layout."""
        return np.concatenate([
            np.full(self.shape.n_hidden_weights, float(self.rho1)),
            np.full(self.shape.n_output_weights, float(self.rho2)),
        ])

    def log_density(self, flat: np.ndarray) -> np.ndarray:
        """Unnormalized log density of flat weights ``(..., d)``."""
        z = np.asarray(flat) / self.scale_vector()
        return -0.5 * np.sum(z * z, axis=-1)


@dataclass(frozen=True)
class CandidateSpec:
    """Gaussian ``N(center_1, tau1^2 I) x N(center_2, tau2^2 I)``.

    ``tau = 0`` is allowed and means a point mass on that block.
    """

    center: WeightVector
    tau1: float
    tau2: float

    def __post_init__(self):
        if self.tau1 < 0 or self.tau2 < 0:
            raise ValueError("candidate scales must be non-negative")

    @property
    def shape(self) -> NetworkShape:
        return self.center.shape

    def scale_vector(self) -> np.ndarray:
        s = self.shape
        return np.concatenate([
            np.full(s.n_hidden_weights, float(self.tau1)),
            np.full(s.n_output_weights, float(self.tau2)),
        ])


def _kl_term(norm_sq, count, tau, rho):
    u = (tau / rho) ** 2
    return norm_sq / rho**2 + count * (u - 1.0 - math.log(u))


def kl_gaussian(p: CandidateSpec, prior: PriorSpec) -> float:
    """KL divergence ``KL(p || prior)`` in nats."""
    if not (p.tau1 > 0 and p.tau2 > 0):
        raise ValueError("KL is infinite for a degenerate candidate (tau = 0)")
    p.center.check_shape(prior.shape)
    s = prior.shape
    n1 = float(np.sum(p.center.w1**2))
    n2 = float(np.sum(p.center.w2**2))
    return 0.5 * (
        _kl_term(n1, s.D0 * s.D1, p.tau1, prior.rho1)
        + _kl_term(n2, s.D1 * s.D2, p.tau2, prior.rho2)
    )


def select_rho(B1: float, B2: float, shape: NetworkShape) -> tuple[float, float]:
    """Prior scales ``rho_l = B_l / sqrt(2 D_{l-1} D_l)`` for weight radii ``B_l``."""
    if not (B1 > 0 and B2 > 0):
        raise ValueError("weight radii must be positive")
    return (
        B1 / math.sqrt(2.0 * shape.D0 * shape.D1),
        B2 / math.sqrt(2.0 * shape.D1 * shape.D2),
    )


def radii_from_rho(rho1: float, rho2: float, shape: NetworkShape) -> tuple[float, float]:
    """Inverse of :func:`select_rho`."""
    return (
        rho1 * math.sqrt(2.0 * shape.D0 * shape.D1),
        rho2 * math.sqrt(2.0 * shape.D1 * shape.D2),
    )


def _check_scales(n, beta, *others):
    if n < 1:
        raise ValueError("n must be at least 1")
    if not beta > 0:
        raise ValueError("beta must be positive")
    for v in others:
        if v < 0:
            raise ValueError("moment constants must be non-negative")


def tau_constants_bounded(w_bar: WeightVector, prior: PriorSpec, n, beta, M2, Msigma, mu_mass):
    """``(C1, C2)`` of the bounded-activation variance selection."""
    _check_scales(n, beta, M2, Msigma, mu_mass)
    n2 = float(np.sum(w_bar.w2**2))
    C1 = 2.0 * n * M2**2 * n2 * prior.rho1**2 / beta + 1.0
    C2 = 2.0 * n * mu_mass * Msigma**2 * prior.rho2**2 / beta + 1.0
    return C1, C2


def select_tau_bounded(w_bar: WeightVector, prior: PriorSpec, n, beta, M2, Msigma, mu_mass):
    """Candidate scales minimizing the bounded-case objective, ``tau_l^2 = rho_l^2 / C_l``."""
    w_bar.check_shape(prior.shape)
    C1, C2 = tau_constants_bounded(w_bar, prior, n, beta, M2, Msigma, mu_mass)
    return prior.rho1 / math.sqrt(C1), prior.rho2 / math.sqrt(C2)


def tau_constants_unbounded(w_bar: WeightVector, prior: PriorSpec, n, beta, M2, Mbar2):
    """``(C1', C2', C3')`` of the unbounded-activation variance selection."""
    _check_scales(n, beta, M2, Mbar2)
    s = prior.shape
    n1 = float(np.sum(w_bar.w1**2))
    n2 = float(np.sum(w_bar.w2**2))
    r1, r2 = prior.rho1**2, prior.rho2**2
    denom = beta * (s.D0 + s.D2)
    C1 = 2.0 * n * s.D0 * M2**2 * n2 * r1 / denom + 1.0
    C2 = 2.0 * n * Mbar2**2 * n1 * s.D2 * r2 / (denom * s.D1) + 1.0
    C3 = 2.0 * n * M2**2 * r1 * r2 * s.D0 * s.D2 / denom
    return C1, C2, C3


def select_tau_unbounded(w_bar: WeightVector, prior: PriorSpec, n, beta, M2, Mbar2):
    """Candidate scales for activations that vanish at zero.

    ``tau2^2 = rho2^2 / C2'`` and ``tau1^2 = rho1^2 / (C1' + C3'/C2')``.
    """
    w_bar.check_shape(prior.shape)
    C1, C2, C3 = tau_constants_unbounded(w_bar, prior, n, beta, M2, Mbar2)
    return prior.rho1 / math.sqrt(C1 + C3 / C2), prior.rho2 / math.sqrt(C2)


def sample(spec, rng: np.random.Generator, size: int | None = None):
    """Draw weights from a :class:`PriorSpec` or :class:`CandidateSpec`.

    With ``size=None`` a single :class:`WeightVector` is returned; otherwise a
    ``(size, d)`` array of flat weights.
    """
    if isinstance(spec, PriorSpec):
        shape, mean = spec.shape, np.zeros(spec.shape.d)
    elif isinstance(spec, CandidateSpec):
        shape, mean = spec.shape, spec.center.flatten()
    else:
        raise TypeError(f"cannot sample from {type(spec).__name__}")
    scale = spec.scale_vector()
    m = 1 if size is None else int(size)
    draws = mean + scale * rng.standard_normal((m, shape.d))
    if size is None:
        return WeightVector.from_flat(shape, draws[0])
    return draws
