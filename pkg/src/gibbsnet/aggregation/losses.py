"""Per-observation losses ``Q(z, f_w)`` that define the Gibbs posteriors."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import expit

from ..network import Activation, NetworkShape, backprop, forward_with_cache


class LossKind(enum.Enum):
    FIXED_DESIGN_SQ = "fixed-design-sq"
    RANDOM_DESIGN_SQ = "random-design-sq"
    DENSITY = "density"
    PHI_RISK = "phi-risk"

    @classmethod
    def from_tag(cls, tag) -> "LossKind":
        if isinstance(tag, LossKind):
            return tag
        return cls(str(tag).strip().lower().replace("_", "-"))

    @property
    def iid(self) -> bool:
        return self is not LossKind.FIXED_DESIGN_SQ


def logistic_phi(u):
    """``log(1 + e^u)``, computed stably."""
    return np.logaddexp(0.0, u)


def logistic_phi_prime(u):
    return expit(u)


@dataclass(frozen=True)
class LossModel:
    """Which ``Q`` to use, plus what it needs beyond the data.

    ``quadrature`` is ``(points, weights)`` representing ``mu`` and is only
    used by the density loss, whose ``Q(x, g) = ||g||^2 - 2 g(x)``.
    ``phi`` and ``phi_prime`` define ``Q((x, y), g) = phi(-y g(x))``.
    """

    kind: LossKind = LossKind.FIXED_DESIGN_SQ
    phi: Callable = logistic_phi
    phi_prime: Callable = logistic_phi_prime
    quadrature: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", LossKind.from_tag(self.kind))
        if self.kind is LossKind.DENSITY and self.quadrature is None:
            raise ValueError("density loss needs a quadrature for ||f_w||^2")

    def q(self, outputs: np.ndarray, y: np.ndarray | None, sq_norm=None) -> np.ndarray:
        """Per-observation losses ``(S, n)`` from network outputs ``(S, n, D2)``."""
        if self.kind in (LossKind.FIXED_DESIGN_SQ, LossKind.RANDOM_DESIGN_SQ):
            r = y[None] - outputs
            return np.einsum("sno,sno->sn", r, r)
        if self.kind is LossKind.DENSITY:
            return sq_norm[:, None] - 2.0 * outputs[..., 0]
        return self.phi(-y[None, :, 0] * outputs[..., 0])


class NumericError(ArithmeticError):
    """Raised when a loss evaluation produces a non-finite value."""

    def __init__(self, message, weights=None):
        super().__init__(message)
        self.weights = weights


class Energy:
    """``(1/beta) sum_i Q(Z_i, f_w)`` for a fixed data set, vectorized over weights.

    Parameters
    ----------
    X : ndarray (n, D0)
        Design with intercept column.
    y : ndarray (n, D2) or None
        Responses (regression), labels in {-1, +1} (classification), or
        None (density).
    """

    def __init__(self, loss: LossModel, shape: NetworkShape, activation, X, y, beta):
        self.loss = loss
        self.shape = shape
        self.activation = Activation.from_tag(activation)
        self.X = np.asarray(X, dtype=np.float64)
        self.y = None if y is None else np.asarray(y, dtype=np.float64).reshape(len(self.X), -1)
        self.beta = float(beta)
        self.n = len(self.X)
        if loss.kind is LossKind.DENSITY:
            pts, wts = loss.quadrature
            self._qpts = np.asarray(pts, dtype=np.float64)
            self._qwts = np.asarray(wts, dtype=np.float64)

    def _check(self, value, flat):
        bad = ~np.isfinite(value)
        if np.any(bad):
            w = np.atleast_2d(flat)[np.argmax(bad)]
            raise NumericError(f"non-finite loss at weights {w.tolist()}", w)

    def __call__(self, flat: np.ndarray) -> np.ndarray:
        flat = np.atleast_2d(flat)
        if self.n == 0:
            return np.zeros(len(flat))
        out, _ = forward_with_cache(self.shape, flat, self.X, self.activation)
        sq = None
        if self.loss.kind is LossKind.DENSITY:
            fq, _ = forward_with_cache(self.shape, flat, self._qpts, self.activation)
            sq = np.einsum("sn,n->s", fq[..., 0] ** 2, self._qwts)
        value = self.loss.q(out, self.y, sq).sum(axis=1) / self.beta
        self._check(value, flat)
        return value

    def value_and_grad(self, flat: np.ndarray):
        flat = np.atleast_2d(flat)
        if self.n == 0:
            return np.zeros(len(flat)), np.zeros_like(flat)
        out, cache = forward_with_cache(self.shape, flat, self.X, self.activation)
        kind = self.loss.kind
        if kind is LossKind.DENSITY:
            fq, qcache = forward_with_cache(self.shape, flat, self._qpts, self.activation)
            sq = np.einsum("sn,n->s", fq[..., 0] ** 2, self._qwts)
            value = (self.n * sq - 2.0 * out[..., 0].sum(axis=1)) / self.beta
            up_q = (2.0 * self.n / self.beta) * fq * self._qwts[None, :, None]
            grad = backprop(self.shape, qcache, up_q)
            grad = grad + backprop(self.shape, cache, np.full_like(out, -2.0 / self.beta))
        elif kind is LossKind.PHI_RISK:
            m = -self.y[None] * out
            value = self.loss.phi(m[..., 0]).sum(axis=1) / self.beta
            up = -self.y[None] * self.loss.phi_prime(m) / self.beta
            grad = backprop(self.shape, cache, up)
        else:
            r = out - self.y[None]
            value = np.einsum("sno,sno->s", r, r) / self.beta
            grad = backprop(self.shape, cache, 2.0 * r / self.beta)
        self._check(value, flat)
        return value, grad
