"""One-hidden-layer networks ``f_w(x) = w2^T sigma(w1^T x)``.

Inputs carry the intercept as their first coordinate, so ``D0`` counts it.
Weights are stored as the pair ``(w1, w2)`` with ``w1`` of shape
``(D0, D1)`` and ``w2`` of shape ``(D1, D2)``.  The flat layout used by the
samplers and the CSV draw files is ``w1`` in column-major order followed by
``w2`` in column-major order.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

# Maiorov series: terms more than this many integers away from u are dropped.
MAIOROV_WINDOW = 12


class DimensionError(ValueError):
    """Raised when array shapes disagree with a :class:`NetworkShape`."""


@dataclass(frozen=True)
class NetworkShape:
    """Layer widths ``(D0, D1, D2)``; ``D0`` includes the intercept."""

    D0: int
    D1: int
    D2: int = 1

    def __post_init__(self):
        for name in ("D0", "D1", "D2"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise DimensionError(f"{name} must be a positive integer, got {value!r}")
            object.__setattr__(self, name, int(value))

    @property
    def d(self) -> int:
        """Total number of weights."""
        return self.D0 * self.D1 + self.D1 * self.D2

    @property
    def n_hidden_weights(self) -> int:
        return self.D0 * self.D1

    @property
    def n_output_weights(self) -> int:
        return self.D1 * self.D2


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class WeightVector:
    """Network weights ``(w1, w2)``.

    Use :meth:`flatten` / :meth:`from_flat` to move between the matrix pair
    and the fixed flat layout.
    """

    w1: np.ndarray
    w2: np.ndarray

    def __post_init__(self):
        w1 = _frozen(self.w1)
        w2 = _frozen(self.w2)
        if w1.ndim != 2 or w2.ndim != 2:
            raise DimensionError("w1 and w2 must be 2-d arrays")
        if w1.shape[1] != w2.shape[0]:
            raise DimensionError(
                f"hidden widths disagree: w1 is {w1.shape}, w2 is {w2.shape}"
            )
        object.__setattr__(self, "w1", w1)
        object.__setattr__(self, "w2", w2)

    @property
    def shape(self) -> NetworkShape:
        return NetworkShape(self.w1.shape[0], self.w1.shape[1], self.w2.shape[1])

    @classmethod
    def zeros(cls, shape: NetworkShape) -> "WeightVector":
        return cls(np.zeros((shape.D0, shape.D1)), np.zeros((shape.D1, shape.D2)))

    @classmethod
    def from_flat(cls, shape: NetworkShape, flat) -> "WeightVector":
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != (shape.d,):
            raise DimensionError(f"expected {shape.d} weights, got shape {flat.shape}")
        k = shape.n_hidden_weights
        w1 = flat[:k].reshape((shape.D0, shape.D1), order="F")
        w2 = flat[k:].reshape((shape.D1, shape.D2), order="F")
        return cls(w1, w2)

    def flatten(self) -> np.ndarray:
        return np.concatenate([self.w1.ravel(order="F"), self.w2.ravel(order="F")])

    def check_shape(self, shape: NetworkShape) -> None:
        if self.shape != shape:
            raise DimensionError(f"weights have shape {self.shape}, expected {shape}")

    def __eq__(self, other):
        if not isinstance(other, WeightVector):
            return NotImplemented
        return np.array_equal(self.w1, other.w1) and np.array_equal(self.w2, other.w2)

    __hash__ = None


def split_flat(shape: NetworkShape, flat: np.ndarray):
    """Split a stack of flat weight vectors ``(..., d)`` into ``(W1, W2)``.

    Returns arrays of shape ``(..., D0, D1)`` and ``(..., D1, D2)``.
    """
    flat = np.asarray(flat, dtype=np.float64)
    if flat.shape[-1] != shape.d:
        raise DimensionError(f"expected trailing dimension {shape.d}, got {flat.shape}")
    lead = flat.shape[:-1]
    k = shape.n_hidden_weights
    W1 = flat[..., :k].reshape(lead + (shape.D1, shape.D0)).swapaxes(-1, -2)
    W2 = flat[..., k:].reshape(lead + (shape.D2, shape.D1)).swapaxes(-1, -2)
    return W1, W2


def join_flat(W1: np.ndarray, W2: np.ndarray) -> np.ndarray:
    """Inverse of :func:`split_flat`."""
    lead = W1.shape[:-2]
    a = W1.swapaxes(-1, -2).reshape(lead + (-1,))
    b = W2.swapaxes(-1, -2).reshape(lead + (-1,))
    return np.concatenate([a, b], axis=-1)


# ---------------------------------------------------------------------------
# activations
# ---------------------------------------------------------------------------

_SQRT2 = math.sqrt(2.0)


def _phi_gaussian(t):
    return np.exp(-0.5 * t * t) / _SQRT2


def _dphi_gaussian(t):
    return -t * np.exp(-0.5 * t * t) / _SQRT2


def _phi_triangle(t):
    return np.maximum(1.0 - np.abs(t), 0.0) / 3.0


def _dphi_triangle(t):
    return np.where(np.abs(t) < 1.0, -np.sign(t) / 3.0, 0.0)


_KERNELS = {
    "gaussian": (_phi_gaussian, _dphi_gaussian),
    "triangle": (_phi_triangle, _dphi_triangle),
}


def maiorov_kernel(u, variant: str = "gaussian"):
    """The bump ``phi`` whose integer translates build the Maiorov sigmoid."""
    return _KERNELS[variant][0](np.asarray(u, dtype=np.float64))


def _maiorov_sum(u, variant, window, deriv=False):
    u = np.asarray(u, dtype=np.float64)
    fn = _KERNELS[variant][1 if deriv else 0]
    c = np.ceil(u)[..., None]
    j = c + np.arange(-window, window + 1, dtype=np.float64)
    t = u[..., None] - j
    terms = np.where(j >= 1.0, fn(t), 0.0)
    return terms.sum(axis=-1)


def maiorov_sigma(u, variant: str = "gaussian", window: int = MAIOROV_WINDOW):
    """Maiorov sigmoid ``sum_{j>=1} phi(u - j)``.

    Parameters
    ----------
    u : float or array_like
    variant : {"gaussian", "triangle"}
        ``phi(t) = exp(-t^2/2)/sqrt(2)`` or ``phi(t) = (1-|t|)_+/3``.
    window : int
        Only ``j`` within ``window`` of ``ceil(u)`` are summed.  The default
        keeps the Gaussian truncation error below 1e-31; the triangle kernel
        has unit support so any window >= 1 is exact.
    """
    if variant not in _KERNELS:
        raise ValueError(f"unknown Maiorov variant {variant!r}")
    out = _maiorov_sum(u, variant, window)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class _ActInfo:
    tag: str
    is_bounded: bool
    bound: float
    vanishes_at_zero: bool


class Activation(enum.Enum):
    """Supported activations; all are 1-Lipschitz.

    ``bound`` is the constant used in the bound formulas (``inf`` when the
    activation is unbounded).  For the Gaussian Maiorov sigmoid it is the
    round value 2.5 although the true supremum is ``sqrt(pi)`` up to 1e-8.
    """

    LOGISTIC = _ActInfo("logistic", True, 1.0, False)
    TANH = _ActInfo("tanh", True, 1.0, True)
    RELU = _ActInfo("relu", False, math.inf, True)
    MAIOROV_GAUSSIAN = _ActInfo("maiorov-gaussian", True, 2.5, False)
    MAIOROV_TRIANGLE = _ActInfo("maiorov-triangle", True, 1.0 / 3.0, False)

    @property
    def tag(self) -> str:
        return self.value.tag

    @property
    def is_bounded(self) -> bool:
        return self.value.is_bounded

    @property
    def bound(self) -> float:
        return self.value.bound

    @property
    def vanishes_at_zero(self) -> bool:
        return self.value.vanishes_at_zero

    @property
    def regime(self) -> str:
        """``"bounded"`` or ``"unbounded"``: which family of bounds applies."""
        return "bounded" if self.is_bounded else "unbounded"

    @classmethod
    def from_tag(cls, tag) -> "Activation":
        if isinstance(tag, Activation):
            return tag
        key = str(tag).strip().lower().replace("_", "-")
        for act in cls:
            if act.tag == key:
                return act
        raise ValueError(f"unknown activation {tag!r}; choose from {[a.tag for a in cls]}")

    def __call__(self, u):
        return activation_eval(self, u)

    def derivative(self, u):
        """Derivative of the activation; ReLU uses 0 at the kink."""
        u = np.asarray(u, dtype=np.float64)
        if self is Activation.LOGISTIC:
            s = expit(u)
            return s * (1.0 - s)
        if self is Activation.TANH:
            t = np.tanh(u)
            return 1.0 - t * t
        if self is Activation.RELU:
            return (u > 0.0).astype(np.float64)
        if self is Activation.MAIOROV_GAUSSIAN:
            return _maiorov_sum(u, "gaussian", MAIOROV_WINDOW, deriv=True)
        return _maiorov_sum(u, "triangle", MAIOROV_WINDOW, deriv=True)


def activation_eval(act: Activation, u):
    """Evaluate ``act`` at ``u`` (scalar or array)."""
    act = Activation.from_tag(act)
    u = np.asarray(u, dtype=np.float64)
    if act is Activation.LOGISTIC:
        out = expit(u)
    elif act is Activation.TANH:
        out = np.tanh(u)
    elif act is Activation.RELU:
        out = np.maximum(u, 0.0)
    elif act is Activation.MAIOROV_GAUSSIAN:
        out = _maiorov_sum(u, "gaussian", MAIOROV_WINDOW)
    else:
        out = _maiorov_sum(u, "triangle", MAIOROV_WINDOW)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# forward passes
# ---------------------------------------------------------------------------


def forward(w: WeightVector, x, act) -> np.ndarray:
    """Evaluate ``f_w`` at one input ``x`` of length ``D0`` (or a batch ``(N, D0)``)."""
    act = Activation.from_tag(act)
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != w.w1.shape[0]:
        raise DimensionError(f"input has {x.shape[-1]} coordinates, network expects {w.w1.shape[0]}")
    if x.ndim not in (1, 2):
        raise DimensionError("x must be a vector or a 2-d batch")
    hidden = activation_eval(act, x @ w.w1)
    return np.asarray(hidden @ w.w2)


def forward_batch(shape: NetworkShape, flat: np.ndarray, X: np.ndarray, act) -> np.ndarray:
    """Evaluate many networks on many inputs.

    Parameters
    ----------
    flat : ndarray, shape (S, d)
        Flat weight vectors.
    X : ndarray, shape (N, D0)

    Returns
    -------
    ndarray, shape (S, N, D2)
    """
    act = Activation.from_tag(act)
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != shape.D0:
        raise DimensionError(f"X must have shape (N, {shape.D0}), got {X.shape}")
    W1, W2 = split_flat(shape, np.atleast_2d(flat))
    # einsum without BLAS keeps results independent of thread settings
    hidden = activation_eval(act, np.einsum("nk,skh->snh", X, W1))
    return np.einsum("snh,sho->sno", np.atleast_3d(hidden), W2)


def forward_with_cache(shape: NetworkShape, flat: np.ndarray, X: np.ndarray, act):
    """Like :func:`forward_batch` but also returns what :func:`backprop` needs."""
    act = Activation.from_tag(act)
    W1, W2 = split_flat(shape, np.atleast_2d(flat))
    pre = np.einsum("nk,skh->snh", X, W1)
    hidden = np.atleast_3d(activation_eval(act, pre))
    out = np.einsum("snh,sho->sno", hidden, W2)
    return out, (X, W2, pre, hidden, act)


def backprop(shape: NetworkShape, cache, upstream: np.ndarray) -> np.ndarray:
    """Gradient of ``sum(upstream * f)`` with respect to the flat weights.

    ``upstream`` has the shape ``(S, N, D2)`` of the forward output.
    """
    X, W2, pre, hidden, act = cache
    gW2 = np.einsum("snh,sno->sho", hidden, upstream)
    dh = np.einsum("sno,sho->snh", upstream, W2) * act.derivative(pre)
    gW1 = np.einsum("nk,snh->skh", X, dh)
    return join_flat(gW1, gW2)


def add_intercept(X) -> np.ndarray:
    """Prepend the constant-1 coordinate to raw covariates ``(N, p)``."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    return np.hstack([np.ones((X.shape[0], 1)), X])
