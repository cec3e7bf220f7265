"""Closed-form risk and remainder bounds for aggregated shallow networks.

Every bound returns a :class:`BoundReport` carrying the value, the constants
that entered it, and an echo of the inputs, so a reported number can be
recomputed by hand.  Logarithms are natural throughout.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .gaussian import PriorSpec, tau_constants_unbounded
from .network import Activation, NetworkShape, WeightVector


# ---------------------------------------------------------------------------
# design moments
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DesignMoments:
    """Moments of the design measure ``mu``.

    Attributes
    ----------
    M2 : float
        ``sqrt(D0^{-1} int ||x||^2 dmu)``.
    Mbar2 : float
        Spectral norm of the second-moment matrix ``int x x^T dmu``.
    mu_mass : float
        Total mass ``mu(X)``.
    points, weights : ndarray
        The representation of ``mu``: atoms (rows, leading coordinate 1)
        and their positive masses.
    """

    M2: float
    Mbar2: float
    mu_mass: float
    points: np.ndarray
    weights: np.ndarray
    second_moment: np.ndarray

    @property
    def D0(self) -> int:
        return self.points.shape[1]


def compute_moments(design, weights=None, shape: NetworkShape | None = None) -> DesignMoments:
    """Moments of an empirical design (``weights=None``) or a quadrature rule.

    ``design`` is ``(N, D0)`` with a leading column of ones.  Without
    ``weights`` each point gets mass ``1/N``.
    """
    X = np.array(design, dtype=np.float64, ndmin=2)
    if X.size == 0 or X.shape[0] == 0:
        raise ValueError("design is empty")
    if shape is not None and X.shape[1] != shape.D0:
        raise ValueError(f"design has {X.shape[1]} columns, shape expects D0={shape.D0}")
    if not np.all(X[:, 0] == 1.0):
        raise ValueError("design points must carry the intercept 1 as first coordinate")
    if weights is None:
        w = np.full(X.shape[0], 1.0 / X.shape[0])
    else:
        w = np.asarray(weights, dtype=np.float64)
        if w.shape != (X.shape[0],) or np.any(w <= 0):
            raise ValueError("quadrature weights must be positive, one per point")
    S = np.einsum("n,ni,nj->ij", w, X, X)
    D0 = X.shape[1]
    M2 = math.sqrt(float(np.trace(S)) / D0)
    Mbar2 = float(np.linalg.eigvalsh(S)[-1])
    X.setflags(write=False)
    w.setflags(write=False)
    S.setflags(write=False)
    return DesignMoments(M2, Mbar2, float(w.sum()), X, w, S)


def uniform_grid_design(n_covariates: int, points_per_axis: int = 33, rule: str = "gauss"):
    """Tensor quadrature for the uniform law on ``[0, 1]^p`` (with intercept).

    ``rule="gauss"`` uses Gauss-Legendre nodes, ``rule="midpoint"`` an equally
    spaced midpoint rule.  Returns ``(points, weights)``.
    """
    if n_covariates == 0:
        return np.ones((1, 1)), np.ones(1)
    if rule == "gauss":
        nodes, w = np.polynomial.legendre.leggauss(points_per_axis)
        nodes, w = (nodes + 1.0) / 2.0, w / 2.0
    elif rule == "midpoint":
        nodes = (np.arange(points_per_axis) + 0.5) / points_per_axis
        w = np.full(points_per_axis, 1.0 / points_per_axis)
    else:
        raise ValueError(f"unknown quadrature rule {rule!r}")
    grids = np.meshgrid(*([nodes] * n_covariates), indexing="ij")
    wgrids = np.meshgrid(*([w] * n_covariates), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    wts = np.prod(np.stack([g.ravel() for g in wgrids], axis=1), axis=1)
    return np.hstack([np.ones((pts.shape[0], 1)), pts]), wts


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------


@dataclass
class BoundReport:
    """An evaluated bound with its constants and inputs."""

    name: str
    value: float
    intermediates: dict = field(default_factory=dict)
    inputs: dict = field(default_factory=dict)

    def __post_init__(self):
        self.value = float(self.value)
        if not math.isfinite(self.value) or self.value < 0:
            raise ArithmeticError(f"{self.name}: bound value {self.value} is not finite and >= 0")
        for k, v in self.intermediates.items():
            if not math.isfinite(float(v)):
                raise ArithmeticError(f"{self.name}: intermediate {k} = {v} is not finite")

    def columns(self) -> list[str]:
        """Column order: ``bound, value``, then inputs, then constants."""
        return (["bound", "value"]
                + [f"in.{k}" for k in self.inputs]
                + [f"c.{k}" for k in self.intermediates])

    def row(self) -> list:
        return ([self.name, repr(self.value)]
                + [_fmt(v) for v in self.inputs.values()]
                + [_fmt(v) for v in self.intermediates.values()])

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns())
        writer.writerow(self.row())
        return buf.getvalue()

    def to_text(self) -> str:
        lines = [f"{self.name} = {self.value:.10g}"]
        if self.inputs:
            lines.append("  inputs:")
            lines += [f"    {k} = {_fmt(v)}" for k, v in self.inputs.items()]
        if self.intermediates:
            lines.append("  constants:")
            lines += [f"    {k} = {_fmt(v)}" for k, v in self.intermediates.items()]
        return "\n".join(lines)


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _check_nb(n, beta):
    if n < 1:
        raise ValueError("n must be >= 1")
    if not beta > 0:
        raise ValueError("beta must be positive")


def _norms(w_bar: WeightVector):
    return float(np.sum(w_bar.w1**2)), float(np.sum(w_bar.w2**2))


def _regime(regime) -> str:
    if isinstance(regime, Activation):
        return regime.regime
    if regime not in ("bounded", "unbounded"):
        raise ValueError(f"regime must be 'bounded' or 'unbounded', got {regime!r}")
    return regime


# ---------------------------------------------------------------------------
# integral bounds for a Gaussian candidate centred at w_bar
# ---------------------------------------------------------------------------


def g2_bound(w_bar: WeightVector, tau1: float, moments: DesignMoments) -> float:
    """Upper bound on the hidden-block part ``E_p1 G2``: ``M2^2 ||w2||^2 D0 D1 tau1^2``."""
    s = w_bar.shape
    return moments.M2**2 * _norms(w_bar)[1] * s.D0 * s.D1 * tau1**2


def g1_bound(w_bar: WeightVector, tau1: float, tau2: float, moments: DesignMoments,
             regime, Msigma: float | None = None) -> float:
    """Upper bound on the output-block part ``E_p G1``.

    Bounded activations: ``Msigma^2 mu(X) D1 D2 tau2^2``.  Activations with
    ``sigma(0) = 0``: ``M2^2 D0 D1 D2 tau1^2 tau2^2 + Mbar2^2 D2 ||w1||^2 tau2^2``.
    """
    s = w_bar.shape
    if _regime(regime) == "bounded":
        if Msigma is None:
            raise ValueError("bounded regime needs Msigma")
        return Msigma**2 * moments.mu_mass * s.D1 * s.D2 * tau2**2
    return (moments.M2**2 * s.D0 * s.D1 * s.D2 * tau1**2 * tau2**2
            + moments.Mbar2**2 * s.D2 * _norms(w_bar)[0] * tau2**2)


def weighted_l2_bound(w_bar, tau1, tau2, moments, regime, Msigma=None) -> float:
    """Upper bound on ``E_p ||f_w - f_wbar||^2``: sum of :func:`g1_bound` and :func:`g2_bound`."""
    return g2_bound(w_bar, tau1, moments) + g1_bound(w_bar, tau1, tau2, moments, regime, Msigma)


# ---------------------------------------------------------------------------
# remainder bounds
# ---------------------------------------------------------------------------


def rem_bound_bounded(w_bar: WeightVector, prior: PriorSpec, n, beta,
                      moments: DesignMoments, Msigma: float) -> BoundReport:
    """Remainder bound for a bounded activation (``|sigma| <= Msigma``)."""
    _check_nb(n, beta)
    w_bar.check_shape(prior.shape)
    s = prior.shape
    d = s.d
    n1, n2 = _norms(w_bar)
    A1 = s.D0 * s.D1 * moments.M2**2 * n2
    A2 = s.D1 * s.D2 * moments.mu_mass * Msigma**2
    r1, r2 = prior.rho1**2, prior.rho2**2
    log_term = d * math.log1p(2.0 * n * (A1 * r1 + A2 * r2) / (d * beta))
    value = beta / (2.0 * n) * (n1 / r1 + n2 / r2 + log_term)
    return BoundReport(
        "rem_bound_bounded", value,
        {"A1": A1, "A2": A2, "d": d},
        {"n": n, "beta": beta, "rho1": prior.rho1, "rho2": prior.rho2,
         "M2": moments.M2, "mu_mass": moments.mu_mass, "Msigma": Msigma,
         "w1_norm_sq": n1, "w2_norm_sq": n2, "D0": s.D0, "D1": s.D1, "D2": s.D2},
    )


def rem_bound_unbounded(w_bar: WeightVector, prior: PriorSpec, n, beta,
                        moments: DesignMoments, *, width_in_a3: bool = False) -> BoundReport:
    """Remainder bound for an unbounded activation with ``sigma(0) = 0``.

    ``A3' = M2^2 D0 D2`` by default.  With ``width_in_a3=True`` the hidden
    width is kept in that constant (``M2^2 D0 D1 D2``), which is what the
    variance optimisation actually produces; the two agree when ``D1 = 1``.
    """
    _check_nb(n, beta)
    w_bar.check_shape(prior.shape)
    s = prior.shape
    d = s.d
    n1, n2 = _norms(w_bar)
    A1 = s.D0 * s.D1 * moments.M2**2 * n2
    A2p = moments.Mbar2**2 * n1 * s.D2
    A3p = moments.M2**2 * s.D0 * s.D2 * (s.D1 if width_in_a3 else 1)
    r1, r2 = prior.rho1**2, prior.rho2**2
    inner = n * (A1 * r1 + A2p * r2 + A3p * r1 * r2) / (d * beta)
    value = beta / (2.0 * n) * (n1 / r1 + n2 / r2 + 2.0 * d * math.log1p(inner))
    return BoundReport(
        "rem_bound_unbounded", value,
        {"A1": A1, "A2'": A2p, "A3'": A3p, "d": d},
        {"n": n, "beta": beta, "rho1": prior.rho1, "rho2": prior.rho2,
         "M2": moments.M2, "Mbar2": moments.Mbar2, "w1_norm_sq": n1, "w2_norm_sq": n2,
         "D0": s.D0, "D1": s.D1, "D2": s.D2, "width_in_a3": width_in_a3},
    )


def rem_bound(w_bar, prior, n, beta, moments, activation) -> BoundReport:
    """Dispatch to the bounded or unbounded remainder bound for ``activation``."""
    act = Activation.from_tag(activation)
    if act.is_bounded:
        return rem_bound_bounded(w_bar, prior, n, beta, moments, act.bound)
    if not act.vanishes_at_zero:
        raise ValueError(f"{act.tag}: unbounded activations must vanish at 0")
    return rem_bound_unbounded(w_bar, prior, n, beta, moments)


def rem3_objective(w_bar: WeightVector, prior: PriorSpec, n, beta, moments: DesignMoments,
                   tau1: float, tau2: float) -> float:
    """The unbounded-case objective in ``(tau1, tau2)`` before optimisation.

    ``(beta d / 2n) {C1' u1 + C2' u2 + C3' u1 u2 - 2 - log(u1 u2)}`` plus the
    centre penalties, with ``u_l = (tau_l / rho_l)^2``.
    """
    _check_nb(n, beta)
    C1, C2, C3 = tau_constants_unbounded(w_bar, prior, n, beta, moments.M2, moments.Mbar2)
    u1 = (tau1 / prior.rho1) ** 2
    u2 = (tau2 / prior.rho2) ** 2
    n1, n2 = _norms(w_bar)
    d = prior.shape.d
    bracket = C1 * u1 + C2 * u2 + C3 * u1 * u2 - 2.0 - math.log(u1 * u2)
    return beta * d / (2.0 * n) * bracket + beta / (2.0 * n) * (n1 / prior.rho1**2 + n2 / prior.rho2**2)


def e_constant(B1, B2, moments: DesignMoments, Msigma, shape: NetworkShape, regime) -> float:
    """Constant ``E`` of the oracle inequality.

    Bounded: ``3 B2^2 (B1^2 M2^2 + mu(X) Msigma^2)``;
    unbounded: ``3 B1^2 B2^2 (M2^2 + Mbar2^2 / D1)``.
    """
    if _regime(regime) == "bounded":
        return 3.0 * B2**2 * (B1**2 * moments.M2**2 + moments.mu_mass * Msigma**2)
    return 3.0 * B1**2 * B2**2 * (moments.M2**2 + moments.Mbar2**2 / shape.D1)


def estimation_term(n, beta, d, E) -> float:
    """Squared estimation error ``(beta d / n) log(3 + n E / (d beta))``.

    ``d`` may be an integer or a :class:`NetworkShape`.
    """
    _check_nb(n, beta)
    if isinstance(d, NetworkShape):
        d = d.d
    return beta * d / n * math.log(3.0 + n * E / (d * beta))


def worstcase_rem(B1, B2, n, beta, moments: DesignMoments, Msigma,
                  shape: NetworkShape, regime) -> BoundReport:
    """Remainder bound uniform over ``||w1||_F <= B1, ||w2||_F <= B2``.

    Valid for the prior scales returned by :func:`~gibbsnet.gaussian.select_rho`.
    """
    if not (B1 > 0 and B2 > 0):
        raise ValueError("weight radii must be positive")
    regime = _regime(regime)
    E = e_constant(B1, B2, moments, Msigma, shape, regime)
    value = estimation_term(n, beta, shape.d, E)
    return BoundReport(
        "worstcase_rem", value, {"E": E, "d": shape.d},
        {"regime": regime, "B1": B1, "B2": B2, "n": n, "beta": beta, "M2": moments.M2,
         "Mbar2": moments.Mbar2, "mu_mass": moments.mu_mass,
         "Msigma": Msigma if regime == "bounded" else float("nan"),
         "D0": shape.D0, "D1": shape.D1, "D2": shape.D2},
    )


# ---------------------------------------------------------------------------
# width selection and risk bounds over smoothness classes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SmoothnessSpec:
    """Smoothness assumptions for the rate bounds.

    ``approx_constant`` stands for the unspecified constant of the
    approximation theorem in use; ``C_PB`` for the PAC-Bayes constant.
    """

    r: float
    s: float | None = None
    r_bar: float | None = None
    approx_constant: float = 1.0
    C_PB: float = 1.0

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError("r must be positive")
        if self.s is not None and self.s < 0.5:
            raise ValueError("Barron order s must be >= 1/2")
        if self.r_bar is not None and not self.r_bar < self.r:
            raise ValueError("r_bar must be below r")
        if self.C_PB < 1:
            raise ValueError("C_PB must be >= 1")


def _round_width(x: float) -> int:
    return max(1, int(math.floor(x + 0.5)))


def select_D1_sobolev(n, beta, D0, r) -> int:
    """Hidden width ``(beta D0 / n)^{-D0/(2r+D0)}``, rounded, at least 1."""
    _check_nb(n, beta)
    if n <= beta * D0:
        return 1
    return _round_width((beta * D0 / n) ** (-D0 / (2.0 * r + D0)))


def select_D1_barron(n, beta, D0, K) -> int:
    """Hidden width ``(beta D0 / n)^{-1/(2K+1)}``, rounded, at least 1."""
    _check_nb(n, beta)
    if n <= beta * D0:
        return 1
    return _round_width((beta * D0 / n) ** (-1.0 / (2.0 * K + 1.0)))


def risk_bound_sigmoid(n, beta, D0, D1, r, E, approx_constant=1.0, C_PB=1.0, D2=1) -> BoundReport:
    """Risk bound for a Maiorov-type sigmoid at a given width ``D1``.

    ``C_PB * (2 a^2 log^2(D1) / D1^{2r/D0} + est)`` where ``a`` is
    ``approx_constant``.  For ``D2 = 1`` the estimation part is
    ``4 beta D1 D0 / n * log(3 + nE/(d beta))`` (``d <= 2 D1 D0``); otherwise
    the exact ``2 beta d / n`` prefactor is used.
    """
    _check_nb(n, beta)
    d = D1 * (D0 + D2)
    approx = 2.0 * approx_constant**2 * math.log(D1) ** 2 / D1 ** (2.0 * r / D0)
    prefactor = 4.0 * beta * D1 * D0 / n if D2 == 1 else 2.0 * beta * d / n
    est = prefactor * math.log(3.0 + n * E / (d * beta))
    return BoundReport(
        "risk_bound_sigmoid", C_PB * (approx + est),
        {"approximation": approx, "estimation": est, "d": d, "E": E},
        {"n": n, "beta": beta, "D0": D0, "D1": D1, "D2": D2, "r": r,
         "approx_constant": approx_constant, "C_PB": C_PB, "log_argument": "D1"},
    )


def g_slowly_varying(n, beta, approx_constant, B1, B2, moments: DesignMoments, Msigma, d, C_PB=1.0) -> float:
    """Logarithmic factor of the Sobolev rate for sigmoid activations."""
    _check_nb(n, beta)
    inner = 3.0 + 3.0 * n * B2**2 * (B1**2 * moments.M2**2 + moments.mu_mass * Msigma**2) / (d * beta)
    return 2.0 * C_PB * (approx_constant**2 * math.log(n / beta) ** 2 + 2.0 * math.log(inner))


def sobolev_rate_bound(n, beta, D0, smooth: SmoothnessSpec, B1, B2, moments: DesignMoments,
                       Msigma, D2=1) -> BoundReport:
    """``g(n) (beta D0 / n)^{2r/(2r+D0)}`` at the width from :func:`select_D1_sobolev`."""
    D1 = select_D1_sobolev(n, beta, D0, smooth.r)
    d = D1 * (D0 + D2)
    g = g_slowly_varying(n, beta, smooth.approx_constant, B1, B2, moments, Msigma, d, smooth.C_PB)
    exponent = 2.0 * smooth.r / (2.0 * smooth.r + D0)
    return BoundReport(
        "sobolev_rate_bound", g * (beta * D0 / n) ** exponent,
        {"g(n)": g, "D1": D1, "d": d, "exponent": exponent},
        {"n": n, "beta": beta, "D0": D0, "r": smooth.r, "approx_constant": smooth.approx_constant,
         "C_PB": smooth.C_PB, "B1": B1, "B2": B2, "Msigma": Msigma, "log_argument": "n/beta"},
    )


def barron_exponents(s, D0) -> tuple[float, float]:
    """Approximation exponents ``(K, m)`` of ReLU networks on the Barron space of order ``s``."""
    if s < 0.5:
        raise ValueError("Barron order s must be >= 1/2")
    crit = 3 * D0 + 4
    if 2 * s < crit:
        return 0.5 + (2.0 * s - 1.0) / (2.0 * (D0 + 1)), 0.0
    if 2 * s > crit:
        return 2.0, 1.0
    return 2.0, 2.5


def g_bar(n, beta, approx_constant, m, B1, B2, moments: DesignMoments, d, C_PB=1.0) -> float:
    """Logarithmic factor of the Barron-space rate for ReLU."""
    _check_nb(n, beta)
    inner = 3.0 + 3.0 * n * B1**2 * B2**2 * (moments.M2**2 + moments.Mbar2**2) / (d * beta)
    return (2.0 * C_PB * approx_constant**2 * math.log(n / beta) ** (2.0 * m)
            + 4.0 * C_PB * math.log(inner))


def barron_rate_bound(n, beta, D0, s, B1, B2, moments: DesignMoments, approx_constant=1.0,
                      C_PB=1.0, D2=1) -> BoundReport:
    """``gbar(n) (beta D0 / n)^{2K/(2K+1)}`` at the width from :func:`select_D1_barron`."""
    K, m = barron_exponents(s, D0)
    D1 = select_D1_barron(n, beta, D0, K)
    d = D1 * (D0 + D2)
    gb = g_bar(n, beta, approx_constant, m, B1, B2, moments, d, C_PB)
    exponent = 2.0 * K / (2.0 * K + 1.0)
    return BoundReport(
        "barron_rate_bound", gb * (beta * D0 / n) ** exponent,
        {"K": K, "m": m, "g_bar(n)": gb, "D1": D1, "d": d, "exponent": exponent},
        {"n": n, "beta": beta, "D0": D0, "s": s, "B1": B1, "B2": B2,
         "approx_constant": approx_constant, "C_PB": C_PB},
    )


def sobolev_relu_exponent(r, r_bar, D0) -> float:
    """Rate exponent ``2 r_bar / (2 r_bar + D0 + 1)`` for ReLU over Sobolev balls.

    Requires ``D0/2 <= r_bar < r``.  When ``r >= 2 D0 + 2`` the exponent is
    the constant 4/5.
    """
    if not (D0 / 2.0 <= r_bar < r):
        raise ValueError(f"need D0/2 <= r_bar < r, got r_bar={r_bar}, r={r}, D0={D0}")
    if r >= 2 * D0 + 2:
        return 0.8
    return 2.0 * r_bar / (2.0 * r_bar + D0 + 1.0)
