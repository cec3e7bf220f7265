"""Independent reference implementations used by the tests.

Nothing here imports the numerical code under test: forward passes are
scalar loops, the KL is coordinatewise, and posteriors in two dimensions are
integrated on tensor grids.  Constants marked FROZEN were computed once with
mpmath at 30+ digits and pasted in.
"""

from __future__ import annotations

import math

import numpy as np

# FROZEN (mpmath, 30 digits)
REM_BOUNDED_EXAMPLE = 0.248648720862658408797939275498    # (2 + 9 ln 201) / 200
REM_UNBOUNDED_EXAMPLE = 0.425360846515713350579577844022  # (2 + 18 ln 101) / 200
WORSTCASE_EXAMPLE = 0.381934976696703118140815319564      # 0.09 ln(3 + 600/9)
SOBOLEV_WIDTH_RAW = 70.7106781186547524400844362105       # sqrt(5000)
BARRON_WIDTH_RAW = 19.1005914973576741941746022371        # (3e-4)^(-1/2.75)
SIGMA_GAUSS_1000 = 1.77245386038916503141980330813        # direct sum j = 1..1099
SIGMA_GAUSS_TABLE = {                                     # direct sum j = 1..inf
    -5.0: 1.07854217819243311588538373093e-08,
    -1.0: 0.103791597120955355269384652373,
    0.0: 0.532673539601308753509479473013,
    0.5: 0.886226920710933511588265829276,
    2.3: 1.71912344122700442755856715229,
    3.0: 1.76435875977862060011120662096,
    7.77: 1.77245385209407749576211152931,
}
# risk_bound_sigmoid at a=1, r=1, D0=2, D1=71, beta=1, n=1e4, E=6
SIGMOID_APPROX_PART = 0.511843372792477858006292727051
SIGMOID_ESTIMATION_PART = 0.320999597458482765430302559875
# g(n) at n=500, beta=0.5, a=1.5, B1=2, B2=1.5, M2^2=2/3, mu=1, Msigma=1, d=9, C_PB=1.2
G_SLOWLY_VARYING_EXAMPLE = 295.690391393934658420566772536
# barron_rate_bound at n=1e4, beta=1, D0=3, s=2, B1=B2=1, M2^2=0.5, Mbar2=1.2, a=1, C_PB=1
BARRON_RATE_EXAMPLE = 0.163764280806055244547490655778


def logistic(u):
    return 1.0 / (1.0 + math.exp(-u))


def np_logistic(u):
    return 1.0 / (1.0 + np.exp(-np.asarray(u, dtype=float)))


SCALAR_ACTIVATIONS = {
    "logistic": logistic,
    "tanh": math.tanh,
    "relu": lambda u: max(0.0, u),
}


def forward_loop(w1, w2, x, sigma):
    """``f_w(x)`` by explicit loops over units."""
    D0, D1 = len(w1), len(w1[0])
    D2 = len(w2[0])
    hidden = []
    for j in range(D1):
        s = 0.0
        for k in range(D0):
            s += w1[k][j] * x[k]
        hidden.append(sigma(s))
    out = []
    for o in range(D2):
        s = 0.0
        for j in range(D1):
            s += w2[j][o] * hidden[j]
        out.append(s)
    return out


def flat_loop(w1, w2):
    """Column-major flattening written out by hand."""
    out = []
    for j in range(len(w1[0])):
        for k in range(len(w1)):
            out.append(w1[k][j])
    for o in range(len(w2[0])):
        for j in range(len(w2)):
            out.append(w2[j][o])
    return out


def kl_diag(mu, sd, prior_sd):
    """Generic diagonal-Gaussian KL, one coordinate at a time."""
    total = 0.0
    for m, s, p in zip(mu, sd, prior_sd):
        total += 0.5 * ((m * m + s * s) / (p * p) - 1.0 - math.log(s * s / (p * p)))
    return total


def maiorov_direct(u, variant="gaussian", j_max=None):
    """Maiorov sigmoid summed over every ``j`` from 1 to well past ``u``."""
    top = int(max(u, 0.0)) + 60 if j_max is None else j_max
    s = 0.0
    for j in range(1, top + 1):
        t = u - j
        if variant == "gaussian":
            s += math.exp(-0.5 * t * t) / math.sqrt(2.0)
        else:
            s += max(1.0 - abs(t), 0.0) / 3.0
    return s


# ---------------------------------------------------------------------------
# posterior quadrature on the d = 2 toy (D0 = D1 = D2 = 1)
# ---------------------------------------------------------------------------


def toy_grid(rho1, rho2, half_width=6.0, points=801):
    a = np.linspace(-half_width * rho1, half_width * rho1, points)
    b = np.linspace(-half_width * rho2, half_width * rho2, points)
    A, B = np.meshgrid(a, b, indexing="ij")
    return a, b, A, B


def toy_posterior(log_lik, rho1, rho2, points=801):
    """Normalized posterior weights on a grid for weights ``(a, b)``.

    ``log_lik(A, B)`` returns the log-likelihood on the grid; the prior is
    ``N(0, rho1^2) x N(0, rho2^2)``.
    """
    a, b, A, B = toy_grid(rho1, rho2, points=points)
    logp = log_lik(A, B) - 0.5 * (A / rho1) ** 2 - 0.5 * (B / rho2) ** 2
    p = np.exp(logp - logp.max())
    p /= p.sum()
    return a, b, A, B, p


def relu_toy_loglik(x, y, beta):
    """Fixed-design squared loss for ``f(x) = b * relu(a * x)`` on data ``(x, y)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)

    def ll(A, B):
        out = np.zeros_like(A)
        for xi, yi in zip(x, y):
            out -= (yi - B * np.maximum(A * xi, 0.0)) ** 2
        return out / beta

    return ll


def density_toy_loglik(x, beta, quad_x, quad_w, act):
    """Density loss ``||g||^2 - 2 g(x_i)`` for ``g = b * act(a * x)``."""
    x = np.asarray(x, dtype=float)

    def ll(A, B):
        sq = np.zeros_like(A)
        for qx, qw in zip(quad_x, quad_w):
            sq += qw * (B * act(A * qx)) ** 2
        out = -len(x) * sq
        for xi in x:
            out += 2.0 * B * act(A * xi)
        return out / beta

    return ll


def weighted_ks(samples, grid, weights):
    """KS distance between an empirical sample and a discrete distribution on a grid."""
    samples = np.sort(np.asarray(samples))
    cdf_grid = np.cumsum(weights)
    emp = np.searchsorted(samples, grid, side="right") / len(samples)
    return float(np.max(np.abs(emp - cdf_grid)))
