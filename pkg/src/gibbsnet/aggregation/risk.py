"""Risk of a fitted predictor against a known target."""

from __future__ import annotations

import numpy as np

from .losses import logistic_phi


def _as_design_fn(pred):
    if hasattr(pred, "predict_design"):
        return pred.predict_design
    if callable(pred):
        return pred
    raise TypeError("prediction must be an AggregatePredictor or a callable on design points")


def _column(values, n):
    return np.asarray(values, dtype=np.float64).reshape(n, -1)


def risk_eval(pred, f_true, metric, kind: str = "l2", phi=logistic_phi) -> float:
    """Loss of ``pred`` relative to ``f_true`` under the metric's measure.

    Parameters
    ----------
    pred, f_true : callables on design points ``(N, D0)``
        ``pred`` may also be an :class:`AggregatePredictor`.
    metric : L2Metric or DesignMoments
        Supplies the atoms and masses of ``mu``.
    kind : {"l2", "phi"}
        ``"l2"`` gives ``||pred - f_true||^2``.  ``"phi"`` gives the excess
        ``phi``-risk for labels with ``P(Y = 1 | x) = 1/(1 + exp(-f_true(x)))``,
        integrating the label exactly and ``x`` over ``mu``.
    """
    moments = getattr(metric, "moments", metric)
    X, w = moments.points, moments.weights
    n = len(X)
    g = _column(_as_design_fn(pred)(X), n)
    f = _column(f_true(X), n)
    if kind == "l2":
        return float(np.einsum("no,no,n->", g - f, g - f, w))
    if kind == "phi":
        eta = 1.0 / (1.0 + np.exp(-f[:, 0]))

        def risk(h):
            return eta * phi(-h) + (1.0 - eta) * phi(h)

        return float(np.sum(w * (risk(g[:, 0]) - risk(f[:, 0]))))
    raise ValueError(f"unknown risk kind {kind!r}")
