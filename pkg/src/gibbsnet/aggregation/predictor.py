"""Aggregate predictors built from posterior draws, and their CSV format.

Draw files are plain CSV::

    # gibbsnet-draws v1
    # shape=D0,D1,D2
    # activation=<tag>
    # prefixes=<number of averaged posteriors>
    prefix,w0,w1,...,w{d-1}
    <m>,<weight>,...

Each row is one draw in the flat layout of
:meth:`gibbsnet.network.WeightVector.flatten`, tagged with the prefix length
``m`` of the posterior it came from.  A prefix with no rows is the prior,
whose predictive mean is zero.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from ..network import Activation, NetworkShape, forward_batch

_MAGIC = "# gibbsnet-draws v1"


@dataclass
class AggregatePredictor:
    """Equal-weight average of networks over stored posterior draws.

    ``prefix_draws[m]`` holds draws of the posterior built on the first ``m``
    observations (``None`` for the prior).  The prediction averages the
    per-prefix posterior means; with a single entry this is the exponentially
    weighted aggregate, with ``n + 1`` entries the mirror average.
    """

    shape: NetworkShape
    activation: Activation
    prefix_draws: list = field(default_factory=list)
    prefix_labels: list | None = None

    def __post_init__(self):
        self.activation = Activation.from_tag(self.activation)
        if not self.prefix_draws:
            raise ValueError("predictor needs at least one draw set")
        if self.prefix_labels is None:
            self.prefix_labels = list(range(len(self.prefix_draws)))

    @property
    def n_prefixes(self) -> int:
        return len(self.prefix_draws)

    def prefix_predictions(self, Xd: np.ndarray) -> np.ndarray:
        """Posterior-mean predictions per prefix, shape ``(n_prefixes, N, D2)``."""
        Xd = np.asarray(Xd, dtype=np.float64)
        out = np.zeros((self.n_prefixes, Xd.shape[0], self.shape.D2))
        for m, draws in enumerate(self.prefix_draws):
            if draws is not None and len(draws):
                out[m] = forward_batch(self.shape, draws, Xd, self.activation).mean(axis=0)
        return out

    def predict_design(self, Xd: np.ndarray) -> np.ndarray:
        """Aggregate prediction ``(N, D2)`` on design points with intercept."""
        return self.prefix_predictions(Xd).mean(axis=0)

    __call__ = predict_design

    def to_csv(self, path) -> None:
        d = self.shape.d
        with open(path, "w", newline="") as fh:
            fh.write(f"{_MAGIC}\n")
            fh.write(f"# shape={self.shape.D0},{self.shape.D1},{self.shape.D2}\n")
            fh.write(f"# activation={self.activation.tag}\n")
            fh.write(f"# prefixes={self.n_prefixes}\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["prefix"] + [f"w{i}" for i in range(d)])
            for m, draws in enumerate(self.prefix_draws):
                if draws is None:
                    continue
                for row in draws:
                    writer.writerow([m] + [repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path) -> "AggregatePredictor":
        meta = {}
        with open(path, newline="") as fh:
            first = fh.readline().rstrip("\n")
            if first != _MAGIC:
                raise ValueError(f"{path}: not a gibbsnet draw file")
            line = fh.readline()
            while line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                meta[key] = value
                line = fh.readline()
            rows = list(csv.reader(fh))
        shape = NetworkShape(*[int(v) for v in meta["shape"].split(",")])
        n_prefixes = int(meta["prefixes"])
        header = next(csv.reader([line]))
        if len(header) != shape.d + 1:
            raise ValueError(f"{path}: header has {len(header) - 1} weights, shape needs {shape.d}")
        buckets: list = [[] for _ in range(n_prefixes)]
        for row in rows:
            buckets[int(row[0])].append([float(v) for v in row[1:]])
        draws = [np.array(b) if b else None for b in buckets]
        return cls(shape, Activation.from_tag(meta["activation"]), draws)
