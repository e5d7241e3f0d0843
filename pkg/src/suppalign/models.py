"""The three trainees: feature extractor f, classifier c, discriminator r.

f maps inputs to an m-dimensional latent, c maps latents to class
probabilities on the K-simplex, and r scores a conditioning embedding with a
probability of being a source sample. For conditional alignment the
embedding is the flattened outer product of the latent and the predicted
class probabilities, so r's input width is m*K; marginal baselines feed the
latent directly and r's input width is m.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

CHECKPOINT_FORMAT = "suppalign-checkpoint"
CHECKPOINT_VERSION = 1

PROB_CLAMP = 1e-6  # discriminator output clamp so log-loss stays finite


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    a = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-a, a, size=(fan_in, fan_out))


@dataclass
class Mlp:
    """Dense layers with leaky-ReLU between them; the last layer is linear."""

    weights: list[Tensor]
    biases: list[Tensor]
    slope: float

    @staticmethod
    def init(rng: np.random.Generator, dims: list[int], slope: float) -> "Mlp":
        weights, biases = [], []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            weights.append(Tensor(_glorot(rng, fan_in, fan_out), requires_grad=True))
            biases.append(Tensor(np.zeros((1, fan_out)), requires_grad=True))
        return Mlp(weights, biases, slope)

    def forward(self, x: Tensor) -> Tensor:
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = ad.add_rowvec(ad.matmul(h, w), b)
            if i != last:
                h = ad.leaky_relu(h, self.slope)
        return h

    def params(self) -> list[Tensor]:
        return [*self.weights, *self.biases]


@dataclass
class ModelBundle:
    """Parameters of f, c, r plus the dimensions they were built for."""

    f: Mlp
    c: Mlp
    r: Mlp
    input_dim: int
    feature_dim: int
    n_classes: int
    conditional: bool
    slope: float = 0.1

    @staticmethod
    def init(
        rng: np.random.Generator,
        input_dim: int,
        n_classes: int,
        feature_dim: int = 8,
        hidden: int = 64,
        disc_hidden: int = 64,
        slope: float = 0.1,
        conditional: bool = True,
    ) -> "ModelBundle":
        f = Mlp.init(rng, [input_dim, hidden, hidden, feature_dim], slope)
        c = Mlp.init(rng, [feature_dim, n_classes], slope)
        r_in = feature_dim * n_classes if conditional else feature_dim
        r = Mlp.init(rng, [r_in, disc_hidden, disc_hidden, 1], slope)
        return ModelBundle(f, c, r, input_dim, feature_dim, n_classes, conditional, slope)

    def fc_params(self) -> list[Tensor]:
        return [*self.f.params(), *self.c.params()]

    def r_params(self) -> list[Tensor]:
        return self.r.params()

    def all_params(self) -> list[Tensor]:
        return [*self.fc_params(), *self.r_params()]

    def zero_grads(self) -> None:
        ad.zero_grads(self.all_params())


def extract(bundle: ModelBundle, x: Tensor) -> Tensor:
    """Latent features f(x); (n, d) -> (n, m)."""
    if x.data.shape[1] != bundle.input_dim:
        raise ad.DimensionError(
            f"extract expects input width {bundle.input_dim}, got {x.data.shape[1]}"
        )
    return bundle.f.forward(x)


def classify(bundle: ModelBundle, z: Tensor) -> Tensor:
    """Class probabilities c(z) on the K-simplex; (n, m) -> (n, K)."""
    return ad.softmax_rows(bundle.c.forward(z))


def predict(bundle: ModelBundle, x: np.ndarray) -> np.ndarray:
    """Hard labels by argmax of the class probabilities (no recording)."""
    with ad.no_grad():
        p = classify(bundle, extract(bundle, Tensor(x)))
    return p.data.argmax(axis=1)


def outer_embed(z: Tensor, p: Tensor) -> Tensor:
    """Conditioning embedding s = flatten(z p^T) per row."""
    return ad.outer_rows(z, p)


def discriminate(bundle: ModelBundle, s: Tensor) -> Tensor:
    """Source probability r(s) in (0,1), clamped away from {0,1}."""
    logit = bundle.r.forward(s)
    return ad.clamp(ad.sigmoid(logit), PROB_CLAMP, 1.0 - PROB_CLAMP)


def entropy_weights(p: np.ndarray) -> np.ndarray:
    """Certainty weights w = 1 + exp(-H(p_i)) as an (n, 1) column in (1, 2].

    Computed outside the graph; the weights are treated as constants during
    optimization (no gradient flows through them).
    """
    p = np.asarray(p, dtype=np.float64)
    logs = np.log(np.maximum(p, 1e-12))
    h = -(p * logs).sum(axis=1, keepdims=True)
    return 1.0 + np.exp(-h)


# ---------------------------------------------------------------------------
# checkpoint io: textual, exact float round-trip via repr


def save_checkpoint(bundle: ModelBundle, path) -> None:
    nets = {}
    for name, net in (("f", bundle.f), ("c", bundle.c), ("r", bundle.r)):
        nets[name] = {
            "weights": [w.data.tolist() for w in net.weights],
            "biases": [b.data.tolist() for b in net.biases],
        }
    record = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "input_dim": bundle.input_dim,
        "feature_dim": bundle.feature_dim,
        "n_classes": bundle.n_classes,
        "conditional": bundle.conditional,
        "slope": bundle.slope,
        "nets": nets,
    }
    with open(path, "w") as fh:
        json.dump(record, fh)


def load_checkpoint(path) -> ModelBundle:
    with open(path) as fh:
        record = json.load(fh)
    if record.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"not a {CHECKPOINT_FORMAT} file: {path}")
    if record.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {record.get('version')}")

    def build(name: str) -> Mlp:
        net = record["nets"][name]
        weights = [Tensor(np.array(w), requires_grad=True) for w in net["weights"]]
        biases = [Tensor(np.array(b), requires_grad=True) for b in net["biases"]]
        return Mlp(weights, biases, record["slope"])

    return ModelBundle(
        f=build("f"),
        c=build("c"),
        r=build("r"),
        input_dim=record["input_dim"],
        feature_dim=record["feature_dim"],
        n_classes=record["n_classes"],
        conditional=record["conditional"],
        slope=record["slope"],
    )
