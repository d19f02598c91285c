"""The GNet model: graph encoder, variational bottleneck, two decoder heads.

The encoder runs three graph convolutions with ReLUs after the first two,
producing per-node hidden features H. A global mean pool of H feeds linear
mu / log-variance heads, giving the latent z. The recognition head
classifies dropout(z) directly; the prediction head reads a Set2Set
summary of H concatenated with dropout(z). Both heads end in log-softmax.
Either head can be disabled, but not both.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .autodiff import ParamStore, Value, concat_cols, constant
from .data import Sample
from .layers import (
    LatentState,
    LinearParams,
    LstmParams,
    dropout,
    global_mean_pool,
    graph_conv,
    init_graph_conv,
    init_linear,
    init_lstm,
    linear,
    log_softmax,
    reparameterize,
    set2set,
)


class ConfigError(ValueError):
    """Model configuration is internally inconsistent or mismatches data."""


@dataclass(frozen=True)
class GNetConfig:
    """Architecture hyperparameters.

    w2 defaults to w1 when omitted. dropout_p applies to the latent z in
    front of each enabled head, train mode only.
    """

    d_in: int
    num_classes: int
    w1: int = 64
    w2: int | None = None
    d_z: int = 128
    set2set_steps: int = 3
    dropout_p: float = 0.5
    enable_recognition: bool = True
    enable_prediction: bool = True
    kl_weight: float = 0.0

    def __post_init__(self):
        if self.w2 is None:
            object.__setattr__(self, "w2", self.w1)
        if self.d_in < 1:
            raise ConfigError(f"d_in must be >= 1, got {self.d_in}")
        if self.num_classes < 2:
            raise ConfigError(f"num_classes must be >= 2, got {self.num_classes}")
        if self.w1 < 1 or self.w2 < 1 or self.d_z < 1:
            raise ConfigError("hidden widths w1, w2 and d_z must be >= 1")
        if self.set2set_steps < 1:
            raise ConfigError(f"set2set_steps must be >= 1, got {self.set2set_steps}")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ConfigError(f"dropout_p must lie in [0, 1), got {self.dropout_p}")
        if not (self.enable_recognition or self.enable_prediction):
            raise ConfigError("at least one of recognition / prediction must be enabled")
        if self.kl_weight < 0.0:
            raise ConfigError(f"kl_weight must be >= 0, got {self.kl_weight}")

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, doc: dict) -> "GNetConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown model config keys: {sorted(unknown)}")
        return cls(**doc)


# Output-head weights start near zero so an untrained model predicts a
# near-uniform distribution and its loss sits at ln(C) per branch.
HEAD_INIT_SCALE = 0.01


class GNetModel:
    """Parameter container plus config; all math lives in gnet_forward."""

    def __init__(self, config: GNetConfig, seed: int = 0):
        self.config = config
        self.seed = int(seed)
        self.params = ParamStore()
        rng = np.random.default_rng(self.seed)
        c = config
        self.conv1 = init_graph_conv(self.params, "encoder.conv1", c.d_in, c.w1, rng)
        self.conv2 = init_graph_conv(self.params, "encoder.conv2", c.w1, c.w2, rng)
        self.conv3 = init_graph_conv(self.params, "encoder.conv3", c.w2, c.w2, rng)
        self.mu_head = init_linear(self.params, "encoder.mu", c.w2, c.d_z, rng)
        self.logvar_head = init_linear(self.params, "encoder.logvar", c.w2, c.d_z, rng)
        self.recognition_out: LinearParams | None = None
        self.set2set_lstm: LstmParams | None = None
        self.prediction_out: LinearParams | None = None
        if c.enable_recognition:
            self.recognition_out = init_linear(
                self.params, "recognition.out", c.d_z, c.num_classes, rng, HEAD_INIT_SCALE
            )
        if c.enable_prediction:
            self.set2set_lstm = init_lstm(
                self.params, "prediction.set2set", 2 * c.w2, c.w2, rng
            )
            self.prediction_out = init_linear(
                self.params,
                "prediction.out",
                2 * c.w2 + c.d_z,
                c.num_classes,
                rng,
                HEAD_INIT_SCALE,
            )

    def num_params(self) -> int:
        return self.params.num_entries()


def gnet_forward(
    model: GNetModel,
    sample: Sample,
    mode: str = "eval",
    rng: np.random.Generator | None = None,
) -> tuple[Value | None, Value | None, LatentState]:
    """Run one sample through the network.

    Returns (logp_recognition, logp_prediction, latent); a disabled head
    yields None. Train mode draws latent noise and dropout masks from
    ``rng``; eval mode is deterministic with z = mu and no dropout.
    """
    c = model.config
    graph = sample.graph
    top = max(graph.node_classes, default=-1)
    if top >= c.d_in:
        raise ConfigError(
            f"graph has node class {top} but the model expects one-hot features "
            f"of width d_in={c.d_in}"
        )
    x = np.zeros((graph.num_nodes, c.d_in))
    x[np.arange(graph.num_nodes), graph.node_classes] = 1.0

    edges = graph.edges
    h = graph_conv(model.conv1, constant(x), edges).relu()
    h = graph_conv(model.conv2, h, edges).relu()
    h = graph_conv(model.conv3, h, edges)

    pooled = global_mean_pool(h, [0] * graph.num_nodes)
    mu = linear(model.mu_head, pooled)
    logvar = linear(model.logvar_head, pooled)
    latent = reparameterize(mu, logvar, mode, rng)

    logp_r = None
    if model.recognition_out is not None:
        z_r = dropout(latent.z, c.dropout_p, mode, rng)
        logp_r = log_softmax(linear(model.recognition_out, z_r))

    logp_p = None
    if model.prediction_out is not None:
        summary = set2set(model.set2set_lstm, h, c.set2set_steps)
        z_p = dropout(latent.z, c.dropout_p, mode, rng)
        logp_p = log_softmax(linear(model.prediction_out, concat_cols(summary, z_p)))

    return logp_r, logp_p, latent


def _nll(logp: Value, label: int) -> Value:
    """-logp[label] as a 1x1 Value, selected by one-hot product."""
    num_classes = logp.cols
    if not 0 <= label < num_classes:
        raise ValueError(f"label {label} out of range for {num_classes} classes")
    pick = np.zeros((num_classes, 1))
    pick[label, 0] = 1.0
    return -(logp @ constant(pick))


def kl_divergence(latent: LatentState) -> Value:
    """KL(N(mu, exp(logvar)) || N(0, I)) = 0.5 * sum(exp(lv) + mu^2 - 1 - lv)."""
    mu, logvar = latent.mu, latent.logvar
    ones = constant(np.ones(mu.shape))
    return 0.5 * ((logvar.exp() + mu * mu - ones - logvar).sum())


def gnet_loss(
    logp_r: Value | None,
    logp_p: Value | None,
    labels: tuple[int, int],
    latent: LatentState,
    kl_weight: float = 0.0,
) -> Value:
    """Sum of per-head negative log-likelihoods plus kl_weight * KL.

    A disabled head contributes nothing; labels is (recognition label,
    prediction label), each ignored when its head is absent.
    """
    if logp_r is None and logp_p is None:
        raise ValueError("gnet_loss needs at least one head output")
    y_r, y_p = labels
    total: Value | None = None
    if logp_r is not None:
        total = _nll(logp_r, y_r)
    if logp_p is not None:
        nll_p = _nll(logp_p, y_p)
        total = nll_p if total is None else total + nll_p
    if kl_weight != 0.0:
        total = total + float(kl_weight) * kl_divergence(latent)
    return total


@dataclass(frozen=True)
class Prediction:
    """Argmax labels and their probabilities; None for a disabled head."""

    recognition_label: int | None
    prediction_label: int | None
    recognition_confidence: float | None
    prediction_confidence: float | None


def predict(model: GNetModel, sample: Sample) -> Prediction:
    """Eval-mode argmax per head; ties break toward the lowest class id."""
    logp_r, logp_p, _ = gnet_forward(model, sample, mode="eval")
    label_r = conf_r = label_p = conf_p = None
    if logp_r is not None:
        label_r = int(np.argmax(logp_r.data[0]))
        conf_r = float(np.exp(logp_r.data[0, label_r]))
    if logp_p is not None:
        label_p = int(np.argmax(logp_p.data[0]))
        conf_p = float(np.exp(logp_p.data[0, label_p]))
    return Prediction(label_r, label_p, conf_r, conf_p)
