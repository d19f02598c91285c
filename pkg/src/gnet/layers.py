"""Neural building blocks as pure functions over autodiff Values.

Parameters live in a :class:`~gnet.autodiff.ParamStore` under stable
dotted paths; the ``init_*`` factories register them and return a typed
view. Weight matrices start uniform in +/- sqrt(6 / (fan_in + fan_out)),
biases at zero, and the LSTM forget-gate bias at one.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .autodiff import (
    ParamStore,
    ShapeError,
    Value,
    broadcast_add_row,
    concat_cols,
    constant,
)


def glorot_uniform(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-limit, limit, size=(rows, cols))


@dataclass(frozen=True)
class GraphConvParams:
    """Self and neighbor transforms of the graph convolution."""

    theta1: Value
    theta2: Value
    bias: Value


def init_graph_conv(
    store: ParamStore, prefix: str, d_in: int, d_out: int, rng: np.random.Generator
) -> GraphConvParams:
    return GraphConvParams(
        theta1=store.add(f"{prefix}.theta1", glorot_uniform(rng, d_in, d_out)),
        theta2=store.add(f"{prefix}.theta2", glorot_uniform(rng, d_in, d_out)),
        bias=store.add(f"{prefix}.bias", np.zeros((1, d_out))),
    )


def adjacency_matrix(num_nodes: int, edges: Sequence[tuple[int, int]]) -> np.ndarray:
    """Symmetric 0/1 adjacency; messages flow both ways along each edge."""
    adj = np.zeros((num_nodes, num_nodes))
    for a, b in edges:
        if not (0 <= a < num_nodes and 0 <= b < num_nodes):
            raise ValueError(f"edge ({a}, {b}) references a node outside [0, {num_nodes})")
        adj[a, b] = 1.0
        adj[b, a] = 1.0
    return adj


def graph_conv(params: GraphConvParams, x: Value, edges: Sequence[tuple[int, int]]) -> Value:
    """Per-node update: own features through theta1 plus the unweighted sum
    of neighbor features through theta2, plus bias. Isolated nodes receive
    only the theta1 term."""
    if x.cols != params.theta1.rows:
        raise ShapeError(
            f"graph_conv: feature width {x.cols} does not match theta1 rows "
            f"{params.theta1.rows}"
        )
    neighbor_sum = constant(adjacency_matrix(x.rows, edges)) @ x
    return broadcast_add_row(x @ params.theta1 + neighbor_sum @ params.theta2, params.bias)


def global_mean_pool(x: Value, node_groups: Sequence[int]) -> Value:
    """Average node rows within each group; returns one row per group."""
    groups = [int(g) for g in node_groups]
    if len(groups) != x.rows:
        raise ValueError(f"{len(groups)} group ids for {x.rows} nodes")
    num_groups = max(groups) + 1
    counts = np.bincount(groups, minlength=num_groups)
    for g, c in enumerate(counts):
        if c == 0:
            raise ValueError(f"group {g} has no nodes")
    pool = np.zeros((num_groups, x.rows))
    for i, g in enumerate(groups):
        pool[g, i] = 1.0 / counts[g]
    return constant(pool) @ x


@dataclass(frozen=True)
class LinearParams:
    weight: Value
    bias: Value


def init_linear(
    store: ParamStore,
    prefix: str,
    d_in: int,
    d_out: int,
    rng: np.random.Generator,
    scale: float = 1.0,
) -> LinearParams:
    """``scale`` shrinks the weight init; classifier heads use a small
    value so a fresh model emits near-uniform distributions."""
    return LinearParams(
        weight=store.add(f"{prefix}.weight", scale * glorot_uniform(rng, d_in, d_out)),
        bias=store.add(f"{prefix}.bias", np.zeros((1, d_out))),
    )


def linear(params: LinearParams, x: Value) -> Value:
    return broadcast_add_row(x @ params.weight, params.bias)


@dataclass(frozen=True)
class LstmParams:
    """Gate weights of one LSTM cell (input, forget, cell, output)."""

    w_i: Value
    u_i: Value
    b_i: Value
    w_f: Value
    u_f: Value
    b_f: Value
    w_g: Value
    u_g: Value
    b_g: Value
    w_o: Value
    u_o: Value
    b_o: Value

    @property
    def input_size(self) -> int:
        return self.w_i.rows

    @property
    def hidden_size(self) -> int:
        return self.w_i.cols


def init_lstm(
    store: ParamStore, prefix: str, input_size: int, hidden_size: int, rng: np.random.Generator
) -> LstmParams:
    fields = {}
    for gate in ("i", "f", "g", "o"):
        fields[f"w_{gate}"] = store.add(
            f"{prefix}.w_{gate}", glorot_uniform(rng, input_size, hidden_size)
        )
        fields[f"u_{gate}"] = store.add(
            f"{prefix}.u_{gate}", glorot_uniform(rng, hidden_size, hidden_size)
        )
        init_bias = np.ones((1, hidden_size)) if gate == "f" else np.zeros((1, hidden_size))
        fields[f"b_{gate}"] = store.add(f"{prefix}.b_{gate}", init_bias)
    return LstmParams(**fields)


def lstm_cell(params: LstmParams, x: Value, h: Value, c: Value) -> tuple[Value, Value]:
    """One step: c' = f*c + i*g, h' = o*tanh(c')."""
    i = (x @ params.w_i + h @ params.u_i + params.b_i).sigmoid()
    f = (x @ params.w_f + h @ params.u_f + params.b_f).sigmoid()
    g = (x @ params.w_g + h @ params.u_g + params.b_g).tanh()
    o = (x @ params.w_o + h @ params.u_o + params.b_o).sigmoid()
    c_next = f * c + i * g
    h_next = o * c_next.tanh()
    return h_next, c_next


def _softmax_column(scores: Value) -> Value:
    """Softmax over an N x 1 column of attention scores.

    Computed as exp(s - max - log sum exp(s - max)); the max shift is a
    detached constant, so gradients match the exact softmax.
    """
    n = scores.rows
    shift = constant(np.full((n, 1), scores.data.max()))
    shifted = scores - shift
    log_z = shifted.exp().sum().log()
    return (shifted - constant(np.ones((n, 1))) @ log_z).exp()


def set2set(
    params: LstmParams, x: Value, steps: int, return_attention: bool = False
):
    """Order-invariant LSTM attention readout over a node set.

    Each step feeds the previous readout (a zero vector of width 2d at
    step 0, LSTM state zero-initialized) through the LSTM to get a query
    q_t, attends over the rows of ``x`` with softmax(x q_t), forms the
    weighted sum r_t, and emits q_t concatenated with r_t. The result
    therefore has twice the feature width for any N, d, T.
    """
    n, d = x.shape
    if params.hidden_size != d:
        raise ValueError(
            f"set2set: LSTM hidden size {params.hidden_size} must equal feature width {d}"
        )
    if params.input_size != 2 * d:
        raise ValueError(
            f"set2set: LSTM input size {params.input_size} must be 2*d = {2 * d}"
        )
    if steps < 1:
        raise ValueError(f"set2set: steps must be >= 1, got {steps}")

    h = constant(np.zeros((1, d)))
    c = constant(np.zeros((1, d)))
    q_star = constant(np.zeros((1, 2 * d)))
    attentions = []
    for _ in range(steps):
        q, c = lstm_cell(params, q_star, h, c)
        h = q
        alpha = _softmax_column(x @ q.T)
        attentions.append(alpha)
        r = alpha.T @ x
        q_star = concat_cols(q, r)
    if return_attention:
        return q_star, attentions
    return q_star


def log_softmax(x: Value) -> Value:
    """Row log-softmax for a single 1 x C row, with max-subtraction."""
    if x.rows != 1:
        raise ShapeError(f"log_softmax expects a 1xC row, got {x.shape}")
    shift = constant(np.full(x.shape, x.data.max()))
    shifted = x - shift
    lse = shifted.exp().sum().log()
    return shifted - lse @ constant(np.ones((1, x.cols)))


@dataclass(frozen=True)
class LatentState:
    """Variational bottleneck: mean, log-variance, and the sampled vector."""

    mu: Value
    logvar: Value
    z: Value


def reparameterize(
    mu: Value, logvar: Value, mode: str, rng: np.random.Generator | None = None
) -> LatentState:
    """z = mu + exp(logvar / 2) * eps in train mode; z = mu in eval mode."""
    _check_mode(mode)
    if mu.shape != logvar.shape:
        raise ShapeError(f"reparameterize: mu {mu.shape} vs logvar {logvar.shape}")
    if mode == "eval":
        return LatentState(mu=mu, logvar=logvar, z=mu)
    if rng is None:
        raise ValueError("train-mode reparameterization needs an rng")
    eps = constant(rng.standard_normal(mu.shape))
    std = (0.5 * logvar).exp()
    return LatentState(mu=mu, logvar=logvar, z=mu + std * eps)


def dropout(x: Value, p: float, mode: str, rng: np.random.Generator | None = None) -> Value:
    """Inverted dropout: survivors are scaled by 1/(1-p) so the expectation
    is unchanged; identity in eval mode."""
    _check_mode(mode)
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout probability must lie in [0, 1), got {p}")
    if mode == "eval" or p == 0.0:
        return x
    if rng is None:
        raise ValueError("train-mode dropout needs an rng")
    mask = (rng.random(x.shape) >= p) / (1.0 - p)
    return x * constant(mask)


def _check_mode(mode: str) -> None:
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
