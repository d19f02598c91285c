"""Joint graph-level action recognition and prediction.

A two-branch variational graph autoencoder over scene-graph sequences:
a GraphConv encoder with a sampled latent bottleneck feeding a
recognition head for the observed window and a Set2Set-based prediction
head for upcoming action classes. Everything runs on a small built-in
reverse-mode autodiff engine over dense float64 arrays.
"""

from .autodiff import (
    LOG_EPS,
    NumericError,
    ParamStore,
    ShapeError,
    Value,
    backward,
    constant,
    finite_difference_check,
    op_forward,
    op_kinds,
)
from .checkpoint import (
    CheckpointError,
    CheckpointState,
    load_checkpoint,
    restore_model,
    save_checkpoint,
)
from .data import (
    Dataset,
    DatasetError,
    Graph,
    Sample,
    SequenceRecord,
    SequenceStore,
    SplitError,
    build_windows,
    merge_graphs,
    one_hot_features,
    split_dataset,
    split_sequences,
    windowed_dataset,
)
from .formats import (
    load_sequence_dataset,
    load_tu_dataset,
    write_sequence_dataset,
    write_tu_dataset,
)
from .layers import (
    LatentState,
    dropout,
    global_mean_pool,
    graph_conv,
    linear,
    log_softmax,
    lstm_cell,
    reparameterize,
    set2set,
)
from .model import (
    ConfigError,
    GNetConfig,
    GNetModel,
    Prediction,
    gnet_forward,
    gnet_loss,
    predict,
)
from .synth import generate_synthetic_store
from .training import (
    AdamState,
    EpochStats,
    Metrics,
    TrainConfig,
    TrainingError,
    TrainResult,
    adam_step,
    evaluate,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "LOG_EPS",
    "AdamState",
    "CheckpointError",
    "CheckpointState",
    "ConfigError",
    "Dataset",
    "DatasetError",
    "EpochStats",
    "GNetConfig",
    "GNetModel",
    "Graph",
    "LatentState",
    "Metrics",
    "NumericError",
    "ParamStore",
    "Prediction",
    "Sample",
    "SequenceRecord",
    "SequenceStore",
    "ShapeError",
    "SplitError",
    "TrainConfig",
    "TrainResult",
    "TrainingError",
    "Value",
    "adam_step",
    "backward",
    "build_windows",
    "constant",
    "dropout",
    "evaluate",
    "finite_difference_check",
    "generate_synthetic_store",
    "global_mean_pool",
    "gnet_forward",
    "gnet_loss",
    "graph_conv",
    "linear",
    "load_checkpoint",
    "load_sequence_dataset",
    "load_tu_dataset",
    "log_softmax",
    "lstm_cell",
    "merge_graphs",
    "one_hot_features",
    "op_forward",
    "op_kinds",
    "predict",
    "reparameterize",
    "restore_model",
    "save_checkpoint",
    "set2set",
    "split_dataset",
    "split_sequences",
    "train",
    "windowed_dataset",
    "write_sequence_dataset",
    "write_tu_dataset",
]
