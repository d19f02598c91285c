"""Regenerate the committed test fixtures under tests/fixtures/.

Produces a small sequence-graph dataset plus a checkpoint overfit to its
train split (train recognition and prediction accuracy must reach 1.0).
Everything is seeded, so rerunning this script reproduces the same files.

Usage: python3 tools/make_tiny_fixture.py
"""

from pathlib import Path

from gnet.checkpoint import save_state
from gnet.cli import build_datasets, parse_run_config, effective_config
from gnet.formats import write_sequence_dataset
from gnet.model import GNetConfig, GNetModel
from gnet.synth import generate_synthetic_store
from gnet.training import evaluate, train

FIXTURE_DIR = Path(__file__).resolve().parent.parent / "tests" / "fixtures"

RUN_DOC = {
    "dataset": {
        "kind": "sequence",
        "path": "tiny_sequences.json",  # resolved via eval --data at test time
        "window": 4,
        "horizon": 1,
    },
    "split": {"ratios": [3, 1, 1], "seed": 0, "per_class": True},
    "model": {
        "w1": 8,
        "w2": 8,
        "d_z": 4,
        "set2set_steps": 2,
        "dropout_p": 0.0,
        "kl_weight": 0.0,
    },
    "training": {"epochs": 30, "lr": 1e-2, "seed": 0},
}


def main() -> None:
    FIXTURE_DIR.mkdir(parents=True, exist_ok=True)
    store = generate_synthetic_store(
        classes=2, sequences_per_class=5, frames=5, strength=1.0, seed=42, name="tiny"
    )
    data_path = FIXTURE_DIR / "tiny_sequences.json"
    write_sequence_dataset(store, data_path)

    cfg = parse_run_config({**RUN_DOC, "dataset": {**RUN_DOC["dataset"], "path": str(data_path)}},
                           require_output=False)
    full, train_set, val_set, _, _ = build_datasets(cfg.dataset, cfg.split)
    model_config = GNetConfig(
        d_in=full.num_node_classes, num_classes=full.num_graph_classes, **cfg.model
    )
    model = GNetModel(model_config, seed=cfg.training.seed)
    result = train(model, train_set, val_set, cfg.training)

    model.params.load_arrays(result.best_arrays)
    metrics = evaluate(model, train_set)
    if metrics.recognition_accuracy != 1.0 or metrics.prediction_accuracy != 1.0:
        raise SystemExit(
            f"fixture model failed to overfit: acc_R={metrics.recognition_accuracy} "
            f"acc_P={metrics.prediction_accuracy}"
        )

    # embed the relative dataset path so the artifact is machine-independent;
    # tests point --data at the real file
    embedded = effective_config(cfg, model_config)
    embedded["dataset"] = dict(RUN_DOC["dataset"])
    save_state(
        FIXTURE_DIR / "tiny_model.npz",
        model_config,
        model.seed,
        result.best_epoch,
        result.best_arrays,
        run_config=embedded,
    )
    print(f"dataset: {data_path}")
    print(f"checkpoint: {FIXTURE_DIR / 'tiny_model.npz'} (best epoch {result.best_epoch})")
    print(
        f"train accuracy: acc_R {metrics.recognition_accuracy:.4f} "
        f"acc_P {metrics.prediction_accuracy:.4f} over {metrics.num_samples} samples"
    )


if __name__ == "__main__":
    main()
