"""Command-line interface: train, eval, gradcheck, and synth.

Run configs are JSON files with sections ``dataset``, ``split``,
``model``, ``training`` plus ``output_dir``; unknown keys anywhere are
an error. Training echoes the effective config (all defaults applied)
into the output directory, and re-running from the echoed file
reproduces the run byte for byte.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

from . import autodiff
from .autodiff import NumericError, finite_difference_check
from .checkpoint import (
    CheckpointError,
    load_checkpoint,
    restore_model,
    save_checkpoint,
    save_state,
)
from .data import (
    Dataset,
    DatasetError,
    Graph,
    Sample,
    SplitError,
    split_dataset,
    split_sequences,
    windowed_dataset,
)
from .formats import load_sequence_dataset, load_tu_dataset, write_sequence_dataset
from .model import ConfigError, GNetConfig, GNetModel, gnet_forward, gnet_loss
from .synth import generate_synthetic_store
from .training import (
    TrainConfig,
    TrainingError,
    evaluate,
    train,
    write_confusion,
    write_history_csv,
)

DATASET_KINDS = ("tu", "sequence", "synthetic")
SPLIT_NAMES = ("train", "val", "test", "all")


class RunConfigError(ValueError):
    """A run config file is structurally invalid."""


@dataclass(frozen=True)
class RunConfig:
    """Validated run config; dataset/split sections have defaults applied."""

    dataset: dict
    split: dict
    model: dict
    training: TrainConfig
    output_dir: str | None


def _check_keys(section: dict, allowed: set, where: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise RunConfigError(f"unknown keys in {where} section: {sorted(unknown)}")


def _parse_dataset(raw) -> dict:
    if not isinstance(raw, dict):
        raise RunConfigError("dataset section must be an object")
    kind = raw.get("kind")
    if kind not in DATASET_KINDS:
        raise RunConfigError(f"dataset.kind must be one of {DATASET_KINDS}, got {kind!r}")

    if kind == "tu":
        _check_keys(raw, {"kind", "path", "name"}, "dataset")
        path = raw.get("path")
        if not isinstance(path, str) or not path:
            raise RunConfigError("dataset.path is required for kind 'tu'")
        return {"kind": kind, "path": path, "name": raw.get("name") or Path(path).name}

    window = int(raw.get("window", 4))
    horizon = int(raw.get("horizon", 1))
    if window < 1:
        raise RunConfigError(f"dataset.window must be >= 1, got {window}")
    if horizon < 0:
        raise RunConfigError(f"dataset.horizon must be >= 0, got {horizon}")

    if kind == "sequence":
        _check_keys(raw, {"kind", "path", "window", "horizon"}, "dataset")
        path = raw.get("path")
        if not isinstance(path, str) or not path:
            raise RunConfigError("dataset.path is required for kind 'sequence'")
        return {"kind": kind, "path": path, "window": window, "horizon": horizon}

    _check_keys(
        raw,
        {
            "kind",
            "classes",
            "sequences_per_class",
            "frames",
            "strength",
            "seed",
            "window",
            "horizon",
            "name",
        },
        "dataset",
    )
    return {
        "kind": kind,
        "classes": int(raw.get("classes", 4)),
        "sequences_per_class": int(raw.get("sequences_per_class", 10)),
        "frames": int(raw.get("frames", 8)),
        "strength": float(raw.get("strength", 1.0)),
        "seed": int(raw.get("seed", 0)),
        "window": window,
        "horizon": horizon,
        "name": raw.get("name", "synthetic"),
    }


def _parse_split(raw, kind: str) -> dict:
    if not isinstance(raw, dict):
        raise RunConfigError("split section must be an object")
    _check_keys(raw, {"ratios", "seed", "per_class"}, "split")
    ratios = raw.get("ratios", [10, 3, 2])
    if not isinstance(ratios, (list, tuple)) or len(ratios) != 3:
        raise RunConfigError(f"split.ratios must be three numbers, got {ratios!r}")
    # Whole demonstrations are split for sequence data; flat samples for tu.
    per_class = raw.get("per_class", kind != "tu")
    return {
        "ratios": [float(r) for r in ratios],
        "seed": int(raw.get("seed", 0)),
        "per_class": bool(per_class),
    }


def _parse_model(raw) -> dict:
    if not isinstance(raw, dict):
        raise RunConfigError("model section must be an object")
    allowed = set(GNetConfig(d_in=1, num_classes=2).to_dict())
    _check_keys(raw, allowed, "model")
    return dict(raw)


def _parse_training(raw) -> TrainConfig:
    if not isinstance(raw, dict):
        raise RunConfigError("training section must be an object")
    defaults = asdict(TrainConfig(epochs=200))
    _check_keys(raw, set(defaults), "training")
    merged = {**defaults, **raw}
    try:
        return TrainConfig(**merged)
    except ValueError as exc:
        raise RunConfigError(f"training section: {exc}") from exc


def parse_run_config(doc, require_output: bool = True) -> RunConfig:
    if not isinstance(doc, dict):
        raise RunConfigError("run config must be a JSON object")
    _check_keys(doc, {"dataset", "split", "model", "training", "output_dir"}, "top-level")
    if "dataset" not in doc:
        raise RunConfigError("run config needs a dataset section")
    dataset = _parse_dataset(doc["dataset"])
    split = _parse_split(doc.get("split", {}), dataset["kind"])
    model = _parse_model(doc.get("model", {}))
    training = _parse_training(doc.get("training", {}))
    output_dir = doc.get("output_dir")
    if require_output and not isinstance(output_dir, str):
        raise RunConfigError("output_dir is required and must be a string")
    return RunConfig(dataset, split, model, training, output_dir)


def build_datasets(
    dataset_cfg: dict, split_cfg: dict
) -> tuple[Dataset, Dataset, Dataset, Dataset, int]:
    """Load or generate the dataset and split it.

    Returns (full, train, val, test, skipped_sequences). Sequence data is
    split by whole demonstration before windowing, so no demonstration
    leaks across splits.
    """
    kind = dataset_cfg["kind"]
    ratios, seed, per_class = (
        split_cfg["ratios"],
        split_cfg["seed"],
        split_cfg["per_class"],
    )
    if kind == "tu":
        full = load_tu_dataset(dataset_cfg["path"], name=dataset_cfg["name"])
        tr, va, te = split_dataset(full, ratios, seed, per_class)
        return full, tr, va, te, 0

    if kind == "sequence":
        store = load_sequence_dataset(dataset_cfg["path"])
    else:
        store = generate_synthetic_store(
            classes=dataset_cfg["classes"],
            sequences_per_class=dataset_cfg["sequences_per_class"],
            frames=dataset_cfg["frames"],
            strength=dataset_cfg["strength"],
            seed=dataset_cfg["seed"],
            name=dataset_cfg["name"],
        )
    window, horizon = dataset_cfg["window"], dataset_cfg["horizon"]
    full, skipped = windowed_dataset(store, window, horizon)
    parts = split_sequences(store, ratios, seed, per_class)
    datasets = []
    for part in parts:
        ds, _ = windowed_dataset(part, window, horizon)
        if len(ds) == 0:
            raise DatasetError(
                f"{part.name}: no sequence is long enough for window={window}"
            )
        datasets.append(ds)
    return full, datasets[0], datasets[1], datasets[2], skipped


def resolve_model_config(model_section: dict, dataset: Dataset) -> GNetConfig:
    """Fill d_in / num_classes from the dataset unless given explicitly."""
    section = dict(model_section)
    d_in = section.pop("d_in", None)
    if d_in is None:
        d_in = dataset.num_node_classes
    elif d_in < dataset.num_node_classes:
        raise RunConfigError(
            f"model.d_in={d_in} is smaller than the dataset's node-class count "
            f"{dataset.num_node_classes}"
        )
    num_classes = section.pop("num_classes", None)
    if num_classes is None:
        num_classes = dataset.num_graph_classes
    elif num_classes != dataset.num_graph_classes:
        raise RunConfigError(
            f"model.num_classes={num_classes} does not match the dataset's "
            f"{dataset.num_graph_classes} graph classes"
        )
    return GNetConfig(d_in=int(d_in), num_classes=int(num_classes), **section)


def effective_config(cfg: RunConfig, model_config: GNetConfig) -> dict:
    return {
        "dataset": cfg.dataset,
        "split": cfg.split,
        "model": model_config.to_dict(),
        "training": asdict(cfg.training),
        "output_dir": cfg.output_dir,
    }


def _read_json(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise RunConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise RunConfigError(f"config file {path} is not valid JSON: {exc}") from exc


def _metric_text(name: str, value) -> str:
    return f"{name} -" if value is None else f"{name} {value:.4f}"


def cmd_train(args) -> int:
    cfg = parse_run_config(_read_json(args.config))
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    full, train_set, val_set, test_set, skipped = build_datasets(cfg.dataset, cfg.split)
    model_config = resolve_model_config(cfg.model, full)
    effective = effective_config(cfg, model_config)
    (out / "config.json").write_text(json.dumps(effective, indent=2) + "\n", encoding="utf-8")

    print(
        f"dataset {full.name}: {len(full)} samples "
        f"({len(train_set)} train / {len(val_set)} val / {len(test_set)} test), "
        f"{full.num_graph_classes} classes"
    )
    if skipped:
        print(f"warning: {skipped} sequence(s) shorter than the window were skipped")

    model = GNetModel(model_config, seed=cfg.training.seed)
    print(f"model: {model.num_params()} trainable entries, seed {model.seed}")
    result = train(model, train_set, val_set, cfg.training, log=print)

    save_checkpoint(out / "final.npz", model, epoch=cfg.training.epochs, run_config=effective)
    save_state(
        out / "best.npz",
        model_config,
        model.seed,
        result.best_epoch,
        result.best_arrays,
        run_config=effective,
    )
    write_history_csv(out / "history.csv", result.history)

    model.params.load_arrays(result.best_arrays)
    test_metrics = evaluate(model, test_set)
    if test_metrics.confusion_recognition is not None:
        write_confusion(
            out / "confusion_recognition.tsv",
            test_metrics.confusion_recognition,
            full.label_names,
        )
    if test_metrics.confusion_prediction is not None:
        write_confusion(
            out / "confusion_prediction.tsv",
            test_metrics.confusion_prediction,
            full.label_names,
        )

    best_acc = "-" if result.best_val_accuracy is None else f"{result.best_val_accuracy:.4f}"
    print(f"best epoch {result.best_epoch} (val accuracy {best_acc})")
    print(
        "test (best checkpoint): "
        + _metric_text("acc_R", test_metrics.recognition_accuracy)
        + "  "
        + _metric_text("acc_P", test_metrics.prediction_accuracy)
        + f"  loss {test_metrics.loss:.6f}"
    )
    print(f"artifacts written to {out}")
    return 0


def cmd_eval(args) -> int:
    state = load_checkpoint(args.checkpoint)
    model = restore_model(state)
    run_doc = state.run_config
    if run_doc is None:
        raise CheckpointError(
            "checkpoint carries no run config, so no dataset can be located"
        )
    if args.data is not None:
        dataset_doc = dict(run_doc.get("dataset", {}))
        if dataset_doc.get("kind") == "synthetic":
            raise RunConfigError("--data cannot override a synthetic dataset")
        dataset_doc["path"] = args.data
        run_doc = {**run_doc, "dataset": dataset_doc}
    cfg = parse_run_config(run_doc, require_output=False)

    full, train_set, val_set, test_set, _ = build_datasets(cfg.dataset, cfg.split)
    if state.config.d_in < full.num_node_classes:
        raise ConfigError(
            f"checkpoint expects d_in={state.config.d_in} but the dataset has "
            f"{full.num_node_classes} node classes"
        )
    if state.config.num_classes != full.num_graph_classes:
        raise ConfigError(
            f"checkpoint has {state.config.num_classes} classes but the dataset has "
            f"{full.num_graph_classes}"
        )

    chosen = {"train": train_set, "val": val_set, "test": test_set, "all": full}[args.split]
    metrics = evaluate(model, chosen, threads=args.threads)
    print(
        f"{chosen.name}: {metrics.num_samples} samples  "
        + _metric_text("acc_R", metrics.recognition_accuracy)
        + "  "
        + _metric_text("acc_P", metrics.prediction_accuracy)
        + f"  loss {metrics.loss:.6f}"
    )

    out_dir = Path(args.out_dir) if args.out_dir else Path(args.checkpoint).parent
    out_dir.mkdir(parents=True, exist_ok=True)
    if metrics.confusion_recognition is not None:
        write_confusion(
            out_dir / f"{args.split}_confusion_recognition.tsv",
            metrics.confusion_recognition,
            full.label_names,
        )
    if metrics.confusion_prediction is not None:
        write_confusion(
            out_dir / f"{args.split}_confusion_prediction.tsv",
            metrics.confusion_prediction,
            full.label_names,
        )
    return 0


_GRADCHECK_MODEL = {
    "d_in": 4,
    "num_classes": 3,
    "w1": 5,
    "w2": 5,
    "d_z": 4,
    "set2set_steps": 2,
    "dropout_p": 0.0,
}
_GRADCHECK_SAMPLE = {
    "node_classes": [0, 1, 2, 3],
    "edges": [[0, 1], [1, 2], [2, 3], [0, 2]],
    "recognition_label": 1,
    "prediction_label": 2,
}


def _corrupted_tanh(original):
    """Test-only negative control: forward intact, backward scaled wrong."""

    def tanh(a):
        out = original(a)
        if out._vjp is not None:
            inner = out._vjp
            out._vjp = lambda g: tuple(None if d is None else 1.5 * d for d in inner(g))
        return out

    return tanh


def cmd_gradcheck(args) -> int:
    model_doc = dict(_GRADCHECK_MODEL)
    sample_doc = dict(_GRADCHECK_SAMPLE)
    if args.config is not None:
        doc = _read_json(args.config)
        if not isinstance(doc, dict):
            raise RunConfigError("gradcheck config must be a JSON object")
        _check_keys(doc, {"model", "sample"}, "gradcheck config")
        model_doc.update(doc.get("model", {}))
        sample_doc.update(doc.get("sample", {}))
    if model_doc.get("dropout_p"):
        raise RunConfigError("gradcheck requires dropout_p=0 (the check needs a deterministic loss)")

    config = GNetConfig.from_dict(model_doc)
    graph = Graph(
        node_classes=tuple(sample_doc["node_classes"]),
        edges=tuple((int(a), int(b)) for a, b in sample_doc["edges"]),
    )
    sample = Sample(
        graph=graph,
        recognition_label=int(sample_doc["recognition_label"]),
        prediction_label=int(sample_doc["prediction_label"]),
    )
    model = GNetModel(config, seed=args.seed)
    print(
        f"gradcheck: {graph.num_nodes}-node sample, {model.num_params()} parameter "
        f"entries, eps={args.eps:g}"
    )

    original = autodiff.tanh
    if args.corrupt_backward:
        autodiff.tanh = _corrupted_tanh(original)
    try:
        worst = 0.0
        for beta in (0.0, 1.0):

            def loss_fn(params, beta=beta):
                logp_r, logp_p, latent = gnet_forward(model, sample, mode="eval")
                return gnet_loss(
                    logp_r,
                    logp_p,
                    (sample.recognition_label, sample.prediction_label),
                    latent,
                    kl_weight=beta,
                )

            err = finite_difference_check(loss_fn, model.params, eps=args.eps)
            print(f"kl_weight={beta:g}: max relative error {err:.3e}")
            worst = max(worst, err)
    finally:
        autodiff.tanh = original

    passed = worst < 1e-4
    print(f"max relative error {worst:.3e}: {'PASS' if passed else 'FAIL'} (threshold 1e-4)")
    return 0 if passed else 1


def cmd_synth(args) -> int:
    store = generate_synthetic_store(
        classes=args.classes,
        sequences_per_class=args.seqs,
        frames=args.frames,
        strength=args.strength,
        seed=args.seed,
    )
    write_sequence_dataset(store, args.out)
    print(
        f"wrote {len(store)} sequences ({args.classes} classes x {args.seqs}, "
        f"{args.frames} frames each) to {args.out}"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gnet",
        description="Joint graph-level action recognition and prediction.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model from a JSON run config")
    p.add_argument("--config", required=True, help="path to the run config JSON")

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset split")
    p.add_argument("--checkpoint", required=True, help="path to a .npz checkpoint")
    p.add_argument("--data", help="override the dataset path stored in the checkpoint")
    p.add_argument("--split", choices=SPLIT_NAMES, default="test")
    p.add_argument("--threads", type=int, default=1, help="evaluation thread count")
    p.add_argument("--out-dir", help="where to write confusion matrices (default: checkpoint dir)")

    p = sub.add_parser("gradcheck", help="finite-difference check of the full model loss")
    p.add_argument("--config", help="optional JSON with model / sample overrides")
    p.add_argument("--eps", type=float, default=1e-4, help="central-difference step")
    p.add_argument("--seed", type=int, default=0, help="model init seed")
    p.add_argument("--corrupt-backward", action="store_true", help=argparse.SUPPRESS)

    p = sub.add_parser("synth", help="generate a synthetic sequence-graph dataset")
    p.add_argument("--classes", type=int, default=4)
    p.add_argument("--seqs", type=int, default=10, help="sequences per class")
    p.add_argument("--frames", type=int, default=8, help="frames per sequence")
    p.add_argument("--strength", type=float, default=1.0, help="motif strength in [0, 1]")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output JSON path")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "train": cmd_train,
        "eval": cmd_eval,
        "gradcheck": cmd_gradcheck,
        "synth": cmd_synth,
    }
    try:
        return handlers[args.command](args)
    except (
        RunConfigError,
        ConfigError,
        DatasetError,
        SplitError,
        CheckpointError,
        TrainingError,
        NumericError,
        ValueError,
        OSError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
