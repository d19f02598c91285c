"""Checkpoint persistence: exact weight round trips and failure modes."""

from dataclasses import replace

import numpy as np
import pytest

from gnet.checkpoint import (
    CheckpointError,
    load_checkpoint,
    restore_model,
    save_checkpoint,
    save_state,
)
from gnet.data import Graph, Sample
from gnet.model import GNetConfig, GNetModel, gnet_forward


def _model(seed=0):
    return GNetModel(
        GNetConfig(d_in=3, num_classes=3, w1=5, d_z=4, set2set_steps=2, dropout_p=0.25),
        seed=seed,
    )


def _sample():
    return Sample(
        graph=Graph(node_classes=(0, 1, 2), edges=((0, 1), (1, 2))),
        recognition_label=0,
        prediction_label=1,
    )


def test_round_trip_restores_weights_bit_for_bit(tmp_path):
    model = _model(seed=7)
    path = tmp_path / "model.npz"
    save_checkpoint(path, model, epoch=13, run_config={"training": {"lr": 0.5}})

    state = load_checkpoint(path)
    assert state.config == model.config
    assert state.seed == 7
    assert state.epoch == 13
    assert state.run_config == {"training": {"lr": 0.5}}
    assert set(state.arrays) == set(model.params.paths())
    for path_name, arr in state.arrays.items():
        assert arr.dtype == np.float64
        np.testing.assert_array_equal(arr, model.params[path_name].data)


def test_restored_model_reproduces_eval_outputs_exactly(tmp_path):
    model = _model(seed=3)
    save_checkpoint(tmp_path / "m.npz", model)
    clone = restore_model(load_checkpoint(tmp_path / "m.npz"))
    s = _sample()
    r1, p1, _ = gnet_forward(model, s)
    r2, p2, _ = gnet_forward(clone, s)
    np.testing.assert_array_equal(r1.data, r2.data)
    np.testing.assert_array_equal(p1.data, p2.data)


def test_run_config_defaults_to_none(tmp_path):
    save_checkpoint(tmp_path / "m.npz", _model())
    assert load_checkpoint(tmp_path / "m.npz").run_config is None


def test_missing_file(tmp_path):
    with pytest.raises(CheckpointError, match="not found"):
        load_checkpoint(tmp_path / "nope.npz")


def test_unreadable_file(tmp_path):
    bad = tmp_path / "junk.npz"
    bad.write_bytes(b"this is not an archive")
    with pytest.raises(CheckpointError, match="cannot read"):
        load_checkpoint(bad)


def test_archive_without_header_is_rejected(tmp_path):
    path = tmp_path / "plain.npz"
    np.savez(path, weights=np.ones((2, 2)))
    with pytest.raises(CheckpointError, match="__meta__"):
        load_checkpoint(path)


def test_unknown_version_is_rejected(tmp_path):
    path = tmp_path / "future.npz"
    np.savez(path, __meta__=np.array('{"version": 99}'))
    with pytest.raises(CheckpointError, match="version 99"):
        load_checkpoint(path)


def test_reserved_key_collision_is_rejected(tmp_path):
    model = _model()
    with pytest.raises(CheckpointError, match="reserved"):
        save_state(
            tmp_path / "m.npz",
            model.config,
            0,
            0,
            {"__meta__": np.ones((1, 1))},
        )


def test_restore_rejects_weight_shape_mismatch(tmp_path):
    model = _model()
    save_checkpoint(tmp_path / "m.npz", model)
    state = load_checkpoint(tmp_path / "m.npz")
    broken = dict(state.arrays)
    broken["encoder.mu.weight"] = np.zeros((1, 1))
    with pytest.raises(Exception, match="stored shape|shape"):
        restore_model(replace(state, arrays=broken))
