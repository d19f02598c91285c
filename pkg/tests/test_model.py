"""Model assembly tests: config validation, forward contract, loss anchors."""

import numpy as np
import pytest

from gnet.autodiff import constant
from gnet.data import Graph, Sample
from gnet.layers import LatentState
from gnet.model import (
    ConfigError,
    GNetConfig,
    GNetModel,
    gnet_forward,
    gnet_loss,
    kl_divergence,
    predict,
)


def _sample(classes=(0, 1, 2), edges=((0, 1), (1, 2)), y=(1, 2)):
    return Sample(
        graph=Graph(node_classes=classes, edges=edges),
        recognition_label=y[0],
        prediction_label=y[1],
    )


def _small_config(**kw):
    base = dict(
        d_in=3, num_classes=3, w1=6, w2=None, d_z=4, set2set_steps=2, dropout_p=0.0
    )
    base.update(kw)
    return GNetConfig(**base)


def _uniform_latent(d=4):
    zero = constant(np.zeros((1, d)))
    return LatentState(mu=zero, logvar=zero, z=zero)


# -- configuration ---------------------------------------------------------------


def test_w2_defaults_to_w1():
    cfg = GNetConfig(d_in=4, num_classes=2, w1=10)
    assert cfg.w2 == 10
    assert GNetConfig(d_in=4, num_classes=2, w1=10, w2=7).w2 == 7


def test_config_validation():
    with pytest.raises(ConfigError, match="d_in"):
        GNetConfig(d_in=0, num_classes=2)
    with pytest.raises(ConfigError, match="num_classes"):
        GNetConfig(d_in=1, num_classes=1)
    with pytest.raises(ConfigError, match="widths"):
        GNetConfig(d_in=1, num_classes=2, w1=0)
    with pytest.raises(ConfigError, match="set2set_steps"):
        GNetConfig(d_in=1, num_classes=2, set2set_steps=0)
    with pytest.raises(ConfigError, match="dropout_p"):
        GNetConfig(d_in=1, num_classes=2, dropout_p=1.0)
    with pytest.raises(ConfigError, match="at least one"):
        GNetConfig(
            d_in=1, num_classes=2, enable_recognition=False, enable_prediction=False
        )
    with pytest.raises(ConfigError, match="kl_weight"):
        GNetConfig(d_in=1, num_classes=2, kl_weight=-0.1)


def test_config_dict_round_trip():
    cfg = _small_config(kl_weight=0.5)
    assert GNetConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ConfigError, match="unknown model config keys"):
        GNetConfig.from_dict({"d_in": 1, "num_classes": 2, "depth": 9})


# -- parameter registration ---------------------------------------------------------


def test_joint_model_registers_all_blocks():
    model = GNetModel(_small_config(), seed=0)
    paths = model.params.paths()
    for prefix in (
        "encoder.conv1.theta1",
        "encoder.conv2.theta2",
        "encoder.conv3.bias",
        "encoder.mu.weight",
        "encoder.logvar.bias",
        "recognition.out.weight",
        "prediction.set2set.w_i",
        "prediction.set2set.b_f",
        "prediction.out.weight",
    ):
        assert prefix in paths
    assert model.num_params() == sum(v.data.size for _, v in model.params.items())


def test_single_branch_models_omit_the_other_head():
    rec = GNetModel(_small_config(enable_prediction=False))
    assert rec.prediction_out is None
    assert not [p for p in rec.params.paths() if p.startswith("prediction")]
    pred = GNetModel(_small_config(enable_recognition=False))
    assert pred.recognition_out is None
    assert not [p for p in pred.params.paths() if p.startswith("recognition")]


def test_same_seed_gives_identical_parameters():
    a = GNetModel(_small_config(), seed=5)
    b = GNetModel(_small_config(), seed=5)
    c = GNetModel(_small_config(), seed=6)
    for (pa, va), (pb, vb) in zip(a.params.items(), b.params.items()):
        assert pa == pb
        assert np.array_equal(va.data, vb.data)
    assert any(
        not np.array_equal(va.data, vc.data)
        for (_, va), (_, vc) in zip(a.params.items(), c.params.items())
    )


def test_classifier_heads_start_much_smaller_than_the_encoder():
    model = GNetModel(_small_config(), seed=0)
    head = np.abs(model.recognition_out.weight.data).max()
    body = np.abs(model.mu_head.weight.data).max()
    assert head < 0.05 * body


# -- forward contract -----------------------------------------------------------------


def test_forward_shapes_and_normalization():
    model = GNetModel(_small_config(), seed=1)
    logp_r, logp_p, latent = gnet_forward(model, _sample())
    assert logp_r.shape == (1, 3)
    assert logp_p.shape == (1, 3)
    assert latent.z.shape == (1, 4)
    assert np.exp(logp_r.data).sum() == pytest.approx(1.0, abs=1e-12)
    assert np.exp(logp_p.data).sum() == pytest.approx(1.0, abs=1e-12)


def test_eval_forward_is_deterministic_and_uses_the_mean():
    model = GNetModel(_small_config(dropout_p=0.5), seed=1)
    r1, p1, l1 = gnet_forward(model, _sample())
    r2, p2, l2 = gnet_forward(model, _sample())
    assert np.array_equal(r1.data, r2.data)
    assert np.array_equal(p1.data, p2.data)
    assert np.array_equal(l1.z.data, l1.mu.data)


def test_train_forward_draws_noise_from_the_given_rng():
    model = GNetModel(_small_config(), seed=1)
    s = _sample()
    r1, _, l1 = gnet_forward(model, s, mode="train", rng=np.random.default_rng(4))
    r2, _, l2 = gnet_forward(model, s, mode="train", rng=np.random.default_rng(4))
    r3, _, l3 = gnet_forward(model, s, mode="train", rng=np.random.default_rng(5))
    assert np.array_equal(l1.z.data, l2.z.data)
    assert np.array_equal(r1.data, r2.data)
    assert not np.array_equal(l1.z.data, l3.z.data)


def test_disabled_heads_return_none():
    rec = GNetModel(_small_config(enable_prediction=False))
    logp_r, logp_p, _ = gnet_forward(rec, _sample())
    assert logp_r is not None and logp_p is None
    pred = GNetModel(_small_config(enable_recognition=False))
    logp_r, logp_p, _ = gnet_forward(pred, _sample())
    assert logp_r is None and logp_p is not None


def test_forward_rejects_node_classes_beyond_d_in():
    model = GNetModel(_small_config(d_in=2))
    with pytest.raises(ConfigError, match="d_in=2"):
        gnet_forward(model, _sample(classes=(0, 1, 2)))


def test_forward_is_invariant_to_node_relabeling():
    model = GNetModel(_small_config(), seed=2)
    classes = (0, 1, 2, 1)
    edges = ((0, 1), (1, 2), (2, 3))
    base_r, base_p, _ = gnet_forward(model, _sample(classes=classes, edges=edges))

    perm = [2, 0, 3, 1]  # new position of each old node
    inv = {old: new for new, old in enumerate(np.argsort(perm))}
    new_classes = tuple(classes[old] for old in np.argsort(perm))
    new_edges = tuple((inv[a], inv[b]) for a, b in edges)
    perm_r, perm_p, _ = gnet_forward(
        model, _sample(classes=new_classes, edges=new_edges)
    )
    np.testing.assert_allclose(perm_r.data, base_r.data, atol=1e-10)
    np.testing.assert_allclose(perm_p.data, base_p.data, atol=1e-10)


# -- loss --------------------------------------------------------------------------


def test_loss_is_exactly_the_selected_neg_log_prob():
    logp = constant(np.log([[0.2, 0.5, 0.3]]))
    loss = gnet_loss(logp, None, (1, 0), _uniform_latent())
    assert loss.item() == -logp.data[0, 1]


def test_near_certain_correct_prediction_has_near_zero_loss():
    p = np.full((1, 4), 1e-8)
    p[0, 2] = 1.0 - 3e-8
    logp = constant(np.log(p))
    loss = gnet_loss(logp, logp, (2, 2), _uniform_latent())
    assert 0 < loss.item() < 1e-6


def test_uniform_heads_give_two_log_c():
    c = 8
    logp = constant(np.full((1, c), -np.log(c)))
    loss = gnet_loss(logp, logp, (3, 5), _uniform_latent())
    assert loss.item() == pytest.approx(4.1588830833596719, abs=1e-9)


def test_kl_closed_form():
    assert kl_divergence(_uniform_latent()).item() == 0.0
    mu = constant([[1.0, 2.0]])
    lv = constant([[0.5, -0.3]])
    latent = LatentState(mu=mu, logvar=lv, z=mu)
    want = 0.5 * np.sum(np.exp(lv.data) + mu.data**2 - 1.0 - lv.data)
    assert kl_divergence(latent).item() == pytest.approx(want, abs=1e-15)


def test_kl_term_is_exactly_additive():
    rng = np.random.default_rng(0)
    mu = constant(rng.standard_normal((1, 6)))
    lv = constant(rng.standard_normal((1, 6)))
    latent = LatentState(mu=mu, logvar=lv, z=mu)
    logp = constant(np.log(np.full((1, 3), 1 / 3)))
    base = gnet_loss(logp, logp, (0, 1), latent, kl_weight=0.0).item()
    kl = kl_divergence(latent).item()
    for beta in (0.1, 1.0, 7.5):
        with_kl = gnet_loss(logp, logp, (0, 1), latent, kl_weight=beta).item()
        assert abs(with_kl - (base + beta * kl)) < 1e-12


def test_loss_with_one_head_disabled_is_that_heads_nll():
    logp = constant(np.log([[0.25, 0.75]]))
    latent = _uniform_latent(2)
    only_r = gnet_loss(logp, None, (0, 1), latent).item()
    only_p = gnet_loss(None, logp, (0, 1), latent).item()
    assert only_r == -np.log(0.25)
    assert only_p == -np.log(0.75)
    joint = gnet_loss(logp, logp, (0, 1), latent).item()
    assert joint == pytest.approx(only_r + only_p, abs=1e-15)


def test_loss_validation():
    with pytest.raises(ValueError, match="at least one head"):
        gnet_loss(None, None, (0, 0), _uniform_latent())
    logp = constant(np.log([[0.5, 0.5]]))
    with pytest.raises(ValueError, match="out of range"):
        gnet_loss(logp, None, (2, 0), _uniform_latent())


def test_loss_backward_reaches_every_parameter():
    # three readout steps: the LSTM starts from a zero state, so its
    # recurrent and forget-gate weights first see gradient at step 3
    model = GNetModel(_small_config(set2set_steps=3), seed=3)
    s = _sample()
    logp_r, logp_p, latent = gnet_forward(
        model, s, mode="train", rng=np.random.default_rng(0)
    )
    loss = gnet_loss(
        logp_r, logp_p, (s.recognition_label, s.prediction_label), latent, kl_weight=0.1
    )
    loss.backward()
    for path, value in model.params.items():
        assert np.any(value.grad != 0.0), f"no gradient reached {path}"


# -- prediction --------------------------------------------------------------------


def test_predict_matches_forward_argmax():
    model = GNetModel(_small_config(), seed=4)
    s = _sample()
    logp_r, logp_p, _ = gnet_forward(model, s)
    pred = predict(model, s)
    assert pred.recognition_label == int(np.argmax(logp_r.data[0]))
    assert pred.prediction_label == int(np.argmax(logp_p.data[0]))
    assert pred.recognition_confidence == pytest.approx(
        float(np.exp(logp_r.data[0]).max()), abs=1e-15
    )


def test_predict_breaks_exact_ties_toward_the_lowest_label():
    model = GNetModel(_small_config(), seed=0)
    zeros = {path: np.zeros_like(arr) for path, arr in model.params.arrays().items()}
    model.params.load_arrays(zeros)  # all-zero net emits exactly uniform heads
    pred = predict(model, _sample())
    assert pred.recognition_label == 0
    assert pred.prediction_label == 0
    assert pred.recognition_confidence == pytest.approx(1 / 3, abs=1e-12)


def test_predict_single_branch_model_returns_none_for_the_other():
    model = GNetModel(_small_config(enable_prediction=False), seed=0)
    pred = predict(model, _sample())
    assert pred.prediction_label is None
    assert pred.prediction_confidence is None
    assert pred.recognition_label is not None
