import json
import math

import numpy as np
import pytest

import coal_lab


def small_model(seed=0):
    return coal_lab.Model(input_dim=3, layer_widths=[8, 6], num_classes=3, seed=seed)


def test_classify_shapes_and_simplex():
    model = small_model()
    x = np.random.default_rng(0).normal(size=(7, 3))
    probs, emb = model.classify(x)
    assert probs.shape == (7, 3)
    assert emb.shape == (7, 6)
    np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-12)
    assert list(model.predict(x)) == list(probs.argmax(axis=1))


def test_blocks_round_trip_and_shape_errors():
    model = small_model()
    name = model.block_names()[0]
    w = model.get_block(name)
    model.set_block(name, w * 2)
    np.testing.assert_array_equal(model.get_block(name), w * 2)
    with pytest.raises(coal_lab.DimensionError):
        model.set_block(name, np.zeros((1, 1)))
    with pytest.raises(coal_lab.UsageError):
        model.get_block("missing")


def test_errors_share_base_class():
    assert issubclass(coal_lab.ConfigError, coal_lab.CoalError)
    with pytest.raises(coal_lab.CoalError):
        coal_lab.per_class_mean_accuracy([0, 0], [0, 0], 2)


def test_minimax_gradient_routing():
    model = small_model(3)
    rng = np.random.default_rng(1)
    xs, xt = rng.normal(size=(6, 3)), rng.normal(size=(5, 3))
    ys = np.array([0, 1, 2, 0, 1, 2])
    pseudo, mask = np.zeros(5, dtype=np.int32), np.zeros(5, dtype=np.uint8)
    alpha = 0.1
    losses, grads = coal_lab.adaptive_objective(model, xs, ys, xt, pseudo, mask, alpha, pseudo=False)
    _, plain = coal_lab.adaptive_objective(model, xs, ys, xt, pseudo, mask, alpha, pseudo=False, entropy=False)
    _, naive = coal_lab.entropy_naive(model, xt)
    assert losses["alpha"] == alpha
    np.testing.assert_allclose(grads["classifier.prototypes"] - plain["classifier.prototypes"], -alpha * naive["classifier.prototypes"], atol=1e-12)
    first = model.block_names()[0]
    np.testing.assert_allclose(grads[first] - plain[first], alpha * naive[first], atol=1e-12)


def test_metric_examples():
    truth = [0] * 100 + [1] * 10
    pred = [0] * 90 + [1] * 10 + [0] * 9 + [1]
    assert coal_lab.per_class_mean_accuracy(truth, pred, 2) == pytest.approx(0.5)
    cm = coal_lab.confusion_matrix(truth, pred, 2)
    assert cm.tolist() == [[90, 10], [9, 1]]
    assert coal_lab.js_distance([1, 0], [0, 1]) == pytest.approx(math.sqrt(math.log(2)))


def test_shift_protocol():
    assert coal_lab.shift_counts(2, 1.0, 100, 100, "ut", 1)[0] > coal_lab.shift_counts(2, 1.0, 100, 100, "rs", 1)[0]
    counts = coal_lab.shift_counts(10, 1.0, 60, 1000)
    assert sum(counts) == 1000
    p = coal_lab.pareto_proportions(5, 1.0)
    assert all(a > b for a, b in zip(p, p[1:]))
    with pytest.raises(coal_lab.ProtocolError):
        coal_lab.shift_counts(10, 5.0, 100, 20, "ut", 2)


def test_top_k_selection():
    probs = np.array([[0.9, 0.1], [0.6, 0.4], [0.2, 0.8], [0.7, 0.3]])
    labels, conf, mask = coal_lab.select_top_k(probs, 50)
    assert labels == [0, 0, 1, 0]
    assert mask == [True, False, True, True]
    assert coal_lab.advance_k(5, 5, 30, 100) == 30


def test_projection():
    x = np.random.default_rng(2).normal(size=(20, 4))
    p = coal_lab.project_features_2d(x)
    assert p["coordinates"].shape == (20, 2)
    assert p["variances"][0] >= p["variances"][1]


def test_run_experiment_and_checkpoint(tmp_path):
    cfg = {
        "name": "py", "method": "coal", "epochs": 2, "pretrain_epochs": 2, "seed": 4,
        "model": {"layer_widths": [8, 4]},
        "data": {"synthetic": {"num_classes": 3, "per_class": 100, "noise": 0.5},
                 "shift": {"budget_source": 150, "budget_target": 150}},
    }
    report = coal_lab.run_experiment(cfg, str(tmp_path / "run"))
    again = coal_lab.run_experiment(cfg)
    assert report["metrics"] == again["metrics"]
    assert (tmp_path / "run" / "report.json").exists()
    table = coal_lab.render_table([report], "csv")
    assert table.startswith("method,d=100\ncoal,")
    model = coal_lab.load_checkpoint(str(tmp_path / "run" / "checkpoint.json"))
    assert model.num_classes == 3
    coal_lab.save_checkpoint(model, str(tmp_path / "copy.json"))
    copy = coal_lab.load_checkpoint(str(tmp_path / "copy.json"))
    for name in model.block_names():
        np.testing.assert_array_equal(model.get_block(name), copy.get_block(name))
    with pytest.raises(coal_lab.ConfigError):
        coal_lab.run_experiment(dict(cfg, bogus=1))
