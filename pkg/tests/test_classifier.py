import numpy as np
import pytest

from smifinger.classifier import (
    CLASSES,
    aggregate,
    evaluate,
    featurize,
    load_model,
    make_folds,
    run_protocol,
    save_model,
    train,
)
from smifinger.errors import InvalidInputError, TrainingError


def blobs(n_per_class, dim=8, sep=4.0, seed=0):
    rng = np.random.default_rng(seed)
    centers = rng.normal(0, sep, (3, dim))
    X = np.concatenate([c + rng.normal(size=(n_per_class, dim)) for c in centers])
    y = [lab for lab in CLASSES for _ in range(n_per_class)]
    return X, y


def test_aggregate_worked_example():
    rep = aggregate([(a, np.zeros((3, 3), int)) for a in (1, 0, 1, 0, 1)])
    assert rep.mean == pytest.approx(0.6)
    assert rep.std == pytest.approx(0.4899, abs=1e-4)  # population, not sample, deviation
    assert rep.formatted() == "0.60 ± 0.49"
    with pytest.raises(InvalidInputError):
        aggregate([(1.0, np.zeros((3, 3)))], k=5)


def test_folds_are_stratified_and_balanced():
    labels = ["empty"] * 50 + ["bolts"] * 50 + ["playdough"] * 50
    plan = make_folds(labels, 5, seed=3)
    a = np.asarray(plan.assignments)
    for fold in range(5):
        members = [labels[i] for i in np.flatnonzero(a == fold)]
        assert {c: members.count(c) for c in CLASSES} == dict.fromkeys(CLASSES, 10)
    tr, va = plan.indices(0)
    assert len(tr) == 120 and len(va) == 30 and not set(tr) & set(va)
    assert make_folds(labels, 5, seed=3) == plan
    with pytest.raises(InvalidInputError):
        make_folds(["empty"] * 3 + ["bolts"] * 10, 5)


def test_separable_data_is_learned():
    X, y = blobs(40)
    Xv, yv = blobs(20, seed=0)
    model = train(X, y, Xv, yv, epochs=10, seed=1)
    acc, confusion = evaluate(model, Xv, yv)
    assert acc == 1.0
    assert np.array_equal(confusion, np.diag([20, 20, 20]))
    assert len(model.history) == 10
    assert model.history[model.best_epoch - 1] == max(model.history)


def test_null_features_score_at_chance():
    # features independent of the labels: the oracle accuracy is 1/3
    rng = np.random.default_rng(5)
    X = rng.normal(size=(600, 10))
    y = [CLASSES[i] for i in rng.integers(0, 3, 600)]
    Xt = rng.normal(size=(3000, 10))
    yt = [CLASSES[i] for i in rng.integers(0, 3, 3000)]
    res = run_protocol(X, y, {"null": (Xt, yt)}, k=5, epochs=5, seed=0)
    assert res.tests["null"].mean == pytest.approx(1 / 3, abs=0.04)


def test_protocol_groups_pool_test_sets():
    X, y = blobs(20)
    a = blobs(5, seed=0)
    b = blobs(5, seed=0)
    res = run_protocol(X, y, {"a": a, "b": b}, groups={"ab": ["a", "b"]}, k=5, epochs=3, seed=2)
    assert res.groups["ab"].confusion.sum() == 5 * 30
    assert res.validation.mean == 1.0 and res.validation.std == 0.0
    assert len(res.models) == 5


def test_training_is_scale_invariant():
    X, y = blobs(20, seed=4)
    m1 = train(X, y, X, y, epochs=4, seed=0)
    m2 = train(1e6 * X + 3.0, y, 1e6 * X + 3.0, y, epochs=4, seed=0)
    np.testing.assert_array_equal(m1.predict(X), m2.predict(1e6 * X + 3.0))


def test_training_rejects_degenerate_inputs():
    y = ["empty", "bolts", "playdough"] * 3
    with pytest.raises(TrainingError):
        train(np.ones((9, 4)), y, np.ones((3, 4)), y[:3])
    with pytest.raises(InvalidInputError):
        train(np.random.default_rng(0).normal(size=(3, 2)), ["empty"] * 3, np.zeros((1, 2)), ["empty"])
    with pytest.raises(InvalidInputError):
        train(np.zeros((3, 2)), ["empty", "bolts", "marbles"], np.zeros((1, 2)), ["empty"])


def test_model_file_round_trip(tmp_path):
    X, y = blobs(10)
    model = train(X, y, X, y, epochs=3, seed=0, feature_spec={"n_mels": 128})
    path = tmp_path / "m.smfm"
    save_model(model, path)
    back = load_model(path)
    assert back.classes == model.classes and back.best_epoch == model.best_epoch
    assert back.feature_spec == {"n_mels": 128} and back.history == model.history
    np.testing.assert_array_equal(back.scores(X), model.scores(X))
    bad = tmp_path / "bad.smfm"
    bad.write_bytes(b"NOTAMODEL" + path.read_bytes()[9:])
    with pytest.raises(InvalidInputError):
        load_model(bad)


def test_featurize_properties():
    rng = np.random.default_rng(0)
    v = rng.normal(size=(50, 6))
    f = featurize(v)
    assert f.shape == (12,)
    np.testing.assert_allclose(featurize(v[rng.permutation(50)]), f)  # frame order is pooled away
    const = featurize(np.full((10, 4), 2.5))
    np.testing.assert_array_equal(const, [2.5] * 4 + [0.0] * 4)
    with pytest.raises(InvalidInputError):
        featurize(np.zeros((0, 4)))


def test_small_classes_give_one_per_fold():
    labels = [c for c in CLASSES for _ in range(5)]
    plan = make_folds(labels, 5, seed=0)
    for fold in range(5):
        _, va = plan.indices(fold)
        assert sorted(labels[i] for i in va) == sorted(CLASSES)


def test_two_class_separable_toy_set():
    # Gaussian classes 10 sigma apart along one axis: margin well above 5 sigma
    rng = np.random.default_rng(7)
    X = np.concatenate([rng.normal(size=(40, 3)), rng.normal(size=(40, 3)) + [10.0, 0, 0]])
    y = ["a"] * 40 + ["b"] * 40
    model = train(X[::2], y[::2], X[1::2], y[1::2], epochs=10, seed=0, classes=("a", "b"))
    assert max(model.history) == 1.0
    assert evaluate(model, X[1::2], y[1::2])[0] == 1.0


def test_permuted_labels_fall_to_chance():
    X, y = blobs(50, seed=8)
    shuffled = list(np.random.default_rng(9).permutation(y))
    res = run_protocol(X, shuffled, {}, k=5, epochs=10, seed=0)
    assert res.validation.mean == pytest.approx(1 / 3, abs=0.15)


def test_training_is_deterministic():
    X, y = blobs(15, seed=2)
    a = train(X, y, X, y, epochs=5, seed=11)
    b = train(X, y, X, y, epochs=5, seed=11)
    assert np.array_equal(a.weights, b.weights) and np.array_equal(a.bias, b.bias)


def test_evaluate_examples():
    X, y = blobs(10)
    model = train(X, y, X, y, epochs=1, seed=0)
    model.weights[:] = 0.0
    model.bias[:] = [0.0, 1.0, 0.0]  # always "bolts"
    acc, confusion = evaluate(model, X, y)
    assert acc == pytest.approx(1 / 3)
    assert confusion.sum() == 30 and np.array_equal(confusion[:, 1], [10, 10, 10])


def test_aggregate_boundaries():
    z = np.zeros((3, 3), int)
    assert aggregate([(1.0, z)] * 5).formatted() == "1.00 ± 0.00"
    assert aggregate([(0.0, z)] * 5).formatted() == "0.00 ± 0.00"


def test_feature_dimension_for_default_mel():
    assert featurize(np.zeros((1098, 128))).shape == (256,)
