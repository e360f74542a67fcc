import numpy as np
import pytest

from utils.dataset import NUMERIC, Attribute, Dataset, Schema
from utils.errors import ConfigError, SchemaMismatchError, TrainerError
from utils.models import (
    DECISION_TREE,
    LOGISTIC_REGRESSION,
    RANDOM_FOREST,
    ConstantModel,
    FeatureEncoder,
    TrainerSpec,
    TreeModel,
    gini,
    load_model,
    save_model,
    softmax_loss_and_grad,
    train,
)


def test_aliases_resolve():
    assert TrainerSpec("logreg").kind == LOGISTIC_REGRESSION
    assert TrainerSpec("forest").kind == RANDOM_FOREST
    assert TrainerSpec("tree").kind == DECISION_TREE


def test_unknown_model():
    with pytest.raises(ConfigError):
        TrainerSpec("svm")


def test_unknown_or_bad_params():
    with pytest.raises(ConfigError):
        TrainerSpec("tree", {"depth": 3})
    with pytest.raises(ConfigError):
        TrainerSpec("tree", {"max_depth": 0})


def test_defaults_are_filled_in():
    spec = TrainerSpec("forest", {"n_trees": 3})
    assert spec.params["n_trees"] == 3
    assert spec.params["max_depth"] >= 1


def test_one_hot_encoding(mixed_schema, mixed_data):
    enc = FeatureEncoder(mixed_schema)
    assert enc.width == 5
    F = enc.transform(mixed_data.X)
    np.testing.assert_array_equal(F[0], [25.0, 30.0, 1.0, 0.0, 0.0])
    np.testing.assert_array_equal(F[2, 2:], [0.0, 0.0, 1.0])


def test_gini():
    assert gini(np.array([5.0, 5.0])) == pytest.approx(0.5)
    assert gini(np.array([4.0, 0.0])) == 0.0
    assert gini(np.array([0.0, 0.0])) == 0.0


def test_softmax_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(8, 3))
    Y = np.eye(3)[rng.integers(0, 3, size=8)]
    W = rng.normal(size=(3, 3))
    b = rng.normal(size=3)
    _, gW, gb = softmax_loss_and_grad(W, b, X, Y, l2=0.1)
    h = 1e-6
    for i in range(3):
        for j in range(3):
            Wp, Wm = W.copy(), W.copy()
            Wp[i, j] += h
            Wm[i, j] -= h
            numeric = (softmax_loss_and_grad(Wp, b, X, Y, 0.1)[0] - softmax_loss_and_grad(Wm, b, X, Y, 0.1)[0]) / (2 * h)
            assert gW[i, j] == pytest.approx(numeric, abs=1e-6)
    for j in range(3):
        bp, bm = b.copy(), b.copy()
        bp[j] += h
        bm[j] -= h
        numeric = (softmax_loss_and_grad(W, bp, X, Y, 0.1)[0] - softmax_loss_and_grad(W, bm, X, Y, 0.1)[0]) / (2 * h)
        assert gb[j] == pytest.approx(numeric, abs=1e-6)


@pytest.mark.parametrize("kind", ["logreg", "tree", "forest"])
def test_learns_a_threshold(kind, line_data):
    model = train(TrainerSpec(kind), line_data, seed=0)
    accuracy = np.mean(model.predict_dataset(line_data) == line_data.y)
    assert accuracy >= 0.9


def test_tree_is_exact_on_a_threshold(line_data):
    model = train(TrainerSpec("tree"), line_data)
    assert isinstance(model, TreeModel)
    assert model.root.threshold == pytest.approx(9.5)
    assert len(model.paths()) == 2


def test_training_is_deterministic(blobs):
    for kind in ("logreg", "tree", "forest"):
        a = train(TrainerSpec(kind), blobs, seed=11)
        b = train(TrainerSpec(kind), blobs, seed=11)
        np.testing.assert_array_equal(a.predict_dataset(blobs), b.predict_dataset(blobs))


def test_single_class_gives_constant_model(line_schema):
    d = Dataset(line_schema, [[1.0], [2.0], [3.0]], [1, 1, 1])
    model = train(TrainerSpec("logreg"), d)
    assert isinstance(model, ConstantModel)
    assert model.predict(d.instance(0)) == "b"


def test_empty_dataset_fails(line_schema):
    with pytest.raises(TrainerError):
        train(TrainerSpec("tree"), Dataset.empty(line_schema))


def test_schema_mismatch(line_data):
    model = train(TrainerSpec("tree"), line_data)
    other = Schema((Attribute("z", NUMERIC),), "class", ("a", "b"))
    with pytest.raises(SchemaMismatchError):
        model.predict_dataset(Dataset(other, [[1.0]], [0]))


@pytest.mark.parametrize("kind", ["logreg", "tree", "forest"])
def test_persistence_keeps_predictions(kind, tmp_path, mixed_data):
    model = train(TrainerSpec(kind), mixed_data, seed=3)
    path = tmp_path / f"{kind}.json"
    save_model(model, path)
    loaded = load_model(path)
    assert loaded.kind == model.kind
    np.testing.assert_array_equal(loaded.predict_dataset(mixed_data), model.predict_dataset(mixed_data))


def test_unknown_format_version(tmp_path, line_data):
    path = tmp_path / "m.json"
    path.write_text('{"format_version": 99}', encoding="utf-8")
    with pytest.raises(SchemaMismatchError):
        load_model(path)
