import json

import numpy as np
import pytest

from forestrules.errors import DataError, ModelFormatError, ModelValidationError
from forestrules.model import (
    DecisionTreeModel,
    EnsembleModel,
    FeatureDecl,
    FeatureSpace,
    TreeNode,
    load_dataset,
    load_model,
    model_digest,
    model_to_dict,
    predict_ensemble,
    save_dataset,
    save_model,
)


def test_space_invariants():
    with pytest.raises(ModelValidationError):
        FeatureSpace((FeatureDecl("a"), FeatureDecl("a")), ("x", "y"))
    with pytest.raises(ModelValidationError):
        FeatureSpace((FeatureDecl("a"),), ("only",))
    with pytest.raises(ModelValidationError):
        FeatureDecl("", "numeric")
    with pytest.raises(ModelValidationError):
        FeatureDecl("n", "nominal", ())
    with pytest.raises(ModelValidationError):
        FeatureDecl("n", "nominal", ("a", "a"))
    with pytest.raises(ModelValidationError):
        FeatureDecl("n", "numeric", ("a",))


def test_toy_tree_predictions(toy_tree_model):
    votes, cls = predict_ensemble(toy_tree_model, [0.0, 0.0])  # fails the root test
    assert np.array_equal(votes, [0, 6])
    assert cls == 1
    votes, cls = predict_ensemble(toy_tree_model, [7.0, 3.0])  # passes both
    assert np.array_equal(votes, [3, 1])
    assert cls == 0
    votes, cls = predict_ensemble(toy_tree_model, [7.0, 0.0])
    assert np.array_equal(votes, [2, 1])
    assert cls == 0


def test_two_identical_trees_double_votes(toy_tree_model):
    doubled = EnsembleModel(toy_tree_model.space, toy_tree_model.trees * 2)
    for x in ([0.0, 0.0], [7.0, 3.0], [7.0, 0.0]):
        v1, c1 = predict_ensemble(toy_tree_model, x)
        v2, c2 = predict_ensemble(doubled, x)
        assert np.array_equal(v2, 2 * v1)
        assert c1 == c2


def test_weight_scaling_keeps_argmax(toy_tree_model):
    tree = toy_tree_model.trees[0]
    scaled = EnsembleModel(
        toy_tree_model.space,
        (DecisionTreeModel(tree.nodes, tree.root, weight=3.5, oob_accuracy=tree.oob_accuracy),),
    )
    rng = np.random.default_rng(0)
    for x in rng.uniform(-5, 10, size=(50, 2)):
        v1, c1 = predict_ensemble(toy_tree_model, x)
        v2, c2 = predict_ensemble(scaled, x)
        assert np.allclose(v2, 3.5 * v1)
        assert c1 == c2


def test_argmax_tie_breaks_to_lowest_index(two_feature_space):
    leaf = TreeNode(0, [4, 4])
    model = EnsembleModel(two_feature_space, (DecisionTreeModel({0: leaf}, 0),))
    _, cls = predict_ensemble(model, [0.0, 0.0])
    assert cls == 0


def test_single_leaf_model_valid(two_feature_space, tmp_path):
    leaf = TreeNode(0, [1, 0])
    model = EnsembleModel(two_feature_space, (DecisionTreeModel({0: leaf}, 0),))
    path = tmp_path / "m.json"
    save_model(model, path)
    back = load_model(path)
    for x in ([0, 0], [100, -3]):
        assert predict_ensemble(back, x)[1] == 0


def test_model_round_trip(toy_tree_model, tmp_path):
    path = tmp_path / "m.json"
    save_model(toy_tree_model, path)
    back = load_model(path)
    assert model_to_dict(back) == model_to_dict(toy_tree_model)
    assert model_digest(back) == model_digest(toy_tree_model)


def test_load_rejects_bad_counts(toy_tree_model, tmp_path):
    doc = model_to_dict(toy_tree_model)
    # make the root's counts disagree with its children
    for node in doc["trees"][0]["nodes"]:
        if node["id"] == 0:
            node["counts"] = [5, 9]
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(ModelValidationError, match="node 0"):
        load_model(path)


def test_load_rejects_cycles_and_orphans(toy_tree_model, tmp_path):
    doc = model_to_dict(toy_tree_model)
    for node in doc["trees"][0]["nodes"]:
        if node["id"] == 2:
            node["right"] = 0  # points back at the root
    path = tmp_path / "cycle.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(ModelValidationError):
        load_model(path)


def test_load_rejects_garbage(tmp_path):
    path = tmp_path / "junk.json"
    path.write_text("{not json")
    with pytest.raises(ModelFormatError):
        load_model(path)
    path.write_text('{"schema_version": 99}')
    with pytest.raises(ModelFormatError):
        load_model(path)


def test_nominal_split_round_trip(tmp_path):
    space = FeatureSpace(
        (FeatureDecl("color", "nominal", ("red", "green", "blue")),),
        ("a", "b"),
    )
    nodes = {
        0: TreeNode(0, [3, 3], feature=0, categories=frozenset({0, 2}), left=1, right=2),
        1: TreeNode(1, [0, 3]),
        2: TreeNode(2, [3, 0]),
    }
    model = EnsembleModel(space, (DecisionTreeModel(nodes, 0),))
    path = tmp_path / "nom.json"
    save_model(model, path)
    back = load_model(path)
    assert predict_ensemble(back, [0.0])[1] == 0  # red goes right
    assert predict_ensemble(back, [1.0])[1] == 1  # green goes left


def test_predict_deterministic(diabetes_forest, diabetes_split):
    _, test = diabetes_split
    x = test.X[0]
    first = predict_ensemble(diabetes_forest, x)
    second = predict_ensemble(diabetes_forest, x)
    assert np.array_equal(first[0], second[0]) and first[1] == second[1]


# ---------------------------------------------------------------------------
# dataset CSV loading

def _space8():
    names = ["preg", "plas", "pres", "skin", "insu", "mass", "pedi", "age"]
    return FeatureSpace(tuple(FeatureDecl(n) for n in names), ("negative", "positive"))


def test_load_diabetes_csv():
    space = _space8()
    data = load_dataset("data/synthetic_diabetes.csv", space, label="class")
    assert data.n_rows == 768
    assert data.X.shape == (768, 8)
    assert set(np.unique(data.labels)) == {0, 1}


def test_header_only_csv(tmp_path):
    space = _space8()
    path = tmp_path / "empty.csv"
    path.write_text("preg,plas,pres,skin,insu,mass,pedi,age\n")
    data = load_dataset(path, space)
    assert data.n_rows == 0


def test_short_row_reports_row_number(tmp_path):
    space = _space8()
    path = tmp_path / "short.csv"
    path.write_text(
        "preg,plas,pres,skin,insu,mass,pedi,age\n"
        "1,2,3,4,5,6,7,8\n"
        "1,2,3,4,5,6,7\n"
    )
    with pytest.raises(DataError, match="row 3"):
        load_dataset(path, space)


def test_unknown_column_rejected(tmp_path):
    space = _space8()
    path = tmp_path / "extra.csv"
    path.write_text("preg,plas,pres,skin,insu,mass,pedi,age,bogus\n")
    with pytest.raises(DataError, match="bogus"):
        load_dataset(path, space)


def test_non_numeric_token_reported(tmp_path):
    space = _space8()
    path = tmp_path / "tok.csv"
    path.write_text("preg,plas,pres,skin,insu,mass,pedi,age\n1,x,3,4,5,6,7,8\n")
    with pytest.raises(DataError, match="row 2.*plas"):
        load_dataset(path, space)


def test_nominal_out_of_vocabulary(tmp_path):
    space = FeatureSpace(
        (FeatureDecl("color", "nominal", ("red", "green")),),
        ("a", "b"),
    )
    path = tmp_path / "oov.csv"
    path.write_text("color\nred\nmauve\n")
    with pytest.raises(DataError, match="row 3.*mauve"):
        load_dataset(path, space)


def test_dataset_round_trip(tmp_path, diabetes_data):
    path = tmp_path / "rt.csv"
    save_dataset(diabetes_data, path, label="class")
    back = load_dataset(path, diabetes_data.space, label="class")
    assert np.allclose(back.X, diabetes_data.X)
    assert np.array_equal(back.labels, diabetes_data.labels)
