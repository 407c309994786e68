import numpy as np
import pytest

import forestrules as fr
from forestrules.datasets import synthetic_diabetes
from forestrules.model import DecisionTreeModel, EnsembleModel, FeatureDecl, FeatureSpace, TreeNode


@pytest.fixture(scope="session")
def two_feature_space():
    return FeatureSpace(
        (FeatureDecl("f0"), FeatureDecl("f1")),
        ("class0", "class1"),
    )


@pytest.fixture(scope="session")
def toy_tree_model(two_feature_space):
    """Two internal nodes, three leaves: (0,6), (2,1), (3,1).

    Root tests f0 >= 5; its right child tests f1 >= 2.  Instances failing
    the root go to the left leaf (0,6); passing both lands on (3,1).
    """
    nodes = {
        0: TreeNode(0, [5, 8], feature=0, threshold=5.0, left=1, right=2),
        1: TreeNode(1, [0, 6]),
        2: TreeNode(2, [5, 2], feature=1, threshold=2.0, left=3, right=4),
        3: TreeNode(3, [2, 1]),
        4: TreeNode(4, [3, 1]),
    }
    tree = DecisionTreeModel(nodes, root=0, weight=1.0, oob_accuracy=0.9)
    return EnsembleModel(two_feature_space, (tree,))


@pytest.fixture(scope="session")
def diabetes_data():
    return synthetic_diabetes()


@pytest.fixture(scope="session")
def diabetes_split(diabetes_data):
    return fr.split_dataset(diabetes_data, 100 / 768, seed=5)


@pytest.fixture(scope="session")
def diabetes_forest(diabetes_split):
    train, _ = diabetes_split
    return fr.train_forest(train, fr.TrainConfig(n_trees=100, seed=1))


@pytest.fixture(scope="session")
def diabetes_rules(diabetes_forest):
    return fr.extract_rules(diabetes_forest)


@pytest.fixture(scope="session")
def diabetes_simplifier(diabetes_rules, diabetes_forest):
    return fr.Simplifier(diabetes_rules, diabetes_forest)


@pytest.fixture(scope="session")
def small_forests():
    """Twenty small forests over varied synthetic tasks (some nominal)."""
    from forestrules.datasets import make_blobs

    forests = []
    for i in range(20):
        data = make_blobs(
            n_rows=120 + 10 * i,
            n_numeric=2 + i % 3,
            n_classes=2 + i % 3,
            n_nominal=i % 2,
            seed=100 + i,
        )
        config = fr.TrainConfig(n_trees=1 + i % 10, max_depth=1 + i % 6, seed=i)
        forests.append((fr.train_forest(data, config), data))
    return forests


def sample_points(space, n, seed, data=None):
    """Random instances inside (a bit beyond) the observed feature ranges."""
    rng = np.random.default_rng(seed)
    X = np.empty((n, space.n_features))
    for j, decl in enumerate(space.features):
        if decl.is_numeric:
            if data is not None:
                lo, hi = data.X[:, j].min(), data.X[:, j].max()
            else:
                lo, hi = -10.0, 10.0
            pad = 0.1 * (hi - lo) + 1e-9
            X[:, j] = rng.uniform(lo - pad, hi + pad, size=n)
        else:
            X[:, j] = rng.integers(0, len(decl.categories), size=n)
    return X
