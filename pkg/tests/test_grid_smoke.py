"""Pixel-grid smoke test on a ten-class digit task.

Exercises the full multiclass pipeline (search, per-class profiling, grid
rendering) and writes the pixmaps; whether the images *look* like their
digits is a manual, non-blocking check — run with ``--basetemp`` or see
the README for how to render them from the CLI.
"""

import numpy as np
import pytest

import forestrules as fr
from forestrules.model import Dataset, FeatureDecl, FeatureSpace
from forestrules.optimize import PsoConfig, default_pro_bounds
from forestrules.profiles import render_profile_grid

sklearn_datasets = pytest.importorskip("sklearn.datasets")


@pytest.fixture(scope="module")
def digit_task():
    digits = sklearn_datasets.load_digits()
    space = FeatureSpace(
        tuple(FeatureDecl(f"p{i}") for i in range(64)),
        tuple(f"d{i}" for i in range(10)),
    )
    data = Dataset(space, digits.data.astype(float), digits.target.astype(np.int64))
    train, test = fr.split_dataset(data, 0.2, seed=1)
    model = fr.train_forest(train, fr.TrainConfig(n_trees=25, max_depth=8, seed=2))
    return model, train, test


def test_digit_profiles_render_as_grids(digit_task, tmp_path):
    model, train, test = digit_task
    rules = fr.extract_rules(model)
    pso = PsoConfig(
        bounds=default_pro_bounds(10), n_particles=15, n_iterations=15, seed=0, integer_dims=(3,)
    )
    try:
        expl, _ = fr.pro_explain_params(model, test, pso=pso, rules=rules)
    except fr.InfeasibleSearchError:
        pytest.skip("ten-class coverage not found at this budget; non-blocking")

    profiles = fr.build_profile(expl)
    assert [p.class_index for p in profiles] == list(range(10))

    ranges = np.column_stack([train.X.min(axis=0), train.X.max(axis=0)])
    header = b"P6\n8 8\n255\n"
    for p in profiles:
        assert 1 <= len(p.conjuncts) <= 64
        buf = render_profile_grid(p, 8, 8, model.space, ranges)
        assert buf.startswith(header)
        assert len(buf) == len(header) + 64 * 3
        (tmp_path / f"digit_{p.class_index}.ppm").write_bytes(buf)

    # every profile must paint at least a few strokes over the background
    painted = [
        sum(c.lo > ranges[c.feature][0] or c.hi < np.inf for c in p.conjuncts)
        for p in profiles
    ]
    assert all(v >= 3 for v in painted)
