import random
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from botsieve.forest import (
    LEAF, DatasetTooSmall, DecisionTree, ForestModel, ForestParams, LabeledDataset,
    SingleClassTraining, evaluate, predict, split_train_test, train_forest,
)

LENGTH = 2


def _dataset(n, label_fn, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.uniform(0, 200, size=(n, 8))
    y = np.array([label_fn(row) for row in X])
    return LabeledDataset(X, y, "toy")


def _stump(threshold=100.0, left=(5, 0), right=(0, 5)):
    """Single split on payload length: left leaf gets ``left`` counts, right leaf ``right``."""
    return DecisionTree([LENGTH, LEAF, LEAF], [threshold, 0.0, 0.0], [1, -1, -1], [2, -1, -1],
                        [0, left[0], right[0]], [0, left[1], right[1]])


def _row(length):
    x = [0.0] * 8
    x[LENGTH] = length
    return x


def test_split_sizes_and_determinism():
    data = _dataset(10_000, lambda r: int(r[0] > 100))
    train, test = split_train_test(data, 0.8, seed=4)
    assert (len(train), len(test)) == (8000, 2000)
    again, _ = split_train_test(data, 0.8, seed=4)
    assert np.array_equal(train.X, again.X)
    other, _ = split_train_test(data, 0.8, seed=5)
    assert not np.array_equal(train.X, other.X)


def test_split_too_small():
    with pytest.raises(DatasetTooSmall):
        split_train_test(_dataset(9, lambda r: 0), 0.8, 0)


def test_separable_toy_set():
    data = _dataset(200, lambda r: int(r[LENGTH] > 100), seed=2)
    model = train_forest(data, n_trees=10, seed=1)
    assert evaluate(model, data).accuracy == 1.0


def test_same_seed_same_bytes():
    data = _dataset(300, lambda r: int(r[0] + r[3] > 200), seed=3)
    a = train_forest(data, n_trees=8, seed=9).dumps()
    b = train_forest(data, n_trees=8, seed=9).dumps()
    assert a == b
    assert train_forest(data, n_trees=8, seed=10).dumps() != a


def test_single_class_training():
    data = _dataset(50, lambda r: 0)
    with pytest.warns(SingleClassTraining):
        model = train_forest(data, n_trees=5)
    assert model.single_class
    rng = np.random.default_rng(0)
    assert all(predict(model, x) == 0 for x in rng.uniform(-1e6, 1e6, size=(100, 8)))


def test_stump_sides():
    model = ForestModel([_stump()])
    assert predict(model, _row(50)) == 0
    assert predict(model, _row(100)) == 0
    assert predict(model, _row(150)) == 1


def test_tie_vote_goes_infected():
    model = ForestModel([_stump(), _stump(left=(0, 5), right=(5, 0))])
    assert predict(model, _row(10)) == 1 and predict(model, _row(190)) == 1
    assert model.predict_many(np.array([_row(10), _row(190)])).tolist() == [1, 1]


def test_leaf_tie_goes_infected():
    assert ForestModel([_stump(left=(3, 3))]).predict(_row(0)) == 1


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.randoms(use_true_random=False))
def test_vote_invariant_to_tree_order(seed, rnd):
    data = _dataset(120, lambda r: int(r[1] > 60 and r[5] < 150), seed=seed % 1000)
    model = train_forest(data, n_trees=6, max_depth=4, seed=seed)
    trees = list(model.trees)
    rnd.shuffle(trees)
    shuffled = ForestModel(trees, model.params)
    probe = np.random.default_rng(seed).uniform(0, 200, size=(30, 8))
    assert model.predict_many(probe).tolist() == shuffled.predict_many(probe).tolist()
    assert [predict(model, x) for x in probe] == model.predict_many(probe).tolist()


def test_roundtrip(small_forest, labeled_2k, tmp_path):
    small_forest.save(tmp_path / "f.json")
    loaded = ForestModel.load(tmp_path / "f.json")
    assert loaded.dumps() == small_forest.dumps()
    assert np.array_equal(loaded.predict_many(labeled_2k.X), small_forest.predict_many(labeled_2k.X))


def test_load_rejects_corruption():
    good = ForestModel([_stump()]).to_dict()
    with pytest.raises(ValueError):
        ForestModel.from_dict({**good, "magic": "x"})
    bad_tree = dict(good["trees"][0], left=[7, -1, -1])
    with pytest.raises(ValueError):
        ForestModel.from_dict({**good, "trees": [bad_tree]})


def test_params_validation():
    with pytest.raises(ValueError):
        ForestParams(n_trees=0)
    with pytest.raises(ValueError):
        ForestParams(max_features=9)


def test_depth_limit_respected():
    data = _dataset(400, lambda r: random.Random(int(r[0] * 1000)).randint(0, 1), seed=5)
    model = train_forest(data, n_trees=3, max_depth=2, seed=0)

    def depth(t, i=0):
        return 0 if t.feature[i] == LEAF else 1 + max(depth(t, t.left[i]), depth(t, t.right[i]))

    assert all(depth(t) <= 2 for t in model.trees)


def test_min_samples_leaf_respected():
    data = _dataset(300, lambda r: int(r[4] > 150), seed=6)
    model = train_forest(data, n_trees=4, min_samples_leaf=7, seed=0)
    for t in model.trees:
        for i, f in enumerate(t.feature):
            if f == LEAF:
                assert t.count0[i] + t.count1[i] >= 7


def test_real_features(small_forest, labeled_2k):
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        r = evaluate(small_forest, labeled_2k)
    assert r.accuracy > 0.95
