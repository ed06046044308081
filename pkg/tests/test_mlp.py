from __future__ import annotations

import numpy as np

from shadowpipe.mlp import predict_mlp, train_mlp

# the defaults the bundled plan uses
HIDDEN, EPOCHS, LR, SEED = 16, 100, 1.0, 13


def test_linearly_separable_four_points_reach_full_train_accuracy():
    x = np.array([[1.0, 0.0], [0.9, 0.1], [0.0, 1.0], [0.1, 0.9]])
    y = np.array([1.0, 1.0, 0.0, 0.0])
    model = train_mlp(x, y, HIDDEN, EPOCHS, LR, SEED)
    assert list(predict_mlp(model, x)) == [1, 1, 0, 0]


def test_training_is_deterministic():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(40, 8))
    y = (x[:, 0] > 0).astype(float)
    a = train_mlp(x, y, HIDDEN, EPOCHS, LR, SEED)
    b = train_mlp(x, y, HIDDEN, EPOCHS, LR, SEED)
    assert a == b
    c = train_mlp(x, y, HIDDEN, EPOCHS, LR, seed=SEED + 1)
    assert a != c


def test_all_zero_vectors_predict_constant():
    x = np.zeros((10, 4))
    y = np.array([0, 1] * 5, dtype=float)
    model = train_mlp(x, y, HIDDEN, EPOCHS, LR, SEED)
    assert len(set(predict_mlp(model, x))) == 1


def test_single_class_training_collapses_to_that_class():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(20, 4))
    model = train_mlp(x, np.ones(20), HIDDEN, EPOCHS, LR, SEED)
    assert set(predict_mlp(model, x)) == {1}
