"""Tests for the hinge trainers and the monotone descent solver."""

import numpy as np
import pytest

from corestream import (
    DataBlock,
    LinearModel,
    RowTag,
    SampleSet,
    TrainParams,
    decision,
    decisions,
    objective,
    train_binary,
    train_one_class,
)
from corestream.svm import (
    monotone_descent,
    one_class_objective,
    one_class_subgradient,
)


def as_sample(rows: np.ndarray, n: int | None = None) -> SampleSet:
    block = DataBlock(rows)
    tags = tuple(RowTag(level=-1, row=i) for i in range(block.rows))
    return SampleSet(rows=block, tags=tags, n=n or block.rows, points_seen=block.rows)


def clustered_rows(count: int, dim: int, seed: int, spread: float = 0.05):
    rng = np.random.default_rng(seed)
    center = np.abs(rng.standard_normal(dim))
    center /= np.linalg.norm(center)
    return center, center + spread * rng.standard_normal((count, dim))


def test_linear_model_validation():
    with pytest.raises(ValueError):
        LinearModel(w=np.ones((2, 2)), b=0.0, threshold=0.0)
    with pytest.raises(ValueError):
        LinearModel(w=np.array([1.0, np.nan]), b=0.0, threshold=0.0)
    with pytest.raises(ValueError):
        LinearModel(w=np.ones(2), b=float("inf"), threshold=0.0)
    model = LinearModel(w=np.array([1.0, 2.0]), b=0.5, threshold=0.1)
    assert model.dim == 2
    with pytest.raises(ValueError):
        model.w[0] = 9.0


def test_train_params_validation():
    for bad in (
        dict(regularization=0.0),
        dict(iterations=0),
        dict(step_size=0.0),
        dict(nu=0.0),
        dict(nu=1.5),
    ):
        with pytest.raises(ValueError):
            TrainParams(**bad)
    assert TrainParams(nu=1.0).nu == 1.0


def test_decision_and_decisions_agree():
    model = LinearModel(w=np.array([2.0, -1.0]), b=0.25, threshold=0.0)
    rows = np.array([[1.0, 1.0], [0.0, 3.0]])
    batch = decisions(model, rows)
    assert batch[0] == pytest.approx(decision(model, rows[0]))
    assert batch[1] == pytest.approx(decision(model, rows[1]))
    assert batch[0] == pytest.approx(1.25)
    with pytest.raises(ValueError):
        decision(model, np.ones(3))
    with pytest.raises(ValueError):
        decisions(model, np.ones((2, 3)))


def test_monotone_descent_on_a_quadratic():
    obj = lambda x: float((x[0] - 3.0) ** 2)
    grad = lambda x: np.array([2.0 * (x[0] - 3.0)])
    x, path = monotone_descent(np.zeros(1), obj, grad, iterations=100, step_size=1.0)
    assert abs(x[0] - 3.0) < 1e-6
    assert len(path) == 101
    for earlier, later in zip(path, path[1:]):
        assert later <= earlier + 1e-12


def test_monotone_descent_never_accepts_a_worse_point():
    # A hostile objective: the gradient points uphill, so every proposal
    # is worse and the solver must keep the starting point.
    obj = lambda x: float(x[0])
    grad = lambda x: np.array([-1.0])
    x, path = monotone_descent(np.zeros(1), obj, grad, iterations=5, step_size=1.0)
    assert x[0] == 0.0
    assert path == [0.0] * 6


def test_one_class_subgradient_matches_finite_differences():
    rng = np.random.default_rng(3)
    rows = rng.standard_normal((25, 6))
    reg = 1e-3
    h = 1e-6
    for _ in range(10):
        w = rng.standard_normal(6)
        if np.any(np.abs(rows @ w - 1.0) < 1e-4):
            continue  # stay away from hinge kinks
        g = one_class_subgradient(w, rows, reg)
        fd = np.zeros(6)
        for j in range(6):
            e = np.zeros(6)
            e[j] = h
            fd[j] = (
                one_class_objective(w + e, rows, reg)
                - one_class_objective(w - e, rows, reg)
            ) / (2 * h)
        assert np.max(np.abs(fd - g)) < 1e-5


def test_train_one_class_aligns_with_the_cluster():
    center, rows = clustered_rows(30, 8, seed=0)
    model = train_one_class(as_sample(rows), TrainParams())
    assert model.b == 0.0
    cos = float(model.w @ center) / np.linalg.norm(model.w)
    assert cos > 0.99
    scores = decisions(model, rows)
    assert np.min(scores) > 0.9  # all rows pushed past the margin


def test_one_class_threshold_keeps_the_agreed_fraction():
    center, rows = clustered_rows(40, 8, seed=1, spread=0.2)
    for nu in (0.25, 0.5, 0.9):
        model = train_one_class(as_sample(rows), TrainParams(nu=nu))
        scores = decisions(model, rows)
        at_or_above = int(np.sum(scores >= model.threshold))
        assert at_or_above >= int(np.ceil((1.0 - nu) * len(rows)))
        # The cut sits just below an actual training score, never on it.
        ordered = np.sort(scores)
        idx = min(len(ordered) - 1, int(np.floor(nu * len(ordered))))
        assert model.threshold < ordered[idx]
        assert ordered[idx] - model.threshold < 1e-6 * (1.0 + abs(ordered[idx]))


def test_training_a_rescored_row_cannot_fall_below_threshold():
    # Exact duplicates make every score identical, the hardest case for
    # a quantile cut: rescoring the same rows must keep them all.
    row = np.abs(np.random.default_rng(5).standard_normal(6))
    rows = np.tile(row, (10, 1))
    model = train_one_class(as_sample(rows), TrainParams(nu=0.5))
    scores = decisions(model, rows)
    assert np.all(scores >= model.threshold)


def test_train_one_class_deterministic():
    _, rows = clustered_rows(20, 5, seed=2)
    a = train_one_class(as_sample(rows), TrainParams())
    b = train_one_class(as_sample(rows), TrainParams())
    assert np.array_equal(a.w, b.w)
    assert a.threshold == b.threshold


def test_train_binary_separates_separable_data():
    rng = np.random.default_rng(4)
    direction = rng.standard_normal(5)
    direction /= np.linalg.norm(direction)
    pos = 3.0 * direction + 0.3 * rng.standard_normal((25, 5))
    neg = -3.0 * direction + 0.3 * rng.standard_normal((25, 5))
    model = train_binary(as_sample(pos), as_sample(neg), TrainParams())
    assert model.threshold == 0.0
    assert np.all(decisions(model, pos) > 0.0)
    assert np.all(decisions(model, neg) < 0.0)


def test_train_binary_dimension_mismatch():
    with pytest.raises(ValueError):
        train_binary(
            as_sample(np.ones((2, 3))), as_sample(np.ones((2, 4))), TrainParams()
        )


def test_objective_helper_matches_direct_evaluation():
    _, rows = clustered_rows(15, 4, seed=6)
    sample = as_sample(rows)
    params = TrainParams()
    model = train_one_class(sample, params)
    want = one_class_objective(model.w, rows, params.regularization)
    assert objective(model, sample, params) == pytest.approx(want, rel=1e-12)
