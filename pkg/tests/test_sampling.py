"""Tests for the bounded training-set builders."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from corestream import (
    CoresetTree,
    DataBlock,
    RAW_LEVEL,
    RowTag,
    SampleSet,
    hierarchical_sample,
    random_sample,
    root_sample,
    subsample,
)


def grown_tree(points: int, n: int, dim: int = 4, seed: int = 0) -> CoresetTree:
    tree = CoresetTree(n, dim)
    rng = np.random.default_rng(seed)
    for row in rng.standard_normal((points, dim)):
        tree.push_point(row)
    return tree


def test_sample_set_tag_count_must_match():
    rows = DataBlock(np.ones((2, 3)))
    with pytest.raises(ValueError):
        SampleSet(rows=rows, tags=(RowTag(0, 0),), n=2, points_seen=2)


def test_hierarchical_on_single_leaf_returns_the_leaf():
    n = 5
    tree = grown_tree(n, n)
    sample = hierarchical_sample(tree.snapshot())
    assert sample.rows.rows == n
    assert all(tag.level == 0 for tag in sample.tags)
    assert sample.points_seen == n
    assert sample.n == n


def test_hierarchical_pending_only():
    tree = grown_tree(3, 8)
    view = tree.snapshot()
    sample = hierarchical_sample(view)
    assert sample.rows.rows == 3
    assert all(tag.level == RAW_LEVEL for tag in sample.tags)
    assert np.array_equal(sample.rows.values, view.pending)


def test_hierarchical_pending_rows_come_first():
    n = 4
    tree = grown_tree(3 * n + 2, n)
    view = tree.snapshot()
    sample = hierarchical_sample(view)
    assert sample.tags[0].level == RAW_LEVEL
    assert sample.tags[1].level == RAW_LEVEL
    assert np.array_equal(sample.rows.values[:2], view.pending)
    assert sample.tags[2].level == view.nodes[-1].level


def test_hierarchical_quota_halves_per_level():
    # 7 leaves leave nodes at levels 2, 1, 0; with n = 4 the newest
    # node gives 4 rows, then 2, then 1.
    n = 4
    tree = grown_tree(7 * n, n)
    view = tree.snapshot()
    assert [node.level for node in view.nodes] == [2, 1, 0]
    sample = hierarchical_sample(view)
    per_level = {}
    for tag in sample.tags:
        per_level[tag.level] = per_level.get(tag.level, 0) + 1
    assert per_level[0] == 4
    assert per_level[1] == 2
    assert per_level[2] == 1
    # Rows are copied verbatim, newest node first.
    top = view.nodes[-1].summary.block.values
    assert np.array_equal(sample.rows.values[:4], top[:4])


def test_hierarchical_respects_hard_cap():
    n = 4
    tree = grown_tree(6 * n + 3, n)
    sample = hierarchical_sample(tree.snapshot())
    assert sample.rows.rows <= 2 * n


def test_hierarchical_empty_tree_raises():
    tree = CoresetTree(4, 2)
    with pytest.raises(ValueError):
        hierarchical_sample(tree.snapshot())


@settings(deadline=None, max_examples=40, derandomize=True)
@given(points=st.integers(1, 200), n=st.integers(2, 10), seed=st.integers(0, 50))
def test_hierarchical_bound_and_top_node_property(points, n, seed):
    tree = grown_tree(points, n, dim=3, seed=seed)
    view = tree.snapshot()
    sample = hierarchical_sample(view)
    assert sample.rows.rows <= 2 * n
    assert len(sample.tags) == sample.rows.rows
    if view.nodes:
        top = view.nodes[-1]
        want = {(top.level, j) for j in range(top.summary.block.rows)}
        got = {(t.level, t.row) for t in sample.tags}
        assert want <= got


def test_root_sample_is_the_collapse():
    n = 4
    tree = grown_tree(9 * n, n)
    view = tree.snapshot()
    sample = root_sample(view)
    assert sample.rows.rows <= n
    assert all(tag.level == view.nodes[0].level for tag in sample.tags)
    root = tree.root_collapse()
    assert np.array_equal(sample.rows.values, root.block.values)


def test_random_sample_returns_short_history_whole():
    history = DataBlock(np.arange(12.0).reshape(4, 3))
    sample = random_sample(history, n=10, seed=0)
    assert np.array_equal(sample.rows.values, history.values)
    assert [t.row for t in sample.tags] == [0, 1, 2, 3]
    assert sample.points_seen == 4


def test_random_sample_draws_distinct_sorted_rows():
    history = DataBlock(np.arange(60.0).reshape(20, 3))
    sample = random_sample(history, n=8, seed=42)
    picked = [t.row for t in sample.tags]
    assert len(picked) == 8
    assert picked == sorted(picked)
    assert len(set(picked)) == 8
    again = random_sample(history, n=8, seed=42)
    assert np.array_equal(sample.rows.values, again.rows.values)
    other = random_sample(history, n=8, seed=43)
    assert [t.row for t in other.tags] != picked


def test_random_sample_rejects_bad_size():
    history = DataBlock(np.ones((3, 2)))
    with pytest.raises(ValueError):
        random_sample(history, n=0, seed=0)


def test_subsample_exact_spacing():
    history = DataBlock(np.arange(20.0).reshape(10, 2))
    sample = subsample(history, n=4)
    assert [t.row for t in sample.tags] == [0, 2, 5, 7]
    assert np.array_equal(sample.rows.values, history.values[[0, 2, 5, 7]])


def test_subsample_short_history_collapses_duplicates():
    history = DataBlock(np.arange(6.0).reshape(3, 2))
    sample = subsample(history, n=7)
    assert [t.row for t in sample.tags] == [0, 1, 2]
    with pytest.raises(ValueError):
        subsample(history, n=0)


def test_all_raw_samplers_tag_raw_level():
    history = DataBlock(np.arange(30.0).reshape(10, 3))
    for sample in (random_sample(history, 4, seed=1), subsample(history, 4)):
        assert all(t.level == RAW_LEVEL for t in sample.tags)
