import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mpctree.binarize import build_extension
from mpctree.decompose import (
    Decomposition, coin_flips, contract, decompose_core, decompose_tree,
    dump_components, merge_step, select,
)
from mpctree.runtime import NonTermination
from mpctree.trees import GENERATOR_KINDS, gen_tree


def test_single_vertex():
    d = decompose_core(np.array([0, 0], dtype=np.int64), m=2)
    assert d.iterations == 0
    assert list(d.comp_ids) == [1]
    assert d.label[1] == 1


def test_small_tree_stays_singletons():
    t = gen_tree("random_recursive", 20, seed=3)
    d = decompose_core(t.parent, m=2)  # 20 <= 14*2, loop never runs
    assert d.iterations == 0
    assert list(d.comp_ids) == list(range(1, 21))
    assert (d.label[1:] == np.arange(1, 21)).all()


def test_selection_rules():
    #       1
    #      / \
    #     2   3
    #    / \
    #   4   5
    comp_parent = np.array([0, 0, 1, 1, 2, 2], dtype=np.int64)
    ids = np.arange(1, 6)
    child_count = np.bincount(comp_parent[ids], minlength=6)
    completed = np.zeros(6, dtype=bool)
    no_coin = np.zeros(6, dtype=bool)
    sel = select(ids, comp_parent, child_count, completed, no_coin)
    # root and two-children components in; leaves out
    assert list(ids[sel]) == [1, 2]

    # a completed parent forces its children in, coin or not
    completed[2] = True
    cand = np.array([1, 3, 4, 5])
    sel = select(cand, comp_parent, child_count, completed, no_coin)
    assert list(cand[sel]) == [1, 4, 5]


def test_one_child_rule_follows_coin():
    # path of three components: 1 <- 2 <- 3
    comp_parent = np.array([0, 0, 1, 2], dtype=np.int64)
    ids = np.arange(1, 4)
    child_count = np.bincount(comp_parent[ids], minlength=4)
    completed = np.zeros(4, dtype=bool)
    heads = np.array([False, False, True, True])
    sel = select(ids, comp_parent, child_count, completed, heads)
    assert list(ids[sel]) == [1, 2]  # 2 by coin; 3 is a leaf, coin ignored
    tails = np.zeros(4, dtype=bool)
    sel = select(ids, comp_parent, child_count, completed, tails)
    assert list(ids[sel]) == [1]


def test_merge_step_collapses_whole_path():
    comp_parent = np.array([0, 0, 1, 2], dtype=np.int64)
    selected = np.array([False, True, False, False])
    targets, max_path = merge_step(np.array([2, 3]), comp_parent, selected)
    assert list(targets) == [1, 1]
    assert max_path == 2
    # memoized resolution is order independent
    targets, max_path = merge_step(np.array([3, 2]), comp_parent, selected)
    assert list(targets) == [1, 1]
    assert max_path == 2


def test_coin_flips_deterministic():
    a = coin_flips(50, 7, 3)
    b = coin_flips(50, 7, 3)
    assert (a == b).all()
    assert a.shape == (51,)


@pytest.mark.parametrize("kind", GENERATOR_KINDS)
def test_decompose_all_generators_checked(kind):
    n, m = 300, 2
    for seed in range(3):
        t = gen_tree(kind, n, seed=seed)
        bt, _ = build_extension(t, m, seed)
        d = decompose_tree(bt, m, seed, check_invariants=True)
        nb = bt.n
        assert len(d.comp_ids) <= 14 * m
        log = math.log2(nb)
        assert d.iterations <= 6 * log
        for row in d.stats:
            assert row.max_path <= 2 * log
            assert row.selected <= (5 / 6) * row.candidates
        assert d.comp_size[d.comp_ids].max() <= 4 * (nb / m) * log


@settings(max_examples=20, deadline=None)
@given(kind=st.sampled_from(GENERATOR_KINDS),
       n=st.integers(30, 200), m=st.sampled_from([2, 4]),
       seed=st.integers(0, 10_000))
def test_decompose_property(kind, n, m, seed):
    t = gen_tree(kind, n, seed=seed)
    bt, _ = build_extension(t, m, seed)
    d = decompose_tree(bt, m, seed, check_invariants=True)
    assert len(d.comp_ids) <= 14 * m
    # partition is exact
    assert sorted(set(d.label[1:].tolist())) == sorted(d.comp_ids.tolist())


def test_determinism():
    t = gen_tree("caterpillar", 400, seed=9)
    bt, _ = build_extension(t, 4, 9)
    a = decompose_tree(bt, 4, seed=9)
    b = decompose_tree(bt, 4, seed=9)
    assert (a.label == b.label).all()
    assert a.iterations == b.iterations


def test_nontermination_guard():
    t = gen_tree("path", 100, seed=0)
    with pytest.raises(NonTermination):
        decompose_core(t.parent, m=2, max_iterations=0)


def test_contract_structure():
    t = gen_tree("full_binary", 255, seed=1)
    bt, _ = build_extension(t, 2, 1)
    d = decompose_tree(bt, 2, 1, check_invariants=True)
    ct = contract(d)
    assert ct.parent[ct.root] == 0
    sizes = sum(ct.size.values())
    assert sizes == bt.n
    for c, kids in ct.children.items():
        assert len(kids) <= 2
        for k in kids:
            assert ct.parent[k] == c


def test_dump_components_roundtrip():
    t = gen_tree("random_recursive", 120, seed=5)
    bt, _ = build_extension(t, 2, 5)
    d = decompose_tree(bt, 2, 5)
    text = dump_components(d, bt.parent)
    lines = [ln for ln in text.strip().split("\n") if ln]
    assert len(lines) == len(d.comp_ids)
    seen = []
    for ln in lines:
        head, edges = ln.split(" | ")
        cid, verts = head.split(": ")
        vs = [int(x) for x in verts.split()]
        assert int(cid) in vs  # component contains its own root
        seen.extend(vs)
        # outer edges bounded by one parent edge plus two child edges
        pairs = edges.split() if edges else []
        assert len(pairs) <= 3
    assert sorted(seen) == list(range(1, bt.n + 1))


def test_path_moderate_scale():
    t = gen_tree("path", 1 << 12, seed=0)
    bt, _ = build_extension(t, 16, 0)
    d = decompose_tree(bt, 16, 0, check_invariants=True)
    assert len(d.comp_ids) <= 14 * 16
    assert d.iterations <= 6 * math.log2(bt.n)
