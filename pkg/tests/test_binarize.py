import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mpctree.binarize import (
    BinarizeProgram,
    ExtensionMap,
    binarize_sim,
    build_extension,
    check_extension,
    compute_degrees,
    euler_intervals,
)
from mpctree.runtime import ClusterConfig, polylog_capacity
from mpctree.trees import GENERATOR_KINDS, gen_tree, parse_tree


def cluster(n, m, seed=0, c=8):
    # the structural tests floor the budget: the asymptotic default is
    # meaningless below a few dozen words of per-machine bookkeeping
    return ClusterConfig(machines=m, words=max(polylog_capacity(n, m, c), 256),
                         seed=seed)


def test_path_is_already_binary():
    t = gen_tree("path", 50)
    bt, ext = build_extension(t, m=4, seed=0)
    assert bt.n == 50
    assert ext.degree_aux == 0 and ext.gadget_aux == 0
    assert np.array_equal(bt.parent, t.parent)


def test_three_children_make_one_gadget_vertex():
    t = parse_tree("7\n1 0\n2 1\n3 1\n4 1\n5 4\n6 5\n7 6")
    bt, ext = build_extension(t, m=2, seed=0)
    # delta = 4, nobody is high-degree; root has 3 children -> 1 inner vertex
    assert ext.degree_aux == 0
    assert ext.gadget_aux == 1
    assert bt.n == 8  # gadget size 2*3-1 = 5 covers root+3 children+1 aux
    check_extension(t, bt)


def test_four_children_make_two_gadget_vertices():
    t = parse_tree("9\n1 0\n2 1\n3 1\n4 1\n5 1\n6 2\n7 6\n8 7\n9 8")
    bt, ext = build_extension(t, m=2, seed=0)
    assert ext.degree_aux == 0
    assert ext.gadget_aux == 2
    kids = np.bincount(bt.parent[1:], minlength=bt.n + 1)
    assert kids[1] == 2
    check_extension(t, bt)


def test_star_triggers_degree_bounding():
    t = gen_tree("star", 9)
    bt, ext = build_extension(t, m=4, seed=1)
    # delta = 3, root has 8 children -> ceil(8/3) = 3 stage-1 auxiliaries
    assert ext.delta == 3
    assert ext.degree_aux == 3
    check_extension(t, bt)
    # every original child now hangs below one of the auxiliaries
    tin, tout = euler_intervals(bt)
    for v in range(2, 10):
        assert tin[1] < tin[v] <= tout[1]


@given(st.sampled_from(GENERATOR_KINDS), st.integers(2, 120),
       st.integers(0, 3), st.sampled_from([2, 4, 8]))
@settings(max_examples=60, deadline=None)
def test_extension_contract_random(kind, n, seed, m):
    t = gen_tree(kind, n, seed, weight_dist="uniform:1:50")
    bt, ext = build_extension(t, m=m, seed=seed)
    check_extension(t, bt)
    assert bt.n == ext.total
    if n >= 2 * m:
        assert bt.n <= 4 * n


@given(st.sampled_from(GENERATOR_KINDS), st.integers(2, 80),
       st.integers(0, 2), st.sampled_from([2, 4]))
@settings(max_examples=25, deadline=None)
def test_simulated_equals_local(kind, n, seed, m):
    t = gen_tree(kind, n, seed)
    bt_local, _ = build_extension(t, m=m, seed=seed)
    bt_sim, res = binarize_sim(t, cluster(n, m, seed=seed))
    assert bt_sim.n == bt_local.n
    assert np.array_equal(bt_sim.parent, bt_local.parent)
    assert bt_sim.weights == bt_local.weights
    assert res.rounds <= 7


def test_round_count_is_six():
    t = gen_tree("star", 200)
    _, res = binarize_sim(t, cluster(200, 8))
    assert res.rounds == 6


def test_compute_degrees_path_and_star():
    t = gen_tree("path", 5)
    counts = compute_degrees(t, cluster(5, 4))
    assert list(counts[1:]) == [1, 1, 1, 1, 0]
    s = gen_tree("star", 5)
    counts = compute_degrees(s, cluster(5, 4))
    assert list(counts[1:]) == [4, 0, 0, 0, 0]


def test_single_vertex():
    t = parse_tree("1\n1 0")
    bt, ext = build_extension(t, m=2, seed=0)
    assert bt.n == 1 and ext.total == 1
    bt_sim, res = binarize_sim(t, cluster(1, 2))
    assert bt_sim.n == 1
