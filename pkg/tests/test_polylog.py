import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mpctree.oracles import (
    seq_dominating_set, seq_longest_path, seq_matching, seq_mis,
    seq_vertex_cover,
)
from mpctree.polylog import (
    POLYLOG_PLUGINS, choose_machines, make_plugin, solve_polylog,
    solve_sequential,
)
from mpctree.trees import GENERATOR_KINDS, Tree, gen_tree

ORACLES = {
    "matching": seq_matching,
    "mis": seq_mis,
    "vc": seq_vertex_cover,
    "dominating-set": seq_dominating_set,
    "longest-path": seq_longest_path,
}
ALL = sorted(POLYLOG_PLUGINS)


def T(parent, weights=None):
    parent = np.asarray(parent, dtype=np.int64)
    return Tree(n=len(parent) - 1, parent=parent, weights=weights)


def test_known_values():
    # single edge of weight 5: the matching takes it
    assert solve_sequential(T([0, 0, 1], [0, 0, 5]), "matching") == 5
    # path with weights 5,1,5: take the two outer edges
    assert solve_sequential(T([0, 0, 1, 2, 3], [0, 0, 5, 1, 5]), "matching") == 10
    star5 = T([0, 0, 1, 1, 1, 1])
    assert solve_sequential(star5, "dominating-set") == 1
    assert solve_sequential(star5, "vc") == 1
    assert solve_sequential(star5, "mis") == 4
    path4 = T([0, 0, 1, 2, 3])
    assert solve_sequential(path4, "mis") == 2
    fb7 = gen_tree("full_binary", 7, seed=0)
    assert solve_sequential(fb7, "longest-path") == 4


def test_two_leaf_children_matching():
    # a root with leaf children of weight 5 and 3 must yield 5, not nothing
    t = T([0, 0, 1, 1], [0, 0, 5, 3])
    assert solve_sequential(t, "matching") == 5
    assert seq_matching(t) == 5


def test_single_vertex_all_problems():
    one = T([0, 0])
    want = {"matching": 0, "mis": 1, "vc": 0, "dominating-set": 1,
            "longest-path": 0}
    for name, val in want.items():
        assert solve_sequential(one, name) == val


@settings(max_examples=40, deadline=None)
@given(kind=st.sampled_from(GENERATOR_KINDS), n=st.integers(2, 80),
       seed=st.integers(0, 10_000), problem=st.sampled_from(ALL))
def test_sequential_matches_oracle_unweighted(kind, n, seed, problem):
    t = gen_tree(kind, n, seed=seed)
    assert solve_sequential(t, problem) == ORACLES[problem](t)


@settings(max_examples=40, deadline=None)
@given(kind=st.sampled_from(GENERATOR_KINDS), n=st.integers(2, 60),
       seed=st.integers(0, 10_000),
       problem=st.sampled_from(["matching", "longest-path"]))
def test_sequential_matches_oracle_weighted(kind, n, seed, problem):
    t = gen_tree(kind, n, seed=seed, weight_dist="uniform:1:9")
    assert solve_sequential(t, problem) == ORACLES[problem](t)


def test_choose_machines_growth():
    assert choose_machines(8) == 2
    assert choose_machines(239) == 2
    assert choose_machines(960) == 4
    assert choose_machines(3840) == 8
    assert choose_machines(10 ** 6) == 16


@pytest.mark.parametrize("kind", ["random_recursive", "caterpillar", "path"])
def test_distributed_solve_matches_oracles(kind):
    t = gen_tree(kind, 400, seed=11, weight_dist="uniform:1:7")
    out = solve_polylog(t, ALL, seed=11)
    assert out.mode == "dist"
    assert out.rounds == 9
    for name in ALL:
        assert out.values[name] == ORACLES[name](t), name


def test_distributed_solve_star_and_broom():
    # shapes that stress stage-1 re-parenting inside the full pipeline
    for kind in ("star", "broom"):
        t = gen_tree(kind, 500, seed=3)
        out = solve_polylog(t, ALL, seed=3)
        assert out.mode == "dist"
        for name in ALL:
            assert out.values[name] == ORACLES[name](t), (kind, name)


def test_local_mode_small_input():
    t = gen_tree("random_recursive", 40, seed=5, weight_dist="uniform:1:5")
    out = solve_polylog(t, ALL, seed=5)
    assert out.mode == "local"
    assert out.rounds == 8
    for name in ALL:
        assert out.values[name] == ORACLES[name](t), name


def test_tiny_inputs_through_cluster():
    for n in (1, 2, 3):
        t = gen_tree("path", n, seed=0)
        out = solve_polylog(t, ["matching", "mis"], seed=0)
        assert out.values["matching"] == ORACLES["matching"](t)
        assert out.values["mis"] == ORACLES["mis"](t)


def test_determinism_across_runs():
    t = gen_tree("caterpillar", 600, seed=2)
    a = solve_polylog(t, ALL, seed=2)
    b = solve_polylog(t, ALL, seed=2)
    assert a.values == b.values
    assert [(r.round, r.max_resident, r.max_sent, r.max_received)
            for r in a.metrics] == \
           [(r.round, r.max_resident, r.max_sent, r.max_received)
            for r in b.metrics]


def test_explicit_machine_count():
    t = gen_tree("full_binary", 1023, seed=7)
    out = solve_polylog(t, ["mis"], machines=8, seed=7)
    assert out.machines == 8
    assert out.values["mis"] == seq_mis(t)


def test_make_plugin_rejects_unknown():
    with pytest.raises(KeyError):
        make_plugin("tsp")
