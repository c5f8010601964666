import math

import numpy as np
import pytest

from mpctree.geo import (
    MstFilter, choose_geo_machines, closest_pair, emit_edge_list, emit_points,
    gen_points, gen_sparse_graph, local_mst_filter, metric_mst,
    parse_edge_list, parse_points, sparse_mst,
)
from mpctree.oracles import kruskal_mst, scan_closest_pair
from mpctree.runtime import metrics_json
from mpctree.values import seed_int


def complete_graph(points):
    n = len(points)
    return [(u, v, int(((points[u] - points[v]) ** 2).sum()), u * n + v)
            for u in range(n) for v in range(u + 1, n)]


def test_closest_pair_examples():
    out = closest_pair(np.array([[0], [1], [3]], dtype=np.int64), machines=2)
    assert out.value == (0, 1, 1)
    assert out.rounds == 3
    dup = closest_pair(np.array([[5, 5], [9, 1], [5, 5]], dtype=np.int64),
                       machines=2)
    assert dup.value == (0, 2, 0)


def test_closest_pair_matches_scan():
    for seed in range(10):
        pts = gen_points(200, 2, seed=seed)
        i, j, d2 = scan_closest_pair(pts)
        out = closest_pair(pts, machines=16, seed=seed)
        assert out.value == (i, j, d2)
        assert out.rounds == 3


def test_closest_pair_rejects_wide_clusters():
    with pytest.raises(ValueError):
        closest_pair(gen_points(16, 2), machines=16)
    assert choose_geo_machines(16) == 4
    assert choose_geo_machines(2) == 2
    assert choose_geo_machines(4096) == 16


def test_filter_examples():
    tri = [(0, 1, 1, 0), (1, 2, 2, 1), (0, 2, 3, 2)]
    assert [e[3] for e in local_mst_filter(tri)] == [0, 1]
    forest = [(0, 1, 9, 0), (2, 3, 1, 1), (4, 5, 5, 2)]
    assert local_mst_filter(forest) == forest


def test_filter_matches_offline_mst_and_never_evicts():
    for seed in range(20):
        n, edges = gen_sparse_graph(48, seed=seed)
        mst_ids, _ = kruskal_mst(n, edges)
        filt = MstFilter()
        evicted = [out for e in edges if (out := filt.offer(*e)) is not None]
        assert [e[3] for e in filt.edges()] == mst_ids
        assert not {e[3] for e in evicted} & set(mst_ids)


def test_sparse_mst_examples():
    path = [(i, i + 1, 10 - i, i) for i in range(4)]
    out = sparse_mst(5, path, machines=4)
    assert out.value == ([0, 1, 2, 3], 34)
    cyc = [(0, 1, 1, 0), (1, 2, 2, 1), (2, 3, 3, 2), (3, 0, 4, 3)]
    out = sparse_mst(4, cyc, machines=4)
    assert out.value == ([0, 1, 2], 6)
    assert out.info["super_rounds"] <= 2


@pytest.mark.parametrize("n", [16, 64, 256, 1024])
def test_sparse_mst_matches_oracle(n):
    for seed in (1, 2):
        n_v, edges = gen_sparse_graph(n, seed=seed)
        out = sparse_mst(n_v, edges, seed=seed)
        assert out.value == kruskal_mst(n_v, edges)
        assert out.info["super_rounds"] <= math.ceil(math.log2(n_v))


def test_metric_mst_examples():
    line = metric_mst(np.array([[0], [1], [3]], dtype=np.int64), machines=2)
    assert line.value == ([1, 5], 3.0)
    square = metric_mst(np.array([[0, 0], [0, 1], [1, 0], [1, 1]],
                                 dtype=np.int64), machines=2)
    assert square.value[1] == 3.0


def test_metric_mst_matches_complete_oracle():
    for seed in range(4):
        pts = gen_points(96, 2, seed=seed)
        ids, _ = kruskal_mst(len(pts), complete_graph(pts))
        wmap = {eid: w for (_u, _v, w, eid) in complete_graph(pts)}
        out = metric_mst(pts, machines=16, seed=seed)
        assert out.value == (ids, sum(math.sqrt(wmap[i]) for i in ids))


def test_metric_mst_custom_metric():
    pts = np.array([[0, 0], [2, 0], [0, 5]], dtype=np.int64)
    l1 = lambda a, b: int(np.abs(a - b).sum())
    out = metric_mst(pts, machines=2, f=l1)
    assert out.value == ([1, 2], 7)
    assert closest_pair(pts, machines=2, f=l1).value == (0, 1, 2)


def test_group_sizes_bounded():
    n, m = 512, 16
    k = math.isqrt(m - 1) + 1
    for seed in range(25):
        loads = np.zeros(k, dtype=np.int64)
        for pid in range(n):
            loads[seed_int(seed, "geo-group", pid) % k] += 1
        assert loads.max() <= 2 * n // k


def test_formats_roundtrip():
    pts = gen_points(9, 3, seed=2)
    assert np.array_equal(parse_points(emit_points(pts)), pts)
    n, edges = gen_sparse_graph(12, seed=4)
    assert parse_edge_list(emit_edge_list(n, edges)) == (n, edges)
    with pytest.raises(ValueError):
        parse_points("2 2\n1 1\n")
    with pytest.raises(ValueError):
        parse_edge_list("3 1\n0 3 7\n")


def test_runs_are_deterministic():
    pts = gen_points(128, 2, seed=9)
    a = closest_pair(pts, seed=9)
    b = closest_pair(pts, seed=9)
    assert a.value == b.value
    assert metrics_json(a.metrics) == metrics_json(b.metrics)
    x = sparse_mst(*gen_sparse_graph(128, seed=9), seed=9)
    y = sparse_mst(*gen_sparse_graph(128, seed=9), seed=9)
    assert (x.value, metrics_json(x.metrics)) == (y.value, metrics_json(y.metrics))
