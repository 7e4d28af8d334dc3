import numpy as np
import pytest

from kleinlab.crosses import (CrossLimit, CrossSet, GraphLimit, GraphSet, LineAndPoint, canonical_sequences,
                              classify_limit, graph_contains, graph_product_form, sampled_hausdorff)
from kleinlab.errors import AffineGraph, Unclassifiable
from kleinlab.moebius import MoebiusMap, ProjPoint, chordal


def fp(z):
    return ProjPoint(complex(z), 1.0 + 0j)


def test_graph_contains_examples():
    I = MoebiusMap(1.0 + 0j, 0j, 0j, 1.0 + 0j)
    S = MoebiusMap(0j, -1.0 + 0j, 1.0 + 0j, 0j)
    assert all(graph_contains(I, fp(x), fp(x)) for x in (0.3, -2 + 1j, 7j))
    assert graph_contains(S, fp(2), fp(-0.5))
    assert not graph_contains(I, fp(2), fp(3))


def test_product_form():
    assert graph_product_form(MoebiusMap(0, -1, 1, 0)) == (0, 0, -1)
    assert graph_product_form(MoebiusMap(1, 0, 1, 1)) == (1, -1, -1)
    with pytest.raises(AffineGraph):
        graph_product_form(MoebiusMap(1, 2, 0, 1))
    rng = np.random.default_rng(0)
    for _ in range(100):
        a, b, c = rng.normal(size=3) + 1j * rng.normal(size=3)
        g = MoebiusMap(a, b, c, (1 + b * c) / a)
        u, v, w = graph_product_form(g)
        for r in rng.normal(size=4) + 1j * rng.normal(size=4):
            s = complex(g(fp(r)).affine())
            assert abs((s - u) * (r - v) - w) < 1e-12 * max(1, abs(w), abs(s - u) * abs(r - v))


def _cluster_limit(gs, n=400, seed=0):
    """Oracle: where do the graph points of the last maps accumulate (on the sphere)?"""
    pts = GraphSet(gs[-1]).sample(n, seed)
    return pts


def test_canonical_classification():
    seqs = canonical_sequences(21)
    lim = {k: classify_limit(v) for k, v in seqs.items()}
    assert isinstance(lim["identity"], GraphLimit)
    assert isinstance(lim["translations"], LineAndPoint)
    inf = ProjPoint(1.0 + 0j, 0j)
    assert chordal(lim["translations"].beta, inf) < 1e-5 and chordal(lim["translations"].alpha, inf) < 1e-5
    c = lim["inversions"]
    assert isinstance(c, CrossLimit)
    assert chordal(c.alpha, fp(0)) < 1e-5 and chordal(c.beta, inf) < 1e-5
    for k, v in seqs.items():
        assert sampled_hausdorff(GraphSet(v[20]), lim[k].limit_set(), 4000, 1) < 0.05


def test_sampling_oracle_for_cross():
    # graph points of [[2^20, -1], [1, 0]] sit near {x = 0} or {y = inf}
    pts = _cluster_limit(canonical_sequences(21)["inversions"])
    near_vert = np.linalg.norm(pts[:, :3] - np.array([0, 0, -0.5]), axis=1)
    near_horiz = np.linalg.norm(pts[:, 3:] - np.array([0, 0, 0.5]), axis=1)
    assert np.all(np.minimum(near_vert, near_horiz) < 1e-2)


def test_hausdorff_examples():
    I = MoebiusMap(1.0 + 0j, 0j, 0j, 1.0 + 0j)
    assert sampled_hausdorff(GraphSet(I), GraphSet(I), 500) == 0.0
    D = MoebiusMap(2.0**20 + 0j, 0j, 0j, 1.0 + 0j)
    assert sampled_hausdorff(GraphSet(D), CrossSet(fp(0), ProjPoint(1.0 + 0j, 0j)), 10000) < 0.05


def test_inverse_sequence_swaps_cross():
    gs = canonical_sequences(21)["inversions"]
    a = classify_limit(gs)
    b = classify_limit([g.inverse() for g in gs])
    assert isinstance(b, CrossLimit)
    assert b.alpha == a.beta and b.beta == a.alpha


def test_hausdorff_decreases_along_cross_tail():
    gs = canonical_sequences(21)["inversions"]
    target = classify_limit(gs).limit_set()
    d = [sampled_hausdorff(GraphSet(g), target, 3000, 2) for g in gs[8:]]
    bad = sum(d[i + 1] > 1.1 * d[i] for i in range(len(d) - 1))
    assert bad <= 0.1 * len(d)


def test_unclassifiable():
    rot = [MoebiusMap(np.exp(0.5j * k), 0j, 0j, 1.0 + 0j) for k in range(10)]
    with pytest.raises(Unclassifiable):
        classify_limit(rot)
