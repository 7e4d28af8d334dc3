from fractions import Fraction
import random

import pytest
from hypothesis import given, strategies as st

from kleinlab.errors import InvalidMap, MixedScalarError
from kleinlab.padic import PAdicScalar, TreeVertex, padic_map, tree_distance, valuation, vp

from oracles import _mul, bfs_distance, oracle_matrices


# -- tests -----------------------------------------------------------------------------

def test_valuation_examples():
    assert vp(8, 2) == 3
    assert vp(Fraction(1, 3), 3) == -1
    assert vp(7, 5) == 0
    assert valuation(PAdicScalar(Fraction(9, 4), 3)) == 2
    assert vp(0, 5) == float("inf")


def test_mixed_primes_rejected():
    with pytest.raises(MixedScalarError):
        PAdicScalar(1, 2) + PAdicScalar(1, 3)
    with pytest.raises(MixedScalarError):
        PAdicScalar(0.5, 2)


def test_tree_distance_examples():
    p = 3
    assert tree_distance(padic_map([[1, 0], [0, 1]], p)) == 0
    assert tree_distance(padic_map([[p, 0], [0, 1]], p)) == 1
    assert tree_distance(padic_map([[1, Fraction(1, p)], [0, 1]], p)) == 2
    assert bfs_distance(((1, Fraction(1, p)), (0, 1)), p) == 2
    with pytest.raises(InvalidMap):
        padic_map([[1, 2], [2, 4]], p)


@pytest.mark.parametrize("p", [2, 3, 5])
def test_tree_distance_matches_bfs(p):
    bad = []
    for rows in oracle_matrices(p):
        d = tree_distance(padic_map(rows, p))
        if d != bfs_distance(rows, p):
            bad.append(rows)
    assert not bad, bad[:3]


def test_canonical_form_is_class_invariant():
    rng = random.Random(1)
    for _ in range(300):
        p = rng.choice([2, 3, 5])
        rows = [[Fraction(rng.randint(-20, 20), p ** rng.randint(0, 2)) for _ in range(2)] for _ in range(2)]
        if rows[0][0] * rows[1][1] == rows[0][1] * rows[1][0]:
            continue
        v = TreeVertex.from_matrix(rows, p)
        # column operations in GL2(Z_(p)) and scalars keep the class
        U = ((1, rng.randint(-4, 4)), (0, 1))
        lam = Fraction(p) ** rng.randint(-2, 2) * rng.choice([1, 2, 7, -1]) if p != 7 else 1
        M = _mul([[lam * e for e in r] for r in rows], U)
        assert TreeVertex.from_matrix(M, p) == v


rationals = st.builds(lambda a, b: Fraction(a, b), st.integers(-40, 40), st.integers(1, 40))
primes = st.sampled_from([2, 3, 5, 7])


def _rows(draw_list):
    a, b, c, d = draw_list
    return [[a, b], [c, d]]


quad = st.tuples(rationals, rationals, rationals, rationals).map(_rows).filter(
    lambda r: r[0][0] * r[1][1] != r[0][1] * r[1][0])


@given(quad, primes, rationals.filter(bool))
def test_scalar_invariance(rows, p, lam):
    g = padic_map(rows, p)
    h = padic_map([[lam * e for e in r] for r in rows], p)
    assert tree_distance(g) == tree_distance(h)


@given(quad, primes)
def test_symmetry(rows, p):
    g = padic_map(rows, p)
    assert tree_distance(g) == tree_distance(g.inverse())


@given(quad, quad, primes)
def test_triangle_inequality(r1, r2, p):
    g, h = padic_map(r1, p), padic_map(r2, p)
    assert tree_distance(g @ h) <= tree_distance(g) + tree_distance(h)


@given(rationals, rationals, primes)
def test_valuation_axioms(x, y, p):
    if x and y:
        assert vp(x * y, p) == vp(x, p) + vp(y, p)
    assert vp(x + y, p) >= min(vp(x, p), vp(y, p))
