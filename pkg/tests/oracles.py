"""Independent reference computations shared by the unit and acceptance tests."""

from fractions import Fraction
import itertools
import random

from kleinlab.padic import TreeVertex, base_vertex


# -- BFS oracle on lattice classes -------------------------------------------------------

def _mul(A, B):
    return tuple(tuple(sum(A[i][k] * B[k][j] for k in range(2)) for j in range(2)) for i in range(2))


def _basis(v):
    return ((Fraction(v.p) ** v.k, Fraction(0)), (v.x, Fraction(1)))


def neighbours(v):
    """The p + 1 index-p sublattices of the class, in canonical form."""
    p = v.p
    ms = [((1, 0), (j, p)) for j in range(p)] + [((p, 0), (0, 1))]
    B = _basis(v)
    return [TreeVertex.from_matrix(_mul(B, M), p) for M in ms]


_BALLS = {}


def ball(p, radius):
    key = (p, radius)
    if key not in _BALLS:
        seen = {base_vertex(p): 0}
        ring = [base_vertex(p)]
        for r in range(1, radius + 1):
            nxt = []
            for v in ring:
                for u in neighbours(v):
                    if u not in seen:
                        seen[u] = r
                        nxt.append(u)
            ring = nxt
        _BALLS[key] = seen
    return _BALLS[key]


def bfs_distance(rows, p, radius=6):
    """Graph distance from o to the class of the columns of rows."""
    target = TreeVertex.from_matrix(rows, p)
    B = ball(p, radius)
    if target in B:
        return B[target]
    seen, ring, r = {target}, [target], 0
    while True:
        r += 1
        nxt = []
        for v in ring:
            for u in neighbours(v):
                if u not in seen:
                    seen.add(u)
                    nxt.append(u)
        hits = [B[u] for u in nxt if u in B]
        if hits:
            return r + min(hits)
        ring = nxt


def oracle_matrices(p, seed=0):
    """Every valuation pattern in [-3, 3]^4, units 1 and then random units."""
    rng = random.Random(seed)
    units = [u for u in range(1, p * p + 2) if u % p]
    for vals in itertools.product(range(-3, 4), repeat=4):
        for pick in (lambda: 1, lambda: rng.choice(units) * rng.choice((1, -1))):
            rows = [[pick() * Fraction(p) ** v for v in vals[:2]], [pick() * Fraction(p) ** v for v in vals[2:]]]
            if rows[0][0] * rows[1][1] != rows[0][1] * rows[1][0]:
                yield rows
