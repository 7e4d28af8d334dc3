"""Graphs of Moebius maps in P^1 x P^1, crosses, and limits of graph sequences.

Points of P^1 are placed on the sphere of diameter 1, where euclidean distance
is the chordal distance |x - y| / sqrt(1+|x|^2) sqrt(1+|y|^2). Points of
P^1 x P^1 then live in R^6 with the product (l2) metric.
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np
from scipy.spatial import cKDTree

from .errors import AffineGraph, InvalidMap, Unclassifiable
from .moebius import MoebiusMap, ProjPoint
from . import scalars


def graph_contains(g: MoebiusMap, x: ProjPoint, y: ProjPoint) -> bool:
    if g.is_singular():
        raise InvalidMap("singular matrix")
    return g(x) == y


def graph_product_form(g: MoebiusMap):
    """(u, v, w) with (s - u)(r - v) = w on the finite part of the graph s = g(r)."""
    a, b, c, d = g.entries
    if scalars.is_zero(c):
        raise AffineGraph("c = 0: the graph is y = (a x + b) / d")
    det = g.det()
    return a / c, -d / c, -det / (c * c)


# -- point clouds ----------------------------------------------------------------

def _sphere_vectors(n, rng):
    """n unit vectors of C^2 whose points are uniform on the sphere."""
    u = rng.standard_normal((n, 3))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    top = u[:, 2] <= 0
    r = np.where(top, u[:, 0] + 1j * u[:, 1], 1 + u[:, 2])
    s = np.where(top, 1 - u[:, 2], u[:, 0] - 1j * u[:, 1])
    v = np.stack([r, s], axis=1)
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _to_sphere(v):
    """Homogeneous vectors (N, 2) -> points of the sphere of diameter 1 in R^3."""
    v = v / np.linalg.norm(v, axis=1, keepdims=True)
    r, s = v[:, 0], v[:, 1]
    w = r * np.conj(s)
    return 0.5 * np.stack([2 * w.real, 2 * w.imag, np.abs(r) ** 2 - np.abs(s) ** 2], axis=1)


def _const(x: ProjPoint, n):
    return np.repeat(x.unit_vector()[None, :], n, axis=0)


class GraphSet:
    """The graph of g, sampled over both factors so both branches are covered."""

    def __init__(self, g: MoebiusMap):
        self.g = g
        m = g.as_array()
        self._m = m / np.linalg.norm(m)
        self._minv = np.linalg.inv(self._m)

    def sample(self, n, seed=0):
        rng = np.random.default_rng(seed)
        k = n // 2
        x = _sphere_vectors(n - k, rng)
        y = _sphere_vectors(k, rng)
        gx = x @ self._m.T
        giy = y @ self._minv.T
        first = np.concatenate([x, giy])
        second = np.concatenate([gx, y])
        return np.hstack([_to_sphere(first), _to_sphere(second)])


class CrossSet:
    """Crs(alpha, beta) = {x = alpha} u {y = beta}."""

    def __init__(self, alpha: ProjPoint, beta: ProjPoint):
        self.alpha, self.beta = alpha, beta

    def sample(self, n, seed=0):
        rng = np.random.default_rng(seed)
        k = n // 2
        x = _sphere_vectors(n - k, rng)
        y = _sphere_vectors(k, rng)
        first = np.concatenate([x, _const(self.alpha, k)])
        second = np.concatenate([_const(self.beta, n - k), y])
        return np.hstack([_to_sphere(first), _to_sphere(second)])


def sampled_hausdorff(set_a, set_b, n: int, seed=0) -> float:
    """Symmetric Hausdorff distance between n-point samples (shared seed)."""
    if n < 1:
        raise ValueError("n must be positive")
    pa, pb = set_a.sample(n, seed), set_b.sample(n, seed)
    da, _ = cKDTree(pb).query(pa)
    db, _ = cKDTree(pa).query(pb)
    return float(max(da.max(), db.max()))


# -- limits -----------------------------------------------------------------------

@dataclass(frozen=True)
class GraphLimit:
    g: MoebiusMap

    def limit_set(self):
        return GraphSet(self.g)


@dataclass(frozen=True)
class CrossLimit:
    """Vertical line x = alpha and horizontal line y = beta."""

    alpha: ProjPoint
    beta: ProjPoint

    def limit_set(self):
        return CrossSet(self.alpha, self.beta)


@dataclass(frozen=True)
class LineAndPoint:
    """Horizontal line y = beta together with the point (alpha, beta).

    This is the pointwise limit of x -> (x, g_i x) for affine g_i. In the
    Hausdorff topology of P^1 x P^1 the graphs also sweep the fibre x = alpha
    through the point, so ``limit_set`` is that line pair.
    """

    beta: ProjPoint
    alpha: ProjPoint

    @property
    def point(self):
        return (self.alpha, self.beta)

    def limit_set(self):
        return CrossSet(self.alpha, self.beta)


def _unit_direction(m):
    m = m / np.linalg.norm(m)
    flat = m.ravel()
    k = int(np.argmax(np.abs(flat) > 1e-12 * np.abs(flat).max()))
    return m * (abs(flat[k]) / flat[k])


def _rank_one_points(m):
    """Kernel and image points of a (nearly) rank one matrix."""
    rows = np.linalg.norm(m, axis=1)
    row = m[int(np.argmax(rows))]
    kernel = ProjPoint(complex(-row[1]), complex(row[0]))
    cols = np.linalg.norm(m, axis=0)
    col = m[:, int(np.argmax(cols))]
    image = ProjPoint(complex(col[0]), complex(col[1]))
    return kernel, image


def classify_limit(gs, tol: float = 1e-4):
    """Classify the limit of the graphs of a coherent sequence g_1, g_2, ...

    Maps are rescaled to det = 1. If the unit-norm directions have settled
    (last step below ``tol``) the limit is the graph of the last map when its
    norm stays below 1/tol, and otherwise the rank-one limit gives a cross
    Crs(kernel, image); affine tails (c = 0) give LineAndPoint. Anything else
    is Unclassifiable.
    """
    gs = list(gs)
    if len(gs) < 3:
        raise ValueError("need at least three maps")
    mats = []
    for g in gs:
        if g.is_singular():
            raise InvalidMap("singular matrix in sequence")
        m = g.as_array()
        mats.append(m / np.sqrt(np.linalg.det(m)))
    norms = np.array([np.linalg.norm(m) for m in mats])
    dirs = [_unit_direction(m) for m in mats]
    step = [np.linalg.norm(dirs[i] - dirs[i - 1]) for i in range(1, len(dirs))]
    if step[-1] > tol:
        raise Unclassifiable(f"directions still moving (last step {step[-1]:.3g} > tol)")
    last = mats[-1]
    if norms[-1] <= 1.0 / tol:
        if abs(norms[-1] - norms[-2]) > tol * norms[-1]:
            raise Unclassifiable("norms have not settled")
        return GraphLimit(MoebiusMap.from_array(last))
    if not norms[-1] > norms[-2] > norms[-3]:
        raise Unclassifiable("norms large but not increasing")
    kernel, image = _rank_one_points(dirs[-1])
    tail = mats[len(mats) // 2:]
    if all(abs(m[1, 0]) <= 1e-12 * np.linalg.norm(m) for m in tail):
        return LineAndPoint(beta=image, alpha=kernel)
    return CrossLimit(alpha=kernel, beta=image)


def canonical_sequences(length: int = 21):
    """The three reference sequences, parameterised by 2^i at index i."""
    ident = [MoebiusMap(1.0 + 0j, 0j, 0j, 1.0 + 0j) for _ in range(length)]
    trans = [MoebiusMap(1.0 + 0j, complex(2.0**i), 0j, 1.0 + 0j) for i in range(length)]
    swap = [MoebiusMap(complex(2.0**i), -1.0 + 0j, 1.0 + 0j, 0j) for i in range(length)]
    return {"identity": ident, "translations": trans, "inversions": swap}
