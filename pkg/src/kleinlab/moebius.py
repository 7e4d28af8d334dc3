"""Moebius maps on the projective line and on upper half-space H^3.

Points of H^3 are ``H3Point(z, t)`` with horizontal coordinate ``z`` and
height ``t > 0``; the base point is ``O = H3Point(0, 1)``.
"""

from __future__ import annotations

from dataclasses import dataclass
import cmath
import math

import numpy as np

from . import scalars
from .errors import InvalidAngle, InvalidMap, InvalidPoint, MixedScalarError
from .scalars import TOL


class MoebiusMap:
    """Projective 2x2 matrix [[a, b], [c, d]] with entries of a single scalar variant."""

    __slots__ = ("a", "b", "c", "d", "tag")

    def __init__(self, a, b, c, d, *, check=True):
        entries = (a, b, c, d)
        tag = scalars.common_kind(entries)
        like = next((e for e in entries if scalars.kind(e) is not None), None)
        self.a, self.b, self.c, self.d = (scalars.coerce(e, tag, like) for e in entries)
        self.tag = tag
        if check and self.is_singular():
            raise InvalidMap(f"singular matrix {self!r}")

    @classmethod
    def from_rows(cls, rows, **kw):
        (a, b), (c, d) = rows
        return cls(a, b, c, d, **kw)

    @classmethod
    def from_array(cls, arr, **kw):
        arr = np.asarray(arr, dtype=complex)
        return cls(complex(arr[0, 0]), complex(arr[0, 1]), complex(arr[1, 0]), complex(arr[1, 1]), **kw)

    @classmethod
    def identity(cls, like=None):
        if like is None:
            return cls(1, 0, 0, 1)
        one = scalars.coerce(1, like.tag, like.a)
        zero = scalars.coerce(0, like.tag, like.a)
        return cls(one, zero, zero, one)

    @property
    def entries(self):
        return (self.a, self.b, self.c, self.d)

    @property
    def is_exact(self):
        return scalars.is_exact(self.tag)

    def det(self):
        return self.a * self.d - self.b * self.c

    def trace(self):
        return self.a + self.d

    def frobenius2(self) -> float:
        return sum(abs(complex(e)) ** 2 for e in self.entries)

    def is_singular(self) -> bool:
        if self.is_exact:
            return not self.det()
        # below this the determinant is lost in rounding of the products ad, bc
        return abs(complex(self.det())) <= 1e-14 * max(self.frobenius2(), 1e-300)

    def _same(self, other):
        if other.tag != self.tag:
            raise MixedScalarError(f"cannot compose {self.tag} map with {other.tag} map")

    def __matmul__(self, other):
        if not isinstance(other, MoebiusMap):
            return NotImplemented
        self._same(other)
        a, b, c, d = self.entries
        e, f, g, h = other.entries
        return MoebiusMap(a * e + b * g, a * f + b * h, c * e + d * g, c * f + d * h, check=False)

    def inverse(self):
        """Adjugate; the true inverse when det = 1 and projectively always."""
        return MoebiusMap(self.d, -self.b, -self.c, self.a, check=False)

    def scale(self, lam):
        return MoebiusMap(*(lam * e for e in self.entries), check=False)

    def normalized(self):
        """Canonical representative: det = 1 up to sign for floats, first nonzero entry 1 when exact."""
        if self.is_exact:
            pivot = next(e for e in self.entries if e)
            inv = 1 / pivot if not hasattr(pivot, "inverse") else pivot.inverse()
            return self.scale(inv)
        s = cmath.sqrt(complex(self.det()))
        m = self.scale(1 / s)
        for e in m.entries:
            if abs(e) > TOL:
                if e.real < -TOL or (abs(e.real) <= TOL and e.imag < 0):
                    m = m.scale(-1)
                break
        return m

    def proj_equal(self, other, tol=TOL) -> bool:
        if self.is_exact and other.is_exact:
            self._same(other)
            x, y = self.entries, other.entries
            return all(not (x[i] * y[j] - x[j] * y[i]) for i in range(4) for j in range(i + 1, 4))
        x = np.array([complex(e) for e in self.entries])
        y = np.array([complex(e) for e in other.entries])
        nx, ny = np.linalg.norm(x), np.linalg.norm(y)
        cross = np.abs(np.outer(x, y) - np.outer(y, x)).max()
        return cross <= tol * nx * ny

    def as_array(self):
        return np.array([[complex(self.a), complex(self.b)], [complex(self.c), complex(self.d)]])

    def to_float(self):
        return MoebiusMap(*(complex(e) for e in self.entries), check=False)

    def __call__(self, x):
        return apply_to_p1(self, x)

    def __eq__(self, other):
        if not isinstance(other, MoebiusMap):
            return NotImplemented
        return self.tag == other.tag and self.proj_equal(other)

    def __hash__(self):
        if not self.is_exact:
            raise TypeError("float Moebius maps are not hashable")
        return hash(self.normalized().entries)

    def __repr__(self):
        return f"MoebiusMap([[{self.a}, {self.b}], [{self.c}, {self.d}]])"


class ProjPoint:
    """Homogeneous point [r : s] of the projective line; [1 : 0] is infinity."""

    __slots__ = ("r", "s", "tag")

    def __init__(self, r, s=1):
        tag = scalars.common_kind((r, s))
        like = r if scalars.kind(r) is not None else s
        self.r = scalars.coerce(r, tag, like)
        self.s = scalars.coerce(s, tag, like)
        self.tag = tag
        if scalars.is_zero(self.r, 0.0) and scalars.is_zero(self.s, 0.0):
            raise InvalidPoint("[0 : 0] is not a point")

    @classmethod
    def infinity(cls, like=None):
        if like is None:
            return cls(1, 0)
        return cls(scalars.coerce(1, like.tag, like.r), scalars.coerce(0, like.tag, like.r))

    def is_infinity(self, tol=TOL) -> bool:
        if scalars.is_exact(self.tag):
            return not self.s
        return abs(self.s) <= tol * abs(self.r)

    def affine(self):
        if self.is_infinity(0.0):
            raise ValueError("infinity has no affine coordinate")
        return self.r / self.s

    def as_vector(self):
        return np.array([complex(self.r), complex(self.s)])

    def unit_vector(self):
        v = self.as_vector()
        return v / np.linalg.norm(v)

    def __eq__(self, other):
        if not isinstance(other, ProjPoint):
            return NotImplemented
        if scalars.is_exact(self.tag) and scalars.is_exact(other.tag):
            if self.tag != other.tag:
                raise MixedScalarError("comparing points of different variants")
            return not (self.r * other.s - self.s * other.r)
        u, v = self.unit_vector(), other.unit_vector()
        return abs(u[0] * v[1] - u[1] * v[0]) <= TOL

    def __hash__(self):
        if not scalars.is_exact(self.tag):
            raise TypeError("float points are not hashable")
        if not self.s:
            return hash("inf")
        return hash(self.r / self.s)

    def __repr__(self):
        return f"ProjPoint({self.r} : {self.s})"


def apply_to_p1(g: MoebiusMap, x: ProjPoint) -> ProjPoint:
    if g.is_singular():
        raise InvalidMap("singular matrix")
    if scalars.is_exact(g.tag) != scalars.is_exact(x.tag) or (g.is_exact and g.tag != x.tag):
        raise MixedScalarError(f"map is {g.tag}, point is {x.tag}")
    r = g.a * x.r + g.b * x.s
    s = g.c * x.r + g.d * x.s
    if not g.is_exact:
        n = math.hypot(abs(r), abs(s))
        r, s = r / n, s / n
    return ProjPoint(r, s)


def chordal(x: ProjPoint, y: ProjPoint) -> float:
    """Chordal distance |x - y| / sqrt(1+|x|^2) sqrt(1+|y|^2), infinity included."""
    u, v = x.unit_vector(), y.unit_vector()
    return float(abs(u[0] * v[1] - u[1] * v[0]))


@dataclass(frozen=True)
class H3Point:
    z: complex
    t: float

    def __post_init__(self):
        object.__setattr__(self, "z", complex(self.z))
        object.__setattr__(self, "t", float(self.t))
        if not self.t > 0 or not math.isfinite(self.t):
            raise InvalidPoint(f"height must be positive, got {self.t}")


O = H3Point(0j, 1.0)


def act_on_h3(g: MoebiusMap, p: H3Point) -> H3Point:
    """Isometric action (aP + b)(cP + d)^-1 with P = z + t j."""
    if g.is_singular():
        raise InvalidMap("singular matrix")
    a, b, c, d = (complex(e) for e in g.entries)
    det = abs(a * d - b * c)
    z, t = p.z, p.t
    w = c * z + d
    denom = abs(w) ** 2 + abs(c) ** 2 * t * t
    znew = ((a * z + b) * w.conjugate() + a * c.conjugate() * t * t) / denom
    return H3Point(znew, t * det / denom)


def dist_h3(p: H3Point, q: H3Point) -> float:
    if p.t <= 0 or q.t <= 0:
        raise InvalidPoint("nonpositive height")
    num = math.sqrt(abs(p.z - q.z) ** 2 + (p.t - q.t) ** 2)
    return 2.0 * math.asinh(num / (2.0 * math.sqrt(p.t * q.t)))


def displacement(g: MoebiusMap, method: str = "action") -> float:
    """Distance d(g.o, o)."""
    if method == "action":
        return dist_h3(act_on_h3(g, O), O)
    if method == "frobenius":
        if g.is_singular():
            raise InvalidMap("singular matrix")
        det = abs(complex(g.det()))
        excess = max(g.frobenius2() - 2.0 * det, 0.0)
        return 2.0 * math.asinh(math.sqrt(excess / (4.0 * det)))
    raise ValueError(f"unknown method {method!r}")


def law_of_cosines_side(b: float, c: float, theta: float) -> float:
    """Side opposite the angle ``theta`` between sides ``b`` and ``c``."""
    if not 0.0 <= theta <= math.pi:
        raise InvalidAngle(f"angle {theta} outside [0, pi]")
    if b < 0 or c < 0:
        raise ValueError("side lengths must be nonnegative")
    # cosh a - 1 = 2 sinh^2((b-c)/2) + 2 sin^2(theta/2) sinh b sinh c, free of cancellation
    h = math.sinh((b - c) / 2.0) ** 2 + math.sin(theta / 2.0) ** 2 * math.sinh(b) * math.sinh(c)
    return 2.0 * math.asinh(math.sqrt(h))


def _to_ball(p: H3Point, base: H3Point):
    # move base to O by the similarity (z, t) -> ((z - z0)/t0, t/t0), then the Cayley map to the ball
    z = (p.z - base.z) / base.t
    t = p.t / base.t
    x, y = z.real, z.imag
    den = x * x + y * y + (t + 1.0) ** 2
    return np.array([2 * x, 2 * y, x * x + y * y + t * t - 1.0]) / den


def vertex_angle(p: H3Point, q: H3Point, r: H3Point) -> float:
    """Angle at ``p`` between the geodesics towards ``q`` and ``r``.

    Geodesics through the centre of the ball model are straight, so the tangent
    directions at ``p`` are the ball images of ``q`` and ``r`` once ``p`` sits at 0.
    """
    u, v = _to_ball(q, p), _to_ball(r, p)
    return math.atan2(float(np.linalg.norm(np.cross(u, v))), float(u @ v))


def to_hyperboloid(p: H3Point):
    x, y, t = p.z.real, p.z.imag, p.t
    s = x * x + y * y + t * t
    return np.array([(s + 1) / (2 * t), (s - 1) / (2 * t), x / t, y / t])


def minkowski(u, v):
    return -u[0] * v[0] + u[1] * v[1] + u[2] * v[2] + u[3] * v[3]


def lift_point(p: H3Point) -> MoebiusMap:
    """A map sending O to ``p``."""
    s = math.sqrt(p.t)
    return MoebiusMap(complex(s), p.z / s, 0j, complex(1 / s))


# -- one-parameter subgroups ------------------------------------------------

def a_t(t: float) -> MoebiusMap:
    return MoebiusMap(complex(math.exp(t / 2)), 0j, 0j, complex(math.exp(-t / 2)))


def r_theta(theta: float) -> MoebiusMap:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return MoebiusMap(complex(c), complex(s), complex(-s), complex(c))


@dataclass(frozen=True)
class FlowElement:
    """Symbolic a_t ('a') or r_theta ('r'); same-kind products add parameters exactly."""

    kind: str
    param: float

    def __post_init__(self):
        if self.kind not in ("a", "r"):
            raise ValueError("kind must be 'a' or 'r'")
        if self.kind == "r":
            object.__setattr__(self, "param", math.fmod(self.param, 2 * math.pi) % (2 * math.pi))

    def __matmul__(self, other):
        if isinstance(other, FlowElement) and other.kind == self.kind:
            return FlowElement(self.kind, self.param + other.param)
        if isinstance(other, FlowElement):
            return self.as_map() @ other.as_map()
        return self.as_map() @ other

    def as_map(self) -> MoebiusMap:
        return a_t(self.param) if self.kind == "a" else r_theta(self.param)


# -- vectorised helpers used by the dynamics engine ---------------------------

def act_batch(m, z, t):
    """Apply an (N,2,2) stack of matrices to N points (z, t); |det| arbitrary."""
    a, b, c, d = m[:, 0, 0], m[:, 0, 1], m[:, 1, 0], m[:, 1, 1]
    det = np.abs(a * d - b * c)
    w = c * z + d
    denom = np.abs(w) ** 2 + np.abs(c) ** 2 * t * t
    znew = ((a * z + b) * np.conj(w) + a * np.conj(c) * t * t) / denom
    return znew, t * det / denom


def cosh_dist(z1, t1, z2, t2):
    return 1.0 + (np.abs(z1 - z2) ** 2 + (t1 - t2) ** 2) / (2.0 * t1 * t2)


def dist_batch(z1, t1, z2, t2):
    num = np.sqrt(np.abs(z1 - z2) ** 2 + (t1 - t2) ** 2)
    return 2.0 * np.arcsinh(num / (2.0 * np.sqrt(t1 * t2)))
