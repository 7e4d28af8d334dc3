"""Circles on the Riemann sphere as Hermitian forms, linked pairs and pencil inversions.

A circle is the zero set of Q(z) = A|z|^2 + conj(B) z + B conj(z) + C, i.e.
v^* H v = 0 for H = [[A, B], [conj(B), C]] and v = (z, 1). A = 0 is a line.
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np
from scipy.linalg import logm
from scipy.spatial import ConvexHull

from . import scalars
from .errors import DegenerateInput, OffCircle, OnCircle
from .moebius import MoebiusMap, ProjPoint
from .scalars import TOL


def _re(x):
    return x.real if not isinstance(x, scalars.GaussianRational) else x.re


class Circle:
    __slots__ = ("A", "B", "C", "tag")

    def __init__(self, A, B, C, *, check=True):
        tag = scalars.common_kind((A, B, C))
        like = next((e for e in (A, B, C) if scalars.kind(e) is not None), None)
        A, B, C = (scalars.coerce(e, tag, like) for e in (A, B, C))
        if tag == "float":
            A, C = float(A.real), float(C.real)
        self.A, self.B, self.C, self.tag = A, B, C, tag
        if check:
            disc = self.discriminant()
            if tag in ("rational", "gaussian"):
                bad = _re(disc) <= 0
            else:
                bad = complex(disc).real <= TOL * self._scale2()
            if bad:
                raise DegenerateInput("|B|^2 - AC must be positive")

    @classmethod
    def from_center_radius(cls, center: complex, radius: float):
        c = complex(center)
        return cls(1.0, -c, abs(c) ** 2 - radius * radius)

    def _scale2(self):
        return abs(complex(self.A)) ** 2 + 2 * abs(complex(self.B)) ** 2 + abs(complex(self.C)) ** 2

    def discriminant(self):
        d = self.B * scalars.conj(self.B) - self.A * self.C
        if self.tag == "float":
            return float(d.real)
        return d

    @property
    def is_line(self):
        return scalars.is_zero(self.A)

    def hermitian(self):
        return ((self.A, self.B), (scalars.conj(self.B), self.C))

    def as_array(self):
        return np.array([[complex(self.A), complex(self.B)], [complex(scalars.conj(self.B)), complex(self.C)]])

    def form(self, x: ProjPoint):
        """v^* H v for the homogeneous vector of ``x``; equals A at infinity = [1:0]."""
        r, s = x.r, x.s
        if self.tag == "float" or x.tag == "float":
            r, s = complex(r), complex(s)
            A, B, C = complex(self.A), complex(self.B), complex(self.C)
            return float((A * abs(r) ** 2 + 2 * (B * r.conjugate() * s).real + C * abs(s) ** 2).real)
        rc, sc = scalars.conj(r), scalars.conj(s)
        return self.A * r * rc + self.B * rc * s + scalars.conj(self.B) * r * sc + self.C * s * sc

    def normalized_form(self, x: ProjPoint) -> float:
        """Form value on the unit representative of x with a unit-norm H (float)."""
        v = x.unit_vector()
        H = self.as_array()
        H = H / np.linalg.norm(H)
        return float((np.conj(v) @ H @ v).real)

    def contains(self, x: ProjPoint, tol=TOL) -> bool:
        if scalars.is_exact(self.tag) and scalars.is_exact(x.tag):
            return not self.form(x)
        return abs(self.normalized_form(x)) <= tol

    def transform(self, g: MoebiusMap):
        """Image g(C): H' = (g^-1)^* H g^-1."""
        a, b, c, d = g.inverse().entries
        A, B, C = self.A, self.B, self.C
        Bc = scalars.conj(B)
        ac, bc, cc, dc = (scalars.conj(e) for e in (a, b, c, d))
        # (g^-1)^* H g^-1 with g^-1 = [[a, b], [c, d]]
        A2 = ac * (A * a + B * c) + cc * (Bc * a + C * c)
        B2 = ac * (A * b + B * d) + cc * (Bc * b + C * d)
        C2 = bc * (A * b + B * d) + dc * (Bc * b + C * d)
        if self.tag == "float":
            return Circle(complex(A2).real, complex(B2), complex(C2).real, check=False)
        return Circle(A2, B2, C2, check=False)

    def proj_equal(self, other, tol=TOL) -> bool:
        x, y = (self.A, self.B, self.C), (other.A, other.B, other.C)
        if scalars.is_exact(self.tag) and scalars.is_exact(other.tag):
            return all(not (x[i] * y[j] - x[j] * y[i]) for i in range(3) for j in range(i + 1, 3))
        u = np.array([complex(e) for e in x])
        v = np.array([complex(e) for e in y])
        cross = np.abs(np.outer(u, v) - np.outer(v, u)).max()
        return cross <= tol * np.linalg.norm(u) * np.linalg.norm(v)

    def scale_of(self, other):
        """lambda with other = lambda * self, or None when not proportional (exact)."""
        if not self.proj_equal(other):
            return None
        for s, o in zip((self.A, self.B, self.C), (other.A, other.B, other.C)):
            if not scalars.is_zero(s):
                return o / s
        return None

    def center(self):
        if self.is_line:
            raise ValueError("a line has no centre")
        return -complex(self.B) / complex(self.A)

    def radius(self):
        if self.is_line:
            return math.inf
        return math.sqrt(complex(self.discriminant()).real) / abs(complex(self.A))

    def to_float(self):
        return Circle(float(complex(self.A).real), complex(self.B), float(complex(self.C).real), check=False)

    def __repr__(self):
        return f"Circle(A={self.A}, B={self.B}, C={self.C})"


def circle_through(p1: ProjPoint, p2: ProjPoint, p3: ProjPoint) -> Circle:
    """Unique circle or line through three distinct points (exact for Gaussian rationals)."""
    pts = (p1, p2, p3)
    tag = scalars.common_kind([q.r for q in pts] + [q.s for q in pts])
    for i in range(3):
        for j in range(i + 1, 3):
            if pts[i] == pts[j]:
                raise DegenerateInput("circle_through needs three distinct points")
    rows = []
    for q in pts:
        r, s = q.r, q.s
        if tag == "float":
            r, s = complex(r), complex(s)
            w = r.conjugate() * s
            rows.append([abs(r) ** 2, 2 * w.real, -2 * w.imag, abs(s) ** 2])
        else:
            w = scalars.conj(r) * s
            rows.append([_re(r * scalars.conj(r)), 2 * _re(w), -2 * _im(w), _re(s * scalars.conj(s))])
    # kernel of the 3x4 system via signed 3x3 minors
    sol = []
    for k in range(4):
        cols = [c for c in range(4) if c != k]
        m = [[row[c] for c in cols] for row in rows]
        det3 = (m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]))
        sol.append(det3 if k % 2 == 0 else -det3)
    A, b1, b2, C = sol
    if tag == "float":
        v = np.array(sol, dtype=float)
        n = np.linalg.norm(v)
        if n == 0:
            raise DegenerateInput("points do not determine a circle")
        A, b1, b2, C = v / n
        return Circle(A, complex(b1, b2), C)
    if tag not in ("rational", "gaussian"):
        raise DegenerateInput(f"circle_through does not support {tag} points")
    if not (A or b1 or b2 or C):
        raise DegenerateInput("points do not determine a circle")
    # B is complex even for real points (the real line has B = i/2), so the
    # exact result always lives in the Gaussian variant
    G = scalars.GaussianRational
    return Circle(G(A), G(b1, b2), G(C))


def _im(x):
    return x.imag if not isinstance(x, scalars.GaussianRational) else x.im


def is_linked(xi: ProjPoint, xi2: ProjPoint, C: Circle, tol=TOL) -> bool:
    """True iff the two points lie in different components of the sphere minus C."""
    vals = []
    for x in (xi, xi2):
        if C.contains(x, tol):
            raise OnCircle(f"{x!r} lies on the circle")
        vals.append(C.form(x))
    if scalars.is_exact(C.tag) and scalars.is_exact(xi.tag):
        return _sign(vals[0]) * _sign(vals[1]) < 0
    return vals[0] * vals[1] < 0


def _sign(v):
    v = _re(v) if isinstance(v, scalars.GaussianRational) else v
    return (v > 0) - (v < 0)


@dataclass(frozen=True)
class LinkedPair:
    xi: ProjPoint
    xi2: ProjPoint
    circle: Circle

    def __post_init__(self):
        if self.xi == self.xi2:
            raise DegenerateInput("the two points coincide")
        if not is_linked(self.xi, self.xi2, self.circle):
            raise DegenerateInput("points are not separated by the circle")


def _to_infinity(x: ProjPoint) -> MoebiusMap:
    """Map z -> 1/(z - x), or the identity when x is already infinity."""
    one = scalars.coerce(1, x.tag, x.r)
    zero = scalars.coerce(0, x.tag, x.r)
    if x.is_infinity(0.0):
        return MoebiusMap(one, zero, zero, one)
    return MoebiusMap(zero, x.s, x.s, -x.r)


def pencil_inversion(pair: LinkedPair, p: ProjPoint, tol=TOL) -> ProjPoint:
    """Second intersection with C of the circle through xi, xi' and p."""
    C = pair.circle
    if not C.contains(p, tol):
        raise OffCircle(f"{p!r} is not on the circle")
    M = _to_infinity(pair.xi2)
    C2 = C.transform(M)
    z0 = M(p).affine()
    w = M(pair.xi).affine() - z0
    A, B = C2.A, C2.B
    if C2.tag == "float" or p.tag == "float":
        A, B, z0, w = complex(A).real, complex(B), complex(z0), complex(w)
        num = 2 * A * (z0 * w.conjugate()).real + 2 * (B.conjugate() * w).real
        den = A * abs(w) ** 2
        s = -num / den
        if abs(s) * abs(w) <= math.sqrt(tol) * (abs(z0) + abs(w) + 1):
            raise DegenerateInput("the pencil circle is tangent to C")
        q = ProjPoint(z0 + s * w, 1.0 + 0j)
    else:
        A = _re(A)
        num = 2 * A * _re(z0 * scalars.conj(w)) + 2 * _re(scalars.conj(B) * w)
        den = A * _re(w * scalars.conj(w))
        s = -num / den
        if not s:
            raise DegenerateInput("the pencil circle is tangent to C")
        if isinstance(w, scalars.GaussianRational):
            s = scalars.GaussianRational(s)
        one = scalars.coerce(1, p.tag, p.r)
        q = ProjPoint(z0 + s * w, one)
    return M.inverse()(q)


# -- chart C = PR ---------------------------------------------------------------

def _line_frame(C: Circle):
    # a line {2 Re(conj(B) z) + C = 0}: foot of the perpendicular from 0 and a unit direction
    B = complex(C.B)
    foot = -float(complex(C.C).real) * B / (2 * abs(B) ** 2)
    d = 1j * B / abs(B)
    if d.real < -TOL or (abs(d.real) <= TOL and d.imag < 0):
        d = -d
    return foot, d


def chart_coordinate(C: Circle, p: ProjPoint, level: float = 0.0) -> ProjPoint:
    """Stereographic coordinate of p in C from the top point of C onto the line Y = level.

    Coordinates are taken after normalising C to the unit circle by its centre and
    radius; for a line the pole is infinity and the coordinate is arclength from
    the foot of the perpendicular through 0.
    """
    if C.is_line:
        if p.is_infinity():
            return ProjPoint(1.0, 0.0)
        foot, d = _line_frame(C)
        z = complex(p.affine())
        return ProjPoint(((z - foot) * d.conjugate()).real + 0j, 1.0 + 0j)
    if p.is_infinity():
        raise OffCircle("infinity is not on a circle")
    c, R = C.center(), C.radius()
    u = (complex(p.affine()) - c) / R
    X, Y = u.real, u.imag
    if abs(1 - Y) <= 1e-12 and abs(X) <= 1e-6:
        return ProjPoint(1.0 + 0j, 0j)
    # homogeneous form of X (1 - level) / (1 - Y), stable near the pole
    return ProjPoint(X * (1 - level) + 0j, (1 - Y) + 0j)


def chart_point(C: Circle, a: ProjPoint, level: float = 0.0) -> ProjPoint:
    if C.is_line:
        if a.is_infinity():
            return ProjPoint(1.0 + 0j, 0j)
        foot, d = _line_frame(C)
        return ProjPoint(foot + complex(a.affine()).real * d, 1.0 + 0j)
    c, R = C.center(), C.radius()
    if a.is_infinity():
        return ProjPoint(c + 1j * R, 1.0 + 0j)
    r, s = complex(a.r).real, complex(a.s).real
    # a' = a / (1 - level) on the equatorial line, then inverse stereographic
    r, s = r, s * (1 - level)
    den = r * r + s * s
    u = complex(2 * r * s, r * r - s * s) / den
    return ProjPoint(c + R * u, 1.0 + 0j)


def fit_moebius_real(pairs):
    """Real projective matrix sending x_k to y_k for three pairs of real chart points."""
    rows = []
    for x, y in pairs:
        xr, xs = complex(x.r).real, complex(x.s).real
        yr, ys = complex(y.r).real, complex(y.s).real
        # ys (a xr + b xs) - yr (c xr + d xs) = 0
        rows.append([ys * xr, ys * xs, -yr * xr, -yr * xs])
    _, sv, vt = np.linalg.svd(np.array(rows))
    a, b, c, d = vt[-1]
    det = a * d - b * c
    if abs(det) <= 1e-12:
        raise DegenerateInput("image pairs do not determine a Moebius map")
    k = 1.0 / math.sqrt(abs(det))
    a, b, c, d = a * k, b * k, c * k, d * k
    lead = next(e for e in (c, b, a, d) if abs(e) > 1e-12)
    if lead < 0:
        a, b, c, d = -a, -b, -c, -d
    return MoebiusMap(complex(a), complex(b), complex(c), complex(d))


SAMPLE_CHART = (ProjPoint(0j, 1 + 0j), ProjPoint(1 + 0j, 1 + 0j), ProjPoint(-1 + 0j, 1 + 0j))


def inversion_as_moebius(pair: LinkedPair, level: float = 0.0, samples=SAMPLE_CHART) -> MoebiusMap:
    """The pencil inversion as a real matrix on the chart of C, normalised to |det| = 1.

    Fixed-point free involutions have trace 0 and positive determinant, so the
    result lies in {[[a, b], [c, -a]] : a^2 + bc = -1} up to rounding.
    """
    C = pair.circle if pair.circle.tag == "float" else pair.circle.to_float()
    fpair = LinkedPair(_float_point(pair.xi), _float_point(pair.xi2), C)
    data = []
    for a in samples:
        p = chart_point(C, a, level)
        q = pencil_inversion(fpair, p)
        data.append((a, chart_coordinate(C, q, level)))
    return fit_moebius_real(data)


def _float_point(x: ProjPoint) -> ProjPoint:
    if x.tag == "float":
        return x
    return ProjPoint(complex(x.r), complex(x.s))


def real_trace_ratio(m: MoebiusMap) -> float:
    return abs(complex(m.trace())) / np.linalg.norm(m.as_array())


# -- generation surrogate ---------------------------------------------------------

def _sl2_log(m):
    m = np.real_if_close(m)
    m = np.asarray(m, dtype=float)
    m = m / math.sqrt(abs(np.linalg.det(m)))
    if np.trace(m) < 0:
        m = -m
    X = np.real(logm(m))
    # coordinates in the basis H, E, F of sl2
    return np.array([X[0, 0], X[0, 1], X[1, 0]])


def generation_radius(inversions, near=0.5, max_products=4000, seed=0) -> float:
    """Inradius at 0 of the hull of log(q^-1 q') for q, q' in Q = (g I)(g' I).

    A positive radius means the products fill a neighbourhood of the identity
    in PSL2(R). Returns 0 when the identity is not interior.
    """
    rng = np.random.default_rng(seed)
    mats = [m.as_array().real for m in inversions]
    if len(mats) < 4:
        raise DegenerateInput("need at least four inversions")
    g, g2 = mats[0], mats[1]
    rest = mats[2:]
    Q = [g @ x @ g2 @ y for x in rest for y in rest]
    logs = []
    idx = rng.integers(0, len(Q), size=(max_products, 2))
    for i, j in idx:
        if i == j:
            continue
        prod = np.linalg.inv(Q[i]) @ Q[j]
        prod = prod / math.sqrt(abs(np.linalg.det(prod)))
        if np.trace(prod) < 0:
            prod = -prod
        if np.linalg.norm(prod - np.eye(2)) > near:
            continue
        logs.append(_sl2_log(prod))
    if len(logs) < 8:
        return 0.0
    hull = ConvexHull(np.array(logs))
    # facet equations n.x + off <= 0 inside; distance from 0 to each facet is -off
    offsets = hull.equations[:, -1]
    if np.any(offsets >= 0):
        return 0.0
    return float(np.min(-offsets))


# -- the invariant measure sigma ----------------------------------------------------

@dataclass(frozen=True)
class CircleSample:
    center: complex
    radius: float
    weight: float


def sigma_density(center, radius):
    """Density of the PGL2(C)-invariant measure on circles in (x, y, r) coordinates."""
    return 1.0 / np.asarray(radius, dtype=float) ** 3


def _check_window(window):
    (x0, x1), (y0, y1), (r0, r1) = window
    if x0 > x1 or y0 > y1 or r0 > r1 or r0 <= 0:
        raise DegenerateInput(f"empty or invalid window {window}")
    return x0, x1, y0, y1, r0, r1


def sample_circle_arrays(window, n: int, seed):
    """(centers, radii) i.i.d. from sigma restricted to window = ((x0,x1),(y0,y1),(r0,r1))."""
    x0, x1, y0, y1, r0, r1 = _check_window(window)
    rng = np.random.default_rng(seed)
    x = rng.uniform(x0, x1, n) if x1 > x0 else np.full(n, float(x0))
    y = rng.uniform(y0, y1, n) if y1 > y0 else np.full(n, float(y0))
    if r1 > r0:
        # inverse CDF of r^-3 on [r0, r1]
        u = rng.uniform(0.0, 1.0, n)
        a, b = r0 ** -2, r1 ** -2
        r = (a - u * (a - b)) ** -0.5
    else:
        r = np.full(n, float(r0))
    return x + 1j * y, r


def sample_circles(window, n: int, seed):
    centers, radii = sample_circle_arrays(window, n, seed)
    w = sigma_density(centers, radii)
    return [CircleSample(complex(c), float(r), float(k)) for c, r, k in zip(centers, radii, w)]


def random_linked_pairs(n: int, seed, window=((-1.0, 1.0), (-1.0, 1.0), (0.5, 2.0))):
    """n random (LinkedPair, point on C): one point inside C, one outside, well away from C."""
    centers, radii = sample_circle_arrays(window, n, seed)
    rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(1)[0])
    out = []
    for c, r in zip(centers, radii):
        C = Circle.from_center_radius(complex(c), float(r))
        a1, a2, a3 = rng.uniform(0, 2 * math.pi, 3)
        rho_in, rho_out = rng.uniform(0.0, 0.8), rng.uniform(1.25, 4.0)
        xi = ProjPoint(complex(c + r * rho_in * np.exp(1j * a1)), 1.0 + 0j)
        xi2 = ProjPoint(complex(c + r * rho_out * np.exp(1j * a2)), 1.0 + 0j)
        p = ProjPoint(complex(c + r * np.exp(1j * a3)), 1.0 + 0j)
        out.append((LinkedPair(xi, xi2, C), p))
    return out
