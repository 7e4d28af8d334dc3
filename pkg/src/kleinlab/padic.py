"""p-adic valuations on rationals and the Bruhat-Tits tree of PGL2(Q_p).

Numbers stay exact rationals tagged with their prime; nothing here needs
truncated power series.
"""

from __future__ import annotations

from fractions import Fraction
import math

from .errors import InvalidMap, MixedScalarError

INF = math.inf


def vp_int(n: int, p: int) -> int:
    if n == 0:
        return INF
    n = abs(n)
    k = 0
    while n % p == 0:
        n //= p
        k += 1
    return k


def vp(x, p: int):
    """Exact p-adic valuation of a rational; +inf at zero."""
    x = Fraction(x)
    if x == 0:
        return INF
    return vp_int(x.numerator, p) - vp_int(x.denominator, p)


class PAdicScalar:
    __slots__ = ("value", "p")

    def __init__(self, value, p: int):
        if isinstance(value, float):
            raise MixedScalarError("PAdicScalar takes an exact rational")
        self.value = Fraction(value)
        self.p = int(p)

    @property
    def scalar_kind(self):
        return f"padic{self.p}"

    def from_int(self, n):
        return PAdicScalar(n, self.p)

    def _other(self, o):
        if isinstance(o, PAdicScalar):
            if o.p != self.p:
                raise MixedScalarError(f"primes {self.p} and {o.p} do not mix")
            return o.value
        if isinstance(o, int) and not isinstance(o, bool):
            return o
        raise MixedScalarError(f"cannot combine PAdicScalar with {type(o).__name__}")

    def __add__(self, o):
        return PAdicScalar(self.value + self._other(o), self.p)

    __radd__ = __add__

    def __sub__(self, o):
        return PAdicScalar(self.value - self._other(o), self.p)

    def __rsub__(self, o):
        return PAdicScalar(self._other(o) - self.value, self.p)

    def __mul__(self, o):
        return PAdicScalar(self.value * self._other(o), self.p)

    __rmul__ = __mul__

    def __truediv__(self, o):
        return PAdicScalar(self.value / self._other(o), self.p)

    def __rtruediv__(self, o):
        return PAdicScalar(self._other(o) / self.value, self.p)

    def __neg__(self):
        return PAdicScalar(-self.value, self.p)

    def __eq__(self, o):
        if isinstance(o, PAdicScalar):
            return self.p == o.p and self.value == o.value
        if isinstance(o, int):
            return self.value == o
        return NotImplemented

    def __hash__(self):
        return hash((self.value, self.p))

    def __bool__(self):
        return self.value != 0

    def __complex__(self):
        return complex(float(self.value))

    def conj(self):
        return self

    def valuation(self):
        return vp(self.value, self.p)

    def __repr__(self):
        return f"PAdicScalar({self.value}, p={self.p})"


def valuation(x, p=None):
    if isinstance(x, PAdicScalar):
        return x.valuation()
    if p is None:
        raise ValueError("prime required for a plain rational")
    return vp(x, p)


def padic_map(rows, p):
    """MoebiusMap with PAdicScalar entries from rational rows."""
    from .moebius import MoebiusMap

    (a, b), (c, d) = rows
    return MoebiusMap(*(PAdicScalar(e, p) for e in (a, b, c, d)))


def _prime_of(g):
    e = next(x for x in g.entries if isinstance(x, PAdicScalar))
    return e.p


def tree_distance(g) -> int:
    """d(g.o, o) on the Bruhat-Tits tree: gap between the elementary divisors of g."""
    if g.is_singular():
        raise InvalidMap("singular matrix")
    p = _prime_of(g)
    vals = [vp(e.value, p) for e in g.entries]
    return int(vp(g.det().value, p) - 2 * min(vals))


class TreeVertex:
    """Homothety class of the lattice spanned by the columns of a 2x2 rational matrix.

    The canonical form is the lower-triangular basis [[p^k, 0], [x, 1]] with
    x in Z[1/p] reduced into [0, 1); the key (k, x) is unique per class.
    """

    __slots__ = ("k", "x", "p")

    def __init__(self, k: int, x: Fraction, p: int):
        self.k, self.x, self.p = k, Fraction(x), p

    @classmethod
    def from_matrix(cls, rows, p: int):
        (a, b), (c, d) = [[Fraction(v) for v in r] for r in rows]
        if a * d - b * c == 0:
            raise InvalidMap("singular lattice basis")
        v1, v2 = [a, c], [b, d]
        # pivot: column whose top entry has the smaller valuation
        if vp(v2[0], p) < vp(v1[0], p):
            v1, v2 = v2, v1
        if v1[0] != 0:
            r = v2[0] / v1[0]
            v2 = [0, v2[1] - r * v1[1]]
        top, x = v1
        ka = vp(top, p)
        unit = top / Fraction(p) ** ka
        x = x / unit
        kc = vp(v2[1], p)
        # divide by p^kc so the second basis vector is (0, 1)
        x = x / Fraction(p) ** kc
        return cls(ka - kc, _reduce_mod_zp(x, p), p)

    def key(self):
        return (self.k, self.x)

    def __eq__(self, o):
        return isinstance(o, TreeVertex) and o.p == self.p and o.key() == self.key()

    def __hash__(self):
        return hash((self.p, self.key()))

    def __repr__(self):
        return f"TreeVertex(p={self.p}, k={self.k}, x={self.x})"


def _reduce_mod_zp(x: Fraction, p: int) -> Fraction:
    """Representative of x + Z_(p) of the form r / p^e with 0 <= r < p^e."""
    v = vp(x, p)
    if v >= 0:
        return Fraction(0)
    e = -v
    n = x * p**e  # a p-adic unit over an integer coprime to p
    mod = p**e
    r = (n.numerator * pow(n.denominator, -1, mod)) % mod
    return Fraction(r, mod)


def base_vertex(p: int) -> TreeVertex:
    return TreeVertex(0, Fraction(0), p)
