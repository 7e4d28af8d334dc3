"""Scalar variants used as matrix entries.

The Python type of an entry is its tag:

* ``int`` / ``Fraction``       -- exact rationals
* :class:`GaussianRational`     -- a + b i with rational a, b
* ``FieldElement``              -- element of a number field (see :mod:`kleinlab.numberfield`)
* ``PAdicScalar``               -- rational tagged with a prime (see :mod:`kleinlab.padic`)
* ``float`` / ``complex``       -- double precision, compared with :data:`TOL`

Plain ``int`` values are literals and adopt the variant of whatever they meet.
Any other mixture raises :class:`MixedScalarError`.
"""

from __future__ import annotations

from fractions import Fraction
import numbers

from .errors import MixedScalarError

#: Tolerance for every float projective / metric comparison.
TOL = 1e-9


class GaussianRational:
    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        if isinstance(re, float) or isinstance(im, float):
            raise MixedScalarError("GaussianRational takes exact parts only")
        self.re = Fraction(re)
        self.im = Fraction(im)

    @classmethod
    def _coerce(cls, other):
        if isinstance(other, GaussianRational):
            return other
        if isinstance(other, int):
            return cls(other, 0)
        raise MixedScalarError(f"cannot combine GaussianRational with {type(other).__name__}")

    def __add__(self, other):
        o = self._coerce(other)
        return GaussianRational(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        return GaussianRational(self.re - o.re, self.im - o.im)

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        o = self._coerce(other)
        return GaussianRational(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def __neg__(self):
        return GaussianRational(-self.re, -self.im)

    def norm(self) -> Fraction:
        return self.re * self.re + self.im * self.im

    def conj(self):
        return GaussianRational(self.re, -self.im)

    def inverse(self):
        n = self.norm()
        if n == 0:
            raise ZeroDivisionError("GaussianRational division by zero")
        return GaussianRational(self.re / n, -self.im / n)

    def __truediv__(self, other):
        return self * self._coerce(other).inverse()

    def __rtruediv__(self, other):
        return self._coerce(other) * self.inverse()

    def __eq__(self, other):
        if isinstance(other, int):
            return self.im == 0 and self.re == other
        if isinstance(other, GaussianRational):
            return self.re == other.re and self.im == other.im
        return NotImplemented

    def __hash__(self):
        return hash((self.re, self.im))

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    @property
    def real(self):
        return self.re

    @property
    def imag(self):
        return self.im

    def __repr__(self):
        return f"GaussianRational({self.re}, {self.im})"


def kind(x):
    """Variant tag of a scalar; ints report ``None`` (they are literals)."""
    if isinstance(x, bool):
        raise MixedScalarError("bool is not a scalar")
    if isinstance(x, int):
        return None
    if isinstance(x, Fraction):
        return "rational"
    if isinstance(x, GaussianRational):
        return "gaussian"
    tag = getattr(x, "scalar_kind", None)
    if tag is not None:
        return tag
    if isinstance(x, numbers.Complex):
        return "float"
    raise MixedScalarError(f"unsupported scalar {x!r}")


def common_kind(values):
    tags = {kind(v) for v in values} - {None}
    if len(tags) > 1:
        raise MixedScalarError(f"mixed scalar variants: {sorted(map(str, tags))}")
    return tags.pop() if tags else "rational"


def coerce(value, tag, like=None):
    """Bring an int literal into variant ``tag``; other values must already match."""
    if isinstance(value, int) and not isinstance(value, bool):
        if tag == "rational":
            return Fraction(value)
        if tag == "gaussian":
            return GaussianRational(value)
        if tag == "float":
            return complex(value)
        if like is not None and hasattr(like, "from_int"):
            return like.from_int(value)
        return value
    if kind(value) != tag:
        raise MixedScalarError(f"expected {tag} scalar, got {kind(value)}")
    if tag == "float":
        return complex(value)
    return value


def is_exact(tag) -> bool:
    return tag != "float"


def conj(x):
    if isinstance(x, (int, Fraction)):
        return x
    if isinstance(x, numbers.Complex):
        return x.conjugate()
    return x.conj()


def is_zero(x, tol=TOL) -> bool:
    if kind(x) == "float":
        return abs(x) <= tol
    return not x


def to_complex(x) -> complex:
    return complex(x)
