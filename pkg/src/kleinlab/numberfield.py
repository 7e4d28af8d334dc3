"""Exact number fields Q(theta) = Q[x]/(f), Galois embeddings and places.

Elements are coordinate vectors in the power basis 1, theta, ..., theta^(n-1)
with Fraction entries. The defining polynomial must be monic with integer
coefficients, so theta is an algebraic integer and Z[theta] sits inside the
ring of integers.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from functools import cached_property
import math
import warnings

import numpy as np
import sympy as sp

from .errors import KleinlabError, Unsupported, ValidationError
from .padic import INF, vp, vp_int

X = sp.Symbol("x")


def _lcm(values):
    out = 1
    for v in values:
        out = out * v // math.gcd(out, v)
    return out


def _fr(v):
    if isinstance(v, Fraction):
        return v
    if isinstance(v, (int, sp.Integer)):
        return Fraction(int(v))
    if isinstance(v, sp.Rational):
        return Fraction(int(v.p), int(v.q))
    if isinstance(v, float):
        raise ValidationError("floats are not exact field coordinates")
    return Fraction(v)


class NumberField:
    """Q[x]/(f) for a monic irreducible integer polynomial f.

    ``root`` optionally picks the identity embedding (the nearest complex
    root); the default is the root with the largest imaginary part, then the
    largest real part.
    """

    def __init__(self, coeffs, root=None, name=None):
        """``coeffs``: integer coefficients from the leading term down."""
        coeffs = [_fr(c) for c in coeffs]
        while coeffs and coeffs[0] == 0:
            coeffs.pop(0)
        if len(coeffs) < 2:
            raise ValidationError("defining polynomial must have degree >= 1")
        if coeffs[0] != 1 or any(c.denominator != 1 for c in coeffs):
            raise ValidationError("defining polynomial must be monic with integer coefficients")
        self.coeffs = tuple(int(c) for c in coeffs)
        self.degree = len(coeffs) - 1
        poly = sp.Poly(list(self.coeffs), X)
        if not poly.is_irreducible:
            raise ValidationError(f"{poly.as_expr()} is reducible over Q")
        self.poly = poly
        self.name = name
        self.roots = _polished_roots(self.coeffs)
        if root is None:
            self.id_index = max(range(self.degree), key=lambda i: (round(self.roots[i].imag, 9), self.roots[i].real))
        else:
            root = complex(root)
            self.id_index = int(np.argmin([abs(r - root) for r in self.roots]))
        # x^k for k < 2n - 1 in the power basis (integers, since f is monic)
        n = self.degree
        table = []
        cur = [0] * n
        cur[0] = 1
        low = [-c for c in reversed(self.coeffs[1:])]  # x^n = sum low[i] x^i
        for _ in range(2 * n - 1):
            table.append(tuple(cur))
            top = cur[-1]
            cur = [0] + cur[:-1]
            cur = [cur[i] + top * low[i] for i in range(n)]
        self._pow = table
        self._mul_tensor = np.zeros((n, n, n), dtype=np.int64)
        for i in range(n):
            for j in range(n):
                self._mul_tensor[i, j] = table[i + j]

    # -- identity and bookkeeping
    @property
    def key(self):
        return self.coeffs

    @property
    def tag(self):
        return "nf" + ",".join(map(str, self.coeffs))

    def __eq__(self, other):
        return isinstance(other, NumberField) and other.coeffs == self.coeffs

    def __hash__(self):
        return hash(self.coeffs)

    def __repr__(self):
        return f"NumberField({self.poly.as_expr()})"

    def __call__(self, value):
        if isinstance(value, FieldElement):
            if value.field != self:
                raise ValidationError("element of a different field")
            return value
        if isinstance(value, (list, tuple)):
            coords = [_fr(v) for v in value] + [Fraction(0)] * (self.degree - len(value))
            return FieldElement(self, coords[: self.degree])
        return FieldElement(self, [_fr(value)] + [Fraction(0)] * (self.degree - 1))

    def gen(self):
        if self.degree == 1:
            return self(-self.coeffs[1])
        return self([0, 1])

    def zero(self):
        return self(0)

    def one(self):
        return self(1)

    def from_expr(self, expr):
        """Element from a sympy expression or string polynomial in x."""
        if isinstance(expr, str):
            expr = parse_poly_expr(expr)
        poly = sp.Poly(expr, X, domain="QQ")
        rem = poly.rem(sp.Poly(list(self.coeffs), X, domain="QQ"))
        cs = [_fr(c) for c in reversed(rem.all_coeffs())]
        return self(cs)

    # -- embeddings
    @property
    def id_root(self) -> complex:
        return self.roots[self.id_index]

    @cached_property
    def real_indices(self):
        return [i for i, r in enumerate(self.roots) if abs(r.imag) <= 1e-9 * max(1.0, abs(r))]

    def conjugate_index(self, i) -> int:
        r = self.roots[i].conjugate()
        return int(np.argmin([abs(s - r) for s in self.roots]))

    @cached_property
    def conj_coords(self):
        """Power-basis coordinates of conj(theta) under the identity embedding."""
        if self.id_index in self.real_indices:
            return None
        if self.degree == 2:
            b = self.coeffs[1]
            return (Fraction(-b), Fraction(-1))
        raise Unsupported("complex conjugation is only implemented for quadratic or real fields")

    def is_closed_under_conj(self):
        try:
            self.conj_coords
        except Unsupported:
            return False
        return True


def _polished_roots(coeffs):
    roots = np.roots(np.array(coeffs, dtype=float)).astype(complex)
    p = np.poly1d(np.array(coeffs, dtype=float))
    dp = p.deriv()
    for _ in range(4):
        d = dp(roots)
        ok = np.abs(d) > 0
        roots[ok] = roots[ok] - p(roots[ok]) / d[ok]
    order = sorted(range(len(roots)), key=lambda i: (roots[i].real, roots[i].imag))
    return [complex(roots[i]) for i in order]


class FieldElement:
    __slots__ = ("field", "coords")

    def __init__(self, field: NumberField, coords):
        self.field = field
        self.coords = tuple(coords)

    @property
    def scalar_kind(self):
        return self.field.tag

    def from_int(self, n):
        return self.field(n)

    def _coerce(self, o):
        if isinstance(o, FieldElement):
            if o.field is not self.field and o.field != self.field:
                from .errors import MixedScalarError
                raise MixedScalarError("elements of different number fields")
            return o
        if isinstance(o, int) and not isinstance(o, bool):
            return self.field(o)
        from .errors import MixedScalarError
        raise MixedScalarError(f"cannot combine FieldElement with {type(o).__name__}")

    def __add__(self, o):
        o = self._coerce(o)
        return FieldElement(self.field, [a + b for a, b in zip(self.coords, o.coords)])

    __radd__ = __add__

    def __neg__(self):
        return FieldElement(self.field, [-a for a in self.coords])

    def __sub__(self, o):
        return self + (-self._coerce(o))

    def __rsub__(self, o):
        return self._coerce(o) - self

    def __mul__(self, o):
        o = self._coerce(o)
        n = self.field.degree
        if n == 1:
            return FieldElement(self.field, [self.coords[0] * o.coords[0]])
        conv = [Fraction(0)] * (2 * n - 1)
        for i, a in enumerate(self.coords):
            if a:
                for j, b in enumerate(o.coords):
                    if b:
                        conv[i + j] += a * b
        out = list(conv[:n])
        pw = self.field._pow
        for k in range(n, 2 * n - 1):
            c = conv[k]
            if c:
                row = pw[k]
                for j in range(n):
                    if row[j]:
                        out[j] += c * row[j]
        return FieldElement(self.field, out)

    __rmul__ = __mul__

    def mult_matrix(self):
        """Matrix of y -> self * y in the power basis (columns = images of basis)."""
        n = self.field.degree
        cols = []
        basis_el = self.field.one()
        theta = self.field.gen() if n > 1 else None
        for j in range(n):
            cols.append((self * basis_el).coords)
            if theta is not None:
                basis_el = basis_el * theta
        return [[cols[j][i] for j in range(n)] for i in range(n)]

    def inverse(self):
        if not self:
            raise ZeroDivisionError("inverse of zero")
        m = self.mult_matrix()
        rhs = [Fraction(1)] + [Fraction(0)] * (self.field.degree - 1)
        return FieldElement(self.field, _solve(m, rhs))

    def __truediv__(self, o):
        return self * self._coerce(o).inverse()

    def __rtruediv__(self, o):
        return self._coerce(o) * self.inverse()

    def __pow__(self, k: int):
        if k < 0:
            return self.inverse() ** (-k)
        out, base = self.field.one(), self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def __eq__(self, o):
        if isinstance(o, FieldElement):
            return self.field == o.field and self.coords == o.coords
        if isinstance(o, int):
            return self.coords[0] == o and not any(self.coords[1:])
        return NotImplemented

    def __hash__(self):
        return hash((self.field.coeffs, self.coords))

    def __bool__(self):
        return any(self.coords)

    # -- invariants
    def charpoly(self):
        """Characteristic polynomial of multiplication, coefficients from the top."""
        return _charpoly(self.mult_matrix())

    def minpoly(self):
        cp = sp.Poly([sp.Rational(c.numerator, c.denominator) for c in self.charpoly()], X, domain="QQ")
        m = sp.Poly(sp.sqf_part(cp.as_expr()), X, domain="QQ").monic()
        return [_fr(c) for c in m.all_coeffs()]

    def is_rational(self):
        return not any(self.coords[1:])

    def is_integral(self):
        return all(c.denominator == 1 for c in self.minpoly())

    def norm(self) -> Fraction:
        cp = self.charpoly()
        n = self.field.degree
        return (-1) ** n * cp[-1]

    def trace(self) -> Fraction:
        return sum(self.mult_matrix()[i][i] for i in range(self.field.degree))

    def conj(self):
        """Complex conjugate under the identity embedding (a field automorphism)."""
        cc = self.field.conj_coords
        if cc is None:
            return self
        t = self.field(list(cc))
        out = self.field.zero()
        pw = self.field.one()
        for a in self.coords:
            if a:
                out = out + pw * self.field(a)
            pw = pw * t
        return out

    def embed(self, index=None) -> complex:
        r = self.field.roots[self.field.id_index if index is None else index]
        acc = 0j
        for a in reversed(self.coords):
            acc = acc * r + float(a)
        return acc

    def __complex__(self):
        return self.embed()

    @property
    def real(self):
        return self.embed().real

    @property
    def imag(self):
        return self.embed().imag

    def __str__(self):
        poly = sum(sp.Rational(c.numerator, c.denominator) * X**i for i, c in enumerate(self.coords))
        return sp.sstr(poly)

    def __repr__(self):
        return f"FieldElement({self})"


def _solve(m, rhs):
    n = len(m)
    a = [list(row) + [rhs[i]] for i, row in enumerate(m)]
    for col in range(n):
        piv = next(r for r in range(col, n) if a[r][col] != 0)
        a[col], a[piv] = a[piv], a[col]
        inv = 1 / a[col][col]
        a[col] = [v * inv for v in a[col]]
        for r in range(n):
            if r != col and a[r][col] != 0:
                f = a[r][col]
                a[r] = [u - f * v for u, v in zip(a[r], a[col])]
    return [a[i][n] for i in range(n)]


def _charpoly(m):
    """Faddeev-LeVerrier; returns [1, c_{n-1}, ..., c_0]."""
    n = len(m)
    coeffs = [Fraction(1)]
    mk = [[Fraction(0)] * n for _ in range(n)]
    ident = [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    c = Fraction(1)
    for k in range(1, n + 1):
        # M_k = A (M_{k-1} + c_{k-1} I)
        inner = [[mk[i][j] + c * ident[i][j] for j in range(n)] for i in range(n)]
        mk = [[sum(m[i][t] * inner[t][j] for t in range(n)) for j in range(n)] for i in range(n)]
        c = -sum(mk[i][i] for i in range(n)) / k
        coeffs.append(c)
    return coeffs


# -- embeddings and places ---------------------------------------------------------

@dataclass(frozen=True)
class Embedding:
    """sigma: L -> C, theta -> roots[index]."""

    field: NumberField = dc_field(compare=False)
    index: int = 0

    @property
    def root(self):
        return self.field.roots[self.index]

    @property
    def is_real(self):
        return self.index in self.field.real_indices

    @property
    def conjugate_index(self):
        return self.field.conjugate_index(self.index)

    @property
    def is_identity_class(self):
        return self.index in (self.field.id_index, self.field.conjugate_index(self.field.id_index))

    def __call__(self, x):
        if isinstance(x, FieldElement):
            return x.embed(self.index)
        return complex(x)

    def matrix(self, g):
        return np.array([[self(g.a), self(g.b)], [self(g.c), self(g.d)]], dtype=complex)

    def __repr__(self):
        return f"Embedding(root={self.root:.6g})"


def galois_embeddings(L: NumberField):
    """One embedding per real root and per conjugate pair; identity class first."""
    seen = set()
    out = []
    order = [L.id_index] + [i for i in range(L.degree) if i != L.id_index]
    for i in order:
        if i in seen:
            continue
        j = L.conjugate_index(i)
        seen.update({i, j})
        out.append(Embedding(L, i))
    return out


def embedding_at(L: NumberField, index: int) -> Embedding:
    return Embedding(L, index)


def conjugate_embedding(L: NumberField) -> Embedding:
    return Embedding(L, L.conjugate_index(L.id_index))


@dataclass(frozen=True)
class ArchimedeanPlace:
    embedding: Embedding

    @property
    def label(self):
        return f"archimedean(root={self.embedding.root:.6g})"


@dataclass(frozen=True)
class FinitePlace:
    """Prime above p from a factor of f mod p (Kummer-Dedekind)."""

    field: NumberField = dc_field(compare=False)
    p: int = 2
    factor: tuple = ()  # coefficients mod p, leading first
    e: int = 1
    f: int = 1
    unique: bool = False
    regular: bool = True  # p does not divide [O_L : Z[theta]] at this factor

    @property
    def label(self):
        return f"finite(p={self.p}, f={self.f}, e={self.e})"

    def valuation(self, x: FieldElement):
        """Valuation normalised to extend v_p (so v(p) = 1)."""
        x = self.field(x) if not isinstance(x, FieldElement) else x
        if not x:
            return INF
        if x.is_rational():
            return Fraction(vp(x.coords[0], self.p))
        if not self.regular:
            raise Unsupported(f"p = {self.p} divides the index of Z[theta]; place data unavailable")
        if self.unique:
            return Fraction(vp(x.norm(), self.p), self.field.degree)
        if self.f == 1 and self.e == 1:
            return Fraction(_split_valuation(x, self.p, self.factor))
        raise Unsupported(f"valuation at a non-split place above {self.p}")


def _split_valuation(x: FieldElement, p: int, factor):
    coeffs = x.field.coeffs
    r = (-factor[1] * pow(factor[0], -1, p)) % p
    den = _lcm([c.denominator for c in x.coords])
    ys = [int(c * den) for c in x.coords]
    K = 32
    while K <= 4096:
        mod = p**K
        root = _hensel(coeffs, r, p, K)
        s = 0
        for y in reversed(ys):
            s = (s * root + y) % mod
        if s:
            return vp_int(s, p) - vp_int(den, p)
        K *= 2
    raise KleinlabError("valuation exceeds working precision")


def _hensel(coeffs, r, p, K):
    mod = p**K
    f = lambda t: sum(c * pow(t, len(coeffs) - 1 - i, mod) for i, c in enumerate(coeffs)) % mod
    df = lambda t: sum(c * (len(coeffs) - 1 - i) * pow(t, len(coeffs) - 2 - i, mod)
                       for i, c in enumerate(coeffs[:-1])) % mod
    prec = 1
    while prec < K:
        prec = min(2 * prec, K)
        m = p**prec
        r = (r - f(r) * pow(df(r) % m, -1, m)) % m
    return r


def finite_places(L: NumberField, p: int):
    with warnings.catch_warnings():
        # sympy sorts GF(p) factors with a deprecated comparison
        warnings.simplefilter("ignore")
        _, factors = sp.factor_list(L.poly.as_expr(), X, modulus=p)
    out = []
    fpoly = sp.Poly(list(L.coeffs), X, modulus=p)
    unique = len(factors) == 1
    for g, e in factors:
        gp = sp.Poly(g, X, modulus=p)
        regular = True
        if e > 1:
            regular = _dedekind_ok(L, factors, p, gp)
        coeffs = tuple(int(c) % p for c in gp.monic().all_coeffs())
        out.append(FinitePlace(L, p, coeffs, int(e), gp.degree(), unique, regular))
    return out


def _dedekind_ok(L, factors, p, g):
    # f = prod g_i^e_i + p F over Z; p is regular at g iff gcd(F mod p, g) = 1
    h = sp.Integer(1)
    for gi, ei in factors:
        h *= sp.Poly(gi, X, modulus=p).set_modulus(p).as_expr() ** ei
    lift = sp.Poly(sp.expand(h), X, domain="ZZ")
    diff = sp.Poly(list(L.coeffs), X, domain="ZZ") - lift
    F = sp.Poly([sp.Integer(int(c)) // p for c in diff.all_coeffs()], X, domain="ZZ")
    Fp = sp.Poly(F.as_expr(), X, modulus=p)
    if Fp.is_zero:
        return False
    return sp.gcd(Fp, g).degree() == 0


def parse_poly_expr(text: str):
    import re
    from sympy.parsing.sympy_parser import convert_xor, parse_expr, standard_transformations

    text = text.strip()
    if not text or not re.fullmatch(r"[0-9x+\-*/^() ]+", text):
        raise ValidationError(f"not a rational polynomial in x: {text!r}")
    try:
        return parse_expr(text, local_dict={"x": X}, transformations=standard_transformations + (convert_xor,))
    except Exception as exc:  # sympy raises a zoo of types
        raise ValidationError(f"cannot parse {text!r}: {exc}") from None


def field_from_string(minpoly: str, root=None) -> NumberField:
    expr = parse_poly_expr(minpoly)
    poly = sp.Poly(expr, X)
    if poly.degree() < 1:
        raise ValidationError("minpoly must have degree >= 1")
    return NumberField([_fr(c) for c in poly.all_coeffs()], root=root)
