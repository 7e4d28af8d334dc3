"""Trace fields, boundedness of Galois conjugates and the arithmeticity verdict.

A group is given by generators in SL2 of an ambient number field. The verdict
follows the classical criterion: traces are algebraic integers, and every
Galois conjugate of the trace field other than the identity place (and its
complex conjugate) sends the group into a compact group, which for SL2 means
all conjugated traces are real and lie in [-2, 2].
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from fractions import Fraction
import math
import re

import numpy as np
import sympy as sp

from .errors import BudgetExceeded, PresentationError, PrimitiveElementFailure, ValidationError
from .moebius import MoebiusMap
from .numberfield import (
    Embedding, FieldElement, FinitePlace, NumberField, X, _charpoly, _fr,
    field_from_string, finite_places, galois_embeddings, parse_poly_expr,
)
from .padic import vp

WORD_BUDGET = 10**6
TRACE_TOL = 1e-8


@dataclass
class GroupPresentation:
    gens: list
    labels: list = None
    field: NumberField = None

    def __post_init__(self):
        if not self.gens:
            raise ValidationError("a presentation needs at least one generator")
        if self.labels is None:
            self.labels = [f"g{i}" for i in range(len(self.gens))]
        fields = {e.field for g in self.gens for e in g.entries if isinstance(e, FieldElement)}
        if len(fields) != 1 or any(not isinstance(e, FieldElement) for g in self.gens for e in g.entries):
            raise ValidationError("generators must have entries in one number field")
        self.field = fields.pop()
        for g, lab in zip(self.gens, self.labels):
            if g.is_singular():
                raise ValidationError(f"generator {lab} is singular")

    def require_unimodular(self):
        for g, lab in zip(self.gens, self.labels):
            if g.det() != 1:
                raise ValidationError(f"generator {lab} must have determinant 1 for trace computations")

    def letters(self):
        """Generators and inverses: (labels, maps, index of inverse letter)."""
        labs, maps, inv = [], [], []
        k = len(self.gens)
        for i, g in enumerate(self.gens):
            labs += [self.labels[i], self.labels[i] + "^-1"]
            maps += [g, g.inverse()]
        for i in range(2 * k):
            inv.append(i ^ 1)
        return labs, maps, inv

    def word_map(self, word):
        """Product of letters (indices into ``letters``)."""
        _, maps, _ = self.letters()
        out = MoebiusMap.identity(maps[0])
        for i in word:
            out = out @ maps[i]
        return out

    def word_label(self, word):
        labs, _, _ = self.letters()
        return " ".join(labs[i] for i in word) or "1"


def count_reduced_words(n_letters, max_len):
    total, level = 1, 1
    for L in range(1, max_len + 1):
        level = n_letters if L == 1 else level * (n_letters - 1)
        total += level
    return total


def _check_budget(pres, word_len, budget=WORD_BUDGET):
    n = count_reduced_words(2 * len(pres.gens), word_len)
    if n > budget:
        raise BudgetExceeded(f"{n} words up to length {word_len} exceed the budget of {budget}")
    return n


def iter_word_levels_numeric(mats, inv, max_len):
    """Yield (words, matrices) level by level over all reduced words, length 1..max_len."""
    mats = np.asarray(mats)
    k = len(mats)
    words = np.arange(k)[:, None]
    cur = mats.copy()
    yield words, cur
    for _ in range(2, max_len + 1):
        last = words[:, -1]
        new_words, new_mats = [], []
        for j in range(k):
            keep = inv[j] != last
            if not keep.any():
                continue
            new_words.append(np.hstack([words[keep], np.full((keep.sum(), 1), j)]))
            new_mats.append(cur[keep] @ mats[j])
        words = np.vstack(new_words)
        cur = np.concatenate(new_mats)
        yield words, cur


def iter_words_exact(pres, max_len):
    """Yield (word, map) in shortlex order with exact arithmetic."""
    _, maps, inv = pres.letters()
    level = [((i,), m) for i, m in enumerate(maps)]
    for L in range(1, max_len + 1):
        if L > 1:
            nxt = []
            for w, m in level:
                for j, g in enumerate(maps):
                    if inv[j] != w[-1]:
                        nxt.append((w + (j,), m @ g))
            level = nxt
        yield from level


# -- trace field ---------------------------------------------------------------------

class _Span:
    """Echelon basis of a Q-subspace of the ambient field."""

    def __init__(self, n):
        self.n = n
        self.rows = []  # (pivot, coords)
        self.elements = []

    def reduce(self, v):
        v = list(v)
        for piv, row in self.rows:
            if v[piv]:
                f = v[piv]
                v = [a - f * b for a, b in zip(v, row)]
        return v

    def add(self, el):
        v = self.reduce(el.coords)
        piv = next((i for i, a in enumerate(v) if a), None)
        if piv is None:
            return False
        inv = 1 / v[piv]
        self.rows.append((piv, [a * inv for a in v]))
        self.elements.append(el)
        return True

    @property
    def dim(self):
        return len(self.rows)


def generating_traces(pres):
    """tr g_i, tr g_i g_j (i < j) and tr g_i g_j g_k (i < j < k)."""
    pres.require_unimodular()
    g = pres.gens
    k = len(g)
    out = [x.trace() for x in g]
    for i in range(k):
        for j in range(i + 1, k):
            out.append((g[i] @ g[j]).trace())
            for l in range(j + 1, k):
                out.append((g[i] @ g[j] @ g[l]).trace())
    return out


def _is_primitive(c, d):
    span = _Span(c.field.degree)
    p = c.field.one()
    for _ in range(d):
        if not span.add(p):
            return False
        p = p * c
    return True


def _rational_minpoly(c):
    cp = c.charpoly()
    poly = sp.Poly([sp.Rational(a.numerator, a.denominator) for a in cp], X, domain="QQ")
    m = sp.Poly(sp.sqf_part(poly.as_expr()), X, domain="QQ").monic()
    return [_fr(a) for a in m.all_coeffs()]


def _isqrt_exact(n):
    r = math.isqrt(n)
    return r if r * r == n else None


def _squarefree(n):
    sign = -1 if n < 0 else 1
    n = abs(n)
    out = 1
    for p, e in sp.factorint(n).items():
        if e % 2:
            out *= p
    return sign * out


def trace_field(pres: GroupPresentation, max_tries: int = 20) -> NumberField:
    """The field generated over Q by the traces of words of length <= 3.

    The result carries ``primitive`` (its generator as an element of the
    ambient field) and ``ambient``.
    """
    K = pres.field
    traces = generating_traces(pres)
    span = _Span(K.degree)
    span.add(K.one())
    for t in traces:
        span.add(t)
    changed = True
    while changed:
        changed = False
        els = list(span.elements)
        for i in range(len(els)):
            for j in range(i, len(els)):
                if span.add(els[i] * els[j]):
                    changed = True
    d = span.dim
    basis = span.elements[1:]
    if d == 1:
        prim = K.zero()
        L = NumberField([1, 0], name="Q")
    else:
        prim = None
        for m in range(1, max_tries + 1):
            cand = K.zero()
            for k, b in enumerate(basis):
                cand = cand + b * K(m**k)
            if _is_primitive(cand, d):
                prim = cand
                break
        if prim is None:
            raise PrimitiveElementFailure(f"no primitive element among {max_tries} combinations")
        mp = _rational_minpoly(prim)
        if len(mp) - 1 != d:
            raise PrimitiveElementFailure("minimal polynomial degree mismatch")
        # scale to an algebraic integer: D^k a_{d-k} in Z
        D = 1
        while not all((Fraction(D) ** k * mp[k]).denominator == 1 for k in range(1, d + 1)):
            D += 1
        prim = prim * K(D)
        mp = [Fraction(D) ** k * mp[k] for k in range(d + 1)]
        if d == 2:
            prim, mp = _canonical_quadratic(prim, mp, K)
        L = NumberField(mp, root=prim.embed())
    L.primitive = prim
    L.ambient = K
    return L


def _canonical_quadratic(prim, mp, K):
    """Rewrite Q(c), c^2 + b c + e = 0, as Q(sqrt(s)) with s squarefree."""
    _, b, e = mp
    disc = b * b - 4 * e  # integer, since mp is integral
    disc = int(disc)
    s = _squarefree(disc)
    q = _isqrt_exact(disc // s)
    r = (prim * K(2) + K(int(b))) * K(Fraction(1, q))  # r^2 = s
    return r, [Fraction(1), Fraction(0), Fraction(-s)]


def in_identity_place(tf: NumberField, emb: Embedding, tol=1e-7) -> bool:
    """Whether ``emb`` restricted to the trace field is the identity or its conjugate."""
    if tf.degree == 1:
        return True
    z_id = tf.primitive.embed()
    z = emb(tf.primitive)
    scale = max(1.0, abs(z_id))
    return abs(z - z_id) <= tol * scale or abs(z - z_id.conjugate()) <= tol * scale


# -- boundedness -------------------------------------------------------------------

@dataclass
class BoundednessReport:
    status: str  # "Unbounded" or "BoundedUpTo"
    word_len: int
    place: str
    words_checked: int
    witness: tuple = None
    witness_label: str = None
    trace_value: object = None
    certified_all_lengths: bool = False

    @property
    def unbounded(self):
        return self.status == "Unbounded"


def embedding_bounded(sigma, pres: GroupPresentation, word_len: int, tol=TRACE_TOL, budget=WORD_BUDGET):
    """Search reduced words of length <= word_len for a witness of unboundedness."""
    if word_len < 1:
        raise ValidationError("word_len must be >= 1")
    pres.require_unimodular()
    if isinstance(sigma, FinitePlace):
        return _finite_bounded(sigma, pres, word_len, budget)
    total = _check_budget(pres, word_len, budget)
    labs, maps, inv = pres.letters()
    mats = [sigma.matrix(m) for m in maps]
    checked = 0
    for words, cur in iter_word_levels_numeric(mats, inv, word_len):
        tr = cur[:, 0, 0] + cur[:, 1, 1]
        bad = (np.abs(tr.imag) > tol) | (np.abs(tr.real) > 2 + tol)
        if bad.any():
            k = int(np.argmax(bad))
            w = tuple(int(i) for i in words[k])
            return BoundednessReport("Unbounded", word_len, repr(sigma), checked + k + 1, w,
                                     pres.word_label(w), complex(tr[k]))
        checked += len(words)
    return BoundednessReport("BoundedUpTo", word_len, repr(sigma), checked)


def _p_integral_generators(pres, p):
    return all(vp(c, p) >= 0 for g in pres.gens for e in g.entries for c in e.coords if c)


def _finite_bounded(place, pres, word_len, budget):
    # entries in Z_(p)[theta] keep every trace p-integral, at all lengths
    if _p_integral_generators(pres, place.p):
        return BoundednessReport("BoundedUpTo", word_len, place.label, 0, certified_all_lengths=True)
    _check_budget(pres, word_len, budget)
    checked = 0
    for w, m in iter_words_exact(pres, word_len):
        checked += 1
        t = m.trace()
        v = place.valuation(t)
        if v < 0:
            return BoundednessReport("Unbounded", word_len, place.label, checked, w, pres.word_label(w), t)
    return BoundednessReport("BoundedUpTo", word_len, place.label, checked)


# -- verdict -----------------------------------------------------------------------

@dataclass
class Witness:
    kind: str  # "finite" or "archimedean"
    place: str
    word: tuple
    word_label: str
    trace: object
    prime: int = None
    embedding_index: int = None

    def recheck(self, pres: GroupPresentation, tol=TRACE_TOL) -> bool:
        """Recompute the word's trace and confirm it still violates the criterion."""
        t = pres.word_map(self.word).trace()
        if self.kind == "finite":
            cp = _charpoly_of(t)
            return any(vp(c, self.prime) < 0 for c in cp if c)
        z = t.embed(self.embedding_index)
        return abs(z.imag) > tol or abs(z.real) > 2 + tol


def _charpoly_of(t: FieldElement):
    return _charpoly(t.mult_matrix())


@dataclass
class Arithmetic:
    word_len: int
    trace_field: NumberField = dc_field(repr=False, default=None)
    verdict: str = "Arithmetic"


@dataclass
class NonArithmetic:
    witness: Witness
    word_len: int
    trace_field: NumberField = dc_field(repr=False, default=None)
    verdict: str = "NonArithmetic"


@dataclass
class Inconclusive:
    reason: str
    word_len: int
    verdict: str = "Inconclusive"


def _nonintegral_primes(t: FieldElement):
    cp = _charpoly_of(t)
    primes = set()
    for c in cp:
        if c.denominator != 1:
            primes.update(sp.factorint(c.denominator).keys())
    return sorted(primes)


def _finite_witness(pres, word_len, budget):
    dens = {c.denominator for g in pres.gens for e in g.entries for c in e.coords}
    if all(d == 1 for d in dens):
        return None  # entries in Z[theta]: all traces integral
    _check_budget(pres, word_len, budget)
    for w, m in iter_words_exact(pres, word_len):
        t = m.trace()
        primes = _nonintegral_primes(t)
        if primes:
            p = primes[0]
            label = f"finite(p={p})"
            for pl in finite_places(pres.field, p):
                try:
                    if pl.valuation(t) < 0:
                        label = pl.label
                        break
                except Exception:
                    continue
            return Witness("finite", label, w, pres.word_label(w), t, prime=p)
    return None


def arithmeticity_test(pres: GroupPresentation, word_len: int, budget=WORD_BUDGET):
    if word_len < 3:
        raise ValidationError("word_len must be >= 3")
    pres.require_unimodular()
    try:
        tf = trace_field(pres)
        wit = _finite_witness(pres, word_len, budget)
        if wit is not None:
            return NonArithmetic(wit, word_len, tf)
        for emb in _all_embeddings(pres.field):
            if in_identity_place(tf, emb):
                continue
            rep = embedding_bounded(emb, pres, word_len, budget=budget)
            if rep.unbounded:
                wit = Witness("archimedean", rep.place, rep.witness, rep.witness_label,
                              rep.trace_value, embedding_index=emb.index)
                return NonArithmetic(wit, word_len, tf)
        return Arithmetic(word_len, tf)
    except BudgetExceeded as exc:
        return Inconclusive(str(exc), word_len)


def _all_embeddings(K):
    return galois_embeddings(K)


# -- presentation files --------------------------------------------------------------

@dataclass
class PresentationFile:
    field: NumberField
    presentation: GroupPresentation
    circles: list  # (label, (A, B, C)) with FieldElement coefficients


_MATRIX = re.compile(r"^\[\[(.*?)\]\s*,\s*\[(.*?)\]\]$")
_LABELED = re.compile(r"^([A-Za-z_][\w\-]*)\s*:\s*(.*)$")


def _parse_entry(text, K, lineno):
    try:
        return K.from_expr(parse_poly_expr(text))
    except ValidationError as exc:
        raise PresentationError(str(exc), lineno) from None


def parse_presentation(text: str) -> PresentationFile:
    minpoly = root = None
    raw_gens, raw_circles = [], []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        m = _LABELED.match(line)
        key = m.group(1).lower() if m else None
        if key == "minpoly":
            minpoly = (m.group(2), lineno)
        elif key == "root":
            try:
                root = complex(m.group(2).replace(" ", "").replace("i", "j").strip("()"))
            except ValueError:
                raise PresentationError(f"bad root {m.group(2)!r}", lineno) from None
        elif key == "circle":
            parts = m.group(2).split()
            if len(parts) != 3:
                raise PresentationError("circle needs three coefficients A B C", lineno)
            raw_circles.append((f"C{len(raw_circles)}", parts, lineno))
        elif line.startswith("["):
            raw_gens.append((f"g{len(raw_gens)}", line, lineno))
        elif m and m.group(2).startswith("["):
            raw_gens.append((m.group(1), m.group(2), lineno))
        elif m and key.startswith("circle"):
            raise PresentationError("circle lines read 'circle: A B C'", lineno)
        else:
            raise PresentationError(f"unrecognised line {line!r}", lineno)
    if minpoly is None:
        raise PresentationError("missing 'minpoly:' header")
    try:
        K = field_from_string(minpoly[0], root=root)
    except ValidationError as exc:
        raise PresentationError(f"minpoly: {exc}", minpoly[1]) from None
    gens, labels = [], []
    for lab, body, lineno in raw_gens:
        mm = _MATRIX.match(body.replace(" ", ""))
        if not mm:
            raise PresentationError("generator must look like [[a,b],[c,d]]", lineno)
        row1, row2 = mm.group(1).split(","), mm.group(2).split(",")
        if len(row1) != 2 or len(row2) != 2:
            raise PresentationError("generator rows need two entries", lineno)
        a, b, c, d = (_parse_entry(t, K, lineno) for t in row1 + row2)
        g = MoebiusMap(a, b, c, d, check=False)
        if g.is_singular():
            raise PresentationError("singular generator", lineno)
        gens.append(g)
        labels.append(lab)
    circles = [(lab, tuple(_parse_entry(t, K, ln) for t in parts)) for lab, parts, ln in raw_circles]
    if not gens:
        raise PresentationError("no generators")
    return PresentationFile(K, GroupPresentation(gens, labels), circles)


def load_presentation(path) -> PresentationFile:
    with open(path) as fh:
        return parse_presentation(fh.read())


def format_presentation(pres: GroupPresentation, circles=()) -> str:
    K = pres.field
    lines = [f"minpoly: {sp.sstr(K.poly.as_expr())}", f"root: {K.id_root!r}"]
    for lab, g in zip(pres.labels, pres.gens):
        ents = [_fmt(e) for e in g.entries]
        lines.append(f"{lab}: [[{ents[0]},{ents[1]}],[{ents[2]},{ents[3]}]]")
    for A, B, C in circles:
        lines.append("circle: " + " ".join(_fmt(e).replace(" ", "") for e in (A, B, C)))
    return "\n".join(lines) + "\n"


def _fmt(e: FieldElement):
    poly = sum(sp.Rational(c.numerator, c.denominator) * X**i for i, c in enumerate(e.coords))
    return sp.sstr(sp.expand(poly)).replace("**", "^").replace(" ", "")
