from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from kleinlab.arithmeticity import (GroupPresentation, arithmeticity_test, embedding_bounded, format_presentation,
                                    generating_traces, parse_presentation, trace_field)
from kleinlab.errors import BudgetExceeded, PresentationError
from kleinlab.moebius import MoebiusMap
from kleinlab.numberfield import NumberField, conjugate_embedding, embedding_at, finite_places
from kleinlab.presets import (bianchi_zi, bianchi_zw, figure_eight, nonintegral_trace, presentation, sqrt2_bounded,
                              sqrt2_unbounded)


def test_trace_field_examples():
    Q = NumberField([1, 0])
    assert trace_field(GroupPresentation([MoebiusMap(Q(1), Q(1), Q(0), Q(1))])).degree == 1
    K = trace_field(bianchi_zi())
    assert K.coeffs == (1, 0, 1)
    F = trace_field(figure_eight())
    # Q(sqrt -3): discriminant -3 up to squares
    assert F.degree == 2 and F.coeffs[1] ** 2 - 4 * F.coeffs[0] * F.coeffs[2] in (-3, -12)


def test_trace_field_conjugation_invariant():
    pres = figure_eight()
    K = pres.field
    h = MoebiusMap(K(2), K(1), K.gen(), K(1))
    hi = h.inverse()
    conj = GroupPresentation([h @ g @ hi for g in pres.gens], pres.labels)
    conj.gens = [g.scale(h.det().inverse()) for g in conj.gens]
    assert trace_field(conj).coeffs == trace_field(pres).coeffs


def test_bounded_examples():
    Q = NumberField([1, 0])
    lox = GroupPresentation([MoebiusMap(Q(2), Q(1), Q(1), Q(1))])
    rep = embedding_bounded(embedding_at(Q, 0), lox, 1)
    assert rep.unbounded and rep.witness == (0,)
    two = finite_places(Q, 2)[0]
    assert embedding_bounded(two, nonintegral_trace(), 1).unbounded
    conj = embedding_bounded(conjugate_embedding(bianchi_zi().field), bianchi_zi(), 4)
    assert conj.unbounded


def test_verdicts():
    assert arithmeticity_test(bianchi_zi(), 4).verdict == "Arithmetic"
    assert arithmeticity_test(bianchi_zw(), 4).verdict == "Arithmetic"
    v = arithmeticity_test(nonintegral_trace(), 4)
    assert v.verdict == "NonArithmetic" and v.witness.prime == 2
    assert v.witness.recheck(nonintegral_trace())
    assert arithmeticity_test(sqrt2_bounded(), 6).verdict == "Arithmetic"
    u = arithmeticity_test(sqrt2_unbounded(), 6)
    assert u.verdict == "NonArithmetic" and u.witness.kind == "archimedean"
    assert u.witness.recheck(sqrt2_unbounded())


def _all_words(pres, max_len, rng, count):
    letters = list(pres.gens) + [g.inverse() for g in pres.gens]
    for _ in range(count):
        L = rng.randint(1, max_len)
        m = letters[rng.randrange(len(letters))]
        for _ in range(L - 1):
            m = m @ letters[rng.randrange(len(letters))]
        yield m


def _galois_traces(pres, t):
    # the other roots of the trace's minimal polynomial: independent of the embedding code
    import numpy as np
    mp = t.minpoly()
    return np.roots([float(c) for c in mp])


def test_sqrt2_oracle():
    import random
    rng = random.Random(0)
    # bounded case: every conjugate of every sampled trace is real in [-2, 2], except the identity place
    pres = sqrt2_bounded()
    for m in _all_words(pres, 6, rng, 150):
        t = m.trace()
        z = t.embed(pres.field.id_index)
        conj = [r for r in _galois_traces(pres, t) if abs(r - z) > 1e-7]
        assert all(abs(r.imag) < 1e-7 and abs(r.real) <= 2 + 1e-7 for r in conj)
    # unbounded case: some sampled word has a conjugate trace of modulus > 2
    pres = sqrt2_unbounded()
    big = False
    for m in _all_words(pres, 4, rng, 200):
        t = m.trace()
        z = t.embed(pres.field.id_index)
        big |= any(abs(r) > 2 + 1e-7 for r in _galois_traces(pres, t) if abs(r - z) > 1e-7)
    assert big


@pytest.mark.parametrize("name", ["nonintegral", "sqrt2-unbounded", "bianchi-zi"])
def test_verdict_monotone(name):
    pres = presentation(name)
    seen_non = False
    for L in range(3, 7):
        v = arithmeticity_test(pres, L).verdict
        if seen_non:
            assert v == "NonArithmetic"
        seen_non |= v == "NonArithmetic"


def test_budget_becomes_inconclusive():
    v = arithmeticity_test(sqrt2_bounded(), 3, budget=10)
    assert v.verdict == "Inconclusive"
    with pytest.raises(BudgetExceeded):
        embedding_bounded(conjugate_embedding(bianchi_zi().field), bianchi_zi(), 12)


def test_presentation_round_trip():
    pres = bianchi_zw()
    text = format_presentation(pres)
    back = parse_presentation(text).presentation
    assert all(a.proj_equal(b) for a, b in zip(back.gens, pres.gens))
    assert trace_field(back).coeffs == trace_field(pres).coeffs


def test_presentation_errors_name_line():
    with pytest.raises(PresentationError, match="minpoly"):
        parse_presentation("[[1,1],[0,1]]\n")
    with pytest.raises(PresentationError) as exc:
        parse_presentation("minpoly: x^2+1\n[[1,x],[0]]\n")
    assert exc.value.line == 2
    with pytest.raises(PresentationError):
        parse_presentation("minpoly: x^2+1\n[[1,2],[2,4]]\n")
    pf = parse_presentation("minpoly: x^2+1\nT: [[1,1],[0,1]]\ncircle: 1 0 -2\n")
    assert pf.presentation.labels == ["T"] and len(pf.circles) == 1


@settings(max_examples=20)
@given(st.integers(-4, 4), st.integers(1, 4))
def test_rational_translates_integrality(num, den):
    Q = NumberField([1, 0])
    g = MoebiusMap(Q(1), Q(Fraction(num, den)), Q(0), Q(1))
    h = MoebiusMap(Q(1), Q(0), Q(1), Q(1))
    v = arithmeticity_test(GroupPresentation([g, h]), 3)
    # tr(g h) = 2 + num/den; integral exactly when den divides num
    assert (v.verdict == "Arithmetic") == (Fraction(num, den).denominator == 1)
