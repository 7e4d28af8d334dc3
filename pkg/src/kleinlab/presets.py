"""Ready-made fields, group presentations and circle catalogues."""

from __future__ import annotations

from fractions import Fraction

from .arithmeticity import GroupPresentation
from .moebius import MoebiusMap
from .numberfield import NumberField

PRESET_NAMES = ("bianchi-zi", "bianchi-zw", "trivial-rep")


def gaussian_field():
    return NumberField([1, 0, 1], name="Q(i)")


def eisenstein_field():
    # omega = (1 + sqrt(-3)) / 2, a root of x^2 - x + 1
    return NumberField([1, -1, 1], name="Q(omega)")


def _m(K, a, b, c, d):
    return MoebiusMap(K(a), K(b), K(c), K(d))


def bianchi_zi():
    """PSL2(Z[i]) from T = z+1, U = z+i, S = -1/z, L = -z."""
    K = gaussian_field()
    i = K.gen()
    gens = [
        _m(K, 1, 1, 0, 1),
        MoebiusMap(K(1), i, K(0), K(1)),
        _m(K, 0, -1, 1, 0),
        MoebiusMap(i, K(0), K(0), -i),
    ]
    return GroupPresentation(gens, ["T", "U", "S", "L"])


def bianchi_zw():
    """PSL2(Z[omega]) from T = z+1, U = z+omega, S = -1/z, D = omega^2 z."""
    K = eisenstein_field()
    w = K.gen()
    gens = [
        _m(K, 1, 1, 0, 1),
        MoebiusMap(K(1), w, K(0), K(1)),
        _m(K, 0, -1, 1, 0),
        MoebiusMap(w, K(0), K(0), K(1) - w),
    ]
    return GroupPresentation(gens, ["T", "U", "S", "D"])


def figure_eight():
    K = eisenstein_field()
    w = K.gen()
    gens = [_m(K, 1, 1, 0, 1), MoebiusMap(K(1), K(0), -w, K(1))]
    return GroupPresentation(gens, ["a", "b"])


def nonintegral_trace():
    """Trace 5/2 generator: not integral above 2."""
    K = NumberField([1, 0], name="Q")
    gens = [
        _m(K, 2, Fraction(3, 2), 0, Fraction(1, 2)),
        _m(K, 1, 0, 1, 1),
    ]
    return GroupPresentation(gens, ["h", "v"])


def sqrt2_unbounded():
    """Over Q(sqrt 2): tr(ab) = 2 + sqrt 2 but a b^3 conjugates to trace 2 - 3 sqrt 2."""
    K = NumberField([1, 0, -2], name="Q(sqrt2)")
    r = K.gen()
    gens = [_m(K, 1, 1, 0, 1), MoebiusMap(K(1), K(0), r, K(1))]
    return GroupPresentation(gens, ["a", "b"])


def sqrt2_bounded():
    """Norm-one units of the quaternion algebra (-1, 1 + sqrt 2) over Q(sqrt 2).

    The algebra is definite at sqrt 2 -> -sqrt 2, so that conjugate group is
    compact. Realised in SL2(Q(sqrt 2, i)) by I = diag(i, -i), J = [[0, b], [1, 0]];
    the generator (1 + s/2) + (s/2) I + J has trace 2 + sqrt 2.
    """
    K = NumberField([1, 0, -2, 0, 9], root=complex(2**0.5, 1), name="Q(sqrt2, i)")
    t = K.gen()
    s = (t * K(5) - t**3) * K(Fraction(1, 6))  # sqrt 2
    i = (t**3 + t) * K(Fraction(1, 6))
    b = K(1) + s
    a0 = K(1) + s * K(Fraction(1, 2))
    a1 = s * K(Fraction(1, 2))
    x = MoebiusMap(a0 + a1 * i, b, K(1), a0 - a1 * i)
    I = MoebiusMap(i, K(0), K(0), -i)
    return GroupPresentation([x, I], ["x", "I"])


def presentation(name: str) -> GroupPresentation:
    table = {
        "bianchi-zi": bianchi_zi,
        "bianchi-zw": bianchi_zw,
        "trivial-rep": bianchi_zi,
        "figure-eight": figure_eight,
        "nonintegral": nonintegral_trace,
        "sqrt2-bounded": sqrt2_bounded,
        "sqrt2-unbounded": sqrt2_unbounded,
    }
    if name not in table:
        from .errors import ValidationError
        raise ValidationError(f"unknown preset {name!r}; choose from {sorted(table)}")
    return table[name]()


def circle_catalogue(pres: GroupPresentation):
    """Circles (A, B, C) for A|z|^2 + conj(B) z + B conj(z) + C = 0 with exact coefficients.

    Ordered by the discriminant of the primitive integral form. Over Q(i):
    the real line (1), the line through 0 and 1 + i (2), |z|^2 = 2 (2) and
    |z|^2 = 3 (3, a compact surface). Over Q(omega): the real line, |z|^2 = 2
    and |z|^2 = 3.
    """
    K = pres.field
    one, zero = K(1), K(0)
    if K.coeffs == (1, 0, 1):
        i = K.gen()
        half_i = i * K(Fraction(1, 2))      # B = i/2 cuts out Im z = 0
        return [("real-line", (zero, half_i, zero)),
                ("line-1+i", (zero, half_i * (one + i), zero)),
                ("|z|^2=2", (one, zero, K(-2))),
                ("|z|^2=3", (one, zero, K(-3)))]
    if K.coeffs == (1, -1, 1):
        half_s = K.gen() - K(Fraction(1, 2))  # omega - 1/2 = sqrt(-3)/2 is imaginary too
        return [("real-line", (zero, half_s, zero)),
                ("|z|^2=2", (one, zero, K(-2))),
                ("|z|^2=3", (one, zero, K(-3)))]
    raise ValueError("catalogue only for Q(i) and Q(omega)")
