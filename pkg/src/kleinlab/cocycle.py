"""Dirichlet domains, the return map omega and the cocycle u(n, x).

Conventions. Frames are g in PSL2(C) with Gamma acting on the right; the
frame g sits over the point g^-1 . o of H^3, so the right action of gamma
becomes the left action of gamma^-1 on points. The fundamental domain F is
the set of frames over the Dirichlet domain E around the center c, and
g in F gamma_g  <=>  gamma_g . (g^-1 . o) in E.

With omega(g) = rho(gamma_g) and y in F over x,

    u(n, x) = omega(y) omega(a_n y)^-1 = rho(gamma_{a_n y})^-1,

and u(n + m, x) = u(m, x) u(n, a_m x). Batches of frames are numpy arrays of
shape (N, 2, 2) with determinant 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict
import math

import numpy as np
from scipy import stats

from .arithmeticity import GroupPresentation, iter_word_levels_numeric
from .errors import BudgetExceeded, FaceSetInsufficient, Unsupported, ValidationError
from .moebius import H3Point, MoebiusMap, act_batch, cosh_dist, dist_batch
from .numberfield import Embedding, FieldElement, FinitePlace, _hensel, _lcm
from .padic import vp_int

# generic center: no nontrivial element of the Bianchi presets fixes it
DEFAULT_CENTER = H3Point(0.13 + 0.07j, 1.31)
# relative margin for "strictly decreases", keeps rounding from ping-ponging on faces
DESCENT_MARGIN = 1e-12


# -- small matrix helpers ---------------------------------------------------------------

def _inv2(m):
    """Adjugate of a stack (..., 2, 2); the inverse for det 1."""
    out = np.empty_like(m)
    out[..., 0, 0] = m[..., 1, 1]
    out[..., 0, 1] = -m[..., 0, 1]
    out[..., 1, 0] = -m[..., 1, 0]
    out[..., 1, 1] = m[..., 0, 0]
    return out


def _det1(m):
    det = m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]
    return m / np.sqrt(det)[..., None, None]


def frame_points(Y):
    """Points Y^-1 . o of a frame stack."""
    n = len(Y)
    return act_batch(_inv2(Y), np.zeros(n, complex), np.ones(n))


def flow_matrix(t):
    e = math.exp(t / 2)
    return np.array([[e, 0], [0, 1 / e]], dtype=complex)


def rotation_matrices(theta):
    theta = np.asarray(theta, dtype=float)
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    out = np.zeros(theta.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = c
    out[..., 0, 1] = s
    out[..., 1, 0] = -s
    out[..., 1, 1] = c
    return out


def _power(m, e):
    """Integer power of a single exact or float MoebiusMap."""
    if e < 0:
        m, e = m.inverse(), -e
    out = MoebiusMap.identity(m) if m.is_exact else MoebiusMap(1 + 0j, 0j, 0j, 1 + 0j)
    base = m
    while e:
        if e & 1:
            out = out @ base
        base = base @ base
        e >>= 1
    return out


# -- the domain ---------------------------------------------------------------------------

@dataclass
class Face:
    word: tuple          # letters of the presentation
    label: str
    exact: MoebiusMap    # exact group element
    mat: np.ndarray      # det-1 complex matrix under the identity embedding
    inverse: int = -1    # index of the inverse face
    shift: complex = None  # horizontal shift if this is a translation z -> z + shift


def _key(m):
    m = m / np.sqrt(np.linalg.det(m))
    flat = m.ravel()
    k = int(np.argmax(np.abs(flat) > 1e-9))
    if flat[k].real < -1e-9 or (abs(flat[k].real) <= 1e-9 and flat[k].imag < 0):
        m = -m
    r = np.round(m.ravel() * 1e6)
    return tuple(np.concatenate([r.real, r.imag]).astype(np.int64).tolist()), m


def enumerate_elements(pres: GroupPresentation, word_len: int, sigma=None):
    """Distinct elements of PSL2 (shortest word first) up to the given word length."""
    labs, maps, inv = pres.letters()
    K = pres.field
    sigma = sigma or Embedding(K, K.id_index)
    mats = np.array([sigma.matrix(g) for g in maps])
    seen = {}
    ident, _ = _key(np.eye(2, dtype=complex))
    seen[ident] = ((), np.eye(2, dtype=complex))
    for words, cur in iter_word_levels_numeric(mats, inv, word_len):
        for w, m in zip(words, cur):
            key, mn = _key(m)
            if key not in seen:
                seen[key] = (tuple(int(i) for i in w), mn)
    return [v for k, v in seen.items() if k != ident]


class DirichletDomain:
    """Dirichlet domain around ``center`` cut out by a symmetric face set.

    p in E  <=>  d(p, c) <= d(p, f . c) for every face f.
    """

    def __init__(self, pres: GroupPresentation, faces, center: H3Point = DEFAULT_CENTER,
                 max_iter: int = 500, excursion_cap: float = 1e8, shortcut_radius: float = 2.0):
        if not faces:
            raise ValidationError("face set is empty")
        self.pres = pres
        self.faces = list(faces)
        self.center = center
        self.max_iter = max_iter
        self.excursion_cap = excursion_cap
        self.shortcut_radius = shortcut_radius
        self._link_inverses()
        self.F = np.array([f.mat for f in self.faces])
        self.Finv = _inv2(self.F)
        k = len(self.faces)
        # f^-1 . c, so that d(f q, c) = d(q, f^-1 c)
        self.Pz, self.Pt = act_batch(self.Finv, np.full(k, center.z), np.full(k, center.t))
        # f . c for the membership predicate
        self.Qz, self.Qt = act_batch(self.F, np.full(k, center.z), np.full(k, center.t))
        self._setup_lattice()

    # construction

    @classmethod
    def build(cls, pres: GroupPresentation, center: H3Point = DEFAULT_CENTER, word_len: int = 4,
              radius: float = 1.6, **kw):
        """Faces = distinct elements of word length <= word_len moving the center at most ``radius``."""
        pres.require_unimodular()
        elems = enumerate_elements(pres, word_len)
        faces = []
        cz, ct = np.array([center.z]), np.array([center.t])
        for w, m in elems:
            z, t = act_batch(m[None], cz, ct)
            if dist_batch(z, t, cz, ct)[0] <= radius:
                faces.append(Face(w, pres.word_label(w), pres.word_map(w), m))
        return cls(pres, faces, center, **kw)

    def _link_inverses(self):
        keys = {_key(f.mat)[0]: i for i, f in enumerate(self.faces)}
        for f in self.faces:
            j = keys.get(_key(np.linalg.inv(f.mat))[0])
            if j is None:
                raise ValidationError(f"face set is not symmetric: {f.label} has no inverse")
            f.inverse = j

    def _setup_lattice(self):
        self._lattice = None
        trans = []
        for i, f in enumerate(self.faces):
            m = f.mat
            if abs(m[1, 0]) < 1e-12 and abs(m[0, 0] - m[1, 1]) < 1e-12 and abs(abs(m[0, 0]) - 1) < 1e-12:
                f.shift = complex(m[0, 1] / m[1, 1])
                trans.append(i)
        trans.sort(key=lambda i: (len(self.faces[i].word), abs(self.faces[i].shift), i))
        for a in range(len(trans)):
            for b in range(a + 1, len(trans)):
                s1, s2 = self.faces[trans[a]].shift, self.faces[trans[b]].shift
                if abs((s1.conjugate() * s2).imag) > 1e-9:
                    basis = np.array([[s1.real, s2.real], [s1.imag, s2.imag]])
                    self._lattice = (trans[a], trans[b], np.linalg.inv(basis))
                    return

    # predicates

    def contains(self, p: H3Point, tol: float = 1e-9) -> bool:
        d0 = cosh_dist(p.z, p.t, self.center.z, self.center.t)
        d = cosh_dist(p.z, p.t, self.Qz, self.Qt)
        return bool(np.all(d0 <= d * (1 + tol)))

    def contains_batch(self, z, t, tol: float = 1e-9):
        d0 = cosh_dist(z, t, self.center.z, self.center.t)
        d = cosh_dist(z[:, None], t[:, None], self.Qz[None, :], self.Qt[None, :])
        return np.all(d0[:, None] <= d * (1 + tol), axis=1)

    # reduction

    def reduce_frames(self, Y):
        """Move every frame into F.

        Returns (Y', steps): Y' = Y gamma^-1 with gamma = f_m^e_m ... f_1^e_1 and
        ``steps`` the list of (face index, exponent) arrays in the order applied
        (index -1 where a frame was left alone).
        """
        Y = _det1(np.array(Y, dtype=complex))
        n = len(Y)
        z, t = frame_points(Y)
        c = self.center
        steps = []
        active = np.ones(n, bool)
        for _ in range(self.max_iter):
            if self._lattice is not None:
                self._shortcut(Y, z, t, active, steps)
            d0 = cosh_dist(z[active], t[active], c.z, c.t)
            d = cosh_dist(z[active, None], t[active, None], self.Pz[None, :], self.Pt[None, :])
            k = np.argmin(d, axis=1)
            better = d[np.arange(len(k)), k] < d0 * (1 - DESCENT_MARGIN)
            if not better.any():
                break
            rows = np.flatnonzero(active)[better]
            kk = k[better]
            idx = np.full(n, -1)
            idx[rows] = kk
            steps.append((idx, np.ones(n, dtype=np.int64)))
            Y[rows] = Y[rows] @ self.Finv[kk]
            z[rows], t[rows] = act_batch(self.F[kk], z[rows], t[rows])
            active[:] = False
            active[rows] = True
            if t.max() > self.excursion_cap:
                raise BudgetExceeded(f"cusp excursion above height {self.excursion_cap:g}")
        else:
            raise FaceSetInsufficient(f"reduction did not settle in {self.max_iter} face steps")
        Y = _det1(Y)
        return Y, steps

    def _shortcut(self, Y, z, t, active, steps):
        """Translate far-off points straight to the lattice cell of the center."""
        i1, i2, binv = self._lattice
        off = z - self.center.z
        far = active & (np.abs(off) > self.shortcut_radius)
        if not far.any():
            return
        coef = binv @ np.vstack([off[far].real, off[far].imag])
        m = np.rint(coef).astype(np.int64)
        n = len(z)
        for face, e in ((i1, m[0]), (i2, m[1])):
            idx = np.full(n, -1)
            ex = np.zeros(n, dtype=np.int64)
            idx[far] = face
            ex[far] = -e
            ok = ex != 0
            idx[~ok] = -1
            steps.append((idx, np.where(ok, ex, 1)))
            rows = np.flatnonzero(ok)
            if len(rows):
                s = self.faces[face].shift
                z[rows] = z[rows] - e[ok[far]] * s
                # Y <- Y f^-e with f^-e = [[1, e s], [0, 1]] up to the sign of f
                T = np.tile(np.eye(2, dtype=complex), (len(rows), 1, 1))
                T[:, 0, 1] = e[ok[far]] * s
                Y[rows] = Y[rows] @ T

    def reduce(self, g: MoebiusMap):
        """(g gamma^-1, gamma) with g gamma^-1 in F; gamma is an exact group element."""
        Y, steps = self.reduce_frames(g.as_array()[None])
        word = steps_to_word(self, steps, 0)
        return MoebiusMap.from_array(Y[0]), self.word_element(word)

    def word_element(self, word):
        """Exact element f_m^e_m ... f_1^e_1 for word = [(face, e), ...] in application order."""
        out = MoebiusMap.identity(self.faces[0].exact)
        for k, e in word:
            out = _power(self.faces[k].exact, e) @ out
        return out

    def validate(self, n_points: int = 400, seed: int = 0, spread: float = 3.0, word_len: int = 5):
        """Check reduced random points against a larger face set; raises FaceSetInsufficient."""
        rng = np.random.default_rng(seed)
        Y = random_frames(self.center, n_points, rng, spread)
        Y, _ = self.reduce_frames(Y)
        z, t = frame_points(Y)
        big = enumerate_elements(self.pres, word_len)
        M = np.array([m for _, m in big])
        k = len(M)
        Qz, Qt = act_batch(M, np.full(k, self.center.z), np.full(k, self.center.t))
        d0 = cosh_dist(z, t, self.center.z, self.center.t)
        d = cosh_dist(z[:, None], t[:, None], Qz[None, :], Qt[None, :])
        bad = ~np.all(d0[:, None] <= d * (1 + 1e-9), axis=1)
        if bad.any():
            raise FaceSetInsufficient(f"{int(bad.sum())} of {n_points} reduced points lie outside the domain")
        return True

    def __repr__(self):
        return f"DirichletDomain({len(self.faces)} faces, center={self.center})"


def steps_to_word(domain, steps, i):
    return [(int(idx[i]), int(ex[i])) for idx, ex in steps if idx[i] >= 0]


def random_frames(center: H3Point, n, rng, spread=1.0):
    """Frames over points in a hyperbolic ball around ``center`` with uniformly random direction."""
    # radius with density ~ sinh^2 r on [0, spread] by rejection
    r = np.empty(n)
    filled = 0
    while filled < n:
        cand = rng.uniform(0, spread, 2 * n)
        keep = cand[rng.uniform(0, 1, 2 * n) < (np.sinh(cand) / math.sinh(spread)) ** 2]
        take = keep[: n - filled]
        r[filled:filled + len(take)] = take
        filled += len(take)
    K = random_su2(n, rng)
    s = math.sqrt(center.t)
    lift = np.array([[s, center.z / s], [0, 1 / s]], dtype=complex)
    A = np.zeros((n, 2, 2), complex)
    A[:, 0, 0] = np.exp(r / 2)
    A[:, 1, 1] = np.exp(-r / 2)
    # point lift . K . a_r . o, frame = its inverse times a random rotation
    P = lift[None] @ K @ A
    return random_su2(n, rng) @ _inv2(P)


def random_su2(n, rng):
    q = rng.standard_normal((n, 4))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    a = q[:, 0] + 1j * q[:, 1]
    b = q[:, 2] + 1j * q[:, 3]
    out = np.empty((n, 2, 2), complex)
    out[:, 0, 0] = a
    out[:, 0, 1] = b
    out[:, 1, 0] = -np.conj(b)
    out[:, 1, 1] = np.conj(a)
    return out


# -- targets ------------------------------------------------------------------------------

class TrivialTarget:
    """rho = trivial representation."""

    name = "trivial"

    def bind(self, domain):
        return self

    def start(self, n):
        return {"n": n}

    def apply(self, state, steps, rows=None):
        pass

    def distance(self, state):
        return np.zeros(state["n"])

    def element(self, state, i):
        return MoebiusMap(1 + 0j, 0j, 0j, 1 + 0j)


class EmbeddingTarget:
    """rho = sigma on matrices, tracked as e^s M with |M| = 1 to survive long products."""

    def __init__(self, sigma: Embedding):
        self.sigma = sigma
        self.name = f"embedding[{sigma.index}]"

    def bind(self, domain):
        b = EmbeddingTarget(self.sigma)
        imgs = np.array([_det1(self.sigma.matrix(f.exact)) for f in domain.faces])
        b.pos = _inv2(imgs)   # rho(f)^-1
        b.neg = imgs          # rho(f)
        return b

    def start(self, n):
        M = np.tile(np.eye(2, dtype=complex) / math.sqrt(2), (n, 1, 1))
        return {"M": M, "s": np.full(n, 0.5 * math.log(2))}

    def apply(self, state, steps, rows=None):
        M, s = state["M"], state["s"]
        if rows is None:
            rows = np.arange(len(M))
        for idx, ex in steps:
            idx = idx[rows] if len(idx) != len(rows) else idx
            ex = ex[rows] if len(ex) != len(rows) else ex
            sel = idx >= 0
            if not sel.any():
                continue
            r = rows[sel]
            k, e = idx[sel], ex[sel]
            one = e == 1
            if one.all():
                M[r] = M[r] @ self.pos[k]
            else:
                for j in range(len(r)):
                    M[r[j]] = M[r[j]] @ self._pow(k[j], e[j])
            nrm = np.linalg.norm(M[r], axis=(1, 2))
            M[r] /= nrm[:, None, None]
            s[r] += np.log(nrm)

    def _pow(self, k, e):
        base = self.pos[k] if e > 0 else self.neg[k]
        return np.linalg.matrix_power(base, abs(int(e)))

    def distance(self, state):
        return _dist_from_logscale(state["s"])

    def direction(self, state):
        """Boundary point (unit C^2 vector) that u . o points to, seen from o."""
        M = state["M"]
        H = M @ np.conj(np.transpose(M, (0, 2, 1)))
        w, v = np.linalg.eigh(H)
        return v[:, :, -1]

    def element(self, state, i):
        # projective class only: the unit-norm direction, which may be numerically singular
        return MoebiusMap.from_array(state["M"][i], check=False)


def _dist_from_logscale(s):
    """d(U o, o) for det-1 U with |U|_F = e^s: cosh d = e^(2s) / 2."""
    L = 2 * np.asarray(s) - math.log(2)
    small = L < 30
    out = np.empty_like(L)
    out[small] = np.arccosh(np.maximum(np.exp(L[small]), 1.0))
    Lb = L[~small]
    out[~small] = Lb + np.log1p(np.sqrt(1 - np.exp(-2 * Lb)))
    return out


class ExactTarget:
    """rho = identity on exact matrices (entries in the presentation's field)."""

    name = "exact"

    def __init__(self, sigma: Embedding = None):
        self.sigma = sigma

    def bind(self, domain):
        b = ExactTarget(self.sigma or Embedding(domain.pres.field, domain.pres.field.id_index))
        b.domain = domain
        b.pos = [f.exact.inverse() for f in domain.faces]
        b._cache = {}
        return b

    def start(self, n):
        return {"U": [MoebiusMap.identity(self.pos[0]) for _ in range(n)]}

    def step_image(self, word):
        word = tuple(word)
        if word not in self._cache:
            out = MoebiusMap.identity(self.pos[0])
            for k, e in word:
                out = out @ _power(self.pos[k], e)
            self._cache[word] = out
        return self._cache[word]

    def apply(self, state, steps, rows=None):
        U = state["U"]
        rows = range(len(U)) if rows is None else rows
        for j, i in enumerate(rows):
            jj = j if (len(steps) and len(steps[0][0]) != len(U)) else i
            word = [(int(idx[jj]), int(ex[jj])) for idx, ex in steps if idx[jj] >= 0]
            if word:
                U[i] = U[i] @ self.step_image(word)

    def distance(self, state):
        out = []
        for U in state["U"]:
            m = self.sigma.matrix(U)
            out.append(_frob_dist(m))
        return np.array(out)

    def element(self, state, i):
        return state["U"][i]


def _frob_dist(m):
    det = abs(np.linalg.det(m))
    excess = max(float(np.sum(np.abs(m) ** 2)) - 2 * det, 0.0)
    return 2 * math.asinh(math.sqrt(excess / (4 * det)))


class PlaceTarget:
    """rho into PGL2 of the completion at a split (or rational) finite place.

    Each product is kept as p^-e A with A integral mod p^prec and some entry of
    A a unit, so the tree distance of a det-1 product is exactly 2 e.
    """

    def __init__(self, place: FinitePlace, precision: int = 64):
        if place.field.degree > 1 and not (place.e == 1 and place.f == 1 and place.regular):
            raise Unsupported("only split places (e = f = 1) are supported as cocycle targets")
        self.place = place
        self.p = place.p
        self.precision = precision
        self.name = f"place[{place.label}]"

    def bind(self, domain):
        b = PlaceTarget(self.place, self.precision)
        p, K = self.p, self.precision + 8
        b.mod = p**K
        L = self.place.field
        if L.degree > 1:
            r = (-self.place.factor[1] * pow(self.place.factor[0], -1, p)) % p
            b.root = _hensel(L.coeffs, r, p, K)
        else:
            b.root = 0
        b.pos = [b._local(f.exact.inverse()) for f in domain.faces]
        b.neg = [b._local(f.exact) for f in domain.faces]
        return b

    def _scalar(self, x: FieldElement):
        """(valuation shift, integer) with x = p^-shift * integer (mod p^K)."""
        den = _lcm([c.denominator for c in x.coords])
        ys = [int(c * den) for c in x.coords]
        s = 0
        for y in reversed(ys):
            s = (s * self.root + y) % self.mod
        v = vp_int(den, self.p)
        unit_den = den // self.p**v
        return v, s * pow(unit_den, -1, self.mod) % self.mod

    def _local(self, g):
        parts = [self._scalar(e) for e in g.entries]
        e = max(v for v, _ in parts)
        A = [x * self.p ** (e - v) % self.mod for v, x in parts]
        return self._normalize(A, e, self.precision + 8)

    def _normalize(self, A, e, prec):
        m = min((vp_int(x, self.p) if x else prec) for x in A)
        m = min(m, prec)
        if m:
            q = self.p**m
            A = [x // q for x in A]
            e -= m
            prec -= m
        if prec < 8:
            raise BudgetExceeded("p-adic precision exhausted")
        return A, e, prec

    def start(self, n):
        return {"A": [[1, 0, 0, 1] for _ in range(n)], "e": [0] * n, "prec": [self.precision + 8] * n}

    def _mul(self, X, Y):
        a, b, c, d = X
        p_, q, r, s = Y
        mod = self.mod
        return [(a * p_ + b * r) % mod, (a * q + b * s) % mod, (c * p_ + d * r) % mod, (c * q + d * s) % mod]

    def apply(self, state, steps, rows=None):
        n = len(state["A"])
        rows = range(n) if rows is None else rows
        for j, i in enumerate(rows):
            jj = j if (len(steps) and len(steps[0][0]) != n) else i
            for idx, ex in steps:
                k = int(idx[jj])
                if k < 0:
                    continue
                e = int(ex[jj])
                base = self.pos[k] if e > 0 else self.neg[k]
                for _ in range(abs(e)):
                    A = self._mul(state["A"][i], base[0])
                    state["A"][i], state["e"][i], state["prec"][i] = self._normalize(
                        A, state["e"][i] + base[1], min(state["prec"][i], base[2]))

    def distance(self, state):
        return np.array([2.0 * e for e in state["e"]])

    def element(self, state, i):
        return (state["A"][i], state["e"][i])


# -- return map and cocycle ----------------------------------------------------------------

class ReturnMap:
    """omega(g) = rho(gamma_g) for a domain and a target representation."""

    def __init__(self, domain: DirichletDomain, target=None):
        self.domain = domain
        if target is None:
            K = domain.pres.field
            target = EmbeddingTarget(Embedding(K, K.id_index))
        self.target = target.bind(domain)

    def omega(self, g: MoebiusMap):
        _, gamma = self.domain.reduce(g)
        return self.rho(gamma)

    def rho(self, gamma: MoebiusMap):
        """Target image of an exact group element."""
        t = self.target
        if isinstance(t, ExactTarget):
            return gamma
        if isinstance(t, EmbeddingTarget):
            return MoebiusMap.from_array(t.sigma.matrix(gamma))
        if isinstance(t, TrivialTarget):
            return MoebiusMap(1 + 0j, 0j, 0j, 1 + 0j)
        return t._local(gamma)


@dataclass
class CocycleState:
    """Frames in F, target accumulators and the elapsed number of steps."""

    frames: np.ndarray
    acc: dict
    n: int = 0
    step_bound: np.ndarray = None  # largest single-step displacement seen per frame


def start_state(rm: ReturnMap, frames):
    Y, _ = rm.domain.reduce_frames(np.asarray(frames, dtype=complex))
    return CocycleState(Y, rm.target.start(len(Y)), 0, np.zeros(len(Y)))


def advance(rm: ReturnMap, state: CocycleState, tau: float = 1.0, rotations=None, track_steps=False):
    """One step x -> a_tau r_theta x, multiplying u(tau, r_theta x) on the right."""
    Y = state.frames
    if rotations is not None:
        Y = rotation_matrices(rotations) @ Y
    Y = flow_matrix(tau)[None] @ Y
    Y, steps = rm.domain.reduce_frames(Y)
    if track_steps:
        state.step_bound = np.maximum(state.step_bound, _step_displacements(rm, steps, len(Y)))
    rm.target.apply(state.acc, steps)
    state.frames = Y
    state.n += 1
    return steps


def _step_displacements(rm, steps, n):
    """d(u(tau, x) . o, o) for the single step just taken."""
    t = rm.target
    if isinstance(t, TrivialTarget):
        return np.zeros(n)
    if isinstance(t, EmbeddingTarget):
        st = t.start(n)
        t.apply(st, steps)
        return t.distance(st)
    if isinstance(t, ExactTarget):
        st = t.start(n)
        t.apply(st, steps)
        return t.distance(st)
    st = t.start(n)
    t.apply(st, steps)
    return t.distance(st)


def cocycle_u(rm: ReturnMap, n: int, g: MoebiusMap, tau: float = 1.0):
    """u(n tau, x) for x the class of g, built from n steps of length tau."""
    if n < 0:
        raise ValidationError("n must be nonnegative")
    st = start_state(rm, g.as_array()[None])
    for _ in range(n):
        advance(rm, st, tau)
    return rm.target.element(st.acc, 0)


def cocycle_u_batch(rm: ReturnMap, n: int, frames, tau: float = 1.0):
    st = start_state(rm, frames)
    for _ in range(n):
        advance(rm, st, tau)
    return st


# -- configuration and reports --------------------------------------------------------------

@dataclass
class ExperimentConfig:
    tau: float = 1.0
    eps: float = 0.2
    n: int = 200
    samples: int = 100
    seed: int = 0
    word_len: int = 4
    face_radius: float = 1.6
    max_iter: int = 500
    excursion_cap: float = 1e8
    theta_grid: int = 64
    alpha0: float = 0.05
    xi_t: float = 10.0
    lambda1: float = None
    trials: int = 100
    n1: int = None
    c: float = None
    checkpoints: int = 50
    spread: float = 1.5

    def __post_init__(self):
        self.validate()

    def validate(self):
        if not self.tau > 0:
            raise ValidationError("tau must be positive")
        if not 0 < self.eps < 0.5:
            raise ValidationError("eps must lie in (0, 1/2)")
        if self.n < 0 or self.samples < 1:
            raise ValidationError("n must be >= 0 and samples >= 1")
        if self.theta_grid < 1:
            raise ValidationError("theta_grid must be positive")

    @property
    def lambda2(self):
        return None if self.lambda1 is None else self.lambda1 / 5

    def as_dict(self):
        return asdict(self)


@dataclass
class DriftReport:
    times: np.ndarray            # checkpoint times k tau
    distances: np.ndarray        # (samples, checkpoints)
    slope: float
    ci: tuple
    slope_half: float
    residual_rms: float
    sample_slopes: np.ndarray
    mean_rate: float             # mean of d(u(n), o) / (n tau)
    trivial_bound: float         # K = largest single-step displacement
    trivial_bound_ok: bool
    tracking: float = None       # max over the final 20% of d(u . o, xi) / (k tau)
    fractions: dict = field(default_factory=dict)
    target: str = ""

    @property
    def doubling_change(self):
        if self.slope == 0:
            return 0.0 if self.slope_half == 0 else math.inf
        return abs(self.slope - self.slope_half) / abs(self.slope)

    def summary(self):
        return {
            "slope": self.slope, "ci_low": self.ci[0], "ci_high": self.ci[1],
            "slope_half": self.slope_half, "doubling_change": self.doubling_change,
            "residual_rms": self.residual_rms, "mean_rate": self.mean_rate,
            "trivial_bound": self.trivial_bound, "trivial_bound_ok": self.trivial_bound_ok,
            "tracking": self.tracking, "fractions": dict(self.fractions), "target": self.target,
            "samples": int(self.distances.shape[0]),
        }


def _ols_slopes(times, D):
    tc = times - times.mean()
    denom = float(tc @ tc)
    slopes = (D - D.mean(axis=1, keepdims=True)) @ tc / denom
    fit = D.mean(axis=1, keepdims=True) + slopes[:, None] * tc[None, :]
    return slopes, D - fit


def _ci(x, level=0.95):
    m = float(np.mean(x))
    if len(x) < 2:
        return m, (m, m)
    sd = float(np.std(x, ddof=1))
    h = stats.t.ppf(0.5 + level / 2, len(x) - 1) * sd / math.sqrt(len(x))
    return m, (m - h, m + h)


def sample_streams(seed, n):
    """Independent generator per sample index."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def start_frames(domain: DirichletDomain, rngs, spread=1.5, word_len=3):
    """Jittered frames near the center, pushed off by a random word; reduce() undoes the word."""
    labs, maps, inv = domain.pres.letters()
    K = domain.pres.field
    sig = Embedding(K, K.id_index)
    mats = [_det1(sig.matrix(g)) for g in maps]
    out = []
    for rng in rngs:
        Y = random_frames(domain.center, 1, rng, spread)[0]
        last = -1
        for _ in range(word_len):
            j = int(rng.integers(len(mats)))
            while last >= 0 and inv[j] == last:
                j = int(rng.integers(len(mats)))
            Y = Y @ mats[j]
            last = j
        out.append(Y)
    return np.array(out)


def _checkpoint_steps(n, k):
    k = max(1, min(k, n))
    return sorted({int(round(n * (i + 1) / k)) for i in range(k)})


def run_chains(rm: ReturnMap, frames, cfg: ExperimentConfig, thetas=None):
    """Advance frames for cfg.n steps; returns (times, distances, step bound, tracking info)."""
    st = start_state(rm, frames)
    tg = rm.target
    steps_at = set(_checkpoint_steps(cfg.n, cfg.checkpoints) if cfg.n else [])
    times, dists, segs = [], [], []
    seg = tg.start(len(frames)) if isinstance(tg, EmbeddingTarget) else None
    for k in range(1, cfg.n + 1):
        rot = None if thetas is None else thetas[:, k - 1]
        steps = advance(rm, st, cfg.tau, rotations=rot, track_steps=True)
        if seg is not None:
            tg.apply(seg, steps)
        if k in steps_at:
            times.append(k * cfg.tau)
            dists.append(tg.distance(st.acc))
            if seg is not None:
                segs.append(seg)
                seg = tg.start(len(frames))
    n = len(frames)
    D = np.array(dists).T if dists else np.zeros((n, 0))
    return np.array(times), D, st, segs


def _tail_distances(segs):
    """d(o, V_j o) for V_j the product of the segments after checkpoint j."""
    n = len(segs[0]["s"])
    M = np.tile(np.eye(2, dtype=complex) / math.sqrt(2), (n, 1, 1))
    s = np.full(n, 0.5 * math.log(2))
    out = [None] * len(segs)
    for j in range(len(segs) - 1, -1, -1):
        out[j] = _dist_from_logscale(s)
        M = segs[j]["M"] @ M
        nrm = np.linalg.norm(M, axis=(1, 2))
        M /= nrm[:, None, None]
        s = s + segs[j]["s"] + np.log(nrm)
    return out


def lyapunov_estimate(rm: ReturnMap, cfg: ExperimentConfig) -> DriftReport:
    """Drift rate of d_T(u(k tau, x), o) over random starts."""
    if cfg.samples < 30:
        raise ValidationError("lyapunov_estimate needs at least 30 samples")
    if cfg.n < 2:
        raise ValidationError("lyapunov_estimate needs n >= 2")
    frames = start_frames(rm.domain, sample_streams(cfg.seed, cfg.samples), cfg.spread)
    times, D, st, segs = run_chains(rm, frames, cfg)
    return _drift_report(rm, times, D, st, segs, cfg.tau)


def _drift_report(rm, times, D, st, segs, tau):
    slopes, resid = _ols_slopes(times, D)
    slope, ci = _ci(slopes)
    half = len(times) // 2
    slopes_half, _ = _ols_slopes(times[:half], D[:, :half]) if half >= 2 else (slopes, None)
    K = float(st.step_bound.max()) if st.step_bound is not None else 0.0
    ok = bool(np.all(D <= K * (times / tau)[None, :] + 1e-9)) if D.size else True
    tracking = None
    if segs:
        # distance from u(k) . o to the geodesic [o, u(n) . o], up to the
        # thinness constant: Gromov product (o | u(n) o) at u(k) o
        tails = _tail_distances(segs)
        start = int(0.8 * len(times))
        pos = slopes > 0
        worst = 0.0
        for j in range(start, len(times)):
            gp = 0.5 * (D[:, j] + tails[j] - D[:, -1])
            if pos.any():
                worst = max(worst, float(np.max(gp[pos]) / times[j]))
        tracking = worst
    return DriftReport(times, D, float(slope), (float(ci[0]), float(ci[1])),
                       float(np.mean(slopes_half)), float(np.sqrt(np.mean(resid**2))) if resid.size else 0.0,
                       slopes, float(np.mean(D[:, -1] / times[-1])) if D.size else 0.0, K, ok, tracking,
                       {}, rm.target.name)


def rotation_drift_profile(rm: ReturnMap, g: MoebiusMap, cfg: ExperimentConfig, lambda1: float = None,
                           theta_offset: float = 0.0):
    """Per-theta distances d(u(n, r_theta g) . o, o) and excess over the ray xi_t = a_t . o."""
    if cfg.theta_grid < 64:
        raise ValidationError("theta grid must have at least 64 points")
    thetas = theta_offset + 2 * np.pi * np.arange(cfg.theta_grid) / cfg.theta_grid
    frames = rotation_matrices(thetas) @ g.as_array()[None]
    st = start_state(rm, frames)
    for _ in range(cfg.n):
        advance(rm, st, cfg.tau)
    dist = rm.target.distance(st.acc)
    t = cfg.xi_t
    dxi = _distance_to_ray_point(rm, st, t)
    excess = dxi - t
    lam = cfg.lambda1 if lambda1 is None else lambda1
    frac = None
    if lam is not None:
        frac = float(np.mean(excess > lam * cfg.n * cfg.tau / 3))
    return {"theta": thetas, "dist": dist, "dist_to_xi_t": dxi, "excess": excess,
            "xi_t": t, "lambda1": lam, "fraction": frac}


def _distance_to_ray_point(rm, st, t):
    """d(u . o, xi_t) for xi_t = a_t . o = (0, e^t)."""
    tg = rm.target
    n = len(st.frames)
    if isinstance(tg, TrivialTarget):
        return np.full(n, float(t))
    if isinstance(tg, EmbeddingTarget):
        d = tg.distance(st.acc)
        v = tg.direction(st.acc)
        # angle at o between u . o and the top of the sphere (a_t o -> infinity)
        cosang = np.abs(v[:, 0]) ** 2 - np.abs(v[:, 1]) ** 2
        # cosh c = cosh a cosh b - sinh a sinh b cos(angle), in log form for large a
        return _law_cos_far(d, float(t), cosang)
    if isinstance(tg, ExactTarget):
        out = []
        for U in st.acc["U"]:
            m = tg.sigma.matrix(U)
            m = m / np.sqrt(np.linalg.det(m))
            z, h = act_batch(m[None], np.zeros(1, complex), np.ones(1))
            out.append(float(dist_batch(z, h, np.zeros(1, complex), np.full(1, math.exp(t)))[0]))
        return np.array(out)
    raise Unsupported("ray distances are only defined for archimedean targets")


def _law_cos_far(a, b, cosang):
    """Third side opposite the angle between sides a and b, stable for large a."""
    a = np.asarray(a, float)
    # sinh^2(c/2) = sinh^2((a-b)/2) + sin^2(angle/2) sinh a sinh b
    s2 = (1 - cosang) / 2
    big = a > 40
    out = np.empty_like(a)
    ab = a[~big]
    x = np.sinh((ab - b) / 2) ** 2 + s2[~big] * np.sinh(ab) * math.sinh(b)
    out[~big] = 2 * np.arcsinh(np.sqrt(np.maximum(x, 0)))
    ab = a[big]
    # log of the right side; both terms ~ e^a
    l1 = (ab - b) - math.log(4)
    with np.errstate(divide="ignore"):
        l2 = np.log(np.maximum(s2[big], 1e-300)) + ab - math.log(2) + math.log(math.sinh(b)) if b > 0 else np.full(len(ab), -np.inf)
    lx = np.logaddexp(l1, l2)
    # 2 asinh(sqrt(X)) = 2 log(sqrt X + sqrt(X + 1)) ~ lx + log 4 for large X
    out[big] = lx + math.log(4)
    return out


# -- Markov chain and maximal inequality -----------------------------------------------------

def markov_chain(rm: ReturnMap, z: MoebiusMap, cfg: ExperimentConfig, thetas=None):
    """Random path w_j = a_tau r_theta_j w_{j-1} and the products u_{z,n}.

    Factors are multiplied on the right (cocycle order), so all theta_j = 0
    reproduces u(n tau, z). Returns (thetas, distances d(u_{z,k}, o) for k = 0..n,
    largest single-step displacement, final state).
    """
    if thetas is None:
        rng = np.random.default_rng(cfg.seed)
        thetas = rng.uniform(0, 2 * np.pi, cfg.n)
    thetas = np.asarray(thetas, float)
    st = start_state(rm, z.as_array()[None])
    dist = [0.0]
    for k in range(len(thetas)):
        advance(rm, st, cfg.tau, rotations=thetas[k:k + 1], track_steps=True)
        dist.append(float(rm.target.distance(st.acc)[0]))
    return {"thetas": thetas, "dist": np.array(dist), "L": float(st.step_bound.max()),
            "u": rm.target.element(st.acc, 0), "state": st}


def _copy_acc(tg, acc, reps):
    """Repeat each accumulator ``reps`` times (rows grouped by original index)."""
    if isinstance(tg, EmbeddingTarget):
        return {"M": np.repeat(acc["M"], reps, axis=0), "s": np.repeat(acc["s"], reps)}
    if isinstance(tg, TrivialTarget):
        return {"n": acc["n"] * reps}
    if isinstance(tg, ExactTarget):
        return {"U": [u for u in acc["U"] for _ in range(reps)]}
    return {"A": [list(a) for a in acc["A"] for _ in range(reps)],
            "e": [e for e in acc["e"] for _ in range(reps)],
            "prec": [p for p in acc["prec"] for _ in range(reps)]}


def martingale_test(rm: ReturnMap, z: MoebiusMap, cfg: ExperimentConfig, c: float = None, n1: int = None):
    """Empirical check of the maximal inequality for the centred increments phi_hat.

    phi_{theta,n}(y) = d(u_{z,n-1} u(tau, y), o) - d(u_{z,n-1}, o); the centring
    term is the average over a theta grid (random offset per step) at y = r_theta w_{n-1}.
    """
    if cfg.trials < 100:
        raise ValidationError("martingale_test needs at least 100 trials")
    N, G, T = cfg.n, cfg.theta_grid, cfg.trials
    if N < 1:
        raise ValidationError("n must be positive")
    rngs = sample_streams(cfg.seed, T)
    thetas = np.array([r.uniform(0, 2 * np.pi, N) for r in rngs])
    offsets = np.array([r.uniform(0, 2 * np.pi / G, N) for r in rngs])
    st = start_state(rm, np.repeat(z.as_array()[None], T, axis=0))
    tg = rm.target
    phi = np.zeros((T, N))
    grid = 2 * np.pi * np.arange(G) / G
    prev = tg.distance(st.acc)
    for k in range(N):
        # centring term: every grid rotation of the current frame
        Yg = rotation_matrices(offsets[:, k:k + 1] + grid[None, :]).reshape(T * G, 2, 2) @ np.repeat(st.frames, G, axis=0)
        Yg = flow_matrix(cfg.tau)[None] @ Yg
        Yg, steps = rm.domain.reduce_frames(Yg)
        acc = _copy_acc(tg, st.acc, G)
        tg.apply(acc, steps)
        mean = tg.distance(acc).reshape(T, G).mean(axis=1) - prev
        advance(rm, st, cfg.tau, rotations=thetas[:, k])
        cur = tg.distance(st.acc)
        phi[:, k] = (cur - prev) - mean
        prev = cur
    S = np.cumsum(phi, axis=1)
    ns = np.arange(1, N + 1)
    lam = cfg.lambda1
    if c is None:
        c = cfg.c if cfg.c is not None else (0.1 * (lam / 5) * cfg.tau if lam else 0.1)
    if n1 is None:
        n1 = cfg.n1 if cfg.n1 is not None else max(1, N // 4)
    if not 1 <= n1 <= N:
        raise ValidationError("N1 must lie in [1, n]")
    ratio = np.abs(S[:, n1 - 1:]) / ns[None, n1 - 1:]
    freq = float(np.mean(ratio.max(axis=1) > c))
    m2 = np.mean(phi**2, axis=0)
    bound = (np.sum(m2[n1 - 1:] / ns[n1 - 1:] ** 2) + np.sum(m2[:n1]) / n1**2) / c**2
    return {"frequency": freq, "bound": float(bound), "c": float(c), "n1": int(n1), "N": int(N),
            "trials": int(T), "theta_grid": int(G), "second_moments": m2, "phi": phi,
            "L": float(np.abs(phi).max()) if phi.size else 0.0, "holds": bool(freq <= bound)}


# -- convenience -----------------------------------------------------------------------------

def preset_domain(name="bianchi-zi", **kw):
    from .presets import presentation
    return DirichletDomain.build(presentation(name), **kw)


def preset_return_map(name="bianchi-zi", target=None, domain=None, **kw):
    dom = domain or preset_domain("bianchi-zi" if name == "trivial-rep" else name, **kw)
    if name == "trivial-rep" and target is None:
        target = TrivialTarget()
    return ReturnMap(dom, target)
