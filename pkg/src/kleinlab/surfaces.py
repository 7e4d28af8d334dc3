"""Closed H-orbits from circles with exact coefficients, orbit sampling and probes.

A circle C with coefficients in the field of the group cuts out the plane over
C in H^3; its stabilizer in Gamma is Fuchsian and the frames over that plane
form a closed orbit of H = PSL2(R) in G / Gamma. With m(R^) = C the orbit is
{h m^-1 Gamma : h in H} in the frame convention of ``cocycle``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np
from scipy import stats

from .arithmeticity import GroupPresentation, _check_budget, embedding_bounded, iter_word_levels_numeric
from .circles import Circle
from .cocycle import (DirichletDomain, EmbeddingTarget, ExperimentConfig, ReturnMap, TrivialTarget,
                      _det1, _drift_report, _inv2, frame_points, run_chains, sample_streams, steps_to_word)
from .errors import BudgetExceeded, Unsupported, ValidationError
from .moebius import MoebiusMap, act_batch
from .numberfield import Embedding
from . import scalars

# |D|^{3/2} zeta(2) L(2, chi_D) / (4 pi^2): covolumes of PSL2 over the rings of integers
CATALAN = 0.915965594177219015
L2_CHI3 = 0.781302412896486296
COVOLUME = {
    "Q(i)": 8 * (math.pi**2 / 6) * CATALAN / (4 * math.pi**2),
    "Q(omega)": 3**1.5 * (math.pi**2 / 6) * L2_CHI3 / (4 * math.pi**2),
}
# area of C / Gamma_infinity, with Gamma_infinity = {z -> u^2 z + b}
CUSP_AREA = {"Q(i)": 0.5, "Q(omega)": math.sqrt(3) / 6}
_BY_POLY = {(1, 0, 1): "Q(i)", (1, -1, 1): "Q(omega)"}


def field_key(K) -> str:
    """Name under which volume data is stored, from the defining polynomial."""
    key = _BY_POLY.get(tuple(int(c) for c in K.coeffs))
    if key is None:
        raise Unsupported(f"no volume data for the field with polynomial {K.coeffs}")
    return key


# -- stabilizers ----------------------------------------------------------------------

@dataclass
class StabilizedCircle:
    circle: Circle
    words: list = field(default_factory=list)
    elements: list = field(default_factory=list)   # distinct exact elements (PSL2)
    label: str = ""
    nonelementary: bool = False
    systole: float = math.inf   # shortest translation length among found loxodromics

    def preserves(self, g: MoebiusMap) -> bool:
        return self.circle.transform(g).proj_equal(self.circle)


def _hermitian_float(C: Circle):
    H = C.as_array()
    return H / np.linalg.norm(H)


def _fixed_points(m):
    a, b, c, d = m.ravel()
    if abs(c) < 1e-12:
        pts = [complex("inf")]
        if abs(a - d) > 1e-12:
            pts.append(b / (d - a))
        return pts
    disc = np.sqrt((a - d) ** 2 + 4 * b * c)
    return sorted([(a - d + disc) / (2 * c), (a - d - disc) / (2 * c)], key=lambda x: (x.real, x.imag))


def _same_axis(p, q):
    def close(x, y):
        if math.isinf(abs(x)) or math.isinf(abs(y)):
            return math.isinf(abs(x)) and math.isinf(abs(y))
        return abs(x - y) < 1e-7 * max(1.0, abs(x))
    return (close(p[0], q[0]) and close(p[1], q[1])) or (close(p[0], q[1]) and close(p[1], q[0]))


def circle_stabilizer(C: Circle, pres: GroupPresentation, word_len: int, label: str = "", budget=None):
    """All reduced words of length <= word_len whose map preserves C (exact check).

    Candidates are screened in floating point and confirmed exactly on the
    Hermitian form; one exact check per distinct element.
    """
    if not scalars.is_exact(C.tag):
        raise ValidationError("circle coefficients must be exact field elements")
    if budget is not None:
        _check_budget(pres, word_len, budget)
    else:
        _check_budget(pres, word_len)
    labs, maps, inv = pres.letters()
    K = pres.field
    sig = Embedding(K, K.id_index)
    mats = np.array([_det1(sig.matrix(g)) for g in maps])
    H = _hermitian_float(C.to_float() if C.tag != "float" else C)
    found_words, elements, keys = [], [], {}
    lox = []
    for words, cur in iter_word_levels_numeric(mats, inv, word_len):
        gi = _inv2(cur)
        Hp = np.conj(np.transpose(gi, (0, 2, 1))) @ H[None] @ gi
        Hp /= np.linalg.norm(Hp, axis=(1, 2))[:, None, None]
        d = np.minimum(np.abs(Hp - H[None]).max(axis=(1, 2)), np.abs(Hp + H[None]).max(axis=(1, 2)))
        for k in np.flatnonzero(d < 1e-8):
            w = tuple(int(i) for i in words[k])
            key = _elem_key(cur[k])
            if key not in keys:
                g = pres.word_map(w)
                ok = C.transform(g).proj_equal(C)
                keys[key] = ok
                if ok:
                    elements.append((w, g))
                    tr = complex(cur[k, 0, 0] + cur[k, 1, 1])
                    if abs(tr.imag) < 1e-9 and abs(tr.real) > 2 + 1e-9:
                        lox.append((w, cur[k], 2 * math.acosh(abs(tr.real) / 2)))
            if keys[key]:
                found_words.append(w)
    nonel = False
    for i in range(len(lox)):
        for j in range(i + 1, len(lox)):
            if not _same_axis(_fixed_points(lox[i][1]), _fixed_points(lox[j][1])):
                nonel = True
                break
        if nonel:
            break
    systole = min((l for _, _, l in lox), default=math.inf)
    return StabilizedCircle(C, found_words, elements, label, nonel, systole)


def _elem_key(m):
    m = m / np.sqrt(np.linalg.det(m))
    flat = m.ravel()
    k = int(np.argmax(np.abs(flat) > 1e-9))
    if flat[k].real < -1e-9 or (abs(flat[k].real) <= 1e-9 and flat[k].imag < 0):
        m = -m
    r = np.round(m.ravel() * 1e6)
    return tuple(np.concatenate([r.real, r.imag]).astype(np.int64).tolist())


def catalogue_circles(pres: GroupPresentation):
    from .presets import circle_catalogue
    return [(lab, Circle(*abc)) for lab, abc in circle_catalogue(pres)]


# -- orbit sampling ---------------------------------------------------------------------

def _carrier(C: Circle):
    """m with m(R^) = C: sends 0, 1, inf to three points of C."""
    Cf = C.to_float() if C.tag != "float" else C
    if Cf.is_line or abs(Cf.A) < 1e-14:
        # line B conj z + conj(B) z + C = 0 through p0 with direction i B
        B = complex(Cf.B)
        p0 = -Cf.C * B / (2 * abs(B) ** 2)
        dirn = 1j * B / abs(B)
        return np.array([[dirn, p0], [0, 1]], dtype=complex)
    c, r = Cf.center(), Cf.radius()
    p0, p1, p2 = c + r, c + 1j * r, c - r
    k = (p1 - p0) / (p2 - p1)
    return np.array([[p2 * k, p0], [k, 1]], dtype=complex)


class OrbitSampler:
    """Frames h m^-1 with h uniform (Haar) on the disc of radius ``disc_radius`` in H.

    Large hyperbolic discs equidistribute in H / stabilizer, so this is a
    surrogate for the H-invariant probability measure on the closed orbit.
    A random stabilizer word is appended before reduction; it does not move
    the orbit point but exercises the reduction.
    """

    def __init__(self, stab: StabilizedCircle, domain: DirichletDomain, disc_radius: float = 8.0,
                 seed: int = 0, word_len: int = 2):
        if not stab.nonelementary:
            raise ValidationError("stabilizer is elementary; the orbit sampler needs a non-elementary one")
        self.stab = stab
        self.domain = domain
        self.disc_radius = disc_radius
        self.seed = seed
        self.word_len = word_len
        m = _det1(_carrier(stab.circle))
        self.minv = _inv2(m)
        K = domain.pres.field
        sig = Embedding(K, K.id_index)
        self._stab_mats = [_det1(sig.matrix(g)) for _, g in stab.elements]


@dataclass
class OrbitSample:
    frames: np.ndarray
    z: np.ndarray
    t: np.ndarray
    raw: np.ndarray            # frames before reduction
    words: list = None         # reduction words (face, exponent) per sample when tracked
    stab_index: np.ndarray = None


def sample_orbit(sampler: OrbitSampler, n: int, track_words: bool = False, seed=None) -> OrbitSample:
    if n == 0:
        e = np.zeros((0, 2, 2), complex)
        return OrbitSample(e, np.zeros(0, complex), np.zeros(0), e, [] if track_words else None, np.zeros(0, int))
    seed = sampler.seed if seed is None else seed
    R = sampler.disc_radius
    th1, th2, r, si = np.empty(n), np.empty(n), np.empty(n), np.empty(n, dtype=np.int64)
    norm = math.cosh(R) - 1
    for i, rng in enumerate(sample_streams(seed, n)):
        u = rng.random(4)
        th1[i], th2[i] = 2 * math.pi * u[0], 2 * math.pi * u[1]
        # density sinh r on [0, R]
        r[i] = math.acosh(1 + u[2] * norm)
        si[i] = int(u[3] * len(sampler._stab_mats))
    h = np.zeros((n, 2, 2), complex)
    c1, s1 = np.cos(th1 / 2), np.sin(th1 / 2)
    c2, s2 = np.cos(th2 / 2), np.sin(th2 / 2)
    e, f = np.exp(r / 2), np.exp(-r / 2)
    # r_th1 a_r r_th2
    h[:, 0, 0] = c1 * e * c2 - s1 * f * s2
    h[:, 0, 1] = c1 * e * s2 + s1 * f * c2
    h[:, 1, 0] = -s1 * e * c2 - c1 * f * s2
    h[:, 1, 1] = -s1 * e * s2 + c1 * f * c2
    lam = np.array(sampler._stab_mats)[si]
    raw = h @ sampler.minv[None] @ lam
    Y, steps = sampler.domain.reduce_frames(raw)
    z, t = frame_points(Y)
    words = [steps_to_word(sampler.domain, steps, i) for i in range(n)] if track_words else None
    return OrbitSample(Y, z, t, raw, words, si)


def orbit_membership(sampler: OrbitSampler, sample: OrbitSample, i: int, tol=1e-7) -> bool:
    """The boundary circle of the frame's H-plane is gamma lambda^-1 (C), checked against the exact image."""
    dom = sampler.domain
    gamma = dom.word_element(sample.words[i])
    lam = sampler.stab.elements[int(sample.stab_index[i])][1]
    image = sampler.stab.circle.transform(gamma @ lam.inverse())
    Yi = _inv2(sample.frames[i])
    # frame circle y^-1(R^) through the images of 0, 1, inf
    pts = [Yi[0, 1] / Yi[1, 1], (Yi[0, 0] + Yi[0, 1]) / (Yi[1, 0] + Yi[1, 1]), Yi[0, 0] / Yi[1, 0]]
    H = _hermitian_float(image.to_float())
    vals = [abs(np.conj(v) @ H @ v) / (np.linalg.norm(v) ** 2) for v in
            (np.array([p, 1]) / max(1.0, abs(p)) for p in pts)]
    return max(vals) < tol


# -- invariant cusp height and windows ------------------------------------------------------

def _ford_data(domain: DirichletDomain):
    if domain._lattice is None:
        raise Unsupported("the face set has no cusp lattice at infinity")
    i1, i2, binv = domain._lattice
    s1, s2 = domain.faces[i1].shift, domain.faces[i2].shift
    S = np.array([[0, -1], [1, 0]], dtype=complex)
    if not any(np.allclose(f.mat, S) or np.allclose(f.mat, -S) for f in domain.faces):
        raise Unsupported("invariant heights need z -> -1/z in the group")
    return s1, s2, binv


def invariant_height(domain: DirichletDomain, z, t, max_iter: int = 500):
    """max over gamma of the height of gamma . (z, t), for Bianchi groups of class number one.

    Ford reduction: move to the nearest lattice point, invert in the unit
    sphere while below it.
    """
    s1, s2, binv = _ford_data(domain)
    z = np.array(z, dtype=complex, copy=True)
    t = np.array(t, dtype=float, copy=True)
    for _ in range(max_iter):
        coef = binv @ np.vstack([z.real, z.imag])
        base = np.floor(coef)
        best = np.full(len(z), np.inf)
        shift = np.zeros(len(z), complex)
        for da in (0, 1):
            for db in (0, 1):
                lat = (base[0] + da) * s1 + (base[1] + db) * s2
                d = np.abs(z - lat)
                better = d < best
                best[better] = d[better]
                shift[better] = lat[better]
        z = z - shift
        r2 = np.abs(z) ** 2 + t * t
        low = r2 < 1 - 1e-12
        if not low.any():
            return t
        z[low] = -np.conj(z[low]) / r2[low]
        t[low] = t[low] / r2[low]
    raise BudgetExceeded("invariant height did not settle")


@dataclass(frozen=True)
class HeightWindow:
    """Points whose invariant height lies in [low, high)."""

    low: float = 0.0
    high: float = math.inf

    def __post_init__(self):
        if self.low < 0 or self.high < self.low:
            raise ValidationError("window needs 0 <= low <= high")

    def contains(self, h):
        return (h >= self.low) & (h < self.high)


def cusp_volume_above(field_name: str, h: float) -> float:
    """Volume of {invariant height > h}; the horoball is precisely invariant for h >= 1."""
    if h < 1:
        raise ValidationError("closed form needs h >= 1")
    if math.isinf(h):
        return 0.0
    return CUSP_AREA[field_name] / (2 * h * h)


def window_volume_fraction(field_name: str, window: HeightWindow) -> float:
    if field_name not in COVOLUME:
        raise Unsupported(f"no volume data for {field_name}")
    vol = COVOLUME[field_name]
    if window.low == window.high:
        return 0.0
    above_low = vol if window.low == 0 else cusp_volume_above(field_name, window.low)
    above_high = cusp_volume_above(field_name, window.high)
    return (above_low - above_high) / vol


# -- probes ----------------------------------------------------------------------------------

@dataclass
class EquidistReport:
    labels: list
    fractions: np.ndarray
    errors: np.ndarray
    stderr: np.ndarray
    volume_fraction: float
    window: HeightWindow
    samples: int
    nonincreasing: bool
    systoles: list

    def summary(self):
        return {"labels": list(self.labels), "fractions": self.fractions.tolist(),
                "errors": self.errors.tolist(), "stderr": self.stderr.tolist(),
                "volume_fraction": self.volume_fraction, "window": [self.window.low, self.window.high],
                "samples": self.samples, "nonincreasing": self.nonincreasing,
                "systoles": list(self.systoles)}


def equidistribution_probe(orbits, window: HeightWindow, cfg: ExperimentConfig, domain: DirichletDomain,
                           samples: int = None, disc_radius: float = 8.0):
    """Window mass of each orbit's sample against the Haar volume fraction.

    The trend passes when each error is at most the previous one plus twice
    the combined standard error of the two binomial proportions.
    """
    if len(orbits) < 3:
        raise ValidationError("need at least three orbits")
    n = samples or cfg.samples
    fracs, errs, ses, labels = [], [], [], []
    vf = window_volume_fraction(field_key(domain.pres.field), window)
    for j, orb in enumerate(orbits):
        s = OrbitSampler(orb, domain, disc_radius, seed=cfg.seed + j)
        smp = sample_orbit(s, n)
        h = invariant_height(domain, smp.z, smp.t)
        f = float(np.mean(window.contains(h)))
        fracs.append(f)
        errs.append(abs(f - vf))
        ses.append(math.sqrt(max(f * (1 - f), 1e-12) / n))
        labels.append(orb.label)
    errs, ses = np.array(errs), np.array(ses)
    ok = all(errs[i + 1] <= errs[i] + 2 * math.hypot(ses[i], ses[i + 1]) for i in range(len(errs) - 1))
    return EquidistReport(labels, np.array(fracs), errs, ses, vf, window, n, bool(ok),
                          [o.systole for o in orbits])


def height_stability(sampler: OrbitSampler, small: int = 1000, large: int = 10000, step: float = 2.0):
    """Two-sample KS between heights at disc radius R (small n) and R + step (large n)."""
    a = sample_orbit(sampler, small, seed=sampler.seed)
    other = OrbitSampler(sampler.stab, sampler.domain, sampler.disc_radius + step, sampler.seed + 1)
    b = sample_orbit(other, large)
    ha = invariant_height(sampler.domain, a.z, a.t)
    hb = invariant_height(sampler.domain, b.z, b.t)
    res = stats.ks_2samp(ha, hb)
    return float(res.statistic), float(res.pvalue)


def main_lemma_probe(orbit: StabilizedCircle, rm: ReturnMap, cfg: ExperimentConfig, lambda1: float = None,
                     grid=None, n_min: int = 0, disc_radius: float = 8.0, check_unbounded: bool = True):
    """Fraction of orbit points z with d(u(k tau, z), o) > lam k tau, for checkpoints k > n_min."""
    tg = rm.target
    if check_unbounded and isinstance(tg, EmbeddingTarget):
        rep = embedding_bounded(tg.sigma, rm.domain.pres, 4)
        if not rep.unbounded:
            raise ValidationError("target embedding shows no unbounded element; the probe needs one")
    sampler = OrbitSampler(orbit, rm.domain, disc_radius, seed=cfg.seed)
    smp = sample_orbit(sampler, cfg.samples)
    times, D, st, segs = run_chains(rm, smp.frames, cfg)
    report = _drift_report(rm, times, D, st, segs, cfg.tau)
    lam1 = cfg.lambda1 if lambda1 is None else lambda1
    if lam1 is None:
        lam1 = report.slope
    if grid is None:
        grid = [lam1 / 5, lam1 / 3, lam1 / 2]
    keep = times > n_min * cfg.tau
    fr = {}
    for lam in grid:
        if keep.any():
            fr[f"{lam:.6g}"] = float(np.mean(D[:, keep][:, -1] > lam * times[keep][-1]))
        else:
            fr[f"{lam:.6g}"] = None
    report.fractions = fr
    report.fractions["main_lemma"] = fr[f"{lam1 / 3:.6g}"] if keep.any() else None
    report.fractions["lambda1"] = lam1
    return report
