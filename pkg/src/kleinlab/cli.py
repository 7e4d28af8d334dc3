"""Command-line experiments. Each subcommand writes <out>/<subcommand>.csv and <out>/summary.json.

Value precedence, lowest first: built-in defaults, subcommand defaults,
--config file, command-line flags.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .arithmeticity import arithmeticity_test, load_presentation
from .circles import inversion_as_moebius, pencil_inversion, random_linked_pairs, real_trace_ratio
from .cocycle import (DirichletDomain, EmbeddingTarget, ExactTarget, PlaceTarget, ReturnMap, TrivialTarget,
                      lyapunov_estimate, rotation_drift_profile, sample_streams, start_frames)
from .config import load_config, split_config
from .crosses import GraphSet, canonical_sequences, classify_limit, sampled_hausdorff
from .errors import BudgetExceeded, KleinlabError, Unsupported, ValidationError
from .moebius import MoebiusMap
from .numberfield import Embedding, conjugate_embedding, finite_places
from .presets import presentation as preset_presentation
from .circles import Circle
from .surfaces import (HeightWindow, catalogue_circles, circle_stabilizer, equidistribution_probe,
                       main_lemma_probe)

PRESETS = ("bianchi-zi", "bianchi-zw", "trivial-rep")

# per-subcommand defaults, applied under the config file and flags
DEFAULTS = {
    "lyapunov": {"n": 200, "samples": 100, "checkpoints": 50},
    "drift": {"n": 50, "theta_grid": 64},
    "inversion-demo": {"pairs": 1000},
    "classify-limit": {"length": 21, "hausdorff_points": 2000},
    "arithmeticity": {"arith_word_len": 4},
    "equidist": {"samples": 3000, "window_low": 0.0, "window_high": 1.0, "disc_radius": 8.0},
    "main-lemma": {"tau": 4.0, "n": 50, "samples": 300, "disc_radius": 8.0},
}
STAB_WORD_LEN = 6


@dataclass
class RunManifest:
    subcommand: str
    config_path: str = None
    input_paths: list = field(default_factory=list)
    seed: int = 0
    out_dir: str = "."
    input_hash: str = ""

    def hash_inputs(self):
        """git-style blob hashes of every input file, folded into one digest."""
        h = hashlib.sha1()
        for path in [self.config_path] + list(self.input_paths):
            if path is None:
                continue
            with open(path, "rb") as fh:
                data = fh.read()
            blob = hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()
            h.update(f"{os.path.basename(path)} {blob}\n".encode())
        self.input_hash = h.hexdigest()
        return self.input_hash


# -- helpers ---------------------------------------------------------------------------

def _clean(v):
    """JSON-safe copy: numpy scalars to python, non-finite floats to None."""
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, np.ndarray):
        return _clean(v.tolist())
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(x) for x in r])


def write_summary(path, manifest: RunManifest, cfg, extras, result):
    doc = {
        "version": __version__,
        "subcommand": manifest.subcommand,
        "manifest": asdict(manifest),
        "config": {**cfg.as_dict(), **extras},
        "result": result,
    }
    with open(path, "w") as fh:
        json.dump(_clean(doc), fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def _pres_for(extras):
    if extras.get("catalogue"):
        return load_presentation(extras["catalogue"]).presentation
    if extras.get("presentation"):
        return load_presentation(extras["presentation"]).presentation
    return preset_presentation(extras.get("preset") or "bianchi-zi")


def _domain(pres, cfg):
    return DirichletDomain.build(pres, word_len=cfg.word_len, radius=cfg.face_radius,
                                 max_iter=cfg.max_iter, excursion_cap=cfg.excursion_cap)


def _target(extras, pres):
    name = extras.get("target")
    if name is None:
        name = "trivial" if extras.get("preset") == "trivial-rep" else "identity"
    K = pres.field
    if name == "identity":
        return EmbeddingTarget(Embedding(K, K.id_index))
    if name == "conjugate":
        return EmbeddingTarget(conjugate_embedding(K))
    if name == "trivial":
        return TrivialTarget()
    if name == "exact":
        return ExactTarget()
    if name.startswith("p-adic:"):
        try:
            p = int(name.split(":", 1)[1])
        except ValueError:
            raise ValidationError(f"bad target {name!r}") from None
        places = finite_places(K, p)
        if not places:
            raise Unsupported(f"no place above {p}")
        return PlaceTarget(places[0], precision=extras.get("precision") or 64)
    raise ValidationError(f"unknown target {name!r}; use identity, conjugate, trivial, exact or p-adic:<p>")


def _catalogue(pres, extras):
    if extras.get("catalogue"):
        pf = load_presentation(extras["catalogue"])
        if not pf.circles:
            raise ValidationError("catalogue file has no 'circle:' lines")
        return [(lab, Circle(*abc)) for lab, abc in pf.circles]
    try:
        return catalogue_circles(pres)
    except ValueError as exc:
        raise Unsupported(str(exc)) from None


def _stabilized(pres, extras, labels):
    cat = dict(_catalogue(pres, extras))
    out = []
    for lab in labels:
        if lab not in cat:
            raise ValidationError(f"orbit {lab!r} not in catalogue {sorted(cat)}")
        out.append(circle_stabilizer(cat[lab], pres, STAB_WORD_LEN, label=lab))
    return out


# -- subcommands -------------------------------------------------------------------------

def cmd_lyapunov(cfg, extras, out):
    pres = _pres_for(extras)
    rm = ReturnMap(_domain(pres, cfg), _target(extras, pres))
    rep = lyapunov_estimate(rm, cfg)
    seeds = [int(s.generate_state(1, np.uint32)[0]) for s in np.random.SeedSequence(cfg.seed).spawn(cfg.samples)]
    steps = np.rint(rep.times / cfg.tau).astype(int)
    rows = [(i, int(k), seeds[i], float(rep.distances[i, j]), float(rep.sample_slopes[i]))
            for i in range(rep.distances.shape[0]) for j, k in enumerate(steps)]
    write_csv(os.path.join(out, "lyapunov.csv"), ["sample", "n", "theta_seed", "dist", "slope"], rows)
    return rep.summary()


def cmd_drift(cfg, extras, out):
    pres = _pres_for(extras)
    rm = ReturnMap(_domain(pres, cfg), _target(extras, pres))
    g = start_frames(rm.domain, sample_streams(cfg.seed, 1), cfg.spread)[0]
    prof = rotation_drift_profile(rm, MoebiusMap.from_array(g), cfg)
    rows = zip(prof["theta"], prof["dist"], prof["dist_to_xi_t"], prof["excess"])
    write_csv(os.path.join(out, "drift.csv"), ["theta", "dist", "dist_to_xi_t", "excess"], rows)
    return {"xi_t": prof["xi_t"], "lambda1": prof["lambda1"], "fraction": prof["fraction"],
            "theta_grid": len(prof["theta"]), "mean_dist": float(np.mean(prof["dist"])),
            "min_excess": float(np.min(prof["excess"]))}


def cmd_inversion_demo(cfg, extras, out):
    rows, worst_inv, worst_tr = [], 0.0, 0.0
    for k, (pair, p) in enumerate(random_linked_pairs(extras["pairs"], cfg.seed)):
        q = pencil_inversion(pair, p)
        back = pencil_inversion(pair, q)
        err = abs(complex(back.affine()) - complex(p.affine()))
        m = inversion_as_moebius(pair)
        tr = real_trace_ratio(m)
        worst_inv, worst_tr = max(worst_inv, err), max(worst_tr, tr)
        C = pair.circle
        c = C.center()
        rows.append((k, c.real, c.imag, C.radius(), complex(p.affine()).real, complex(p.affine()).imag,
                     complex(q.affine()).real, complex(q.affine()).imag, err, tr))
    write_csv(os.path.join(out, "inversion-demo.csv"),
              ["pair", "center_re", "center_im", "radius", "p_re", "p_im", "q_re", "q_im",
               "involution_err", "trace_ratio"], rows)
    return {"pairs": len(rows), "max_involution_err": worst_inv, "max_trace_ratio": worst_tr}


def cmd_classify_limit(cfg, extras, out):
    seqs = canonical_sequences(extras["length"])
    npts = extras["hausdorff_points"]
    rows, res = [], {}
    for name, gs in seqs.items():
        lim = classify_limit(gs)
        target = lim.limit_set()
        for i, g in enumerate(gs):
            rows.append((name, i, type(lim).__name__, sampled_hausdorff(GraphSet(g), target, npts, cfg.seed)))
        res[name] = {"limit": type(lim).__name__, "hausdorff_last": rows[-1][3]}
    write_csv(os.path.join(out, "classify-limit.csv"), ["sequence", "index", "limit", "hausdorff"], rows)
    return res


def _verdict_row(v):
    w = getattr(v, "witness", None)
    if w is None:
        return (v.word_len, v.verdict, "", "", "")
    return (v.word_len, v.verdict, w.place, w.word_label, str(w.trace))


def cmd_arithmeticity(cfg, extras, out):
    pres = _pres_for(extras)
    top = extras["arith_word_len"]
    if top < 3:
        raise ValidationError("arith_word_len must be at least 3")
    verdicts = [arithmeticity_test(pres, L) for L in range(3, top + 1)]
    write_csv(os.path.join(out, "arithmeticity.csv"), ["word_len", "verdict", "place", "word", "trace"],
              [_verdict_row(v) for v in verdicts])
    last = verdicts[-1]
    res = {"verdict": last.verdict, "word_len": top, "verdicts": [v.verdict for v in verdicts]}
    w = getattr(last, "witness", None)
    if w is not None:
        res["witness"] = {"kind": w.kind, "place": w.place, "word": w.word_label, "trace": str(w.trace),
                          "recheck": w.recheck(pres)}
    if last.verdict == "Inconclusive":
        res["reason"] = last.reason
    return res


def cmd_equidist(cfg, extras, out):
    pres = _pres_for(extras)
    dom = _domain(pres, cfg)
    labels = extras.get("orbits")
    labels = [s.strip() for s in labels.split(",")] if labels else [lab for lab, _ in _catalogue(pres, extras)][:3]
    orbits = _stabilized(pres, extras, labels)
    window = HeightWindow(extras["window_low"], extras["window_high"])
    rep = equidistribution_probe(orbits, window, cfg, dom, disc_radius=extras["disc_radius"])
    rows = [(j, rep.labels[j], rep.fractions[j], rep.volume_fraction, rep.errors[j], rep.stderr[j],
             rep.systoles[j]) for j in range(len(rep.labels))]
    write_csv(os.path.join(out, "equidist.csv"),
              ["orbit", "label", "fraction", "volume_fraction", "error", "stderr", "systole"], rows)
    return rep.summary()


def cmd_main_lemma(cfg, extras, out):
    pres = _pres_for(extras)
    rm = ReturnMap(_domain(pres, cfg), _target(extras, pres))
    label = extras.get("orbit") or "|z|^2=2"
    orbit = _stabilized(pres, extras, [label])[0]
    check = not isinstance(rm.target, TrivialTarget)
    rep = main_lemma_probe(orbit, rm, cfg, disc_radius=extras["disc_radius"], check_unbounded=check)
    steps = np.rint(rep.times / cfg.tau).astype(int)
    rows = [(i, int(steps[-1]), float(rep.distances[i, -1]), float(rep.sample_slopes[i]))
            for i in range(rep.distances.shape[0])]
    write_csv(os.path.join(out, "main-lemma.csv"), ["sample", "n", "dist", "slope"], rows)
    res = rep.summary()
    res["orbit"] = label
    res["n_tau"] = float(rep.times[-1]) if len(rep.times) else 0.0
    return res


COMMANDS = {
    "lyapunov": cmd_lyapunov,
    "drift": cmd_drift,
    "inversion-demo": cmd_inversion_demo,
    "classify-limit": cmd_classify_limit,
    "arithmeticity": cmd_arithmeticity,
    "equidist": cmd_equidist,
    "main-lemma": cmd_main_lemma,
}


def build_parser():
    ap = argparse.ArgumentParser(prog="kleinlab", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="key = value run configuration")
        p.add_argument("--seed", type=int, help="root seed (u64)")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--preset", choices=PRESETS)
        p.add_argument("--presentation", help="presentation file")
        p.add_argument("--catalogue", help="orbit catalogue file")
        p.add_argument("--target", help="identity, conjugate, trivial, exact or p-adic:<p>")
        p.add_argument("--tau", type=float)
        p.add_argument("--n", type=int)
        p.add_argument("--samples", type=int)
    return ap


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ValidationError("--seed must be an unsigned 64-bit integer")
        values = load_config(args.config) if args.config else {}
        flags = {k: getattr(args, k) for k in ("seed", "preset", "presentation", "catalogue", "target",
                                                "tau", "n", "samples")}
        values.update({k: v for k, v in flags.items() if v is not None})
        cfg, extras = split_config(values, DEFAULTS[args.command])
        extras.setdefault("preset", None)
        if extras["preset"] is not None and extras["preset"] not in PRESETS:
            raise ValidationError(f"unknown preset {extras['preset']!r}; choose from {list(PRESETS)}")
        inputs = [extras[k] for k in ("presentation", "catalogue") if extras.get(k)]
        man = RunManifest(args.command, args.config, inputs, cfg.seed, args.out)
        man.hash_inputs()
        os.makedirs(args.out, exist_ok=True)
        result = COMMANDS[args.command](cfg, extras, args.out)
        write_summary(os.path.join(args.out, "summary.json"), man, cfg, extras, result)
    except BudgetExceeded as exc:
        print(f"kleinlab: budget exceeded: {exc}", file=sys.stderr)
        return 3
    except (ValidationError, Unsupported) as exc:
        print(f"kleinlab: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"kleinlab: {exc}", file=sys.stderr)
        return 2
    except KleinlabError as exc:
        print(f"kleinlab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
