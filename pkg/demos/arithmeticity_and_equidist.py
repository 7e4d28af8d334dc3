"""Arithmeticity verdicts and cusp-height equidistribution of closed surface orbits.

Run with `python3 demos/arithmeticity_and_equidist.py`.
"""
from kleinlab.arithmeticity import arithmeticity_test
from kleinlab.circles import Circle
from kleinlab.cocycle import DirichletDomain, ExperimentConfig
from kleinlab.presets import bianchi_zi, presentation, circle_catalogue
from kleinlab.surfaces import HeightWindow, circle_stabilizer, equidistribution_probe

for name in ("bianchi-zi", "bianchi-zw", "nonintegral", "sqrt2-bounded", "sqrt2-unbounded"):
    pres = presentation(name)
    v = arithmeticity_test(pres, 5)
    w = getattr(v, "witness", None)
    extra = f"  witness {w.kind} at {w.place}, word {w.word_label}, trace {w.trace}" if w else ""
    print(f"{name:16s} {v.verdict}{extra}")

# Samples from three closed orbits against the Haar mass of {height < 1}.
pres = bianchi_zi()
dom = DirichletDomain.build(pres)
orbits = [circle_stabilizer(Circle(*abc), pres, 6, label=lab) for lab, abc in circle_catalogue(pres)[:3]]
rep = equidistribution_probe(orbits, HeightWindow(0.0, 1.0), ExperimentConfig(samples=3000, seed=0), dom)
print(f"volume fraction {rep.volume_fraction:.4f}")
for lab, f, e, s, sys_ in zip(rep.labels, rep.fractions, rep.errors, rep.stderr, rep.systoles):
    print(f"  {lab:10s} fraction {f:.3f}  error {e:.3f} +- {s:.3f}  systole {sys_:.2f}")
print("errors non-increasing within noise:", rep.nonincreasing)
