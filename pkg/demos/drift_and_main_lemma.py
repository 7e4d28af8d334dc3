"""Return-map cocycle over the frame flow of PSL2(Z[i]): drift rates and the main-lemma probe.

Run with `python3 demos/drift_and_main_lemma.py` (a few seconds).
"""
from kleinlab.circles import Circle
from kleinlab.cocycle import (DirichletDomain, EmbeddingTarget, ExperimentConfig, PlaceTarget, ReturnMap,
                              TrivialTarget, lyapunov_estimate)
from kleinlab.numberfield import conjugate_embedding, finite_places
from kleinlab.presets import bianchi_zi, circle_catalogue
from kleinlab.surfaces import circle_stabilizer, main_lemma_probe

pres = bianchi_zi()
dom = DirichletDomain.build(pres)
print(dom, "validates:", dom.validate(n_points=500, seed=0))

cfg = ExperimentConfig(n=400, samples=100, seed=0)
# over Q(i) the second embedding is complex conjugation, an isometry, so it drifts like the first
targets = {
    "identity embedding": ReturnMap(dom),
    "conjugate embedding": ReturnMap(dom, EmbeddingTarget(conjugate_embedding(pres.field))),
    "trivial": ReturnMap(dom, TrivialTarget()),
    "5-adic place": ReturnMap(dom, PlaceTarget(finite_places(pres.field, 5)[0])),
}
slopes = {}
for name, rm in targets.items():
    rep = lyapunov_estimate(rm, cfg)
    slopes[name] = rep.slope
    print(f"{name:20s} slope {rep.slope:.4f}  CI [{rep.ci[0]:.4f}, {rep.ci[1]:.4f}]  K = {rep.trivial_bound:.2f}")

# Integral targets see bounded cocycles. The identity embedding drifts at unit speed,
# so along a closed surface orbit most chains should clear a third of that rate.
orbit = circle_stabilizer(Circle(*dict(circle_catalogue(pres))["|z|^2=2"]), pres, 6, label="|z|^2=2")
print("stabilizer of |z|^2 = 2:", len(orbit.elements), "elements, systole", round(orbit.systole, 3))
rep = main_lemma_probe(orbit, targets["identity embedding"], ExperimentConfig(tau=4.0, n=50, samples=300, seed=0),
                       lambda1=slopes["identity embedding"])
for lam, frac in rep.fractions.items():
    print(f"  {lam:>12s}: {frac}")
