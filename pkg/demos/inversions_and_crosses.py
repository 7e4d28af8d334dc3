"""Boundary geometry: inversions from linked pairs, and graphs degenerating to crosses.

Run with `python3 demos/inversions_and_crosses.py`.
"""
import numpy as np

from kleinlab.circles import Circle, LinkedPair, inversion_as_moebius, pencil_inversion, random_linked_pairs
from kleinlab.crosses import GraphSet, canonical_sequences, classify_limit, sampled_hausdorff
from kleinlab.moebius import ProjPoint

inf = ProjPoint(1.0 + 0j, 0j)
unit = Circle.from_center_radius(0, 1)

# A pair (xi, xi') separated by the unit circle picks out an involution of it.
# With xi = i/2 and xi' = inf the point i goes to -i.
pair = LinkedPair(ProjPoint(0.5j, 1.0 + 0j), inf, unit)
q = pencil_inversion(pair, ProjPoint(1j, 1.0 + 0j))
print("iota(i) =", np.round(complex(q.affine()), 12))
print("as a matrix:\n", np.round(inversion_as_moebius(pair).as_array(), 6))

# Random linked pairs: every inversion squares to the identity and has trace zero.
worst = 0.0
for pr, p in random_linked_pairs(200, seed=1):
    back = pencil_inversion(pr, pencil_inversion(pr, p))
    worst = max(worst, abs(complex(back.affine()) - complex(p.affine())))
print(f"max |iota^2(p) - p| over 200 pairs: {worst:.1e}")

# Graphs of g_i in P x P: bounded sequences stay graphs, others collapse.
for name, seq in canonical_sequences(21).items():
    lim = classify_limit(seq)
    hd = [sampled_hausdorff(GraphSet(seq[i]), lim.limit_set(), 2000, 0) for i in (2, 8, 20)]
    print(f"{name:12s} -> {type(lim).__name__:13s} Hausdorff at i=2, 8, 20:", np.round(hd, 4))
