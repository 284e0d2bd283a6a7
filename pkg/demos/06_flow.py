"""Skew-product flow conjugation defect.

Over the plane with a speed function phi(y), the flow R^t moves x by
phi(y) t.  Conjugating by T^n (pushing the y-coordinate n steps up the
tower before evaluating phi) changes indicator functions of rectangles by
an L2 defect that the Monte-Carlo harness estimates; the defect shrinks as
n grows because deep shifts push mass toward large y where phi is small.
"""

import math

from sidonlab import ConstructionSpec, FlowParams, Tower, flow_defect, singer_set
from sidonlab.sidon import optimal_stage_params

h = 1
stages = []
for q in (3, 4, 5, 7, 8):
    s = singer_set(q)
    stages.append(optimal_stage_params(h, s))
    h *= s.elements[-1] - s.elements[0]
tower = Tower(ConstructionSpec(1, tuple(stages)), depth=6)

params = FlowParams("reciprocal", 1.0)  # phi(y) = 1/(1+y), unit square
print("closed form at n=0: sqrt(2 ln 2) =", round(math.sqrt(2 * math.log(2)), 4))
for n in (0, 7, 77, 1463):
    d, e = flow_defect(tower, params, n, 40_000, seed=n)
    print(f"  n={n:5d}: defect {d:.4f} +- {e:.4f}")

print("\nexp speed, t = 0.5:")
for n in (0, 77):
    d, e = flow_defect(tower, FlowParams("exp", 0.5), n, 40_000, seed=n)
    print(f"  n={n:5d}: defect {d:.4f} +- {e:.4f}")
