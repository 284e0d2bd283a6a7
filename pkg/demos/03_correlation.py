"""Exact correlation enclosures mu(A intersect T^m B) and the Sidon bound.

Intersection measures are computed by lifting both sets to a stage tall
enough to absorb the shift; orbits that escape past the built depth
contribute certified interval slack instead of silently vanishing.
"""

import random
from fractions import Fraction

from sidonlab import LevelSet, Tower, mc_correlation, pair_enclosure, singer_set
from sidonlab.correlation import sidon_bound_report
from sidonlab.sidon import optimal_stage_params
from sidonlab.construction import ConstructionSpec

h = 1
stages = []
for q in (3, 4, 5, 7, 8):
    s = singer_set(q)
    stages.append(optimal_stage_params(h, s))
    h *= s.elements[-1] - s.elements[0]
tower = Tower(ConstructionSpec(1, tuple(stages)), depth=6)
print("heights:", [tower.stage(j).h for j in range(1, 7)])

a = LevelSet.from_levels(2, [0])
print(f"\nmu(A) = {tower.set_measure(a)}  (one stage-2 level)")
for m in (7, 14, 35, 100):
    enc = pair_enclosure(a, a, m, tower)
    est, err = mc_correlation(a, a, m, 3000, m, tower)
    print(f"  m={m:3d}: [{enc.lo}, {enc.hi}]  MC {est:.4f} +- {err:.4f}")

# One-column Sidon bound mu(A cap T^m A) <= mu(A)/r_j over a stage interval.
rows = sidon_bound_report(tower, a, a, [2], 40, exhaustive_limit=100)
fails = [r for r in rows if not r["passed"]]
print(f"\nstage-2 interval: {len(rows)} sampled shifts, "
      f"{len(fails)} exceed the plain bound mu(A)/r_2 = {rows[0]['bound']}")
for r in fails:
    print(f"  m={r['m']}: exact measure {r['lo']} "
          f"(wrap sliver; corrected bound {r['corrected_bound']} holds)")
