"""Cutting-and-stacking towers with exact rational measure bookkeeping.

A construction is a first-level height h_1 plus, per stage, a cut count r_j
and spacer counts s_j(1..r_j).  Heights follow h_{j+1} = h_j r_j + sum s_j(i)
and the base interval shrinks by 1/r_j, so the total measure
mu(X_{j+1}) = mu(X_j) + sum_i s_j(i) mu(E_{j+1}) grows without bound when the
spacer series diverges.
"""

from fractions import Fraction

from sidonlab import (
    ConstructionSpec,
    LevelSet,
    PointState,
    StageParams,
    Tower,
    measure_growth,
)

spec = ConstructionSpec(1, (StageParams(2, (0, 1)), StageParams(3, (0, 6, 15))))
tower = Tower(spec, depth=3)

print("stage table")
for j in (1, 2, 3):
    st = tower.stage(j)
    print(f"  j={j}: h={st.h:3d}  mu(E_j)={st.base_measure}  "
          f"mu(X_j)={st.tower_measure}  offsets={st.offsets}")

_, partials = measure_growth(spec, 3)
print("divergence partial sums:", partials)

# Points are (stage, level, offset-within-base); the map T climbs the tower.
p = PointState(2, 0, Fraction(1, 10))
print("\norbit of", p)
for _ in range(4):
    p = tower.step(p)
    print("  ->", p, "=", tower.point_to_stage(p, 3))

# Level sets support exact lifting and measure queries across stages.
x2 = LevelSet.from_ranges(2, [(0, 3)])
print("\nmu(X_2) =", tower.set_measure(x2),
      "; lifted to stage 3:", tower.lift(x2, 3).ranges)
