"""Sidon (B2) sets and psi-driven optimal stage parameters.

Spacers chosen along a Sidon set make distinct tower translates collide in
at most one column pair; Singer perfect difference sets give the densest
such sets, and a growth function psi with psi(h) >= sqrt(h_j) controls the
correlation decay envelope of the resulting construction.
"""

from fractions import Fraction

from sidonlab import (
    PsiSpec,
    Tower,
    build_from_psi,
    is_sidon,
    mian_chowla,
    optimal_stage_params,
    singer_set,
)

print("greedy (Mian-Chowla) B2 set:", mian_chowla(8).elements)
for q in (2, 3, 4, 5):
    s = singer_set(q)
    print(f"Singer q={q}: elements={s.elements} span={s.span} "
          f"sidon={is_sidon(s.elements)[0]}")

# Optimal stage parameters: spacers s_j(i) = h_j * (gap of the Sidon set).
s = singer_set(3)
p = optimal_stage_params(5, s)
print("\nstage params for h_j=5 along", s.elements, "->", p)

# Build a whole construction from psi(m) = (m+2)^(1/4).
psi = PsiSpec("power", alpha=Fraction(1, 4))
spec, ledger = build_from_psi(psi, 1, 4, "singer")
print("\npsi-spec ledger (psi(h_{j+1}) >= sqrt(h_j) at every stage):")
for row in ledger:
    print(f"  j={row['j']}: h_j={row['h_j']:5d} r_j={row['r_j']:3d} "
          f"q={row['q']:3d} h_next={row['h_next']:5d} ok={row['sqrt_ineq_ok']}")
print("heights:", [Tower(spec, depth=4).stage(j).h for j in range(1, 5)])
