"""Poisson-suspension cylinder probabilities and mixing reports.

Suspension correlations are computed analytically from intersection
measures of the underlying sets (with interval slack propagated), rather
than by simulating the suspension directly; Monte-Carlo configuration
sampling is kept as an independent oracle.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from fractions import Fraction
from itertools import product

from .construction import LevelSet, NeedsMoreStages, Tower
from .correlation import pair_enclosure, triple_enclosure
from .enclosure import MeasureEnclosure


@dataclass(frozen=True)
class CountEvent:
    """{configurations with exactly `count` points in `set`}, optionally
    pushed by the shift: the event is about T^shift(set)."""

    set: LevelSet
    count: int
    shift: int = 0

    def __post_init__(self):
        if self.count < 0:
            raise ValueError("count must be >= 0")


@dataclass(frozen=True)
class ExactProb:
    """coeff * exp(-rate) with exact rational coeff and rate."""

    coeff: Fraction
    rate: Fraction

    def value(self) -> float:
        return float(self.coeff) * math.exp(-float(self.rate))


@dataclass(frozen=True)
class ProbEnclosure:
    lo: float
    hi: float
    clamped: bool = False  # negative atom mass was clamped during propagation

    def contains(self, v: float) -> bool:
        return self.lo - 1e-15 <= v <= self.hi + 1e-15

    def width(self) -> float:
        return self.hi - self.lo


def poisson_pmf(mean: float, k: int) -> float:
    if mean == 0.0:
        return 1.0 if k == 0 else 0.0
    return math.exp(-mean + k * math.log(mean) - math.lgamma(k + 1))


def cylinder_prob(events: list[CountEvent], tower: Tower) -> ExactProb:
    """Product formula for pairwise disjoint sets (shifts must be 0)."""
    if any(e.shift != 0 for e in events):
        raise ValueError("cylinder_prob takes unshifted events; use joint_prob")
    top = max(e.set.stage for e in events)
    lifted = [tower.lift(e.set, top) for e in events]
    for i in range(len(lifted)):
        for k in range(i + 1, len(lifted)):
            if not lifted[i].intersect(lifted[k]).is_empty():
                raise ValueError(
                    f"events {i} and {k} overlap; use joint_prob for non-disjoint sets"
                )
    coeff = Fraction(1)
    rate = Fraction(0)
    for e in events:
        mu = tower.set_measure(e.set)
        rate += mu
        coeff *= mu**e.count / math.factorial(e.count)
    return ExactProb(coeff, rate)


def marginal_prob(event: CountEvent, tower: Tower) -> ExactProb:
    """P(count in T^shift A = n) = P(count in A = n) by measure preservation."""
    return ExactProb(
        tower.set_measure(event.set) ** event.count / math.factorial(event.count),
        tower.set_measure(event.set),
    )


def normalization_check(mu: Fraction, tol: float = 1e-12) -> tuple[float, int]:
    """Sum the count marginals until the explicit Poisson tail bound drops
    below tol; returns (partial sum, last count included)."""
    m = float(mu)
    total = 0.0
    a = 0
    while True:
        total += poisson_pmf(m, a)
        # tail bound: P(N > a) <= pmf(a) * m/(a+1) / (1 - m/(a+2)) once a+2 > m
        if a + 2 > m:
            ratio = m / (a + 1)
            tail = poisson_pmf(m, a) * ratio / max(1e-300, 1.0 - m / (a + 2))
            if tail < tol:
                return total, a
        a += 1
        if a > 10_000:
            return total, a


# ---------------------------------------------------------------------------
# joint probabilities via disjoint-atom decomposition


def _pair_joint(mu_a: float, mu_b: float, c: float, na: int, nb: int) -> float:
    a, b = mu_a - c, mu_b - c
    if a < 0 or b < 0 or c < 0:
        raise ValueError("negative atom mass")
    total = 0.0
    for k in range(0, min(na, nb) + 1):
        total += (
            poisson_pmf(c, k) * poisson_pmf(a, na - k) * poisson_pmf(b, nb - k)
        )
    return total


def _triple_joint(
    mu, pairs, t: float, counts: tuple[int, int, int]
) -> float:
    mu_a, mu_b, mu_c = mu
    cab, cac, cbc = pairs
    na, nb, nc = counts
    atoms = {
        "t": t,
        "ab": cab - t,
        "ac": cac - t,
        "bc": cbc - t,
        "a": mu_a - cab - cac + t,
        "b": mu_b - cab - cbc + t,
        "c": mu_c - cac - cbc + t,
    }
    if any(v < 0 for v in atoms.values()):
        raise ValueError("negative atom mass")
    total = 0.0
    for kt in range(0, min(na, nb, nc) + 1):
        for kab in range(0, min(na - kt, nb - kt) + 1):
            for kac in range(0, min(na - kt - kab, nc - kt) + 1):
                for kbc in range(0, min(nb - kt - kab, nc - kt - kac) + 1):
                    ka = na - kt - kab - kac
                    kb = nb - kt - kab - kbc
                    kc = nc - kt - kac - kbc
                    total += (
                        poisson_pmf(atoms["t"], kt)
                        * poisson_pmf(atoms["ab"], kab)
                        * poisson_pmf(atoms["ac"], kac)
                        * poisson_pmf(atoms["bc"], kbc)
                        * poisson_pmf(atoms["a"], ka)
                        * poisson_pmf(atoms["b"], kb)
                        * poisson_pmf(atoms["c"], kc)
                    )
    return total


def _interval_grid(enc: MeasureEnclosure, points: int = 3) -> list[float]:
    if enc.is_exact():
        return [float(enc.lo)]
    lo, hi = float(enc.lo), float(enc.hi)
    return [lo + (hi - lo) * i / (points - 1) for i in range(points)]


def overlap_enclosures(events: list[CountEvent], tower: Tower, epsilon=None, cache=None):
    """Pairwise (and for 3 events the triple) intersection enclosures of the
    shifted sets, reduced to nonnegative relative shifts."""
    evs = sorted(events, key=lambda e: e.shift)
    out_pairs = {}
    for i in range(len(evs)):
        for k in range(i + 1, len(evs)):
            lo_e, hi_e = evs[i], evs[k]
            m = hi_e.shift - lo_e.shift
            # mu(T^a A cap T^b B) = mu(A cap T^{b-a} B), b >= a
            out_pairs[(i, k)] = pair_enclosure(
                lo_e.set, hi_e.set, m, tower, epsilon=epsilon, cache=cache
            )
    triple = None
    if len(evs) == 3:
        m = evs[1].shift - evs[0].shift
        n = evs[2].shift - evs[1].shift
        triple = triple_enclosure(
            evs[0].set, evs[1].set, evs[2].set, m, n, tower, epsilon=epsilon, cache=cache
        )
    return evs, out_pairs, triple


def joint_prob(
    events: list[CountEvent],
    tower: Tower,
    epsilon: Fraction | None = None,
    cache: dict | None = None,
) -> ProbEnclosure:
    """Probability of the joint count event for up to three shifted sets.

    The shifted sets are decomposed into disjoint atoms using intersection
    enclosures; independent Poisson counts are convolved over the atoms,
    and enclosure slack is propagated by evaluating the probability over a
    grid of admissible overlap values."""
    if not 1 <= len(events) <= 3:
        raise ValueError("joint_prob supports 1..3 events")
    if len(events) == 1:
        v = marginal_prob(events[0], tower).value()
        return ProbEnclosure(v, v)
    evs, pairs, triple = overlap_enclosures(events, tower, epsilon=epsilon, cache=cache)
    mus = [float(tower.set_measure(e.set)) for e in evs]
    counts = tuple(e.count for e in evs)
    clamped = False
    values = []
    if len(evs) == 2:
        for c in _interval_grid(pairs[(0, 1)]):
            c2 = min(c, mus[0], mus[1])
            clamped |= c2 != c
            values.append(_pair_joint(mus[0], mus[1], c2, counts[0], counts[1]))
    else:
        grids = [
            _interval_grid(pairs[(0, 1)]),
            _interval_grid(pairs[(0, 2)]),
            _interval_grid(pairs[(1, 2)]),
            _interval_grid(triple),
        ]
        for cab, cac, cbc, t in product(*grids):
            t2 = min(t, cab, cac, cbc)
            # clamp to a consistent atom system
            vals = {
                "cab": min(cab, mus[0], mus[1]),
                "cac": min(cac, mus[0], mus[2]),
                "cbc": min(cbc, mus[1], mus[2]),
            }
            t2 = min(t2, vals["cab"], vals["cac"], vals["cbc"])
            try:
                v = _triple_joint(
                    tuple(mus), (vals["cab"], vals["cac"], vals["cbc"]), t2, counts
                )
            except ValueError:
                clamped = True
                continue
            clamped |= (vals["cab"], vals["cac"], vals["cbc"], t2) != (cab, cac, cbc, t)
            values.append(v)
    if not values:
        return ProbEnclosure(0.0, 1.0, clamped=True)
    return ProbEnclosure(min(values), max(values), clamped=clamped)


# ---------------------------------------------------------------------------
# sampling


def sample_poisson_count(mean: float, rng: random.Random) -> int:
    """Inversion sampling of a Poisson count; deterministic per rng state."""
    u = rng.random()
    k = 0
    acc = poisson_pmf(mean, 0)
    while u > acc and k < 10_000_000:
        k += 1
        acc += poisson_pmf(mean, k)
    return k


def sample_configuration(region: LevelSet, tower: Tower, rng: random.Random):
    """A Poisson configuration restricted to a finite-measure region:
    Poisson count, then i.i.d. uniform points."""
    if region.is_empty():
        return []
    mu = float(tower.set_measure(region))
    n = sample_poisson_count(mu, rng)
    return [tower.sample_uniform(region, rng) for _ in range(n)]


def shifted_level_set(A: LevelSet, n: int, tower: Tower) -> LevelSet:
    """Exact representation of T^n A (n >= 0) as a level set, at the first
    stage deep enough that no level escapes the top."""
    if n < 0:
        raise ValueError("only forward shifts are represented exactly")
    for J in range(A.stage, tower.depth + 1):
        lifted = tower.lift(A, J)
        if lifted.ranges and lifted.ranges[-1][1] + n <= tower.stage(J).h:
            return lifted.shift(n)
        if not lifted.ranges:
            return lifted
    raise NeedsMoreStages(
        f"cannot represent shift {n} of a stage-{A.stage} set at depth {tower.depth}",
        required_depth=tower.depth + 1,
    )


def mc_joint(events: list[CountEvent], samples: int, seed: int, tower: Tower):
    """Monte-Carlo oracle for joint_prob: sample Poisson configurations on
    the union of the shifted sets and count matching events."""
    base = min(e.shift for e in events)
    shifted = [shifted_level_set(e.set, e.shift - base, tower) for e in events]
    top = max(s.stage for s in shifted)
    shifted = [tower.lift(s, top) for s in shifted]
    region = shifted[0]
    for s in shifted[1:]:
        region = region.union(s)
    rng = random.Random(seed)
    hits = 0
    for _ in range(samples):
        pts = sample_configuration(region, tower, rng)
        counts = [0] * len(events)
        for p in pts:
            for i, s in enumerate(shifted):
                if s.contains(p.level):
                    counts[i] += 1
        if all(c == e.count for c, e in zip(counts, events)):
            hits += 1
    f = hits / samples
    return f, math.sqrt(max(f * (1 - f), 1.0 / samples) / samples)


# ---------------------------------------------------------------------------
# mixing reports


def _deviation_interval(joint: ProbEnclosure, prod: float) -> tuple[float, float]:
    if joint.lo <= prod <= joint.hi:
        lo = 0.0
    else:
        lo = min(abs(joint.lo - prod), abs(joint.hi - prod))
    hi = max(abs(joint.lo - prod), abs(joint.hi - prod))
    return lo, hi


def mixing_report(
    V: CountEvent,
    W: CountEvent,
    n_grid,
    tower: Tower,
    epsilon: Fraction | None = None,
    mc_samples: int = 0,
    seed: int = 0,
) -> list[dict]:
    """Rows of the suspension correlation P(V and T_*^{-n} W) against the
    product of marginals, per shift n."""
    rows = []
    cache: dict = {}
    prod = marginal_prob(V, tower).value() * marginal_prob(W, tower).value()
    for n in n_grid:
        evs = [CountEvent(V.set, V.count, n), CountEvent(W.set, W.count, 0)]
        joint = joint_prob(evs, tower, epsilon=epsilon, cache=cache)
        dev_lo, dev_hi = _deviation_interval(joint, prod)
        row = {
            "n": n,
            "joint_lo": joint.lo,
            "joint_hi": joint.hi,
            "product": prod,
            "dev_lo": dev_lo,
            "dev_hi": dev_hi,
        }
        if mc_samples:
            est, err = mc_joint(evs, mc_samples, seed + n, tower)
            row["mc"] = est
            row["mc_stderr"] = err
        rows.append(row)
    return rows


def triple_mixing_report(
    U: CountEvent,
    V: CountEvent,
    W: CountEvent,
    mn_grid,
    tower: Tower,
    epsilon: Fraction | None = None,
    mc_samples: int = 0,
    seed: int = 0,
) -> list[dict]:
    """Rows over an (m, n) grid of P(U and T_*^m V and T_*^{m+n} W) against
    the triple product of marginals."""
    rows = []
    cache: dict = {}
    prod = (
        marginal_prob(U, tower).value()
        * marginal_prob(V, tower).value()
        * marginal_prob(W, tower).value()
    )
    for m, n in mn_grid:
        evs = [
            CountEvent(U.set, U.count, 0),
            CountEvent(V.set, V.count, m),
            CountEvent(W.set, W.count, m + n),
        ]
        joint = joint_prob(evs, tower, epsilon=epsilon, cache=cache)
        dev_lo, dev_hi = _deviation_interval(joint, prod)
        row = {
            "m": m,
            "n": n,
            "joint_lo": joint.lo,
            "joint_hi": joint.hi,
            "product": prod,
            "dev_lo": dev_lo,
            "dev_hi": dev_hi,
            "exact_zero_dev": joint.lo == joint.hi == prod,
        }
        if mc_samples:
            est, err = mc_joint(evs, mc_samples, seed + 13 * m + n, tower)
            row["mc"] = est
            row["mc_stderr"] = err
        rows.append(row)
    return rows
