"""Dissipative companion map S = P * cyclic sub-block rotation, homoclinicity
defect enclosures, and the skew-product flow conjugation defect.

The space splits into "new blocks": the stage-1 levels first, then each
stage's spacer levels in ascending level order.  Each block D_k is cut into
s_k equal sub-blocks; the rotation sends sub-block i to i+1 (mod s_k), and
whenever a point lands in the first sub-block B_k^1 the dissipative part P
translates it by delta along a signed concatenation coordinate over the
union of the B_k^1 (even k on the positive axis, odd k on the negative).
"""

from __future__ import annotations

import bisect
import math
import random
from dataclasses import dataclass
from fractions import Fraction

from .construction import LevelSet, NeedsMoreStages, PointState, Tower
from .correlation import _resolving_stage
from .enclosure import MeasureEnclosure


class NeedsMoreBlocks(RuntimeError):
    """The orbit left the enumerated portion of the block space."""


# ---------------------------------------------------------------------------
# new-block enumeration and the sub-block count schedule


@dataclass(frozen=True)
class NewBlock:
    k: int
    birth_stage: int
    level: int
    measure: Fraction
    parts: int


def stage_new_ranges(tower: Tower, b: int) -> tuple[tuple[int, int], ...]:
    """Level ranges born at stage b: all of stage 1, else the complement of
    the column-copy levels."""
    st = tower.stage(b)
    if b == 1:
        return ((0, st.h),)
    prev = tower.stage(b - 1)
    ranges = []
    cursor = 0
    for o in prev.offsets:
        if o > cursor:
            ranges.append((cursor, o))
        cursor = o + prev.h
    if cursor < st.h:
        ranges.append((cursor, st.h))
    return tuple(ranges)


def s_schedule(tower: Tower, depth: int | None = None):
    """Per-stage sub-block count c_j = max(2, ceil(new mass at stage j)),
    assigned to every block born at stage j.  Returns (parts dict, ledger
    rows with the divergence partial sums of sum mu(D_k)/s_k)."""
    depth = depth or tower.depth
    parts: dict[int, int] = {}
    rows = []
    partial = Fraction(0)
    for b in range(1, depth + 1):
        ranges = stage_new_ranges(tower, b)
        n_b = sum(e - a for a, e in ranges)
        mass = n_b * tower.stage(b).base_measure
        c = max(2, math.ceil(mass))
        parts[b] = c
        partial += mass / c
        rows.append(
            {
                "stage": b,
                "new_levels": n_b,
                "new_mass": mass,
                "c": c,
                "contribution": mass / c,
                "partial_sum": partial,
            }
        )
    return parts, rows


def enumerate_new_blocks(tower: Tower, depth: int | None = None, limit: int | None = None):
    """Blocks in construction order; total mass equals mu(X_depth)."""
    depth = depth or tower.depth
    parts, _ = s_schedule(tower, depth)
    blocks = []
    k = 0
    for b in range(1, depth + 1):
        mu = tower.stage(b).base_measure
        for a, e in stage_new_ranges(tower, b):
            for lvl in range(a, e):
                blocks.append(NewBlock(k, b, lvl, mu, parts[b]))
                k += 1
                if limit is not None and k >= limit:
                    return blocks
    return blocks


# ---------------------------------------------------------------------------
# the dissipative map


@dataclass
class _StageIndex:
    b: int
    ranges: tuple[tuple[int, int], ...]
    starts: list[int]
    cum: list[int]  # cumulative level counts per range
    n: int
    c: int
    w: Fraction
    K: int  # first global block index of this stage
    first_even: int
    first_odd: int
    n_even: int
    n_odd: int
    pos_base: Fraction
    neg_base: Fraction

    def rank(self, level: int) -> int:
        i = bisect.bisect_right(self.starts, level) - 1
        a, e = self.ranges[i]
        if not a <= level < e:
            raise ValueError(f"level {level} is not a new-block level of stage {self.b}")
        return self.cum[i] + (level - a)

    def select(self, ordinal: int) -> int:
        i = bisect.bisect_right(self.cum, ordinal) - 1
        return self.ranges[i][0] + (ordinal - self.cum[i])


class DissipativeMap:
    """S = P * S~ on the enumerated blocks of the tower."""

    def __init__(self, tower: Tower, depth: int | None = None):
        self.tower = tower
        self.depth = depth or tower.depth
        self.parts, self.schedule = s_schedule(tower, self.depth)
        self.stages: dict[int, _StageIndex] = {}
        K = 0
        pos = Fraction(0)
        neg = Fraction(0)
        for b in range(1, self.depth + 1):
            ranges = stage_new_ranges(tower, b)
            counts = [e - a for a, e in ranges]
            n_b = sum(counts)
            cum = [0]
            for cnt in counts:
                cum.append(cum[-1] + cnt)
            c = self.parts[b]
            w = tower.stage(b).base_measure / c
            first_even = K if K % 2 == 0 else K + 1
            first_odd = K if K % 2 == 1 else K + 1
            n_even = (n_b + (K % 2 == 0)) // 2
            n_odd = n_b - n_even
            self.stages[b] = _StageIndex(
                b, ranges, [a for a, _ in ranges], cum[:-1], n_b, c, w,
                K, first_even, first_odd, n_even, n_odd, pos, neg,
            )
            K += n_b
            pos += n_even * w
            neg += n_odd * w
        self.total_blocks = K
        self.M_pos = pos
        self.M_neg = neg
        self.delta = self.stages[1].w
        # contiguous coordinate bands over [-M_neg, M_pos)
        self.bands = []  # (lo, hi, stage)
        for b in range(self.depth, 0, -1):
            si = self.stages[b]
            if si.n_odd:
                self.bands.append(
                    (-(si.neg_base + si.n_odd * si.w), -si.neg_base, b)
                )
        for b in range(1, self.depth + 1):
            si = self.stages[b]
            if si.n_even:
                self.bands.append(
                    (si.pos_base, si.pos_base + si.n_even * si.w, b)
                )
        self._band_los = [lo for lo, _, _ in self.bands]

    # -- block/coordinate bookkeeping -----------------------------------

    def block_of(self, stage: int, level: int) -> int:
        si = self.stages[stage]
        return si.K + si.rank(level)

    def block_stage(self, k: int) -> _StageIndex:
        for b in range(1, self.depth + 1):
            si = self.stages[b]
            if si.K <= k < si.K + si.n:
                return si
        raise NeedsMoreBlocks(f"block {k} beyond enumerated depth {self.depth}")

    def block_level(self, k: int) -> tuple[int, int]:
        si = self.block_stage(k)
        return si.b, si.select(k - si.K)

    def b1_start(self, k: int) -> Fraction:
        si = self.block_stage(k)
        if k % 2 == 0:
            e = (k - si.first_even) // 2
            return si.pos_base + e * si.w
        o = (k - si.first_odd) // 2
        return -(si.neg_base + (o + 1) * si.w)

    def _band_at(self, x: Fraction) -> tuple[Fraction, Fraction, int]:
        i = bisect.bisect_right(self._band_los, x) - 1
        if i < 0 or x >= self.bands[i][1]:
            raise NeedsMoreBlocks(
                f"coordinate {x} outside the enumerated range "
                f"[{-self.M_neg}, {self.M_pos})"
            )
        return self.bands[i]

    def locate(self, x: Fraction) -> tuple[int, Fraction]:
        """Coordinate -> (block, offset within its first sub-block)."""
        lo_band, _, b = self._band_at(x)
        si = self.stages[b]
        if x >= 0:
            q, r = divmod(x - si.pos_base, si.w)
            return si.first_even + 2 * int(q), r
        q, r = divmod(-x - si.neg_base, si.w)
        if r == 0:
            return si.first_odd + 2 * (int(q) - 1), Fraction(0)
        return si.first_odd + 2 * int(q), si.w - r

    # -- pointwise action -------------------------------------------------

    def apply(self, p: PointState, inverse: bool = False) -> PointState:
        p = self.tower.normalize_point(p)
        if p.stage > self.depth:
            raise NeedsMoreBlocks(
                f"point born at stage {p.stage} beyond enumerated depth {self.depth}"
            )
        si = self.stages[p.stage]
        k = si.K + si.rank(p.level)
        i, uo = divmod(p.offset, si.w)
        i = int(i)
        if not inverse:
            i2 = (i + 1) % si.c
            if i2 != 0:
                return PointState(p.stage, p.level, i2 * si.w + uo)
            x2 = self.b1_start(k) + uo + self.delta
            k2, off2 = self.locate(x2)
            b2, lvl2 = self.block_level(k2)
            return PointState(b2, lvl2, off2)
        if i != 0:
            return PointState(p.stage, p.level, (i - 1) * si.w + uo)
        x2 = self.b1_start(k) + uo - self.delta
        k2, off2 = self.locate(x2)
        si2 = self.block_stage(k2)
        b2, lvl2 = self.block_level(k2)
        return PointState(b2, lvl2, (si2.c - 1) * si2.w + off2)

    # -- set action on (band, footprint interval, phase) pieces -----------

    def _split_interval(self, lo: Fraction, hi: Fraction):
        out = []
        x = lo
        while x < hi:
            blo, bhi, b = self._band_at(x)
            e = min(hi, bhi)
            out.append((b, x, e))
            x = e
        return out

    def step_pieces(self, pieces, inverse: bool = False):
        """One application of S to pieces (stage, coord lo, coord hi, phase);
        a piece is the set of points with first-sub-block coordinate in
        [lo, hi) sitting in sub-block `phase` of their block."""
        out = []
        for b, lo, hi, phase in pieces:
            c = self.stages[b].c
            if not inverse:
                if phase < c - 1:
                    out.append((b, lo, hi, phase + 1))
                else:
                    for b2, l2, h2 in self._split_interval(lo + self.delta, hi + self.delta):
                        out.append((b2, l2, h2, 0))
            else:
                if phase > 0:
                    out.append((b, lo, hi, phase - 1))
                else:
                    for b2, l2, h2 in self._split_interval(lo - self.delta, hi - self.delta):
                        out.append((b2, l2, h2, self.stages[b2].c - 1))
        return out


def wandering_check(dmap: DissipativeMap, zmax: int) -> dict:
    """Exact disjointness of S^z Y for |z| <= zmax, with Y the first
    sub-block of block 0 (coordinate interval [0, delta))."""
    start = [(1, Fraction(0), dmap.delta, 0)]
    layers = {0: start}
    fwd = start
    back = start
    for z in range(1, zmax + 1):
        fwd = dmap.step_pieces(fwd)
        layers[z] = fwd
        back = dmap.step_pieces(back, inverse=True)
        layers[-z] = back
    tagged = []
    for z, pieces in layers.items():
        for b, lo, hi, phase in pieces:
            tagged.append((phase, lo, hi, z))
    tagged.sort(key=lambda t: (t[0], t[1]))
    disjoint = True
    clash = None
    for a, bb in zip(tagged, tagged[1:]):
        if a[0] == bb[0] and bb[1] < a[2]:
            disjoint = False
            clash = (a, bb)
            break
    covered = sum(hi - lo for pieces in layers.values() for _, lo, hi, _ in pieces)
    total = sum(
        dmap.stages[b].n * dmap.tower.stage(b).base_measure
        for b in range(1, dmap.depth + 1)
    )
    return {
        "passed": disjoint,
        "clash": clash,
        "pieces": sum(len(p) for p in layers.values()),
        "covered_mass": covered,
        "covered_fraction": covered / total,
        "zmax": zmax,
    }


def retention_audit(dmap: DissipativeMap, piece_samples_per_stage: int = 3):
    """mu(S D_k intersect D_k)/mu(D_k) >= 1 - 1/s_k for every enumerated
    block.  The retention is the same closed form for all blocks of a stage
    ((c-1)w + the part of the translated first sub-block that re-enters);
    a sample of blocks per stage is re-verified with the piece machinery."""
    rows = []
    for b in range(1, dmap.depth + 1):
        si = dmap.stages[b]
        if si.n == 0:
            continue
        mu = dmap.tower.stage(b).base_measure
        retained = (si.c - 1) * si.w + max(Fraction(0), si.w - dmap.delta)
        row = {
            "stage": b,
            "blocks": si.n,
            "parts": si.c,
            "retention": retained / mu,
            "bound": 1 - Fraction(1, si.c),
            "ok": retained / mu >= 1 - Fraction(1, si.c),
            "piece_verified": 0,
        }
        # independent audit: push a whole block through S piece by piece
        for k in range(si.K, min(si.K + piece_samples_per_stage, si.K + si.n)):
            lo = dmap.b1_start(k)
            pieces = [(b, lo, lo + si.w, i) for i in range(si.c)]
            try:
                img = dmap.step_pieces(pieces)
            except NeedsMoreBlocks:
                continue
            back_in = sum(
                max(Fraction(0), min(h2, lo + si.w) - max(l2, lo))
                for b2, l2, h2, ph in img
                if b2 == b and ph == 0
            )
            stay = sum(h2 - l2 for b2, l2, h2, ph in img if ph > 0 and l2 == lo)
            if (stay + back_in) / mu != row["retention"]:
                row["ok"] = False
            row["piece_verified"] += 1
        rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# Lemma-style homoclinicity defect


def _descend(tower: Tower, J: int, level: int):
    """Birth stage, birth level and sub-offset of a stage-J level: the level
    occupies [u, u + mu(E_J)) of its birth block's offset coordinate."""
    u = Fraction(0)
    b, lvl = J, level
    while b > 1:
        prev = tower.stage(b - 1)
        offs = prev.offsets
        i = bisect.bisect_right(offs, lvl) - 1
        if i < 0 or not offs[i] <= lvl < offs[i] + prev.h:
            break
        u += i * tower.stage(b).base_measure
        lvl -= offs[i]
        b -= 1
    return b, lvl, u


def _merged_length(intervals):
    intervals.sort()
    total = Fraction(0)
    cur_lo = cur_hi = None
    for lo, hi in intervals:
        if cur_hi is None or lo > cur_hi:
            if cur_hi is not None:
                total += cur_hi - cur_lo
            cur_lo, cur_hi = lo, hi
        else:
            cur_hi = max(cur_hi, hi)
    if cur_hi is not None:
        total += cur_hi - cur_lo
    return total


def lemma61_defect(
    tower: Tower,
    j: int,
    k: int,
    n: int,
    epsilon: Fraction | None = None,
    parts: dict[int, int] | None = None,
):
    """Enclosure of the conditional defect 1 - mu(S T^{n+k} E_j | T^{n+k} E_j).

    The image level set is resolved with escape enclosures, then each level
    is classified by birth block: levels tiling a full new block born after
    stage j contribute at most 2/s(D) of the block (one sub-block leaves
    under P, one enters); levels inside copies of X_j, partial-block slices
    and escaped residual count wholly as slack."""
    st_j = tower.stage(j)
    if not 0 <= k <= st_j.h:
        raise ValueError(f"k={k} outside [0, {st_j.h}]")
    h_next = tower.stage(j + 1).h
    if not st_j.h <= n <= h_next:
        raise ValueError(f"n={n} outside [{st_j.h}, {h_next}]")
    t = n + k
    mu_total = st_j.base_measure
    if epsilon is None:
        epsilon = mu_total / 1000
    if parts is None:
        parts, _ = s_schedule(tower)
    E = LevelSet.from_ranges(j, [(0, 1)])
    J = _resolving_stage(tower, j, t)
    esc = tower.lift(E, J)
    resolved = []  # (stage, image LevelSet)
    residual = Fraction(0)
    while True:
        st = tower.stage(J)
        inside = esc.clip(0, st.h - t)
        if not inside.is_empty():
            resolved.append((J, inside.shift(t)))
        out = esc.clip(st.h - t, st.h)
        residual = out.count() * st.base_measure
        if residual == 0 or residual <= epsilon or J == tower.depth:
            break
        esc = tower.lift(out, J + 1)
        J += 1
    groups: dict[tuple[int, int], list] = {}
    copy_slack = Fraction(0)
    for J2, ls in resolved:
        width = tower.stage(J2).base_measure
        for a, e in ls.ranges:
            for lvl in range(a, e):
                b, l0, u = _descend(tower, J2, lvl)
                if b <= j:
                    copy_slack += width
                else:
                    groups.setdefault((b, l0), []).append((u, u + width))
    full_defect = Fraction(0)
    partial_slack = Fraction(0)
    full_blocks = 0
    for (b, l0), ivs in groups.items():
        mu_b = tower.stage(b).base_measure
        covered = _merged_length(ivs)
        if covered == mu_b:
            full_blocks += 1
            full_defect += min(mu_b, 2 * mu_b / parts[b])
        else:
            partial_slack += covered
    hi = min(
        Fraction(1),
        (full_defect + copy_slack + partial_slack + residual) / mu_total,
    )
    info = {
        "pieces": resolved,
        "residual": residual,
        "full_blocks": full_blocks,
        "full_defect": full_defect,
        "copy_slack": copy_slack,
        "partial_slack": partial_slack,
    }
    return MeasureEnclosure(Fraction(0), hi), info


def mc_defect(
    tower: Tower,
    dmap: DissipativeMap,
    j: int,
    k: int,
    n: int,
    samples: int,
    seed: int,
):
    """Monte-Carlo oracle: frequency of points of T^{n+k} E_j whose S-image
    leaves the resolved part of the set."""
    enc, info = lemma61_defect(tower, j, k, n, parts=dmap.parts)
    E = LevelSet.from_ranges(j, [(0, 1)])
    rng = random.Random(seed)
    left = 0
    skipped = 0
    for _ in range(samples):
        p = tower.sample_uniform(E, rng)
        q = tower.iterate(p, n + k)
        try:
            q2 = dmap.apply(q)
        except NeedsMoreBlocks:
            skipped += 1
            continue
        if not any(tower.membership(q2, ls) for _, ls in info["pieces"]):
            left += 1
    done = samples - skipped
    f = left / done if done else 0.0
    err = math.sqrt(max(f * (1 - f), 1.0 / max(done, 1)) / max(done, 1))
    return f, err, enc, skipped


def homoclinic_sweep(
    tower: Tower,
    j_range,
    samples_per_stage: int,
    seed: int = 0,
    epsilon: Fraction | None = None,
    parts: dict[int, int] | None = None,
):
    """Defect enclosures over sampled (k, n) per stage, stage boundary
    n = h_j always included.  Returns (rows, per-stage max hi)."""
    if parts is None:
        parts, _ = s_schedule(tower)
    rng = random.Random(seed)
    rows = []
    stage_max: dict[int, Fraction] = {}
    for j in j_range:
        h_j = tower.stage(j).h
        h_next = tower.stage(j + 1).h
        pairs = [(0, h_j), (0, h_next)]
        while len(pairs) < max(2, samples_per_stage):
            pairs.append((rng.randint(0, h_j), rng.randint(h_j, h_next)))
        for kk, nn in pairs:
            enc, info = lemma61_defect(tower, j, kk, nn, epsilon=epsilon, parts=parts)
            rows.append(
                {
                    "j": j,
                    "k": kk,
                    "n": nn,
                    "defect_lo": enc.lo,
                    "defect_hi": enc.hi,
                    "slack": info["copy_slack"] + info["partial_slack"] + info["residual"],
                }
            )
            stage_max[j] = max(stage_max.get(j, Fraction(0)), enc.hi)
    return rows, stage_max


# ---------------------------------------------------------------------------
# skew-product flow conjugation defect


PHI_CATALOG = {
    "reciprocal": lambda y: 1.0 / (1.0 + y),
    "exp": lambda y: math.exp(-y),
}


@dataclass(frozen=True)
class FlowParams:
    phi: str
    t: float
    rect: tuple[float, float, float, float] = (0.0, 1.0, 0.0, 1.0)

    def phi_fn(self):
        try:
            fn = PHI_CATALOG[self.phi]
        except KeyError:
            raise ValueError(
                f"unknown phi {self.phi!r}; catalog: {sorted(PHI_CATALOG)}"
            ) from None
        grid = [0.0, 0.5, 1.0, 2.0, 5.0, 10.0, 100.0]
        vals = [fn(y) for y in grid]
        if any(v <= 0 for v in vals) or any(
            v2 > v1 + 1e-12 for v1, v2 in zip(vals, vals[1:])
        ):
            raise ValueError(f"phi {self.phi!r} must be positive and nonincreasing")
        return fn


def _coordinate(tower: Tower, p: PointState, J: int) -> float:
    q = tower.point_to_stage(p, J)
    return float(q.level * tower.stage(J).base_measure + q.offset)


def flow_defect(
    tower: Tower,
    params: FlowParams,
    n: int,
    samples: int,
    seed: int,
) -> tuple[float, float]:
    """MC estimate of || chi_R - chi_R o (T^{-n} S^t T^n) ||_2 for the
    rectangle R, where the conjugated flow moves x by phi(coord(T^n y)) * t.
    Returns (estimate, stderr)."""
    a, b, c, d = (Fraction(str(v)) for v in params.rect)
    if not (a < b and c < d):
        raise ValueError("rectangle must have positive area")
    if params.t == 0:
        return 0.0, 0.0
    phi = params.phi_fn()
    # embed and evaluate in the same concatenation coordinate: the deepest
    # built stage, so coord(R^0 y) = y exactly
    J = tower.depth
    if tower.stage(J).tower_measure < d:
        raise NeedsMoreStages(
            f"tower measure {tower.stage(J).tower_measure} < {d}",
            required_depth=J + 1,
        )
    base = tower.stage(J).base_measure
    rng = random.Random(seed)
    grid = 1 << 40
    out = 0
    fa, fb = float(a), float(b)
    for _ in range(samples):
        y = c + (d - c) * Fraction(rng.randrange(grid), grid)
        lvl, off = divmod(y, base)
        p = PointState(J, int(lvl), off)
        q = tower.iterate(p, n) if n else p
        y2 = _coordinate(tower, q, J)
        x2 = fa + (fb - fa) * rng.random() + phi(y2) * params.t
        if not fa <= x2 <= fb:
            out += 1
    p_hat = out / samples
    area = float((b - a) * (d - c))
    defect = math.sqrt(2.0 * area * p_hat)
    sigma_p = math.sqrt(max(p_hat * (1.0 - p_hat), 1.0 / samples) / samples)
    stderr = area * sigma_p / defect if defect > 0 else math.sqrt(2.0 * area * sigma_p)
    return defect, stderr
