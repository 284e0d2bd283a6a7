import random
from fractions import Fraction

import pytest

from sidonlab import (
    DissipativeMap,
    FlowParams,
    LevelSet,
    NeedsMoreBlocks,
    Tower,
    enumerate_new_blocks,
    flow_defect,
    homoclinic_sweep,
    lemma61_defect,
    retention_audit,
    s_schedule,
    wandering_check,
)
from sidonlab.homoclinic import mc_defect, stage_new_ranges


@pytest.fixture(scope="module")
def dmap(demo_tower):
    return DissipativeMap(demo_tower)


@pytest.fixture(scope="module")
def running_dmap(running_tower):
    return DissipativeMap(running_tower)


class TestBlocks:
    def test_new_ranges(self, running_tower):
        assert stage_new_ranges(running_tower, 1) == ((0, 1),)
        # stage 2: copies cover [0,1) and [1,2); spacer level 2 is new
        assert stage_new_ranges(running_tower, 2) == ((2, 3),)
        # stage 3: copies at offsets 0, 3, 12 of height 3
        assert stage_new_ranges(running_tower, 3) == ((6, 12), (15, 30))

    def test_enumeration_counts_and_mass(self, running_tower):
        blocks = enumerate_new_blocks(running_tower)
        assert len(blocks) == 1 + 1 + 21
        total = sum(b.measure for b in blocks)
        assert total == running_tower.stage(3).tower_measure == Fraction(5)
        assert [b.k for b in blocks] == list(range(23))

    def test_limit(self, running_tower):
        assert len(enumerate_new_blocks(running_tower, limit=5)) == 5

    def test_schedule(self, running_tower):
        parts, rows = s_schedule(running_tower)
        assert parts[1] == 2 and parts[2] == 2
        # stage-3 new mass 21/6 = 7/2 -> c = 4, contribution 7/8
        assert rows[2]["new_mass"] == Fraction(7, 2)
        assert parts[3] == 4
        assert rows[2]["contribution"] == Fraction(7, 8)
        sums = [r["partial_sum"] for r in rows]
        assert all(a < b for a, b in zip(sums, sums[1:]))

    def test_block_level_roundtrip(self, running_dmap):
        for blk in enumerate_new_blocks(running_dmap.tower):
            k = running_dmap.block_of(blk.birth_stage, blk.level)
            assert k == blk.k
            assert running_dmap.block_level(k) == (blk.birth_stage, blk.level)


class TestDissipativeMap:
    def test_apply_inverse_roundtrip(self, demo_tower, dmap):
        rng = random.Random(31)
        checked = 0
        sets = [
            LevelSet.from_ranges(2, [(0, 7)]),
            LevelSet.from_ranges(3, [(0, 77)]),
            LevelSet.from_ranges(4, [(0, 300)]),
        ]
        while checked < 1000:
            A = sets[checked % len(sets)]
            p = demo_tower.sample_uniform(A, rng)
            try:
                q = dmap.apply(p)
                assert dmap.apply(q, inverse=True) == demo_tower.normalize_point(p)
                r = dmap.apply(p, inverse=True)
                assert dmap.apply(r) == demo_tower.normalize_point(p)
            except NeedsMoreBlocks:
                pass
            checked += 1

    def test_locate_inverts_b1_start(self, running_dmap):
        for k in range(running_dmap.total_blocks):
            x = running_dmap.b1_start(k)
            si = running_dmap.block_stage(k)
            k2, off = running_dmap.locate(x + si.w / 7)
            assert k2 == k and off == si.w / 7

    def test_total_coordinate_mass(self, running_dmap):
        parts, _ = s_schedule(running_dmap.tower)
        expect = sum(
            blk.measure / parts[blk.birth_stage]
            for blk in enumerate_new_blocks(running_dmap.tower)
        )
        assert running_dmap.M_pos + running_dmap.M_neg == expect


class TestWandering:
    def test_zmax0_vacuous(self, dmap):
        rep = wandering_check(dmap, 0)
        assert rep["passed"] and rep["pieces"] == 1

    def test_disjoint_to_50(self, dmap):
        rep = wandering_check(dmap, 50)
        assert rep["passed"]
        assert rep["clash"] is None
        assert rep["covered_mass"] == 101 * dmap.delta

    def test_covered_grows(self, dmap):
        r10 = wandering_check(dmap, 10)
        r30 = wandering_check(dmap, 30)
        assert r30["covered_mass"] > r10["covered_mass"]
        assert 0 < r30["covered_fraction"] < 1


class TestRetention:
    def test_all_stages_ok(self, dmap):
        rows = retention_audit(dmap)
        assert len(rows) == dmap.depth
        for r in rows:
            assert r["ok"]
            assert r["retention"] >= r["bound"]
            assert r["piece_verified"] >= 1

    def test_exact_retention_value(self, running_dmap):
        # stage 1: c=2, w=delta=1/2 -> retention (c-1)w / mu = 1/2 = bound
        rows = retention_audit(running_dmap)
        assert rows[0]["retention"] == Fraction(1, 2) == rows[0]["bound"]


class TestDefect:
    def test_parameter_ranges(self, demo_tower):
        with pytest.raises(ValueError):
            lemma61_defect(demo_tower, 2, -1, 10)
        with pytest.raises(ValueError):
            lemma61_defect(demo_tower, 2, 8, 10)
        with pytest.raises(ValueError):
            lemma61_defect(demo_tower, 2, 0, 6)
        with pytest.raises(ValueError):
            lemma61_defect(demo_tower, 2, 0, 100)

    def test_accounting_identity(self, demo_tower):
        enc, info = lemma61_defect(demo_tower, 2, 0, 77)
        mu = demo_tower.stage(2).base_measure
        raw = (
            info["full_defect"]
            + info["copy_slack"]
            + info["partial_slack"]
            + info["residual"]
        ) / mu
        assert enc.lo == 0
        assert enc.hi == min(Fraction(1), raw)

    def test_full_block_defect_bounded(self, demo_tower):
        parts, _ = s_schedule(demo_tower)
        _, info = lemma61_defect(demo_tower, 2, 3, 40, parts=parts)
        # each full block contributes at most 2/parts of its own measure
        max_per = max(
            2 * demo_tower.stage(b).base_measure / parts[b]
            for b in range(3, demo_tower.depth + 1)
        )
        assert info["full_defect"] <= info["full_blocks"] * max_per

    def test_mc_within_4_sigma(self, demo_tower, dmap):
        for i, (j, k, n) in enumerate([(2, 0, 77), (2, 3, 50), (3, 10, 200)]):
            f, err, enc, skipped = mc_defect(demo_tower, dmap, j, k, n, 400, 600 + i)
            err = max(err, 1e-9)
            assert f <= float(enc.hi) + 4 * err
            assert skipped < 400


class TestSweep:
    def test_maxima_strictly_decrease(self, demo_tower):
        rows, stage_max = homoclinic_sweep(demo_tower, [2, 3, 4], 4, seed=2)
        assert stage_max[2] > stage_max[3] > stage_max[4]

    def test_boundaries_included(self, demo_tower):
        rows, _ = homoclinic_sweep(demo_tower, [2], 2)
        h2, h3 = demo_tower.stage(2).h, demo_tower.stage(3).h
        assert {(r["k"], r["n"]) for r in rows} >= {(0, h2), (0, h3)}

    def test_min_two_pairs(self, demo_tower):
        rows, _ = homoclinic_sweep(demo_tower, [2], 0)
        assert len(rows) == 2


class TestFlow:
    def test_t0_is_zero(self, demo_tower):
        for seed in (0, 99):
            d, e = flow_defect(demo_tower, FlowParams("reciprocal", 0.0), 5, 100, seed)
            assert d == 0.0 and e == 0.0

    def test_n0_closed_form(self, demo_tower):
        # phi(y) = 1/(1+y), t=1, unit square: escape probability ln 2,
        # defect sqrt(2 ln 2) ~ 1.1774
        d, e = flow_defect(demo_tower, FlowParams("reciprocal", 1.0), 0, 20000, 7)
        assert abs(d - 1.177410) < 4 * max(e, 1e-9)

    def test_unknown_phi(self, demo_tower):
        with pytest.raises(ValueError, match="catalog"):
            flow_defect(demo_tower, FlowParams("nope", 1.0), 0, 10, 0)

    def test_bad_rect(self, demo_tower):
        with pytest.raises(ValueError):
            flow_defect(
                demo_tower, FlowParams("exp", 1.0, rect=(0.0, 0.0, 0.0, 1.0)), 0, 10, 0
            )

    def test_decreasing_in_n(self, demo_tower):
        params = FlowParams("reciprocal", 1.0)
        d0, e0 = flow_defect(demo_tower, params, 0, 8000, 11)
        h4 = demo_tower.stage(4).h
        d1, e1 = flow_defect(demo_tower, params, h4, 8000, 11)
        assert d1 <= d0 + 2 * (e0 + e1)
