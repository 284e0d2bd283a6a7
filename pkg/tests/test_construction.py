import random
from fractions import Fraction

import pytest

from sidonlab import (
    ConstructionSpec,
    LevelSet,
    NeedsMoreStages,
    PointState,
    SpecValidationError,
    StageParams,
    Tower,
    build_stages,
    measure_growth,
)
from conftest import RUNNING_SPEC


class TestStageTable:
    def test_heights_and_measures(self, running_tower):
        hs = [running_tower.stage(j).h for j in (1, 2, 3)]
        assert hs == [1, 3, 30]
        bases = [running_tower.stage(j).base_measure for j in (1, 2, 3)]
        assert bases == [Fraction(1), Fraction(1, 2), Fraction(1, 6)]
        towers = [running_tower.stage(j).tower_measure for j in (1, 2, 3)]
        assert towers == [Fraction(1), Fraction(3, 2), Fraction(5)]

    def test_offsets(self, running_tower):
        assert running_tower.stage(1).offsets == (0, 1)
        assert running_tower.stage(2).offsets == (0, 3, 12)
        assert running_tower.stage(3).offsets == ()

    def test_height_recursion_random(self):
        rng = random.Random(5)
        for _ in range(20):
            h1 = rng.randint(1, 4)
            stages = tuple(
                StageParams(r, tuple(rng.randint(0, 6) for _ in range(r)))
                for r in (rng.randint(2, 5) for _ in range(3))
            )
            spec = ConstructionSpec(h1, stages)
            built = build_stages(spec, 4)
            h = h1
            for j, p in enumerate(stages):
                assert built[j].h == h
                h = h * p.r + sum(p.s)
            assert built[3].h == h

    def test_measure_growth(self):
        measures, partials = measure_growth(RUNNING_SPEC, 3)
        assert measures == [Fraction(1), Fraction(3, 2), Fraction(5)]
        # terms are 1/(1*2)=1/2 and (0+6+15)/(3*3)=7/3
        assert partials == [Fraction(1, 2), Fraction(17, 6)]

    def test_validation(self):
        with pytest.raises(SpecValidationError):
            ConstructionSpec(0, (StageParams(2, (0, 0)),)).validate()
        with pytest.raises(SpecValidationError):
            ConstructionSpec(1, (StageParams(1, (0,)),)).validate()
        with pytest.raises(SpecValidationError):
            ConstructionSpec(1, (StageParams(2, (0,)),)).validate()
        with pytest.raises(SpecValidationError):
            ConstructionSpec(1, (StageParams(2, (0, -1)),)).validate()
        with pytest.raises(SpecValidationError):
            build_stages(RUNNING_SPEC, 4)

    def test_roundtrip_dict(self):
        d = RUNNING_SPEC.to_dict()
        assert ConstructionSpec.from_dict(d) == RUNNING_SPEC


class TestLevelSet:
    def test_normalization(self):
        a = LevelSet.from_ranges(2, [(5, 7), (0, 3), (2, 5)])
        assert a.ranges == ((0, 7),)
        assert a.count() == 7

    def test_set_algebra(self):
        a = LevelSet.from_ranges(1, [(0, 5), (10, 15)])
        b = LevelSet.from_ranges(1, [(3, 12)])
        assert a.intersect(b).ranges == ((3, 5), (10, 12))
        assert a.union(b).ranges == ((0, 15),)
        assert a.difference(b).ranges == ((0, 3), (12, 15))
        assert a.contains(4) and not a.contains(5)

    def test_shift_clip(self):
        a = LevelSet.from_ranges(1, [(0, 4)])
        assert a.shift(3).ranges == ((3, 7),)
        assert a.shift(3).clip(0, 5).ranges == ((3, 5),)


class TestLift:
    def test_single_level(self, running_tower):
        base = LevelSet.from_levels(2, [0])
        assert running_tower.lift(base, 3).ranges == ((0, 1), (3, 4), (12, 13))

    def test_full_tower(self, running_tower):
        x2 = LevelSet.from_ranges(2, [(0, 3)])
        assert running_tower.lift(x2, 3).ranges == ((0, 6), (12, 15))

    def test_measure_preserved(self, running_tower):
        x2 = LevelSet.from_ranges(2, [(0, 3)])
        assert running_tower.set_measure(x2) == Fraction(3, 2)
        lifted = running_tower.lift(x2, 3)
        assert running_tower.set_measure(lifted) == Fraction(3, 2)

    def test_needs_more_stages(self, running_tower):
        with pytest.raises(NeedsMoreStages):
            running_tower.lift(LevelSet.from_levels(2, [0]), 4)


class TestPointDynamics:
    def test_forward_step_representation(self, running_tower):
        # the image of (stage 2, level 0, 1/10) is stage-2 level 1; its
        # minimal-stage representation is stage 1 level 0 at offset 3/5
        p = PointState(2, 0, Fraction(1, 10))
        q = running_tower.step(p)
        assert q == PointState(1, 0, Fraction(3, 5))
        assert running_tower.point_to_stage(q, 2) == PointState(2, 1, Fraction(1, 10))

    def test_top_crossing(self, running_tower):
        p = PointState(2, 2, Fraction(1, 10))  # top level, column 1 of stage 3
        q = running_tower.step(p)
        assert running_tower.point_to_stage(q, 3) == PointState(3, 3, Fraction(1, 10))

    def test_roundtrip(self, running_tower):
        rng = random.Random(11)
        x2 = LevelSet.from_ranges(2, [(0, 3)])
        for _ in range(50):
            p = running_tower.sample_uniform(x2, rng)
            q = running_tower.step(running_tower.step(p), -1)
            assert q == running_tower.normalize_point(p)

    def test_iterate_matches_steps(self, demo_tower):
        rng = random.Random(3)
        a = LevelSet.from_ranges(2, [(0, 7)])
        for _ in range(20):
            p = demo_tower.sample_uniform(a, rng)
            n = rng.randint(1, 25)
            q = p
            for _ in range(n):
                q = demo_tower.step(q)
            assert demo_tower.iterate(p, n) == q
            assert demo_tower.iterate(q, -n) == demo_tower.normalize_point(p)

    def test_iterate_needs_more_stages(self, running_tower):
        with pytest.raises(NeedsMoreStages):
            running_tower.iterate(PointState(1, 0, Fraction(0)), 100)


class TestSampling:
    def test_membership(self, running_tower):
        rng = random.Random(7)
        a = LevelSet.from_ranges(2, [(1, 3)])
        b = LevelSet.from_ranges(2, [(0, 1)])
        for _ in range(100):
            p = running_tower.sample_uniform(a, rng)
            assert running_tower.membership(p, a)
            assert not running_tower.membership(p, b)

    def test_levels_roughly_uniform(self, running_tower):
        rng = random.Random(1)
        a = LevelSet.from_ranges(3, [(0, 30)])
        counts = [0] * 30
        n = 3000
        for _ in range(n):
            p = running_tower.sample_uniform(a, rng)
            counts[running_tower.point_to_stage(p, 3).level] += 1
        # 4 sigma around n/30
        for c in counts:
            assert abs(c - n / 30) < 4 * (n / 30) ** 0.5 + 10

    def test_empty_raises(self, running_tower):
        with pytest.raises(ValueError):
            running_tower.sample_uniform(LevelSet.from_ranges(2, []), random.Random(0))
