import json
from fractions import Fraction

import pytest

from sidonlab import ConstructionSpec, StageParams, Tower, singer_set
from sidonlab.sidon import optimal_stage_params


RUNNING_SPEC = ConstructionSpec(
    1, (StageParams(2, (0, 1)), StageParams(3, (0, 6, 15)))
)


def demo_singer_spec() -> ConstructionSpec:
    """Five-stage Singer-based optimal construction, q = 3, 4, 5, 7, 8.

    Small enough that six tower stages (h up to ~3e6) build instantly, deep
    enough that correlation queries over the first four stage intervals
    resolve with no or tiny escape slack.
    """
    h = 1
    stages = []
    for q in (3, 4, 5, 7, 8):
        s = singer_set(q)
        stages.append(optimal_stage_params(h, s))
        h = h * (s.elements[-1] - s.elements[0])
    return ConstructionSpec(1, tuple(stages))


@pytest.fixture(scope="session")
def running_tower() -> Tower:
    return Tower(RUNNING_SPEC, depth=3)


@pytest.fixture(scope="session")
def demo_spec() -> ConstructionSpec:
    return demo_singer_spec()


@pytest.fixture(scope="session")
def demo_tower(demo_spec) -> Tower:
    return Tower(demo_spec, depth=6)


@pytest.fixture(scope="session")
def demo_config(demo_spec, tmp_path_factory):
    path = tmp_path_factory.mktemp("cfg") / "demo.json"
    path.write_text(json.dumps({"construction": demo_spec.to_dict()}))
    return path


def frac(a, b=1) -> Fraction:
    return Fraction(a, b)
