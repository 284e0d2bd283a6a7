"""sidonlab: exact-arithmetic laboratory for infinite-measure rank-one
(Sidon) constructions and their Poisson suspensions."""

__version__ = "0.1.0"

from .construction import (
    ConstructionSpec,
    LevelSet,
    NeedsMoreStages,
    PointState,
    SpecValidationError,
    StageParams,
    Tower,
    TowerStage,
    build_stages,
    measure_growth,
)
from .correlation import (
    decay_report,
    mc_correlation,
    pair_enclosure,
    sidon_bound_report,
    support_decay_report,
    triple_enclosure,
)
from .enclosure import MeasureEnclosure
from .homoclinic import (
    DissipativeMap,
    FlowParams,
    NeedsMoreBlocks,
    NewBlock,
    enumerate_new_blocks,
    flow_defect,
    homoclinic_sweep,
    lemma61_defect,
    retention_audit,
    s_schedule,
    wandering_check,
)
from .poisson import (
    CountEvent,
    ExactProb,
    ProbEnclosure,
    cylinder_prob,
    joint_prob,
    marginal_prob,
    mc_joint,
    mixing_report,
    normalization_check,
    sample_configuration,
    triple_mixing_report,
)
from .sidon import (
    PsiSpec,
    SidonSet,
    build_from_psi,
    is_sidon,
    mian_chowla,
    optimal_stage_params,
    sidon_property_check,
    singer_set,
)

__all__ = [
    "ConstructionSpec",
    "CountEvent",
    "DissipativeMap",
    "ExactProb",
    "FlowParams",
    "LevelSet",
    "MeasureEnclosure",
    "NeedsMoreBlocks",
    "NeedsMoreStages",
    "NewBlock",
    "PointState",
    "ProbEnclosure",
    "PsiSpec",
    "SidonSet",
    "SpecValidationError",
    "StageParams",
    "Tower",
    "TowerStage",
    "build_from_psi",
    "build_stages",
    "cylinder_prob",
    "decay_report",
    "enumerate_new_blocks",
    "flow_defect",
    "homoclinic_sweep",
    "is_sidon",
    "joint_prob",
    "lemma61_defect",
    "marginal_prob",
    "mc_correlation",
    "measure_growth",
    "mian_chowla",
    "mc_joint",
    "mixing_report",
    "normalization_check",
    "optimal_stage_params",
    "pair_enclosure",
    "retention_audit",
    "s_schedule",
    "sample_configuration",
    "sidon_bound_report",
    "sidon_property_check",
    "singer_set",
    "support_decay_report",
    "triple_enclosure",
    "triple_mixing_report",
    "wandering_check",
    "__version__",
]
