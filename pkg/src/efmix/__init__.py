"""Fair allocation of indivisible goods and chores, optionally with a cake.

The main entry points are :func:`solve_ef1_envy_freeable` for items only and
:func:`solve_efm` when a divisible good is present.
"""
from efmix.division import consensus_split, efm_pipeline, payment_schedule, solve_efm
from efmix.envy import (
    build_envy_graph,
    envy_freeable_by_permutation,
    has_positive_cycle,
    heaviest_path_payments,
)
from efmix.exceptions import (
    EfmixError,
    InstanceParseError,
    InstanceTooLargeError,
    InvariantViolation,
    PositiveCycleError,
    PreconditionError,
    SearchBudgetExceeded,
)
from efmix.model import (
    CakePiece,
    DensitySegment,
    DiscreteAllocation,
    Instance,
    MixedAllocation,
    Ratio,
    normalize,
    parse_instance,
)
from efmix.solver import SolveCertificate, replay, solve_ef1_envy_freeable
from efmix.verify import brute_force_ef1_efable, check_ef1, check_efm

__all__ = [
    "CakePiece", "DensitySegment", "DiscreteAllocation", "EfmixError", "Instance",
    "InstanceParseError", "InstanceTooLargeError", "InvariantViolation", "MixedAllocation",
    "PositiveCycleError", "PreconditionError", "Ratio", "SearchBudgetExceeded",
    "SolveCertificate", "brute_force_ef1_efable", "build_envy_graph", "check_ef1",
    "check_efm", "consensus_split", "efm_pipeline", "envy_freeable_by_permutation",
    "has_positive_cycle", "heaviest_path_payments", "normalize", "parse_instance",
    "payment_schedule", "replay", "solve_ef1_envy_freeable", "solve_efm",
]
__version__ = "0.1.0"
