"""Exact checkers for mixing and Kitai's Criterion of composition operators on tower systems."""

from .conditions import (
    FAILS,
    HOLDS,
    INCONCLUSIVE,
    PROVED,
    check_ksc,
    check_msc,
    classify,
    exceptional_set,
    grc_witness,
    kitai_generator_check,
    ksc_failure_certificate,
    optimal_witness,
)
from .lp_operator import SimpleFunction, apply_op, frechet, inverse_orbit_floor, lp_norm_p, lp_norm_p_bounds
from .measure_core import DyadicInterval, DyadicSet, StepFunction, integrate, lebesgue
from .shift_dynamics import (
    NormSeq,
    WeightSeq,
    bounded_distortion_consistency,
    classify_bilateral,
    classify_unilateral,
    equicontinuity_probe,
    example_norms,
    norms_from_system,
    product_criterion,
    weights_from_system,
)
from .tower import (
    Base,
    Detour,
    LeveledSet,
    TowerSystem,
    bdp_system,
    block_start,
    custom_system,
    decode,
    distortion_constant,
    encode,
    geometric_system,
    measure,
    push,
    uniform_system,
    wandering_set,
)

__version__ = "0.1.0"

__all__ = [
    "FAILS",
    "HOLDS",
    "INCONCLUSIVE",
    "PROVED",
    "Base",
    "Detour",
    "DyadicInterval",
    "DyadicSet",
    "LeveledSet",
    "NormSeq",
    "SimpleFunction",
    "StepFunction",
    "TowerSystem",
    "WeightSeq",
    "apply_op",
    "bdp_system",
    "block_start",
    "bounded_distortion_consistency",
    "check_ksc",
    "check_msc",
    "classify",
    "classify_bilateral",
    "classify_unilateral",
    "custom_system",
    "decode",
    "distortion_constant",
    "encode",
    "equicontinuity_probe",
    "example_norms",
    "exceptional_set",
    "frechet",
    "geometric_system",
    "grc_witness",
    "integrate",
    "inverse_orbit_floor",
    "kitai_generator_check",
    "ksc_failure_certificate",
    "lebesgue",
    "lp_norm_p",
    "lp_norm_p_bounds",
    "measure",
    "norms_from_system",
    "optimal_witness",
    "product_criterion",
    "push",
    "uniform_system",
    "wandering_set",
    "weights_from_system",
]
