"""Toy model of an observer's branching history with awareness cascades.

Symbolic branch engine, world-tree ensemble statistics and a brute-force
state-space oracle for tiny configurations.
"""
from .addressing import ModelParams, OrbitalAddress, WitnessAddress, derive_value
from .branching import Branch, Superposition, check_properties, evolve, initial_state, step
from .cascade import CascadeOutcome, generation_ages, run_cascade
from .ensemble import (
    CcdfTable,
    EnsembleSummary,
    ccdf_table,
    dominance_fraction,
    gap_scaling_experiment,
    pareto_reference_sample,
    sample_ensemble,
    top_two,
    world_tree_size,
)
from .errors import (
    CapacityError,
    ConfigError,
    InputError,
    InvariantError,
    LoopViolationError,
    RangeError,
    SequencingError,
    ToyObserverError,
)
from .kernels import backend

__version__ = "0.1.0"

__all__ = [
    "Branch", "CapacityError", "CascadeOutcome", "CcdfTable", "ConfigError", "EnsembleSummary",
    "InputError", "InvariantError", "LoopViolationError", "ModelParams", "OrbitalAddress",
    "RangeError", "SequencingError", "Superposition", "ToyObserverError", "WitnessAddress",
    "backend", "ccdf_table", "check_properties", "derive_value", "dominance_fraction", "evolve",
    "gap_scaling_experiment", "generation_ages", "initial_state", "pareto_reference_sample",
    "run_cascade", "sample_ensemble", "step", "top_two", "world_tree_size",
]
