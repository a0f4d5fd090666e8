"""Symbolic evolution of the branching state.

The reachable states are superpositions of equal-amplitude product states.
Each product state is a :class:`Branch`: the orbital records written so
far with their ages, the write status of the zero-age record's witness
halves, and the neurons rotated by cascades. Blank records are simply
absent. Amplitudes are ``B ** (-e / 2)`` with an integer exponent ``e``.

One step applies, in order: ageing, orbital branching, first witness half,
awareness cascade, second witness half.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Iterator

from .addressing import ModelParams, RegisterTopology
from .cascade import CascadeOutcome, run_cascade
from .errors import CapacityError, LoopViolationError, SequencingError


@dataclass(frozen=True)
class Branch:
    history: tuple  # ((age, address), ...) oldest first
    wit1_written: bool = True
    wit2_written: bool = True
    activated: dict = field(default_factory=dict)  # WitnessAddress -> number of rotations
    neuron_count: int = 0
    amplitude_exponent: int = 0
    cascade_log: tuple = ()

    @property
    def age(self) -> int:
        return max(age for age, _ in self.history)

    @property
    def present(self):
        """The zero-age orbital record."""
        zero = [addr for age, addr in self.history if age == 0]
        if len(zero) != 1:
            raise SequencingError(f"expected one zero-age record, found {len(zero)}")
        return zero[0]

    def records_by_age(self) -> dict:
        return {age: addr for age, addr in self.history}

    def addresses(self) -> set:
        return {addr for _, addr in self.history}


@dataclass(frozen=True)
class Superposition:
    branches: tuple
    global_age: int = 0

    def __len__(self):
        return len(self.branches)


def initial_state(params: ModelParams, topology=None) -> Superposition:
    topology = topology or RegisterTopology(params)
    return Superposition((Branch(((0, topology.root()),)),), 0)


def age_all(b: Branch) -> Branch:
    return replace(b, history=tuple((age + 1, addr) for age, addr in b.history))


def branch_orbit(b: Branch, params: ModelParams, topology=None) -> tuple:
    topology = topology or RegisterTopology(params)
    ages = [age for age, _ in b.history]
    if 0 in ages or ages.count(1) != 1:
        raise SequencingError("branch_orbit needs exactly one age-1 record and none of age 0")
    k1 = b.records_by_age()[1]
    targets = topology.targets(k1)
    seen = b.addresses()
    clash = [t for t in targets if t in seen]
    if clash:
        raise LoopViolationError(f"branch target {clash[0]!r} of {k1!r} is not blank")
    return tuple(
        replace(
            b,
            history=b.history + ((0, t),),
            wit1_written=False,
            wit2_written=False,
            amplitude_exponent=b.amplitude_exponent + 1,
        )
        for t in targets
    )


def write_witness_half(b: Branch, half: int) -> Branch:
    if half == 1:
        if b.wit1_written:
            raise SequencingError("first witness half already written for the present record")
        return replace(b, wit1_written=True)
    if half == 2:
        if not b.wit1_written or b.wit2_written:
            raise SequencingError("second witness half needs the first written and itself blank")
        return replace(b, wit2_written=True)
    raise ValueError("half must be 1 or 2")


def record_cascade(b: Branch, outcome: CascadeOutcome, params: ModelParams) -> Branch:
    activated = b.activated
    if outcome.activations and not params.compact:
        counts = Counter(activated)
        counts.update(outcome.activations)
        activated = dict(counts)
    return replace(
        b,
        activated=activated,
        neuron_count=b.neuron_count + outcome.neurons_activated,
        cascade_log=b.cascade_log + (outcome,),
    )


def step_branch(b: Branch, params: ModelParams, topology) -> tuple:
    children = []
    for child in branch_orbit(age_all(b), params, topology):
        child = write_witness_half(child, 1)
        child = record_cascade(child, run_cascade(child, params), params)
        children.append(write_witness_half(child, 2))
    return tuple(children)


def step(s: Superposition, params: ModelParams, topology=None) -> Superposition:
    """One application of the evolution operator. Children are ordered by (parent, s)."""
    topology = topology or RegisterTopology(params)
    if len(s.branches) * params.B > params.branch_cap:
        raise CapacityError(
            f"{len(s.branches) * params.B} branches would exceed branch_cap={params.branch_cap}"
        )
    out = []
    for b in s.branches:
        out.extend(step_branch(b, params, topology))
    return Superposition(tuple(out), s.global_age + 1)


def evolve(params: ModelParams, steps: int, topology=None) -> Iterator[Superposition]:
    """Yield the initial state and the state after each of ``steps`` steps."""
    topology = topology or RegisterTopology(params)
    s = initial_state(params, topology)
    yield s
    for _ in range(steps):
        s = step(s, params, topology)
        yield s


@dataclass(frozen=True)
class PropertyReport:
    passed: bool
    property: int | None = None
    branch_index: int | None = None
    detail: str = ""

    def __bool__(self):
        return self.passed


def check_properties(s: Superposition, params: ModelParams | None = None) -> PropertyReport:
    """Check every branch for a unique present record, a full age ladder of
    witnessed records, and neuron activations confined to the branch's own
    witnesses. Returns the first counterexample."""
    for i, b in enumerate(s.branches):
        ages = [age for age, _ in b.history]
        zeros = ages.count(0)
        if zeros != 1:
            return PropertyReport(False, 1, i, f"{zeros} orbital records of age 0")
        if sorted(ages) != list(range(s.global_age + 1)):
            return PropertyReport(False, 2, i, f"record ages {sorted(ages)} != 0..{s.global_age}")
        if not (b.wit1_written and b.wit2_written):
            return PropertyReport(False, 2, i, "witness set of the present record incomplete")
        if b.amplitude_exponent != s.global_age:
            return PropertyReport(False, 2, i, f"amplitude exponent {b.amplitude_exponent} != {s.global_age}")
        owners = b.addresses()
        for w, n in b.activated.items():
            if w.owner not in owners or n < 1:
                return PropertyReport(False, 3, i, f"neuron of {w!r} does not belong to the branch")
        if b.neuron_count != sum(o.neurons_activated for o in b.cascade_log):
            return PropertyReport(False, 3, i, "neuron count disagrees with the cascade log")
    return PropertyReport(True)
