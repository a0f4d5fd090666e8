"""Awareness cascade on a single branch.

Generation ``l`` addresses the records of ages ``ceil((j-1) a / 2**l)``,
``j = 1..2**l`` (duplicates collapse, so a generation never names a record
twice). Each addressed record is probed through one witness drawn for the
address set. Records older than zero always answer; the zero-age record
answers only if its drawn witness was created before the cascade ran
(first half), which happens with probability exactly 1/2. Every
successful generation rotates one neuron per addressed record.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .addressing import ModelParams, address_key, cascade_key, draw_cascade_witness


@dataclass(frozen=True)
class CascadeOutcome:
    generations_survived: int = 0
    neurons_activated: int = 0
    per_generation_counts: tuple = ()
    capped: bool = False
    activations: tuple = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        if self.neurons_activated != sum(self.per_generation_counts):
            raise ValueError("neurons_activated must equal the sum of per-generation counts")
        if self.generations_survived != len(self.per_generation_counts):
            raise ValueError("one count per survived generation")


ZERO_OUTCOME = CascadeOutcome()


@dataclass(frozen=True)
class GenerationPlan:
    ages: tuple
    addressed_records: tuple


def generation_ages(a: int, l: int) -> list:
    """Ascending distinct ages ``ceil((j-1) a / 2**l)`` for ``j = 1..2**l``."""
    if a < 1 or l < 1:
        raise ValueError("need a >= 1 and l >= 1")
    step = 1 << l
    # only 2**l values, but they repeat once 2**l > a; the set is then 0..a
    if step > a:
        return list(range(a + 1))
    return sorted({-(-(j * a) // step) for j in range(step)})


def survival_ccdf(l: int) -> float:
    """Probability that a cascade survives at least ``l`` generations (uncapped)."""
    if l < 0:
        raise ValueError("l must be >= 0")
    return math.ldexp(1.0, -l)


def max_generation(branch, params: ModelParams) -> int:
    # the generation cap does not depend on the branch; the argument mirrors run_cascade
    return params.max_generation


def plan_generation(branch, l: int) -> GenerationPlan:
    by_age = branch.records_by_age()
    ages = tuple(generation_ages(branch.age, l))
    return GenerationPlan(ages, tuple(by_age[x] for x in ages))


def run_cascade(branch, params: ModelParams) -> CascadeOutcome:
    """Evaluate the cascade of ``branch`` at its current age.

    The branch must have its first witness half written and the second not
    yet written, i.e. sit between the two witness factors of a step.
    Outside ``1 <= a <= T`` the cascade is inert.
    """
    a = branch.age
    if a < 1 or a > params.T:
        return ZERO_OUTCOME
    k0 = branch.present
    half = params.half
    counts = []
    activations = []
    for l in range(1, max_generation(branch, params) + 1):
        plan = plan_generation(branch, l)
        g_key = cascade_key(l, plan.addressed_records)
        order = sorted(plan.addressed_records, key=address_key)
        j0 = order.index(k0)
        probe = draw_cascade_witness(g_key, j0, k0, params)
        if probe.index >= half:
            return CascadeOutcome(len(counts), sum(counts), tuple(counts), False, tuple(activations))
        if not params.compact:
            activations.extend(
                probe if j == j0 else draw_cascade_witness(g_key, j, k, params)
                for j, k in enumerate(order)
            )
        counts.append(len(order))
    return CascadeOutcome(len(counts), sum(counts), tuple(counts), True, tuple(activations))
