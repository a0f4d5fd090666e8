from dataclasses import replace

import pytest

from toyobserver.addressing import ModelParams, RegisterTopology
from toyobserver.branching import (
    Branch,
    Superposition,
    age_all,
    branch_orbit,
    check_properties,
    evolve,
    initial_state,
    step,
    write_witness_half,
)
from toyobserver.errors import CapacityError, LoopViolationError, SequencingError


def test_initial_state():
    p = ModelParams()
    s = initial_state(p)
    assert len(s) == 1 and s.global_age == 0
    b = s.branches[0]
    assert [age for age, _ in b.history] == [0]
    assert b.activated == {} and b.amplitude_exponent == 0
    assert b.wit1_written and b.wit2_written
    assert check_properties(s, p)


def test_one_step_b2():
    p = ModelParams(B=2, seed=3)
    s = step(initial_state(p), p)
    assert len(s) == 2 and s.global_age == 1
    assert all(b.amplitude_exponent == 1 for b in s.branches)
    assert all(b.wit1_written and b.wit2_written for b in s.branches)


def test_three_steps_b3():
    p = ModelParams(B=3, T=5, seed=1)
    *_, s = evolve(p, 3)
    assert len(s) == 27
    assert all(sorted(a for a, _ in b.history) == [0, 1, 2, 3] for b in s.branches)
    # total squared amplitude is count * B**-a
    assert len(s) * 3 ** -s.global_age == 1


def test_age_all():
    b = Branch(((2, "x"), (1, "y"), (0, "z")))
    assert sorted(a for a, _ in age_all(b).history) == [1, 2, 3]
    assert sorted(a for a, _ in age_all(age_all(b)).history) == [2, 3, 4]
    assert age_all(b).activated == {}


class TestBranchOrbit:
    def setup_method(self):
        self.p = ModelParams(B=2, T=6, seed=8)
        self.topo = RegisterTopology(self.p)

    def test_children(self):
        parent = replace(initial_state(self.p).branches[0], amplitude_exponent=3)
        kids = branch_orbit(age_all(parent), self.p, self.topo)
        assert len(kids) == 2
        assert all(k.amplitude_exponent == 4 for k in kids)
        zero = [k.present for k in kids]
        assert zero[0] != zero[1]
        assert all(z not in parent.addresses() for z in zero)
        assert kids[0].history[:-1] == kids[1].history[:-1]
        assert not kids[0].wit1_written and not kids[0].wit2_written

    def test_needs_aged_branch(self):
        with pytest.raises(SequencingError):
            branch_orbit(initial_state(self.p).branches[0], self.p, self.topo)

    def test_loop_violation(self):
        class Loopy:
            def root(self):
                return 0

            def targets(self, k):
                return (0, 1)

        b = age_all(Branch(((0, 0),)))
        with pytest.raises(LoopViolationError):
            branch_orbit(b, self.p, Loopy())


def test_witness_half_order():
    b = Branch(((0, "k"),), wit1_written=False, wit2_written=False)
    b1 = write_witness_half(b, 1)
    assert b1.wit1_written and not b1.wit2_written
    b2 = write_witness_half(b1, 2)
    assert b2.wit1_written and b2.wit2_written
    with pytest.raises(SequencingError):
        write_witness_half(b, 2)
    with pytest.raises(SequencingError):
        write_witness_half(b1, 1)
    with pytest.raises(ValueError):
        write_witness_half(b, 3)


def test_properties_hold_along_evolution():
    for seed in range(30):
        p = ModelParams(B=3, T=5, W=8, seed=seed)
        for s in evolve(p, 5):
            rep = check_properties(s, p)
            assert rep, rep


def test_corrupted_branch_fails_property_1():
    p = ModelParams(B=2, seed=0)
    *_, s = evolve(p, 2)
    bad = replace(s.branches[1], history=s.branches[1].history + ((0, "intruder"),))
    rep = check_properties(Superposition((s.branches[0], bad), s.global_age), p)
    assert not rep and rep.property == 1 and rep.branch_index == 1


def test_foreign_neuron_fails_property_3():
    from toyobserver.addressing import WitnessAddress

    p = ModelParams(B=2, seed=0)
    *_, s = evolve(p, 1)
    bad = replace(s.branches[0], activated={WitnessAddress("elsewhere", 0): 1})
    rep = check_properties(Superposition((bad,), s.global_age), p)
    assert not rep and rep.property == 3


def test_branch_cap():
    p = ModelParams(B=2, branch_cap=4)
    with pytest.raises(CapacityError):
        for _ in evolve(p, 3):
            pass


def test_deterministic():
    p = ModelParams(B=2, T=6, seed=21)
    *_, a = evolve(p, 6)
    *_, b = evolve(p, 6)
    assert a == b
    assert [x.neuron_count for x in a.branches] == [x.neuron_count for x in b.branches]


def test_children_ordered_by_parent_then_label():
    p = ModelParams(B=2, T=4, seed=2)
    topo = RegisterTopology(p)
    s1 = step(initial_state(p), p)
    s2 = step(s1, p)
    expected = [topo.targets(b.present)[i] for b in s1.branches for i in range(2)]
    assert [b.present for b in s2.branches] == expected


def test_cascade_runs_once_per_step():
    p = ModelParams(B=2, T=3, seed=5)
    *_, s = evolve(p, 5)
    # ages 1..3 run a cascade, ages 4..5 are past the lifetime
    assert all(len(b.cascade_log) == 5 for b in s.branches)
    assert all(o.neurons_activated == 0 for b in s.branches for o in b.cascade_log[3:])
