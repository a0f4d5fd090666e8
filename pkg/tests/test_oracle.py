import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from toyobserver.addressing import ModelParams
from toyobserver.errors import CapacityError, InputError
from toyobserver.oracle import (
    DenseOracle,
    SparseOracle,
    TruncatedSpace,
    apply_factor,
    build_branching_matrix,
    canonical_space,
    compare_with_symbolic,
    dense_sparse_agreement,
    projector_family,
    projector_orthogonality_check,
    random_state,
    random_unitary,
    rebase_demo,
    sigma_power,
    unitarity_check,
)
from toyobserver.oracle.checks import Projector
from toyobserver.oracle.operators import CascadePlan

SMALL = TruncatedSpace(orbital_count=3, W=2, M=2, B=2)


@pytest.fixture(scope="module")
def small():
    return DenseOracle(SMALL)


class TestBranchingMatrix:
    def test_b2_splits_blank_state(self):
        S = build_branching_matrix(2).S
        r = 1 / math.sqrt(2)
        assert np.allclose(S @ [1, 0, 0], [0, r, r], atol=1e-15)

    @pytest.mark.parametrize("B", range(2, 9))
    def test_unitary(self, B):
        bm = build_branching_matrix(B)
        assert bm.deviation() < 1e-12
        assert np.array_equal(bm.S[0], np.eye(B + 1)[1])
        assert np.allclose(bm.S[1:, 0], 1 / math.sqrt(B))

    def test_b3_column_norms(self):
        S = build_branching_matrix(3).S
        assert np.allclose(np.linalg.norm(S, axis=0), 1, atol=1e-14)

    def test_rejects_b1(self):
        with pytest.raises(InputError):
            build_branching_matrix(1)


def test_sigma_power_is_quarter_turn():
    assert sigma_power(0, 1) == (1, 1)
    assert sigma_power(1, 1) == (0, -1)
    assert sigma_power(0, 2) == (0, -1)
    assert sigma_power(1, 4) == (1, 1)


class TestSpace:
    def test_full_dim_formula(self):
        sp = TruncatedSpace(3, 2, 3, 2, variant="full")
        assert sp.dim == (3 + 1) ** 3 * ((3 + 1) * 2) ** (3 * 2)

    def test_canonical_dim(self):
        assert canonical_space().dim == 4 ** 3 * 4 ** 6 * 2 ** 3

    @given(st.integers(0, SMALL.dim - 1))
    def test_bijection(self, i):
        assert SMALL.index(SMALL.digits(i)) == i

    def test_config_digits_match_scalar(self):
        D = SMALL.config_digits
        nb = 2 ** SMALL.n_neurons
        for c in (0, 1, 17, len(D) - 1):
            assert tuple(D[c]) == SMALL.digits(c * nb)[: SMALL.n_records]

    def test_bad_digits(self):
        with pytest.raises(InputError):
            SMALL.index((0,) * 3)
        with pytest.raises(InputError):
            SMALL.digits(SMALL.dim)

    def test_capacity(self):
        with pytest.raises(CapacityError):
            DenseOracle(canonical_space(), max_dim=1000)
        with pytest.raises(CapacityError):
            DenseOracle(TruncatedSpace(3, 2, 3, 2, variant="full"))


class TestFactors:
    def test_age_shifts_ages(self, small):
        d = [0] * len(SMALL.shape)
        d[0], d[1] = 1, 2  # ages 0 and 1; with M=2 the older one wraps to 0
        out = small.apply(small.basis_state(d), "age")
        i = int(np.argmax(np.abs(out)))
        got = SMALL.digits(i)
        assert abs(out[i]) == 1.0
        assert got[0] == 2 and got[1] == 1

    def test_age_with_room(self):
        sp = TruncatedSpace(3, 2, 4, 2)
        o = SparseOracle(sp)
        d = [0] * len(sp.shape)
        d[0], d[1] = 1, 2
        out = o.apply({tuple(d): 1.0}, "age")
        (key, amp), = out.items()
        assert key[0] == 2 and key[1] == 3 and amp == 1.0

    def test_orb_splits_initial_state(self, small):
        v = small.basis_state(SMALL.preferred_initial_digits())
        v = small.apply(small.apply(v, "age"), "orb")
        nz = np.nonzero(np.abs(v) > 1e-14)[0]
        assert len(nz) == 2
        assert np.allclose(np.abs(v[nz]), 1 / math.sqrt(2))
        for i in nz:
            d = SMALL.digits(int(i))
            assert sorted(d[:3]) == [0, 1, 2]

    def test_wit_writes_first_half_only(self, small):
        d = [0] * len(SMALL.shape)
        d[1] = 1  # record 1 at age 0, witnesses blank
        v = small.apply(small.basis_state(d), "wit1")
        got = SMALL.digits(int(np.argmax(np.abs(v))))
        assert got[SMALL.wit_axis(1, 0)] == 1 and got[SMALL.wit_axis(1, 1)] == 0

    @pytest.mark.parametrize("factor", ["age", "orb", "wit1", "wit2", "con", "full"])
    def test_norm_preserved(self, small, factor):
        rng = np.random.default_rng(3)
        for _ in range(5):
            v = random_state(small.dim, rng)
            assert abs(np.linalg.norm(small.apply(v, factor)) - 1) < 1e-10

    def test_dimension_mismatch(self, small):
        with pytest.raises(InputError):
            small.apply(np.zeros(5), "age")
        with pytest.raises(InputError):
            small.apply(np.zeros(small.dim), "spin")

    def test_module_level_apply(self):
        v = np.zeros(SMALL.dim, dtype=complex)
        v[SMALL.index(SMALL.preferred_initial_digits())] = 1
        assert np.allclose(apply_factor(v, "age", SMALL), DenseOracle(SMALL).apply(v, "age"))


class TestUnitarity:
    @pytest.mark.parametrize("factor", ["age", "orb", "wit1", "wit2", "con", "full"])
    def test_factors(self, small, factor):
        assert unitarity_check(factor, 10, 1e-10, oracle=small)

    def test_truncating_age_fails(self):
        r = unitarity_check("age", 3, 1e-10, space=SMALL, cyclic=False)
        assert not r and r.max_norm_dev > 0.1


class TestBackends:
    def test_dense_matches_sparse(self):
        assert dense_sparse_agreement(SMALL, trials=4) < 1e-12

    def test_dense_matches_sparse_full_variant(self):
        sp = TruncatedSpace(3, 2, 2, 2, variant="full", seed=5)
        assert dense_sparse_agreement(sp, trials=3, seed=1) < 1e-12

    def test_rotation_table_matches_scalar(self, small):
        R = small.rotation_table()
        plan = CascadePlan(SMALL)
        rng = np.random.default_rng(0)
        for c in rng.integers(0, len(R), 300):
            assert list(R[c]) == list(plan.rotations(tuple(int(x) for x in SMALL.config_digits[c])))
        assert R.any()


class TestProjectors:
    def test_family_and_pairs(self):
        r = projector_orthogonality_check(1, 2, space=SMALL)
        assert r and r.n_projectors == 6 and r.n_pairs == 15

    def test_disjoint_sets_annihilate(self):
        sp = TruncatedSpace(4, 2, 3, 2)
        fam = projector_family(sp, 1)
        a = next(p for p in fam if p.records == (0, 1))
        b = next(p for p in fam if p.records == (2, 3))
        ma, mb = a.mask(sp), b.mask(sp)
        assert ma.any() and mb.any()
        assert not (ma & mb).any()

    def test_same_set_other_ages_annihilate(self):
        fam = projector_family(SMALL, 1)
        a, b = [p for p in fam if p.records == (0, 1)][:2]
        assert a.alpha != b.alpha
        assert not (a.mask(SMALL) & b.mask(SMALL)).any()

    def test_idempotent(self):
        p = Projector(1, (0, 1), (0, 1), (0, 1))
        m = p.mask(SMALL)
        v = random_state(SMALL.dim, np.random.default_rng(1))
        once = np.where(m, v, 0)
        assert np.array_equal(np.where(m, once, 0), once)


class TestSymbolicAgreement:
    def test_zero_steps(self):
        r = compare_with_symbolic(0)
        assert r and r.support_size == 1 and r.max_amplitude_dev == 0

    def test_b2_two_steps(self):
        r = compare_with_symbolic(2, ModelParams(B=2, W=2, T=2))
        assert r.passed, r
        assert r.n_branches == 4 and r.support_size == 4
        assert all(abs(abs(a) - 0.5) < 1e-12 for a in r.predicted.values())
        assert r.factorised and r.back_transitions == 0
        assert r.max_age_seen < 4 - 1

    @pytest.mark.parametrize("B,steps,W,seed", [(3, 2, 2, 0), (2, 3, 2, 7), (2, 2, 4, 3)])
    def test_other_configs(self, B, steps, W, seed):
        r = compare_with_symbolic(steps, ModelParams(B=B, W=W, T=steps, seed=seed))
        assert r.passed, r
        assert r.n_branches == B ** steps

    def test_full_neuron_layout(self):
        assert compare_with_symbolic(2, ModelParams(B=2, W=2, T=2, seed=4), variant="full")

    def test_support_cap(self):
        with pytest.raises(CapacityError):
            compare_with_symbolic(5, ModelParams(B=4, W=2, T=5), max_support=100)


class TestRebase:
    SIGMA = np.array([[0, -1], [1, 0]])

    def test_move_rotation_forward(self):
        r = rebase_demo([np.eye(2), self.SIGMA], 1)
        assert r
        assert np.allclose(r.transformed[0], self.SIGMA) and np.allclose(r.transformed[1], np.eye(2))

    def test_identity_sequence_unchanged(self):
        r = rebase_demo([np.eye(2)] * 4, 3)
        assert all(np.allclose(U, np.eye(2)) for U in r.transformed)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(1, 8), st.integers(0, 2**32 - 1))
    def test_random_sequences(self, n, seed):
        rng = np.random.default_rng(seed)
        seq = [random_unitary(2, rng) for _ in range(n)]
        for q in range(1, n + 1):
            r = rebase_demo(seq, q)
            assert r.max_product_dev < 1e-12 and r.max_step_dev < 1e-12

    def test_rejects_non_unitary(self):
        with pytest.raises(InputError):
            rebase_demo([np.eye(2), [[1, 1], [0, 1]]], 1)

    def test_rejects_bad_position(self):
        with pytest.raises(InputError):
            rebase_demo([np.eye(2)], 2)
        with pytest.raises(InputError):
            rebase_demo([], 1)
