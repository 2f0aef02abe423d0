import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eprqkd.quantum import (
    BellKind,
    DensityMatrix,
    PauliCode,
    PureState,
    QubitIndexError,
    apply_1q,
    apply_cnot,
    bell_measure,
    bell_probabilities,
    bell_state,
    identify_bell,
    insert_qubit,
    ket,
    make_rng,
    measure_qubit,
    partial_trace,
    project_qubit,
    same_up_to_global_phase,
    split_off,
    tensor,
)

H = 1 / np.sqrt(2)
K = BellKind


def random_state(seed, n):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return PureState(n, v / np.linalg.norm(v))


class TestPureState:
    def test_rejects_unnormalized(self):
        with pytest.raises(ValueError, match="normalized"):
            PureState(1, [1, 1])

    def test_rejects_wrong_length(self):
        with pytest.raises(ValueError, match="amplitudes"):
            PureState(2, [1, 0])

    def test_rejects_too_many_qubits(self):
        with pytest.raises(ValueError):
            PureState(5, np.eye(32)[0])

    def test_amplitudes_are_read_only(self):
        s = ket("0")
        with pytest.raises(ValueError):
            s.amplitudes[0] = 0

    def test_from_amplitudes_infers_size(self):
        assert PureState.from_amplitudes([0, 0, 0, 1]).num_qubits == 2


class TestBellStates:
    def test_psi_minus(self):
        np.testing.assert_allclose(
            bell_state(K.PSI_MINUS).amplitudes, [0, 0.7071067811865476, -0.7071067811865476, 0], atol=1e-15
        )

    def test_phi_plus(self):
        np.testing.assert_allclose(bell_state(K.PHI_PLUS).amplitudes, [H, 0, 0, H], atol=1e-15)

    @pytest.mark.parametrize("kind", list(BellKind))
    def test_normalized(self, kind):
        assert bell_state(kind).norm() == pytest.approx(1, abs=1e-12)

    def test_mutually_orthogonal(self):
        m = np.array([bell_state(k).amplitudes for k in BellKind])
        np.testing.assert_allclose(m @ m.conj().T, np.eye(4), atol=1e-15)

    def test_identify(self):
        assert identify_bell(ket("00")) is None
        for kind in BellKind:
            assert identify_bell(bell_state(kind)) is kind


class TestTensor:
    def test_bell_with_zero(self):
        out = tensor(bell_state(K.PSI_MINUS), ket("0"))
        np.testing.assert_allclose(out.amplitudes, [0, 0, H, 0, -H, 0, 0, 0], atol=1e-15)

    def test_basis(self):
        np.testing.assert_array_equal(tensor(ket("0"), ket("1")).amplitudes, [0, 1, 0, 0])

    def test_size_limit(self):
        with pytest.raises(ValueError):
            tensor(bell_state(K.PSI_MINUS), ket("000"))


class TestGates:
    def test_x_on_psi_minus_gives_phi_minus(self):
        assert same_up_to_global_phase(apply_1q(bell_state(K.PSI_MINUS), 2, PauliCode.X), bell_state(K.PHI_MINUS))

    def test_iy_on_phi_minus_gives_psi_plus(self):
        assert same_up_to_global_phase(apply_1q(bell_state(K.PHI_MINUS), 2, PauliCode.IY), bell_state(K.PSI_PLUS))

    def test_iy_on_phi_plus_gives_psi_minus(self):
        assert same_up_to_global_phase(apply_1q(bell_state(K.PHI_PLUS), 2, PauliCode.IY), bell_state(K.PSI_MINUS))

    def test_identity_is_exact(self):
        s = random_state(3, 3)
        assert np.array_equal(apply_1q(s, 2, PauliCode.ID).amplitudes, s.amplitudes)

    def test_iy_matrix(self):
        np.testing.assert_array_equal(PauliCode.IY.matrix, [[0, 1], [-1, 0]])

    def test_qubit_one_is_most_significant(self):
        assert np.array_equal(apply_1q(ket("00"), 1, PauliCode.X).amplitudes, ket("10").amplitudes)

    def test_bad_index(self):
        with pytest.raises(QubitIndexError):
            apply_1q(ket("0"), 2, PauliCode.X)
        with pytest.raises(QubitIndexError):
            apply_cnot(ket("00"), 1, 1)

    def test_cnot_ancilla_on_psi_minus(self):
        out = apply_cnot(tensor(bell_state(K.PSI_MINUS), ket("0")), 2, 3)
        expected = (ket("011").amplitudes - ket("100").amplitudes) * H
        assert np.max(np.abs(out.amplitudes - expected)) <= 1e-12

    def test_cnot_ancilla_on_phi_minus(self):
        out = apply_cnot(tensor(bell_state(K.PHI_MINUS), ket("0")), 2, 3)
        expected = (ket("000").amplitudes - ket("111").amplitudes) * H
        assert np.max(np.abs(out.amplitudes - expected)) <= 1e-12

    def test_cnot_on_zero_zero(self):
        assert np.array_equal(apply_cnot(ket("00"), 1, 2).amplitudes, ket("00").amplitudes)

    def test_cnot_reversed_control(self):
        assert np.array_equal(apply_cnot(ket("01"), 2, 1).amplitudes, ket("11").amplitudes)


class TestBellMeasurement:
    def test_eigenstate(self):
        probs = bell_probabilities(bell_state(K.PSI_MINUS), 1, 2)
        assert probs[K.PSI_MINUS] == pytest.approx(1, abs=1e-12)
        assert sum(probs[k] for k in BellKind if k is not K.PSI_MINUS) <= 1e-12

    def test_cnot_state_probabilities(self):
        s = apply_cnot(tensor(bell_state(K.PSI_MINUS), ket("0")), 2, 3)
        probs = bell_probabilities(s, 1, 2)
        assert probs[K.PSI_MINUS] == pytest.approx(0.5, abs=1e-12)
        assert probs[K.PSI_PLUS] == pytest.approx(0.5, abs=1e-12)
        assert probs[K.PHI_MINUS] <= 1e-12 and probs[K.PHI_PLUS] <= 1e-12

    def test_cnot_state_residual_is_plus_minus(self):
        # Eve's qubit collapses to |+> on Ψ− and |-> on Ψ+
        s = apply_cnot(tensor(bell_state(K.PSI_MINUS), ket("0")), 2, 3)
        plus = PureState(1, [H, H])
        minus = PureState(1, [H, -H])
        seen = set()
        for seed in range(40):
            outcome, residual = bell_measure(s, 1, 2, make_rng(seed))
            assert outcome in (K.PSI_MINUS, K.PSI_PLUS)
            eve = split_off(residual, (1, 2), bell_state(outcome))
            assert same_up_to_global_phase(eve, plus if outcome is K.PSI_MINUS else minus)
            seen.add(outcome)
        assert seen == {K.PSI_MINUS, K.PSI_PLUS}

    @pytest.mark.parametrize("seed", range(5))
    def test_eigenstate_any_seed(self, seed):
        outcome, residual = bell_measure(bell_state(K.PSI_MINUS), 1, 2, make_rng(seed))
        assert outcome is K.PSI_MINUS
        assert same_up_to_global_phase(residual, bell_state(K.PSI_MINUS))

    def test_frequencies_match_born(self):
        s = random_state(11, 3)
        exact = bell_probabilities(s, 1, 3)
        rng = make_rng(7)
        counts = dict.fromkeys(BellKind, 0)
        for _ in range(10_000):
            counts[bell_measure(s, 1, 3, rng)[0]] += 1
        for kind in BellKind:
            assert abs(counts[kind] / 10_000 - exact[kind]) <= 0.02

    def test_non_adjacent_pair_residual(self):
        s = tensor(ket("1"), bell_state(K.PHI_PLUS))
        s = insert_qubit(PureState(3, s.amplitudes), 2, ket("0"))
        outcome, residual = bell_measure(s, 3, 4, make_rng(0))
        assert outcome is K.PHI_PLUS
        assert same_up_to_global_phase(residual, s)


class TestSingleQubitMeasurement:
    def test_project(self):
        p, post = project_qubit(ket("10"), 1, 0)
        assert p == 0 and post is None
        p, post = project_qubit(bell_state(K.PHI_PLUS), 2, 1)
        assert p == pytest.approx(0.5)
        assert same_up_to_global_phase(post, ket("11"))

    def test_measure_deterministic(self):
        bit, post = measure_qubit(ket("01"), 2, make_rng(0))
        assert bit == 1 and np.array_equal(post.amplitudes, ket("01").amplitudes)


class TestSplitAndInsert:
    def test_roundtrip(self):
        s = random_state(5, 2)
        q = PureState(1, [0.6, 0.8j])
        for pos in (1, 2, 3):
            joined = insert_qubit(s, pos, q)
            assert same_up_to_global_phase(split_off(joined, (pos,), q), s)

    def test_split_rejects_entangled(self):
        with pytest.raises(ValueError, match="product factor"):
            split_off(bell_state(K.PSI_MINUS), (1,), ket("0"))


class TestPartialTrace:
    def test_psi_minus_marginal(self):
        np.testing.assert_allclose(partial_trace(bell_state(K.PSI_MINUS), {2}).entries, np.eye(2) / 2, atol=1e-15)

    @pytest.mark.parametrize("kind", [K.PSI_MINUS, K.PHI_MINUS])
    def test_cnot_ancilla_marginal(self, kind):
        s = apply_cnot(tensor(bell_state(kind), ket("0")), 2, 3)
        np.testing.assert_allclose(partial_trace(s, {3}).entries, np.eye(2) / 2, atol=1e-12)

    def test_product(self):
        np.testing.assert_array_equal(partial_trace(ket("01"), {1}).entries, [[1, 0], [0, 0]])

    def test_density_matrix_path_matches_pure(self):
        s = random_state(9, 3)
        rho = DensityMatrix.from_pure(s)
        for keep in ({1}, {2}, {3}, {1, 3}, {2, 3}):
            np.testing.assert_allclose(partial_trace(rho, keep).entries, partial_trace(s, keep).entries, atol=1e-12)

    def test_density_matrix_validation(self):
        with pytest.raises(ValueError, match="Hermitian"):
            DensityMatrix(1, [[0.5, 1], [0, 0.5]])
        with pytest.raises(ValueError, match="trace"):
            DensityMatrix(1, np.eye(2))
        with pytest.raises(ValueError, match="semidefinite"):
            DensityMatrix(1, [[1.5, 0], [0, -0.5]])


class TestGlobalPhase:
    def test_negated(self):
        neg = PureState(2, -bell_state(K.PSI_PLUS).amplitudes)
        assert same_up_to_global_phase(bell_state(K.PSI_PLUS), neg)

    def test_orthogonal(self):
        assert not same_up_to_global_phase(bell_state(K.PSI_PLUS), bell_state(K.PHI_PLUS))


class TestRng:
    def test_party_streams_differ(self):
        assert make_rng(1, "alice").random() != make_rng(1, "bob").random()

    def test_repeatable(self):
        assert make_rng(5, "eve").random() == make_rng(5, "eve").random()

    def test_seed_range(self):
        with pytest.raises(ValueError):
            make_rng(-1)


states = st.integers(1, 4).flatmap(
    lambda n: st.tuples(st.just(n), st.integers(0, 2**32 - 1))
).map(lambda t: random_state(t[1], t[0]))


@settings(max_examples=60, deadline=None)
@given(states, st.data())
def test_gates_preserve_norm(s, data):
    q = data.draw(st.integers(1, s.num_qubits))
    op = data.draw(st.sampled_from(list(PauliCode)))
    assert abs(apply_1q(s, q, op).norm() - 1) <= 1e-12


@settings(max_examples=60, deadline=None)
@given(states, st.data())
def test_pauli_involutions(s, data):
    q = data.draw(st.integers(1, s.num_qubits))
    assert np.array_equal(apply_1q(apply_1q(s, q, PauliCode.X), q, PauliCode.X).amplitudes, s.amplitudes)
    twice = apply_1q(apply_1q(s, q, PauliCode.IY), q, PauliCode.IY)
    np.testing.assert_allclose(twice.amplitudes, -s.amplitudes, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(states.filter(lambda s: s.num_qubits >= 2), st.data())
def test_born_completeness(s, data):
    a, b = data.draw(st.permutations(range(1, s.num_qubits + 1)))[:2]
    assert abs(sum(bell_probabilities(s, a, b).values()) - 1) <= 1e-12


@settings(max_examples=40, deadline=None)
@given(states.filter(lambda s: s.num_qubits >= 2), st.data())
def test_cnot_is_involution(s, data):
    c, t = data.draw(st.permutations(range(1, s.num_qubits + 1)))[:2]
    assert np.array_equal(apply_cnot(apply_cnot(s, c, t), c, t).amplitudes, s.amplitudes)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(list(BellKind)), st.integers(0, 2), st.integers(0, 2**32 - 1))
def test_zero_probability_outcomes_never_drawn(kind, extra, seed):
    joint = bell_state(kind) if extra == 0 else tensor(bell_state(kind), random_state(seed, extra))
    outcome, _ = bell_measure(joint, 1, 2, make_rng(seed))
    assert outcome is kind
