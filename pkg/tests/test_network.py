import numpy as np
import pytest

from eprqkd.network import (
    Center,
    Honest,
    InsufficientPairs,
    MislabelResult,
    Mispair,
    MitmRelay,
    QuantumFile,
    center_information,
    entanglement_swap,
    exact_forbidden_probability,
    exact_round_prediction,
    request_correlation,
    run_network_session,
)
from eprqkd.protocol import OpSetVariant, SessionConfig
from eprqkd.quantum import (
    BellKind,
    bell_probabilities,
    bell_state,
    make_rng,
    partial_trace,
    same_up_to_global_phase,
    tensor,
)

K = BellKind
LIE = MislabelResult({K.PSI_PLUS: K.PHI_PLUS})


def center_with(*users, count=10):
    c = Center()
    for u in users:
        c.register(u, count)
    return c


class TestSwap:
    def test_uniform(self):
        probs = bell_probabilities(tensor(bell_state(K.PSI_MINUS), bell_state(K.PSI_MINUS)), 2, 4)
        assert all(abs(p - 0.25) <= 1e-12 for p in probs.values())

    @pytest.mark.parametrize("seed", range(16))
    def test_shared_equals_outcome(self, seed):
        outcome, shared = entanglement_swap(bell_state(K.PSI_MINUS), bell_state(K.PSI_MINUS), make_rng(seed))
        assert same_up_to_global_phase(shared, bell_state(outcome))


class TestQuantumFile:
    def test_take_consumes(self):
        f = QuantumFile.prepare("alice", 2)
        f.take()
        assert len(f) == 1 and f.consumed == 1
        f.take()
        with pytest.raises(InsufficientPairs):
            f.take()

    def test_unknown_user(self):
        with pytest.raises(InsufficientPairs):
            Center().file("dave")


class TestRequestCorrelation:
    def test_honest(self):
        links = request_correlation(center_with("alice", "bob", count=100), "alice", "bob", 100, Honest(), make_rng(0))
        assert len(links) == 100
        assert all(l.announcement.announced is l.announcement.actual for l in links)
        assert all(same_up_to_global_phase(l.state, bell_state(l.announcement.actual)) for l in links)

    def test_mislabel(self):
        links = request_correlation(center_with("alice", "bob", count=60), "alice", "bob", 60, LIE, make_rng(0))
        lied = [l.announcement for l in links if l.announcement.actual is K.PSI_PLUS]
        assert lied and all(a.announced is K.PHI_PLUS for a in lied)

    def test_mispair_alice_entangled_with_charley(self):
        c = center_with("alice", "bob", "charley")
        for link in request_correlation(c, "alice", "bob", 10, Mispair("charley"), make_rng(0)):
            assert link.announcement.partners == ("alice", "charley")
            # (A, C) is a pure Bell pair, so A-B is a product of maximally mixed qubits
            ab = partial_trace(link.state, {1, 3}).entries
            assert abs(ab - 0.25 * np.eye(4)).max() <= 1e-12

    def test_not_enough_pairs(self):
        c = center_with("alice", "bob", count=3)
        with pytest.raises(InsufficientPairs):
            request_correlation(c, "alice", "bob", 4, Honest(), make_rng(0))

    def test_mitm_needs_two_charley_pairs_per_round(self):
        c = center_with("alice", "bob", "charley", count=5)
        with pytest.raises(InsufficientPairs):
            request_correlation(c, "alice", "bob", 5, MitmRelay(), make_rng(0))


class TestExactPredictions:
    @pytest.mark.parametrize("bit", [0, 1])
    def test_lie_caught_with_iy(self, bit):
        assert exact_forbidden_probability(K.PSI_PLUS, K.PHI_PLUS, bit) == pytest.approx(1, abs=1e-12)

    @pytest.mark.parametrize("bit", [0, 1])
    def test_lie_missed_with_x_only(self, bit):
        assert exact_forbidden_probability(K.PSI_PLUS, K.PHI_PLUS, bit, OpSetVariant.SIGMA_X_ONLY) <= 1e-12

    def test_reverse_lie_goes_unnoticed(self):
        # announcing Ψ+ for an actual Φ+ swaps the two allowed outcomes instead
        for bit in (0, 1):
            assert exact_forbidden_probability(K.PHI_PLUS, K.PSI_PLUS, bit) <= 1e-12
        pred = exact_round_prediction(MislabelResult({K.PHI_PLUS: K.PSI_PLUS}))
        assert pred.agreement == pytest.approx(0.75, abs=1e-12)

    def test_honest(self):
        pred = exact_round_prediction(Honest())
        assert pred.forbidden <= 1e-12 and pred.agreement == pytest.approx(1)
        assert all(p == pytest.approx(0.25, abs=1e-12) for p in pred.outcomes.values())

    def test_mispair(self):
        pred = exact_round_prediction(Mispair())
        assert pred.forbidden == pytest.approx(0.5, abs=1e-12)
        assert pred.agreement == pytest.approx(0.5, abs=1e-12)

    def test_lie_quarter_of_rounds(self):
        assert exact_round_prediction(LIE).forbidden == pytest.approx(0.25, abs=1e-12)


class TestNetworkSession:
    def test_honest(self):
        report = run_network_session(SessionConfig(rounds=2000, seed=4))
        assert report.detection_count == 0
        assert report.key_sender == report.key_receiver
        assert {a.announced for a in report.announcements} == set(BellKind)
        assert abs(center_information(report) - 0.5) <= 0.04

    def test_reversed_key_with_x_only(self):
        report = run_network_session(SessionConfig(rounds=2000, seed=4), LIE, OpSetVariant.SIGMA_X_ONLY)
        assert report.detection_count == 0
        falsified = set(report.falsified_rounds)
        assert falsified
        for rec in report.records:
            expected = 1 - rec.sender_bit if rec.round_index in falsified else rec.sender_bit
            assert rec.decoded_bit == expected
        assert abs(center_information(report) - 0.5) <= 0.04

    def test_lie_aborts_with_table(self):
        report = run_network_session(SessionConfig(rounds=2000, seed=4), LIE)
        assert report.aborted
        assert report.records[-1].round_index == report.falsified_rounds[0]

    def test_mispair(self):
        report = run_network_session(SessionConfig(rounds=2000, seed=4, abort_threshold=2000), Mispair())
        assert abs(report.forbidden_rate - 0.5) <= 0.04

    def test_mitm(self):
        report = run_network_session(SessionConfig(rounds=1000, seed=4), MitmRelay())
        assert report.detection_count == 0
        assert [r.guessed_bit for r in report.relay_log] == [r.sender_bit for r in report.records]
        assert center_information(report) == 1.0

    def test_substitute_file_is_separate(self):
        report = run_network_session(SessionConfig(rounds=50, seed=1, abort_threshold=50), Mispair("dave"))
        assert {a.partners for a in report.announcements} == {("alice", "dave")}


def test_file_conservation():
    c = center_with("alice", "bob", "charley", count=40)
    request_correlation(c, "alice", "bob", 15, MitmRelay(), make_rng(0))
    assert (c.file("alice").consumed, c.file("bob").consumed, c.file("charley").consumed) == (15, 15, 30)
    assert len(c.file("alice")) == 25
