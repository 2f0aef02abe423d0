"""Center-mediated key distribution over stored EPR halves.

Every user deposits one half of each of their Ψ− pairs with a center, which
keeps them unmeasured in a per-user quantum file. To correlate two users the
center Bell-measures one stored half from each (entanglement swapping) and
announces the outcome; the users then run the two-party protocol on the
swapped pair using the announced kind's encoding row.

A cheating center can lie about the outcome, swap with the wrong user, or put
an accomplice (Charley) in the middle of both links.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Union

import numpy as np

from .adversary import Channel, EveRecord, guess_hits
from .protocol import (
    CodeTable,
    Direction,
    OpSetVariant,
    PartyStreams,
    SessionConfig,
    SessionReport,
    code_table_for,
    decode_round,
    direction_for_round,
    encode_round,
    play_round,
)
from .quantum import (
    BellKind,
    PureState,
    apply_matrix,
    bell_measure,
    bell_probabilities,
    bell_state,
    identify_bell,
    split_off,
    tensor,
)
from .stats import RoundPrediction

USER_QUBIT = 1
CENTER_QUBIT = 2

_PAULI_FRAMES = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
    np.array([[0, 1], [-1, 0]], dtype=complex),
)


class InsufficientPairs(RuntimeError):
    pass


@dataclass
class QuantumFile:
    """One user's stored pairs; qubit 1 is the user's half, qubit 2 the center's."""

    owner: str
    pairs: list[PureState] = field(default_factory=list)
    consumed: int = 0

    @classmethod
    def prepare(cls, owner: str, count: int) -> QuantumFile:
        return cls(owner, [bell_state(BellKind.PSI_MINUS) for _ in range(count)])

    def __len__(self) -> int:
        return len(self.pairs)

    def take(self) -> PureState:
        if not self.pairs:
            raise InsufficientPairs(f"quantum file of {self.owner!r} is empty")
        self.consumed += 1
        return self.pairs.pop(0)


@dataclass(frozen=True)
class Honest:
    name = "honest"


@dataclass(frozen=True)
class MislabelResult:
    lie_map: Mapping[BellKind, BellKind]
    name = "mislabel"

    def announce(self, actual: BellKind) -> BellKind:
        return self.lie_map.get(actual, actual)


@dataclass(frozen=True)
class Mispair:
    substitute_user: str = "charley"
    name = "mispair"


@dataclass(frozen=True)
class MitmRelay:
    charley: str = "charley"
    name = "mitm"


CenterStrategy = Union[Honest, MislabelResult, Mispair, MitmRelay]


@dataclass(frozen=True)
class SwapAnnouncement:
    pair_index: int
    announced: BellKind
    actual: BellKind  # analysis only; users never see it
    partners: tuple[str, str]


@dataclass
class Correlation:
    """What one announced swap leaves behind for a round.

    ``state`` holds every qubit still in play; the users' qubits sit at
    ``alice_qubit``/``bob_qubit``. Under the relay strategy ``relay`` gives
    Charley's (Alice-side, Bob-side) qubit positions.
    """

    announcement: SwapAnnouncement
    state: PureState
    alice_qubit: int
    bob_qubit: int
    relay: Optional[tuple[int, int]] = None


class Center:
    def __init__(self, files: Optional[dict[str, QuantumFile]] = None) -> None:
        self.files = files or {}

    def register(self, user: str, count: int) -> QuantumFile:
        self.files[user] = QuantumFile.prepare(user, count)
        return self.files[user]

    def file(self, user: str) -> QuantumFile:
        try:
            return self.files[user]
        except KeyError:
            raise InsufficientPairs(f"no quantum file for {user!r}") from None


def entanglement_swap(
    pair_a: PureState, pair_b: PureState, rng: np.random.Generator
) -> tuple[BellKind, PureState]:
    """Bell-measure the center-held halves (qubit 2 of each pair).

    Returns the outcome and the state left on the two user-held qubits,
    ``pair_a``'s user first.
    """
    joint = tensor(pair_a, pair_b)
    outcome, residual = bell_measure(joint, 2, 4, rng)
    return outcome, split_off(residual, [2, 4], bell_state(outcome))


def _reframe(link: PureState, qubit: int, target: BellKind) -> PureState:
    """Local Pauli on ``qubit`` turning a Bell pair into ``target`` (up to phase)."""
    for frame in _PAULI_FRAMES:
        candidate = apply_matrix(link, qubit, frame)
        if identify_bell(candidate) is target:
            return candidate
    raise ValueError("link is not a Bell pair")


def request_correlation(
    center: Center,
    user_a: str,
    user_b: str,
    count: int,
    strategy: CenterStrategy,
    rng: np.random.Generator,
) -> list[Correlation]:
    """Swap ``count`` pairs between ``user_a`` and ``user_b`` under ``strategy``."""
    file_a = center.file(user_a)
    file_b = center.file(user_b)
    partner = None
    if isinstance(strategy, Mispair):
        partner = center.file(strategy.substitute_user)
    elif isinstance(strategy, MitmRelay):
        partner = center.file(strategy.charley)
    needed = {file_a.owner: count, file_b.owner: count}
    if partner is not None:
        factor = 2 if isinstance(strategy, MitmRelay) else 1
        needed[partner.owner] = needed.get(partner.owner, 0) + factor * count
    for owner, n in needed.items():
        if len(center.files[owner]) < n:
            raise InsufficientPairs(f"{owner!r} holds {len(center.files[owner])} pairs, {n} needed")

    out = []
    for i in range(count):
        if isinstance(strategy, (Honest, MislabelResult)):
            actual, shared = entanglement_swap(file_a.take(), file_b.take(), rng)
            announced = strategy.announce(actual) if isinstance(strategy, MislabelResult) else actual
            ann = SwapAnnouncement(i, announced, actual, (user_a, user_b))
            out.append(Correlation(ann, shared, 1, 2))
        elif isinstance(strategy, Mispair):
            # Alice ends up entangled with the substitute; Bob's pair never
            # leaves the center, so his half stays tied to the stored half.
            actual, shared = entanglement_swap(file_a.take(), partner.take(), rng)
            state = tensor(shared, file_b.take())  # (A, C, B, B_center)
            ann = SwapAnnouncement(i, actual, actual, (user_a, partner.owner))
            out.append(Correlation(ann, state, 1, 3))
        else:
            k1, left = entanglement_swap(file_a.take(), partner.take(), rng)
            k2, right = entanglement_swap(partner.take(), file_b.take(), rng)
            right = _reframe(right, 1, k1)
            state = tensor(left, right)  # (A, C_a, C_b, B)
            ann = SwapAnnouncement(i, k1, k1, (user_a, partner.owner))
            out.append(Correlation(ann, state, 1, 4, relay=(2, 3)))
    return out


class RelayChannel(Channel):
    """Charley sitting on both links: Bell-measure, decode, re-encode, forward.

    Qubit layout is (Alice, Charley-on-Alice-link, Charley-on-Bob-link, Bob).
    """

    name = "mitm_relay"

    def __init__(self, tables: list[CodeTable], alice_side: int = 2, bob_side: int = 3) -> None:
        super().__init__()
        self.tables = tables
        # sender qubit -> (Charley's receiving half, Charley's forwarding half)
        self._route = {1: (alice_side, bob_side), 4: (bob_side, alice_side)}

    def delivered_qubit(self, qubit: int) -> int:
        return self._route[qubit][1]

    def transit(self, state, qubit, rng, round_index=0):
        inside, forward = self._route[qubit]
        table = self.tables[round_index - 1]
        pair = sorted((qubit, inside))
        outcome, residual = bell_measure(state, pair[0], pair[1], rng)
        bit = decode_round(outcome, table)
        record = EveRecord(round_index, intercepted_measurement=outcome, guessed_bit=bit)
        self.eve_log.append(record)
        relayed = 0 if bit is None else bit
        return encode_round(relayed, residual, forward, table), record


@dataclass
class NetworkReport(SessionReport):
    strategy: CenterStrategy = field(default_factory=Honest)
    variant: OpSetVariant = OpSetVariant.TABLE_I
    announcements: list[SwapAnnouncement] = field(default_factory=list)
    relay_log: list[EveRecord] = field(default_factory=list)

    @property
    def falsified_rounds(self) -> list[int]:
        """Round indices whose announcement differed from the actual swap outcome."""
        return [a.pair_index + 1 for a in self.announcements if a.announced is not a.actual]


def run_network_session(
    config: SessionConfig,
    strategy: CenterStrategy = Honest(),
    variant: OpSetVariant = OpSetVariant.TABLE_I,
    alice: str = "alice",
    bob: str = "bob",
) -> NetworkReport:
    """Prepare files, correlate Alice and Bob through the center, run the rounds.

    Each round's encoding row comes from the announced kind. ``config.shared_kind``
    is unused here; the center's outcomes decide it.
    """
    streams = PartyStreams(config.seed)
    center = Center()
    center.register(alice, config.rounds)
    center.register(bob, config.rounds)
    if isinstance(strategy, Mispair):
        center.register(strategy.substitute_user, config.rounds)
    elif isinstance(strategy, MitmRelay):
        center.register(strategy.charley, 2 * config.rounds)

    links = request_correlation(center, alice, bob, config.rounds, strategy, streams["center"])
    tables = [code_table_for(link.announcement.announced, variant) for link in links]
    relay = RelayChannel(tables) if isinstance(strategy, MitmRelay) else None

    report = NetworkReport(strategy=strategy, variant=variant)
    report.announcements = [link.announcement for link in links]
    for i, (link, table) in enumerate(zip(links, tables), start=1):
        record, _ = play_round(
            i, link.state, link.alice_qubit, link.bob_qubit,
            direction_for_round(i, config.batch_size), table, relay, streams,
        )
        report.add(record)
        if report.detection_count > config.abort_threshold:
            report.aborted = True
            break
    if relay is not None:
        report.relay_log = relay.eve_log
    return report


def _center_guess(kind: BellKind) -> int:
    # any fixed function of the swap outcome; none can beat chance
    return 0 if kind in (BellKind.PSI_MINUS, BellKind.PSI_PLUS) else 1


def center_guess_hits(report: NetworkReport) -> tuple[int, int]:
    """``(correct guesses, rounds)`` for the center's best guess of each sent bit.

    An honest or lying center only has its swap outcomes; a relaying center
    has Charley's decoded bits.
    """
    if isinstance(report.strategy, MitmRelay):
        return guess_hits(report, report.relay_log)
    guesses = {a.pair_index + 1: _center_guess(a.actual) for a in report.announcements}
    hits = [rec.sender_bit == guesses[rec.round_index] for rec in report.records]
    return sum(hits), len(hits)


def center_information(report: NetworkReport) -> float:
    """Accuracy of the center's best bit guess (0.5 when there is nothing to guess)."""
    hits, trials = center_guess_hits(report)
    return hits / trials if trials else 0.5


def exact_forbidden_probability(
    actual: BellKind, announced: BellKind, bit: int, variant: OpSetVariant = OpSetVariant.TABLE_I
) -> float:
    """Born probability that a round on a pair that is really ``actual``, but
    encoded with the row for ``announced``, ends in a forbidden outcome."""
    table = code_table_for(announced, variant)
    state = encode_round(bit, bell_state(actual), 2, table)
    probs = bell_probabilities(state, 1, 2)
    return sum(probs[k] for k in table.forbidden)


def exact_round_prediction(
    strategy: CenterStrategy = Honest(),
    variant: OpSetVariant = OpSetVariant.TABLE_I,
    direction: Direction = Direction.BOB_TO_ALICE,
) -> RoundPrediction:
    """Exact per-round statistics as seen by the users.

    The swap outcome is uniform over the four kinds (Born rule on Ψ−⊗Ψ−) and
    the sender's bit is uniform. For the relay strategy the users' view is
    predicted to be the honest one, which is what the attack achieves.
    """
    pred = RoundPrediction.empty()
    for actual in BellKind:
        for bit in (0, 1):
            w = 1 / 8
            if isinstance(strategy, Mispair):
                table = code_table_for(actual, variant)
                state = tensor(bell_state(actual), bell_state(BellKind.PSI_MINUS))
                alice_q, bob_q = 1, 3
            else:
                announced = strategy.announce(actual) if isinstance(strategy, MislabelResult) else actual
                table = code_table_for(announced, variant)
                state = bell_state(actual)
                alice_q, bob_q = 1, 2
            sender_q = bob_q if direction is Direction.BOB_TO_ALICE else alice_q
            encoded = encode_round(bit, state, sender_q, table)
            for kind, q in bell_probabilities(encoded, alice_q, bob_q).items():
                decoded = decode_round(kind, table)
                pred.accumulate(w * q, kind, decoded is None, decoded == bit)
    return pred
