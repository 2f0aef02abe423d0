"""Two-party key distribution and authentication over pre-shared EPR pairs.

Each round consumes one shared Bell pair. The sender applies one of two local
operations to their half (bit 0 or 1), sends that half to the receiver, and
the receiver Bell-measures both halves. Outcomes outside the agreed encoding
row are forbidden and flag an eavesdropper. Direction alternates in publicly
known fixed-size batches so that both parties get authenticated.

Pair layout inside a round's joint state: Alice holds qubit 1, Bob qubit 2.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from enum import Enum
from typing import TYPE_CHECKING, Optional

import numpy as np

from .quantum import (
    BellKind,
    PauliCode,
    PureState,
    apply_1q,
    bell_measure,
    bell_state,
    identify_bell,
    make_rng,
)

if TYPE_CHECKING:
    from .adversary import Channel, EveRecord

ALICE_QUBIT = 1
BOB_QUBIT = 2


class Direction(Enum):
    BOB_TO_ALICE = "B->A"
    ALICE_TO_BOB = "A->B"

    def __str__(self) -> str:
        return self.value

    @property
    def sender(self) -> str:
        return "bob" if self is Direction.BOB_TO_ALICE else "alice"

    @property
    def receiver(self) -> str:
        return "alice" if self is Direction.BOB_TO_ALICE else "bob"


class OpSetVariant(Enum):
    """Which bit-1 operation the Φ-type rows use."""

    TABLE_I = "paper_table_1"
    SIGMA_X_ONLY = "sigma_x_only"

    def __str__(self) -> str:
        return self.value


# Bit-1 operation per shared kind. Ψ rows flip with X; Φ rows use iY so that a
# center mislabelling Ψ+ as Φ+ cannot go unnoticed.
_BIT_ONE_OP = {
    BellKind.PSI_MINUS: PauliCode.X,
    BellKind.PSI_PLUS: PauliCode.X,
    BellKind.PHI_MINUS: PauliCode.IY,
    BellKind.PHI_PLUS: PauliCode.IY,
}


@dataclass(frozen=True)
class CodeTable:
    kind: BellKind
    op_for_bit: tuple[PauliCode, PauliCode]
    outcome_for_bit: tuple[BellKind, BellKind]
    forbidden: frozenset[BellKind]

    def bit_for_outcome(self, outcome: BellKind) -> Optional[int]:
        if outcome in self.forbidden:
            return None
        return self.outcome_for_bit.index(outcome)


@lru_cache(maxsize=None)
def code_table_for(kind: BellKind, variant: OpSetVariant = OpSetVariant.TABLE_I) -> CodeTable:
    """Encoding row for a shared Bell kind.

    Bit 0 is the identity and leaves the shared state in place; bit 1 maps it
    to the image of the row's second operation, computed from the gate
    algebra rather than looked up.
    """
    one = _BIT_ONE_OP[kind] if variant is OpSetVariant.TABLE_I else PauliCode.X
    image = identify_bell(apply_1q(bell_state(kind), BOB_QUBIT, one))
    if image is None or image is kind:
        raise RuntimeError(f"{one} does not map {kind} to a different Bell state")
    allowed = (kind, image)
    return CodeTable(
        kind=kind,
        op_for_bit=(PauliCode.ID, one),
        outcome_for_bit=allowed,
        forbidden=frozenset(k for k in BellKind if k not in allowed),
    )


def encode_round(bit: int, pair: PureState, sender_qubit: int, table: CodeTable) -> PureState:
    return apply_1q(pair, sender_qubit, table.op_for_bit[bit])


def decode_round(outcome: BellKind, table: CodeTable) -> Optional[int]:
    """Decoded bit, or ``None`` when the outcome is forbidden for this row."""
    return table.bit_for_outcome(outcome)


def direction_for_round(round_index: int, batch_size: int) -> Direction:
    """Batch schedule: rounds 1..n Bob->Alice, n+1..2n Alice->Bob, repeating."""
    batch = (round_index - 1) // batch_size
    return Direction.BOB_TO_ALICE if batch % 2 == 0 else Direction.ALICE_TO_BOB


@dataclass(frozen=True)
class RoundRecord:
    round_index: int
    direction: Direction
    sender_bit: int
    sender_op: PauliCode
    outcome: BellKind
    decoded_bit: Optional[int]
    forbidden: bool

    def __post_init__(self) -> None:
        if self.forbidden != (self.decoded_bit is None):
            raise ValueError("forbidden flag must match absence of decoded bit")


@dataclass(frozen=True)
class SessionConfig:
    rounds: int
    batch_size: int = 100
    shared_kind: BellKind = BellKind.PSI_MINUS
    abort_threshold: int = 0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.rounds <= 0:
            raise ValueError("rounds must be positive")
        if self.batch_size <= 0:
            raise ValueError("batch_size must be positive")
        if self.abort_threshold < 0:
            raise ValueError("abort_threshold must be non-negative")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass
class SessionReport:
    records: list[RoundRecord] = field(default_factory=list)
    key_sender: list[int] = field(default_factory=list)
    key_receiver: list[int] = field(default_factory=list)
    detection_count: int = 0
    aborted: bool = False
    outcome_histogram: Counter = field(default_factory=Counter)

    def add(self, record: RoundRecord) -> None:
        self.records.append(record)
        self.outcome_histogram[record.outcome] += 1
        if record.forbidden:
            self.detection_count += 1
        else:
            self.key_sender.append(record.sender_bit)
            self.key_receiver.append(record.decoded_bit)

    @property
    def rounds_completed(self) -> int:
        return len(self.records)

    @property
    def forbidden_rate(self) -> float:
        return self.detection_count / len(self.records) if self.records else 0.0

    @property
    def agreement(self) -> float:
        """Fraction of key positions where sender and receiver bits match."""
        if not self.key_sender:
            return 1.0
        same = sum(a == b for a, b in zip(self.key_sender, self.key_receiver))
        return same / len(self.key_sender)

    def mutually_authenticated(self) -> bool:
        directions = {r.direction for r in self.records}
        return not self.aborted and self.detection_count == 0 and len(directions) == 2


@dataclass
class PartyStreams:
    """Independent random streams for everyone acting in a session."""

    seed: int
    _cache: dict = field(default_factory=dict, repr=False)

    def __getitem__(self, party: str) -> np.random.Generator:
        if party not in self._cache:
            self._cache[party] = make_rng(self.seed, party)
        return self._cache[party]


def play_round(
    round_index: int,
    state: PureState,
    alice_qubit: int,
    bob_qubit: int,
    direction: Direction,
    table: CodeTable,
    channel: Optional["Channel"],
    streams: PartyStreams,
) -> tuple[RoundRecord, Optional["EveRecord"]]:
    """One encode -> transit -> Bell-measure -> decode round.

    The sender draws their bit from their own stream, the receiver's Bell
    measurement uses the receiver's stream, and any channel actor uses
    ``streams["eve"]``.
    """
    if direction is Direction.BOB_TO_ALICE:
        sender_q, receiver_q = bob_qubit, alice_qubit
    else:
        sender_q, receiver_q = alice_qubit, bob_qubit
    bit = int(streams[direction.sender].random() < 0.5)
    encoded = encode_round(bit, state, sender_q, table)

    eve = None
    delivered_q = sender_q
    if channel is not None:
        encoded, eve = channel.transit(encoded, sender_q, streams["eve"], round_index)
        delivered_q = channel.delivered_qubit(sender_q)

    pair = sorted((receiver_q, delivered_q))
    outcome, residual = bell_measure(encoded, pair[0], pair[1], streams[direction.receiver])
    if channel is not None:
        channel.after_measurement(residual, eve, streams["eve"])

    decoded = decode_round(outcome, table)
    record = RoundRecord(
        round_index=round_index,
        direction=direction,
        sender_bit=bit,
        sender_op=table.op_for_bit[bit],
        outcome=outcome,
        decoded_bit=decoded,
        forbidden=decoded is None,
    )
    return record, eve


def run_session(config: SessionConfig, channel: Optional["Channel"] = None) -> SessionReport:
    """Run ``config.rounds`` rounds over ``channel`` (``None`` is a perfect channel).

    Every random draw comes from streams derived from ``config.seed``, so the
    report is a pure function of the config and the channel strategy. The
    session stops after the round that pushes ``detection_count`` above
    ``abort_threshold``.
    """
    streams = PartyStreams(config.seed)
    table = code_table_for(config.shared_kind)
    report = SessionReport()
    for i in range(1, config.rounds + 1):
        pair = bell_state(config.shared_kind)
        record, _ = play_round(
            i, pair, ALICE_QUBIT, BOB_QUBIT, direction_for_round(i, config.batch_size),
            table, channel, streams,
        )
        report.add(record)
        if report.detection_count > config.abort_threshold:
            report.aborted = True
            break
    return report
