"""Eavesdropping strategies that sit on the quantum channel.

A channel sees the joint state after the sender has encoded, together with
the position of the qubit in flight. Active strategies log one ``EveRecord``
per round into ``eve_log``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .protocol import (
    ALICE_QUBIT,
    BOB_QUBIT,
    Direction,
    SessionReport,
    code_table_for,
    decode_round,
    encode_round,
)
from .stats import RoundPrediction
from .quantum import (
    NORM_TOL,
    BellKind,
    DensityMatrix,
    PureState,
    apply_cnot,
    bell_probabilities,
    bell_state,
    insert_qubit,
    ket,
    measure_qubit,
    partial_trace,
    project_qubit,
    split_off,
    tensor,
)


@dataclass
class EveRecord:
    round_index: int
    intercepted_measurement: Union[int, BellKind, None] = None
    ancilla_state: Optional[DensityMatrix] = None
    guessed_bit: Optional[int] = None


class Channel:
    """Perfect channel; subclasses interpose on the qubit in flight."""

    name = "identity"

    def __init__(self) -> None:
        self.eve_log: list[EveRecord] = []

    def transit(
        self, state: PureState, qubit: int, rng: np.random.Generator, round_index: int = 0
    ) -> tuple[PureState, Optional[EveRecord]]:
        return state, None

    def delivered_qubit(self, qubit: int) -> int:
        """Position the receiver should treat as the qubit that arrived."""
        return qubit

    def after_measurement(
        self, residual: PureState, record: Optional[EveRecord], rng: np.random.Generator
    ) -> None:
        """Hook run once the receiver has measured; Eve may act on what she kept."""

    def branches(self, state: PureState, qubit: int) -> list[tuple[float, PureState]]:
        """Exact ensemble ``(probability, delivered state)`` of what transit can produce."""
        return [(1.0, state)]

    def guess_distribution(self, state: PureState, qubit: int) -> Optional[tuple[float, float]]:
        """Exact probabilities of Eve guessing 0 and 1 for an encoded state; ``None`` if she has no records."""
        return None

    def _log(self, record: EveRecord) -> EveRecord:
        self.eve_log.append(record)
        return record


IdentityChannel = Channel


class InterceptResend(Channel):
    """Measure the qubit in the computational basis and resend ``c|0> + d|1>``.

    Eve's guess for the round's bit is her own measurement result.
    """

    name = "intercept_resend"

    def __init__(self, c: complex = 1.0, d: complex = 0.0) -> None:
        super().__init__()
        if abs(abs(c) ** 2 + abs(d) ** 2 - 1) > NORM_TOL:
            raise ValueError(f"fake qubit amplitudes are not normalized: |c|^2+|d|^2 = {abs(c)**2 + abs(d)**2}")
        self.c = complex(c)
        self.d = complex(d)
        self.fake = PureState(1, [self.c, self.d])

    def _resend(self, collapsed: PureState, qubit: int, result: int) -> PureState:
        rest = split_off(collapsed, [qubit], ket(str(result)))
        return insert_qubit(rest, qubit, self.fake)

    def transit(self, state, qubit, rng, round_index=0):
        result, collapsed = measure_qubit(state, qubit, rng)
        record = self._log(EveRecord(round_index, intercepted_measurement=result, guessed_bit=result))
        return self._resend(collapsed, qubit, result), record

    def guess_distribution(self, state, qubit):
        p0, _ = project_qubit(state, qubit, 0)
        return p0, 1 - p0

    def branches(self, state, qubit):
        out = []
        for result in (0, 1):
            p, collapsed = project_qubit(state, qubit, result)
            if collapsed is not None:
                out.append((p, self._resend(collapsed, qubit, result)))
        return out


class CnotAncilla(Channel):
    """Entangle a fresh |0> ancilla with the qubit in flight via CNOT.

    The ancilla is appended as the highest-numbered qubit and stays with Eve.
    After the receiver measures, Eve reads her ancilla in the computational
    basis and uses the result as her guess.
    """

    name = "cnot_ancilla"

    def transit(self, state, qubit, rng, round_index=0):
        out = self._entangle(state, qubit)
        record = self._log(
            EveRecord(round_index, ancilla_state=partial_trace(out, [out.num_qubits]))
        )
        return out, record

    def _entangle(self, state: PureState, qubit: int) -> PureState:
        joined = tensor(state, ket("0"))
        return apply_cnot(joined, qubit, joined.num_qubits)

    def after_measurement(self, residual, record, rng):
        result, _ = measure_qubit(residual, residual.num_qubits, rng)
        record.intercepted_measurement = result
        record.guessed_bit = result

    def branches(self, state, qubit):
        return [(1.0, self._entangle(state, qubit))]

    def guess_distribution(self, state, qubit):
        # Eve reads her ancilla after the receiver's measurement, which cannot
        # change the ancilla's marginal
        diag = partial_trace(self._entangle(state, qubit), [state.num_qubits + 1]).entries.diagonal().real
        return float(diag[0]), float(diag[1])


def transit(
    channel: Channel, joint_state: PureState, transit_qubit: int, rng: np.random.Generator
) -> tuple[PureState, Optional[EveRecord]]:
    return channel.transit(joint_state, transit_qubit, rng)


def eve_reduced_state(channel: Channel) -> DensityMatrix:
    """Eve's ancilla marginal from the most recent round."""
    if not isinstance(channel, CnotAncilla):
        raise TypeError("only the CNOT-ancilla strategy keeps an ancilla")
    if not channel.eve_log:
        raise ValueError("no round has transited the channel yet")
    return channel.eve_log[-1].ancilla_state


def guess_hits(report: SessionReport, eve_log: list[EveRecord]) -> tuple[int, int]:
    """``(correct guesses, guessed rounds)`` of an adversary log against the sent bits."""
    guesses = {r.round_index: r.guessed_bit for r in eve_log if r.guessed_bit is not None}
    hits = [rec.sender_bit == guesses[rec.round_index] for rec in report.records if rec.round_index in guesses]
    return sum(hits), len(hits)


def eve_key_guess_accuracy(report: SessionReport, channel: Channel) -> float:
    """Fraction of rounds where Eve's guess equals the bit the sender encoded.

    Without records Eve can only guess at random, which is reported as 0.5.
    """
    hits, trials = guess_hits(report, channel.eve_log)
    return hits / trials if trials else 0.5


def exact_round_prediction(
    channel: Channel,
    shared_kind: BellKind = BellKind.PSI_MINUS,
    direction: Direction = Direction.BOB_TO_ALICE,
    bit: Optional[int] = None,
) -> RoundPrediction:
    """Exact statistics of one round, averaged over Eve's branches and (unless
    ``bit`` is given) over a uniformly random sender bit."""
    table = code_table_for(shared_kind)
    sender_q = BOB_QUBIT if direction is Direction.BOB_TO_ALICE else ALICE_QUBIT
    bits = (0, 1) if bit is None else (bit,)
    pred = RoundPrediction.empty()
    eve_hits = 0.0
    for b in bits:
        w = 1 / len(bits)
        encoded = encode_round(b, bell_state(shared_kind), sender_q, table)
        guess = channel.guess_distribution(encoded, sender_q)
        if guess is not None:
            eve_hits += w * guess[b]
        for p, delivered in channel.branches(encoded, sender_q):
            for kind, q in bell_probabilities(delivered, ALICE_QUBIT, BOB_QUBIT).items():
                decoded = decode_round(kind, table)
                pred.accumulate(w * p * q, kind, decoded is None, decoded == b)
    if channel.guess_distribution(bell_state(shared_kind), sender_q) is not None:
        pred.eve_accuracy = eve_hits
    return pred


def exact_outcome_distribution(
    channel: Channel,
    shared_kind: BellKind = BellKind.PSI_MINUS,
    direction: Direction = Direction.BOB_TO_ALICE,
    bit: Optional[int] = None,
) -> dict[BellKind, float]:
    """Receiver's Born distribution over Bell outcomes (see ``exact_round_prediction``)."""
    return exact_round_prediction(channel, shared_kind, direction, bit).outcomes


def make_channel(name: str, c: complex = 1.0, d: complex = 0.0) -> Channel:
    if name == "identity":
        return IdentityChannel()
    if name == "intercept_resend":
        return InterceptResend(c, d)
    if name == "cnot_ancilla":
        return CnotAncilla()
    raise ValueError(f"unknown channel strategy {name!r}")
