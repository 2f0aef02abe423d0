"""Exact state-vector simulation for registers of 1 to 4 qubits.

Basis convention is big-endian: amplitude index ``i`` encodes the ket
``|b1 b2 ... bn>`` with ``b1`` the most significant bit of ``i``. Qubits are
addressed 1-based by position, matching left-to-right ket notation.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

MAX_QUBITS = 4
NORM_TOL = 1e-12
PHASE_TOL = 1e-10
PSD_TOL = 1e-10
ZERO_PROB = 1e-14

_SQRT_HALF = 1 / np.sqrt(2)


class QubitIndexError(IndexError):
    """A qubit position is out of range or repeated."""


class BellKind(Enum):
    """The four Bell states. Member order is the cumulative sampling order."""

    PSI_MINUS = "psi-"
    PSI_PLUS = "psi+"
    PHI_MINUS = "phi-"
    PHI_PLUS = "phi+"

    @property
    def vector(self) -> np.ndarray:
        return _BELL_VECTORS[self]

    @property
    def symbol(self) -> str:
        return _BELL_SYMBOLS[self]

    def __str__(self) -> str:
        return self.value


_BELL_VECTORS = {
    BellKind.PSI_MINUS: np.array([0, _SQRT_HALF, -_SQRT_HALF, 0], dtype=complex),
    BellKind.PSI_PLUS: np.array([0, _SQRT_HALF, _SQRT_HALF, 0], dtype=complex),
    BellKind.PHI_MINUS: np.array([_SQRT_HALF, 0, 0, -_SQRT_HALF], dtype=complex),
    BellKind.PHI_PLUS: np.array([_SQRT_HALF, 0, 0, _SQRT_HALF], dtype=complex),
}
for _v in _BELL_VECTORS.values():
    _v.setflags(write=False)

_BELL_SYMBOLS = {
    BellKind.PSI_MINUS: "Ψ−",
    BellKind.PSI_PLUS: "Ψ+",
    BellKind.PHI_MINUS: "Φ−",
    BellKind.PHI_PLUS: "Φ+",
}


class PauliCode(Enum):
    """Local encoding operations: identity, bit flip, and i*sigma_y."""

    ID = "I"
    X = "X"
    IY = "iY"

    @property
    def matrix(self) -> np.ndarray:
        return _PAULI_MATRICES[self]

    def __str__(self) -> str:
        return self.value


_PAULI_MATRICES = {
    PauliCode.ID: np.array([[1, 0], [0, 1]], dtype=complex),
    PauliCode.X: np.array([[0, 1], [1, 0]], dtype=complex),
    PauliCode.IY: np.array([[0, 1], [-1, 0]], dtype=complex),
}
for _m in _PAULI_MATRICES.values():
    _m.setflags(write=False)


def make_rng(seed: int, party: str | None = None) -> np.random.Generator:
    """Deterministic generator for ``seed``, optionally sub-seeded per party.

    The party label is folded into the numpy ``SeedSequence`` spawn key as its
    CRC-32, so ``(seed, "alice")`` and ``(seed, "bob")`` give independent
    streams while repeated calls with the same pair give identical ones.
    """
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    spawn_key = () if party is None else (zlib.crc32(party.encode("utf-8")),)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=spawn_key)))


@dataclass(frozen=True, eq=False)
class PureState:
    """Unit-norm amplitude vector over ``num_qubits`` qubits."""

    num_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        if not 1 <= self.num_qubits <= MAX_QUBITS:
            raise ValueError(f"num_qubits must be in 1..{MAX_QUBITS}, got {self.num_qubits}")
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size != 2**self.num_qubits:
            raise ValueError(f"expected {2**self.num_qubits} amplitudes, got {amps.size}")
        norm = np.vdot(amps, amps).real
        if abs(norm - 1) > NORM_TOL:
            raise ValueError(f"state is not normalized (squared norm {norm!r})")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_amplitudes(cls, amplitudes: Sequence[complex] | np.ndarray) -> PureState:
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
        n = int(round(np.log2(amps.size))) if amps.size else 0
        return cls(n, amps)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def tensor(self) -> np.ndarray:
        """Amplitudes viewed as an ``(2,) * n`` array, one axis per qubit."""
        return self.amplitudes.reshape((2,) * self.num_qubits)

    def __repr__(self) -> str:
        return f"PureState({self.num_qubits}, {np.array2string(self.amplitudes, precision=4)})"


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, unit-trace, positive semidefinite operator on ``num_qubits`` qubits."""

    num_qubits: int
    entries: np.ndarray

    def __post_init__(self) -> None:
        dim = 2**self.num_qubits
        rho = np.array(self.entries, dtype=complex)
        if rho.shape != (dim, dim):
            raise ValueError(f"expected a {dim}x{dim} matrix, got shape {rho.shape}")
        if not np.allclose(rho, rho.conj().T, atol=NORM_TOL, rtol=0):
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(rho) - 1) > NORM_TOL:
            raise ValueError(f"density matrix trace is {np.trace(rho)!r}, not 1")
        if np.linalg.eigvalsh(rho).min() < -PSD_TOL:
            raise ValueError("density matrix is not positive semidefinite")
        rho.setflags(write=False)
        object.__setattr__(self, "entries", rho)

    @classmethod
    def from_pure(cls, state: PureState) -> DensityMatrix:
        return cls(state.num_qubits, np.outer(state.amplitudes, state.amplitudes.conj()))

    def trace_distance(self, other: DensityMatrix) -> float:
        return float(0.5 * np.abs(np.linalg.eigvalsh(self.entries - other.entries)).sum())


_BELL_STATES = {kind: PureState(2, kind.vector) for kind in BellKind}
_BELL_ORDER = tuple(BellKind)
_BELL_BRA = np.array([kind.vector.conj() for kind in BellKind])


def ket(bits: str) -> PureState:
    """Computational basis state, e.g. ``ket("01")``."""
    amps = np.zeros(2 ** len(bits), dtype=complex)
    amps[int(bits, 2)] = 1
    return PureState(len(bits), amps)


def bell_state(kind: BellKind) -> PureState:
    return _BELL_STATES[kind]


def tensor(a: PureState, b: PureState) -> PureState:
    """Kronecker product; qubits of ``a`` keep the lower positions."""
    n = a.num_qubits + b.num_qubits
    if n > MAX_QUBITS:
        raise ValueError(f"tensor product would have {n} qubits (max {MAX_QUBITS})")
    return PureState(n, np.kron(a.amplitudes, b.amplitudes))


def _check_qubits(state: PureState, *qubits: int) -> None:
    for q in qubits:
        if not 1 <= q <= state.num_qubits:
            raise QubitIndexError(f"qubit {q} out of range 1..{state.num_qubits}")
    if len(set(qubits)) != len(qubits):
        raise QubitIndexError(f"qubit positions must be distinct, got {qubits}")


def apply_matrix(state: PureState, qubit: int, matrix: np.ndarray) -> PureState:
    """Apply an arbitrary 2x2 unitary to one qubit."""
    _check_qubits(state, qubit)
    rows = _to_front(state.tensor(), (qubit - 1,)).reshape(2, -1)
    t = (matrix @ rows).reshape(state.tensor().shape)
    return PureState(state.num_qubits, _from_front(t, (qubit - 1,)).reshape(-1))


def apply_1q(state: PureState, qubit: int, op: PauliCode) -> PureState:
    _check_qubits(state, qubit)
    if op is PauliCode.ID:
        return state
    return apply_matrix(state, qubit, op.matrix)


def apply_cnot(state: PureState, control: int, target: int) -> PureState:
    _check_qubits(state, control, target)
    n = state.num_qubits
    idx = np.arange(2**n)
    cmask = 1 << (n - control)
    tmask = 1 << (n - target)
    perm = np.where(idx & cmask, idx ^ tmask, idx)
    return PureState(n, state.amplitudes[perm])


def _front_order(ndim: int, axes: Sequence[int]) -> list[int]:
    return list(axes) + [i for i in range(ndim) if i not in axes]


def _to_front(t: np.ndarray, axes: Sequence[int]) -> np.ndarray:
    """Transpose so the 0-based ``axes`` come first, others keep their order."""
    order = _front_order(t.ndim, axes)
    return t if order == sorted(order) else t.transpose(order)


def _from_front(t: np.ndarray, axes: Sequence[int]) -> np.ndarray:
    """Inverse of ``_to_front``."""
    order = _front_order(t.ndim, axes)
    inverse = [0] * len(order)
    for i, o in enumerate(order):
        inverse[o] = i
    return t if inverse == order == sorted(order) else t.transpose(inverse)


def _pair_rows(state: PureState, qubit_a: int, qubit_b: int) -> np.ndarray:
    """Amplitudes as a 4 x 2^(n-2) matrix: rows index the addressed pair."""
    _check_qubits(state, qubit_a, qubit_b)
    return _to_front(state.tensor(), (qubit_a - 1, qubit_b - 1)).reshape(4, -1)


def _bell_branches(state: PureState, qubit_a: int, qubit_b: int) -> tuple[np.ndarray, list[float]]:
    """Unnormalized rest-of-register branch per Bell outcome, and its weight."""
    branches = _BELL_BRA @ _pair_rows(state, qubit_a, qubit_b)
    weights = np.einsum("ij,ij->i", branches.conj(), branches).real
    return branches, weights.tolist()


def bell_probabilities(state: PureState, qubit_a: int, qubit_b: int) -> dict[BellKind, float]:
    """Born probabilities of the four Bell outcomes on the pair ``(qubit_a, qubit_b)``."""
    return dict(zip(BellKind, _bell_branches(state, qubit_a, qubit_b)[1]))


def _rebuild(front: np.ndarray, rest: np.ndarray, n: int, qubits: Sequence[int]) -> PureState:
    """State with ``qubits`` in ``front`` and the others in normalized ``rest``."""
    t = np.outer(front, rest).reshape((2,) * n)
    return PureState(n, _from_front(t, [q - 1 for q in qubits]).reshape(-1))


def bell_measure(
    state: PureState, qubit_a: int, qubit_b: int, rng: np.random.Generator
) -> tuple[BellKind, PureState]:
    """Sample a Bell outcome with one uniform draw and return the collapsed state.

    The draw is compared against the cumulative probabilities in
    ``BellKind`` member order; zero-probability outcomes are never chosen.
    """
    branches, weights = _bell_branches(state, qubit_a, qubit_b)
    u = rng.random()
    chosen = None
    acc = 0.0
    for i, p in enumerate(weights):
        # rounding residue of an exactly-zero branch must never be drawn
        if p < ZERO_PROB:
            continue
        acc += p
        chosen = i
        if u < acc:
            break
    assert chosen is not None
    outcome = _BELL_ORDER[chosen]
    rest = branches[chosen] / np.sqrt(weights[chosen])
    return outcome, _rebuild(outcome.vector, rest, state.num_qubits, (qubit_a, qubit_b))


def project_qubit(state: PureState, qubit: int, bit: int) -> tuple[float, PureState | None]:
    """Probability of reading ``bit`` on ``qubit`` and the collapsed state (``None`` if impossible)."""
    _check_qubits(state, qubit)
    rows = _to_front(state.tensor(), (qubit - 1,)).reshape(2, -1)
    p = float(np.vdot(rows[bit], rows[bit]).real)
    if p < ZERO_PROB:
        return 0.0, None
    front = np.eye(2, dtype=complex)[bit]
    return p, _rebuild(front, rows[bit] / np.sqrt(p), state.num_qubits, (qubit,))


def measure_qubit(state: PureState, qubit: int, rng: np.random.Generator) -> tuple[int, PureState]:
    """Computational-basis measurement of one qubit with one uniform draw."""
    p0, zero = project_qubit(state, qubit, 0)
    u = rng.random()
    if zero is not None and (u < p0 or p0 > 1 - ZERO_PROB):
        return 0, zero
    return 1, project_qubit(state, qubit, 1)[1]


def split_off(state: PureState, qubits: Sequence[int], factor: PureState) -> PureState:
    """Remove ``qubits`` that are known to be in the product factor ``factor``.

    Returns the state of the remaining qubits, in their original order. Raises
    if the addressed qubits are not actually in ``factor`` (i.e. the overlap
    does not carry the full norm).
    """
    _check_qubits(state, *qubits)
    if factor.num_qubits != len(qubits):
        raise ValueError("factor size does not match the number of qubits removed")
    if len(qubits) == state.num_qubits:
        raise ValueError("cannot remove every qubit")
    t = _to_front(state.tensor(), [q - 1 for q in qubits])
    rest = factor.amplitudes.conj() @ t.reshape(2 ** len(qubits), -1)
    weight = float(np.vdot(rest, rest).real)
    if abs(weight - 1) > PHASE_TOL:
        raise ValueError(f"qubits {tuple(qubits)} are not in the given product factor (weight {weight})")
    return PureState(state.num_qubits - len(qubits), rest / np.sqrt(weight))


def insert_qubit(state: PureState, position: int, qubit_state: PureState) -> PureState:
    """Insert a single-qubit product factor so it lands at ``position``."""
    n = state.num_qubits + 1
    if n > MAX_QUBITS:
        raise ValueError(f"insertion would exceed {MAX_QUBITS} qubits")
    if not 1 <= position <= n:
        raise QubitIndexError(f"insert position {position} out of range 1..{n}")
    t = np.multiply.outer(qubit_state.amplitudes, state.tensor())
    t = _from_front(t, (position - 1,))
    return PureState(n, t.reshape(-1))


def partial_trace(state: PureState | DensityMatrix, keep: Iterable[int]) -> DensityMatrix:
    """Reduced density matrix on the ``keep`` positions (kept in ascending order)."""
    keep = sorted(set(keep))
    if not keep:
        raise ValueError("keep set must be nonempty")
    n = state.num_qubits
    for q in keep:
        if not 1 <= q <= n:
            raise QubitIndexError(f"qubit {q} out of range 1..{n}")
    k = len(keep)
    if isinstance(state, PureState):
        m = _to_front(state.tensor(), [q - 1 for q in keep]).reshape(2**k, -1)
        return DensityMatrix(k, m @ m.conj().T)
    traced = [q for q in range(1, n + 1) if q not in keep]
    t = state.entries.reshape((2,) * (2 * n))
    letters = "abcdefghijklmnop"
    row = list(letters[:n])
    col = list(letters[n : 2 * n])
    for q in traced:
        col[q - 1] = row[q - 1]
    out = "".join(row[q - 1] for q in keep) + "".join(col[q - 1] for q in keep)
    reduced = np.einsum("".join(row) + "".join(col) + "->" + out, t)
    return DensityMatrix(k, reduced.reshape(2**k, 2**k))


def overlap(a: PureState, b: PureState) -> float:
    """Fidelity ``|<a|b>|^2``."""
    if a.num_qubits != b.num_qubits:
        raise ValueError("states have different dimensions")
    return float(abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2)


def same_up_to_global_phase(a: PureState, b: PureState) -> bool:
    return abs(overlap(a, b) - 1) <= PHASE_TOL


def identify_bell(state: PureState) -> BellKind | None:
    """The Bell kind a 2-qubit state equals up to global phase, if any."""
    for kind in BellKind:
        if same_up_to_global_phase(state, bell_state(kind)):
            return kind
    return None
