"""Dense statevector simulator with Pauli-trajectory noise.

Qubit q is bit q of the basis index (little-endian).  Gates act in place on
``QuantumState.amplitudes``; every function returns the state it was given
so calls can be chained.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .config import NoiseModel

MAX_QUBITS = 26


class Gate(NamedTuple):
    name: str
    param: float = 0.0

    @property
    def arity(self) -> int:
        return 2 if self.name in ("CNOT", "CPHASE") else 1


X = Gate("X")
Y = Gate("Y")
Z = Gate("Z")
H = Gate("H")
CNOT = Gate("CNOT")


def RY(theta: float) -> Gate:
    return Gate("RY", float(theta))


def RZ(theta: float) -> Gate:
    return Gate("RZ", float(theta))


def CPHASE(theta: float) -> Gate:
    return Gate("CPHASE", float(theta))


def dagger(gate: Gate) -> Gate:
    if gate.name in ("RY", "RZ", "CPHASE"):
        return Gate(gate.name, -gate.param)
    return gate


_SQ2 = 1.0 / np.sqrt(2.0)
_FIXED = {
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    "H": np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], dtype=complex),
}


def single_qubit_matrix(gate: Gate) -> np.ndarray:
    if gate.name in _FIXED:
        return _FIXED[gate.name]
    t = gate.param / 2.0
    if gate.name == "RY":
        c, s = np.cos(t), np.sin(t)
        return np.array([[c, -s], [s, c]], dtype=complex)
    if gate.name == "RZ":
        return np.array([[np.exp(-1j * t), 0], [0, np.exp(1j * t)]], dtype=complex)
    raise ValueError(f"not a single-qubit gate: {gate.name}")


@dataclass
class QuantumState:
    amplitudes: np.ndarray
    n_qubits: int

    @classmethod
    def zeros(cls, n_qubits: int) -> "QuantumState":
        if not 1 <= n_qubits <= MAX_QUBITS:
            raise ValueError(f"n_qubits={n_qubits} outside [1, {MAX_QUBITS}]")
        amp = np.zeros(2 ** n_qubits, dtype=complex)
        amp[0] = 1.0
        return cls(amp, n_qubits)

    @classmethod
    def from_amplitudes(cls, amplitudes) -> "QuantumState":
        amp = np.asarray(amplitudes, dtype=complex).copy()
        n = int(round(np.log2(amp.size)))
        if 2 ** n != amp.size:
            raise ValueError("amplitude vector length must be a power of two")
        return cls(amp, n)

    def copy(self) -> "QuantumState":
        return QuantumState(self.amplitudes.copy(), self.n_qubits)

    def norm(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


@lru_cache(maxsize=None)
def _bit(n_qubits: int, q: int) -> np.ndarray:
    return ((np.arange(2 ** n_qubits) >> q) & 1).astype(bool)


@lru_cache(maxsize=None)
def _cnot_pairs(n_qubits: int, control: int, target: int):
    idx = np.arange(2 ** n_qubits)
    sel = ((idx >> control) & 1 == 1) & ((idx >> target) & 1 == 0)
    lo = idx[sel]
    return lo, lo | (1 << target)


@lru_cache(maxsize=None)
def _both(n_qubits: int, a: int, b: int) -> np.ndarray:
    return np.flatnonzero(_bit(n_qubits, a) & _bit(n_qubits, b))


def _check_targets(state: QuantumState, targets: Sequence[int], arity: int):
    if len(targets) != arity:
        raise ValueError(f"gate needs {arity} target(s), got {len(targets)}")
    if len(set(targets)) != len(targets):
        raise ValueError(f"duplicate targets {tuple(targets)}")
    for q in targets:
        if not 0 <= q < state.n_qubits:
            raise ValueError(f"qubit {q} out of range for {state.n_qubits} qubits")


def _apply_1q(amp: np.ndarray, n: int, q: int, U: np.ndarray):
    view = amp.reshape(2 ** (n - q - 1), 2, 2 ** q)
    view[...] = np.matmul(U, view)


def _apply_raw(state: QuantumState, gate: Gate, targets: Sequence[int]):
    amp, n = state.amplitudes, state.n_qubits
    if gate.name == "CNOT":
        lo, hi = _cnot_pairs(n, targets[0], targets[1])
        amp[lo], amp[hi] = amp[hi], amp[lo].copy()
    elif gate.name == "CPHASE":
        amp[_both(n, targets[0], targets[1])] *= np.exp(1j * gate.param)
    elif gate.name == "Z":
        amp[_bit(n, targets[0])] *= -1.0
    elif gate.name == "RZ":
        bit = _bit(n, targets[0])
        t = gate.param / 2.0
        amp[bit] *= np.exp(1j * t)
        amp[~bit] *= np.exp(-1j * t)
    else:
        _apply_1q(amp, n, targets[0], single_qubit_matrix(gate))


_PAULI_1Q = (X, Y, Z)


def apply_pauli_code(state: QuantumState, targets: Sequence[int], code: int) -> QuantumState:
    """Apply the Pauli string with base-4 digits ``code`` (0=I, 1=X, 2=Y, 3=Z),
    least significant digit on ``targets[0]``."""
    if isinstance(targets, (int, np.integer)):
        targets = (int(targets),)
    if not 0 <= code < 4 ** len(targets):
        raise ValueError(f"Pauli code {code} out of range for {len(targets)} qubit(s)")
    for q in targets:
        code, letter = divmod(code, 4)
        if letter:
            _apply_raw(state, _PAULI_1Q[letter - 1], (q,))
    return state


def inject_depolarizing(state: QuantumState, targets: Sequence[int], p: float,
                        rng: np.random.Generator) -> QuantumState:
    """With probability p apply a uniformly drawn non-identity Pauli string."""
    if not 0.0 <= p < 1.0:
        raise ValueError(f"depolarizing probability {p} outside [0, 1)")
    if p == 0.0 or rng.random() >= p:
        return state
    # codes 1..4^n - 1: identity excluded
    return apply_pauli_code(state, targets, int(rng.integers(1, 4 ** len(targets))))


def apply_gate(state: QuantumState, gate: Gate, targets, noise: Optional[NoiseModel] = None,
               rng: Optional[np.random.Generator] = None) -> QuantumState:
    """Apply ``gate`` on ``targets`` (control first for CNOT).

    When ``noise`` is given, a depolarizing error is sampled right after the
    gate: ``p1`` for single-qubit gates, ``p2`` on both qubits of CNOT/CPhase.
    """
    if isinstance(targets, (int, np.integer)):
        targets = (int(targets),)
    targets = tuple(int(t) for t in targets)
    _check_targets(state, targets, gate.arity)
    _apply_raw(state, gate, targets)
    if noise is not None:
        if rng is None:
            raise ValueError("noisy gate application needs an rng")
        p = noise.p2 if gate.arity == 2 else noise.p1
        inject_depolarizing(state, targets, p, rng)
    return state


def expectation_z(state: QuantumState, qubit: int) -> float:
    if not 0 <= qubit < state.n_qubits:
        raise ValueError(f"qubit {qubit} out of range")
    probs = state.probabilities().reshape(2 ** (state.n_qubits - qubit - 1), 2, 2 ** qubit)
    p = probs.sum(axis=(0, 2))
    return float(p[0] - p[1])


def expectation_z_all(state: QuantumState, qubits: Sequence[int]) -> np.ndarray:
    probs = state.probabilities()
    n = state.n_qubits
    out = np.empty(len(qubits))
    for i, q in enumerate(qubits):
        p = probs.reshape(2 ** (n - q - 1), 2, 2 ** q).sum(axis=(0, 2))
        out[i] = p[0] - p[1]
    return out


def sample_bits(state: QuantumState, qubits: Sequence[int], n_shots: int,
                rng: np.random.Generator, noise: Optional[NoiseModel] = None) -> np.ndarray:
    """Draw ``n_shots`` computational-basis outcomes; returns shots x len(qubits) 0/1 array."""
    if n_shots < 1:
        raise ValueError("n_shots must be >= 1")
    probs = state.probabilities()
    probs = probs / probs.sum()
    outcomes = rng.choice(probs.size, size=n_shots, p=probs)
    bits = ((outcomes[:, None] >> np.asarray(qubits)[None, :]) & 1).astype(np.int8)
    if noise is not None and noise.p_read > 0:
        flips = rng.random(bits.shape) < noise.p_read
        bits ^= flips.astype(np.int8)
    return bits


def sample_measurements(state: QuantumState, qubits: Sequence[int], n_shots: int,
                        rng: np.random.Generator, noise: Optional[NoiseModel] = None) -> dict:
    """Bit-count table ``{"b0b1...": count}``; character i is ``qubits[i]``."""
    bits = sample_bits(state, qubits, n_shots, rng, noise)
    keys, counts = np.unique(bits, axis=0, return_counts=True)
    return {"".join(str(int(b)) for b in k): int(c) for k, c in zip(keys, counts)}


def marginal_ones(counts: dict, n_bits: int) -> np.ndarray:
    """Per-position frequency of '1' in a bit-count table."""
    total = sum(counts.values())
    ones = np.zeros(n_bits)
    for key, c in counts.items():
        ones += c * np.array([ch == "1" for ch in key], dtype=float)
    return ones / total
