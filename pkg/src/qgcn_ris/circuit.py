"""QGCN variational circuit for one subgraph block.

Element i of a block owns qubit 2i (activation) and qubit 2i+1 (phase).
A run prepares |1>|+> per element, entangles with CNOTs, stacks L layers
of graph coupling (CPhase), neighbour-driven spacing rotations and local
rotations, refreshing the edge weights between layers, then decodes
activation bits by majority vote and phases as 2*pi*<Z>.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .channel import wrap_phase
from .config import NoiseModel, SystemConfig, TrainConfig
from .graph import SubgraphBlock, refresh_weights
from .qsim import (CNOT, CPHASE, RY, RZ, H, X, QuantumState, apply_gate, apply_pauli_code,
                   expectation_z_all, sample_bits)


def act_qubit(i: int) -> int:
    return 2 * i


def phase_qubit(i: int) -> int:
    return 2 * i + 1


@dataclass
class CircuitParams:
    """Per-layer rotation angles; ``edge_thetas`` scale the CPhase angles."""

    alpha: np.ndarray  # L x V
    beta: np.ndarray  # L x V
    gamma: np.ndarray  # L x V
    edge_thetas: np.ndarray  # L x E
    freeze_edges: bool = False

    @property
    def n_layers(self) -> int:
        return self.alpha.shape[0]

    @property
    def n_trainable(self) -> int:
        n = self.alpha.size + self.beta.size + self.gamma.size
        return n if self.freeze_edges else n + self.edge_thetas.size

    def to_vector(self) -> np.ndarray:
        parts = [self.alpha.ravel(), self.beta.ravel(), self.gamma.ravel()]
        if not self.freeze_edges:
            parts.append(self.edge_thetas.ravel())
        return np.concatenate(parts)

    def with_vector(self, vec) -> "CircuitParams":
        vec = np.asarray(vec, dtype=float)
        if vec.size != self.n_trainable:
            raise ValueError(f"expected {self.n_trainable} parameters, got {vec.size}")
        L, V = self.alpha.shape
        k = L * V
        edges = self.edge_thetas if self.freeze_edges else vec[3 * k:].reshape(self.edge_thetas.shape)
        return CircuitParams(vec[:k].reshape(L, V), vec[k:2 * k].reshape(L, V),
                             vec[2 * k:3 * k].reshape(L, V), np.array(edges, dtype=float),
                             self.freeze_edges)

    def kinds(self) -> np.ndarray:
        """Label per trainable entry: 'alpha', 'beta', 'gamma' or 'edge'."""
        k = self.alpha.size
        labels = ["alpha"] * k + ["beta"] * k + ["gamma"] * k
        if not self.freeze_edges:
            labels += ["edge"] * self.edge_thetas.size
        return np.array(labels)

    def locate(self, index: int):
        """(kind, layer, element-or-edge) of a flat trainable index."""
        kind = self.kinds()[index]
        L, V = self.alpha.shape
        offset = {"alpha": 0, "beta": 1, "gamma": 2, "edge": 3}[kind] * L * V
        local = index - offset
        width = self.edge_thetas.shape[1] if kind == "edge" else V
        return kind, local // width, local % width

    @classmethod
    def zeros(cls, n_layers: int, n_elements: int, n_edges: int,
              freeze_edges: bool = False) -> "CircuitParams":
        z = np.zeros((n_layers, n_elements))
        return cls(z.copy(), z.copy(), z.copy(), np.zeros((n_layers, n_edges)), freeze_edges)

    @classmethod
    def initial(cls, n_layers: int, n_elements: int, n_edges: int,
                rng: np.random.Generator, freeze_edges: bool = False) -> "CircuitParams":
        shape = (n_layers, n_elements)
        return cls(rng.uniform(-0.1, 0.1, shape), rng.uniform(0.0, 0.1, shape),
                   rng.uniform(-0.1, 0.1, shape), np.ones((n_layers, n_edges)), freeze_edges)


@dataclass
class DecodedState:
    activation: np.ndarray
    phases: np.ndarray
    raw_z_phase: np.ndarray
    mean_activation: np.ndarray
    layer_weights: np.ndarray  # L x E, CPhase weights actually used


class _Runner:
    """Applies gates, counts them and records their arities.

    Noise comes either live (``noise`` + ``rng``) or as a pre-drawn
    ``schedule`` mapping gate index to a Pauli code applied after that gate.
    """

    def __init__(self, state: QuantumState, noise: Optional[NoiseModel], rng, schedule=None):
        self.state = state
        self.noise = noise
        self.rng = rng
        self.schedule = schedule
        self.count = 0
        self.arities = []

    def __call__(self, gate, targets):
        apply_gate(self.state, gate, targets, self.noise, self.rng)
        if self.schedule and self.count in self.schedule:
            apply_pauli_code(self.state, targets, self.schedule[self.count])
        self.arities.append(gate.arity)
        self.count += 1


def prepare_initial(block: SubgraphBlock, noise: Optional[NoiseModel] = None,
                    rng: Optional[np.random.Generator] = None) -> QuantumState:
    """|1>_a |+>_phi per element, element CNOTs, then edge CNOTs on phase qubits."""
    if block.size < 1:
        raise ValueError("block must contain at least one element")
    run = _Runner(QuantumState.zeros(block.n_qubits), noise, rng)
    _prepare(run, block)
    return run.state


def _prepare(run: _Runner, block: SubgraphBlock):
    for i in range(block.size):
        run(X, act_qubit(i))
        run(H, phase_qubit(i))
    for i in range(block.size):
        run(CNOT, (act_qubit(i), phase_qubit(i)))
    for i, j in block.edges:
        run(CNOT, (phase_qubit(i), phase_qubit(j)))


def apply_layer(state: QuantumState, layer_index: int, block: SubgraphBlock,
                params: CircuitParams, weights=None, circuit_form: str = "equations",
                noise: Optional[NoiseModel] = None,
                rng: Optional[np.random.Generator] = None) -> QuantumState:
    """One U_A U_S U_GC layer.  ``weights`` defaults to the block's grid weights."""
    run = _Runner(state, noise, rng)
    _layer(run, layer_index, block, params, block.weights if weights is None else weights,
           circuit_form, block.neighbors())
    return state


def _layer(run: _Runner, l: int, block: SubgraphBlock, params: CircuitParams, weights,
           circuit_form: str, nbrs):
    if not 0 <= l < params.n_layers:
        raise ValueError(f"layer {l} out of range for {params.n_layers} layers")
    for e, (i, j) in enumerate(block.edges):
        run(CPHASE(weights[e] * params.edge_thetas[l, e]), (phase_qubit(i), phase_qubit(j)))
    z_phi = expectation_z_all(run.state, [phase_qubit(i) for i in range(block.size)])
    mu = np.array([z_phi[nb].sum() for nb in nbrs]) if block.size else np.zeros(0)
    if circuit_form == "equations":
        for i in range(block.size):
            run(RY(params.beta[l, i] * mu[i]), act_qubit(i))
        for i in range(block.size):
            run(RY(params.alpha[l, i]), phase_qubit(i))
            run(RZ(params.gamma[l, i]), phase_qubit(i))
            run(RY(params.beta[l, i]), act_qubit(i))
    else:
        for i in range(block.size):
            run(RY(params.alpha[l, i] + params.beta[l, i] * mu[i]), phase_qubit(i))
            run(RZ(params.gamma[l, i]), phase_qubit(i))


def _evolve(block: SubgraphBlock, params: CircuitParams, system: SystemConfig,
            circuit_form: str, counts=None, schedule=None):
    run = _Runner(QuantumState.zeros(block.n_qubits), None, None, schedule)
    _prepare(run, block)
    if counts is not None:
        counts.append(run.count)
    nbrs = [np.array(nb, dtype=int) for nb in block.neighbors()]
    weights = np.asarray(block.weights, dtype=float)
    used = []
    act = [act_qubit(i) for i in range(block.size)]
    for l in range(params.n_layers):
        used.append(weights.copy())
        start = run.count
        _layer(run, l, block, params, weights, circuit_form, nbrs)
        if counts is not None:
            counts.append(run.count - start)
        if l < params.n_layers - 1 and len(block.edges):
            mean_a = np.clip((1.0 - expectation_z_all(run.state, act)) / 2.0, 0.0, 1.0)
            weights = refresh_weights(block.edges, mean_a, system.d_min, system.w_decay)
    used = np.array(used).reshape(params.n_layers, len(block.edges))
    return run.state, used, run.arities


def _trajectories(block, params, system, train, rng, counts):
    """Final states of the noise trajectories for one circuit run.

    The noiseless evolution is computed once.  Each trajectory first draws
    which gates fail (p1 / p2 by arity) and which Pauli each failure
    applies; only trajectories with at least one failure are re-simulated.
    Mid-circuit expectations (spacing drive, weight refresh) therefore see
    the trajectory's own errors.
    """
    ref, used, arities = _evolve(block, params, system, train.circuit_form, counts)
    noise = train.noise
    if noise is None:
        return [(ref, used)]
    arity = np.asarray(arities)
    p_fail = np.where(arity == 2, noise.p2, noise.p1)
    out = []
    for _ in range(max(1, train.trajectories)):
        hits = np.flatnonzero(rng.random(arity.size) < p_fail)
        if hits.size == 0:
            out.append((ref, used))
            continue
        schedule = {int(g): int(rng.integers(1, 4 ** arity[g])) for g in hits}
        state, u, _ = _evolve(block, params, system, train.circuit_form, schedule=schedule)
        out.append((state, u))
    return out


def run_circuit(block: SubgraphBlock, params: CircuitParams, system: SystemConfig,
                train: TrainConfig, rng: Optional[np.random.Generator] = None,
                counts: Optional[list] = None) -> DecodedState:
    """Prepare, evolve L layers and decode.

    Exact mode (``train.shots is None``) uses exact expectations (averaged
    over trajectories when noisy) and a_n = 1[P(1) >= 1/2].  Shot mode
    splits the shots over ``train.trajectories`` noise trajectories (a
    single trajectory without noise).  ``layer_weights`` are those of the
    noiseless evolution.
    """
    V = block.size
    act = [act_qubit(i) for i in range(V)]
    phs = [phase_qubit(i) for i in range(V)]
    noise = train.noise
    if (noise is not None or not train.exact) and rng is None:
        raise ValueError("noisy or shot-based runs need an rng")
    runs = _trajectories(block, params, system, train, rng, counts)
    used = runs[0][1]
    if train.exact:
        za = np.mean([expectation_z_all(st, act) for st, _ in runs], axis=0)
        zp = np.mean([expectation_z_all(st, phs) for st, _ in runs], axis=0)
        p1 = np.clip((1.0 - za) / 2.0, 0.0, 1.0)
        activation = (p1 >= 0.5 - 1e-12).astype(np.int8)
    else:
        n_traj = len(runs)
        shots = np.full(n_traj, train.shots // n_traj)
        shots[: train.shots % n_traj] += 1
        # error-free trajectories share one state object; sample them together
        groups = {}
        for (state, _), s in zip(runs, shots):
            groups.setdefault(id(state), [state, 0])[1] += int(s)
        ones = np.zeros(2 * V)
        for state, s in groups.values():
            if s > 0:
                ones += sample_bits(state, act + phs, s, rng, noise).sum(axis=0)
        freq = ones / train.shots
        p1 = freq[:V]
        zp = 1.0 - 2.0 * freq[V:]
        activation = (p1 >= 0.5).astype(np.int8)
    return DecodedState(activation=activation, phases=wrap_phase(2.0 * np.pi * zp),
                        raw_z_phase=zp, mean_activation=p1, layer_weights=used)


def gates_per_layer(block: SubgraphBlock, circuit_form: str = "equations") -> int:
    """|E_b| CPhase + |V_b| spacing rotations + 3|V_b| local rotations (equations form)."""
    if circuit_form == "equations":
        return len(block.edges) + 4 * block.size
    return len(block.edges) + 2 * block.size


def n_trainable(block: SubgraphBlock, n_layers: int, freeze_edges: bool = False) -> int:
    n = 3 * n_layers * block.size
    return n if freeze_edges else n + n_layers * len(block.edges)
