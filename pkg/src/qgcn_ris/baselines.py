"""Comparison methods: exhaustive grid oracle, a small message-passing GNN
with relaxed activations, analytic phase gradient descent and the fixed
reference configurations (random phase, alignment, coordinate ascent and
its discrete projection)."""
from __future__ import annotations

import itertools
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .channel import (ChannelSet, RISState, Scenario, _element_terms, _masked, aperture_length,
                      is_feasible, loss, loss_phase_gradient, mutual_coupling, sample_channels,
                      sinr_and_rates, sinr_from_powers, softmin_weights, wrap_phase)
from .config import SystemConfig
from .graph import RISGraph, build_graph
from .trainer import TrainReport, detect_convergence

TWO_PI = 2.0 * np.pi
MAX_ORACLE_ELEMENTS = 6
MAX_ORACLE_BITS = 3
GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def _channels(source, config: SystemConfig) -> ChannelSet:
    return sample_channels(source, config) if isinstance(source, Scenario) else source


def phase_grid(bits: int) -> np.ndarray:
    """The 2^B uniform phase levels 2 pi t / 2^B."""
    if bits < 1:
        raise ValueError("need at least one phase bit")
    return TWO_PI * np.arange(2 ** bits) / 2 ** bits


def project_to_grid(state: RISState, bits: int) -> RISState:
    """Round every phase to the nearest B-bit level (ties go to the lower level)."""
    step = TWO_PI / 2 ** bits
    t = np.floor(state.phases / step + 0.5) % 2 ** bits
    return RISState(state.activation, t * step)


def min_and_sum_rate(state: RISState, channels: ChannelSet, config: SystemConfig):
    _, rates = sinr_and_rates(state, channels, config)
    return float(rates.min()), float(rates.sum()), rates


# ---------------------------------------------------------------- oracle

@dataclass
class OracleResult:
    best_state: RISState
    best_min_rate: float
    configurations_searched: int
    n_patterns: int = 0


def feasible_patterns(config: SystemConfig) -> list:
    """All activation vectors meeting the element-count and aperture limits, in binary order."""
    out = []
    for bits in itertools.product((0, 1), repeat=config.n_elements):
        a = np.array(bits, dtype=np.int8)
        if a.sum() >= config.n_min and aperture_length(a, config.d_min) <= config.d_total + 1e-12:
            out.append(a)
    return out


def oracle_size(config: SystemConfig, phase_bits: int) -> int:
    levels = 2 ** phase_bits
    return sum(levels ** int(a.sum()) for a in feasible_patterns(config))


def brute_force(source, config: SystemConfig, phase_bits: int) -> OracleResult:
    """Exact max-min rate over feasible activations and B-bit phases.

    ``source`` is a ``ChannelSet`` or a ``Scenario`` (sampled with its
    stored scattering).  Ties keep the first configuration found.
    """
    N = config.n_elements
    if N > MAX_ORACLE_ELEMENTS or phase_bits > MAX_ORACLE_BITS or phase_bits < 1:
        raise ValueError(
            f"oracle refused: N={N} (max {MAX_ORACLE_ELEMENTS}), B={phase_bits} "
            f"(1..{MAX_ORACLE_BITS}); search size would be "
            f"{2 ** N} patterns x up to {2 ** (phase_bits * N)} phase vectors")
    channels = _channels(source, config)
    grid = phase_grid(phase_bits)
    unit = np.exp(1j * grid)
    P = np.asarray(config.tx_powers)
    noise = np.asarray(config.noise_power)
    best_rate, best_state, searched = -np.inf, None, 0
    patterns = feasible_patterns(config)
    if not patterns:
        raise ValueError("no feasible activation pattern for this configuration")
    for a in patterns:
        idx = np.flatnonzero(a)
        c = _element_terms(a, channels, config)[idx]  # A x K
        combos = np.array(list(itertools.product(range(grid.size), repeat=idx.size)))
        g = unit[combos] @ c  # G^A x K
        rates = np.log2(1.0 + sinr_from_powers(P * np.abs(g) ** 2, noise))
        worst = rates.min(axis=1)
        j = int(np.argmax(worst))
        searched += combos.shape[0]
        if worst[j] > best_rate:
            phases = np.zeros(N)
            phases[idx] = grid[combos[j]]
            best_rate, best_state = float(worst[j]), RISState(a, phases)
    return OracleResult(best_state, best_rate, searched, len(patterns))


# ---------------------------------------------------------------- relaxed evaluation

def relaxed_rates(a, phases, channels: ChannelSet, config: SystemConfig) -> np.ndarray:
    """Per-UE rates with reflection diag(a * exp(j phi)) and a in [0, 1].

    Coupling spans every powered element, which on the half-wavelength
    grid is the identity, so binary ``a`` reproduces the exact rates.
    """
    a = np.asarray(a, dtype=float) * channels.powered
    h_ap, h_ue = _masked(channels)
    C = mutual_coupling(channels.positions, config)
    u = h_ap.sum(axis=0).conj() @ C
    c = np.sqrt(channels.beta)[None, :] * u[:, None] * h_ue
    g = (a * np.exp(1j * np.asarray(phases)))[None, :] @ c
    s = np.asarray(config.tx_powers) * np.abs(g[0]) ** 2
    return np.log2(1.0 + sinr_from_powers(s, config.noise_power))


def relaxed_loss(a, phases, channels: ChannelSet, config: SystemConfig, weights) -> float:
    """Smooth surrogate of the training loss; the aperture indicator uses hard bits."""
    rates = relaxed_rates(a, phases, channels, config)
    hard = (np.asarray(a) >= 0.5).astype(np.int8)
    pen = config.lambda_phase * float(np.sum(np.asarray(a) * wrap_phase(phases) ** 2))
    pen += config.lambda_aperture * float(aperture_length(hard, config.d_min) > config.d_total + 1e-12)
    pen += config.lambda_act * max(0.0, config.n_min - float(np.sum(a))) ** 2
    return float(-np.dot(weights, rates) + pen)


def _weights(state: RISState, channels: ChannelSet, config: SystemConfig) -> np.ndarray:
    if config.weighting == "softmin":
        return softmin_weights(sinr_and_rates(state, channels, config)[1], config.softmin_tau)
    return np.asarray(config.ue_weights, dtype=float)


def _better(rate, feas, best_rate, best_feas) -> bool:
    if feas != best_feas:
        return feas
    return rate > best_rate


# ---------------------------------------------------------------- classical GNN

class MessagePassingGNN:
    """Free per-node features [logit, phase] refined by shared-weight message passing.

    Each round: m_i = weighted mean of neighbour features with the graph's
    edge weights, h_i <- h_i + tanh(W h_i + U m_i + b).  Output node i is
    a_i = sigmoid(h_i[0]) and phi_i = h_i[1].
    """

    def __init__(self, graph: RISGraph, rounds: int = 2):
        self.graph = graph
        self.rounds = rounds
        n = graph.n_vertices
        A = np.zeros((n, n))
        for (i, j), w in zip(graph.edges, graph.weights):
            A[i, j] = A[j, i] = w
        deg = A.sum(axis=1, keepdims=True)
        self.mix = np.divide(A, deg, out=np.zeros_like(A), where=deg > 0)

    @property
    def n_params(self) -> int:
        return 2 * self.graph.n_vertices + 10

    def unpack(self, theta):
        n = self.graph.n_vertices
        x = theta[:2 * n].reshape(n, 2)
        W = theta[2 * n:2 * n + 4].reshape(2, 2)
        U = theta[2 * n + 4:2 * n + 8].reshape(2, 2)
        b = theta[2 * n + 8:2 * n + 10]
        return x, W, U, b

    def forward(self, theta):
        h, W, U, b = self.unpack(np.asarray(theta, dtype=float))
        for _ in range(self.rounds):
            m = self.mix @ h
            h = h + np.tanh(h @ W.T + m @ U.T + b)
        a = 1.0 / (1.0 + np.exp(-np.clip(h[:, 0], -500, 500)))
        return a, h[:, 1]

    def init_params(self, rng: np.random.Generator, logit: float = 2.0) -> np.ndarray:
        n = self.graph.n_vertices
        x = np.column_stack([np.full(n, logit), rng.uniform(0.0, TWO_PI, n)])
        shared = rng.normal(0.0, 0.1, 10)
        return np.concatenate([x.ravel(), shared])


def classical_gnn(source, config: SystemConfig, graph: Optional[RISGraph] = None,
                  epochs: int = 50, eta: float = 0.5, seed: int = 0, rounds: int = 2,
                  fd_step: float = 1e-4, train_logits: bool = True,
                  init_logit: float = 2.0):
    """Train the relaxed GNN by central finite-difference gradient descent.

    Every epoch the hard-thresholded decode (a >= 0.5) is scored and the
    best feasible one is kept.  ``train_logits=False`` freezes the
    activation logits (and the shared weights' effect on them is moot when
    ``init_logit`` is large).
    """
    channels = _channels(source, config)
    if graph is None:
        graph = build_graph(channels.positions, config.w_decay)
    net = MessagePassingGNN(graph, rounds)
    rng = np.random.default_rng(np.random.SeedSequence((seed, 4099)))
    theta = net.init_params(rng, init_logit)
    n = graph.n_vertices
    frozen = np.zeros(theta.size, dtype=bool)
    if not train_logits:
        frozen[0:2 * n:2] = True
    t0 = time.perf_counter()
    losses, rates_trace = [], []
    best_state, best_rate, best_feas = None, -np.inf, False
    for _ in range(epochs):
        a, phi = net.forward(theta)
        hard = RISState((a >= 0.5).astype(np.int8), phi)
        w = _weights(hard, channels, config)
        losses.append(relaxed_loss(a, phi, channels, config, w))
        r = float(sinr_and_rates(hard, channels, config)[1].min())
        f = is_feasible(hard, config)
        rates_trace.append(r)
        if _better(r, f, best_rate, best_feas):
            best_state, best_rate, best_feas = hard, r, f
        grad = np.zeros(theta.size)
        for p in np.flatnonzero(~frozen):
            tp, tm = theta.copy(), theta.copy()
            tp[p] += fd_step
            tm[p] -= fd_step
            lp = relaxed_loss(*net.forward(tp), channels, config, w)
            lm = relaxed_loss(*net.forward(tm), channels, config, w)
            grad[p] = (lp - lm) / (2.0 * fd_step)
        theta = theta - eta * grad
    a, phi = net.forward(theta)
    final = RISState((a >= 0.5).astype(np.int8), phi)
    r = float(sinr_and_rates(final, channels, config)[1].min())
    f = is_feasible(final, config)
    if _better(r, f, best_rate, best_feas):
        best_state, best_rate, best_feas = final, r, f
    report = TrainReport(losses, rates_trace, best_state, best_rate, best_feas,
                         detect_convergence(losses, 1e-3, 5), 0, time.perf_counter() - t0,
                         n_params=int((~frozen).sum()), final_params=list(theta))
    return best_state, report


# ---------------------------------------------------------------- phase gradient descent

def gradient_descent(source, config: SystemConfig, epochs: int = 50, eta: float = 0.5,
                     init_phases=None) -> tuple:
    """All-active analytic phase descent on the training loss; keeps the best min-rate."""
    channels = _channels(source, config)
    N = channels.n_elements
    state = RISState(np.ones(N, dtype=np.int8), np.zeros(N) if init_phases is None else init_phases)
    t0 = time.perf_counter()
    losses, rates_trace = [], []
    best_state, best_rate = state.copy(), -np.inf
    for _ in range(epochs):
        w = _weights(state, channels, config)
        losses.append(loss(state, channels, config, w))
        r = float(sinr_and_rates(state, channels, config)[1].min())
        rates_trace.append(r)
        if r > best_rate:
            best_state, best_rate = state.copy(), r
        state = RISState(state.activation,
                         state.phases - eta * loss_phase_gradient(state, channels, config, w))
    r = float(sinr_and_rates(state, channels, config)[1].min())
    if r > best_rate:
        best_state, best_rate = state.copy(), r
    report = TrainReport(losses, rates_trace, best_state, best_rate, is_feasible(best_state, config),
                         detect_convergence(losses, 1e-3, 5), 0, time.perf_counter() - t0,
                         n_params=N)
    return best_state, report


# ---------------------------------------------------------------- reference configurations

def random_phase_state(n_elements: int, rng: np.random.Generator) -> RISState:
    return RISState(np.ones(n_elements, dtype=np.int8), rng.uniform(0.0, TWO_PI, n_elements))


def aligned_state(source, config: SystemConfig) -> RISState:
    """All active; phases co-phase every element's term for the strongest UE."""
    channels = _channels(source, config)
    a = np.ones(channels.n_elements, dtype=np.int8)
    c = _element_terms(a, channels, config)
    k = int(np.argmax(np.abs(c).sum(axis=0)))
    return RISState(a, wrap_phase(-np.angle(c[:, k])))


def _golden_max(f, lo: float, hi: float, n_evals: int = 16):
    """Golden-section search for a maximum using exactly ``n_evals`` evaluations."""
    x1 = hi - GOLDEN * (hi - lo)
    x2 = lo + GOLDEN * (hi - lo)
    f1, f2 = f(x1), f(x2)
    for _ in range(n_evals - 2):
        if f1 >= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - GOLDEN * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + GOLDEN * (hi - lo)
            f2 = f(x2)
    return (x1, f1) if f1 >= f2 else (x2, f2)


def coordinate_ascent(source, config: SystemConfig, start: Optional[RISState] = None,
                      sweeps: int = 3, n_evals: int = 16) -> RISState:
    """Cyclic per-element golden-section ascent of the min-rate over [phi - pi, phi + pi].

    A coordinate move is accepted only if it strictly improves the min-rate.
    """
    channels = _channels(source, config)
    state = (aligned_state(channels, config) if start is None else start).copy()
    current = float(sinr_and_rates(state, channels, config)[1].min())
    for _ in range(sweeps):
        for n in np.flatnonzero(state.activation):
            phases = state.phases.copy()

            def f(x):
                phases[n] = x
                return float(sinr_and_rates(RISState(state.activation, phases), channels,
                                            config)[1].min())

            x, fx = _golden_max(f, state.phases[n] - np.pi, state.phases[n] + np.pi, n_evals)
            if fx > current:
                new = state.phases.copy()
                new[n] = x
                state, current = RISState(state.activation, new), fx
    return state


def reference_configs(source, config: SystemConfig, rng: np.random.Generator,
                      phase_bits: int = 2) -> list:
    """``[(label, RISState), ...]`` for random, fixed-spacing, continuous and discrete references."""
    channels = _channels(source, config)
    N = channels.n_elements
    fixed = aligned_state(channels, config)
    cont = coordinate_ascent(channels, config, start=fixed)
    return [
        ("random", random_phase_state(N, rng)),
        ("fixed", fixed),
        ("continuous", cont),
        (f"discrete{phase_bits}", project_to_grid(cont, phase_bits)),
    ]
