"""Per-block QGCN training: loss evaluation, parameter-shift gradients and
plain gradient descent.

Gradients come in two flavours.  ``hybrid`` (default) applies the shift
rule to the circuit outputs <Z^phi> and chains it through the analytic
derivative of the loss; for the activation drivers (beta) it adds the
discrete term [L(a+) - L(a-)] / 2 on the decoded activation bits.
``loss`` shifts the full decoded loss directly.  Both cost exactly two
circuit runs per trainable parameter.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .channel import (ChannelSet, RISState, is_feasible, loss, loss_phase_gradient,
                      sinr_and_rates, softmin_weights)
from .circuit import CircuitParams, DecodedState, run_circuit
from .config import SystemConfig, TrainConfig
from .graph import SubgraphBlock, build_graph, partition

HALF_PI = np.pi / 2


@dataclass
class TrainReport:
    loss_trace: list
    min_rate_trace: list
    best_state: RISState
    best_min_rate: float
    best_feasible: bool
    convergence_epoch: int
    circuit_evals: int
    wall_time: float
    n_params: int = 0
    final_params: list = field(default_factory=list)


@dataclass
class BlockProblem:
    """Everything needed to score a block's decode inside the global state.

    ``override`` holds -1 (free), 0 (forced off) or 1 (forced on) per
    global element.
    """

    block: SubgraphBlock
    channels: ChannelSet
    system: SystemConfig
    train: TrainConfig
    base_state: RISState
    override: np.ndarray

    def global_state(self, decoded: DecodedState, phases=None) -> RISState:
        a = self.base_state.activation.copy()
        phi = self.base_state.phases.copy()
        ids = list(self.block.vertex_ids)
        a[ids] = decoded.activation
        phi[ids] = decoded.phases if phases is None else phases
        forced = self.override >= 0
        a[forced] = self.override[forced]
        return RISState(a, phi)


def free_override(n: int) -> np.ndarray:
    return np.full(n, -1, dtype=np.int8)


def ue_weights(state: RISState, problem: BlockProblem) -> np.ndarray:
    sys = problem.system
    if sys.weighting == "softmin":
        _, rates = sinr_and_rates(state, problem.channels, sys)
        return softmin_weights(rates, sys.softmin_tau)
    return np.asarray(sys.ue_weights, dtype=float)


def _rng(seed_key) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed_key))


def evaluate(params: CircuitParams, problem: BlockProblem, seed_key=(0,),
             weights: Optional[np.ndarray] = None):
    """Run the circuit once and score the stitched global state.

    Returns ``(loss, decoded, global_state)``; deterministic in ``seed_key``.
    """
    decoded = run_circuit(problem.block, params, problem.system, problem.train, _rng(seed_key))
    state = problem.global_state(decoded)
    if weights is None:
        weights = ue_weights(state, problem)
    return loss(state, problem.channels, problem.system, weights), decoded, state


def _shift_sizes(params: CircuitParams, decoded: DecodedState) -> np.ndarray:
    """pi/2 on every gate angle; edge thetas enter as w * theta, so shift by pi/(2w)."""
    shifts = np.full(params.n_trainable, HALF_PI)
    if not params.freeze_edges and params.edge_thetas.size:
        w = np.asarray(decoded.layer_weights, dtype=float).ravel()
        k = 3 * params.alpha.size
        shifts[k:] = HALF_PI / np.maximum(w, 1e-12)
    return shifts


@dataclass
class GradientResult:
    grad: np.ndarray
    loss: float
    decoded: DecodedState
    state: RISState
    candidates: list  # RISStates decoded at the shifted points
    circuit_evals: int


def gradient(params: CircuitParams, problem: BlockProblem, seed_key=(0,),
             weights: Optional[np.ndarray] = None) -> GradientResult:
    """Parameter-shift gradient; two runs per parameter sharing one seed."""
    L0, dec0, state0 = evaluate(params, problem, tuple(seed_key) + (0,), weights)
    if weights is None:
        weights = ue_weights(state0, problem)
        L0 = loss(state0, problem.channels, problem.system, weights)
    vec = params.to_vector()
    kinds = params.kinds()
    shifts = _shift_sizes(params, dec0)
    ids = list(problem.block.vertex_ids)
    sys, ch = problem.system, problem.channels
    if problem.train.gradient_mode == "hybrid":
        dl_dz = 2.0 * np.pi * loss_phase_gradient(state0, ch, sys, weights)[ids]
    grad = np.zeros(vec.size)
    candidates = []
    evals = 1
    for p in range(vec.size):
        out = []
        for sign in (1.0, -1.0):
            shifted = vec.copy()
            shifted[p] += sign * shifts[p]
            dec = run_circuit(problem.block, params.with_vector(shifted), sys, problem.train,
                              _rng(tuple(seed_key) + (p + 1,)))
            evals += 1
            st = problem.global_state(dec)
            candidates.append(st)
            out.append((dec, st))
        (dec_p, st_p), (dec_m, st_m) = out
        if problem.train.gradient_mode == "loss":
            grad[p] = (loss(st_p, ch, sys, weights) - loss(st_m, ch, sys, weights)) / 2.0
            if kinds[p] == "edge":
                grad[p] *= HALF_PI / shifts[p]
            continue
        dz = (dec_p.raw_z_phase - dec_m.raw_z_phase) / 2.0
        if kinds[p] == "edge":
            dz *= HALF_PI / shifts[p]
        g = float(dl_dz @ dz)
        if kinds[p] == "beta" and not np.array_equal(st_p.activation, st_m.activation):
            plus = problem.global_state(dec_p, phases=dec0.phases)
            minus = problem.global_state(dec_m, phases=dec0.phases)
            g += (loss(plus, ch, sys, weights) - loss(minus, ch, sys, weights)) / 2.0
        grad[p] = g
    return GradientResult(grad, L0, dec0, state0, candidates, evals)


def detect_convergence(loss_trace, delta: float, window: int) -> int:
    """First 1-based epoch e whose window [e, e+window) stays within ``delta``
    of the running minimum up to the window's end; last epoch if none."""
    if window < 1:
        raise ValueError("window must be >= 1")
    x = np.asarray(loss_trace, dtype=float)
    T = x.size
    if T == 0:
        return 0
    running_min = np.minimum.accumulate(x)
    for e in range(T - window + 1):
        seg = x[e:e + window]
        if np.all(seg - running_min[e + window - 1] <= delta):
            return e + 1
    return T


def _score(state: RISState, problem: BlockProblem):
    rate = float(sinr_and_rates(state, problem.channels, problem.system)[1].min())
    return rate, is_feasible(state, problem.system)


def _better(rate, feas, best_rate, best_feas) -> bool:
    if feas != best_feas:
        return feas
    return rate > best_rate


def train_block(problem: BlockProblem, params: CircuitParams, seed: int = 0,
                epochs: Optional[int] = None, eta: Optional[float] = None) -> TrainReport:
    """Plain gradient descent on one block; tracks the best state ever decoded."""
    T = problem.train.epochs if epochs is None else epochs
    eta = problem.train.eta if eta is None else eta
    if T < 1:
        raise ValueError("need at least one epoch")
    if eta < 0:
        raise ValueError("learning rate must be non-negative")
    t0 = time.perf_counter()
    vec = params.to_vector()
    losses, rates = [], []
    best_state, best_rate, best_feas = None, -np.inf, False
    evals = 0
    for t in range(T):
        res = gradient(params.with_vector(vec), problem, (seed, problem.block.block_id, t))
        evals += res.circuit_evals
        losses.append(res.loss)
        ep_rate, ep_feas = -np.inf, False
        for st in [res.state] + res.candidates:
            r, f = _score(st, problem)
            if _better(r, f, ep_rate, ep_feas):
                ep_rate, ep_feas = r, f
                if _better(r, f, best_rate, best_feas):
                    best_state, best_rate, best_feas = st, r, f
        rates.append(ep_rate)
        vec = vec - eta * res.grad
    conv = detect_convergence(losses, problem.train.conv_delta, problem.train.conv_window)
    return TrainReport(losses, rates, best_state, best_rate, best_feas, conv, evals,
                       time.perf_counter() - t0, n_params=vec.size, final_params=list(vec))


def initial_state(n: int, override: np.ndarray) -> RISState:
    a = np.ones(n, dtype=np.int8)
    forced = override >= 0
    a[forced] = override[forced]
    return RISState(a, np.zeros(n))


def train(channels: ChannelSet, system: SystemConfig, train_cfg: TrainConfig, seed: int = 0,
          override: Optional[np.ndarray] = None) -> TrainReport:
    """Algorithm-level loop: partition, train each block with the others frozen, stitch.

    Blocks are visited in order; block b trains against the best global
    state found so far.
    """
    N = system.n_elements
    override = free_override(N) if override is None else np.asarray(override, dtype=np.int8)
    graph = build_graph(system.positions, system.w_decay, train_cfg.k_neighbors)
    blocks = partition(graph, train_cfg.block_cap)
    init_rng = np.random.default_rng(np.random.SeedSequence((seed, 7919)))
    current = initial_state(N, override)
    t0 = time.perf_counter()
    losses, rates = [], []
    evals, n_params, conv = 0, 0, 0
    best_state, best_rate, best_feas = None, -np.inf, False
    params_out = []
    for block in blocks:
        params = CircuitParams.initial(train_cfg.n_layers, block.size, len(block.edges),
                                       init_rng, train_cfg.freeze_edge_thetas)
        problem = BlockProblem(block, channels, system, train_cfg, current, override)
        rep = train_block(problem, params, seed)
        losses += rep.loss_trace
        rates += rep.min_rate_trace
        evals += rep.circuit_evals
        n_params += rep.n_params
        conv = max(conv, rep.convergence_epoch)
        params_out += rep.final_params
        if _better(rep.best_min_rate, rep.best_feasible, best_rate, best_feas):
            best_state, best_rate, best_feas = rep.best_state, rep.best_min_rate, rep.best_feasible
        current = best_state
    return TrainReport(losses, rates, best_state, best_rate, best_feas, conv, evals,
                       time.perf_counter() - t0, n_params=n_params, final_params=params_out)
