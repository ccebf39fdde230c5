"""RIS interaction graph: k-nearest-neighbour edges on the element line,
distance-decayed weights, interval partitioning and block stitching."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .channel import RISState, aperture_length, effective_spacings

QUBIT_WARN_CAP = 13  # elements per block before statevector cost explodes (> 26 qubits)


@dataclass(frozen=True)
class RISGraph:
    vertex_ids: np.ndarray
    edges: tuple  # ((i, j), ...) with i < j, global indices
    weights: np.ndarray
    positions: np.ndarray

    @property
    def n_vertices(self) -> int:
        return len(self.vertex_ids)

    def neighbors(self) -> dict:
        nb = {int(v): [] for v in self.vertex_ids}
        for i, j in self.edges:
            nb[i].append(j)
            nb[j].append(i)
        return nb


@dataclass(frozen=True)
class SubgraphBlock:
    block_id: int
    vertex_ids: tuple
    edges: tuple  # local (i, j) pairs into vertex_ids
    weights: np.ndarray
    positions: np.ndarray
    boundary_vertices: tuple = ()

    @property
    def size(self) -> int:
        return len(self.vertex_ids)

    @property
    def n_qubits(self) -> int:
        return 2 * self.size

    def neighbors(self) -> list:
        nb = [[] for _ in range(self.size)]
        for i, j in self.edges:
            nb[i].append(j)
            nb[j].append(i)
        return nb


def edge_weight(distance, w_decay: float):
    return np.exp(-w_decay * np.abs(distance))


def build_graph(positions: Sequence[float], w_decay: float, k_neighbors: int = 2) -> RISGraph:
    """Connect every vertex to its ``k_neighbors`` nearest vertices (ties to lower index)."""
    p = np.asarray(positions, dtype=float)
    if p.size == 0:
        raise ValueError("cannot build a graph with no vertices")
    if k_neighbors < 1:
        raise ValueError("k_neighbors must be >= 1")
    if p.size > 1 and np.any(np.diff(p) <= 0):
        raise ValueError("positions must be strictly increasing")
    n = p.size
    edges = set()
    for i in range(n):
        d = np.abs(p - p[i])
        d[i] = np.inf
        order = np.lexsort((np.arange(n), d))
        for j in order[:min(k_neighbors, n - 1)]:
            edges.add((min(i, int(j)), max(i, int(j))))
    edges = tuple(sorted(edges))
    w = np.array([edge_weight(p[j] - p[i], w_decay) for i, j in edges])
    return RISGraph(np.arange(n), edges, w, p)


def partition(graph: RISGraph, cap: int) -> list:
    """Greedy contiguous intervals of at most ``cap`` vertices; cut edges are dropped."""
    if cap < 1:
        raise ValueError("cap must be >= 1")
    if cap > QUBIT_WARN_CAP:
        warnings.warn(f"block cap {cap} needs {2 * cap} qubits; statevector cost is 2^{2 * cap}",
                      RuntimeWarning, stacklevel=2)
    n = graph.n_vertices
    block_of = np.empty(n, dtype=int)
    starts = list(range(0, n, cap))
    for b, s in enumerate(starts):
        block_of[s:s + cap] = b
    blocks = []
    for b, s in enumerate(starts):
        ids = tuple(range(s, min(s + cap, n)))
        local = {v: k for k, v in enumerate(ids)}
        edges, weights, boundary = [], [], set()
        for (i, j), w in zip(graph.edges, graph.weights):
            bi, bj = block_of[i], block_of[j]
            if bi == b and bj == b:
                edges.append((local[i], local[j]))
                weights.append(w)
            elif bi == b:
                boundary.add(i)
            elif bj == b:
                boundary.add(j)
        blocks.append(SubgraphBlock(
            block_id=b, vertex_ids=ids, edges=tuple(edges), weights=np.array(weights),
            positions=graph.positions[list(ids)], boundary_vertices=tuple(sorted(boundary))))
    return blocks


def estimated_positions(mean_activation, d_min: float) -> np.ndarray:
    """p_hat_n = d_min * sum_{k<n} <a_k>."""
    a = np.asarray(mean_activation, dtype=float)
    return d_min * np.concatenate(([0.0], np.cumsum(a)[:-1]))


def refresh_weights(edges, mean_activation, d_min: float, w_decay: float) -> np.ndarray:
    """New edge weights from activation-weighted position estimates."""
    a = np.asarray(mean_activation, dtype=float)
    if np.any(a < 0) or np.any(a > 1):
        raise ValueError("mean activation must lie in [0, 1]")
    p_hat = estimated_positions(a, d_min)
    if len(edges) == 0:
        return np.zeros(0)
    e = np.asarray(edges)
    return edge_weight(p_hat[e[:, 1]] - p_hat[e[:, 0]], w_decay)


@dataclass
class StitchResult:
    state: RISState
    feasible: bool
    n_active: int
    aperture: float
    d_eff: np.ndarray = field(default_factory=lambda: np.zeros(0))


def stitch(block_results, n_elements: Optional[int] = None, config=None) -> StitchResult:
    """Assemble per-block ``(vertex_ids, RISState)`` pairs into one global state.

    Coverage must be exact: every vertex exactly once.  Feasibility is
    reported, never repaired.
    """
    ids = [v for vids, _ in block_results for v in vids]
    n = n_elements if n_elements is not None else (max(ids) + 1 if ids else 0)
    if sorted(ids) != list(range(n)):
        missing = sorted(set(range(n)) - set(ids))
        dup = sorted({v for v in ids if ids.count(v) > 1})
        raise ValueError(f"block coverage broken: missing={missing} duplicate={dup}")
    a = np.zeros(n, dtype=np.int8)
    phi = np.zeros(n)
    for vids, st in block_results:
        if len(vids) != len(st.activation):
            raise ValueError("block state length does not match its vertex ids")
        a[list(vids)] = st.activation
        phi[list(vids)] = st.phases
    state = RISState(a, phi)
    d_min = config.d_min if config is not None else 1.0
    d_eff = effective_spacings(a, d_min)
    aperture = aperture_length(a, d_min)
    feasible = True
    if config is not None:
        feasible = state.n_active >= config.n_min and aperture <= config.d_total + 1e-12
    return StitchResult(state, feasible, state.n_active, aperture, d_eff)
