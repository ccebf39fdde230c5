"""Spacing-dependent channel model for a double-sided RIS on a dense grid.

Elements sit at p_n = n * d_min.  Each AP/UE link is Rician with a
far-field LoS term (free-space amplitude, common path phase and a
per-element steering phase) plus a CN(0, 1) scattered term.  Elements,
APs and UEs carry a side label; a link through an element exists only
when both terminals face the element's side.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .config import SystemConfig

FRONT, BACK = 0, 1
TWO_PI = 2.0 * np.pi


def wrap_phase(phi):
    """Reduce angles into [0, 2pi)."""
    out = np.mod(np.asarray(phi, dtype=float), TWO_PI)
    # np.mod can return exactly 2pi for tiny negative inputs
    return np.where(out >= TWO_PI, 0.0, out)


@dataclass
class Scenario:
    """AP/UE geometry, side labels and one scattered-channel draw."""

    ap_angles: np.ndarray
    ue_angles: np.ndarray
    ap_ris_distances: np.ndarray  # M x N
    ris_ue_distances: np.ndarray  # N x K
    beta: np.ndarray  # K
    element_sides: np.ndarray  # N, FRONT/BACK
    ap_sides: np.ndarray  # M
    ue_sides: np.ndarray  # K
    nlos_ap: np.ndarray  # M x N complex
    nlos_ue: np.ndarray  # N x K complex

    @property
    def n_aps(self) -> int:
        return len(self.ap_angles)

    @property
    def n_ues(self) -> int:
        return len(self.ue_angles)

    @property
    def n_elements(self) -> int:
        return len(self.element_sides)

    def digest(self) -> str:
        """Stable hash of every array, used to check paired runs."""
        import hashlib

        h = hashlib.sha256()
        for name in ("ap_angles", "ue_angles", "ap_ris_distances", "ris_ue_distances",
                     "beta", "element_sides", "ap_sides", "ue_sides", "nlos_ap", "nlos_ue"):
            h.update(np.ascontiguousarray(getattr(self, name)).tobytes())
        return h.hexdigest()[:16]


@dataclass
class RISState:
    """Decision variables: activation bits and phase profile."""

    activation: np.ndarray
    phases: np.ndarray

    def __post_init__(self):
        self.activation = np.asarray(self.activation, dtype=np.int8).copy()
        self.phases = wrap_phase(self.phases).copy()
        if self.activation.shape != self.phases.shape:
            raise ValueError("activation and phases must have the same length")
        if not np.all((self.activation == 0) | (self.activation == 1)):
            raise ValueError("activation entries must be 0 or 1")

    @classmethod
    def all_active(cls, n: int, phases: Optional[Sequence[float]] = None) -> "RISState":
        return cls(np.ones(n, dtype=np.int8), np.zeros(n) if phases is None else phases)

    @property
    def n_active(self) -> int:
        return int(self.activation.sum())

    def copy(self) -> "RISState":
        return RISState(self.activation.copy(), self.phases.copy())

    def __eq__(self, other):
        if not isinstance(other, RISState):
            return NotImplemented
        return (np.array_equal(self.activation, other.activation)
                and np.array_equal(self.phases, other.phases))


@dataclass
class ChannelSet:
    """Sampled per-element channels plus the side masks that gate them."""

    h_ap: np.ndarray  # M x N
    h_ue: np.ndarray  # N x K
    beta: np.ndarray  # K
    positions: np.ndarray  # N
    ap_mask: np.ndarray  # M x N bool, AP faces element's side
    ue_mask: np.ndarray  # N x K bool
    powered: np.ndarray  # N bool, element's side is not in standby

    @property
    def n_elements(self) -> int:
        return self.h_ap.shape[1]

    @property
    def n_ues(self) -> int:
        return self.h_ue.shape[1]


# ---------------------------------------------------------------- LoS / Rician

def los_components(scenario: Scenario, config: SystemConfig):
    """Free-space LoS matrices (M x N AP->RIS, N x K RIS->UE)."""
    r_ap = np.asarray(scenario.ap_ris_distances, dtype=float)
    r_ue = np.asarray(scenario.ris_ue_distances, dtype=float)
    if np.any(r_ap <= 0) or np.any(r_ue <= 0):
        raise ValueError("all AP-RIS and RIS-UE distances must be strictly positive")
    lam = config.wavelength
    k0 = TWO_PI / lam
    p = np.arange(scenario.n_elements) * config.d_min
    amp_ap = lam / (4 * np.pi * r_ap)
    amp_ue = lam / (4 * np.pi * r_ue)
    steer_ap = np.exp(1j * k0 * np.outer(np.sin(scenario.ap_angles), p))  # M x N
    steer_ue = np.exp(-1j * k0 * np.outer(p, np.sin(scenario.ue_angles)))  # N x K
    h_ap = amp_ap * np.exp(-1j * k0 * r_ap) * steer_ap
    h_ue = amp_ue * np.exp(-1j * k0 * r_ue) * steer_ue
    return h_ap, h_ue


def draw_nlos(shape, rng: np.random.Generator) -> np.ndarray:
    """CN(0, 1) entries."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def side_masks(scenario: Scenario):
    ap_mask = scenario.ap_sides[:, None] == scenario.element_sides[None, :]
    ue_mask = scenario.element_sides[:, None] == scenario.ue_sides[None, :]
    return ap_mask, ue_mask


def powered_sides(scenario: Scenario, config: SystemConfig) -> np.ndarray:
    """Per-element flag: is the element's side powered?

    A side is powered when the cascaded LoS power routed through it is
    more than ``side_power_fraction`` of the total.  With no LoS power at
    all, both sides stay powered.
    """
    h_ap, h_ue = los_components(scenario, config)
    ap_mask, ue_mask = side_masks(scenario)
    pa = (np.abs(h_ap) ** 2 * ap_mask).sum(axis=0)  # N
    pu = (np.abs(h_ue) ** 2 * ue_mask).sum(axis=1)  # N
    per_element = pa * pu
    total = per_element.sum()
    powered = np.ones(scenario.n_elements, dtype=bool)
    if total <= 0:
        return powered
    for side in (FRONT, BACK):
        sel = scenario.element_sides == side
        if sel.any() and per_element[sel].sum() <= config.side_power_fraction * total:
            powered[sel] = False
    return powered


def sample_channels(scenario: Scenario, config: SystemConfig,
                    rng: Optional[np.random.Generator] = None) -> ChannelSet:
    """Combine LoS with scattered terms: h = sqrt(k/(k+1)) LoS + sqrt(1/(k+1)) NLoS.

    The CN(0, 1) scattered draw is scaled by the link's free-space amplitude
    lambda / (4 pi r), so both terms share the same large-scale loss.

    With ``rng`` the scattered terms are redrawn; otherwise the scenario's
    stored draw is used.
    """
    kappa = config.rician_kappa
    if kappa <= 0:
        raise ValueError("rician_kappa must be positive")
    h_ap_los, h_ue_los = los_components(scenario, config)
    if rng is None:
        nlos_ap, nlos_ue = scenario.nlos_ap, scenario.nlos_ue
    else:
        nlos_ap = draw_nlos(h_ap_los.shape, rng)
        nlos_ue = draw_nlos(h_ue_los.shape, rng)
    w_los = np.sqrt(kappa / (kappa + 1.0))
    w_nlos = np.sqrt(1.0 / (kappa + 1.0))
    ap_mask, ue_mask = side_masks(scenario)
    # scatter shares the link's free-space amplitude, so kappa is the true power ratio
    return ChannelSet(
        h_ap=w_los * h_ap_los + w_nlos * np.abs(h_ap_los) * nlos_ap,
        h_ue=w_los * h_ue_los + w_nlos * np.abs(h_ue_los) * nlos_ue,
        beta=np.asarray(scenario.beta, dtype=float),
        positions=np.arange(scenario.n_elements) * config.d_min,
        ap_mask=ap_mask,
        ue_mask=ue_mask,
        powered=powered_sides(scenario, config),
    )


# ---------------------------------------------------------------- coupling

def mutual_coupling(active_positions, config: SystemConfig) -> np.ndarray:
    """C = I + C_mutual over the given (active) element positions."""
    p = np.asarray(active_positions, dtype=float)
    if p.size == 0:
        raise ValueError("need at least one active element")
    if p.size > 1 and np.any(np.diff(p) <= 0):
        raise ValueError("positions must be strictly increasing (no duplicates)")
    k0 = TWO_PI / config.wavelength
    d = np.abs(p[:, None] - p[None, :])
    x = k0 * d
    off = ~np.eye(p.size, dtype=bool)
    cm = np.zeros((p.size, p.size), dtype=complex)
    cm[off] = np.sin(x[off]) / x[off] * np.exp(-1j * x[off])
    return np.eye(p.size, dtype=complex) + cm


def effective_spacings(activation, d_min: float) -> np.ndarray:
    idx = np.flatnonzero(np.asarray(activation))
    if idx.size < 2:
        return np.zeros(0)
    return np.diff(idx) * d_min


def aperture_length(activation, d_min: float) -> float:
    return float(effective_spacings(activation, d_min).sum())


def is_feasible(state: RISState, config: SystemConfig) -> bool:
    return (state.n_active >= config.n_min
            and aperture_length(state.activation, config.d_min) <= config.d_total + 1e-12)


# ---------------------------------------------------------------- gains / rates

def _effective_active(state: RISState, channels: ChannelSet) -> np.ndarray:
    if state.activation.shape[0] != channels.n_elements:
        raise ValueError(f"state has {state.activation.shape[0]} elements, "
                         f"channels have {channels.n_elements}")
    return (state.activation.astype(bool)) & channels.powered


def _masked(channels: ChannelSet):
    return channels.h_ap * channels.ap_mask, channels.h_ue * channels.ue_mask


def cascaded_gain(state: RISState, channels: ChannelSet, config: SystemConfig) -> np.ndarray:
    """M x K matrix of h_{m,k} = sqrt(beta_k) h_m^H C R h_k."""
    act = _effective_active(state, channels)
    h_ap, h_ue = _masked(channels)
    M, K = h_ap.shape[0], h_ue.shape[1]
    if not act.any():
        return np.zeros((M, K), dtype=complex)
    idx = np.flatnonzero(act)
    C = mutual_coupling(channels.positions[idx], config)
    refl = np.exp(1j * state.phases[idx])
    lhs = h_ap[:, idx].conj() @ C  # M x A
    return np.sqrt(channels.beta)[None, :] * (lhs @ (refl[:, None] * h_ue[idx, :]))


def _element_terms(activation, channels: ChannelSet, config: SystemConfig):
    """c[n, k] such that sum_m h_{m,k} = sum_n c[n, k] exp(j phi_n)."""
    act = np.asarray(activation).astype(bool) & channels.powered
    h_ap, h_ue = _masked(channels)
    N, K = h_ue.shape
    c = np.zeros((N, K), dtype=complex)
    if not act.any():
        return c
    idx = np.flatnonzero(act)
    C = mutual_coupling(channels.positions[idx], config)
    u = h_ap[:, idx].sum(axis=0).conj() @ C  # A
    c[idx] = np.sqrt(channels.beta)[None, :] * u[:, None] * h_ue[idx, :]
    return c


def received_powers(state: RISState, channels: ChannelSet, config: SystemConfig) -> np.ndarray:
    g = cascaded_gain(state, channels, config).sum(axis=0)
    return np.asarray(config.tx_powers) * np.abs(g) ** 2


def sinr_from_powers(s: np.ndarray, noise) -> np.ndarray:
    noise = np.asarray(noise, dtype=float)
    return s / (s.sum(axis=-1, keepdims=True) - s + noise)


def sinr_and_rates(state: RISState, channels: ChannelSet, config: SystemConfig):
    s = received_powers(state, channels, config)
    gamma = sinr_from_powers(s, config.noise_power)
    return gamma, np.log2(1.0 + gamma)


def objective_min_rate(state: RISState, channels: ChannelSet, config: SystemConfig) -> float:
    return float(sinr_and_rates(state, channels, config)[1].min())


def softmin_weights(rates, tau: float) -> np.ndarray:
    z = -np.asarray(rates, dtype=float) / tau
    z -= z.max()
    w = np.exp(z)
    return w / w.sum()


def penalty_terms(state: RISState, config: SystemConfig) -> float:
    act = state.activation.astype(bool)
    phase_pen = config.lambda_phase * float(np.sum(state.phases[act] ** 2))
    aperture_pen = config.lambda_aperture * float(
        aperture_length(state.activation, config.d_min) > config.d_total + 1e-12)
    deficit = max(0, config.n_min - state.n_active)
    return phase_pen + aperture_pen + config.lambda_act * deficit ** 2


def loss(state: RISState, channels: ChannelSet, config: SystemConfig,
         weights: Optional[np.ndarray] = None) -> float:
    """Weighted-rate loss with phase, aperture and activation penalties."""
    w = np.asarray(config.ue_weights if weights is None else weights, dtype=float)
    _, rates = sinr_and_rates(state, channels, config)
    return float(-np.dot(w, rates) + penalty_terms(state, config))


def rate_phase_gradient(state: RISState, channels: ChannelSet, config: SystemConfig,
                        weights: Optional[np.ndarray] = None) -> np.ndarray:
    """d(sum_k w_k R_k)/d(phi_n), analytic.  Zero for inactive elements."""
    w = np.asarray(config.ue_weights if weights is None else weights, dtype=float)
    c = _element_terms(state.activation, channels, config)
    e = np.exp(1j * state.phases)
    ce = c * e[:, None]  # N x K
    g = ce.sum(axis=0)  # K
    P = np.asarray(config.tx_powers)
    noise = np.asarray(config.noise_power)
    s = P * np.abs(g) ** 2
    ds = -2.0 * P[None, :] * np.imag(g.conj()[None, :] * ce)  # N x K
    stot = s.sum()
    dstot = ds.sum(axis=1)  # N
    a = 1.0 / (stot + noise)  # K
    b = 1.0 / (stot - s + noise)  # K
    dr = (dstot[:, None] * a[None, :] - (dstot[:, None] - ds) * b[None, :]) / math.log(2.0)
    return dr @ w


def loss_phase_gradient(state: RISState, channels: ChannelSet, config: SystemConfig,
                        weights: Optional[np.ndarray] = None) -> np.ndarray:
    """dL/dphi_n (phase penalty included, wrap discontinuity ignored)."""
    grad = -rate_phase_gradient(state, channels, config, weights)
    grad += 2.0 * config.lambda_phase * state.phases * state.activation
    return grad


# ---------------------------------------------------------------- coherence

def bessel_j0(x: float) -> float:
    """J0 via the ascending series below 8 and the Hankel asymptotic form above."""
    x = abs(float(x))
    if x < 8.0:
        q = (x / 2.0) ** 2
        term, total, k = 1.0, 1.0, 0
        while abs(term) > 1e-17 * max(1.0, abs(total)):
            k += 1
            term *= -q / (k * k)
            total += term
            if k > 200:
                break
        return total
    # Hankel series, |a_k| = prod_{i<=k} (2i-1)^2 / (k! 8^k); stop at the smallest term
    p_sum, q_sum = 1.0, 0.0
    coef, prev = 1.0, 1.0
    for k in range(1, 40):
        coef *= (2 * k - 1) ** 2 / (k * 8.0)
        term = coef / x ** k
        if term > prev or term < 1e-17:
            break
        prev = term
        sign = (-1) ** (k // 2)
        if k % 2 == 0:
            p_sum += sign * term
        else:
            q_sum -= sign * term
    chi = x - np.pi / 4
    return math.sqrt(2.0 / (np.pi * x)) * (p_sum * math.cos(chi) - q_sum * math.sin(chi))


@dataclass(frozen=True)
class CoherenceReport:
    feasible: bool
    rho: float
    budget_used: float
    margin: float


def coherence_report(t_pilot: float, t_opt: float, t_switch: float, t_coherence: float,
                     doppler: float) -> CoherenceReport:
    """Timing feasibility T_p + T_opt + T_switch < T_c and rho = J0(2 pi f_D T_c)."""
    if min(t_pilot, t_opt, t_switch, t_coherence, doppler) < 0:
        raise ValueError("durations and Doppler must be non-negative")
    used = t_pilot + t_opt + t_switch
    return CoherenceReport(
        feasible=used < t_coherence,
        rho=bessel_j0(2 * np.pi * doppler * t_coherence),
        budget_used=used / t_coherence if t_coherence > 0 else math.inf,
        margin=t_coherence - used,
    )
