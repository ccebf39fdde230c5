"""System and training configuration.

Physical defaults follow the 28 GHz / 100 MHz setup used throughout the
package.  ``SystemConfig.build`` fills every derived quantity (wavelength,
grid spacing, aperture cap, per-UE powers and weights) so callers only
override what they care about.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0


def db2lin(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


def dbm2watt(x_dbm: float) -> float:
    return 10.0 ** ((x_dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class SystemConfig:
    """Physical constants and problem dimensions.

    Use :meth:`build` rather than the raw constructor; it derives the
    wavelength, ``d_min = wavelength / 2`` and the per-UE vectors.
    """

    carrier_freq: float
    wavelength: float
    bandwidth: float
    rician_kappa: float
    noise_power: tuple
    tx_powers: tuple
    n_elements: int
    d_min: float
    d_total: float
    n_min: int
    n_aps: int
    n_ues: int
    path_loss_exponents: tuple = (2.2, 3.8)
    ue_weights: tuple = ()
    lambda_phase: float = 1e-4
    lambda_aperture: float = 10.0
    lambda_act: float = 1.0
    w_decay: float = 0.0
    side_power_fraction: float = 0.1
    weighting: str = "uniform"
    softmin_tau: float = 0.5
    snr_db: Optional[float] = None

    def __post_init__(self):
        if self.n_elements < 1:
            raise ValueError("n_elements must be >= 1")
        if not 1 <= self.n_min <= self.n_elements:
            raise ValueError(f"n_min={self.n_min} outside [1, {self.n_elements}]")
        if self.d_total < self.d_min * (self.n_min - 1) - 1e-15:
            raise ValueError("d_total cannot host n_min elements at d_min spacing")
        if self.rician_kappa <= 0:
            raise ValueError("rician_kappa must be positive")
        if len(self.noise_power) != self.n_ues or len(self.tx_powers) != self.n_ues:
            raise ValueError("noise_power and tx_powers need one entry per UE")
        if min(self.noise_power) <= 0 or min(self.tx_powers) <= 0:
            raise ValueError("powers and noise must be strictly positive")
        w = np.asarray(self.ue_weights, dtype=float)
        if w.shape != (self.n_ues,) or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("ue_weights must be K non-negative entries summing to 1")
        if self.weighting not in ("uniform", "softmin"):
            raise ValueError(f"unknown weighting {self.weighting!r}")

    @classmethod
    def build(
        cls,
        n_elements: int = 4,
        n_aps: int = 2,
        n_ues: int = 3,
        carrier_freq: float = 28e9,
        bandwidth: float = 100e6,
        rician_kappa_db: float = 10.0,
        noise_power_dbm: float = -94.0,
        tx_power: float | Sequence[float] = 1.0,
        d_min: Optional[float] = None,
        d_total: Optional[float] = None,
        n_min: Optional[int] = None,
        ue_weights: Optional[Sequence[float]] = None,
        w_decay: Optional[float] = None,
        **kwargs,
    ) -> "SystemConfig":
        wavelength = SPEED_OF_LIGHT / carrier_freq
        if d_min is None:
            d_min = wavelength / 2.0
        if d_total is None:
            d_total = (n_elements - 1) * d_min
        if n_min is None:
            n_min = max(1, n_elements // 2)
        if ue_weights is None:
            ue_weights = [1.0 / n_ues] * n_ues
        if w_decay is None:
            w_decay = 1.0 / d_min
        if np.isscalar(tx_power):
            tx_power = [float(tx_power)] * n_ues
        noise = dbm2watt(noise_power_dbm)
        return cls(
            carrier_freq=carrier_freq,
            wavelength=wavelength,
            bandwidth=bandwidth,
            rician_kappa=db2lin(rician_kappa_db),
            noise_power=tuple([noise] * n_ues),
            tx_powers=tuple(float(p) for p in tx_power),
            n_elements=n_elements,
            d_min=d_min,
            d_total=d_total,
            n_min=n_min,
            n_aps=n_aps,
            n_ues=n_ues,
            ue_weights=tuple(float(w) for w in ue_weights),
            w_decay=w_decay,
            **kwargs,
        )

    @property
    def positions(self) -> np.ndarray:
        """Grid positions p_n = n * d_min (0-indexed)."""
        return np.arange(self.n_elements) * self.d_min

    def with_noise(self, noise_power: float | Sequence[float]) -> "SystemConfig":
        if np.isscalar(noise_power):
            noise_power = [float(noise_power)] * self.n_ues
        return replace(self, noise_power=tuple(float(x) for x in noise_power))


@dataclass(frozen=True)
class NoiseModel:
    """Depolarizing + readout noise.  ``p2`` applies to CNOT and CPhase."""

    p1: float = 0.001
    p2: float = 0.007
    p_read: float = 0.015

    def __post_init__(self):
        for name in ("p1", "p2", "p_read"):
            p = getattr(self, name)
            if not 0.0 <= p < 1.0:
                raise ValueError(f"{name}={p} outside [0, 1)")


@dataclass(frozen=True)
class TrainConfig:
    """Circuit and optimizer settings for one QGCN training run.

    ``shots=None`` selects exact (infinite-shot) mode.
    """

    n_layers: int = 2
    epochs: int = 50
    eta: float = 0.01
    shots: Optional[int] = 2048
    noise: Optional[NoiseModel] = None
    trajectories: int = 8
    circuit_form: str = "equations"
    freeze_edge_thetas: bool = False
    gradient_mode: str = "hybrid"
    block_cap: int = 6
    k_neighbors: int = 2
    conv_delta: float = 1e-3
    conv_window: int = 5

    def __post_init__(self):
        if self.circuit_form not in ("equations", "algorithm1"):
            raise ValueError(f"unknown circuit_form {self.circuit_form!r}")
        if self.gradient_mode not in ("hybrid", "loss"):
            raise ValueError(f"unknown gradient_mode {self.gradient_mode!r}")
        if self.shots is not None and self.shots < 1:
            raise ValueError("shots must be >= 1 or None for exact mode")
        if self.n_layers < 0 or self.epochs < 1 or self.eta < 0:
            raise ValueError("need n_layers >= 0, epochs >= 1, eta >= 0")

    @property
    def exact(self) -> bool:
        return self.shots is None


@dataclass(frozen=True)
class TimingConfig:
    """Per-coherence-block time budget (seconds) and Doppler spread (Hz)."""

    pilot_time: float = 0.1e-3
    opt_time: float = 18.3e-3
    switch_time: float = 0.0
    coherence_time: float = 1.5e-3
    doppler: float = 280.0

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"{f.name} must be non-negative")


# Config-file keys carry their unit; each maps onto a SystemConfig.build or
# TrainConfig argument.
_SYSTEM_KEYS = {
    "n_elements": ("n_elements", int),
    "n_aps": ("n_aps", int),
    "n_ues": ("n_ues", int),
    "carrier_freq_hz": ("carrier_freq", float),
    "bandwidth_hz": ("bandwidth", float),
    "rician_kappa_db": ("rician_kappa_db", float),
    "noise_power_dbm": ("noise_power_dbm", float),
    "tx_power_w": ("tx_power", float),
    "d_min_m": ("d_min", float),
    "d_total_m": ("d_total", float),
    "n_min": ("n_min", int),
    "w_decay_per_m": ("w_decay", float),
    "lambda_phase": ("lambda_phase", float),
    "lambda_aperture": ("lambda_aperture", float),
    "lambda_act": ("lambda_act", float),
    "side_power_fraction": ("side_power_fraction", float),
    "weighting": ("weighting", str),
    "softmin_tau": ("softmin_tau", float),
    "snr_db": ("snr_db", float),
}

_TRAIN_KEYS = {
    "n_layers": ("n_layers", int),
    "epochs": ("epochs", int),
    "learning_rate": ("eta", float),
    "shots": ("shots", int),
    "trajectories": ("trajectories", int),
    "circuit_form": ("circuit_form", str),
    "freeze_edge_thetas": ("freeze_edge_thetas", lambda s: s.lower() in ("1", "true", "yes", "on")),
    "gradient_mode": ("gradient_mode", str),
    "block_cap_elements": ("block_cap", int),
    "k_neighbors": ("k_neighbors", int),
}

_NOISE_KEYS = {
    "p1_depolarizing": "p1",
    "p2_depolarizing": "p2",
    "p_readout": "p_read",
}


_TIMING_KEYS = {
    "pilot_time_s": "pilot_time",
    "opt_time_s": "opt_time",
    "switch_time_s": "switch_time",
    "coherence_time_s": "coherence_time",
    "doppler_hz": "doppler",
}


def read_config_file(path: str | Path) -> dict:
    """Parse an INI-style config into ``{"system": {...}, "train": {...}, ...}``.

    Sections: ``[system]``, ``[train]``, ``[noise]``, ``[timing]``,
    ``[experiment]``.
    Unknown keys raise ``KeyError`` so typos do not silently fall back to
    defaults.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    parser.read(path)
    out = {"system": {}, "train": {}, "noise": {}, "timing": {}, "experiment": {}}
    for section in parser.sections():
        if section not in out:
            raise KeyError(f"{path}: unknown section [{section}]")
        for key, raw in parser.items(section):
            if section == "system":
                if key not in _SYSTEM_KEYS:
                    raise KeyError(f"{path}: unknown system key {key!r}")
                name, conv = _SYSTEM_KEYS[key]
                out["system"][name] = conv(raw)
            elif section == "train":
                if key not in _TRAIN_KEYS:
                    raise KeyError(f"{path}: unknown train key {key!r}")
                name, conv = _TRAIN_KEYS[key]
                out["train"][name] = conv(raw)
            elif section == "noise":
                if key not in _NOISE_KEYS:
                    raise KeyError(f"{path}: unknown noise key {key!r}")
                out["noise"][_NOISE_KEYS[key]] = float(raw)
            elif section == "timing":
                if key not in _TIMING_KEYS:
                    raise KeyError(f"{path}: unknown timing key {key!r}")
                out["timing"][_TIMING_KEYS[key]] = float(raw)
            else:
                out["experiment"][key] = raw
    return out


def train_config_fields() -> set:
    return {f.name for f in fields(TrainConfig)}
