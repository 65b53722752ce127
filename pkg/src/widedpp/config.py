"""System, channel and solver configuration plus the seeded randomness contract.

All configuration objects are frozen dataclasses, so they hash, compare by
value and can be shared between worker processes.  Angles are kept in
radians internally; configuration files store them in degrees.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .errors import (
    AntennaLayoutError,
    ConfigError,
    GridRatioError,
    StreamCountError,
    SubcarrierRatioError,
)

__all__ = [
    "SystemConfig",
    "ClusterConfig",
    "LceConfig",
    "Seed",
    "derive_subcarrier_frequencies",
    "spawn_trial_rng",
    "check_lce",
    "preset",
    "load_config",
    "config_hash",
]


@dataclass(frozen=True)
class SystemConfig:
    """Scalar system parameters of the DPP transmitter and the OFDM link.

    ``rho`` and ``sigma_n2`` are derived from ``snr_db`` with unit noise
    variance; only their ratio enters the rate expressions.
    """

    n_t: int = 256
    n_r: int = 4
    n_rf: int = 4
    n_s: int = 4
    n_ttd: int = 16
    m: int = 16
    f_c: float = 100e9
    f_s: float = 10e9
    k: int = 128
    snr_db: float = 10.0

    def __post_init__(self):
        for name in ("n_t", "n_r", "n_rf", "n_s", "n_ttd", "m", "k"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        if not (self.f_c > 0 and self.f_s > 0):
            raise ConfigError("f_c and f_s must be positive")
        if not np.isfinite(self.snr_db):
            raise ConfigError("snr_db must be finite")
        if self.n_t != self.m * self.n_ttd:
            raise AntennaLayoutError(
                f"n_t={self.n_t} must equal m*n_ttd={self.m}*{self.n_ttd}")
        if self.n_s > self.n_rf:
            raise StreamCountError(f"n_s={self.n_s} exceeds n_rf={self.n_rf}")
        if self.n_rf > self.n_t:
            raise StreamCountError(f"n_rf={self.n_rf} exceeds n_t={self.n_t}")
        if self.n_s > self.n_r:
            raise StreamCountError(f"n_s={self.n_s} exceeds n_r={self.n_r}")

    @property
    def sigma_n2(self) -> float:
        return 1.0

    @property
    def rho(self) -> float:
        return 10.0 ** (self.snr_db / 10.0)

    @property
    def eta(self) -> float:
        """Subcarrier spacing in Hz."""
        return self.f_s / self.k

    @property
    def fractional_bandwidth(self) -> float:
        return self.f_s / self.f_c

    @property
    def gain_factor(self) -> float:
        """rho / (N_s sigma_n^2), the SNR scaling inside the rate expression."""
        return self.rho / (self.n_s * self.sigma_n2)

    def with_n_ttd(self, n_ttd: int) -> "SystemConfig":
        if self.n_t % n_ttd:
            raise AntennaLayoutError(f"n_ttd={n_ttd} does not divide n_t={self.n_t}")
        return dataclasses.replace(self, n_ttd=n_ttd, m=self.n_t // n_ttd)

    def with_fractional_bandwidth(self, ratio: float) -> "SystemConfig":
        return dataclasses.replace(self, f_s=ratio * self.f_c)

    def replace(self, **changes) -> "SystemConfig":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class ClusterConfig:
    """Cluster channel statistics; angular spreads in radians."""

    n_c: int = 4
    n_p: int = 10
    tau_max: float = 20e-9
    sigma_tau: float = 1e-9
    sigma_theta_t: float = float(np.deg2rad(5.0))
    sigma_theta_r: float = float(np.deg2rad(5.0))

    def __post_init__(self):
        if self.n_c < 1 or self.n_p < 1:
            raise ConfigError("n_c and n_p must be positive")
        for name in ("tau_max", "sigma_tau", "sigma_theta_t", "sigma_theta_r"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise ConfigError(f"{name} must be finite and non-negative")

    def with_angular_spread_deg(self, deg: float) -> "ClusterConfig":
        rad = float(np.deg2rad(deg))
        return dataclasses.replace(self, sigma_theta_t=rad, sigma_theta_r=rad)

    def replace(self, **changes) -> "ClusterConfig":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class LceConfig:
    """Grid and subsampling parameters of the low-complexity solver."""

    g: int = 1024
    g_c: int = 256
    g_a: int = 8
    k_prime: int = 4

    def __post_init__(self):
        if self.g < 1 or self.g_c < 1 or self.k_prime < 1 or self.g_a < 0:
            raise ConfigError("grid sizes and k_prime must be positive, g_a >= 0")
        if self.g % self.g_c:
            raise GridRatioError(f"g={self.g} is not a multiple of g_c={self.g_c}")
        if self.g % 2:
            raise GridRatioError(f"g={self.g} must be even")

    @property
    def delta_g(self) -> int:
        return self.g // self.g_c

    def delta_k(self, k: int) -> int:
        if k % self.k_prime:
            raise SubcarrierRatioError(f"K={k} is not a multiple of k_prime={self.k_prime}")
        return k // self.k_prime

    def replace(self, **changes) -> "LceConfig":
        return dataclasses.replace(self, **changes)


def check_lce(cfg: SystemConfig, lce: LceConfig) -> None:
    """Raise if ``lce`` cannot be used together with ``cfg``."""
    lce.delta_k(cfg.k)


@dataclass(frozen=True)
class Seed:
    master_seed: int
    trial_index: int = 0

    def __post_init__(self):
        if not 0 <= self.master_seed < 2**64:
            raise ConfigError("master_seed must be a 64-bit unsigned integer")
        if self.trial_index < 0:
            raise ConfigError("trial_index must be non-negative")


def derive_subcarrier_frequencies(cfg: SystemConfig) -> np.ndarray:
    """Subcarrier centre frequencies in Hz, symmetric about ``f_c``."""
    k = np.arange(cfg.k, dtype=float)
    return cfg.f_c + (k - (cfg.k - 1) / 2.0) * cfg.eta


def spawn_trial_rng(seed: Seed) -> np.random.Generator:
    # SeedSequence spawn keys give statistically independent child streams.
    ss = np.random.SeedSequence(entropy=seed.master_seed, spawn_key=(seed.trial_index,))
    return np.random.Generator(np.random.PCG64(ss))


_DESK_SYSTEM = SystemConfig(n_t=64, n_ttd=8, m=8, k=32)
_DESK_LCE = LceConfig(g=256, g_c=64, g_a=8, k_prime=4)


def preset(name: str = "desk") -> tuple[SystemConfig, ClusterConfig, LceConfig]:
    """Return ``(system, clusters, lce)`` for the ``desk`` or ``paper`` preset."""
    if name == "desk":
        return _DESK_SYSTEM, ClusterConfig(), _DESK_LCE
    if name == "paper":
        return SystemConfig(), ClusterConfig(), LceConfig()
    raise ConfigError(f"unknown preset {name!r}")


_ANGLE_KEYS = ("sigma_theta_t", "sigma_theta_r")


def _cluster_from_mapping(d: dict, base: ClusterConfig) -> ClusterConfig:
    d = dict(d)
    for key in _ANGLE_KEYS:
        if key in d:
            d[key] = float(np.deg2rad(d[key]))
    return dataclasses.replace(base, **d)


def load_config(path, preset_name: str | None = None) -> tuple[SystemConfig, ClusterConfig, LceConfig]:
    """Read ``system``/``clusters``/``lce`` sections from a YAML file.

    Keys are the dataclass field names; angular spreads are given in degrees.
    Missing keys fall back to the preset (``desk`` unless the file or the
    caller names another one).
    """
    raw = yaml.safe_load(Path(path).read_text()) or {}
    return config_from_mapping(raw, preset_name)


def config_from_mapping(raw: dict, preset_name: str | None = None):
    name = preset_name or raw.get("preset", "desk")
    system, clusters, lce = preset(name)
    sys_d = dict(raw.get("system", {}))
    if "n_ttd" in sys_d and "m" not in sys_d:
        sys_d["m"] = sys_d.get("n_t", system.n_t) // sys_d["n_ttd"]
    if "n_t" in sys_d and "n_ttd" not in sys_d and "m" not in sys_d:
        sys_d["m"] = sys_d["n_t"] // system.n_ttd
    system = dataclasses.replace(system, **sys_d)
    clusters = _cluster_from_mapping(raw.get("clusters", {}), clusters)
    lce = dataclasses.replace(lce, **raw.get("lce", {}))
    return system, clusters, lce


def config_to_mapping(system: SystemConfig, clusters: ClusterConfig, lce: LceConfig) -> dict:
    cl = dataclasses.asdict(clusters)
    for key in _ANGLE_KEYS:
        cl[key] = float(np.rad2deg(cl[key]))
    return {"system": dataclasses.asdict(system), "clusters": cl, "lce": dataclasses.asdict(lce)}


def config_hash(*configs) -> str:
    payload = json.dumps(
        [{"type": type(c).__name__, **dataclasses.asdict(c)} for c in configs],
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode()).hexdigest()[:16]
