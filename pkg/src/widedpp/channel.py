"""Wideband THz cluster channels with beam split.

The channel at subcarrier ``k`` is a sum of ``N_c * N_p`` rank-one subpath
terms whose spatial angles scale with ``f_k / f_c``.  Note the plain
transpose on the transmit response: the transmit beam that serves a path with
physical direction ``sin(theta)`` is ``conj(a(sin(theta))) = a(-sin(theta))``,
so precoders and atoms for that path sit at grid angle ``-sin(theta)``.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import (
    ClusterConfig,
    Seed,
    SystemConfig,
    config_hash,
    derive_subcarrier_frequencies,
    spawn_trial_rng,
)

__all__ = [
    "Subpath",
    "ChannelSet",
    "ula_response",
    "draw_clusters",
    "assemble_channels",
    "generate_channels",
    "inject_channel_error",
    "save_channels",
    "load_channels",
]


@dataclass(frozen=True)
class Subpath:
    alpha: complex
    tau: float
    sin_theta_t: float
    sin_theta_r: float
    cluster: int = 0
    theta_t: float = float("nan")
    theta_r: float = float("nan")


@dataclass(frozen=True, eq=False)
class ChannelSet:
    """Per-subcarrier channels ``h[k]`` of shape ``(N_R, N_T)``."""

    h: np.ndarray
    subpaths: tuple
    cfg: SystemConfig
    seed: Seed | None = None
    meta: dict = field(default_factory=dict)

    @property
    def k(self) -> int:
        return self.h.shape[0]

    def with_h(self, h) -> "ChannelSet":
        return dataclasses.replace(self, h=h)

    def digest(self) -> str:
        import hashlib

        return hashlib.sha256(np.ascontiguousarray(self.h).tobytes()).hexdigest()


def ula_response(n: int, x) -> np.ndarray:
    """Half-wavelength ULA response ``exp(-j*pi*i*x) / sqrt(n)``, i = 0..n-1.

    ``x`` may be an array; the antenna axis is appended last.
    """
    x = np.asarray(x, dtype=float)
    idx = np.arange(n)
    return np.exp(-1j * np.pi * x[..., None] * idx) / np.sqrt(n)


def draw_clusters(cfg: SystemConfig, cc: ClusterConfig, rng: np.random.Generator) -> list[Subpath]:
    """Draw subpath parameters of the Laplacian cluster model.

    Cluster means: AoD/AoA uniform on [0, 2pi], delay uniform on [0, tau_max].
    Subpath offsets are Laplacian with scale ``sigma / sqrt(2)`` so ``sigma``
    is the offset's standard deviation.  Negative delays are clamped to zero.
    """
    n_c, n_p = cc.n_c, cc.n_p
    mean_t = rng.uniform(0.0, 2 * np.pi, n_c)
    mean_r = rng.uniform(0.0, 2 * np.pi, n_c)
    mean_tau = rng.uniform(0.0, cc.tau_max, n_c)
    b = 1.0 / np.sqrt(2.0)
    d_t = rng.laplace(0.0, cc.sigma_theta_t * b, (n_c, n_p))
    d_r = rng.laplace(0.0, cc.sigma_theta_r * b, (n_c, n_p))
    d_tau = rng.laplace(0.0, cc.sigma_tau * b, (n_c, n_p))
    alpha = (rng.standard_normal((n_c, n_p)) + 1j * rng.standard_normal((n_c, n_p))) / np.sqrt(2)

    theta_t = mean_t[:, None] + d_t
    theta_r = mean_r[:, None] + d_r
    sin_t, sin_r = np.sin(theta_t), np.sin(theta_r)
    tau = np.maximum(mean_tau[:, None] + d_tau, 0.0)
    return [
        Subpath(complex(alpha[i, j]), float(tau[i, j]), float(sin_t[i, j]), float(sin_r[i, j]), i,
                float(theta_t[i, j]), float(theta_r[i, j]))
        for i in range(n_c)
        for j in range(n_p)
    ]


def _path_arrays(subpaths):
    alpha = np.array([p.alpha for p in subpaths], dtype=complex)
    tau = np.array([p.tau for p in subpaths], dtype=float)
    sin_t = np.array([p.sin_theta_t for p in subpaths], dtype=float)
    sin_r = np.array([p.sin_theta_r for p in subpaths], dtype=float)
    return alpha, tau, sin_t, sin_r


def assemble_channels(subpaths, cfg: SystemConfig, n_r: int | None = None, seed: Seed | None = None) -> ChannelSet:
    n_r = cfg.n_r if n_r is None else n_r
    freqs = derive_subcarrier_frequencies(cfg)
    alpha, tau, sin_t, sin_r = _path_arrays(subpaths)
    ratio = (freqs / cfg.f_c)[:, None]
    a_t = ula_response(cfg.n_t, ratio * sin_t)  # (K, P, N_T)
    a_r = ula_response(n_r, ratio * sin_r)  # (K, P, N_R)
    gains = alpha * np.exp(-2j * np.pi * freqs[:, None] * tau)  # (K, P)
    scale = np.sqrt(cfg.n_t * n_r / len(subpaths))
    h = scale * np.einsum("kp,kpr,kpt->krt", gains, a_r, a_t)
    return ChannelSet(h=h, subpaths=tuple(subpaths), cfg=cfg, seed=seed)


def generate_channels(cfg: SystemConfig, cc: ClusterConfig, seed: Seed | np.random.Generator) -> ChannelSet:
    """Draw one channel realization; ``seed`` may be a Seed or a live generator."""
    if isinstance(seed, Seed):
        rng, tag = spawn_trial_rng(seed), seed
    else:
        rng, tag = seed, None
    return assemble_channels(draw_clusters(cfg, cc, rng), cfg, seed=tag)


def inject_channel_error(ch: ChannelSet, nmse: float, rng: np.random.Generator) -> ChannelSet:
    """Add complex Gaussian error scaled so every subcarrier has error ratio ``nmse``."""
    if not np.isfinite(nmse) or nmse < 0:
        raise ValueError("nmse must be finite and non-negative")
    if nmse == 0:
        return ch
    h = ch.h
    h_pow = np.sum(np.abs(h) ** 2, axis=(1, 2))
    if np.any(h_pow == 0):
        raise ValueError("cannot scale error relative to an all-zero channel")
    e = rng.standard_normal(h.shape) + 1j * rng.standard_normal(h.shape)
    e_pow = np.sum(np.abs(e) ** 2, axis=(1, 2))
    e *= np.sqrt(nmse * h_pow / e_pow)[:, None, None]
    return dataclasses.replace(ch, h=h + e, meta={**ch.meta, "nmse": nmse})


def channel_nmse(h_true, h_est) -> float:
    """Subcarrier-averaged normalized squared error."""
    num = np.sum(np.abs(h_est - h_true) ** 2, axis=(-2, -1))
    den = np.sum(np.abs(h_true) ** 2, axis=(-2, -1))
    return float(np.mean(num / den))


def save_channels(ch: ChannelSet, path) -> Path:
    """Write a ChannelSet to ``.npz``.

    Arrays: ``h`` (K, N_R, N_T) complex128, ``alpha``, ``tau``, ``sin_theta_t``,
    ``sin_theta_r``, ``cluster``.  ``meta`` holds a JSON string with the
    system config, seed and ``config_hash``.
    """
    path = Path(path)
    alpha, tau, sin_t, sin_r = _path_arrays(ch.subpaths)
    meta = {
        "system": dataclasses.asdict(ch.cfg),
        "config_hash": config_hash(ch.cfg),
        "seed": None if ch.seed is None else dataclasses.asdict(ch.seed),
        "digest": ch.digest(),
    }
    np.savez(
        path,
        h=ch.h,
        alpha=alpha,
        tau=tau,
        sin_theta_t=sin_t,
        sin_theta_r=sin_r,
        cluster=np.array([p.cluster for p in ch.subpaths], dtype=int),
        meta=np.array(json.dumps(meta, sort_keys=True)),
    )
    return path if path.suffix == ".npz" else path.with_suffix(path.suffix + ".npz")


def load_channels(path) -> ChannelSet:
    with np.load(path) as z:
        meta = json.loads(str(z["meta"]))
        subpaths = tuple(
            Subpath(complex(a), float(t), float(st), float(sr), int(c))
            for a, t, st, sr, c in zip(z["alpha"], z["tau"], z["sin_theta_t"], z["sin_theta_r"], z["cluster"])
        )
        h = z["h"].copy()
    seed = None if meta["seed"] is None else Seed(**meta["seed"])
    return ChannelSet(h=h, subpaths=subpaths, cfg=SystemConfig(**meta["system"]), seed=seed)
