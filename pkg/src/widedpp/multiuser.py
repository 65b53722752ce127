"""Multi-user extension: single-antenna users served with zero-forcing."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import assemble_channels, draw_clusters
from .config import ClusterConfig, LceConfig, Seed, SystemConfig, check_lce, spawn_trial_rng
from .errors import RankDeficientError
from .numerics import inv_sqrt_gram, water_fill
from .precoding import FullyDigital, PrecodingSolution
from .sparse import essp_select, lce_select

__all__ = [
    "MultiUserChannelSet",
    "multiuser_config",
    "generate_multiuser_channels",
    "zero_forcing",
    "zf_fully_digital",
    "refine_digital_zf",
    "multiuser_rate",
    "hybrid_zf",
]


@dataclass(frozen=True, eq=False)
class MultiUserChannelSet:
    h: np.ndarray  # (K, N_U, N_T)
    n_u: int
    subpaths: tuple = ()


def multiuser_config(cfg: SystemConfig, n_u: int, n_rf: int | None = None) -> SystemConfig:
    """System config with one stream and one receive antenna per user."""
    return cfg.replace(n_r=n_u, n_s=n_u, n_rf=n_u if n_rf is None else n_rf)


def generate_multiuser_channels(cfg: SystemConfig, cc: ClusterConfig, seed: Seed | np.random.Generator,
                                n_u: int | None = None) -> MultiUserChannelSet:
    """Independent single-antenna cluster channels per user, stacked as rows."""
    n_u = cfg.n_s if n_u is None else n_u
    rng = spawn_trial_rng(seed) if isinstance(seed, Seed) else seed
    rows, paths = [], []
    for _ in range(n_u):
        sp = draw_clusters(cfg, cc, rng)
        rows.append(assemble_channels(sp, cfg, n_r=1).h)
        paths.append(tuple(sp))
    return MultiUserChannelSet(h=np.concatenate(rows, axis=1), n_u=n_u, subpaths=tuple(paths))


def _h(a):
    return np.conj(np.swapaxes(a, -1, -2))


def zero_forcing(h, gain_factor: float, total: float) -> np.ndarray:
    """Water-filled ZF precoders for stacked channels ``h`` (..., N_U, N)."""
    gram = h @ _h(h)
    w_ev = np.linalg.eigvalsh(gram)
    if np.any(w_ev[..., 0] < 1e-12 * w_ev[..., -1]):
        raise RankDeficientError("user channels are linearly dependent; ZF undefined")
    w = _h(h) @ np.linalg.inv(gram)
    norms = np.linalg.norm(w, axis=-2)  # (..., N_U)
    w = w / norms[..., None, :]
    gains = 1.0 / norms
    flat = gains.reshape(-1, gains.shape[-1])
    p = np.stack([water_fill(g, gain_factor, total).p for g in flat]).reshape(gains.shape)
    return w * p[..., None, :]


def zf_fully_digital(mu: MultiUserChannelSet, cfg: SystemConfig) -> FullyDigital:
    """Zero-forcing precoders with water-filling across users, (K, N_T, N_U)."""
    return FullyDigital(f=zero_forcing(mu.h, cfg.gain_factor, mu.n_u))


def refine_digital_zf(mu: MultiUserChannelSet, analog, cfg: SystemConfig) -> np.ndarray:
    """ZF on the whitened equivalent channel ``H_k A_k (A_k^H A_k)^(-1/2)``."""
    norm = inv_sqrt_gram(analog)
    return norm @ zero_forcing(mu.h @ analog @ norm, cfg.gain_factor, mu.n_u)


def multiuser_rate(mu: MultiUserChannelSet, analog, digital, cfg: SystemConfig) -> float:
    """Sum over subcarriers and users of log2(1 + SINR).

    Each user sees noise ``N_U * sigma_n^2 / rho``, the per-user counterpart
    of the ``rho / N_s`` scaling of the single-user rate.
    """
    p = analog @ digital if digital is not None else analog
    g = np.abs(mu.h @ p) ** 2  # (K, N_U, N_U): row u = user, col v = stream
    signal = np.diagonal(g, axis1=-2, axis2=-1)
    interference = g.sum(axis=-1) - signal
    noise = mu.n_u * cfg.sigma_n2 / cfg.rho
    return float(np.sum(np.log2(1.0 + signal / (interference + noise))))


def hybrid_zf(dictionary, fd: FullyDigital, mu: MultiUserChannelSet, cfg: SystemConfig,
              lce: LceConfig | None = None) -> PrecodingSolution:
    """Hybrid multi-user precoder: sparse atom selection + ZF digital stage.

    Uses LCE-SSP selection when ``lce`` is given, E-SSP otherwise.
    """
    if lce is None:
        atoms = essp_select(dictionary, fd, cfg.n_rf)
    else:
        check_lce(cfg, lce)
        atoms = lce_select(dictionary, fd, cfg.n_rf, lce)
    analog = np.ascontiguousarray(dictionary.atoms(None, atoms))
    digital = refine_digital_zf(mu, analog, cfg)
    phase = getattr(dictionary, "phase", None)
    delay = getattr(dictionary, "delay", None)
    return PrecodingSolution(
        atoms,
        None if phase is None else phase[:, atoms],
        None if delay is None else delay[:, atoms],
        analog,
        digital,
    )
