"""Fully-digital precoders, digital refinement and performance metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SystemConfig
from .errors import RankDeficientError
from .numerics import inv_sqrt_gram, pinv, svd, water_fill

__all__ = [
    "FullyDigital",
    "PrecodingSolution",
    "fully_digital",
    "refine_digital",
    "least_squares_digital",
    "sum_rate",
    "rate_of_precoder",
    "approx_mse",
    "with_delay_bias",
]


def _h(a):
    return np.conj(np.swapaxes(a, -1, -2))


def _channels(ch):
    return ch.h if hasattr(ch, "h") else np.asarray(ch)


@dataclass(frozen=True, eq=False)
class FullyDigital:
    f: np.ndarray  # (K, N_T, N_s)


@dataclass(frozen=True, eq=False)
class PrecodingSolution:
    """Hybrid precoder.

    ``phase`` (N_T, N_RF) holds the unit-modulus phase shifts and ``delay``
    (N_TTD, N_RF) the TTD delays in seconds.  ``analog`` (K, N_T, N_RF) are
    the realized, unit-norm-column analog precoders and ``digital``
    (K, N_RF, N_s) the baseband precoders.
    """

    atom_indices: np.ndarray
    phase: np.ndarray
    delay: np.ndarray
    analog: np.ndarray
    digital: np.ndarray

    @property
    def hybrid(self) -> np.ndarray:
        return self.analog @ self.digital


def _allocate(s, cfg: SystemConfig, total: float):
    return np.stack([water_fill(row, cfg.gain_factor, total).p for row in s])


def fully_digital(ch, cfg: SystemConfig) -> FullyDigital:
    """Right singular vectors of each H_k scaled by water-filled amplitudes."""
    h = _channels(ch)
    dec = svd(h)
    v = dec.v[..., : cfg.n_s]
    p = _allocate(dec.s[:, : cfg.n_s], cfg, cfg.n_s)
    return FullyDigital(f=v * p[:, None, :])


def refine_digital(ch, analog, cfg: SystemConfig, atoms=None) -> np.ndarray:
    """Rate-oriented digital precoders for fixed analog precoders.

    Whitens the analog precoder, takes the SVD of the equivalent channel and
    water-fills; ``||A_k D_k||_F^2 = N_s`` holds by construction.
    """
    h = _channels(ch)
    try:
        norm = inv_sqrt_gram(analog)
    except RankDeficientError as err:
        raise RankDeficientError(
            f"analog precoder is rank deficient; check for duplicate atoms {atoms}", atoms
        ) from err
    dec = svd(h @ analog @ norm)
    v = dec.v[..., : cfg.n_s]
    p = _allocate(dec.s[:, : cfg.n_s], cfg, cfg.n_s)
    return norm @ (v * p[:, None, :])


def least_squares_digital(fd: FullyDigital, analog, cfg: SystemConfig) -> np.ndarray:
    """``pinv(A_k) F_k`` rescaled to meet the per-subcarrier power budget."""
    d = pinv(analog) @ fd.f
    power = np.sum(np.abs(analog @ d) ** 2, axis=(1, 2))
    return d * np.sqrt(cfg.n_s / power)[:, None, None]


def rate_of_precoder(ch, precoder, cfg: SystemConfig) -> np.ndarray:
    """Per-subcarrier rate log2 det(I + gain * H P P^H H^H), shape (K,)."""
    h = _channels(ch)
    hp = h @ precoder
    x = cfg.gain_factor * (hp @ _h(hp))
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite values in rate evaluation")
    lam = np.clip(np.linalg.eigvalsh(x), 0.0, None)
    return np.sum(np.log2(1.0 + lam), axis=-1)


def sum_rate(ch, analog, digital, cfg: SystemConfig) -> tuple[float, float]:
    """Return ``(total over subcarriers, per-subcarrier average)`` in bit/s/Hz."""
    per_k = rate_of_precoder(ch, analog @ digital, cfg)
    total = float(per_k.sum())
    return total, total / len(per_k)


def approx_mse(fd: FullyDigital, analog, digital, cfg: SystemConfig) -> float:
    k, n_t, n_s = fd.f.shape
    return float(np.sum(np.abs(fd.f - analog @ digital) ** 2) / (k * n_t * n_s))


def with_delay_bias(sol: PrecodingSolution, bias, freqs) -> PrecodingSolution:
    """Add ``bias[r]`` seconds to every TTD line of RF chain ``r``.

    Only delays and the realized analog precoders change; the digital
    precoders are carried over unchanged and must be recomputed by the caller.
    """
    bias = np.asarray(bias, dtype=float)
    rot = np.exp(-2j * np.pi * np.asarray(freqs)[:, None] * bias[None, :])  # (K, N_RF)
    return PrecodingSolution(
        atom_indices=sol.atom_indices,
        phase=sol.phase,
        delay=sol.delay + bias[None, :],
        analog=sol.analog * rot[:, None, :],
        digital=sol.digital,
    )
