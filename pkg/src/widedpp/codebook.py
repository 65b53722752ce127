"""Angular grids, measurement matrices and the feasible phase/delay codebooks.

Three measurement-matrix flavours share one interface (``atoms``):

* ``FlatDictionary``    - frequency-independent steering vectors, a(phi_g).
* ``IdealDictionary``   - predistorted steering vectors, a((f_k/f_c) phi_g).
* ``Codebook``          - what phase shifters plus TTD lines can realize.

Atoms are generated on demand for the requested subcarriers and grid columns,
since the full (K, N_T, G) tensor is hundreds of MB for N_T=256, K=128, G=1024.
"""

from __future__ import annotations

import functools
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .channel import ula_response
from .config import SystemConfig, derive_subcarrier_frequencies

__all__ = [
    "AngularGrid",
    "make_grid",
    "FlatDictionary",
    "IdealDictionary",
    "Codebook",
    "ideal_matrices",
    "middle_antenna_index",
    "array_delay_bias",
    "delay_codebook",
    "phase_codebook",
    "feasible_matrices",
    "build_codebook",
    "codebook_error",
    "save_codebook",
]

CHUNK_ELEMENTS = 1 << 22


@dataclass(frozen=True, eq=False)
class AngularGrid:
    g: int
    phi: np.ndarray

    @property
    def step(self) -> float:
        return 2.0 / self.g


def make_grid(g: int) -> AngularGrid:
    """``g`` bin midpoints of [-1, 1]: phi_g = -1 + (2g - 1)/G for g = 1..G."""
    if g < 1:
        raise ValueError("grid size must be positive")
    idx = np.arange(1, g + 1)
    return AngularGrid(g=g, phi=-1.0 + (2 * idx - 1) / g)


def _select(ks, n):
    return np.arange(n) if ks is None else np.atleast_1d(np.asarray(ks, dtype=int))


class _Dictionary:
    """Common plumbing: frequencies, chunked materialization."""

    def __init__(self, cfg: SystemConfig, grid: AngularGrid):
        self.cfg = cfg
        self.grid = grid
        self.freqs = derive_subcarrier_frequencies(cfg)

    @property
    def n_atoms(self) -> int:
        return self.grid.g

    def atoms(self, ks=None, gs=None) -> np.ndarray:
        """Atoms for subcarriers ``ks`` and grid columns ``gs``: (len(ks), N_T, len(gs))."""
        raise NotImplementedError

    def chunks(self, ks=None, gs=None):
        """Yield ``(ks_chunk, atoms)`` pieces bounded in memory."""
        ks = _select(ks, self.cfg.k)
        n_g = self.grid.g if gs is None else len(np.atleast_1d(gs))
        step = max(1, CHUNK_ELEMENTS // max(1, self.cfg.n_t * n_g))
        for start in range(0, len(ks), step):
            part = ks[start:start + step]
            yield part, self.atoms(part, gs)

    @functools.cached_property
    def matrices(self) -> np.ndarray:
        return self.atoms()


class FlatDictionary(_Dictionary):
    def atoms(self, ks=None, gs=None):
        ks = _select(ks, self.cfg.k)
        phi = self.grid.phi if gs is None else self.grid.phi[gs]
        a = ula_response(self.cfg.n_t, phi).T
        return np.broadcast_to(a, (len(ks),) + a.shape)


class IdealDictionary(_Dictionary):
    def atoms(self, ks=None, gs=None):
        ks = _select(ks, self.cfg.k)
        phi = self.grid.phi if gs is None else self.grid.phi[gs]
        ratio = self.freqs[ks] / self.cfg.f_c
        return np.swapaxes(ula_response(self.cfg.n_t, ratio[:, None] * phi), -1, -2)


def ideal_matrices(grid: AngularGrid, cfg: SystemConfig) -> np.ndarray:
    """All K ideal frequency-dependent matrices, shape (K, N_T, G)."""
    return IdealDictionary(cfg, grid).atoms()


def middle_antenna_index(cfg: SystemConfig) -> np.ndarray:
    """1-based index of each subarray's middle antenna, one per TTD line."""
    n = np.arange(1, cfg.n_ttd + 1)
    return (2 * cfg.m * n - cfg.m) // 2 + 1


def array_delay_bias(cfg: SystemConfig) -> float:
    """Maximal propagation delay across the array, (N_T - 1) / (2 f_c)."""
    return (cfg.n_t - 1) / (2.0 * cfg.f_c)


def subarray_delay(n_prime, phi, f_c: float, beta: float):
    """Delay of a TTD line feeding antenna ``n_prime`` for grid angle ``phi``.

    Negative-angle columns are shifted by ``beta`` so no delay is negative.
    """
    n_prime = np.asarray(n_prime, dtype=float)
    phi = np.asarray(phi, dtype=float)
    base = (n_prime - 1) * phi / (2.0 * f_c)
    return np.where(phi < 0, base + beta, base)


def delay_codebook(grid: AngularGrid, cfg: SystemConfig, t_max: float | None = None) -> np.ndarray:
    """TTD delays in seconds, shape (N_TTD, G)."""
    beta = array_delay_bias(cfg)
    t_max = 2 * beta if t_max is None else t_max
    delay = subarray_delay(middle_antenna_index(cfg)[:, None], grid.phi[None, :], cfg.f_c, beta)
    if np.any(delay > t_max) or np.any(delay < 0):
        raise ValueError(f"delay codebook leaves [0, t_max={t_max:g}] s")
    return delay


def phase_codebook(grid: AngularGrid, delay: np.ndarray, cfg: SystemConfig) -> np.ndarray:
    """Unit-modulus phase shifts (N_T, G) compensating the f_c part of the delays."""
    base = np.sqrt(cfg.n_t) * ula_response(cfg.n_t, grid.phi).T
    comp = np.exp(2j * np.pi * cfg.f_c * delay)
    return base * np.repeat(comp, cfg.m, axis=0)


def _feasible(phase, delay, freqs, m, n_t):
    ttd = np.exp(-2j * np.pi * freqs[:, None, None] * delay[None])
    return phase[None] * np.repeat(ttd, m, axis=1) / np.sqrt(n_t)


def feasible_matrices(phase: np.ndarray, delay: np.ndarray, cfg: SystemConfig) -> np.ndarray:
    """Realizable measurement matrices, shape (K, N_T, G), unit-norm columns."""
    return _feasible(phase, delay, derive_subcarrier_frequencies(cfg), cfg.m, cfg.n_t)


class Codebook(_Dictionary):
    """Phase and delay codebooks together with the matrices they realize.

    ``phase`` has unit-modulus entries; the realized atoms carry the extra
    ``1/sqrt(N_T)`` factor that makes them unit-norm.
    """

    def __init__(self, cfg: SystemConfig, grid: AngularGrid, t_max: float | None = None):
        super().__init__(cfg, grid)
        self.t_max = 2 * array_delay_bias(cfg) if t_max is None else t_max
        self.delay = delay_codebook(grid, cfg, self.t_max)
        self.phase = phase_codebook(grid, self.delay, cfg)
        self.phase.setflags(write=False)
        self.delay.setflags(write=False)

    def atoms(self, ks=None, gs=None):
        ks = _select(ks, self.cfg.k)
        gs = slice(None) if gs is None else np.atleast_1d(gs)
        return _feasible(self.phase[:, gs], self.delay[:, gs], self.freqs[ks], self.cfg.m, self.cfg.n_t)

    @property
    def feasible(self) -> np.ndarray:
        return self.matrices

    def approximation_error(self) -> float:
        """Mean squared distance to the ideal matrices (bias phase removed)."""
        ideal = IdealDictionary(self.cfg, self.grid)
        total = 0.0
        for ks, feas in self.chunks():
            total += _error_sum(feas, ideal.atoms(ks), self.freqs[ks], self.cfg, self.grid)
        return total / (self.cfg.k * self.cfg.n_t * self.grid.g)


@functools.lru_cache(maxsize=16)
def build_codebook(cfg: SystemConfig, g: int) -> Codebook:
    """Cached codebook per (system, grid size); it does not depend on the channel."""
    return Codebook(cfg, make_grid(g))


def _error_sum(feasible, ideal, freqs, cfg, grid):
    beta = array_delay_bias(cfg)
    rot = np.exp(-2j * np.pi * (freqs - cfg.f_c) * beta)  # (K,)
    neg = grid.phi < 0
    phase = np.where(neg[None, :], rot[:, None], 1.0)  # (K, G)
    return float(np.sum(np.abs(ideal * phase[:, None, :] - feasible) ** 2))


def codebook_error(feasible, ideal, cfg: SystemConfig, grid: AngularGrid) -> float:
    """Mean squared entrywise error between feasible and ideal matrices.

    Columns with ``phi < 0`` of the ideal matrices are first rotated by the
    global phase the ``beta`` delay offset introduces, which has no effect on
    achievable rate.
    """
    feasible = np.asarray(feasible)
    ideal = np.asarray(ideal)
    if feasible.shape != ideal.shape:
        raise ValueError(f"shape mismatch: {feasible.shape} vs {ideal.shape}")
    k, n_t, g = feasible.shape
    freqs = derive_subcarrier_frequencies(cfg)
    return _error_sum(feasible, ideal, freqs, cfg, grid) / (k * n_t * g)


def save_codebook(cb: Codebook, path) -> Path:
    """Write phase (N_T, G) complex, delay (N_TTD, G) seconds and grid angles to ``.npz``."""
    path = Path(path)
    meta = {"system": asdict(cb.cfg), "g": cb.grid.g, "t_max": cb.t_max}
    np.savez(path, phase=cb.phase, delay=cb.delay, phi=cb.grid.phi,
             meta=np.array(json.dumps(meta, sort_keys=True)))
    return path


def compensate_frequency_bias(theta, t, delta_f):
    """Phase shift that keeps ``theta - 2*pi*f*t`` unchanged when every
    subcarrier frequency ``f`` is replaced by ``f - delta_f``."""
    return np.asarray(theta) - 2 * np.pi * np.asarray(delta_f) * np.asarray(t)
