"""Sparse-recovery hybrid precoding.

Atom selection and digital refinement are kept separate so the multi-user
path can reuse the selectors with its own refinement.  Atom indices are
0-based positions in the angular grid.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .codebook import Codebook, FlatDictionary, IdealDictionary, make_grid
from .config import LceConfig, SystemConfig, check_lce
from .errors import SelectionError
from .numerics import pinv
from .precoding import FullyDigital, PrecodingSolution, refine_digital

__all__ = [
    "ProjectionMap",
    "projections",
    "ssp_narrowband",
    "essp_select",
    "essp",
    "peak_finder",
    "index_cleaner",
    "lce_select",
    "lce_ssp",
    "ssp_freq_independent",
    "projection_map",
    "find_representative_angles",
]

_TINY = 1e-300


def _h(a):
    return np.conj(np.swapaxes(a, -1, -2))


def _measurements(fd):
    return fd.f if isinstance(fd, FullyDigital) else np.asarray(fd)


def projections(dictionary, f, ks=None, gs=None) -> np.ndarray:
    """Summed stream projections |atom^H F_k|^2, shape (len(ks), len(gs)).

    ``f`` holds measurements for all K subcarriers; ``ks`` selects which of
    them are projected.
    """
    out = []
    for part, atoms in dictionary.chunks(ks, gs):
        psi = _h(atoms) @ f[part]
        out.append(np.sum(psi.real**2 + psi.imag**2, axis=-1))
    return np.concatenate(out, axis=0)


def _normalized_residual(f, a):
    d = pinv(a) @ f
    r = f - a @ d
    norms = np.sqrt(np.sum(np.abs(r) ** 2, axis=(-2, -1), keepdims=True))
    # an exactly represented measurement leaves a zero residual, not NaN
    return np.where(norms > _TINY, r / np.maximum(norms, _TINY), 0.0), d, norms


def ssp_narrowband(dictionary, f, n_rf: int):
    """Greedy simultaneous OMP on one measurement matrix.

    Parameters
    ----------
    dictionary : (N_T, G) complex array with unit-norm columns
    f : (N_T, N_s) fully-digital precoder
    n_rf : number of atoms to select

    Returns
    -------
    atoms, A, D
        Selected grid positions, the chosen columns and the least-squares
        digital precoder scaled so that ``||A D||_F^2 = N_s``.
    """
    dictionary = np.asarray(dictionary)
    f = np.asarray(f)
    n_s = f.shape[1]
    res = f
    mask = np.zeros(dictionary.shape[1], dtype=bool)
    atoms = []
    for _ in range(n_rf):
        psi = np.sum(np.abs(_h(dictionary) @ res) ** 2, axis=1)
        psi[mask] = -np.inf
        g = int(np.argmax(psi))
        atoms.append(g)
        mask[g] = True
        a = dictionary[:, atoms]
        res, d, _ = _normalized_residual(f, a)
    power = np.linalg.norm(a @ d)
    if power == 0:
        raise SelectionError("selected atoms cannot represent the precoder")
    return np.array(atoms), a, np.sqrt(n_s) * d / power


def essp_select(dictionary, f, n_rf: int, trace: list | None = None) -> np.ndarray:
    """Iterative atom selection with projections summed over all subcarriers.

    Already selected atoms are masked so they cannot be picked twice.  If
    ``trace`` is given, the summed residual norm after every iteration is
    appended to it.
    """
    f = _measurements(f)
    n_atoms = dictionary.n_atoms
    if n_rf > n_atoms:
        raise SelectionError(f"need {n_rf} atoms but the dictionary has {n_atoms}")
    mask = np.zeros(n_atoms, dtype=bool)
    res = f
    atoms = []
    for _ in range(n_rf):
        psi = projections(dictionary, res).sum(axis=0)
        psi[mask] = -np.inf
        g = int(np.argmax(psi))
        atoms.append(g)
        mask[g] = True
        res, _, norms = _normalized_residual(f, dictionary.atoms(None, atoms))
        if trace is not None:
            trace.append(float(norms.sum()))
    return np.array(atoms)


def _solution(dictionary, atoms, ch, cfg: SystemConfig) -> PrecodingSolution:
    analog = np.ascontiguousarray(dictionary.atoms(None, atoms))
    digital = refine_digital(ch, analog, cfg, atoms=atoms)
    if isinstance(dictionary, Codebook):
        phase, delay = dictionary.phase[:, atoms], dictionary.delay[:, atoms]
    else:
        # phase-shifter-only precoder: unit-modulus phases, no delay
        phase = np.sqrt(cfg.n_t) * analog[0]
        delay = np.zeros((cfg.n_ttd, len(atoms)))
    return PrecodingSolution(np.asarray(atoms), phase, delay, analog, digital)


def essp(codebook: Codebook, fd: FullyDigital, ch, cfg: SystemConfig) -> PrecodingSolution:
    """Extended SSP: iterative selection on the feasible matrices, then refinement."""
    atoms = essp_select(codebook, fd, cfg.n_rf)
    return _solution(codebook, atoms, ch, cfg)


def ssp_freq_independent(dictionary, fd: FullyDigital, ch, cfg: SystemConfig) -> PrecodingSolution:
    """Wideband SSP with one frequency-flat measurement matrix and no TTD lines.

    ``dictionary`` is a FlatDictionary or an ``AngularGrid``.
    """
    if not isinstance(dictionary, FlatDictionary):
        dictionary = FlatDictionary(cfg, dictionary)
    atoms = essp_select(dictionary, fd, cfg.n_rf)
    return _solution(dictionary, atoms, ch, cfg)


def peak_finder(values, ids, n_peak: int, adjacency: str = "position") -> np.ndarray:
    """Ids of the ``n_peak`` largest local maxima of ``values``.

    An entry is a peak if it is >= both neighbours; entries at the ends only
    compare with the neighbour they have.  With ``adjacency="id"`` the
    neighbours of id ``i`` are ids ``i - 1`` and ``i + 1`` wherever they
    appear in ``ids`` (use this for candidate sets with gaps); by default
    neighbours are adjacent positions.  When fewer than ``n_peak`` peaks
    exist the remaining slots are filled with the largest non-peak values.
    Ties go to the smaller id.
    """
    values = np.asarray(values, dtype=float)
    ids = np.asarray(ids, dtype=int)
    n = len(values)
    if len(ids) != n or n == 0:
        raise ValueError("values and ids must be non-empty and of equal length")
    if n_peak > n:
        raise SelectionError(f"asked for {n_peak} peaks among {n} values")

    if adjacency == "position":
        left = np.full(n, -np.inf)
        right = np.full(n, -np.inf)
        left[1:] = values[:-1]
        right[:-1] = values[1:]
    elif adjacency == "id":
        lookup = dict(zip(ids.tolist(), values.tolist()))
        left = np.array([lookup.get(i - 1, -np.inf) for i in ids.tolist()])
        right = np.array([lookup.get(i + 1, -np.inf) for i in ids.tolist()])
    else:
        raise ValueError(f"unknown adjacency {adjacency!r}")
    is_peak = (values >= left) & (values >= right)

    # lexsort: last key is primary -> peaks first, then value desc, then id asc
    order = np.lexsort((ids, -values, ~is_peak))
    return ids[order[:n_peak]]


def index_cleaner(ids, lo: int, hi: int) -> np.ndarray:
    """Drop duplicates (keeping first occurrences) and ids outside [lo, hi]."""
    seen = dict.fromkeys(int(i) for i in np.asarray(ids).ravel() if lo <= i <= hi)
    return np.fromiter(seen, dtype=int, count=len(seen))


def lce_select(dictionary, f, n_rf: int, lce: LceConfig, info: dict | None = None) -> np.ndarray:
    """Two-stage, non-iterative atom selection on sampled subcarriers.

    Stage 1 projects onto every ``delta_g``-th atom and keeps ``n_rf`` peaks;
    stage 2 re-projects onto ``2*g_a + 1`` fine atoms around each coarse pick
    and keeps ``n_rf`` peaks again.  Both stages use every ``delta_k``-th
    subcarrier.  ``info`` (if given) receives the candidate sets.
    """
    f = _measurements(f)
    k = f.shape[0]
    g = dictionary.n_atoms
    if lce.g != g:
        raise ValueError(f"LCE grid size {lce.g} does not match dictionary size {g}")
    dk = lce.delta_k(k)
    dg = lce.delta_g
    ks = np.arange(0, k, dk)[: lce.k_prime]
    coarse = np.arange(0, g, dg)[: lce.g_c]

    psi_c = projections(dictionary, f, ks, coarse).sum(axis=0)
    picks = peak_finder(psi_c, np.arange(lce.g_c), n_rf)

    windows = [np.arange(coarse[p] - lce.g_a, coarse[p] + lce.g_a + 1) for p in picks]
    fine = index_cleaner(np.concatenate(windows), 0, g - 1)
    if len(fine) < n_rf:
        raise SelectionError(f"only {len(fine)} candidate atoms for {n_rf} RF chains")
    psi_f = projections(dictionary, f, ks, fine).sum(axis=0)
    atoms = peak_finder(psi_f, fine, n_rf, adjacency="id")
    if info is not None:
        info.update(coarse=coarse[picks], candidates=fine, subcarriers=ks)
    return atoms


def lce_ssp(codebook: Codebook, fd: FullyDigital, ch, cfg: SystemConfig, lce: LceConfig) -> PrecodingSolution:
    """Low-complexity E-SSP: hierarchical peak selection, then full refinement."""
    check_lce(cfg, lce)
    atoms = lce_select(codebook, fd, cfg.n_rf, lce)
    return _solution(codebook, atoms, ch, cfg)


@dataclass(frozen=True, eq=False)
class ProjectionMap:
    per_subcarrier: np.ndarray  # (G', K'')
    averaged: np.ndarray  # (G',) sum over the evaluated subcarriers
    atom_ids: np.ndarray
    subcarriers: np.ndarray
    phi: np.ndarray

    def argmax_spread(self) -> int:
        """Spread (max - min) of the per-subcarrier argmax atom id."""
        best = self.atom_ids[np.argmax(self.per_subcarrier, axis=0)]
        return int(best.max() - best.min())

    def to_csv(self, heatmap_path, curve_path=None) -> None:
        """Heatmap: header of subcarrier indices, first column grid angle.

        Curve: two columns ``phi,projection``.
        """
        with open(heatmap_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["phi"] + [int(k) for k in self.subcarriers])
            for phi, row in zip(self.phi, self.per_subcarrier):
                w.writerow([repr(float(phi))] + [repr(float(v)) for v in row])
        if curve_path is not None:
            with open(curve_path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["phi", "projection"])
                for phi, v in zip(self.phi, self.averaged):
                    w.writerow([repr(float(phi)), repr(float(v))])


def projection_map(dictionary, fd, cfg: SystemConfig | None = None, gs=None, ks=None) -> ProjectionMap:
    f = _measurements(fd)
    gs = np.arange(dictionary.n_atoms) if gs is None else np.asarray(gs, dtype=int)
    ks = np.arange(f.shape[0]) if ks is None else np.asarray(ks, dtype=int)
    per = projections(dictionary, f, ks, gs).T
    return ProjectionMap(per, per.sum(axis=1), gs, ks, dictionary.grid.phi[gs])


def find_representative_angles(ch, cfg: SystemConfig, lce: LceConfig) -> np.ndarray:
    """Grid angles of N_RF atoms that best explain the channels themselves.

    Runs the LCE-SSP selection stages with the columns of ``H_k^H`` as
    measurements and the ideal frequency-dependent matrices as dictionary.
    Under the plain-transpose channel model an atom at grid angle ``phi``
    serves a path with physical direction ``sin(theta) = -phi``.
    """
    h = ch.h if hasattr(ch, "h") else np.asarray(ch)
    check_lce(cfg, lce)
    dictionary = IdealDictionary(cfg, make_grid(lce.g))
    atoms = lce_select(dictionary, _h(h), cfg.n_rf, lce)
    return dictionary.grid.phi[atoms]
