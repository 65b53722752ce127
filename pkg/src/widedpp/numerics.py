"""Dense complex linear algebra used by the precoders.

Every matrix routine accepts a single matrix or a stack of matrices with
arbitrary leading dimensions, following numpy's ``linalg`` conventions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NoUsableChannelError, RankDeficientError

__all__ = ["SvdResult", "PowerAllocation", "svd", "pinv", "inv_sqrt_gram", "water_fill"]

PINV_RCOND = 1e-10
GRAM_RCOND = 1e-12


def _hermitian(a):
    return np.conj(np.swapaxes(a, -1, -2))


@dataclass(frozen=True)
class SvdResult:
    u: np.ndarray
    s: np.ndarray
    v: np.ndarray


@dataclass(frozen=True)
class PowerAllocation:
    """Amplitude weights ``p``; the per-stream powers are ``p**2``."""

    p: np.ndarray
    water_level: float


def svd(a) -> SvdResult:
    """Thin SVD ``a = u @ diag(s) @ v^H`` with ``s`` sorted descending."""
    a = np.asarray(a)
    if not np.all(np.isfinite(a)):
        raise ValueError("svd input contains non-finite entries")
    u, s, vh = np.linalg.svd(a, full_matrices=False)
    return SvdResult(u=u, s=s, v=_hermitian(vh))


def pinv(a, rcond: float = PINV_RCOND) -> np.ndarray:
    """Moore-Penrose pseudoinverse.

    Singular values below ``rcond * s_max`` (per matrix) are treated as zero.
    """
    a = np.asarray(a)
    if not np.all(np.isfinite(a)):
        raise ValueError("pinv input contains non-finite entries")
    u, s, vh = np.linalg.svd(a, full_matrices=False)
    cutoff = rcond * s[..., :1]
    s_inv = np.divide(1.0, s, out=np.zeros_like(s), where=s > cutoff)
    return _hermitian(vh) @ (s_inv[..., :, None] * _hermitian(u))


def inv_sqrt_gram(a) -> np.ndarray:
    """``(a^H a)^(-1/2)`` through an eigendecomposition of the Gram matrix.

    Raises
    ------
    RankDeficientError
        If the Gram matrix of any stacked matrix is numerically singular.
        ``err.atoms`` lists the stack positions that failed.
    """
    a = np.asarray(a)
    gram = _hermitian(a) @ a
    w, vec = np.linalg.eigh(gram)
    w_max = w[..., -1:]
    bad = (w[..., :1] < GRAM_RCOND * w_max) | (w_max <= 0)
    if np.any(bad):
        where = np.argwhere(bad[..., 0]).ravel() if bad.ndim > 1 else []
        raise RankDeficientError(
            "analog precoder columns are linearly dependent (singular Gram matrix)",
            atoms=where,
        )
    return (vec * (1.0 / np.sqrt(w))[..., None, :]) @ _hermitian(vec)


def water_fill(singular_values, gain_factor: float, total: float) -> PowerAllocation:
    """Water-filling over parallel channels with gains ``gain_factor * s**2``.

    Finds ``q`` maximizing ``sum(log2(1 + gain_factor * s_i**2 * q_i))``
    subject to ``sum(q) == total`` and ``q >= 0`` by testing active sets in
    order of decreasing gain.  Returns amplitudes ``p = sqrt(q)`` in the
    input order.
    """
    s = np.asarray(singular_values, dtype=float)
    if gain_factor <= 0 or total <= 0:
        raise ValueError("gain_factor and total must be positive")
    gains = gain_factor * s**2
    usable = gains > 0
    if not np.any(usable):
        raise NoUsableChannelError("all singular values are zero")

    inv = np.full(s.shape, np.inf)
    with np.errstate(over="ignore"):
        inv[usable] = 1.0 / gains[usable]
    # the water level never exceeds total + 1/(best gain); weaker channels
    # stay empty (this also drops gains whose reciprocal overflows)
    usable &= inv < total + inv.min()
    order = np.argsort(inv, kind="stable")
    inv_sorted = inv[order]
    n_usable = int(usable.sum())
    # largest active set whose water level stays above its worst channel
    for n in range(n_usable, 0, -1):
        level = (total + inv_sorted[:n].sum()) / n
        if level >= inv_sorted[n - 1]:
            break
    q = np.maximum(level - inv, 0.0)
    q[~usable] = 0.0
    return PowerAllocation(p=np.sqrt(q), water_level=float(level))
