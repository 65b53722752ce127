"""Fast numerical invariant checks runnable without the test suite."""

from __future__ import annotations

import numpy as np

from .channel import generate_channels, ula_response
from .codebook import (
    IdealDictionary,
    build_codebook,
    compensate_frequency_bias,
    make_grid,
)
from .config import ClusterConfig, Seed, SystemConfig, derive_subcarrier_frequencies
from .numerics import pinv, water_fill
from .precoding import fully_digital, rate_of_precoder, refine_digital, with_delay_bias
from .sparse import essp, peak_finder, ssp_narrowband

_SMALL = SystemConfig(n_t=32, n_ttd=4, m=8, k=8, n_r=2, n_rf=2, n_s=2)


def check_ula_norm():
    v = ula_response(16, np.linspace(-1, 1, 7))
    return np.allclose(np.linalg.norm(v, axis=-1), 1.0, atol=1e-12)


def check_frequency_bias_compensation():
    rng = np.random.default_rng(0)
    theta = rng.uniform(0, 2 * np.pi, 1000)
    t = rng.uniform(0, 2e-9, 1000)
    df = rng.uniform(-20e9, 120e9, 1000)
    fk = rng.uniform(90e9, 110e9, 1000)
    before = theta - 2 * np.pi * fk * t
    after = compensate_frequency_bias(theta, t, df) - 2 * np.pi * (fk - df) * t
    return np.max(np.abs(np.angle(np.exp(1j * (after - before))))) < 1e-10


def check_delay_bias_invariance():
    cfg = _SMALL
    cb = build_codebook(cfg, 64)
    ch = generate_channels(cfg, ClusterConfig(), Seed(7, 0))
    fd = fully_digital(ch, cfg)
    sol = essp(cb, fd, ch, cfg)
    biased = with_delay_bias(sol, [0.3e-9, 0.7e-9], cb.freqs)
    d = pinv(sol.analog) @ fd.f
    d2 = pinv(biased.analog) @ fd.f
    same_product = np.linalg.norm(sol.analog @ d - biased.analog @ d2) < 1e-9
    r1 = rate_of_precoder(ch, sol.analog @ refine_digital(ch, sol.analog, cfg), cfg).sum()
    r2 = rate_of_precoder(ch, biased.analog @ refine_digital(ch, biased.analog, cfg), cfg).sum()
    return same_product and abs(r1 - r2) <= 1e-9 * abs(r1)


def check_full_ttd_exact():
    cfg = SystemConfig(n_t=16, n_ttd=16, m=1, k=8, n_r=2, n_rf=2, n_s=2)
    cb = build_codebook(cfg, 32)
    ideal = IdealDictionary(cfg, cb.grid).atoms()
    inner = np.abs(np.sum(np.conj(ideal) * cb.atoms(), axis=1))
    return cb.approximation_error() < 1e-12 and np.allclose(inner, 1.0, atol=1e-9)


def check_water_fill_oracle():
    s = np.array([2.0, 1.0])
    q = water_fill(s, 1.0, 2.0).p ** 2
    grid = np.arange(0, 2 + 1e-12, 1e-4)
    best = np.max(np.log2(1 + 4 * grid) + np.log2(1 + (2 - grid)))
    return abs(np.sum(np.log2(1 + s**2 * q)) - best) < 1e-3


def check_single_atom_ssp():
    rng = np.random.default_rng(1)
    dictionary = IdealDictionary(_SMALL, make_grid(64)).atoms([0])[0]
    for _ in range(20):
        f = rng.standard_normal((32, 2)) + 1j * rng.standard_normal((32, 2))
        atoms, _, _ = ssp_narrowband(dictionary, f, 1)
        brute = np.argmax(np.sum(np.abs(dictionary.conj().T @ f) ** 2, axis=1))
        if atoms[0] != brute:
            return False
    return True


def check_power_constraint():
    cfg = _SMALL
    cb = build_codebook(cfg, 64)
    ch = generate_channels(cfg, ClusterConfig(), Seed(3, 1))
    sol = essp(cb, fully_digital(ch, cfg), ch, cfg)
    power = np.sum(np.abs(sol.hybrid) ** 2, axis=(1, 2))
    return np.allclose(power, cfg.n_s, atol=1e-9) and len(set(sol.atom_indices)) == cfg.n_rf


def check_peak_finder():
    return list(peak_finder([1, 3, 2, 5, 4], np.arange(1, 6), 2)) == [4, 2]


def check_frequencies():
    f = derive_subcarrier_frequencies(SystemConfig(n_t=8, n_ttd=8, m=1, k=5, n_r=1, n_rf=1, n_s=1))
    return np.allclose(f, [96e9, 98e9, 100e9, 102e9, 104e9])


CHECKS = [
    ("subcarrier frequencies", check_frequencies),
    ("ULA response unit norm", check_ula_norm),
    ("frequency-bias compensation by phase", check_frequency_bias_compensation),
    ("delay-bias invariance of the rate", check_delay_bias_invariance),
    ("exact codebook with one TTD per antenna", check_full_ttd_exact),
    ("water-filling vs grid search", check_water_fill_oracle),
    ("single-atom SSP vs exhaustive search", check_single_atom_ssp),
    ("hybrid power constraint", check_power_constraint),
    ("peak finder", check_peak_finder),
]


def run(echo=print) -> bool:
    ok = True
    for name, fn in CHECKS:
        try:
            passed = bool(fn())
        except Exception as err:  # report, keep going
            passed = False
            name = f"{name} ({type(err).__name__}: {err})"
        ok &= passed
        echo(f"{'PASS' if passed else 'FAIL'}  {name}")
    return ok


__all__ = ["CHECKS", "run"]
