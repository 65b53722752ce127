import numpy as np
import pytest

from conftest import crandn
from widedpp.codebook import build_codebook
from widedpp.config import ClusterConfig, Seed, SystemConfig, preset
from widedpp.errors import RankDeficientError
from widedpp.multiuser import (
    MultiUserChannelSet,
    generate_multiuser_channels,
    hybrid_zf,
    multiuser_config,
    multiuser_rate,
    refine_digital_zf,
    zf_fully_digital,
)

CFG = multiuser_config(SystemConfig(n_t=32, n_ttd=4, m=8, k=4), n_u=2)


def _mu(h):
    return MultiUserChannelSet(h=h, n_u=h.shape[1])


def test_multiuser_config():
    assert (CFG.n_r, CFG.n_s, CFG.n_rf) == (2, 2, 2)
    assert multiuser_config(CFG, 4, n_rf=16).n_rf == 16


def test_generate_shapes_and_determinism():
    cfg = multiuser_config(SystemConfig(n_t=32, n_ttd=4, m=8, k=4), n_u=3)
    mu = generate_multiuser_channels(cfg, ClusterConfig(), Seed(1, 0))
    assert mu.h.shape == (4, 3, 32) and len(mu.subpaths) == 3
    again = generate_multiuser_channels(cfg, ClusterConfig(), Seed(1, 0))
    np.testing.assert_array_equal(mu.h, again.h)


def test_zf_orthogonal_users_equal_power(rng):
    q, _ = np.linalg.qr(crandn(rng, 32, 2))
    h = np.broadcast_to(q.T, (4, 2, 32)).copy()
    f = zf_fully_digital(_mu(h), CFG).f
    for k in range(4):
        np.testing.assert_allclose(np.abs(np.sum(f[k] * q, axis=0)), 1.0, atol=1e-12)
        np.testing.assert_allclose(np.linalg.norm(f[k], axis=0), 1.0, atol=1e-12)


def test_zf_single_user_matched_filter(rng):
    cfg = multiuser_config(CFG, 1)
    h = crandn(rng, 4, 1, 32)
    f = zf_fully_digital(_mu(h), cfg).f
    for k in range(4):
        mf = h[k, 0].conj() / np.linalg.norm(h[k, 0])
        assert abs(np.vdot(mf, f[k, :, 0])) == pytest.approx(1.0, abs=1e-12)


def test_zf_interference_free_and_power(rng):
    for _ in range(20):
        h = crandn(rng, 4, 2, 32)
        f = zf_fully_digital(_mu(h), CFG).f
        hf = h @ f
        off = hf - np.einsum("kii->ki", hf)[..., None] * np.eye(2)
        assert np.max(np.abs(off)) <= 1e-9
        np.testing.assert_allclose(np.sum(np.abs(f) ** 2, axis=(1, 2)), 2.0, atol=1e-9)


def test_zf_dependent_users_raise(rng):
    row = crandn(rng, 1, 1, 32)
    with pytest.raises(RankDeficientError):
        zf_fully_digital(_mu(np.concatenate([row, 2 * row], axis=1)), CFG)


def test_rate_zero_precoder(rng):
    h = crandn(rng, 4, 2, 32)
    assert multiuser_rate(_mu(h), np.zeros((4, 32, 2)), None, CFG) == 0.0


def test_rate_two_user_hand_evaluation(rng):
    cfg = CFG.replace(k=1, snr_db=3.0)
    h = crandn(rng, 1, 2, 32)
    p = crandn(rng, 1, 32, 2)
    noise = 2 * 1.0 / 10 ** 0.3
    expected = 0.0
    for u in range(2):
        s = abs(h[0, u] @ p[0, :, u]) ** 2
        i = abs(h[0, u] @ p[0, :, 1 - u]) ** 2
        expected += np.log2(1 + s / (i + noise))
    assert multiuser_rate(_mu(h), p, None, cfg) == pytest.approx(expected, rel=1e-12)


def test_rate_interference_free_reduces_to_log_terms(rng):
    h = crandn(rng, 4, 2, 32)
    f = zf_fully_digital(_mu(h), CFG).f
    gains = np.abs(np.einsum("kii->ki", h @ f)) ** 2
    expected = np.sum(np.log2(1 + gains * CFG.rho / (2 * CFG.sigma_n2)))
    assert multiuser_rate(_mu(h), f, None, CFG) == pytest.approx(expected, rel=1e-12)


def test_refine_zf_power_and_interference(rng):
    h = crandn(rng, 4, 2, 32)
    a = np.exp(2j * np.pi * rng.random((4, 32, 3))) / np.sqrt(32)
    d = refine_digital_zf(_mu(h), a, CFG)
    p = a @ d
    np.testing.assert_allclose(np.sum(np.abs(p) ** 2, axis=(1, 2)), 2.0, atol=1e-9)
    hp = h @ p
    assert abs(hp[0, 0, 1]) < 1e-9 and abs(hp[0, 1, 0]) < 1e-9


def test_fully_digital_dominates_hybrid():
    base, cc, lce = preset("desk")
    cfg = multiuser_config(base, 4)
    cb = build_codebook(cfg, lce.g)
    for t in range(10):
        mu = generate_multiuser_channels(cfg, cc, Seed(3, t))
        fd = zf_fully_digital(mu, cfg)
        for sel in (None, lce):
            sol = hybrid_zf(cb, fd, mu, cfg, lce=sel)
            np.testing.assert_allclose(np.sum(np.abs(sol.hybrid) ** 2, axis=(1, 2)), 4.0, atol=1e-9)
            assert multiuser_rate(mu, sol.analog, sol.digital, cfg) <= multiuser_rate(mu, fd.f, None, cfg) + 1e-9
