import subprocess
import sys

import numpy as np
import pytest
import yaml

from widedpp.channel import generate_channels
from widedpp.config import (
    ClusterConfig,
    LceConfig,
    Seed,
    SystemConfig,
    check_lce,
    config_hash,
    derive_subcarrier_frequencies,
    load_config,
    preset,
    spawn_trial_rng,
)
from widedpp.errors import (
    AntennaLayoutError,
    ConfigError,
    GridRatioError,
    StreamCountError,
    SubcarrierRatioError,
)


def test_two_subcarriers():
    cfg = SystemConfig(n_t=8, n_ttd=8, m=1, k=2)
    np.testing.assert_allclose(derive_subcarrier_frequencies(cfg), [97.5e9, 102.5e9])


def test_single_subcarrier_is_centre():
    cfg = SystemConfig(n_t=8, n_ttd=8, m=1, k=1)
    np.testing.assert_array_equal(derive_subcarrier_frequencies(cfg), [100e9])


def test_five_subcarriers_closed_form():
    # spacing f_s / K = 2 GHz
    cfg = SystemConfig(n_t=8, n_ttd=8, m=1, k=5)
    np.testing.assert_allclose(derive_subcarrier_frequencies(cfg), [96e9, 98e9, 100e9, 102e9, 104e9])


@pytest.mark.parametrize("k", [1, 2, 7, 32, 128, 256])
def test_frequencies_increasing_and_centred(k):
    cfg = SystemConfig(n_t=8, n_ttd=8, m=1, k=k)
    f = derive_subcarrier_frequencies(cfg)
    assert np.all(np.diff(f) > 0)
    assert abs(f.mean() - cfg.f_c) <= 1e-6 * cfg.f_c
    np.testing.assert_allclose(f + f[::-1], 2 * cfg.f_c, rtol=1e-12)


def test_validation_errors_are_distinct():
    with pytest.raises(AntennaLayoutError):
        SystemConfig(n_t=64, n_ttd=8, m=4)
    with pytest.raises(StreamCountError):
        SystemConfig(n_s=5, n_r=8, n_rf=4)
    with pytest.raises(GridRatioError):
        LceConfig(g=100, g_c=30)
    with pytest.raises(SubcarrierRatioError):
        check_lce(SystemConfig(k=30, n_t=16, n_ttd=16, m=1), LceConfig(k_prime=4))
    assert len({AntennaLayoutError, StreamCountError, GridRatioError, SubcarrierRatioError}) == 4


def test_odd_grid_rejected():
    with pytest.raises(GridRatioError):
        LceConfig(g=9, g_c=3)


def test_snr_convention():
    cfg = SystemConfig(snr_db=20.0)
    assert cfg.sigma_n2 == 1.0
    assert cfg.rho == pytest.approx(100.0)
    assert cfg.gain_factor == pytest.approx(25.0)


def test_presets():
    system, clusters, lce = preset("paper")
    assert (system.n_t, system.n_ttd, system.k, lce.g) == (256, 16, 128, 1024)
    assert clusters.sigma_theta_t == pytest.approx(np.deg2rad(5))
    system, _, lce = preset("desk")
    assert (system.n_t, system.n_ttd, system.m, system.k) == (64, 8, 8, 32)
    assert (lce.g, lce.g_c, lce.g_a, lce.k_prime) == (256, 64, 8, 4)
    with pytest.raises(ConfigError):
        preset("laptop")


def test_rng_determinism():
    a = spawn_trial_rng(Seed(42, 0)).standard_normal(100)
    b = spawn_trial_rng(Seed(42, 0)).standard_normal(100)
    c = spawn_trial_rng(Seed(42, 1)).standard_normal(100)
    np.testing.assert_array_equal(a, b)
    assert not np.allclose(a, c)


def test_seed_bounds():
    with pytest.raises(ConfigError):
        Seed(-1, 0)
    with pytest.raises(ConfigError):
        Seed(2**64, 0)
    Seed(2**64 - 1, 3)


def test_channel_hash_stable_across_processes(desk):
    cfg, cc, _ = desk
    code = ("from widedpp.config import preset, Seed\n"
            "from widedpp.channel import generate_channels\n"
            "cfg, cc, _ = preset('desk')\n"
            "print(generate_channels(cfg, cc, Seed(42, 7)).digest())\n")
    runs = [subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, check=True).stdout.strip()
            for _ in range(2)]
    assert runs[0] == runs[1] == generate_channels(cfg, cc, Seed(42, 7)).digest()


def test_load_config_degrees(tmp_path):
    path = tmp_path / "cfg.yaml"
    path.write_text(yaml.safe_dump({
        "system": {"n_t": 128, "n_ttd": 8, "snr_db": 5},
        "clusters": {"sigma_theta_t": 2.0, "sigma_theta_r": 0.0, "n_c": 2},
        "lce": {"g": 512, "g_c": 128},
    }))
    system, clusters, lce = load_config(path)
    assert system.m == 16 and system.snr_db == 5
    assert clusters.sigma_theta_t == pytest.approx(np.deg2rad(2.0))
    assert clusters.n_c == 2
    assert lce.g == 512 and lce.delta_g == 4


def test_config_hash_changes_with_fields():
    a = config_hash(SystemConfig(), ClusterConfig())
    assert a == config_hash(SystemConfig(), ClusterConfig())
    assert a != config_hash(SystemConfig(snr_db=0.0), ClusterConfig())
