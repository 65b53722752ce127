import csv
import json
import math

import numpy as np
import pytest
import yaml

from widedpp import cli, harness
from widedpp.config import preset
from widedpp.errors import AntennaLayoutError, ConfigError
from widedpp.harness import (
    RESULT_FIELDS,
    Scenario,
    codebook_error_table,
    emit_projection_heatmap,
    run_scenario,
    scenario_from_mapping,
    sweep_nttd,
    write_results,
)

SMALL = {
    "preset": "desk",
    "system": {"n_t": 32, "n_ttd": 4, "k": 8, "n_r": 2, "n_rf": 2, "n_s": 2},
    "lce": {"g": 64, "g_c": 16, "g_a": 4, "k_prime": 2},
    "algorithms": ["fully_digital", "essp", "lce_ssp", "ssp_freq_independent"],
    "sweep": {"axis": "snr_db", "values": [0, 10]},
    "trials": 3,
    "master_seed": 5,
}


def _scenario(**changes):
    return scenario_from_mapping({**SMALL, **changes})


def _write(tmp_path, mapping, name="sc.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(mapping))
    return path


def test_scenario_parsing():
    sc = _scenario()
    assert sc.system.m == 8 and sc.lce.g == 64 and sc.sweep_values == (0, 10)
    assert sc.to_mapping()["sweep"] == {"axis": "snr_db", "values": [0, 10]}


@pytest.mark.parametrize("bad", [
    {"trials": 0},
    {"sweep": {"axis": "colour", "values": [1]}},
    {"algorithms": ["am"]},
    {"sweep": {"axis": "fractional_bandwidth", "values": [0.0]}},
    {"sweep": {"axis": "n_ttd", "values": [3]}},
])
def test_scenario_validation(bad):
    with pytest.raises(ConfigError):
        _scenario(**bad)


def test_single_trial_fully_digital():
    rows = run_scenario(_scenario(trials=1, algorithms=["fully_digital"]))
    assert len(rows) == 2
    assert all(r.rate_stderr == 0.0 and r.trials == 1 and r.failed == 0 for r in rows)
    assert rows[1].rate_mean > rows[0].rate_mean


def test_rows_and_schema(tmp_path):
    sc = _scenario()
    rows = run_scenario(sc)
    assert [(r.sweep_value, r.algorithm) for r in rows] == [
        (v, a) for v in sc.sweep_values for a in sc.algorithms]
    res, timing = write_results(rows, tmp_path, stem="x")
    with open(res) as fh:
        table = list(csv.reader(fh))
    assert table[0] == RESULT_FIELDS and len(table) == 1 + len(rows)
    with open(timing) as fh:
        assert next(csv.reader(fh))[:3] == ["algorithm", "sweep_axis", "sweep_value"]
    for r in rows:
        assert r.rate_stderr >= 0 and r.trials == 3
        if r.algorithm == "fully_digital":
            assert r.mse_mean == 0.0 and math.isnan(r.codebook_error)
        elif r.algorithm in ("essp", "lce_ssp"):
            assert r.codebook_error > 0


def test_byte_identical_results(tmp_path):
    sc = _scenario()
    a = write_results(run_scenario(sc), tmp_path / "a")[0].read_bytes()
    b = write_results(run_scenario(sc), tmp_path / "b")[0].read_bytes()
    assert a == b


def test_workers_do_not_change_results(tmp_path):
    sc = _scenario(trials=4)
    a = write_results(run_scenario(sc, workers=1), tmp_path / "a")[0].read_bytes()
    b = write_results(run_scenario(sc, workers=2), tmp_path / "b")[0].read_bytes()
    assert a == b


def test_nttd_sweep_exact_at_one_line_per_antenna():
    sc = _scenario(trials=1, algorithms=["essp"])
    rows = sweep_nttd(sc, [4, 32])
    assert rows[0].codebook_error > 0
    assert rows[1].codebook_error == pytest.approx(0.0, abs=1e-18)


def test_nttd_sweep_indivisible():
    with pytest.raises(AntennaLayoutError):
        sweep_nttd(_scenario(), [5])


def test_too_many_failures_surface():
    # N_RF larger than the grid: every sparse solve fails
    sc = _scenario(lce={"g": 2, "g_c": 2, "g_a": 1, "k_prime": 2},
                   system={**SMALL["system"], "n_rf": 4, "n_r": 4, "n_s": 2}, algorithms=["essp"])
    with pytest.raises(RuntimeError, match="essp failed"):
        run_scenario(sc)


def test_heatmap_files(tmp_path):
    sc = _scenario(clusters={"sigma_theta_t": 0.0, "sigma_theta_r": 0.0, "n_c": 1})
    summary = emit_projection_heatmap(sc, tmp_path, g=64, k=16)
    for name in ("heatmap_flat", "heatmap_ideal", "curve_flat", "curve_ideal"):
        assert (tmp_path / f"{name}.csv").exists()
    assert summary["argmax_spread_ideal"] <= 1
    assert json.loads((tmp_path / "heatmap_summary.json").read_text()) == summary


def test_heatmap_single_subcarrier(tmp_path):
    emit_projection_heatmap(_scenario(), tmp_path, g=32, k=1)
    heat = np.loadtxt(tmp_path / "heatmap_ideal.csv", delimiter=",", skiprows=1)
    curve = np.loadtxt(tmp_path / "curve_ideal.csv", delimiter=",", skiprows=1)
    assert heat.shape == (32, 2)
    np.testing.assert_allclose(heat, curve)


def test_codebook_error_table():
    system, _, _ = preset("desk")
    table = codebook_error_table(system, 64)
    assert [n for n, _, _ in table] == [1, 2, 4, 8, 16, 32, 64]
    assert table[-1][2] <= 1e-18
    errs = [e for _, _, e in table]
    assert all(b <= a + 1e-15 for a, b in zip(errs, errs[1:]))


# ---------------------------------------------------------------- CLI


def test_cli_run(tmp_path, capsys):
    path = _write(tmp_path, {**SMALL, "trials": 5})
    out = tmp_path / "out"
    assert cli.main(["run", str(path), "--out", str(out), "--trials", "2", "--seed", "9"]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["master_seed"] == 9 and manifest["scenario"]["trials"] == 2
    assert set(manifest["files"]) == {"sweep_snr_db.csv", "sweep_snr_db_timing.csv"}
    assert len(manifest["config_hash"]) == 16
    assert "essp" in capsys.readouterr().out


def test_cli_run_is_reproducible(tmp_path):
    path = _write(tmp_path, SMALL)
    for d in ("a", "b"):
        assert cli.main(["run", str(path), "--out", str(tmp_path / d)]) == 0
    assert (tmp_path / "a" / "sweep_snr_db.csv").read_bytes() == (tmp_path / "b" / "sweep_snr_db.csv").read_bytes()


def test_cli_heatmap(tmp_path):
    path = _write(tmp_path, SMALL)
    assert cli.main(["heatmap", str(path), "--out", str(tmp_path / "h"), "--grid", "32", "--subcarriers", "4"]) == 0
    files = json.loads((tmp_path / "h" / "manifest.json").read_text())["files"]
    assert "heatmap_flat.csv" in files and "heatmap_summary.json" in files


def test_cli_codebook_error(tmp_path):
    path = _write(tmp_path, {"system": {"n_t": 16, "n_ttd": 4, "k": 4}, "lce": {"g": 32, "g_c": 8}})
    assert cli.main(["codebook-error", str(path), "--out", str(tmp_path)]) == 0
    rows = list(csv.reader(open(tmp_path / "codebook_error.csv")))
    assert rows[0] == ["n_ttd", "m", "codebook_error"]
    assert float(rows[-1][2]) <= 1e-18


def test_cli_angles(tmp_path):
    path = _write(tmp_path, {**SMALL, "trials": 2})
    assert cli.main(["angles", str(path), "--out", str(tmp_path)]) == 0
    rows = list(csv.reader(open(tmp_path / "representative_angles.csv")))
    assert rows[0] == ["trial", "rank", "phi"] and len(rows) == 1 + 2 * 2


def test_cli_selftest(capsys):
    assert cli.main(["selftest"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and out.count("PASS") == len(__import__("widedpp.selfcheck").selfcheck.CHECKS)


def test_cli_rejects_unknown_command():
    with pytest.raises(SystemExit):
        cli.main(["plot"])


def test_shipped_scenarios_parse():
    from pathlib import Path

    root = Path(__file__).resolve().parents[1] / "scenarios"
    files = sorted(root.glob("*.yaml"))
    assert files
    for f in files:
        if f.name == "codebook.yaml":
            continue
        assert isinstance(harness.load_scenario(f), Scenario)
