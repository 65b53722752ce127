"""Monte-Carlo scenario runner and CSV/JSON emitters."""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .channel import generate_channels, inject_channel_error
from .codebook import FlatDictionary, IdealDictionary, build_codebook, make_grid
from .config import (
    ClusterConfig,
    LceConfig,
    Seed,
    SystemConfig,
    check_lce,
    config_from_mapping,
    config_hash,
    config_to_mapping,
    spawn_trial_rng,
)
from .errors import AntennaLayoutError, ConfigError
from .precoding import approx_mse, fully_digital, rate_of_precoder, sum_rate
from .sparse import essp, lce_ssp, projection_map, ssp_freq_independent

log = logging.getLogger(__name__)

ALGORITHMS = ("fully_digital", "essp", "lce_ssp", "ssp_freq_independent")
SWEEP_AXES = ("snr_db", "sigma_theta_deg", "n_ttd", "fractional_bandwidth", "channel_nmse_db", "k_prime")
FAILURE_LIMIT = 0.10

RESULT_FIELDS = ["algorithm", "sweep_axis", "sweep_value", "rate_mean", "rate_stderr",
                 "mse_mean", "codebook_error", "trials", "failed"]
TIMING_FIELDS = ["algorithm", "sweep_axis", "sweep_value", "wall_ms_mean", "trials"]


@dataclass(frozen=True)
class Scenario:
    system: SystemConfig
    clusters: ClusterConfig
    lce: LceConfig
    algorithms: tuple = ALGORITHMS
    sweep_axis: str = "snr_db"
    sweep_values: tuple = (10.0,)
    trials: int = 50
    master_seed: int = 2022

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.sweep_axis not in SWEEP_AXES:
            raise ConfigError(f"unknown sweep axis {self.sweep_axis!r}; choose from {SWEEP_AXES}")
        unknown = set(self.algorithms) - set(ALGORITHMS)
        if unknown:
            raise ConfigError(f"unknown algorithms {sorted(unknown)}")
        for v in self.sweep_values:
            self.point(v)  # validates the value

    def point(self, value):
        """(system, clusters, lce, nmse) for one sweep value."""
        system, clusters, lce, nmse = self.system, self.clusters, self.lce, 0.0
        axis = self.sweep_axis
        if axis == "snr_db":
            system = system.replace(snr_db=float(value))
        elif axis == "sigma_theta_deg":
            clusters = clusters.with_angular_spread_deg(float(value))
        elif axis == "n_ttd":
            system = system.with_n_ttd(int(value))
        elif axis == "fractional_bandwidth":
            if not value > 0:
                raise ConfigError("fractional bandwidth must be positive")
            system = system.with_fractional_bandwidth(float(value))
        elif axis == "channel_nmse_db":
            nmse = 0.0 if value is None or value == -math.inf else 10.0 ** (float(value) / 10.0)
        elif axis == "k_prime":
            lce = lce.replace(k_prime=int(value))
        check_lce(system, lce)
        return system, clusters, lce, nmse

    def replace(self, **changes) -> "Scenario":
        return dataclasses.replace(self, **changes)

    def to_mapping(self) -> dict:
        d = config_to_mapping(self.system, self.clusters, self.lce)
        d.update(algorithms=list(self.algorithms),
                 sweep={"axis": self.sweep_axis, "values": list(self.sweep_values)},
                 trials=self.trials, master_seed=self.master_seed)
        return d


def scenario_from_mapping(raw: dict, preset_name: str | None = None) -> Scenario:
    system, clusters, lce = config_from_mapping(raw, preset_name)
    sweep = raw.get("sweep", {"axis": "snr_db", "values": [system.snr_db]})
    return Scenario(
        system=system,
        clusters=clusters,
        lce=lce,
        algorithms=tuple(raw.get("algorithms", ALGORITHMS)),
        sweep_axis=sweep["axis"],
        sweep_values=tuple(sweep["values"]),
        trials=int(raw.get("trials", 50)),
        master_seed=int(raw.get("master_seed", 2022)),
    )


def load_scenario(path, preset_name: str | None = None) -> Scenario:
    return scenario_from_mapping(yaml.safe_load(Path(path).read_text()) or {}, preset_name)


@dataclass(frozen=True)
class ResultRow:
    algorithm: str
    sweep_axis: str
    sweep_value: float
    rate_mean: float
    rate_stderr: float
    mse_mean: float
    codebook_error: float
    wall_ms_mean: float
    trials: int
    failed: int = 0


@dataclass
class TrialResult:
    trial: int
    rates: dict = field(default_factory=dict)
    mses: dict = field(default_factory=dict)
    wall_ms: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)


def run_trial(system: SystemConfig, clusters: ClusterConfig, lce: LceConfig, nmse: float,
              algorithms, seed: Seed) -> TrialResult:
    """One channel draw, every requested algorithm designed on the (possibly
    erroneous) estimate and evaluated on the true channel."""
    rng = spawn_trial_rng(seed)
    ch = generate_channels(system, clusters, rng)
    est = inject_channel_error(ch, nmse, rng)
    out = TrialResult(seed.trial_index)

    t0 = time.perf_counter()
    fd = fully_digital(est, system)
    fd_ms = (time.perf_counter() - t0) * 1e3
    codebook = build_codebook(system, lce.g)

    for name in algorithms:
        try:
            t0 = time.perf_counter()
            if name == "fully_digital":
                rate = float(rate_of_precoder(ch, fd.f, system).mean())
                out.wall_ms[name] = fd_ms
                out.rates[name], out.mses[name] = rate, 0.0
                continue
            if name == "essp":
                sol = essp(codebook, fd, est, system)
            elif name == "lce_ssp":
                sol = lce_ssp(codebook, fd, est, system, lce)
            else:
                sol = ssp_freq_independent(FlatDictionary(system, codebook.grid), fd, est, system)
            out.wall_ms[name] = (time.perf_counter() - t0) * 1e3
            out.rates[name] = sum_rate(ch, sol.analog, sol.digital, system)[1]
            out.mses[name] = approx_mse(fd, sol.analog, sol.digital, system)
        except Exception as err:  # recorded, surfaced by the aggregator
            out.errors[name] = f"{type(err).__name__}: {err}"
    return out


def _trial_job(args):
    return run_trial(*args)


def _map(jobs, workers: int):
    if workers <= 1:
        return [_trial_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_trial_job, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


def _stderr(x):
    return float(np.std(x, ddof=1) / np.sqrt(len(x))) if len(x) > 1 else 0.0


def run_scenario(sc: Scenario, workers: int = 1) -> list[ResultRow]:
    """Run every (sweep value, algorithm) pair over ``sc.trials`` seeded channels.

    Trial ``i`` always uses ``Seed(sc.master_seed, i)``, so sweep points are
    evaluated on paired channel draws.  Results are reduced in trial order,
    which keeps the output identical for any number of workers.
    """
    rows = []
    for value in sc.sweep_values:
        system, clusters, lce, nmse = sc.point(value)
        log.info("%s=%s: %d trials", sc.sweep_axis, value, sc.trials)
        jobs = [(system, clusters, lce, nmse, sc.algorithms, Seed(sc.master_seed, t))
                for t in range(sc.trials)]
        results = sorted(_map(jobs, workers), key=lambda r: r.trial)
        cb_err = build_codebook(system, lce.g).approximation_error() if any(
            a in ("essp", "lce_ssp") for a in sc.algorithms) else float("nan")
        for name in sc.algorithms:
            ok = [r for r in results if name not in r.errors]
            failed = len(results) - len(ok)
            if failed > FAILURE_LIMIT * len(results) or not ok:
                msgs = sorted({r.errors[name] for r in results if name in r.errors})
                raise RuntimeError(f"{name} failed on {failed}/{len(results)} trials at "
                                   f"{sc.sweep_axis}={value}: {msgs[:3]}")
            if failed:
                log.warning("%s failed on %d trials at %s=%s", name, failed, sc.sweep_axis, value)
            rates = np.array([r.rates[name] for r in ok])
            rows.append(ResultRow(
                algorithm=name,
                sweep_axis=sc.sweep_axis,
                sweep_value=value,
                rate_mean=float(rates.mean()),
                rate_stderr=_stderr(rates),
                mse_mean=float(np.mean([r.mses[name] for r in ok])),
                codebook_error=cb_err if name in ("essp", "lce_ssp") else float("nan"),
                wall_ms_mean=float(np.mean([r.wall_ms[name] for r in ok])),
                trials=len(results),
                failed=failed,
            ))
    return rows


def sweep_fractional_bandwidth(sc: Scenario, values, workers: int = 1) -> list[ResultRow]:
    return run_scenario(sc.replace(sweep_axis="fractional_bandwidth", sweep_values=tuple(values)), workers)


def sweep_nttd(sc: Scenario, values, workers: int = 1) -> list[ResultRow]:
    for v in values:
        if sc.system.n_t % int(v):
            raise AntennaLayoutError(f"n_ttd={v} does not divide n_t={sc.system.n_t}")
    return run_scenario(sc.replace(sweep_axis="n_ttd", sweep_values=tuple(values)), workers)


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def write_results(rows, out_dir, stem: str = "results") -> tuple[Path, Path]:
    """Write ``<stem>.csv`` (deterministic metrics) and ``<stem>_timing.csv``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    res_path = out_dir / f"{stem}.csv"
    time_path = out_dir / f"{stem}_timing.csv"
    with open(res_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RESULT_FIELDS)
        for r in rows:
            w.writerow([_fmt(getattr(r, f)) for f in RESULT_FIELDS])
    with open(time_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TIMING_FIELDS)
        for r in rows:
            w.writerow([_fmt(getattr(r, f)) for f in TIMING_FIELDS])
    return res_path, time_path


def write_manifest(sc: Scenario, out_dir, files, extra: dict | None = None) -> Path:
    manifest = {
        "package": "widedpp",
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "config_hash": config_hash(sc.system, sc.clusters, sc.lce),
        "master_seed": sc.master_seed,
        "scenario": sc.to_mapping(),
        "files": sorted(Path(f).name for f in files),
    }
    if extra:
        manifest.update(extra)
    path = Path(out_dir) / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def emit_projection_heatmap(sc: Scenario, out_dir, g: int | None = None, k: int | None = None,
                            trial: int = 0) -> dict:
    """Projection heatmaps and curves for the frequency-flat and the ideal
    frequency-dependent matrices on one channel draw.

    Writes ``heatmap_{flat,ideal}.csv``, ``curve_{flat,ideal}.csv`` and
    ``heatmap_summary.json`` (per-subcarrier argmax spread of each map).
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    system = sc.system if k is None else sc.system.replace(k=k)
    grid = make_grid(sc.lce.g if g is None else g)
    ch = generate_channels(system, sc.clusters, Seed(sc.master_seed, trial))
    fd = fully_digital(ch, system)
    summary = {"g": grid.g, "k": system.k, "trial": trial, "master_seed": sc.master_seed}
    for name, dictionary in (("flat", FlatDictionary(system, grid)), ("ideal", IdealDictionary(system, grid))):
        pm = projection_map(dictionary, fd, system)
        pm.to_csv(out_dir / f"heatmap_{name}.csv", out_dir / f"curve_{name}.csv")
        summary[f"argmax_spread_{name}"] = pm.argmax_spread()
    (out_dir / "heatmap_summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


def codebook_error_table(system: SystemConfig, g: int, n_ttd_values=None) -> list[tuple[int, int, float]]:
    """``(n_ttd, m, error)`` for every power-of-two ``n_ttd`` dividing ``n_t``."""
    if n_ttd_values is None:
        n_ttd_values = [2**i for i in range(int(math.log2(system.n_t)) + 1) if system.n_t % 2**i == 0]
    table = []
    for n in n_ttd_values:
        cfg = system.with_n_ttd(n)
        table.append((n, cfg.m, build_codebook(cfg, g).approximation_error()))
    return table
