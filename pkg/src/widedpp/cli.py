"""Command line front end: ``widedpp <command> ...``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from . import harness, selfcheck
from .channel import generate_channels
from .config import Seed, load_config
from .sparse import find_representative_angles


def _scenario(args):
    sc = harness.load_scenario(args.scenario, args.preset)
    changes = {}
    if args.seed is not None:
        changes["master_seed"] = args.seed
    if args.trials is not None:
        changes["trials"] = args.trials
    return sc.replace(**changes) if changes else sc


def cmd_run(args):
    sc = _scenario(args)
    rows = harness.run_scenario(sc, workers=args.workers)
    files = harness.write_results(rows, args.out, stem=f"sweep_{sc.sweep_axis}")
    harness.write_manifest(sc, args.out, files)
    for r in rows:
        print(f"{r.algorithm:22s} {sc.sweep_axis}={r.sweep_value!s:8s} "
              f"rate={r.rate_mean:8.4f} +/- {r.rate_stderr:.4f}  mse={r.mse_mean:.3e}  "
              f"{r.wall_ms_mean:8.2f} ms")
    return 0


def cmd_heatmap(args):
    sc = _scenario(args)
    summary = harness.emit_projection_heatmap(sc, args.out, g=args.grid, k=args.subcarriers, trial=args.trial)
    out = Path(args.out)
    harness.write_manifest(sc, out, [p for p in out.iterdir() if p.suffix in (".csv", ".json")
                                     and p.name != "manifest.json"], extra={"heatmap": summary})
    print(f"argmax spread: flat={summary['argmax_spread_flat']} ideal={summary['argmax_spread_ideal']}")
    return 0


def cmd_codebook_error(args):
    system, _, lce = load_config(args.config, args.preset)
    table = harness.codebook_error_table(system, lce.g)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "codebook_error.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n_ttd", "m", "codebook_error"])
        for n, m, err in table:
            w.writerow([n, m, repr(err)])
            print(f"n_ttd={n:5d} m={m:5d} error={err:.6e}")
    return 0


def cmd_angles(args):
    sc = _scenario(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "representative_angles.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["trial", "rank", "phi"])
        for t in range(sc.trials):
            ch = generate_channels(sc.system, sc.clusters, Seed(sc.master_seed, t))
            for rank, phi in enumerate(find_representative_angles(ch, sc.system, sc.lce)):
                w.writerow([t, rank, repr(float(phi))])
    harness.write_manifest(sc, out, [path])
    print(f"wrote {path}")
    return 0


def cmd_selftest(args):
    return 0 if selfcheck.run() else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="widedpp", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, scenario=True):
        if scenario:
            p.add_argument("scenario", help="YAML scenario file")
            p.add_argument("--seed", type=int, default=None, help="override master_seed")
            p.add_argument("--trials", type=int, default=None, help="override trial count")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--preset", choices=("desk", "paper"), default=None,
                       help="base parameters for keys missing from the file")

    p = sub.add_parser("run", help="Monte-Carlo sweep")
    common(p)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("heatmap", help="projection heatmaps (flat vs frequency-dependent)")
    common(p)
    p.add_argument("--grid", type=int, default=None, help="grid size G (default: lce.g)")
    p.add_argument("--subcarriers", type=int, default=None, help="number of subcarriers K")
    p.add_argument("--trial", type=int, default=0)
    p.set_defaults(func=cmd_heatmap)

    p = sub.add_parser("codebook-error", help="codebook approximation error versus n_ttd")
    p.add_argument("config", help="YAML config file")
    common(p, scenario=False)
    p.set_defaults(func=cmd_codebook_error)

    p = sub.add_parser("angles", help="representative angles per trial")
    common(p)
    p.set_defaults(func=cmd_angles)

    p = sub.add_parser("selftest", help="run numerical invariant checks")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
