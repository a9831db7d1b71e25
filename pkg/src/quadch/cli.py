"""Command line interface.

Subcommands:

* ``run <config.ini> [...]`` - run stepping experiments from INI configs
  (``--sweep`` runs several in parallel, disjoint output directories).
* ``preset <name>`` - run a named experiment from the catalog, with
  ``--override section.key=value`` adjustments.
* ``analyze <dir>`` - post-hoc fits on an artifact directory
  (``--coarsening``, ``--order``, ``--orientations``).
* ``dispersion`` - growth-rate / amplification CSV sweeps.

The exit code is 0 only when every invariant monitor of the invoked runs
passed.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .analysis import coarsening_slope, orientation_histogram, temporal_order
from .runner import (ExperimentConfig, PRESET_NAMES, load_field,
                     read_energy_csv, run_dispersion_map, run_experiment,
                     run_preset, run_sweep)


def _build_parser():
    ap = argparse.ArgumentParser(prog="quadch",
                                 description="structure-preserving "
                                             "Cahn-Hilliard experiments")
    sub = ap.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run experiments from config files")
    p_run.add_argument("configs", nargs="+", help="INI config files")
    p_run.add_argument("--sweep", action="store_true",
                       help="run the configs in parallel")
    p_run.add_argument("--workers", type=int, default=2)

    p_pre = sub.add_parser("preset", help="run a named preset")
    p_pre.add_argument("name", choices=sorted(PRESET_NAMES))
    p_pre.add_argument("--override", action="append", default=[],
                       metavar="KEY=VALUE")
    p_pre.add_argument("--outdir", default=None)

    p_an = sub.add_parser("analyze", help="fits on an artifact directory")
    p_an.add_argument("artifacts", help="run output directory")
    mode = p_an.add_mutually_exclusive_group(required=True)
    mode.add_argument("--coarsening", action="store_true")
    mode.add_argument("--order", action="store_true")
    mode.add_argument("--orientations", action="store_true")
    p_an.add_argument("--window", nargs=2, type=float, default=None,
                      metavar=("T0", "T1"))
    p_an.add_argument("--band-threshold", type=float, default=0.9)
    p_an.add_argument("--bins", type=int, default=72)
    p_an.add_argument("--snapshot", default=None,
                      help="field file (default: last snapshot)")

    p_disp = sub.add_parser("dispersion", help="write dispersion CSV sweeps")
    p_disp.add_argument("--model", choices=("iso", "aniso"), default="iso")
    p_disp.add_argument("--method", choices=("EE", "IE", "IM", "exact", "all"),
                        default="all")
    p_disp.add_argument("--out", required=True, help="output directory")
    p_disp.add_argument("--nk", type=int, default=65)
    p_disp.add_argument("--kmax", type=float, default=8.0)
    p_disp.add_argument("--dt", type=float, default=1e-4)
    p_disp.add_argument("--u0", type=float, default=0.0)
    p_disp.add_argument("--eps", type=float, default=0.3)
    p_disp.add_argument("--beta", type=float, default=0.0)
    p_disp.add_argument("--alpha", type=float, default=0.1)
    return ap


def _cmd_run(args) -> int:
    configs = [ExperimentConfig.from_ini(p) for p in args.configs]
    if args.sweep and len(configs) > 1:
        arts = run_sweep(configs, workers=args.workers)
    else:
        arts = [run_experiment(cfg) for cfg in configs]
    ok = True
    for art in arts:
        status = "ok" if art.ok else "FAILED"
        print(f"{art.outdir}: {status}")
        if art.failure:
            print(f"  failure: {art.failure}")
        ok &= art.ok
    return 0 if ok else 1


def _cmd_preset(args) -> int:
    out = run_preset(args.name, overrides=args.override, outdir=args.outdir)
    if hasattr(out, "ok"):
        print(f"{out.outdir}: {'ok' if out.ok else 'FAILED'}")
        return 0 if out.ok else 1
    print(json.dumps({k: v for k, v in out.items() if k != "files"},
                     indent=2, default=str))
    return 0 if out.get("ok", True) else 1


def _cmd_analyze(args) -> int:
    art = Path(args.artifacts)
    if args.coarsening:
        log = read_energy_csv(art / "energy.csv")
        t, e = log["t"], log["energy"]
        measure = _domain_measure(art)
        ebar = e / measure
        if args.window:
            window = tuple(args.window)
        else:
            t_end = float(t[-1])
            window = (t_end / 10.0, t_end)
        slope, diag = coarsening_slope(t, ebar, window)
        out = {"slope": slope, **diag}
        (art / "coarsening.json").write_text(json.dumps(out, indent=2) + "\n")
        print(json.dumps(out, indent=2))
        return 0
    if args.order:
        rows = np.genfromtxt(art / "errors.csv", delimiter=",", names=True)
        rows = np.atleast_1d(rows)
        order = temporal_order(rows["dt"], rows["error"])
        out = {"order": order}
        (art / "order.json").write_text(json.dumps(out, indent=2) + "\n")
        print(json.dumps(out, indent=2))
        return 0
    # orientations
    if args.snapshot:
        snap_path = Path(args.snapshot)
    else:
        snaps = json.loads((art / "snapshots.json").read_text())
        snap_path = Path(snaps[-1]["path"])
    field = load_field(snap_path)
    hist = orientation_histogram(field, band_threshold=args.band_threshold,
                                 n_bins=args.bins)
    centers = 0.5 * (hist.bin_edges[:-1] + hist.bin_edges[1:])
    with open(art / "orientations.csv", "w") as fh:
        fh.write("theta,density\n")
        for c, d in zip(centers, hist.density):
            fh.write(f"{c:.17g},{d:.17g}\n")
    out = {"gaps": hist.gaps, "n_gaps": len(hist.gaps),
           "snapshot": str(snap_path)}
    (art / "orientations.json").write_text(json.dumps(out, indent=2) + "\n")
    print(json.dumps(out, indent=2))
    return 0


def _domain_measure(artdir: Path) -> float:
    cfg = ExperimentConfig.from_ini(artdir / "config.ini")
    return cfg.grid.measure


def _cmd_dispersion(args) -> int:
    res = run_dispersion_map(args.out, model=args.model, method=args.method,
                             nk=args.nk, kmax=args.kmax, dt=args.dt,
                             u0=args.u0, eps=args.eps, beta=args.beta,
                             alpha=args.alpha)
    print(json.dumps(res["files"], indent=2))
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "preset":
        return _cmd_preset(args)
    if args.command == "analyze":
        return _cmd_analyze(args)
    return _cmd_dispersion(args)


if __name__ == "__main__":
    sys.exit(main())
