"""Command line entry point: ``isrfd <command> --config FILE``."""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from isrfd import BACKEND, __version__
from isrfd.detectors import METHOD_ORDER, compute_mdbs
from isrfd.errors import ConfigError, NumericalError
from isrfd.harness.config import load_config
from isrfd.harness.montecarlo import (
    run_epoch,
    run_montecarlo,
    subgraphs_for,
    trial_seed,
    write_csv,
)
from isrfd.measurement import FaultScenario, inject_faults
from isrfd.orbit import build_link_graph, constellation_state
from isrfd.stats import ThresholdTable


def _open_out(path):
    return sys.stdout if path in (None, "-") else open(path, "w", newline="")


def _close(fh):
    if fh is not sys.stdout:
        fh.close()


def _config(args):
    cfg = load_config(args.config)
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "trials", None) is not None:
        if args.trials < 1:
            raise ConfigError("--trials must be at least 1", "trials")
        changes["trials"] = args.trials
    return cfg.replace(**changes) if changes else cfg


def _epoch_inputs(cfg, args):
    rng = np.random.default_rng(trial_seed(cfg.seed, 0))
    t = cfg.fixed_epoch_s if args.epoch is None else args.epoch
    sr = cfg.sigma_r_grid[0] if args.sigma_r is None else args.sigma_r
    state = constellation_state(cfg.constellation, t, sr, rng)
    graph = build_link_graph(state, cfg.body)
    return t, sr, state, graph, rng


def cmd_simulate(args):
    cfg = _config(args)
    alphas = [args.alpha] if args.alpha is not None else cfg.alpha_grid[:1]
    out = run_epoch(cfg, trial_seed(cfg.seed, args.trial), args.magnitude, args.ratio,
                    args.sigma_r, alphas=alphas)
    fh = _open_out(args.out)
    doc = {
        "epoch_s": out.epoch,
        "fault_satellites": sorted(out.fault_satellites),
        "available": out.available,
        "subgraphs": out.n_subgraphs,
        "reports": [
            {
                "method": rep.method.value,
                "alpha": alpha,
                "verdict": rep.verdict,
                "identified_fault": rep.identified_fault,
                "ambiguous": rep.ambiguous,
                "available": rep.available,
                "notes": rep.notes,
                "normalized": [round(s.normalized, 6) for s in rep.per_satellite],
            }
            for (_, alpha), rep in out.reports.items()
        ],
    }
    if args.json:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    else:
        fh.write(f"epoch {out.epoch:.3f} s  faults {doc['fault_satellites']}  "
                 f"subgraphs {out.n_subgraphs}\n")
        for r in doc["reports"]:
            flag = " (ambiguous)" if r["ambiguous"] else ""
            avail = "" if r["available"] else " [unavailable]"
            fh.write(f"{r['method']:<22} alpha={r['alpha']:<6g} {r['verdict']:<9} "
                     f"id={r['identified_fault']}{flag}{avail}\n")
            for note in r["notes"]:
                fh.write(f"    note: {note}\n")
    _close(fh)
    return 0


def cmd_montecarlo(args):
    cfg = _config(args)
    rows = run_montecarlo(cfg, workers=args.workers, timing=args.timing)
    if args.out in (None, "-"):
        sys.stdout.write(write_csv(rows))
    else:
        write_csv(rows, args.out)
    return 0


def cmd_cliques(args):
    cfg = _config(args)
    t, _, _, graph, _ = _epoch_inputs(cfg, args)
    augment = cfg.use_augmentation if args.augment is None else args.augment
    records = subgraphs_for(graph, augment, cfg.max_subgraphs)
    fh = _open_out(args.out)
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["epoch_s", "members", "measured_edges"])
    for rec in records:
        w.writerow([repr(float(t)), " ".join(map(str, rec.members)), sum(rec.measured_mask)])
    _close(fh)
    return 0


def cmd_mdb(args):
    cfg = _config(args)
    t, sr, state, graph, rng = _epoch_inputs(cfg, args)
    alpha = cfg.alpha_grid[0] if args.alpha is None else args.alpha
    power = cfg.power_gamma if args.power is None else args.power
    meas = inject_faults(graph, state.truth_positions, FaultScenario.none(), cfg.sigma_m, rng,
                         epoch=t)
    subs = subgraphs_for(graph, cfg.use_augmentation, cfg.max_subgraphs)
    tables = {m: compute_mdbs(m, alpha, power, meas, state, cfg.sigma_m, sr, subs)
              for m in METHOD_ORDER if m in cfg.detectors}
    fh = _open_out(args.out)
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["satellite"] + [f"{m.value}_m" for m in tables])
    for k in range(cfg.n):
        vals = [tables[m].get(k) for m in tables]
        w.writerow([k] + ["" if v is None else repr(float(v)) for v in vals])
    _close(fh)
    return 0


def cmd_thresholds(args):
    cfg = _config(args)
    table = ThresholdTable()
    max_links = args.max_links or cfg.n - 1
    for sr in cfg.sigma_r_grid:
        for alpha in cfg.alpha_grid:
            for l_i in range(1, max_links + 1):
                table.get(l_i, alpha, sr / cfg.sigma_m)
    if args.out in (None, "-"):
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(["l_i", "alpha", "ratio", "critical_value"])
        for (l_i, alpha, ratio), val in table.items():
            w.writerow([l_i, repr(alpha), repr(ratio), repr(val)])
    else:
        table.save(args.out)
    return 0


def cmd_config(args):
    cfg = _config(args)
    fh = _open_out(args.out)
    json.dump(cfg.to_dict(), fh, indent=2)
    fh.write("\n")
    _close(fh)
    return 0


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True,
                        help="scenario JSON file, or a bundled name (gps, lunar)")
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--trials", type=int, help="override the config trial count")

    epoch = argparse.ArgumentParser(add_help=False)
    epoch.add_argument("--epoch", type=float, help="epoch in seconds (default: config)")
    epoch.add_argument("--sigma-r", type=float, help="ephemeris sigma in m")

    p = argparse.ArgumentParser(prog="isrfd", description=__doc__)
    p.add_argument("--version", action="version",
                   version=f"isrfd {__version__} ({BACKEND} kernels)")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="run one epoch and print reports")
    s.add_argument("--trial", type=int, default=0)
    s.add_argument("--magnitude", type=float, help="fault bias in m")
    s.add_argument("--ratio", type=float, help="fault ratio")
    s.add_argument("--sigma-r", type=float)
    s.add_argument("--alpha", type=float)
    s.add_argument("--json", action="store_true")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("montecarlo", parents=[common], help="full grid to CSV")
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--timing", action="store_true",
                   help="fill mean_runtime_ms (output is then not reproducible)")
    s.set_defaults(func=cmd_montecarlo)

    s = sub.add_parser("cliques", parents=[common, epoch], help="dump subgraph lists")
    g = s.add_mutually_exclusive_group()
    g.add_argument("--augment", dest="augment", action="store_true", default=None)
    g.add_argument("--no-augment", dest="augment", action="store_false")
    s.set_defaults(func=cmd_cliques)

    s = sub.add_parser("mdb", parents=[common, epoch], help="per-satellite MDB table")
    s.add_argument("--alpha", type=float)
    s.add_argument("--power", type=float)
    s.set_defaults(func=cmd_mdb)

    s = sub.add_parser("thresholds", parents=[common], help="precompute threshold table")
    s.add_argument("--max-links", type=int)
    s.set_defaults(func=cmd_thresholds)

    s = sub.add_parser("config", parents=[common], help="print the normalised config")
    s.set_defaults(func=cmd_config)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"isrfd: config error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"isrfd: numerical error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"isrfd: invalid argument: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
