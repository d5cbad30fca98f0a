"""Per-epoch trials and their aggregation into P_md / P_fa tables.

Seeding: trial ``t`` of a run with seed ``s`` draws everything from
``SeedSequence(s, spawn_key=(t,))``. Every grid cell (sigma_r, magnitude,
ratio) replays the same stream for a given trial, so cells share epochs,
fault satellites and noise draws (common random numbers) and results do not
depend on how trials are distributed over workers.
"""

from __future__ import annotations

import csv
import io
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from isrfd import detectors as det
from isrfd.detectors import METHOD_ORDER, Method
from isrfd.graphkit import list_fault_detectable_5, list_k_cliques
from isrfd.measurement import FaultScenario, inject_faults
from isrfd.orbit import (ConstellationState, build_link_graph, constellation_state,
                         propagate_all)
from isrfd.stats import ThresholdTable

CSV_HEADER = ("method", "fault_magnitude_m", "fault_ratio", "alpha", "sigma_r_m",
              "p_md", "p_fa", "trials", "mean_runtime_ms")


def trial_seed(seed, trial):
    return np.random.SeedSequence(int(seed), spawn_key=(int(trial),))


def grid_cells(config):
    """(sigma_r, magnitude, ratio) cells in canonical order.

    Without an injected fault the magnitude and ratio axes collapse to 0.
    """
    mags = config.fault_magnitudes if config.n_faults else [0.0]
    ratios = config.fault_ratios if config.n_faults else [0.0]
    return [(s, m, r) for s in config.sigma_r_grid for m in mags for r in ratios]


def subgraphs_for(graph, use_augmentation, limit=None):
    if use_augmentation:
        return list_fault_detectable_5(graph, limit=limit)
    return list_k_cliques(graph, 5, limit=limit)


@dataclass
class EpochOutcome:
    epoch: float
    n: int
    fault_satellites: frozenset
    reports: dict = field(default_factory=dict)  # (method, alpha) -> DetectionReport
    runtime_ms: dict = field(default_factory=dict)  # (method, alpha) -> float
    available: bool = True
    n_subgraphs: int = 0

    def labels(self, method, alpha):
        rep = self.reports.get((method, alpha))
        if rep is None or not rep.available:
            return None
        return confusion(rep.flagged(), self.fault_satellites, self.n)


def confusion(flagged, faults, n):
    """(TP, FN, FP, TN) counted over the ``n`` satellites."""
    flagged = set(flagged)
    faults = set(faults)
    tp = len(flagged & faults)
    fn = len(faults - flagged)
    fp = len(flagged - faults)
    return tp, fn, fp, n - tp - fn - fp


def run_epoch(config, trial_seed, fault_magnitude=None, fault_ratio=None, sigma_r=None,
              alphas=None, table=None, cache=None):
    """One trial: epoch, fault, graph, measurements, subgraphs and all detectors.

    ``trial_seed`` is an int or a ``SeedSequence``. Grid values default to the
    first entry of each config grid. ``cache`` (a dict) lets repeated calls
    with the same seed reuse the link graph and subgraph lists.
    """
    rng = np.random.default_rng(trial_seed)
    mag = config.fault_magnitudes[0] if fault_magnitude is None else fault_magnitude
    ratio = config.fault_ratios[0] if fault_ratio is None else fault_ratio
    sr = config.sigma_r_grid[0] if sigma_r is None else sigma_r
    alphas = config.alpha_grid if alphas is None else alphas
    n = config.n

    # draw order is fixed regardless of the configuration
    u = rng.random()
    fault_sat = int(rng.integers(n))
    t = u * config.max_period if config.epoch_sampling == "uniform_over_period" \
        else config.fixed_epoch_s
    faults = frozenset([fault_sat]) if config.n_faults else frozenset()

    cache = {} if cache is None else cache
    key = ("epoch", t)
    if key not in cache:
        cache.clear()
        truth = propagate_all(config.constellation, t)
        graph = build_link_graph(ConstellationState(t, truth, truth, 0.0), config.body)
        subs = None
        if Method.EDM in config.detectors:
            subs = subgraphs_for(graph, config.use_augmentation, config.max_subgraphs)
        cache[key] = (graph, subs)
    graph, subs = cache[key]

    state = constellation_state(config.constellation, t, sr, rng)
    out = EpochOutcome(t, n, faults, n_subgraphs=len(subs or ()))
    if len(graph) == 0:
        out.available = False
        return out
    if faults:
        scenario = FaultScenario.single(fault_sat, mag, ratio)
    else:
        scenario = FaultScenario.none()
    meas = inject_faults(graph, state.truth_positions, scenario, config.sigma_m, rng, epoch=t)

    sm = config.sigma_m
    for method in config.detectors:
        t0 = time.perf_counter()
        if method is Method.EPHEMERIS_COMPARISON:
            stats = det.ephemeris_statistics(meas, state, sr, sm)
        elif method is Method.DATA_SNOOPING:
            stats = det.snooping_statistics(meas, state, sm)
        else:
            cfg = det.EdmDetectorConfig(alphas[0], config.eta_alpha, config.use_augmentation, sm, sr)
            stats = det.edm_statistics(meas, subs, cfg, state, n)
        shared = time.perf_counter() - t0
        for alpha in alphas:
            t1 = time.perf_counter()
            if method is Method.EPHEMERIS_COMPARISON:
                rep = det.detect_ephemeris_comparison(meas, state, sr, sm, alpha, stats, table)
            elif method is Method.DATA_SNOOPING:
                rep = det.detect_data_snooping(meas, state, sm, alpha, stats)
            else:
                cfg = det.EdmDetectorConfig(alpha, config.eta_alpha, config.use_augmentation,
                                            sm, sr)
                rep = det.detect_edm(meas, subs, cfg, state, stats, n)
            out.reports[(method, alpha)] = rep
            out.runtime_ms[(method, alpha)] = 1e3 * (shared + time.perf_counter() - t1)
    return out


@dataclass(frozen=True)
class MetricsRow:
    method: str
    fault_magnitude: float
    fault_ratio: float
    alpha: float
    sigma_r: float
    p_md: float | None
    p_fa: float | None
    trials: int
    mean_runtime_ms: float | None = None

    def cells(self):
        return [self.method, self.fault_magnitude, self.fault_ratio, self.alpha, self.sigma_r,
                self.p_md, self.p_fa, self.trials, self.mean_runtime_ms]


def _trial_counts(args):
    """Confusion counts of one trial for every (cell, method, alpha)."""
    config, trial, table = args
    seq = trial_seed(config.seed, trial)
    cache = {}
    counts = {}
    for c, (sr, mag, ratio) in enumerate(grid_cells(config)):
        out = run_epoch(config, seq, mag, ratio, sr, table=table, cache=cache)
        for (method, alpha), rep in out.reports.items():
            lab = out.labels(method, alpha)
            if lab is not None:
                counts[(c, method, alpha)] = (*lab, out.runtime_ms[(method, alpha)])
    return counts


_WORKER_TABLE = None


def _worker_counts(args):
    global _WORKER_TABLE
    if _WORKER_TABLE is None:
        _WORKER_TABLE = ThresholdTable()
    return _trial_counts((*args, _WORKER_TABLE))


def run_montecarlo(config, workers=1, timing=False, table=None):
    """Aggregate ``config.trials`` trials into one row per (method, cell, alpha).

    Rows are ordered by method, sigma_r, magnitude, ratio, alpha. Trials in
    which a method was unavailable are left out of that method's counts;
    ``trials`` reports how many were counted. Runtimes are only reported
    when ``timing`` is set so that the default output is reproducible.
    """
    table = ThresholdTable() if table is None else table
    trials = range(config.trials)
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunk = max(1, config.trials // (4 * workers))
            results = list(pool.map(_worker_counts, [(config, t) for t in trials],
                                    chunksize=chunk))
    else:
        results = [_trial_counts((config, t, table)) for t in trials]

    totals = {}
    for counts in results:  # trial order, so sums are reproducible
        for key, (tp, fn, fp, tn, ms) in counts.items():
            acc = totals.setdefault(key, [0, 0, 0, 0, 0, 0.0])
            acc[0] += tp
            acc[1] += fn
            acc[2] += fp
            acc[3] += tn
            acc[4] += 1
            acc[5] += ms

    cells = grid_cells(config)
    rows = []
    for method in METHOD_ORDER:
        if method not in config.detectors:
            continue
        for c, (sr, mag, ratio) in enumerate(cells):
            for alpha in config.alpha_grid:
                tp, fn, fp, tn, k, ms = totals.get((c, method, alpha), [0, 0, 0, 0, 0, 0.0])
                rows.append(MetricsRow(
                    method.value, float(mag), float(ratio), float(alpha), float(sr),
                    fn / (tp + fn) if tp + fn else None,
                    fp / (fp + tn) if fp + tn else None,
                    k,
                    ms / k if timing and k else None,
                ))
    return rows


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(rows, path=None):
    """Write rows to ``path`` (or return the CSV text when ``path`` is None)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for row in rows:
        w.writerow([_fmt(v) for v in row.cells()])
    text = buf.getvalue()
    if path is None:
        return text
    with open(path, "w", newline="") as fh:
        fh.write(text)
    return text
