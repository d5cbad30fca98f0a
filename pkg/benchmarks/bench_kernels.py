"""Compiled vs pure-Python kernels on realistic inputs.

Run with ``python benchmarks/bench_kernels.py``. Inputs are the link graph of
the bundled GPS scenario at several epochs plus random graphs, and the EDM
scale kernel on the resulting 5-clique batch.
"""

import argparse
import timeit

import numpy as np

from isrfd import _fallback, edmcore
from isrfd.harness.config import load_config
from isrfd.orbit import build_link_graph, constellation_state

try:
    from isrfd import _ext
except ImportError:  # extension not built
    _ext = None


def _time(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def gps_inputs(n_epochs=3, seed=0):
    cfg = load_config("gps")
    rng = np.random.default_rng(seed)
    out = []
    for t in np.linspace(0.0, cfg.max_period, n_epochs, endpoint=False):
        state = constellation_state(cfg.constellation, t, 1.0, rng)
        out.append(build_link_graph(state, cfg.body).adjacency())
    return out


def scale_inputs(adj, rng):
    """Noise bases and weights for every 5-clique of ``adj``."""
    cliques = _fallback.k_cliques(adj, 5)
    pts = rng.uniform(-1.0, 1.0, (len(cliques), 3, 5)) * 2.0e7
    D = np.linalg.norm(pts[:, :, :, None] - pts[:, :, None, :], axis=1)
    dec = edmcore.decompose(edmcore.gcedm(D))
    W = (0.5 * D) ** 2
    return dec.U_hat, dec.V_hat, W


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)
    if _ext is None:
        print("compiled extension not available; only the fallback can be timed")
    rng = np.random.default_rng(1)
    rows = []
    graphs = gps_inputs()
    rand = rng.random((24, 24)) < 0.5
    rand = np.triu(rand, 1)
    graphs.append(rand | rand.T)
    lunar_like = rng.random((9, 9)) < 0.6
    lunar_like = np.triu(lunar_like, 1)
    lunar_like = lunar_like | lunar_like.T

    for name, adj in [(f"gps epoch {k}", a) for k, a in enumerate(graphs[:-1])] + \
            [("G(24, 0.5)", graphs[-1])]:
        for kern in ("k_cliques",):
            args_ = (adj, 5)
            py = _time(lambda: getattr(_fallback, kern)(*args_), args.repeat)
            cy = _time(lambda: getattr(_ext, kern)(*args_), args.repeat) if _ext else np.nan
            rows.append((f"{kern} [{name}]", py, cy))

    py = _time(lambda: _fallback.fault_detectable_5(lunar_like), args.repeat)
    cy = _time(lambda: _ext.fault_detectable_5(lunar_like), args.repeat) if _ext else np.nan
    rows.append(("fault_detectable_5 [9 sats]", py, cy))

    U, V, W = scale_inputs(graphs[0], rng)
    py = _time(lambda: _fallback.scale_squared(U, V, W), args.repeat)
    cy = _time(lambda: _ext.scale_squared(U, V, W), args.repeat) if _ext else np.nan
    rows.append((f"scale_squared [{len(U)} subgraphs]", py, cy))

    width = max(len(r[0]) for r in rows)
    print(f"{'kernel':<{width}}  {'python ms':>10}  {'cython ms':>10}  {'speedup':>8}")
    for name, py, cy in rows:
        print(f"{name:<{width}}  {1e3 * py:>10.3f}  {1e3 * cy:>10.3f}  {py / cy:>7.1f}x")


if __name__ == "__main__":
    main()
