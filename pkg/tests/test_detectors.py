import dataclasses

import numpy as np
import pytest

from isrfd.detectors import (
    DetectionReport,
    EdmDetectorConfig,
    Method,
    compute_mdbs,
    design_matrix,
    detect_data_snooping,
    detect_edm,
    detect_ephemeris_comparison,
    ephemeris_mdb,
    ephemeris_statistics,
    fault_vectors,
    snooping_projector,
    snooping_statistics,
)
from isrfd.errors import ConfigError
from isrfd.graphkit import LinkGraph, list_k_cliques
from isrfd.harness import load_config
from isrfd.measurement import FaultScenario, MeasurementSet, inject_faults
from isrfd.orbit import ConstellationState, build_link_graph, propagate_all
from isrfd.stats import critical_value, solve_noncentrality


@pytest.fixture(scope="module")
def gps_epoch():
    cfg = load_config("gps")
    truth = propagate_all(cfg.constellation, 7200.0)
    graph = build_link_graph(ConstellationState(0.0, truth, truth, 0.0), cfg.body)
    return cfg, truth, graph, list_k_cliques(graph, 5)


def state_with_errors(truth, sigma_r, rng, scale=1.0):
    z = rng.standard_normal(truth.shape)
    eph = truth + 1e-3 * sigma_r * z
    return ConstellationState(0.0, scale * truth, scale * eph, scale * sigma_r)


def complete_epoch(rng, n=6, spread_km=2000.0):
    x = rng.uniform(-1, 1, (n, 3)) * spread_km
    return x, LinkGraph.from_adjacency(~np.eye(n, dtype=bool))


def test_report_invariant():
    with pytest.raises(ValueError):
        DetectionReport(Method.EDM, [], "fault")
    with pytest.raises(ValueError):
        DetectionReport(Method.EDM, [], "no_fault", identified_fault=1)


def test_edm_config_validation():
    with pytest.raises(ConfigError):
        EdmDetectorConfig(alpha=1.0)
    with pytest.raises(ConfigError):
        EdmDetectorConfig(alpha=0.1, eta_alpha=0.5)


# ------------------------------------------------------------ ephemeris


def test_ephemeris_clean_no_fault(gps_epoch):
    _, truth, graph, _ = gps_epoch
    state = ConstellationState(0.0, truth, truth, 0.0)
    meas = inject_faults(graph, truth, FaultScenario.none(), 1e-12, np.random.default_rng(0))
    rep = detect_ephemeris_comparison(meas, state, 1.0, 0.5, 0.01)
    assert rep.verdict == "no_fault"
    assert max(s.statistic for s in rep.per_satellite) < 1e-12


def test_ephemeris_identifies_large_fault(gps_epoch):
    _, truth, graph, _ = gps_epoch
    rng = np.random.default_rng(1)
    state = state_with_errors(truth, 1.0, rng)
    meas = inject_faults(graph, truth, FaultScenario.single(4, 30.0, 1.0), 0.5, rng)
    rep = detect_ephemeris_comparison(meas, state, 1.0, 0.5, 0.001)
    assert rep.verdict == "fault" and rep.identified_fault == 4


def test_ephemeris_unlinked_satellite_flagged():
    x = np.array([[10000.0, 0, 0], [0, 10000.0, 0], [0, 0, 10000.0]])
    g = LinkGraph.from_adjacency(np.array([[0, 1, 0], [1, 0, 0], [0, 0, 0]], dtype=bool))
    state = ConstellationState(0.0, x, x, 1.0)
    meas = inject_faults(g, x, FaultScenario.none(), 0.5, np.random.default_rng(0))
    rep = detect_ephemeris_comparison(meas, state, 1.0, 0.5, 0.01)
    assert rep.untestable() == [2]


def test_ephemeris_mdb_power_single_link():
    # with one link the statistic is exactly chi2(1, lambda), so the MDB is exact
    rng = np.random.default_rng(2)
    sr, sm, alpha, gamma = 1.0, 0.5, 0.01, 0.8
    x = np.array([[7000.0, 0, 0], [7000.0, 300.0, 0.0]])
    g = LinkGraph.from_adjacency(~np.eye(2, dtype=bool))
    mdb = ephemeris_mdb(alpha, gamma, sr, sm)
    thr = critical_value(alpha, 1)
    hits = 0
    trials = 4000
    for _ in range(trials):
        state = state_with_errors(x, sr, rng)
        meas = inject_faults(g, x, FaultScenario.single(0, mdb, 1.0), sm, rng)
        T = ephemeris_statistics(meas, state, sr, sm).T[0]
        hits += T >= thr
    assert hits / trials == pytest.approx(gamma, abs=3 * np.sqrt(gamma * (1 - gamma) / trials))


def test_ephemeris_mdb_formula():
    lam = solve_noncentrality(0.01, 0.8)
    assert ephemeris_mdb(0.01, 0.8, 0.0, 0.5) == pytest.approx(np.sqrt(lam) * 0.5)
    big = ephemeris_mdb(0.01, 0.8, 100.0, 0.5)
    assert big == pytest.approx(np.sqrt(lam * 2 * 100.0**2), rel=1e-4)


# --------------------------------------------------------- data snooping


def test_projector_properties(rng):
    x, g = complete_epoch(rng, 7)
    pairs = np.array(sorted(g.edges))
    H = design_matrix(pairs, 1e3 * x)
    sig = rng.uniform(0.3, 1.0, len(pairs))
    P = snooping_projector(H, sig)
    assert np.allclose(P @ H, 0.0, atol=1e-9)
    assert np.allclose(P @ P, P, atol=1e-9)


def test_design_matrix_finite_difference(rng):
    x, g = complete_epoch(rng, 5)
    pairs = np.array(sorted(g.edges))
    pos = 1e3 * x
    H = design_matrix(pairs, pos)
    f = lambda p: np.linalg.norm(p[pairs[:, 0]] - p[pairs[:, 1]], axis=1)
    h = 1e-3
    for col in range(H.shape[1]):
        dp = np.zeros(pos.size)
        dp[col] = h
        dp = dp.reshape(pos.shape)
        num = (f(pos + dp) - f(pos - dp)) / (2 * h)
        assert np.allclose(H[:, col], num, atol=1e-7)


def test_fault_vectors_sign_pattern():
    C = fault_vectors([(0, 1), (1, 2), (0, 2)], 3)
    assert C.tolist() == [[1, -1, 0], [0, 1, -1], [1, 0, -1]]


def test_w_sign_flip(gps_epoch):
    _, truth, graph, _ = gps_epoch
    rng = np.random.default_rng(3)
    state = ConstellationState(0.0, truth, truth, 0.0)
    meas = inject_faults(graph, truth, FaultScenario.single(2, 5.0, 1.0), 0.5, rng)
    pos = 1e3 * truth
    flipped = []
    for e in meas.edges:
        pred = float(np.linalg.norm(pos[e.i] - pos[e.j]))
        flipped.append(dataclasses.replace(e, r=2 * pred - e.r))
    w = snooping_statistics(meas, state, 0.5).w
    w_neg = snooping_statistics(MeasurementSet(0.0, flipped), state, 0.5).w
    # ranges are ~2e7 m, so residuals carry ~1e-8 m of cancellation error
    assert np.allclose(w, -w_neg, rtol=1e-6, atol=1e-6)


def test_snooping_identifies_dense_fault(gps_epoch):
    _, truth, graph, _ = gps_epoch
    rng = np.random.default_rng(4)
    for sat in (0, 11, 30):
        state = state_with_errors(truth, 1.0, rng)
        meas = inject_faults(graph, truth, FaultScenario.single(sat, 20.0, 1.0), 0.5, rng)
        rep = detect_data_snooping(meas, state, 0.5, 0.001)
        assert rep.identified_fault == sat


def test_snooping_mdb_power(rng):
    x, g = complete_epoch(rng, 6)
    state = ConstellationState(0.0, x, x, 0.0)
    meas0 = inject_faults(g, x, FaultScenario.none(), 0.5, rng)
    mdb = compute_mdbs(Method.DATA_SNOOPING, 0.01, 0.8, meas0, state, 0.5).values
    thr = critical_value(0.01, 1)
    sat = 3
    hits = 0
    for _ in range(3000):
        m = inject_faults(g, x, FaultScenario.single(sat, mdb[sat], 1.0), 0.5, rng)
        hits += snooping_statistics(m, state, 0.5).w[sat] ** 2 >= thr
    assert hits / 3000 == pytest.approx(0.8, abs=0.03)


# ------------------------------------------------------------------- EDM


def test_edm_single_subgraph_excluding_fault_unchanged(rng):
    x, g = complete_epoch(rng, 6)
    subs = [r for r in list_k_cliques(g, 5) if 5 not in r.members]
    state = ConstellationState(0.0, x, x, 0.0)
    cfg = EdmDetectorConfig(alpha=0.01, sigma_m=0.5)
    clean = inject_faults(g, x, FaultScenario.none(), 0.5, np.random.default_rng(8))
    bad = inject_faults(g, x, FaultScenario.single(5, 50.0, 1.0), 0.5, np.random.default_rng(8))
    a = detect_edm(clean, subs, cfg, state)
    b = detect_edm(bad, subs, cfg, state)
    assert a.per_satellite[5].statistic == b.per_satellite[5].statistic


def test_edm_ratio_zero_equals_no_fault(gps_epoch):
    _, truth, graph, subs = gps_epoch
    state = ConstellationState(0.0, truth, truth, 0.0)
    cfg = EdmDetectorConfig(alpha=0.05, sigma_m=0.5)
    a = inject_faults(graph, truth, FaultScenario.none(), 0.5, np.random.default_rng(5))
    b = inject_faults(graph, truth, FaultScenario.single(7, 10.0, 0.0), 0.5,
                      np.random.default_rng(5))
    ra, rb = detect_edm(a, subs, cfg, state), detect_edm(b, subs, cfg, state)
    assert ra.per_satellite == rb.per_satellite and ra.verdict == rb.verdict


def test_edm_identifies_dense_fault(gps_epoch):
    _, truth, graph, subs = gps_epoch
    rng = np.random.default_rng(6)
    state = ConstellationState(0.0, truth, truth, 0.0)
    cfg = EdmDetectorConfig(alpha=0.001, eta_alpha=1.5, sigma_m=0.5)
    for sat in (1, 17):
        meas = inject_faults(graph, truth, FaultScenario.single(sat, 20.0, 1.0), 0.5, rng)
        rep = detect_edm(meas, subs, cfg, state)
        assert rep.verdict == "fault" and rep.identified_fault == sat and not rep.ambiguous


def test_edm_no_subgraphs_unavailable(rng):
    x, g = complete_epoch(rng, 4)
    state = ConstellationState(0.0, x, x, 0.0)
    meas = inject_faults(g, x, FaultScenario.none(), 0.5, rng)
    rep = detect_edm(meas, [], EdmDetectorConfig(alpha=0.1), state)
    assert not rep.available and rep.verdict == "no_fault"


def test_edm_mdb_varies_per_satellite(rng):
    x, g = complete_epoch(rng, 5)
    state = ConstellationState(0.0, x, x, 0.0)
    meas = inject_faults(g, x, FaultScenario.none(), 0.5, rng)
    tab = compute_mdbs(Method.EDM, 0.01, 0.8, meas, state, 0.5, 1.0, list_k_cliques(g, 5))
    assert set(tab.values) == set(range(5))
    assert len({round(v, 9) for v in tab.values.values()}) == 5


def test_scale_equivariance(gps_epoch):
    _, truth, graph, subs = gps_epoch
    norms = []
    for c in (1.0, 10.0):
        rng = np.random.default_rng(7)
        state = state_with_errors(truth, 1.0, rng, scale=1.0)
        state = ConstellationState(0.0, c * state.truth_positions, c * state.ephemeris_positions,
                                   c * 1.0)
        meas = inject_faults(graph, state.truth_positions, FaultScenario.single(3, c * 6.0, 1.0),
                             c * 0.5, rng)
        e = detect_ephemeris_comparison(meas, state, c * 1.0, c * 0.5, 0.01)
        s = snooping_statistics(meas, state, c * 0.5)
        d = detect_edm(meas, subs, EdmDetectorConfig(0.01, 1.5, False, c * 0.5, c * 1.0), state)
        norms.append(np.concatenate([[r.normalized for r in e.per_satellite], s.w,
                                     [r.normalized for r in d.per_satellite]]))
    # limited by cancellation in range residuals, not by the algebra
    assert np.allclose(norms[0], norms[1], rtol=1e-6, atol=1e-7)
