"""Ephemeris comparison, Baarda data snooping, and the EDM subgraph test."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from isrfd import edmcore
from isrfd.errors import ConfigError
from isrfd.graphkit import Provenance, membership_matrix, pair_order
from isrfd.stats import correlated_threshold, critical_value, solve_noncentrality


class Method(str, enum.Enum):
    EPHEMERIS_COMPARISON = "ephemeris_comparison"
    DATA_SNOOPING = "data_snooping"
    EDM = "edm"


METHOD_ORDER = (Method.EPHEMERIS_COMPARISON, Method.DATA_SNOOPING, Method.EDM)


@dataclass(frozen=True)
class SatelliteResult:
    index: int
    statistic: float
    threshold: float
    normalized: float
    testable: bool = True


@dataclass
class DetectionReport:
    method: Method
    per_satellite: list
    verdict: str  # "no_fault" or "fault"
    identified_fault: int | None = None
    mdb_per_satellite: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    ambiguous: bool = False
    available: bool = True

    def __post_init__(self):
        if (self.identified_fault is None) != (self.verdict == "no_fault"):
            raise ValueError("identified_fault must be set exactly when verdict is 'fault'")

    @property
    def is_fault(self):
        return self.verdict == "fault"

    def flagged(self):
        """Satellites classified as faulty."""
        return set() if self.identified_fault is None else {self.identified_fault}

    def untestable(self):
        return [s.index for s in self.per_satellite if not s.testable]


@dataclass(frozen=True)
class EdmDetectorConfig:
    alpha: float
    eta_alpha: float = 1.5
    use_augmentation: bool = False
    sigma_m: float = 0.5
    sigma_r: float = 1.0

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.eta_alpha < 1:
            raise ConfigError(f"eta_alpha must be >= 1, got {self.eta_alpha}")
        if not self.sigma_m > 0 or self.sigma_r < 0:
            raise ConfigError("sigma_m must be positive and sigma_r non-negative")


def _positions_m(state, which="ephemeris"):
    pos = state.ephemeris_positions if which == "ephemeris" else state.truth_positions
    return 1e3 * np.asarray(pos, dtype=float)


def _pick(values, candidates, largest):
    # ties resolve to the lowest index
    best = None
    for i in candidates:
        v = values[i]
        if best is None or (v > values[best] if largest else v < values[best]):
            best = i
    return best


# ---------------------------------------------------------------- ephemeris


@dataclass(frozen=True)
class EphemerisStatistics:
    T: np.ndarray  # sum of squared normalised residuals per satellite
    links: np.ndarray  # l_i
    sigma_r: float
    sigma_m: float


def ephemeris_statistics(meas, state, sigma_r, sigma_m):
    n = state.n
    pos = _positions_m(state)
    pairs = meas.pairs()
    T = np.zeros(n)
    links = np.zeros(n, dtype=np.int64)
    if len(pairs):
        pred = np.linalg.norm(pos[pairs[:, 0]] - pos[pairs[:, 1]], axis=1)
        g = (meas.ranges() - pred) ** 2 / (2.0 * sigma_r**2 + sigma_m**2)
        np.add.at(T, pairs[:, 0], g)
        np.add.at(T, pairs[:, 1], g)
        np.add.at(links, pairs[:, 0], 1)
        np.add.at(links, pairs[:, 1], 1)
    return EphemerisStatistics(T, links, float(sigma_r), float(sigma_m))


def detect_ephemeris_comparison(meas, state, sigma_r, sigma_m, alpha, stats=None, table=None):
    """Per-satellite residual test against ranges predicted from the ephemeris.

    ``T_i`` sums the squared normalised residuals of satellite i's ``l_i``
    links and is compared to a critical value that accounts for the
    correlation induced by the shared ephemeris error.
    """
    if not sigma_m > 0:
        raise ConfigError("sigma_m must be positive")
    st = stats if stats is not None else ephemeris_statistics(meas, state, sigma_r, sigma_m)
    per = []
    testable = []
    for i in range(len(st.T)):
        l_i = int(st.links[i])
        if l_i == 0:
            per.append(SatelliteResult(i, 0.0, np.inf, 0.0, testable=False))
            continue
        thr = correlated_threshold(l_i, sigma_r, sigma_m, alpha, table=table)
        per.append(SatelliteResult(i, float(st.T[i]), thr, float(st.T[i] / thr)))
        testable.append(i)
    notes = []
    if len(testable) < len(per):
        notes.append(f"satellites without links: {[s.index for s in per if not s.testable]}")
    if not testable:
        return DetectionReport(Method.EPHEMERIS_COMPARISON, per, "no_fault", notes=notes,
                               available=False)
    if any(per[i].normalized >= 1.0 for i in testable):
        score = {i: st.T[i] / np.sqrt(st.links[i]) for i in testable}
        k = _pick(score, testable, largest=True)
        return DetectionReport(Method.EPHEMERIS_COMPARISON, per, "fault", k, notes=notes)
    return DetectionReport(Method.EPHEMERIS_COMPARISON, per, "no_fault", notes=notes)


# ------------------------------------------------------------ data snooping


def design_matrix(pairs, positions):
    """Jacobian of the ranges of ``pairs`` with respect to stacked positions."""
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    pos = np.asarray(positions, dtype=float)
    m, n = len(pairs), len(pos)
    H = np.zeros((m, 3 * n))
    diff = pos[pairs[:, 0]] - pos[pairs[:, 1]]
    u = diff / np.linalg.norm(diff, axis=1, keepdims=True)
    rows = np.arange(m)
    for ax in range(3):
        H[rows, 3 * pairs[:, 0] + ax] = u[:, ax]
        H[rows, 3 * pairs[:, 1] + ax] = -u[:, ax]
    return H


def fault_vectors(pairs, n):
    """(m, n) matrix whose column k is the sign pattern ``c_k`` of a fault at k."""
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    C = np.zeros((len(pairs), n))
    rows = np.arange(len(pairs))
    C[rows, pairs[:, 0]] = 1.0
    C[rows, pairs[:, 1]] = -1.0
    return C


def _column_basis(A, rtol=1e-10):
    if A.size == 0:
        return np.zeros((A.shape[0], 0))
    U, s, _ = np.linalg.svd(A, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return U[:, :0]
    return U[:, s > rtol * s[0]]


def snooping_projector(H, sigmas):
    """``I - H (H^T W H)^+ H^T W`` with ``W = diag(sigmas)^-2``."""
    sig = np.broadcast_to(np.asarray(sigmas, dtype=float), (H.shape[0],))
    Q = _column_basis(H / sig[:, None])
    Pw = np.eye(H.shape[0]) - Q @ Q.T
    # back from whitened coordinates: P = S Pw S^-1
    return sig[:, None] * Pw / sig[None, :]


@dataclass(frozen=True)
class SnoopingStatistics:
    w: np.ndarray
    cpc: np.ndarray  # c_k^T Sigma^-1 P c_k
    redundancy: int


SNOOP_TOL = 1e-10


def snooping_statistics(meas, state, sigma_m=None):
    n = state.n
    pairs = meas.pairs()
    if len(pairs) == 0:
        return SnoopingStatistics(np.zeros(n), np.zeros(n), 0)
    pos = _positions_m(state)
    sig = meas.sigmas() if sigma_m is None else np.full(len(pairs), float(sigma_m))
    pred = np.linalg.norm(pos[pairs[:, 0]] - pos[pairs[:, 1]], axis=1)
    y = (meas.ranges() - pred) / sig
    H = design_matrix(pairs, pos) / sig[:, None]
    C = fault_vectors(pairs, n) / sig[:, None]
    Q = _column_basis(H)
    Py = y - Q @ (Q.T @ y)
    PC = C - Q @ (Q.T @ C)
    num = C.T @ Py
    cpc = np.einsum("mk,mk->k", C, PC)
    ccn = np.einsum("mk,mk->k", C, C)
    ok = cpc > SNOOP_TOL * np.maximum(ccn, 1.0)
    w = np.where(ok, num / np.sqrt(np.where(ok, cpc, 1.0)), 0.0)
    return SnoopingStatistics(w, np.where(ok, cpc, 0.0), len(pairs) - Q.shape[1])


def detect_data_snooping(meas, state, sigma_m, alpha, stats=None):
    """Baarda w-test for each single-satellite fault hypothesis."""
    st = stats if stats is not None else snooping_statistics(meas, state, sigma_m)
    thr = float(np.sqrt(critical_value(alpha, 1)))
    per = []
    testable = []
    for k in range(len(st.w)):
        if st.cpc[k] <= 0:
            per.append(SatelliteResult(k, 0.0, thr, 0.0, testable=False))
            continue
        a = abs(float(st.w[k]))
        per.append(SatelliteResult(k, float(st.w[k]), thr, a / thr))
        testable.append(k)
    notes = []
    if len(testable) < len(per):
        notes.append(f"untestable satellites: {[s.index for s in per if not s.testable]}")
    if not testable:
        return DetectionReport(Method.DATA_SNOOPING, per, "no_fault", notes=notes, available=False)
    absw = {k: abs(st.w[k]) for k in testable}
    k = _pick(absw, testable, largest=True)
    if absw[k] >= thr:
        return DetectionReport(Method.DATA_SNOOPING, per, "fault", k, notes=notes)
    return DetectionReport(Method.DATA_SNOOPING, per, "no_fault", notes=notes)


# ---------------------------------------------------------------------- EDM


@dataclass(frozen=True)
class EdmStatistics:
    scaled: np.ndarray  # gamma / s2 per kept subgraph
    membership: np.ndarray  # (N, n) bool
    dropped: int


def subgraph_matrices(meas, records, sigma_m, sigma_r, state=None):
    """Stacks of observed 5x5 range matrices and per-edge sigmas for ``records``."""
    N = len(records)
    members = np.array([r.members for r in records], dtype=np.int64).reshape(N, 5)
    measured = np.array([r.measured_mask for r in records], dtype=bool).reshape(N, 10)
    pairs = pair_order(5)
    a_idx = np.array([a for a, _ in pairs])
    b_idx = np.array([b for _, b in pairs])
    ia = members[:, a_idx]
    ib = members[:, b_idx]
    n = int(members.max()) + 1 if N else 0
    pm = meas.pairs()
    if len(pm):
        n = max(n, int(pm.max()) + 1)
    R = np.zeros((n, n))
    Sg = np.zeros((n, n))
    if len(pm):
        R[pm[:, 0], pm[:, 1]] = R[pm[:, 1], pm[:, 0]] = meas.ranges()
        sg = meas.sigmas() if sigma_m is None else np.full(len(pm), float(sigma_m))
        Sg[pm[:, 0], pm[:, 1]] = Sg[pm[:, 1], pm[:, 0]] = sg
    r = np.where(measured, R[ia, ib], 0.0)
    sig = np.where(measured, Sg[ia, ib], 0.0)
    if not measured.all():
        if state is None:
            raise ValueError("computed edges need ephemeris positions (state)")
        pos = _positions_m(state)
        comp = ~measured
        r[comp] = np.linalg.norm(pos[ia[comp]] - pos[ib[comp]], axis=1)
        sig[comp] = np.sqrt(2.0) * sigma_r
    D = np.zeros((N, 5, 5))
    S = np.zeros((N, 5, 5))
    D[:, a_idx, b_idx] = r
    D[:, b_idx, a_idx] = r
    S[:, a_idx, b_idx] = sig
    S[:, b_idx, a_idx] = sig
    return D, S


def edm_statistics(meas, subgraphs, config: EdmDetectorConfig, state=None, n=None):
    n = n if n is not None else (state.n if state is not None else max(meas.satellites()) + 1)
    if not subgraphs:
        return EdmStatistics(np.empty(0), np.zeros((0, n), dtype=bool), 0)
    D, S = subgraph_matrices(meas, subgraphs, config.sigma_m, config.sigma_r, state)
    gamma, s2 = edmcore.batch_statistics(D, S)
    keep = np.isfinite(s2) & (s2 > 1e-300) & np.isfinite(gamma)
    mem = membership_matrix(subgraphs, n)
    return EdmStatistics(gamma[keep] / s2[keep], mem[keep], int((~keep).sum()))


def detect_edm(meas, subgraphs, config: EdmDetectorConfig, state=None, stats=None, n=None):
    """Leave-one-satellite-out sums of subgraph statistics.

    For each satellite i the scaled statistics of subgraphs not containing
    i are summed and divided by ``eta * chi2_crit(N_i)``. Any normalised sum
    reaching 1 signals a fault; the satellite whose exclusion explains the
    data (smallest normalised sum below 1) is identified.
    """
    st = stats if stats is not None else edm_statistics(meas, subgraphs, config, state, n)
    nsat = st.membership.shape[1]
    notes = []
    if st.dropped:
        notes.append(f"{st.dropped} degenerate subgraphs dropped")
    excl = ~st.membership
    counts = excl.sum(axis=0)
    sums = st.scaled @ excl if len(st.scaled) else np.zeros(nsat)
    per = []
    testable = []
    norm = {}
    for i in range(nsat):
        if counts[i] == 0:
            per.append(SatelliteResult(i, 0.0, np.inf, 0.0, testable=False))
            continue
        thr = config.eta_alpha * float(critical_value(config.alpha, int(counts[i])))
        norm[i] = float(sums[i] / thr)
        per.append(SatelliteResult(i, float(sums[i]), thr, norm[i]))
        testable.append(i)
    if len(testable) < nsat:
        notes.append(f"satellites without excluding subgraphs: "
                     f"{[s.index for s in per if not s.testable]}")
    if not testable:
        return DetectionReport(Method.EDM, per, "no_fault", notes=notes, available=False)
    if all(norm[i] < 1.0 for i in testable):
        return DetectionReport(Method.EDM, per, "no_fault", notes=notes)
    passing = [i for i in testable if norm[i] < 1.0]
    if passing:
        k = _pick(norm, passing, largest=False)
        return DetectionReport(Method.EDM, per, "fault", k, notes=notes)
    k = _pick(norm, testable, largest=False)
    notes.append("unattributable fault: no single-satellite exclusion passes")
    return DetectionReport(Method.EDM, per, "fault", k, notes=notes, ambiguous=True)


# --------------------------------------------------------------------- MDBs


@dataclass
class MdbTable:
    method: Method
    values: dict  # satellite -> MDB (m)
    reasons: dict  # satellite -> why no value

    def get(self, k):
        return self.values.get(k)


def ephemeris_mdb(alpha, power_gamma, sigma_r, sigma_m):
    lam = solve_noncentrality(alpha, power_gamma, 1)
    return float(np.sqrt(lam * (2.0 * sigma_r**2 + sigma_m**2)))


def compute_mdbs(method, alpha, power_gamma, meas, state, sigma_m, sigma_r=0.0,
                 subgraphs=None):
    """Minimum detectable bias per satellite for one detector.

    For the EDM test the value is that of the most sensitive subgraph that
    contains the satellite, with the bias applied to its measured edges.
    """
    method = Method(method)
    n = state.n
    values, reasons = {}, {}
    if method is Method.EPHEMERIS_COMPARISON:
        st = ephemeris_statistics(meas, state, sigma_r, sigma_m)
        mdb = ephemeris_mdb(alpha, power_gamma, sigma_r, sigma_m)
        for k in range(n):
            if st.links[k] > 0:
                values[k] = mdb
            else:
                reasons[k] = "no links"
    elif method is Method.DATA_SNOOPING:
        lam = solve_noncentrality(alpha, power_gamma, 1)
        st = snooping_statistics(meas, state, sigma_m)
        for k in range(n):
            if st.cpc[k] > 0:
                values[k] = float(np.sqrt(lam / st.cpc[k]))
            else:
                reasons[k] = "fault not separable from geometry"
    else:
        if not subgraphs:
            return MdbTable(method, {}, {k: "no subgraphs" for k in range(n)})
        D, S = subgraph_matrices(meas, subgraphs, sigma_m, sigma_r, state)
        for rec, Dt, sig in zip(subgraphs, D, S):
            res, dec = edmcore.test_statistic_with_decomposition(Dt, sig)
            measured = np.zeros((5, 5), dtype=bool)
            for (a, b), is_m in zip(pair_order(5), rec.measured_mask):
                measured[a, b] = measured[b, a] = is_m
            for pos, k in enumerate(rec.members):
                F = edmcore.fault_matrix(5, pos, 1.0, mask=measured)
                # members are sorted, so position order is index order
                energy = edmcore.bias_energy(Dt, F, dec)
                if energy <= 0:
                    continue
                mdb = edmcore.mdb_edm(alpha, power_gamma, res.s2, energy)
                if k not in values or mdb < values[k]:
                    values[k] = mdb
        for k in range(n):
            if k not in values:
                reasons[k] = "not in any usable subgraph"
    return MdbTable(method, values, reasons)
