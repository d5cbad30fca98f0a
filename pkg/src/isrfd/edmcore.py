"""Euclidean distance matrices, their geometric centring and the singular-value test.

For a noiseless, fault-free configuration in 3-D the centred EDM has rank
at most 3; measurement noise fills in singular values 4..n-1, and a biased
satellite lifts them further. The test statistic is the energy of those
noise-subspace singular values, scaled by its first-order variance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from isrfd._backend import kernels
from isrfd.errors import DegenerateGeometryError
from isrfd.stats import solve_noncentrality

RANK_TOL = 1e-9
SIGNAL_DIM = 3


@dataclass(frozen=True)
class DistanceMatrix:
    """Symmetric matrix of ranges (m) with zero diagonal."""

    entries: np.ndarray

    def __post_init__(self):
        D = np.asarray(self.entries, dtype=float)
        if D.ndim != 2 or D.shape[0] != D.shape[1]:
            raise ValueError("distance matrix must be square")
        if not np.all(np.isfinite(D)):
            raise ValueError("distance matrix has non-finite entries")
        if np.any(np.diag(D) != 0):
            raise ValueError("distance matrix must have a zero diagonal")
        if not np.allclose(D, D.T, rtol=0, atol=1e-12 * max(1.0, np.max(np.abs(D)))):
            raise ValueError("distance matrix must be symmetric")
        object.__setattr__(self, "entries", D)

    @property
    def n(self):
        return self.entries.shape[0]

    @classmethod
    def from_points(cls, points):
        """Exact distances of an (n, d) point array."""
        x = np.asarray(points, dtype=float)
        D = np.linalg.norm(x[:, None, :] - x[None, :, :], axis=-1)
        np.fill_diagonal(D, 0.0)
        return cls(D)


@dataclass(frozen=True)
class GcedmDecomposition:
    singular_values: np.ndarray
    U: np.ndarray
    V: np.ndarray
    U_hat: np.ndarray  # centred noise-subspace basis
    V_hat: np.ndarray


@dataclass(frozen=True)
class EdmTestResult:
    gamma: float
    s2: float
    dof: int

    @property
    def scaled(self):
        return self.gamma / self.s2


def _entries(D):
    return D.entries if isinstance(D, DistanceMatrix) else np.asarray(D, dtype=float)


def build_edm(ranges):
    """Squared-range matrix."""
    D = _entries(ranges)
    return D * D


def centering_matrix(n):
    return np.eye(n) - np.full((n, n), 1.0 / n)


def gcedm(edm):
    """Geometric-centred EDM ``-1/2 J D J``; broadcasts over leading axes."""
    edm = np.asarray(edm, dtype=float)
    # J X J without forming J: subtract row and column means, add the grand mean
    row = edm.mean(axis=-1, keepdims=True)
    col = edm.mean(axis=-2, keepdims=True)
    grand = edm.mean(axis=(-2, -1), keepdims=True)
    G = -0.5 * (edm - row - col + grand)
    return 0.5 * (G + np.swapaxes(G, -1, -2))


def _fix_signs(U, V):
    # first component that is not rounding noise is made positive
    scale = np.max(np.abs(U), axis=-2, keepdims=True)
    big = np.abs(U) > 1e-8 * scale
    first = np.argmax(big, axis=-2)[..., None, :]
    lead = np.take_along_axis(U, first, axis=-2)
    sign = np.where(lead < 0, -1.0, 1.0)
    return U * sign, V * sign


def noise_columns(n, literal_n5=False):
    """Slice of singular-vector columns spanning the noise subspace."""
    if literal_n5 and n == 5:
        return slice(SIGNAL_DIM, 5)
    return slice(SIGNAL_DIM, n - 1)


def decompose(G, literal_n5=True):
    """SVD with descending values, deterministic signs, and centred noise bases.

    For n = 5 the noise basis is columns 4 and 5 after centring (the fifth is
    the structural ones-direction and is annihilated by the centring); for
    larger n it is columns 4..n-1.
    """
    G = np.asarray(G, dtype=float)
    n = G.shape[-1]
    U, S, Vt = np.linalg.svd(G)
    V = np.swapaxes(Vt, -1, -2)
    U, V = _fix_signs(U, V)
    cols = noise_columns(n, literal_n5)
    Uh = U[..., cols]
    Vh = V[..., cols]
    Uh = Uh - Uh.mean(axis=-2, keepdims=True)
    Vh = Vh - Vh.mean(axis=-2, keepdims=True)
    return GcedmDecomposition(S, U, V, Uh, Vh)


def numerical_rank(singular_values, rel_tol=RANK_TOL):
    s = np.asarray(singular_values, dtype=float)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s / s[0] > rel_tol))


def fault_matrix(n, fault, bias, mask=None):
    """Symmetric (n, n) bias matrix for a fault at satellite ``fault``.

    ``F[fault, j] = +bias`` when ``fault < j`` and ``-bias`` when
    ``fault > j``. ``mask`` optionally restricts which incident edges carry it.
    """
    F = np.zeros((n, n))
    for j in range(n):
        if j == fault or (mask is not None and not mask[fault, j]):
            continue
        F[fault, j] = F[j, fault] = bias if fault < j else -bias
    return F


def rank_profile(points, fault_bias=None, noise_sigma=0.0, rng=None):
    """Singular values of the centred EDM of perturbed ranges.

    ``points`` is (d, n); ``fault_bias`` is an (n, n) symmetric matrix added
    to the exact ranges; noise is i.i.d. per edge.
    """
    X = np.asarray(points, dtype=float)
    d, n = X.shape
    if n < d + 2:
        raise ValueError("need n >= d + 2 points")
    D = DistanceMatrix.from_points(X.T).entries
    clean = np.linalg.svd(gcedm(D * D), compute_uv=False)
    if numerical_rank(clean) < d:
        raise DegenerateGeometryError(f"points span fewer than {d} dimensions")
    if fault_bias is not None:
        D = D + np.asarray(fault_bias, dtype=float)
    if noise_sigma > 0:
        if rng is None:
            raise ValueError("rng required for noisy profiles")
        iu = np.triu_indices(n, 1)
        E = np.zeros((n, n))
        E[iu] = rng.normal(0.0, noise_sigma, size=len(iu[0]))
        D = D + E + E.T
    return np.linalg.svd(gcedm(D * D), compute_uv=False)


def _sigma_matrix(sigma_edge, n):
    sig = np.asarray(sigma_edge, dtype=float)
    if sig.ndim == 0:
        sig = np.full((n, n), float(sig))
    return sig


def _statistic(D_tilde, sigma_edge, literal_n5):
    Dt = _entries(D_tilde)
    n = Dt.shape[0]
    if n < 5:
        raise ValueError("need at least 5 nodes")
    sig = _sigma_matrix(sigma_edge, n)
    dec = decompose(gcedm(Dt * Dt), literal_n5=literal_n5)
    k = (n - 4) * (n - 3) // 2
    W = (sig * Dt) ** 2
    s2 = float(kernels.scale_squared(dec.U_hat[None], dec.V_hat[None], W[None])[0]) / k
    lam = dec.singular_values
    gamma = float(np.sum(lam[SIGNAL_DIM:n - 1] ** 2))
    if not s2 > 1e-300 or not np.isfinite(s2):
        raise DegenerateGeometryError("noise-subspace scale underflowed")
    return EdmTestResult(gamma, s2, k), dec


def test_statistic_n5(D_tilde, sigma_edge):
    """Squared 4th singular value of a 5-node centred EDM and its scale."""
    Dt = _entries(D_tilde)
    if Dt.shape != (5, 5):
        raise ValueError("expected a 5x5 distance matrix")
    return _statistic(Dt, sigma_edge, literal_n5=True)[0]


def test_statistic_general(D_tilde, sigma_edge):
    """Noise-subspace energy ``sum_{k=4}^{n-1} lambda_k^2`` with its mean scale."""
    return _statistic(D_tilde, sigma_edge, literal_n5=False)[0]


def test_statistic_with_decomposition(D_tilde, sigma_edge):
    return _statistic(D_tilde, sigma_edge, literal_n5=_entries(D_tilde).shape[0] == 5)


def bias_energy(D, F, decomposition):
    """``|| U_hat^T J (D o F) J V_hat ||_F^2`` (first-order fault signal)."""
    D = _entries(D)
    M = gcedm(D * np.asarray(F, dtype=float))
    P = decomposition.U_hat.T @ M @ decomposition.V_hat
    # gcedm carries a factor -1/2; the first-order perturbation is J (D o F) J * (-1)
    return float(4.0 * np.sum(P * P))


def noncentrality(D, F, decomposition, s2):
    """Noncentrality of the scaled statistic for a fault pattern ``F``."""
    if not np.any(F):
        return 0.0
    return bias_energy(D, F, decomposition) / s2


def mdb_edm(alpha, power_gamma, s2, lambda_unit_bias):
    """Minimum detectable bias (m) of a single 5-node test.

    ``lambda_unit_bias`` is :func:`bias_energy` evaluated at a 1 m bias;
    the noncentrality at bias ``b`` is ``b^2 * lambda_unit_bias / s2``.
    """
    if not lambda_unit_bias > 0:
        raise ValueError("lambda_unit_bias must be positive")
    lam_bar = solve_noncentrality(alpha, power_gamma, 1)
    return float(np.sqrt(lam_bar / lambda_unit_bias * s2))


def batch_statistics(D_tilde, sigma_edge):
    """Vectorised n = 5 statistics over a stack of (N, 5, 5) matrices.

    Returns ``(gamma, s2)`` arrays.
    """
    Dt = np.asarray(D_tilde, dtype=float)
    sig = np.asarray(sigma_edge, dtype=float)
    if Dt.shape[0] == 0:
        return np.empty(0), np.empty(0)
    dec = decompose(gcedm(Dt * Dt), literal_n5=True)
    s2 = np.asarray(kernels.scale_squared(dec.U_hat, dec.V_hat, (sig * Dt) ** 2))
    gamma = dec.singular_values[:, SIGNAL_DIM] ** 2
    return gamma, s2
