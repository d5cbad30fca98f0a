import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as sps

from isrfd import edmcore
from isrfd.errors import DegenerateGeometryError
from isrfd.stats import QuadFormSpec, imhof_cdf


def points(rng, n):
    return rng.uniform(0.0, 1.0, size=(n, 3))


def dist(X):
    return edmcore.DistanceMatrix.from_points(X).entries


def noisy(D, sigma, rng):
    n = len(D)
    iu = np.triu_indices(n, 1)
    E = np.zeros_like(D)
    E[iu] = rng.normal(0.0, sigma, len(iu[0]))
    return D + E + E.T


def test_distance_matrix_validation():
    with pytest.raises(ValueError):
        edmcore.DistanceMatrix(np.ones((3, 3)))
    with pytest.raises(ValueError):
        edmcore.DistanceMatrix(np.array([[0, 1.0], [2.0, 0]]))


def test_build_edm_triangle():
    tri = np.array([[0, 0, 0], [1, 0, 0], [0.5, np.sqrt(3) / 2, 0]])
    E = edmcore.build_edm(edmcore.DistanceMatrix.from_points(tri))
    assert np.allclose(E[~np.eye(3, dtype=bool)], 1.0)


def test_build_edm_against_oracle(rng):
    X = points(rng, 7)
    E = edmcore.build_edm(edmcore.DistanceMatrix.from_points(X))
    ref = np.array([[np.sum((a - b) ** 2) for b in X] for a in X])
    assert np.allclose(E, ref, atol=1e-14)


@settings(max_examples=30)
@given(st.integers(0, 2**32 - 1), st.integers(3, 12))
def test_gcedm_symmetric_rowsum_zero(seed, n):
    X = points(np.random.default_rng(seed), n)
    G = edmcore.gcedm(edmcore.build_edm(dist(X)))
    assert np.allclose(G, G.T)
    assert np.allclose(G @ np.ones(n), 0.0, atol=1e-12)


def test_gcedm_is_gram_of_centred_points(rng):
    X = points(rng, 6)
    Xc = X - X.mean(axis=0)
    assert np.allclose(edmcore.gcedm(edmcore.build_edm(dist(X))), Xc @ Xc.T, atol=1e-13)
    assert np.allclose(edmcore.gcedm(np.zeros((5, 5))), 0.0)
    J = edmcore.centering_matrix(5)
    E = edmcore.build_edm(dist(points(rng, 5)))
    assert np.allclose(edmcore.gcedm(E), -0.5 * J @ E @ J)


def test_noiseless_and_noisy_5_point_spectrum(rng):
    D = dist(points(rng, 5))
    s = np.linalg.svd(edmcore.gcedm(D * D), compute_uv=False)
    assert s[3] / s[0] < 1e-10 and s[4] / s[0] < 1e-10
    Dn = noisy(D, 1e-6, rng)
    s = np.linalg.svd(edmcore.gcedm(Dn * Dn), compute_uv=False)
    assert s[3] > 0 and s[4] / s[0] < 1e-10


def test_rank_profile_examples(rng):
    X = points(rng, 12).T
    assert edmcore.numerical_rank(edmcore.rank_profile(X)) == 3
    F1 = edmcore.fault_matrix(12, 4, 1e-1)
    assert edmcore.numerical_rank(edmcore.rank_profile(X, F1)) <= 5
    F2 = F1 + edmcore.fault_matrix(12, 9, 1e-1)
    assert edmcore.numerical_rank(edmcore.rank_profile(X, F2)) <= 7
    assert edmcore.numerical_rank(edmcore.rank_profile(X, F2, 1e-6, rng)) == 11


def test_rank_profile_rejects_coplanar(rng):
    X = points(rng, 8).T
    X[2] = 0.0
    with pytest.raises(DegenerateGeometryError):
        edmcore.rank_profile(X)
    with pytest.raises(ValueError):
        edmcore.rank_profile(points(rng, 4).T)


def test_fault_matrix_signs():
    F = edmcore.fault_matrix(5, 2, 3.0)
    assert F[2, 4] == 3.0 and F[2, 0] == -3.0 and np.allclose(F, F.T)
    assert not F[np.ix_([0, 1, 3, 4], [0, 1, 3, 4])].any()


def test_noiseless_statistic_zero(rng):
    D = dist(points(rng, 5))
    dec = edmcore.decompose(edmcore.gcedm(D * D))
    assert dec.singular_values[3] ** 2 / dec.singular_values[0] ** 2 < 1e-18
    D6 = dist(points(rng, 6))
    s = np.linalg.svd(edmcore.gcedm(D6 * D6), compute_uv=False)
    assert np.sum(s[3:5] ** 2) / s[0] ** 2 < 1e-18


def test_s2_scales_with_sigma_squared(rng):
    D = dist(points(rng, 5))
    Dn = noisy(D, 1e-6, rng)
    a = edmcore.test_statistic_n5(Dn, 1e-6)
    b = edmcore.test_statistic_n5(Dn, 2e-6)
    assert b.s2 == pytest.approx(4 * a.s2, rel=1e-12)
    assert a.dof == 1


def test_batch_matches_single(rng):
    Ds = np.array([noisy(dist(points(rng, 5)), 1e-6, rng) for _ in range(20)])
    S = np.full_like(Ds, 1e-6)
    gamma, s2 = edmcore.batch_statistics(Ds, S)
    for k in range(20):
        res = edmcore.test_statistic_n5(Ds[k], 1e-6)
        assert gamma[k] == pytest.approx(res.gamma, rel=1e-12)
        assert s2[k] == pytest.approx(res.s2, rel=1e-12)


def test_noncentrality_zero_and_quadratic(rng):
    D = dist(points(rng, 5))
    dec = edmcore.decompose(edmcore.gcedm(D * D))
    assert edmcore.noncentrality(D, np.zeros((5, 5)), dec, 1.0) == 0.0
    l1 = edmcore.noncentrality(D, edmcore.fault_matrix(5, 1, 1e-3), dec, 1e-12)
    l2 = edmcore.noncentrality(D, edmcore.fault_matrix(5, 1, 2e-3), dec, 1e-12)
    assert l2 == pytest.approx(4 * l1, rel=1e-12)


def test_mdb_edm_scaling():
    base = edmcore.mdb_edm(0.01, 0.8, 1e-12, 3.0)
    assert edmcore.mdb_edm(0.01, 0.8, 4e-12, 3.0) == pytest.approx(2 * base)
    assert edmcore.mdb_edm(0.01, 0.8, 1e-12, 1.5) == pytest.approx(np.sqrt(2) * base)
    with pytest.raises(ValueError):
        edmcore.mdb_edm(0.01, 0.8, 1e-12, 0.0)


def test_degenerate_scale_raises():
    D = np.zeros((5, 5))
    with pytest.raises(DegenerateGeometryError):
        edmcore.test_statistic_n5(D, 1.0)


def _noise_basis(D):
    # orthonormal basis of the null space of the clean centred EDM, minus the ones direction
    n = len(D)
    w, Q = np.linalg.eigh(edmcore.gcedm(D * D))
    N = Q[:, np.argsort(np.abs(w))[: n - 3]]
    N = N - N.mean(axis=0)
    U, s, _ = np.linalg.svd(N, full_matrices=False)
    return U[:, s > 1e-8]


def test_n6_statistic_is_generalised_chi2():
    """For n = 6 the noise-block entries have unequal variances.

    Their covariance predicts the law of the scaled statistic exactly; it
    has mean ``dof`` but is not chi-squared with ``dof`` degrees of freedom.
    """
    rng = np.random.default_rng(21)
    D = dist(points(rng, 6))
    sigma = 1e-6
    B = _noise_basis(D)
    r = B.shape[1]
    n = len(D)
    iu, ju = np.triu_indices(n, 1)
    # M_ab = -sum_{i<j} D_ij E_ij (B_ia B_jb + B_ja B_ib)
    coef = np.array([D[iu, ju] * (B[iu, a] * B[ju, b] + B[ju, a] * B[iu, b])
                     for a in range(r) for b in range(r)])
    C = sigma**2 * coef @ coef.T
    dof = (n - 4) * (n - 3) // 2
    s2 = np.trace(C) / dof
    weights = np.linalg.eigvalsh(C) / s2
    weights = weights[weights > 1e-9 * weights.max()]
    x = np.array([edmcore.test_statistic_general(noisy(D, sigma, rng), sigma).scaled
                  for _ in range(4000)])
    spec = QuadFormSpec(tuple(weights))
    p_gen = sps.kstest(x, np.vectorize(lambda q: imhof_cdf(q, spec))).pvalue
    assert p_gen > 0.01
    assert np.sum(weights) == pytest.approx(dof, rel=1e-9)
    assert x.mean() == pytest.approx(dof, rel=0.1)
