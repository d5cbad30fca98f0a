import numpy as np
import pytest
from scipy import integrate
from scipy import stats as sps

from isrfd.stats import (
    Chi2Spec,
    QuadFormSpec,
    ThresholdTable,
    chi2_cdf,
    chi2_quantile,
    correlated_eigenvalues,
    correlated_threshold,
    critical_value,
    imhof_cdf,
    imhof_quantile,
    noncentral_chi2_cdf,
    solve_noncentrality,
)


def chi2_pdf(x, k):
    from math import exp, gamma, log

    if x <= 0:
        return 0.0
    return exp((k / 2 - 1) * log(x) - x / 2 - (k / 2) * log(2) - log(gamma(k / 2)))


@pytest.mark.parametrize("k", [1, 2, 3, 7, 30])
def test_chi2_cdf_against_quadrature(k):
    for x in [0.1, 0.5, 1.0, 3.0, 10.0, 40.0]:
        ref, _ = integrate.quad(chi2_pdf, 0.0, x, args=(k,), epsabs=1e-13, limit=200)
        assert chi2_cdf(x, k) == pytest.approx(ref, abs=1e-9)


def test_chi2_basic_properties():
    for k in (1, 4, 12):
        assert chi2_cdf(0.0, k) == 0.0
        xs = np.linspace(0.05, 30, 60)
        assert np.allclose(chi2_quantile(chi2_cdf(xs, k), k), xs, rtol=1e-10)
        assert np.all(np.diff(chi2_cdf(xs, k)) > 0)


def test_quantile_domain():
    for p in (0.0, 1.0, -0.1, 1.5):
        with pytest.raises(ValueError):
            chi2_quantile(p, 3)


def test_spec_validation():
    with pytest.raises(ValueError):
        Chi2Spec(0)
    with pytest.raises(ValueError):
        Chi2Spec(1, -1.0)
    with pytest.raises(ValueError):
        QuadFormSpec(())


def test_critical_value_upper_tail():
    assert critical_value(0.05, 1) == pytest.approx(3.841458820694124)
    assert 1 - chi2_cdf(critical_value(0.01, 5), 5) == pytest.approx(0.01)


def test_noncentral_reduces_and_monotone():
    xs = np.linspace(0.1, 20, 30)
    assert np.allclose(noncentral_chi2_cdf(xs, Chi2Spec(2, 0.0)), chi2_cdf(xs, 2), atol=1e-10)
    vals = [noncentral_chi2_cdf(5.0, Chi2Spec(2, lam)) for lam in np.linspace(0, 30, 31)]
    assert np.all(np.diff(vals) < 0)


def test_noncentral_against_mc():
    rng = np.random.default_rng(0)
    lam = 4.0
    samples = np.sort((rng.standard_normal(1_000_000) + np.sqrt(lam)) ** 2)
    qs = np.linspace(0.1, 25, 40)
    emp = np.searchsorted(samples, qs) / samples.size
    assert np.max(np.abs(noncentral_chi2_cdf(qs, Chi2Spec(1, lam)) - emp)) < 0.003


def test_solve_noncentrality_self_consistent():
    for alpha in (0.001, 0.01, 0.1):
        for gamma in (0.5, 0.8, 0.95):
            for dof in (1, 3):
                lam = solve_noncentrality(alpha, gamma, dof)
                c = critical_value(alpha, dof)
                assert noncentral_chi2_cdf(c, Chi2Spec(dof, lam)) == pytest.approx(1 - gamma,
                                                                                  abs=1e-8)


def test_solve_noncentrality_monotone():
    gammas = np.linspace(0.2, 0.99, 12)
    lams = [solve_noncentrality(0.01, g) for g in gammas]
    assert np.all(np.diff(lams) > 0)
    alphas = np.linspace(0.001, 0.15, 12)
    lams = [solve_noncentrality(a, 0.8) for a in alphas]
    assert np.all(np.diff(lams) < 0)
    assert solve_noncentrality(0.05, 0.05 + 1e-9) < 1e-6
    assert solve_noncentrality(0.05, 0.01) == 0.0
    with pytest.raises(ValueError):
        solve_noncentrality(0.0, 0.8)


def test_imhof_reduces_to_chi2():
    for q in np.linspace(0.05, 15, 25):
        assert imhof_cdf(q, QuadFormSpec((1.0, 1.0, 1.0))) == pytest.approx(chi2_cdf(q, 3),
                                                                            abs=1e-6)


def test_imhof_mixed_weights_against_mc():
    rng = np.random.default_rng(1)
    lam = np.array([3.0, 1.0, 0.4, 0.1])
    T = np.sort((rng.standard_normal((500_000, 4)) ** 2) @ lam)
    qs = np.quantile(T, np.linspace(0.02, 0.98, 25))
    emp = np.searchsorted(T, qs, side="right") / T.size
    got = np.array([imhof_cdf(q, QuadFormSpec(tuple(lam))) for q in qs])
    assert np.max(np.abs(got - emp)) < 0.004


def test_imhof_bounds_and_monotone():
    spec = QuadFormSpec(correlated_eigenvalues(8, 0.4))
    vals = [imhof_cdf(q, spec) for q in np.linspace(0.0, 60.0, 40)]
    assert all(0.0 <= v <= 1.0 for v in vals)
    assert np.all(np.diff(vals) >= -1e-9)
    assert imhof_cdf(0.0, spec) == 0.0


def test_imhof_quantile_roundtrip():
    spec = QuadFormSpec(correlated_eigenvalues(6, 0.3))
    for p in (0.5, 0.9, 0.99, 0.999):
        assert imhof_cdf(imhof_quantile(p, spec), spec) == pytest.approx(p, abs=1e-8)


def test_correlated_eigenvalues_match_matrix():
    for l, rho in [(1, 0.3), (5, 0.2), (12, 0.49)]:
        S = (1 - rho) * np.eye(l) + rho * np.ones((l, l))
        assert np.allclose(np.sort(correlated_eigenvalues(l, rho)), np.linalg.eigvalsh(S))


def test_threshold_uncorrelated_limit():
    for l in (1, 4, 10):
        assert correlated_threshold(l, 0.0, 0.5, 0.01) == pytest.approx(
            critical_value(0.01, l), rel=1e-7)


def test_threshold_nondecreasing_in_sigma_r():
    vals = [correlated_threshold(6, sr, 0.5, 0.01) for sr in (0.0, 0.5, 1.0, 2.0, 4.0)]
    assert np.all(np.diff(vals) >= 0)


def test_threshold_against_mc():
    rng = np.random.default_rng(2)
    l, sr, sm, alpha = 10, 1.0, 0.5, 0.05
    var = 2 * sr**2 + sm**2
    e_own = rng.normal(0, sr, (400_000, 1))
    g = e_own + rng.normal(0, sr, (400_000, l)) + rng.normal(0, sm, (400_000, l))
    T = np.sum(g * g, axis=1) / var
    q = correlated_threshold(l, sr, sm, alpha)
    assert np.mean(T > q) == pytest.approx(alpha, abs=3 * np.sqrt(alpha * (1 - alpha) / 4e5))


def test_threshold_table_cache_and_csv(tmp_path):
    table = ThresholdTable()
    a = correlated_threshold(3, 1.0, 0.5, 0.01, table)
    b = correlated_threshold(3, 1.0002, 0.5, 0.01, table)  # same quantised ratio
    assert a == b and len(table) == 1
    path = tmp_path / "t.csv"
    table.save(path)
    assert path.read_text().splitlines()[0] == "l_i,alpha,ratio,critical_value"
    loaded = ThresholdTable.load(path)
    assert loaded.items() == table.items()


def test_scipy_ncx2_consistency():
    # sanity check that the wrapped noncentral CDF is the standard one
    assert noncentral_chi2_cdf(3.0, Chi2Spec(1, 2.0)) == pytest.approx(sps.ncx2.cdf(3.0, 1, 2.0))
