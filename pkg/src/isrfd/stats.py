"""Chi-squared family distributions and Imhof's method for quadratic forms."""

from __future__ import annotations

import csv
import math
import threading
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize
from scipy import stats as sps

from isrfd.errors import NumericalError


@dataclass(frozen=True)
class Chi2Spec:
    dof: float
    noncentrality: float = 0.0

    def __post_init__(self):
        if not self.dof > 0:
            raise ValueError(f"dof must be positive, got {self.dof}")
        if not self.noncentrality >= 0:
            raise ValueError(f"noncentrality must be >= 0, got {self.noncentrality}")


@dataclass(frozen=True)
class QuadFormSpec:
    """Weights of ``sum_k lambda_k Z_k^2`` with i.i.d. standard normal ``Z_k``."""

    eigenvalues: tuple

    def __post_init__(self):
        ev = tuple(float(v) for v in np.ravel(self.eigenvalues))
        if not ev:
            raise ValueError("need at least one eigenvalue")
        if not all(math.isfinite(v) for v in ev):
            raise ValueError("eigenvalues must be finite")
        object.__setattr__(self, "eigenvalues", ev)


def _as_spec(spec):
    if isinstance(spec, Chi2Spec):
        return spec
    return Chi2Spec(float(spec))


def chi2_cdf(x, spec):
    """CDF of a (possibly noncentral) chi-squared law; ``spec`` may be a dof."""
    spec = _as_spec(spec)
    if spec.noncentrality > 0:
        return noncentral_chi2_cdf(x, spec)
    return sps.chi2.cdf(x, spec.dof)


def chi2_quantile(p, spec):
    """Inverse of :func:`chi2_cdf` for the central law."""
    spec = _as_spec(spec)
    p_arr = np.asarray(p, dtype=float)
    if np.any((p_arr <= 0) | (p_arr >= 1)):
        raise ValueError(f"probability must lie in (0, 1), got {p}")
    if spec.noncentrality > 0:
        return sps.ncx2.ppf(p, spec.dof, spec.noncentrality)
    return sps.chi2.ppf(p, spec.dof)


def critical_value(alpha, dof):
    """Upper-tail critical value: ``P[chi2(dof) > c] = alpha``."""
    return chi2_quantile(1.0 - alpha, Chi2Spec(dof))


def noncentral_chi2_cdf(x, spec):
    spec = _as_spec(spec)
    if spec.noncentrality == 0:
        return sps.chi2.cdf(x, spec.dof)
    val = sps.ncx2.cdf(x, spec.dof, spec.noncentrality)
    if not np.all(np.isfinite(val)):
        raise NumericalError("noncentral chi-squared CDF did not converge")
    return val


def solve_noncentrality(alpha, power_gamma, dof=1):
    """Noncentrality giving detection probability ``power_gamma`` at level ``alpha``.

    Solves ``P[chi2(dof, lam) <= c] = 1 - power_gamma`` where ``c`` is the
    upper ``alpha`` critical value. A test cannot have power below its own
    size, so ``power_gamma <= alpha`` returns 0.
    """
    if not 0 < alpha < 1 or not 0 < power_gamma < 1:
        raise ValueError("alpha and power_gamma must lie in (0, 1)")
    c = critical_value(alpha, dof)
    target = 1.0 - power_gamma
    if power_gamma <= alpha:
        return 0.0

    def miss(lam):
        return noncentral_chi2_cdf(c, Chi2Spec(dof, lam)) - target

    hi = max(1.0, c)
    while miss(hi) > 0:
        hi *= 2.0
        if hi > 1e8:
            raise NumericalError("could not bracket the noncentrality")
    return optimize.brentq(miss, 0.0, hi, xtol=1e-12, rtol=1e-13)


def imhof_cdf(q, spec):
    """``P[sum_k lambda_k Z_k^2 <= q]`` by Imhof's inversion formula.

    The integrand ``sin(theta(u)) / (u rho(u))`` is integrated on ``[0, T]``
    by adaptive quadrature and on ``[T, inf)`` as a Fourier integral, which
    copes with the slow ``u^{-1 - l/2}`` decay of low-rank forms.
    """
    if not isinstance(spec, QuadFormSpec):
        spec = QuadFormSpec(tuple(spec))
    lam = np.array(spec.eigenvalues)
    lam = lam[lam != 0.0]
    if lam.size == 0:
        return 1.0 if q >= 0 else 0.0
    if q <= 0 and np.all(lam > 0):
        return 0.0
    half_q = 0.5 * q
    # repeated weights are common (equicorrelated forms), so group them
    vals, mult = np.unique(lam, return_counts=True)
    groups = list(zip(vals.tolist(), mult.tolist()))

    def A(u):
        return 0.5 * sum(m * math.atan(v * u) for v, m in groups)

    def rho(u):
        return math.exp(0.25 * sum(m * math.log1p((v * u) ** 2) for v, m in groups))

    def integrand(u):
        if u == 0.0:
            # finite limit of sin(theta)/u
            return 0.5 * (float(np.sum(lam)) - q)
        return math.sin(A(u) - half_q * u) / (u * rho(u))

    T = 4.0 / np.min(np.abs(lam))
    head, err_h = integrate.quad(integrand, 0.0, T, limit=500, epsabs=1e-11, epsrel=1e-10)
    if half_q != 0.0:
        # sin(A - w u) = sin A cos(w u) - cos A sin(w u)
        t1, err1 = integrate.quad(lambda u: math.sin(A(u)) / (u * rho(u)), T, np.inf,
                                  weight="cos", wvar=half_q, limlst=200, epsabs=1e-11)
        t2, err2 = integrate.quad(lambda u: math.cos(A(u)) / (u * rho(u)), T, np.inf,
                                  weight="sin", wvar=half_q, limlst=200, epsabs=1e-11)
        tail = t1 - t2
        err_t = err1 + err2
    else:
        tail, err_t = integrate.quad(integrand, T, np.inf, limit=500, epsabs=1e-11)
    if not (math.isfinite(head) and math.isfinite(tail)) or err_h + err_t > 1e-6:
        raise NumericalError(f"Imhof integration failed at q={q}")
    p = 0.5 - (head + tail) / math.pi
    return min(1.0, max(0.0, p))


def imhof_quantile(p, spec):
    """Inverse of :func:`imhof_cdf` for positive weights."""
    if not isinstance(spec, QuadFormSpec):
        spec = QuadFormSpec(tuple(spec))
    lam = np.array(spec.eigenvalues)
    if np.any(lam <= 0):
        raise ValueError("quantile search needs positive weights")
    l = lam.size
    lo = float(np.min(lam) * sps.chi2.ppf(p, l))
    hi = float(np.max(lam) * sps.chi2.ppf(p, l))
    if hi - lo < 1e-14 * hi:
        return hi
    return optimize.brentq(lambda x: imhof_cdf(x, spec) - p, lo * (1 - 1e-9), hi * (1 + 1e-9),
                           xtol=1e-10, rtol=1e-12)


def correlation_bound(sigma_r, sigma_m):
    """Conservative correlation between two residuals sharing a satellite."""
    return sigma_r**2 / (2.0 * sigma_r**2 + sigma_m**2)


def correlated_eigenvalues(l_i, rho):
    """Eigenvalues of the equicorrelated ``l_i x l_i`` matrix with off-diagonal ``rho``."""
    return (1.0 + (l_i - 1) * rho,) + (1.0 - rho,) * (l_i - 1)


class ThresholdTable:
    """Cache of ephemeris-comparison critical values.

    Keys are ``(l_i, alpha, sigma_r/sigma_m)`` with the ratio quantised to
    1e-3; values are always computed from the quantised ratio so the cache
    contents do not depend on lookup order.
    """

    def __init__(self):
        self._values = {}
        self._lock = threading.Lock()

    @staticmethod
    def key(l_i, alpha, ratio):
        return int(l_i), float(alpha), round(float(ratio), 3)

    def get(self, l_i, alpha, ratio):
        key = self.key(l_i, alpha, ratio)
        val = self._values.get(key)
        if val is None:
            r = key[2]
            rho = r * r / (2.0 * r * r + 1.0)
            val = imhof_quantile(1.0 - key[1], QuadFormSpec(correlated_eigenvalues(key[0], rho)))
            with self._lock:
                self._values.setdefault(key, val)
        return val

    def __len__(self):
        return len(self._values)

    def items(self):
        return sorted(self._values.items())

    def save(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["l_i", "alpha", "ratio", "critical_value"])
            for (l_i, alpha, ratio), val in self.items():
                w.writerow([l_i, repr(alpha), repr(ratio), repr(val)])

    @classmethod
    def load(cls, path):
        table = cls()
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                key = cls.key(row["l_i"], row["alpha"], row["ratio"])
                table._values[key] = float(row["critical_value"])
        return table


_DEFAULT_TABLE = ThresholdTable()


def correlated_threshold(l_i, sigma_r, sigma_m, alpha, table=None):
    """Critical value of the ephemeris-comparison statistic for ``l_i`` links."""
    if l_i < 1:
        raise ValueError("l_i must be at least 1")
    if not sigma_m > 0:
        raise ValueError("sigma_m must be positive")
    table = _DEFAULT_TABLE if table is None else table
    return table.get(l_i, alpha, sigma_r / sigma_m)
