"""Effective sample size, the minimum-ESS bound and the PSRF cutoff it implies."""

import math
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

from .chains import summarize
from .linalg import log_det
from .mcvar import BatchConfig, replicated_lugsail

_EPS = 1e-15
_FPMIN = 1e-300


def _gamma_series(a, x):
    # P(a, x) by its power series; converges quickly for x < a + 1
    ap = a
    term = total = 1.0 / a
    for _ in range(10000):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_cfrac(a, x):
    # Q(a, x) by Lentz's continued fraction; for x >= a + 1
    b = x + 1.0 - a
    c = 1.0 / _FPMIN
    d = 1.0 / b
    h = d
    for i in range(1, 10000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = b + an / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def gammainc_lower(a, x):
    """Regularized lower incomplete gamma ``P(a, x)``."""
    if a <= 0:
        raise ValueError("shape must be positive")
    if x <= 0:
        return 0.0
    if x < a + 1.0:
        return _gamma_series(a, x)
    return 1.0 - _gamma_cfrac(a, x)


def chi2_cdf(x, df):
    return gammainc_lower(0.5 * df, 0.5 * x)


def _chi2_logpdf(x, df):
    k = 0.5 * df
    return (k - 1.0) * math.log(x) - 0.5 * x - k * math.log(2.0) - math.lgamma(k)


def _wilson_hilferty(prob, df):
    # starting point for Newton only
    z = NormalDist().inv_cdf(prob)
    c = 2.0 / (9.0 * df)
    return df * max(1.0 - c + z * math.sqrt(c), 1e-3) ** 3


def chi2_quantile(prob, df, max_iter=200):
    """Inverse chi-square CDF by safeguarded Newton on ``P(df/2, x/2)``."""
    if not 0.0 < prob < 1.0:
        raise ValueError(f"probability must lie in (0, 1), got {prob}")
    if df <= 0:
        raise ValueError(f"degrees of freedom must be positive, got {df}")
    lo, hi = 0.0, math.inf
    x = _wilson_hilferty(prob, df)
    for _ in range(max_iter):
        f = chi2_cdf(x, df) - prob
        if f > 0:
            hi = x
        else:
            lo = x
        dens = math.exp(_chi2_logpdf(x, df))
        new = x - f / dens if dens > 0 else math.nan
        if not lo < new < hi:
            new = 0.5 * (lo + hi) if math.isfinite(hi) else 2.0 * x + 1.0
        if abs(new - x) <= 1e-14 * max(1.0, x):
            return new
        x = new
    raise RuntimeError(f"chi2_quantile did not converge for prob={prob}, df={df}")


def min_ess(alpha, epsilon, p):
    """Minimum ESS for a ``100(1-alpha)%`` region of relative volume ``epsilon``."""
    _check_range(alpha, epsilon, p)
    return _min_ess_constant(alpha, p) / epsilon**2


def _min_ess_constant(alpha, p):
    log_c = (2.0 / p) * math.log(2.0) + math.log(math.pi) - (2.0 / p) * (
        math.log(p) + math.lgamma(p / 2.0)
    )
    return math.exp(log_c) * chi2_quantile(1.0 - alpha, p)


def _check_range(alpha, epsilon, p):
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    if int(p) != p or p < 1:
        raise ValueError(f"p must be a positive integer, got {p}")


@dataclass(frozen=True)
class EssThreshold:
    alpha: float
    epsilon: float
    p: int
    m: int
    M: float
    M_int: int
    delta: float

    def as_dict(self):
        return {
            "alpha": self.alpha,
            "epsilon": self.epsilon,
            "p": self.p,
            "m": self.m,
            "M": self.M,
            "M_int": self.M_int,
            "delta": self.delta,
        }


def delta_threshold(alpha, epsilon, p, m):
    """PSRF cutoff ``sqrt(1 + m / M)`` equivalent to requiring ``ESS >= M``."""
    if int(m) != m or m < 1:
        raise ValueError(f"m must be a positive integer, got {m}")
    M = min_ess(alpha, epsilon, p)
    return EssThreshold(alpha, epsilon, int(p), int(m), M, math.ceil(M), math.sqrt(1.0 + m / M))


def ess_from_matrices(S, T, m, n):
    """``m n (det S / det T)^{1/p}`` from already computed matrices."""
    S = np.atleast_2d(S)
    T = np.atleast_2d(T)
    p = S.shape[0]
    if p == 1:
        return m * n * (float(S[0, 0]) / float(T[0, 0]))
    return m * n * math.exp((log_det(S) - log_det(T)) / p)


def ess_estimate(cs, bc=BatchConfig()):
    """ESS of the chain mean, using pooled ``S`` and the repaired lugsail ``T_L``."""
    S = summarize(cs).pooled_cov
    if S.shape == (1, 1) and not S[0, 0] > 0:
        raise ValueError("sample variance is zero; ESS undefined")
    T = replicated_lugsail(cs, bc, repair=True).value
    return ess_from_matrices(S, T, cs.m, cs.n)
