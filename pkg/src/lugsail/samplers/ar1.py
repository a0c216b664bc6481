"""Closed-form quantities for the Gaussian AR(1) chain."""

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class AR1Truth:
    sigma2: float  # stationary variance
    tau2_n: float  # n Var(mean of n draws)
    tau2_inf: float
    psrf_n: float  # PSRF computed from the true variances

    def as_dict(self):
        return {"sigma2": self.sigma2, "tau2_n": self.tau2_n, "tau2_inf": self.tau2_inf, "psrf_n": self.psrf_n}


def ar1_truth(rho, nu, n):
    if not abs(rho) < 1:
        raise ValueError(f"|rho| must be < 1, got {rho}")
    if n < 1:
        raise ValueError("n must be positive")
    sigma2 = nu**2 / (1.0 - rho**2)
    # terms with |rho|^k below 1e-300 are exactly zero in double precision
    kmax = n - 1
    if rho != 0:
        kmax = min(kmax, int(math.log(1e-300) / math.log(abs(rho))) + 1)
    else:
        kmax = 0
    k = np.arange(1, kmax + 1)
    tau2_n = sigma2 + 2.0 * sigma2 * float(np.sum((n - k) / n * rho**k))
    tau2_inf = sigma2 * (1.0 + rho) / (1.0 - rho)
    psrf = math.sqrt((n - 1) / n + tau2_n / (n * sigma2))
    return AR1Truth(sigma2, tau2_n, tau2_inf, psrf)


def ar1_crossing_n(rho, nu, delta, n_max=10**12):
    """Smallest ``n`` from which the true PSRF stays at or below ``delta``.

    The true PSRF equals 1 at ``n = 1``, rises over the first few multiples
    of the correlation time and then decreases to 1.  Doubling from ``n = 2``
    brackets the downward crossing, which bisection then pins.
    """
    psrf = lambda n: ar1_truth(rho, nu, n).psrf_n  # noqa: E731
    lo = 2
    if psrf(lo) <= delta:
        return lo
    hi = 4
    while psrf(hi) > delta:
        lo, hi = hi, 2 * hi
        if hi > n_max:
            raise ValueError(f"true PSRF stays above {delta} up to n = {n_max}")
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if psrf(mid) <= delta:
            hi = mid
        else:
            lo = mid
    return hi
