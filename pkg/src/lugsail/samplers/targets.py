"""Target distributions for the built-in experiments.

Every ``log_density`` takes an array whose last axis is the state dimension
``p`` and returns one value per leading index, normalized where a closed form
exists.
"""

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class AR1:
    rho: float
    nu: float = 1.0

    def __post_init__(self):
        if not abs(self.rho) < 1:
            raise ValueError(f"AR(1) needs |rho| < 1, got {self.rho}")
        if not self.nu > 0:
            raise ValueError(f"innovation sd must be positive, got {self.nu}")

    @property
    def p(self):
        return 1

    @property
    def stationary_var(self):
        return self.nu**2 / (1.0 - self.rho**2)

    def default_start(self, gen):
        return gen.normal(0.0, math.sqrt(self.stationary_var), size=1)


@dataclass(frozen=True)
class StudentT:
    df: float = 5.0
    start_df: float = 2.0

    def __post_init__(self):
        if not self.df > 0:
            raise ValueError(f"degrees of freedom must be positive, got {self.df}")

    @property
    def p(self):
        return 1

    @property
    def log_norm(self):
        v = self.df
        return math.lgamma((v + 1) / 2) - math.lgamma(v / 2) - 0.5 * math.log(v * math.pi)

    def log_density(self, x):
        x = np.asarray(x, dtype=float)[..., 0]
        return self.log_norm - 0.5 * (self.df + 1) * np.log1p(x * x / self.df)

    def default_start(self, gen):
        return np.array([gen.standard_t(self.start_df)])

    @property
    def mean(self):
        return 0.0

    @property
    def variance(self):
        return self.df / (self.df - 2) if self.df > 2 else math.inf


@dataclass(frozen=True)
class Bimodal:
    """Two-component normal mixture; ``var1``/``var2`` are variances."""

    w: float = 0.5
    mean1: float = 0.0
    var1: float = 2.0
    mean2: float = 10.0
    var2: float = 0.5
    start_mean: float = 5.0
    start_sd: float = 10.0

    def __post_init__(self):
        if not 0 < self.w < 1:
            raise ValueError(f"mixture weight must lie in (0, 1), got {self.w}")
        if not (self.var1 > 0 and self.var2 > 0):
            raise ValueError("component variances must be positive")

    @property
    def p(self):
        return 1

    def log_density(self, x):
        x = np.asarray(x, dtype=float)[..., 0]
        l1 = math.log(self.w) - 0.5 * math.log(2 * math.pi * self.var1) - (x - self.mean1) ** 2 / (2 * self.var1)
        l2 = math.log(1 - self.w) - 0.5 * math.log(2 * math.pi * self.var2) - (x - self.mean2) ** 2 / (2 * self.var2)
        return np.logaddexp(l1, l2)

    def default_start(self, gen):
        return gen.normal(self.start_mean, self.start_sd, size=1)

    @property
    def mean(self):
        return self.w * self.mean1 + (1 - self.w) * self.mean2

    @property
    def variance(self):
        second = self.w * (self.var1 + self.mean1**2) + (1 - self.w) * (self.var2 + self.mean2**2)
        return second - self.mean**2


@dataclass(frozen=True)
class Logistic:
    """Bayesian logistic regression with an isotropic normal prior on beta."""

    X: np.ndarray
    y: np.ndarray
    prior_var: float = 100.0
    names: tuple = field(default=(), compare=False)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if X.ndim != 2 or y.shape != (X.shape[0],):
            raise ValueError("X must be (N, p) and y must be (N,)")
        if not self.prior_var > 0:
            raise ValueError("prior variance must be positive")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def p(self):
        return self.X.shape[1]

    def log_density(self, beta):
        beta = np.asarray(beta, dtype=float)
        eta = beta @ self.X.T  # (..., N)
        loglik = np.sum(self.y * eta - np.logaddexp(0.0, eta), axis=-1)
        return loglik - np.sum(beta * beta, axis=-1) / (2.0 * self.prior_var)

    def gradient_hessian(self, beta, prior=True):
        beta = np.asarray(beta, dtype=float)
        eta = self.X @ beta
        prob = 0.5 * (1.0 + np.tanh(0.5 * eta))
        grad = self.X.T @ (self.y - prob)
        hess = -(self.X.T * (prob * (1.0 - prob))) @ self.X
        if prior:
            grad = grad - beta / self.prior_var
            hess = hess - np.eye(self.p) / self.prior_var
        return grad, hess

    def mode(self, prior=False, tol=1e-10, max_iter=100):
        """Newton-Raphson maximizer of the log-likelihood (or posterior).

        Returns ``(beta_hat, cov)`` with ``cov`` the inverse of the negative
        Hessian at the optimum.
        """
        beta = np.zeros(self.p)
        for _ in range(max_iter):
            grad, hess = self.gradient_hessian(beta, prior=prior)
            step = np.linalg.solve(-hess, grad)
            beta = beta + step
            if np.max(np.abs(step)) < tol * (1.0 + np.max(np.abs(beta))):
                break
        else:
            raise RuntimeError("Newton-Raphson did not converge")
        _, hess = self.gradient_hessian(beta, prior=prior)
        return beta, np.linalg.inv(-hess)


def normal_log_density(x, mean=0.0, var=1.0):
    x = np.asarray(x, dtype=float)
    return -0.5 * math.log(2 * math.pi * var) - (x - mean) ** 2 / (2 * var)
