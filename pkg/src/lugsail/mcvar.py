"""Monte Carlo variance estimators.

Between-chain variance ``B``, replicated batch means, the replicated lugsail
combination ``2 T_b - T_{b/3}``, and the target-variance estimators built on
them.  All estimates are returned as ``p x p`` matrices; ``p = 1`` is the
``(1, 1)`` case of the same code.

When ``b`` does not divide ``n`` the batch means use the first ``a * b``
iterations of each chain, while the grand mean (and ``S``) use all ``n``.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .linalg import psd_repair

POLICIES = ("sqrt", "cuberoot", "explicit")


class EstimatorError(ValueError):
    pass


@dataclass(frozen=True)
class BatchConfig:
    """Batch-size policy; ``resolve(n)`` gives the concrete ``(b, a)``."""

    policy: str = "sqrt"
    size: int | None = None

    def __post_init__(self):
        if self.policy not in POLICIES:
            raise ValueError(f"unknown batch policy {self.policy!r}")
        if self.policy == "explicit" and (self.size is None or self.size < 1):
            raise ValueError("explicit batch policy needs size >= 1")

    @classmethod
    def parse(cls, text):
        """``sqrt``, ``cube``/``cuberoot`` or an integer batch size."""
        text = str(text).strip().lower()
        if text == "sqrt":
            return cls("sqrt")
        if text in ("cube", "cuberoot"):
            return cls("cuberoot")
        try:
            return cls("explicit", int(text))
        except ValueError:
            raise ValueError(f"batch must be sqrt, cube or an integer, got {text!r}") from None

    def batch_size(self, n):
        if self.policy == "sqrt":
            b = math.isqrt(n)
        elif self.policy == "cuberoot":
            b = int(round(n ** (1.0 / 3.0)))
            # guard float rounding around perfect cubes
            while b**3 > n:
                b -= 1
            while (b + 1) ** 3 <= n:
                b += 1
        else:
            b = self.size
        return max(b, 1)

    def resolve(self, n):
        b = self.batch_size(n)
        if b > n:
            raise EstimatorError(f"batch size {b} exceeds chain length {n}")
        return ResolvedBatch(self.policy, b, n // b)


@dataclass(frozen=True)
class ResolvedBatch:
    policy: str
    b: int
    a: int

    def as_dict(self):
        return {"policy": self.policy, "b": self.b, "a": self.a}


@dataclass(frozen=True)
class VarianceEstimate:
    kind: str  # between_B | rbm | lugsail
    value: np.ndarray
    m: int
    n: int
    batch: ResolvedBatch | None = None
    psd_repaired: bool = False
    parts: dict = field(default_factory=dict)

    @property
    def scalar(self):
        if self.value.shape != (1, 1):
            raise ValueError("scalar view requires p = 1")
        return float(self.value[0, 0])


def between_chain(cs):
    """``B`` with ``B / n`` the sample covariance of the chain means."""
    if cs.m < 2:
        raise EstimatorError("between-chain variance requires at least 2 chains")
    means = cs.samples.mean(axis=1)
    dev = means - means.mean(axis=0)
    B = cs.n * (dev.T @ dev) / (cs.m - 1)
    return VarianceEstimate("between_B", 0.5 * (B + B.T), cs.m, cs.n)


def _rbm(x, b, grand_mean):
    m, n, p = x.shape
    a = n // b
    if a * m < 2:
        raise EstimatorError(f"need a*m >= 2 batches, have a={a}, m={m}")
    ybar = x[:, : a * b, :].reshape(m, a, b, p).mean(axis=2)
    dev = (ybar - grand_mean).reshape(m * a, p)
    T = b * (dev.T @ dev) / (a * m - 1)
    return 0.5 * (T + T.T), a


def replicated_batch_means(cs, bc=BatchConfig(), grand_mean=None):
    """Replicated batch means estimate ``T_b`` of ``n Var(chain mean)``."""
    rb = bc.resolve(cs.n)
    mu = cs.samples.mean(axis=1).mean(axis=0) if grand_mean is None else grand_mean
    T, a = _rbm(cs.samples, rb.b, mu)
    return VarianceEstimate("rbm", T, cs.m, cs.n, batch=rb)


def lugsail_batch_size(b):
    return max(1, b // 3)


def replicated_lugsail(cs, bc=BatchConfig(), repair=False):
    """Replicated lugsail estimate ``2 T_b - T_{max(1, b//3)}``.

    With ``repair=True`` eigenvalues below ``1e-12 * |trace|`` are clamped to
    that floor and ``psd_repaired`` records whether that happened.
    """
    rb = bc.resolve(cs.n)
    mu = cs.samples.mean(axis=1).mean(axis=0)
    Tb, _ = _rbm(cs.samples, rb.b, mu)
    b3 = lugsail_batch_size(rb.b)
    Tb3, a3 = _rbm(cs.samples, b3, mu)
    TL = 2.0 * Tb - Tb3
    repaired = False
    if repair:
        TL, repaired = psd_repair(TL)
    return VarianceEstimate(
        "lugsail",
        TL,
        cs.m,
        cs.n,
        batch=rb,
        psd_repaired=repaired,
        parts={"T_b": Tb, "T_b3": Tb3, "b3": b3, "a3": a3},
    )


def _check_dims(S, V):
    if S.shape != V.shape:
        raise EstimatorError(f"dimension mismatch: S is {S.shape}, estimate is {V.shape}")


def sigma_hat(cs, summary, between):
    """``(n-1)/n S + B/n``."""
    if between.kind != "between_B":
        raise EstimatorError(f"sigma_hat needs a between_B estimate, got {between.kind}")
    S = summary.pooled_cov
    _check_dims(S, between.value)
    n = cs.n
    return (n - 1) / n * S + between.value / n


def sigma_hat_L(cs, summary, lug):
    """``(n-1)/n S + T_L/n``."""
    if lug.kind != "lugsail":
        raise EstimatorError(f"sigma_hat_L needs a lugsail estimate, got {lug.kind}")
    S = summary.pooled_cov
    _check_dims(S, lug.value)
    n = cs.n
    return (n - 1) / n * S + lug.value / n


def relative_efficiency(m, a):
    """Large-sample efficiency of ``B`` relative to the lugsail estimator."""
    if m < 2:
        raise EstimatorError("relative efficiency needs m >= 2")
    if a < 1:
        raise EstimatorError("batch count must be positive")
    return m * a / (3 * (m - 1))


__all__ = [
    "BatchConfig",
    "ResolvedBatch",
    "VarianceEstimate",
    "EstimatorError",
    "between_chain",
    "replicated_batch_means",
    "replicated_lugsail",
    "lugsail_batch_size",
    "sigma_hat",
    "sigma_hat_L",
    "relative_efficiency",
]
