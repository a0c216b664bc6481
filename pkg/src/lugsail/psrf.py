"""Potential scale reduction factors.

Four statistics share one shape, ``sqrt((n-1)/n + ratio/n)``:

==========================  ===============================  =====================
statistic                   ratio                            correction estimate
==========================  ===============================  =====================
classic, univariate         ``B / s^2``                      between-chain ``B``
lugsail, univariate         ``T_L / s^2``                    replicated lugsail
classic, multivariate       ``lambda_max(S^{-1} B)``         between-chain ``B``
lugsail, multivariate       ``det(S^{-1} T_L)^{1/p}``        replicated lugsail
==========================  ===============================  =====================

The df-corrected variant of the univariate statistic and the ``(m+1)/m``
weighted multivariate one are deliberately not provided.
"""

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .chains import summarize
from .linalg import NotPositiveDefiniteError, log_det, max_gen_eig
from .mcvar import BatchConfig, between_chain, replicated_lugsail


class DegenerateChainError(ValueError):
    """Within-chain variance is zero, so the PSRF ratio is undefined."""


@dataclass(frozen=True)
class PsrfReport:
    kind: str  # classic | lugsail
    scope: str  # univariate | multivariate_det | multivariate_maxeig
    value: float
    n: int
    m: int
    within: np.ndarray  # s^2 or S
    correction: np.ndarray  # B or T_L
    sigma: np.ndarray  # sigma-hat or Sigma-hat_L
    ratio: float = math.nan  # the term divided by n under the square root
    component: int | None = None
    batch: dict | None = None
    psd_repaired: bool = False
    univariate: tuple = field(default_factory=tuple)

    def as_dict(self):
        out = {
            "kind": self.kind,
            "scope": self.scope,
            "value": self.value,
            "ratio": self.ratio,
            "n": self.n,
            "m": self.m,
            "within": self.within.tolist(),
            "correction": self.correction.tolist(),
            "sigma": self.sigma.tolist(),
            "psd_repaired": self.psd_repaired,
        }
        if self.component is not None:
            out["component"] = self.component
        if self.batch is not None:
            out["batch"] = self.batch
        return out


def _psrf_value(n, ratio):
    return math.sqrt(max((n - 1) / n + ratio / n, 0.0))


def _det_ratio(S, T):
    # p = 1 keeps to plain division so the scalar and matrix paths agree exactly
    p = S.shape[0]
    if p == 1:
        return float(T[0, 0]) / float(S[0, 0])
    return math.exp((log_det(T) - log_det(S)) / p)


def _pooled_var(summary):
    s2 = summary.pooled_cov
    if not s2[0, 0] > 0.0:
        raise DegenerateChainError("within-chain sample variance is zero")
    return s2


def _batch_meta(lug):
    meta = lug.batch.as_dict()
    meta["b3"] = lug.parts["b3"]
    meta["a3"] = lug.parts["a3"]
    meta["unused_tail"] = lug.n - lug.batch.a * lug.batch.b
    return meta


def _require_univariate(cs, who):
    if cs.p != 1:
        raise ValueError(f"{who} needs p = 1; use .component(k) or the multivariate form")


def psrf_classic(cs):
    """``sqrt(sigma_hat^2 / s^2)`` with the between-chain correction."""
    _require_univariate(cs, "psrf_classic")
    if cs.m < 2:
        raise ValueError("classic PSRF requires ≥2 chains")
    summ = summarize(cs)
    s2 = _pooled_var(summ)
    B = between_chain(cs).value
    n = cs.n
    ratio = float(B[0, 0]) / float(s2[0, 0])
    return PsrfReport(
        "classic", "univariate", _psrf_value(n, ratio), n, cs.m, s2, B,
        (n - 1) / n * s2 + B / n, ratio=ratio,
    )


def psrf_lugsail(cs, bc=BatchConfig()):
    """``sqrt(sigma_hat_L^2 / s^2)``; defined for a single chain as well."""
    _require_univariate(cs, "psrf_lugsail")
    return _lugsail(cs, bc, "univariate")


def _lugsail(cs, bc, scope):
    summ = summarize(cs)
    S = summ.pooled_cov
    if cs.p == 1:
        _pooled_var(summ)
    lug = replicated_lugsail(cs, bc, repair=True)
    T = lug.value
    try:
        ratio = _det_ratio(S, T)
    except NotPositiveDefiniteError as exc:
        raise DegenerateChainError(f"pooled covariance S is singular: {exc}") from None
    n = cs.n
    return PsrfReport(
        "lugsail", scope, _psrf_value(n, ratio), n, cs.m, S, T, (n - 1) / n * S + T / n,
        ratio=ratio, batch=_batch_meta(lug), psd_repaired=lug.psd_repaired,
    )


def psrf_multivariate_classic(cs, components=True):
    """``sqrt((n-1)/n + lambda_max(S^{-1} B)/n)``.

    ``components=False`` skips the per-component univariate reports.
    """
    if cs.m < 2:
        raise ValueError("classic PSRF requires ≥2 chains")
    if cs.m <= cs.p:
        warnings.warn(
            f"between-chain matrix has rank at most m-1 = {cs.m - 1} < p = {cs.p}",
            RuntimeWarning,
            stacklevel=2,
        )
    summ = summarize(cs)
    S = summ.pooled_cov
    if cs.p == 1:
        _pooled_var(summ)
    B = between_chain(cs).value
    try:
        lam = max_gen_eig(S, B)
    except NotPositiveDefiniteError as exc:
        raise DegenerateChainError(f"pooled covariance S is singular: {exc}") from None
    n = cs.n
    return PsrfReport(
        "classic", "multivariate_maxeig", _psrf_value(n, lam), n, cs.m, S, B,
        (n - 1) / n * S + B / n, ratio=lam,
        univariate=_univariate_all(cs, "classic", None) if components else (),
    )


def psrf_multivariate_lugsail(cs, bc=BatchConfig(), components=True):
    """``sqrt((n-1)/n + det(S^{-1} T_L)^{1/p}/n)``; equals psrf_lugsail at p = 1."""
    rep = _lugsail(cs, bc, "multivariate_det" if cs.p > 1 else "univariate")
    if cs.p == 1 or not components:
        return rep
    return replace(rep, univariate=_univariate_all(cs, "lugsail", bc))


def _univariate_all(cs, kind, bc):
    if cs.p == 1:
        return ()
    out = []
    for k in range(cs.p):
        ck = cs.component(k)
        try:
            rep = psrf_classic(ck) if kind == "classic" else psrf_lugsail(ck, bc)
        except DegenerateChainError:
            out.append(None)
            continue
        out.append(replace(rep, component=k))
    return tuple(out)


def univariate_psrfs(cs, kind="lugsail", bc=BatchConfig()):
    """One univariate report per component."""
    if cs.p == 1:
        return (psrf_classic(cs) if kind == "classic" else psrf_lugsail(cs, bc),)
    return _univariate_all(cs, kind, bc)


def compute_psrf(cs, statistic="lugsail", bc=BatchConfig(), mv=None, components=True):
    """Dispatch on statistic name.

    ``statistic`` is ``lugsail`` or ``classic``, or one of the explicit names
    ``lugsail_uni``, ``lugsail_multi_det``, ``multi_maxeig``.  For ``p > 1``
    ``mv`` chooses between ``det`` and ``maxeig``; the default is ``det`` for
    lugsail and ``maxeig`` for classic, the only classic form offered.
    """
    if statistic in ("lugsail", "lugsail_uni", "lugsail_multi_det"):
        if cs.p == 1 or mv in (None, "det"):
            return psrf_multivariate_lugsail(cs, bc, components)
        if mv == "maxeig":
            return _lugsail_maxeig(cs, bc, components)
    elif statistic in ("classic", "multi_maxeig"):
        if cs.p == 1:
            return psrf_classic(cs)
        if mv in (None, "maxeig"):
            return psrf_multivariate_classic(cs, components)
        if mv == "det":
            raise ValueError("the determinant form is only defined for the lugsail statistic")
    else:
        raise ValueError(f"unknown statistic {statistic!r}")
    raise ValueError(f"unknown multivariate form {mv!r}")


def _lugsail_maxeig(cs, bc, components=True):
    rep = _lugsail(cs, bc, "multivariate_maxeig")
    lam = max_gen_eig(rep.within, rep.correction)
    uni = _univariate_all(cs, "lugsail", bc) if components else ()
    return replace(rep, value=_psrf_value(cs.n, lam), ratio=lam, univariate=uni)


def implied_ess(rep):
    """``m n / ratio``: the ESS that the reported PSRF corresponds to.

    For the determinant lugsail statistic this is exactly the ESS estimate.
    """
    if not rep.ratio > 0:
        return math.inf
    return rep.m * rep.n / rep.ratio


__all__ = [
    "PsrfReport",
    "DegenerateChainError",
    "psrf_classic",
    "psrf_lugsail",
    "psrf_multivariate_classic",
    "psrf_multivariate_lugsail",
    "univariate_psrfs",
    "compute_psrf",
    "implied_ess",
]
