"""Chain generators that can be extended in place.

A generator owns ``m`` chains and their random streams.  ``extend(k)``
appends ``k`` iterations to every chain; generating ``n`` iterations in one
call or in several smaller calls gives bit-identical chains.
"""

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.signal import lfilter

from ..chains import ChainSet
from .rng import ACCEPT, PROPOSAL, START, as_key, stream
from .targets import AR1


class SamplerError(ValueError):
    pass


@dataclass(frozen=True)
class SamplerSpec:
    """Declarative description of ``m`` chains on a built-in target.

    ``proposal_var`` is a variance (or ``p x p`` covariance) for random-walk
    Metropolis targets and is ignored for AR(1).  ``starts`` is an optional
    ``(m, p)`` array; without it each target draws its own starting values.
    ``seed`` is an int or a tuple of ints.
    """

    target: object
    m: int = 1
    seed: object = 0
    proposal_var: object = None
    starts: object = None

    def __post_init__(self):
        if self.m < 1:
            raise SamplerError("need at least one chain")
        as_key(self.seed)
        if not isinstance(self.target, AR1):
            pv = np.asarray(self.proposal_var, dtype=float) if self.proposal_var is not None else None
            if pv is None:
                raise SamplerError("random-walk targets need proposal_var")
            if pv.ndim == 0 and not pv > 0:
                raise SamplerError(f"proposal variance must be positive, got {float(pv)}")
        if self.starts is not None:
            s = np.asarray(self.starts, dtype=float)
            if s.size != self.m * self.target.p:
                raise SamplerError(f"starts must have shape ({self.m}, {self.target.p})")

    def with_seed(self, seed):
        return replace(self, seed=seed)


class _Grower:
    def __init__(self, spec):
        self.spec = spec
        self.m = spec.m
        self.p = spec.target.p
        self._buf = np.empty((self.m, 0, self.p))
        self.n = 0
        key = as_key(spec.seed)
        self._start_gens = [stream(key, i, START) for i in range(self.m)]

    def _starts(self):
        if self.spec.starts is not None:
            return np.asarray(self.spec.starts, dtype=float).reshape(self.m, self.p).copy()
        return np.stack([self.spec.target.default_start(g) for g in self._start_gens]).reshape(
            self.m, self.p
        )

    def _reserve(self, total):
        cap = self._buf.shape[1]
        if total <= cap:
            return
        new = np.empty((self.m, max(total, 2 * cap), self.p))
        new[:, : self.n] = self._buf[:, : self.n]
        self._buf = new

    def extend(self, k):
        if k < 0:
            raise SamplerError("cannot extend by a negative count")
        if k == 0:
            return self._buf[:, self.n:self.n]
        self._reserve(self.n + k)
        block = self._buf[:, self.n:self.n + k]
        self._fill(block)
        self.n += k
        return block

    def grow_to(self, n):
        if n > self.n:
            self.extend(n - self.n)

    @property
    def samples(self):
        return self._buf[:, : self.n]

    def chains(self, burnin=0):
        return ChainSet(self._buf[:, burnin:self.n])


class AR1Grower(_Grower):
    """``Y_t = rho Y_{t-1} + e_t`` with ``e_t ~ N(0, nu^2)``."""

    def __init__(self, spec):
        super().__init__(spec)
        key = as_key(spec.seed)
        self._gens = [stream(key, i, PROPOSAL) for i in range(self.m)]
        self._last = None

    def _fill(self, block):
        tgt = self.spec.target
        k = block.shape[1]
        eps = np.stack([g.normal(0.0, tgt.nu, size=k) for g in self._gens])
        start = 0
        if self._last is None:
            y0 = self._starts()[:, 0]
            block[:, 0, 0] = y0
            self._last = y0
            start = 1
        if start < k:
            zi = (tgt.rho * self._last)[:, None]
            y, _ = lfilter([1.0], [1.0, -tgt.rho], eps[:, start:], axis=1, zi=zi)
            block[:, start:, 0] = y
            self._last = y[:, -1].copy()


class RWMHGrower(_Grower):
    """Random-walk Metropolis with a Gaussian proposal of fixed covariance."""

    def __init__(self, spec):
        super().__init__(spec)
        key = as_key(spec.seed)
        self._prop = [stream(key, i, PROPOSAL) for i in range(self.m)]
        self._acc = [stream(key, i, ACCEPT) for i in range(self.m)]
        pv = np.asarray(spec.proposal_var, dtype=float)
        if pv.ndim == 0:
            self._chol = np.eye(self.p) * math.sqrt(float(pv))
        else:
            self._chol = np.linalg.cholesky(pv.reshape(self.p, self.p))
        self._x = None
        self._lp = None
        self.accepted = np.zeros(self.m, dtype=np.int64)
        self.proposed = 0

    def _fill(self, block):
        tgt = self.spec.target
        k = block.shape[1]
        start = 0
        if self._x is None:
            x = self._starts()
            lp = tgt.log_density(x)
            if not np.all(np.isfinite(lp)):
                bad = int(np.flatnonzero(~np.isfinite(lp))[0])
                raise SamplerError(f"start of chain {bad} has zero target density")
            block[:, 0] = x
            self._x, self._lp = x, lp
            start = 1
        steps = k - start
        if steps == 0:
            return
        z = np.stack([g.standard_normal((steps, self.p)) for g in self._prop])
        # fixed (m, p) @ (p, p) shapes keep results independent of chunking
        scalar = self.p == 1
        if scalar:
            z = z * self._chol[0, 0]
        logu = np.log(np.stack([g.random(steps) for g in self._acc]))
        x, lp = self._x, self._lp
        acc = self.accepted
        for s in range(steps):
            y = x + (z[:, s] if scalar else z[:, s] @ self._chol.T)
            lpy = tgt.log_density(y)
            take = logu[:, s] < lpy - lp
            x = np.where(take[:, None], y, x)
            lp = np.where(take, lpy, lp)
            acc += take
            block[:, start + s] = x
        self._x, self._lp = x, lp
        self.proposed += steps

    @property
    def acceptance_rate(self):
        if self.proposed == 0:
            return np.full(self.m, math.nan)
        return self.accepted / self.proposed


def open_sampler(spec):
    if isinstance(spec.target, AR1):
        return AR1Grower(spec)
    return RWMHGrower(spec)


def ar1_generate(spec, n):
    if not isinstance(spec.target, AR1):
        raise SamplerError("ar1_generate needs an AR1 target")
    g = AR1Grower(spec)
    g.extend(n)
    return g.chains()


def rwmh_generate(spec, n):
    """Run ``n`` iterations (the start counts as the first); returns chains and acceptance rates."""
    if isinstance(spec.target, AR1):
        raise SamplerError("rwmh_generate needs a Metropolis target, not AR1")
    g = RWMHGrower(spec)
    g.extend(n)
    return g.chains(), g.acceptance_rate
