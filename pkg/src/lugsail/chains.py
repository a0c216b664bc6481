"""Multi-chain MCMC output: storage, CSV ingestion and per-chain summaries.

Sample covariances use the ``n - 1`` divisor.  Some MCMC packages divide by
``n`` instead; the two differ by the ``(n - 1) / n`` factor that the PSRF
formulas carry explicitly.
"""

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class ChainError(ValueError):
    pass


class ChainParseError(ChainError):
    def __init__(self, path, row, column, message):
        self.path = str(path)
        self.row = row
        self.column = column
        where = f"{self.path}: row {row}"
        if column is not None:
            where += f", column {column}"
        super().__init__(f"{where}: {message}")


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


class ChainSet:
    """``m`` parallel chains of equal length ``n`` in ``p`` dimensions.

    ``samples[i, t, k]`` is component ``k`` of iteration ``t`` of chain ``i``.
    The array is copied on construction and made read-only.
    """

    __slots__ = ("samples",)

    def __init__(self, samples):
        x = np.array(samples, dtype=float)
        if x.ndim == 2:
            x = x[:, :, None]
        if x.ndim != 3:
            raise ChainError(f"samples must be (m, n, p), got shape {x.shape}")
        m, n, p = x.shape
        if m < 1 or n < 2 or p < 1:
            raise ChainError(f"need m >= 1, n >= 2, p >= 1; got m={m}, n={n}, p={p}")
        if not np.all(np.isfinite(x)):
            i, t, k = np.argwhere(~np.isfinite(x))[0]
            raise ChainError(f"non-finite value in chain {i}, iteration {t}, component {k}")
        x.setflags(write=False)
        self.samples = x

    @property
    def m(self):
        return self.samples.shape[0]

    @property
    def n(self):
        return self.samples.shape[1]

    @property
    def p(self):
        return self.samples.shape[2]

    def __repr__(self):
        return f"ChainSet(m={self.m}, n={self.n}, p={self.p})"

    def __eq__(self, other):
        return isinstance(other, ChainSet) and np.array_equal(self.samples, other.samples)

    def __hash__(self):
        return hash((self.samples.shape, self.samples.tobytes()))

    def prefix(self, n):
        """The first ``n`` iterations of every chain."""
        return ChainSet(self.samples[:, :n, :])

    def drop(self, burnin):
        return ChainSet(self.samples[:, burnin:, :])

    def component(self, k):
        return ChainSet(self.samples[:, :, k:k + 1])

    def pooled(self):
        """All draws stacked into one ``(m * n, p)`` array."""
        return self.samples.reshape(-1, self.p)


@dataclass(frozen=True)
class ChainSummary:
    chain_means: np.ndarray  # (m, p)
    grand_mean: np.ndarray  # (p,)
    per_chain_cov: np.ndarray  # (m, p, p)
    pooled_cov: np.ndarray  # (p, p)

    @property
    def pooled_var(self):
        if self.pooled_cov.shape != (1, 1):
            raise ValueError("pooled_var is only defined for p = 1")
        return float(self.pooled_cov[0, 0])


def load_chain_csv(path, header=False):
    """Read one chain from CSV: one row per iteration, one column per component.

    Accepts LF or CRLF line endings.  Blank trailing lines are ignored; every
    other cell must parse as a finite float.
    """
    path = Path(path)
    try:
        with path.open("r", encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ChainError(f"{path}: cannot read file ({exc.strerror or exc})") from exc
    while rows and not any(c.strip() for c in rows[-1]):
        rows.pop()
    start = 1 if header else 0
    if len(rows) <= start:
        raise ChainParseError(path, start + 1, None, "no data rows")
    width = len(rows[start])
    out = np.empty((len(rows) - start, width))
    for r, row in enumerate(rows[start:], start=start + 1):
        if len(row) != width:
            raise ChainParseError(path, r, None, f"expected {width} columns, found {len(row)}")
        for c, cell in enumerate(row, start=1):
            try:
                v = float(cell)
            except ValueError:
                raise ChainParseError(path, r, c, f"cannot parse {cell!r} as a number") from None
            if not math.isfinite(v):
                raise ChainParseError(path, r, c, f"non-finite value {cell!r}")
            out[r - start - 1, c - 1] = v
    return out


def write_chain_csv(path, chain, header=None):
    """Write an ``(n, p)`` chain with 17 significant digits (round-trip exact)."""
    chain = np.asarray(chain, dtype=float)
    if chain.ndim == 1:
        chain = chain[:, None]
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if header:
            w.writerow(header)
        for row in chain:
            w.writerow([f"{v:.17g}" for v in row])


def assemble(chains, burnin=0):
    """Stack equally shaped ``(n, p)`` arrays into a ChainSet, minus burn-in rows."""
    arrs = [np.asarray(c, dtype=float) for c in chains]
    if not arrs:
        raise ChainError("at least one chain is required")
    arrs = [a[:, None] if a.ndim == 1 else a for a in arrs]
    shape = arrs[0].shape
    for i, a in enumerate(arrs[1:], start=2):
        if a.shape != shape:
            raise ChainError(f"chain {i} has shape {a.shape}, expected {shape}")
    if burnin < 0 or burnin >= shape[0]:
        raise ChainError(f"burn-in {burnin} must lie in [0, n) with n = {shape[0]}")
    return ChainSet(np.stack(arrs)[:, burnin:, :])


def summarize(cs):
    x = cs.samples
    n = cs.n
    means = x.mean(axis=1)
    dev = x - means[:, None, :]
    covs = np.einsum("itj,itk->ijk", dev, dev) / (n - 1)
    covs = 0.5 * (covs + covs.transpose(0, 2, 1))
    return ChainSummary(
        chain_means=_frozen(means),
        grand_mean=_frozen(means.mean(axis=0)),
        per_chain_cov=_frozen(covs),
        pooled_cov=_frozen(covs.mean(axis=0)),
    )
