"""Two-sample t-statistics and the zero-assumption partition."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from numpy.typing import NDArray

from .data import ExpressionMatrix, GroupLabels, canonical_columns
from .errors import TellipsoidError

DEFAULT_P = 50


@dataclass(frozen=True)
class TStatistics:
    """Per-gene unpaired t-statistics, in input gene order.

    Attributes:
        t: (mean of group 2 - mean of group 1) / pooled_sd.
        group_means: m x 2 matrix, column k-1 holds the group-k means.
        pooled_sd: the t denominator, s_p * sqrt(1/n1 + 1/n2), where s_p is the
            pooled within-group standard deviation on n1 + n2 - 2 degrees of
            freedom.
        zero_variance: genes constant within both groups (their t is 0).
    """

    gene_ids: tuple[str, ...]
    t: NDArray[np.float64]
    group_means: NDArray[np.float64]
    pooled_sd: NDArray[np.float64]
    zero_variance: NDArray[np.bool_]
    n1: int
    n2: int

    @property
    def m(self) -> int:
        return self.t.size


@dataclass(frozen=True)
class ZAPartition:
    """Genes sorted by ascending |t|, split into assumed-null and competing sets.

    ``permutation[k]`` is the input index of the gene at rank position k.
    The first `c` positions are assumed null (`t0`); the rest compete (`t1`).
    """

    permutation: NDArray[np.intp]
    c: int
    P: float
    t0: NDArray[np.float64]
    t1: NDArray[np.float64]

    @property
    def m(self) -> int:
        return self.permutation.size

    @property
    def null_genes(self) -> NDArray[np.intp]:
        return self.permutation[:self.c]

    @property
    def competing_genes(self) -> NDArray[np.intp]:
        return self.permutation[self.c:]

    @property
    def t_sorted(self) -> NDArray[np.float64]:
        return np.concatenate([self.t0, self.t1])


def two_sample_t(X: ExpressionMatrix, labels: GroupLabels) -> TStatistics:
    """Unpaired two-sample t-statistic of every gene (group 2 minus group 1).

    A gene that is constant within each group gets t = 0 when the two group
    values coincide; if they differ the statistic would be infinite and a
    TellipsoidError naming the gene is raised.
    """
    order = canonical_columns(X, labels)
    n1, n2 = labels.n1, labels.n2
    V = X.values[:, order]
    g1, g2 = V[:, :n1], V[:, n1:]

    mean1 = g1.sum(axis=1) / n1
    mean2 = g2.sum(axis=1) / n2
    ss = ((g1 - mean1[:, None]) ** 2).sum(axis=1) + ((g2 - mean2[:, None]) ** 2).sum(axis=1)
    sd = np.sqrt(ss / (n1 + n2 - 2)) * math.sqrt(1.0 / n1 + 1.0 / n2)

    flat = (np.ptp(g1, axis=1) == 0) & (np.ptp(g2, axis=1) == 0)
    shifted = flat & (g1[:, 0] != g2[:, 0])
    if np.any(shifted):
        i = int(np.flatnonzero(shifted)[0])
        raise TellipsoidError(
            f"gene {X.gene_ids[i]!r} is constant within each group but the group "
            f"values differ ({g1[i, 0]!r} vs {g2[i, 0]!r}); its t-statistic is infinite")

    diff = mean2 - mean1
    t = np.zeros(X.m)
    ok = ~flat
    t[ok] = diff[ok] / sd[ok]
    sd[flat] = 0.0
    return TStatistics(
        gene_ids=X.gene_ids,
        t=t,
        group_means=np.column_stack([mean1, mean2]),
        pooled_sd=sd,
        zero_variance=flat,
        n1=n1,
        n2=n2,
    )


def cut_count(m: int, P: float) -> int:
    """Number of genes assumed null: ceil(m * P / 100), evaluated exactly."""
    if not 0 < P < 100:
        raise TellipsoidError(f"P out of range: {P} (need 0 < P < 100)")
    c = math.ceil(Fraction(m) * Fraction(P) / 100)
    if not 1 <= c <= m - 1:
        raise TellipsoidError(f"P={P} gives c={c} assumed-null genes out of m={m}")
    return c


def partition_za(stats: TStatistics | NDArray, P: float = DEFAULT_P) -> ZAPartition:
    """Sort genes by ascending |t| (ties by input index) and cut after c genes.

    `stats` may also be a bare vector of t-values.
    """
    t = stats.t if isinstance(stats, TStatistics) else np.asarray(stats, dtype=np.float64)
    c = cut_count(t.size, P)
    perm = np.argsort(np.abs(t), kind="stable")
    ts = t[perm]
    return ZAPartition(permutation=perm, c=c, P=P, t0=ts[:c], t1=ts[c:])
