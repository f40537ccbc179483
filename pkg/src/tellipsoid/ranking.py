"""Tellipsoid scores, ranked gene lists, and the end-to-end pipeline.

The score of a competing gene is its t-statistic minus the part of it that
the assumed-null genes predict through the correlation structure::

    u1 = t1 - C10 (C00 + delta*I)^{-1} t0

Assumed-null genes score exactly 0 and are never listed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np
from numpy.typing import NDArray

from .correlation import DEFAULT_DELTA, CorrelationModel, build_correlation_model, remove_treatment_effects
from .data import ExpressionMatrix, GroupLabels
from .errors import ParseError, TellipsoidError
from .solver import SolveReport, solve_dense, solve_lowrank
from .tstats import DEFAULT_P, TStatistics, ZAPartition, partition_za, two_sample_t

SOLVERS = ("auto", "dense", "lowrank")
LIST_HEADER = ("rank", "gene_id", "u_star", "t", "t_rank")


@dataclass(frozen=True)
class TellipsoidScores:
    """Scores in permutation (ascending |t|) order; the first c are zero."""

    u_hat_star: NDArray[np.float64]
    permutation: NDArray[np.intp]
    c: int
    solve: SolveReport

    @property
    def m(self) -> int:
        return self.u_hat_star.size

    def by_gene(self) -> NDArray[np.float64]:
        """Scores in original gene order."""
        u = np.empty(self.m)
        u[self.permutation] = self.u_hat_star
        return u


@dataclass(frozen=True)
class RankedRow:
    rank: int
    gene_id: str
    u_star: float | None
    t: float
    t_rank: int


@dataclass(frozen=True)
class RankedGeneList:
    """Top-R genes with their scores.

    `excluded` holds the IDs of rank-ineligible (assumed-null) genes when
    known; `m` is the size of the gene universe the list was drawn from.
    """

    rows: tuple[RankedRow, ...]
    metadata: dict = field(default_factory=dict)
    excluded: frozenset = frozenset()
    m: int | None = None

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def gene_ids(self) -> list[str]:
        return [r.gene_id for r in self.rows]

    def head(self, R: int) -> "RankedGeneList":
        return RankedGeneList(self.rows[:R], dict(self.metadata), self.excluded, self.m)


def tellipsoid_scores(part: ZAPartition, corr: CorrelationModel,
                      method: str | None = None) -> TellipsoidScores:
    """Revised statistics for the competing genes of `part`.

    `method` is ``"dense"`` or ``"lowrank"``; by default it follows the
    model's representation.
    """
    method = method or corr.representation
    if corr.c != part.c:
        raise TellipsoidError(f"model cut c={corr.c} differs from partition cut c={part.c}")
    if method == "dense":
        report = solve_dense(corr.c00(jitter=True), part.t0)
        C10 = corr.c10()
        if C10.shape[0] != part.t1.size:
            raise TellipsoidError("correlation blocks do not match the partition")
        u1 = part.t1 - C10 @ report.solution
    elif method == "lowrank":
        if corr.factor is None:
            raise TellipsoidError("low-rank solve needs a factored correlation model")
        if corr.factor.shape[0] != part.m:
            raise TellipsoidError("correlation factor does not match the partition")
        report = solve_lowrank(corr.Z0, corr.delta, part.t0, corr.diag_offset[:corr.c])
        u1 = part.t1 - corr.Z1 @ report.projection
    else:
        raise TellipsoidError(f"unknown solver {method!r}")
    u = np.concatenate([np.zeros(part.c), u1])
    return TellipsoidScores(u, part.permutation, part.c, report)


def t_ranks(t: NDArray) -> NDArray[np.intp]:
    """1-based rank of every gene under |t| descending, ties by index."""
    t = np.asarray(t)
    order = np.lexsort((np.arange(t.size), -np.abs(t)))
    ranks = np.empty(t.size, dtype=np.intp)
    ranks[order] = np.arange(1, t.size + 1)
    return ranks


def _top(values: NDArray, candidates: NDArray, R: int) -> NDArray:
    candidates = np.sort(candidates)
    order = np.lexsort((candidates, -np.abs(values[candidates])))
    return candidates[order[:R]]


def rank_genes(scores: TellipsoidScores, stats: TStatistics, R: int,
               metadata: dict | None = None) -> RankedGeneList:
    """Top-R genes by |score|, ties broken by original gene index."""
    eligible = scores.m - scores.c
    if not 1 <= R <= eligible:
        raise TellipsoidError(
            f"R out of range: {R} (1..{eligible}; the {scores.c} assumed-null genes "
            "are not rank-eligible)")
    u = scores.by_gene()
    top = _top(u, scores.permutation[scores.c:], R)
    tr = t_ranks(stats.t)
    rows = tuple(
        RankedRow(k + 1, stats.gene_ids[i], float(u[i]), float(stats.t[i]), int(tr[i]))
        for k, i in enumerate(top))
    excluded = frozenset(stats.gene_ids[i] for i in scores.permutation[:scores.c])
    return RankedGeneList(rows, dict(metadata or {}), excluded, scores.m)


def rank_raw_t(stats: TStatistics, R: int) -> RankedGeneList:
    """Baseline list: top-R genes by |t|."""
    if not 1 <= R <= stats.m:
        raise TellipsoidError(f"R out of range: {R} (1..{stats.m})")
    tr = t_ranks(stats.t)
    top = np.argsort(tr)[:R]
    rows = tuple(RankedRow(k + 1, stats.gene_ids[i], None, float(stats.t[i]), int(tr[i]))
                 for k, i in enumerate(top))
    return RankedGeneList(rows, {"method": "raw_t"}, frozenset(), stats.m)


def choose_solver(method: str, n: int, c: int) -> str:
    if method not in SOLVERS:
        raise TellipsoidError(f"unknown solver {method!r} (choose from {', '.join(SOLVERS)})")
    if method == "auto":
        return "lowrank" if n < c else "dense"
    return method


@dataclass(frozen=True)
class PipelineResult:
    stats: TStatistics
    partition: ZAPartition
    scores: TellipsoidScores
    solver: str


def score_matrix(X: ExpressionMatrix, labels: GroupLabels, P: float = DEFAULT_P,
                 delta: float = DEFAULT_DELTA, solver_method: str = "auto") -> PipelineResult:
    """Run every step up to the scores, keeping the intermediate products."""
    stats = two_sample_t(X, labels)
    part = partition_za(stats, P)
    solver = choose_solver(solver_method, X.n, part.c)
    Xt = remove_treatment_effects(X, labels)
    corr = build_correlation_model(Xt, part, delta, representation=solver)
    return PipelineResult(stats, part, tellipsoid_scores(part, corr, solver), solver)


def run_tellipsoid(X: ExpressionMatrix, labels: GroupLabels, R: int, P: float = DEFAULT_P,
                   delta: float = DEFAULT_DELTA, solver_method: str = "auto",
                   extra_metadata: dict | None = None) -> RankedGeneList:
    res = score_matrix(X, labels, P, delta, solver_method)
    meta = {"P": P, "c": res.partition.c, "delta": delta, "method": res.scores.solve.method,
            "residual_norm": res.scores.solve.residual_norm}
    meta.update(extra_metadata or {})
    return rank_genes(res.scores, res.stats, R, meta)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def format_ranked_list(ranked: RankedGeneList) -> str:
    lines = ["\t".join(LIST_HEADER)]
    for r in ranked.rows:
        lines.append("\t".join([str(r.rank), r.gene_id, _fmt(r.u_star), _fmt(r.t), str(r.t_rank)]))
    for key, value in ranked.metadata.items():
        lines.append(f"# {key}={_fmt(value)}")
    return "\n".join(lines) + "\n"


def write_ranked_list(ranked: RankedGeneList, path) -> None:
    Path(path).write_text(format_ranked_list(ranked))


def _parse_meta(value: str):
    for conv in (int, float):
        try:
            return conv(value)
        except ValueError:
            pass
    return value


def parse_ranked_list(lines: Iterable[str], source: str = "<list>") -> RankedGeneList:
    rows, meta = [], {}
    header_seen = False
    for lineno, line in enumerate(lines, 1):
        line = line.rstrip("\r\n")
        if not line.strip():
            continue
        if line.startswith("#"):
            key, sep, value = line.lstrip("#").strip().partition("=")
            if sep:
                meta[key.strip()] = _parse_meta(value.strip())
            continue
        cols = line.split("\t")
        if not header_seen:
            if tuple(cols) != LIST_HEADER:
                raise ParseError(f"{source}: expected header {'/'.join(LIST_HEADER)}")
            header_seen = True
            continue
        if len(cols) != len(LIST_HEADER):
            raise ParseError(f"{source}: line {lineno} has {len(cols)} columns, expected 5")
        try:
            rank, gid, u, t, tr = cols
            row = RankedRow(int(rank), gid, float(u) if u else None, float(t), int(tr))
        except ValueError as exc:
            raise ParseError(f"{source}: line {lineno}: {exc}") from None
        if not math.isfinite(row.t):
            raise ParseError(f"{source}: line {lineno}: non-finite t")
        rows.append(row)
    if not header_seen:
        raise ParseError(f"{source}: missing header")
    for k, r in enumerate(rows, 1):
        if r.rank != k:
            raise ParseError(f"{source}: ranks must be 1..R in order (row {k} has rank {r.rank})")
    return RankedGeneList(tuple(rows), meta)


def read_ranked_list(path) -> RankedGeneList:
    with Path(path).open() as fh:
        return parse_ranked_list(fh, str(path))
