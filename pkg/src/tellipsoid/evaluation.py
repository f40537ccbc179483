"""Scoring ranked lists against known truth, and replicate studies."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .correlation import DEFAULT_DELTA
from .data import ExpressionMatrix, GroupLabels
from .errors import TellipsoidError
from .ranking import RankedGeneList, rank_genes, rank_raw_t, score_matrix
from .simulation import (BlockCovSpec, GroundTruth, SpikeSpec, derive_seed,
                         gaussian_generate, make_surrogate)
from .tstats import DEFAULT_P

METHODS = ("tellipsoid", "raw_t")


def empirical_fdr(ranked: RankedGeneList, truth: GroundTruth | dict) -> tuple[int, float]:
    """(number of truly null genes in the list, that number / list length)."""
    is_null = truth if isinstance(truth, dict) else truth.null_lookup()
    nofp = 0
    for row in ranked.rows:
        try:
            nofp += is_null[row.gene_id]
        except KeyError:
            raise TellipsoidError(f"gene {row.gene_id!r} is not in the truth table") from None
    R = len(ranked.rows)
    if R == 0:
        raise TellipsoidError("cannot score an empty list")
    return nofp, nofp / R


@dataclass(frozen=True)
class GeneratorConfig:
    """Recipe for one simulated dataset per replicate seed.

    ``mode="gaussian"`` draws from a block-correlated Gaussian; ``"standardize"``
    builds a spiked surrogate from `source` and `source_labels`.
    """

    mode: str
    m_u: int
    m_d: int
    x_u: float
    x_d: float
    n1: int
    n2: int
    m: int | None = None
    block_size: int | None = None
    rho: float | None = None
    source: ExpressionMatrix | None = field(default=None, repr=False)
    source_labels: GroupLabels | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.mode == "gaussian":
            BlockCovSpec(self.m, self.block_size, self.rho)
        elif self.mode == "standardize":
            if self.source is None or self.source_labels is None:
                raise TellipsoidError("standardize mode needs a source matrix and labels")
        else:
            raise TellipsoidError(f"unknown generator mode {self.mode!r}")
        self.spike(0)

    def spike(self, seed: int) -> SpikeSpec:
        return SpikeSpec(self.m_u, self.m_d, self.x_u, self.x_d, self.n1, self.n2, seed)

    def generate(self, seed: int) -> tuple[ExpressionMatrix, GroundTruth, GroupLabels]:
        if self.mode == "gaussian":
            cov = BlockCovSpec(self.m, self.block_size, self.rho)
            return gaussian_generate(cov, self.n1, self.n2, self.spike(seed))
        return make_surrogate(self.source, self.source_labels, self.spike(seed))


@dataclass(frozen=True)
class StudyRow:
    replicate: int
    method: str
    R: int
    nofp: int
    fdr: float


@dataclass(frozen=True)
class SummaryRow:
    method: str
    R: int
    median_fdr: float
    frac_zero_fdr: float
    median_nofp: float


@dataclass
class EvaluationReport:
    rows: list[StudyRow]
    seeds: list[int] = field(default_factory=list)
    lists: dict = field(default_factory=dict, repr=False)

    def series(self, method: str, R: int) -> list[StudyRow]:
        return [r for r in self.rows if r.method == method and r.R == R]

    def summary(self) -> list[SummaryRow]:
        keys = sorted({(r.method, r.R) for r in self.rows},
                      key=lambda k: (METHODS.index(k[0]) if k[0] in METHODS else len(METHODS), k))
        out = []
        for method, R in keys:
            s = self.series(method, R)
            fdr = np.array([r.fdr for r in s])
            nofp = np.array([r.nofp for r in s])
            out.append(SummaryRow(method, R, float(np.median(fdr)),
                                  float(np.mean(fdr == 0)), float(np.median(nofp))))
        return out


def run_study(config: GeneratorConfig, methods: Sequence[str] = METHODS,
              R_values: Sequence[int] = (100,), replicates: int = 40, seed: int = 0,
              P: float = DEFAULT_P, delta: float = DEFAULT_DELTA, solver: str = "auto",
              keep_lists: bool = False) -> EvaluationReport:
    """Score each method at each R on `replicates` freshly generated datasets.

    Replicate i uses the seed derived from (seed, i), so reports do not
    depend on evaluation order. Lists are nested prefixes of one ranking,
    so the NoFP series is non-decreasing in R.
    """
    if replicates < 1:
        raise TellipsoidError("need at least one replicate")
    for meth in methods:
        if meth not in METHODS:
            raise TellipsoidError(f"unknown method {meth!r}")
    R_values = sorted(set(int(R) for R in R_values))
    if not R_values or R_values[0] < 1:
        raise TellipsoidError("R values must be positive")
    R_max = R_values[-1]
    report = EvaluationReport(rows=[])
    for rep in range(replicates):
        rep_seed = derive_seed(seed, rep)
        report.seeds.append(rep_seed)
        X, truth, labels = config.generate(rep_seed)
        is_null = truth.null_lookup()
        res = None
        for meth in methods:
            if meth == "tellipsoid":
                res = res or score_matrix(X, labels, P, delta, solver)
                ranked = rank_genes(res.scores, res.stats, R_max,
                                    {"method": res.scores.solve.method, "seed": rep_seed})
            else:
                res = res or score_matrix(X, labels, P, delta, solver)
                ranked = rank_raw_t(res.stats, R_max)
            if keep_lists:
                report.lists[(rep, meth)] = ranked
            for R in R_values:
                nofp, fdr = empirical_fdr(ranked.head(R), is_null)
                report.rows.append(StudyRow(rep, meth, R, nofp, fdr))
    return report


def format_study_tsv(report: EvaluationReport) -> str:
    lines = ["replicate\tmethod\tR\tNoFP\tFDR"]
    lines += [f"{r.replicate}\t{r.method}\t{r.R}\t{r.nofp}\t{r.fdr!r}" for r in report.rows]
    return "\n".join(lines) + "\n"


def format_summary_tsv(report: EvaluationReport) -> str:
    lines = ["method\tR\tmedian_FDR\tfrac_zero_FDR"]
    lines += [f"{s.method}\t{s.R}\t{s.median_fdr!r}\t{s.frac_zero_fdr!r}" for s in report.summary()]
    return "\n".join(lines) + "\n"


def write_study_tsv(report: EvaluationReport, path) -> None:
    Path(path).write_text(format_study_tsv(report))


def write_summary_tsv(report: EvaluationReport, path) -> None:
    Path(path).write_text(format_summary_tsv(report))


def comparison_table(tellipsoid_list: RankedGeneList, raw_list: RankedGeneList,
                     truth: GroundTruth) -> str:
    """Side-by-side report in the style of a top-R score table.

    Each row gives the score rank, score, the gene's t and its t rank; truly
    null genes are marked with ``*``. The footer gives both NoFP totals.
    """
    for lst in (tellipsoid_list, raw_list):
        if lst.m is not None and lst.m != len(truth.gene_ids):
            raise TellipsoidError(
                f"list drawn from {lst.m} genes but the truth covers {len(truth.gene_ids)}")
    if tellipsoid_list.m is not None and raw_list.m is not None and tellipsoid_list.m != raw_list.m:
        raise TellipsoidError("lists come from different gene universes")
    is_null = truth.null_lookup()
    nofp_u, _ = empirical_fdr(tellipsoid_list, is_null)
    nofp_t, _ = empirical_fdr(raw_list, is_null)
    out = [f"{'u* rank':>7}  {'gene_id':<12}  {'u*':>7}  {'t':>7}  {'t rank':>6}  null"]
    for r in tellipsoid_list.rows:
        u = "" if r.u_star is None else f"{r.u_star:.2f}"
        flag = "*" if is_null[r.gene_id] else ""
        out.append(f"{r.rank:>7}  {r.gene_id:<12}  {u:>7}  {r.t:>7.2f}  {r.t_rank:>6}  {flag}")
    out.append(f"Tellipsoid = {nofp_u} NoFPs; raw t-statistics = {nofp_t} NoFPs "
               f"(R = {len(tellipsoid_list)} and {len(raw_list)}; * = truly null)")
    return "\n".join(out) + "\n"
