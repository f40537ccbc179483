"""Command-line entry point: ``rank``, ``simulate``, ``evaluate`` and ``covlab``.

Exit codes: 0 success, 1 invalid input or flags, 2 I/O failure,
3 covariance check outside tolerance.
"""

from __future__ import annotations

import argparse
import sys
from contextlib import nullcontext
from pathlib import Path

from threadpoolctl import threadpool_limits

from .correlation import DEFAULT_DELTA
from .data import load_expression_matrix, load_labels, write_expression_matrix, write_labels
from .errors import TellipsoidError
from .evaluation import (GeneratorConfig, empirical_fdr, format_study_tsv,
                         format_summary_tsv, run_study)
from .ranking import SOLVERS, format_ranked_list, read_ranked_list, run_tellipsoid
from .simulation import read_truth, spec_metadata, verify_observation, write_truth
from .tstats import DEFAULT_P

EXIT_OK, EXIT_INVALID, EXIT_IO, EXIT_TOLERANCE = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    """Usage errors count as invalid input (exit 1), not argparse's default 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _add_generator_flags(p, seed_required: bool, strict: bool = True) -> None:
    p.add_argument("--mode", choices=("standardize", "gaussian"), default="gaussian")
    p.add_argument("--m", type=int, help="genes (gaussian mode)")
    p.add_argument("--blocksize", type=int, help="correlation block size (gaussian mode)")
    p.add_argument("--rho", type=float, help="within-block correlation (gaussian mode)")
    p.add_argument("--mu", type=int, required=strict, help="number of up-regulated genes")
    p.add_argument("--md", type=int, required=strict, help="number of down-regulated genes")
    p.add_argument("--xu", type=float, required=strict, help="up-regulation offset (> 0)")
    p.add_argument("--xd", type=float, required=strict, help="down-regulation offset (< 0)")
    p.add_argument("--n1", type=int, required=strict)
    p.add_argument("--n2", type=int, required=strict)
    p.add_argument("--seed", type=int, required=seed_required)
    p.add_argument("--input", type=Path, help="source matrix (standardize mode)")
    p.add_argument("--labels", type=Path, help="source labels (standardize mode)")
    p.add_argument("--log10", action="store_true", help="log10-transform the source matrix")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tellipsoid", description="Correlation-aware ranking of differential genes.")
    parser.add_argument("--threads", type=int, default=None,
                        help="cap on BLAS/LAPACK worker threads")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("rank", help="rank genes of a labeled expression matrix")
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--labels", type=Path, required=True)
    p.add_argument("--R", type=int, required=True, help="length of the gene list")
    p.add_argument("--output", type=Path, help="list TSV (default: standard output)")
    p.add_argument("--P", type=float, default=DEFAULT_P, help="percent of genes assumed null")
    p.add_argument("--delta", type=float, default=DEFAULT_DELTA, help="diagonal jitter")
    p.add_argument("--solver", choices=SOLVERS, default="auto")
    p.add_argument("--log10", action="store_true")

    p = sub.add_parser("simulate", help="write a dataset with known differential genes")
    _add_generator_flags(p, seed_required=True)
    p.add_argument("--outdir", type=Path, required=True)

    p = sub.add_parser("evaluate", help="score ranked lists, or run a replicate study")
    p.add_argument("--list", type=Path, nargs="+", dest="lists", help="ranked-list TSVs")
    p.add_argument("--truth", type=Path)
    p.add_argument("--study", action="store_true", help="simulate and score replicates")
    p.add_argument("--replicates", type=int, default=40)
    p.add_argument("--R", type=int, nargs="+", default=[100])
    p.add_argument("--P", type=float, default=DEFAULT_P)
    p.add_argument("--delta", type=float, default=DEFAULT_DELTA)
    p.add_argument("--solver", choices=SOLVERS, default="auto")
    p.add_argument("--output", type=Path, help="report TSV (default: standard output)")
    p.add_argument("--summary", type=Path, help="study summary TSV")
    # generator flags as for simulate; checked only when --study is given
    _add_generator_flags(p.add_argument_group("study generator"), seed_required=False,
                         strict=False)

    p = sub.add_parser("covlab", help="Monte Carlo check of the t-statistic covariance")
    p.add_argument("--obs", type=int, choices=(1, 2, 3), required=True)
    p.add_argument("--rho", type=float, help="common correlation (sets rho1 = rho2)")
    p.add_argument("--rho1", type=float)
    p.add_argument("--rho2", type=float)
    p.add_argument("--n1", type=int, required=True)
    p.add_argument("--n2", type=int, required=True)
    p.add_argument("--reps", type=int, default=100_000)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--tol", type=float, default=0.03)
    return parser


def _generator_config(args) -> GeneratorConfig:
    for flag in ("mu", "md", "xu", "xd", "n1", "n2"):
        if getattr(args, flag) is None:
            raise TellipsoidError(f"--{flag} is required")
    common = dict(m_u=args.mu, m_d=args.md, x_u=args.xu, x_d=args.xd, n1=args.n1, n2=args.n2)
    if args.mode == "gaussian":
        for flag in ("m", "blocksize", "rho"):
            if getattr(args, flag) is None:
                raise TellipsoidError(f"gaussian mode needs --{flag}")
        return GeneratorConfig("gaussian", m=args.m, block_size=args.blocksize, rho=args.rho,
                               **common)
    if args.input is None or args.labels is None:
        raise TellipsoidError("standardize mode needs --input and --labels")
    X = load_expression_matrix(args.input, apply_log10=args.log10)
    labels = load_labels(args.labels, X.sample_ids)
    return GeneratorConfig("standardize", source=X, source_labels=labels, **common)


def _emit(text: str, path: Path | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        path.write_text(text)


def cmd_rank(args) -> int:
    X = load_expression_matrix(args.input, apply_log10=args.log10)
    labels = load_labels(args.labels, X.sample_ids)
    ranked = run_tellipsoid(X, labels, args.R, P=args.P, delta=args.delta,
                            solver_method=args.solver)
    _emit(format_ranked_list(ranked), args.output)
    return EXIT_OK


def cmd_simulate(args) -> int:
    config = _generator_config(args)
    X, truth, labels = config.generate(args.seed)
    meta = spec_metadata(config.spike(args.seed), mode=args.mode)
    if args.mode == "gaussian":
        meta.update(m=args.m, block_size=args.blocksize, rho=args.rho)
    else:
        meta.update(source=args.input.name, log10=args.log10)
    args.outdir.mkdir(parents=True, exist_ok=True)
    write_expression_matrix(X, args.outdir / "expression.tsv")
    write_labels(labels, args.outdir / "labels.tsv", X.sample_ids)
    write_truth(truth, args.outdir / "truth.tsv", meta)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    if args.study:
        if args.lists:
            raise TellipsoidError("--study and --list are mutually exclusive")
        if args.seed is None:
            raise TellipsoidError("--study needs an explicit --seed")
        report = run_study(_generator_config(args), R_values=args.R,
                           replicates=args.replicates, seed=args.seed, P=args.P,
                           delta=args.delta, solver=args.solver)
        _emit(format_study_tsv(report), args.output)
        if args.summary is not None:
            args.summary.write_text(format_summary_tsv(report))
        return EXIT_OK
    if not args.lists or args.truth is None:
        raise TellipsoidError("evaluate needs --list and --truth, or --study")
    truth = read_truth(args.truth)
    is_null = truth.null_lookup()
    lines = ["method\tR\tNoFP\tFDR"]
    for path in args.lists:
        ranked = read_ranked_list(path)
        try:
            nofp, fdr = empirical_fdr(ranked, is_null)
        except TellipsoidError as exc:
            raise TellipsoidError(f"{path}: {exc}") from None
        method = ranked.metadata.get("method", path.stem)
        lines.append(f"{method}\t{len(ranked)}\t{nofp}\t{fdr!r}")
    _emit("\n".join(lines) + "\n", args.output)
    return EXIT_OK


def cmd_covlab(args) -> int:
    if args.rho is not None:
        if args.rho1 is not None or args.rho2 is not None:
            raise TellipsoidError("give either --rho or --rho1/--rho2")
        rho1 = rho2 = args.rho
    else:
        if args.rho1 is None or args.rho2 is None:
            raise TellipsoidError("give --rho, or both --rho1 and --rho2")
        rho1, rho2 = args.rho1, args.rho2
    if not args.tol >= 0:
        raise TellipsoidError(f"tolerance must be non-negative, got {args.tol}")
    res = verify_observation(args.obs, rho1, rho2, args.n1, args.n2, args.reps, args.seed)
    print(f"obs={args.obs}\trho1={rho1}\trho2={rho2}\tn1={args.n1}\tn2={args.n2}\treps={args.reps}")
    print(f"empirical={res.empirical_cov:.6f}\ttheoretical={res.theoretical_cov:.6f}\t"
          f"abs_error={res.abs_error:.6f}\ttol={args.tol}")
    return EXIT_OK if res.abs_error <= args.tol else EXIT_TOLERANCE


COMMANDS = {"rank": cmd_rank, "simulate": cmd_simulate, "evaluate": cmd_evaluate,
            "covlab": cmd_covlab}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is not None and args.threads < 1:
        print("tellipsoid: error: --threads must be positive", file=sys.stderr)
        return EXIT_INVALID
    limits = threadpool_limits(args.threads) if args.threads else nullcontext()
    try:
        with limits:
            return COMMANDS[args.command](args)
    except TellipsoidError as exc:
        print(f"tellipsoid {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"tellipsoid {args.command}: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
