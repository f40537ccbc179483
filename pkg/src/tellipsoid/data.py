"""Labeled expression matrices and their tab-separated file formats.

Expression TSV::

    gene_id<TAB>s1<TAB>...<TAB>sn
    geneA<TAB>v11<TAB>...<TAB>v1n

Labels TSV: one ``sample_id<TAB>group`` row per sample, any order, with
``group`` in {1, 2}. A leading ``sample_id<TAB>group`` header is optional.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from .errors import ParseError, TellipsoidError

MIN_GENES = 2
MIN_SAMPLES = 4
MIN_GROUP_SIZE = 2


def _frozen(a: NDArray) -> NDArray:
    a = np.array(a, copy=True)
    a.flags.writeable = False
    return a


def _check_unique(ids: Sequence[str], what: str) -> None:
    seen = set()
    for i in ids:
        if i in seen:
            raise TellipsoidError(f"duplicate {what} ID {i!r}")
        seen.add(i)


@dataclass(frozen=True)
class ExpressionMatrix:
    """An m x n matrix of expression values, genes in rows."""

    gene_ids: tuple[str, ...]
    sample_ids: tuple[str, ...]
    values: NDArray[np.float64]

    def __post_init__(self):
        object.__setattr__(self, "gene_ids", tuple(self.gene_ids))
        object.__setattr__(self, "sample_ids", tuple(self.sample_ids))
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise TellipsoidError("expression values must be a 2-D matrix")
        m, n = values.shape
        if (m, n) != (len(self.gene_ids), len(self.sample_ids)):
            raise TellipsoidError(
                f"values have shape {values.shape} but there are "
                f"{len(self.gene_ids)} gene IDs and {len(self.sample_ids)} sample IDs")
        if m < MIN_GENES or n < MIN_SAMPLES:
            raise TellipsoidError(
                f"need at least {MIN_GENES} genes and {MIN_SAMPLES} samples, got {m}x{n}")
        if not np.all(np.isfinite(values)):
            i, j = np.argwhere(~np.isfinite(values))[0]
            raise TellipsoidError(
                f"non-finite value for gene {self.gene_ids[i]!r}, sample {self.sample_ids[j]!r}")
        _check_unique(self.gene_ids, "gene")
        _check_unique(self.sample_ids, "sample")
        object.__setattr__(self, "values", _frozen(values))

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]

    def take_genes(self, index) -> "ExpressionMatrix":
        index = np.asarray(index)
        return ExpressionMatrix([self.gene_ids[i] for i in index], self.sample_ids,
                                self.values[index])

    def take_samples(self, index) -> "ExpressionMatrix":
        index = np.asarray(index)
        return ExpressionMatrix(self.gene_ids, [self.sample_ids[j] for j in index],
                                self.values[:, index])

    def with_values(self, values) -> "ExpressionMatrix":
        return ExpressionMatrix(self.gene_ids, self.sample_ids, values)


@dataclass(frozen=True)
class GroupLabels:
    """Group membership (1 or 2) of each sample, aligned to a sample order."""

    assignment: NDArray[np.int8]
    sample_ids: tuple[str, ...] | None = field(default=None)

    def __post_init__(self):
        a = np.asarray(self.assignment)
        if a.ndim != 1:
            raise TellipsoidError("group assignment must be a vector")
        if not np.all((a == 1) | (a == 2)):
            bad = a[(a != 1) & (a != 2)][0]
            raise TellipsoidError(f"group token {bad!r} is not 1 or 2")
        if self.sample_ids is not None:
            object.__setattr__(self, "sample_ids", tuple(self.sample_ids))
            if len(self.sample_ids) != a.size:
                raise TellipsoidError("labels and sample IDs differ in length")
        object.__setattr__(self, "assignment", _frozen(a.astype(np.int8)))
        n1, n2 = self.n1, self.n2
        if n1 < MIN_GROUP_SIZE or n2 < MIN_GROUP_SIZE:
            raise TellipsoidError(
                f"each group needs at least {MIN_GROUP_SIZE} samples (n1={n1}, n2={n2})")

    @property
    def n1(self) -> int:
        return int(np.count_nonzero(self.assignment == 1))

    @property
    def n2(self) -> int:
        return int(np.count_nonzero(self.assignment == 2))

    @property
    def n(self) -> int:
        return self.assignment.size

    def mask(self, group: int) -> NDArray[np.bool_]:
        return self.assignment == group

    def take(self, index) -> "GroupLabels":
        index = np.asarray(index)
        ids = None if self.sample_ids is None else [self.sample_ids[j] for j in index]
        return GroupLabels(self.assignment[index], ids)


def check_labels(X: ExpressionMatrix, labels: GroupLabels) -> None:
    """Raise unless `labels` describes the columns of `X`."""
    if labels.n != X.n:
        raise TellipsoidError(f"{labels.n} labels for {X.n} samples")
    if labels.sample_ids is not None and labels.sample_ids != X.sample_ids:
        raise TellipsoidError("label sample order does not match the expression matrix")


def canonical_columns(X: ExpressionMatrix, labels: GroupLabels) -> NDArray[np.intp]:
    """Column order sorted by (group, sample_id).

    Every reduction over samples runs in this order, so permuting the input
    columns (with matching labels) cannot change a single bit of the output.
    """
    check_labels(X, labels)
    keys = sorted(range(X.n), key=lambda j: (labels.assignment[j], X.sample_ids[j]))
    return np.asarray(keys, dtype=np.intp)


def load_expression_matrix(path, apply_log10: bool = False) -> ExpressionMatrix:
    """Read and validate an expression TSV.

    With `apply_log10` every entry is replaced by its base-10 logarithm;
    all raw entries must then be strictly positive.
    """
    path = Path(path)
    with path.open() as fh:
        lines = [ln.rstrip("\r\n") for ln in fh]
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise ParseError(f"{path}: empty file")
    header = lines[0].split("\t")
    if len(header) < 2:
        raise ParseError(f"{path}: header row has no sample columns")
    sample_ids = header[1:]
    n = len(sample_ids)
    gene_ids = []
    values = np.empty((len(lines) - 1, n))
    for r, line in enumerate(lines[1:]):
        lineno = r + 2
        cols = line.split("\t")
        if len(cols) != n + 1:
            raise ParseError(
                f"{path}: line {lineno} has {len(cols)} columns, expected {n + 1}")
        gene_ids.append(cols[0])
        for j, tok in enumerate(cols[1:]):
            try:
                v = float(tok)
            except ValueError:
                raise ParseError(
                    f"{path}: line {lineno} (gene {cols[0]!r}), column {j + 2} "
                    f"(sample {sample_ids[j]!r}): {tok!r} is not a number") from None
            if not math.isfinite(v):
                raise ParseError(
                    f"{path}: line {lineno} (gene {cols[0]!r}), column {j + 2} "
                    f"(sample {sample_ids[j]!r}): non-finite value {tok!r}")
            values[r, j] = v
    if apply_log10:
        if np.any(values <= 0):
            i, j = np.argwhere(values <= 0)[0]
            raise TellipsoidError(
                f"{path}: log10 requires positive values; gene {gene_ids[i]!r}, "
                f"sample {sample_ids[j]!r} has {values[i, j]!r}")
        values = np.log10(values)
    return ExpressionMatrix(gene_ids, sample_ids, values)


def write_expression_matrix(X: ExpressionMatrix, path) -> None:
    with Path(path).open("w") as fh:
        fh.write("\t".join(("gene_id",) + X.sample_ids) + "\n")
        for gid, row in zip(X.gene_ids, X.values):
            fh.write(gid + "\t" + "\t".join(map(repr, row.tolist())) + "\n")


def load_labels(path, sample_ids: Sequence[str]) -> GroupLabels:
    """Read a labels TSV and align it to `sample_ids`."""
    path = Path(path)
    sample_ids = tuple(sample_ids)
    wanted = set(sample_ids)
    groups: dict[str, int] = {}
    with path.open() as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line.strip() or line.startswith("#"):
                continue
            cols = line.split("\t")
            if lineno == 1 and cols == ["sample_id", "group"]:
                continue
            if len(cols) != 2:
                raise ParseError(f"{path}: line {lineno} has {len(cols)} columns, expected 2")
            sid, tok = cols
            if tok.strip() not in ("1", "2"):
                raise TellipsoidError(
                    f"{path}: line {lineno}: group {tok!r} for sample {sid!r} is not 1 or 2")
            if sid not in wanted:
                raise TellipsoidError(f"{path}: line {lineno}: unknown sample ID {sid!r}")
            if sid in groups:
                raise TellipsoidError(f"{path}: line {lineno}: sample {sid!r} labeled twice")
            groups[sid] = int(tok)
    missing = [s for s in sample_ids if s not in groups]
    if missing:
        raise TellipsoidError(f"{path}: no label for sample {missing[0]!r}")
    return GroupLabels([groups[s] for s in sample_ids], sample_ids)


def write_labels(labels: GroupLabels, path, sample_ids: Sequence[str] | None = None) -> None:
    ids = sample_ids if sample_ids is not None else labels.sample_ids
    if ids is None:
        raise TellipsoidError("sample IDs are required to write labels")
    with Path(path).open("w") as fh:
        fh.write("sample_id\tgroup\n")
        for sid, g in zip(ids, labels.assignment.tolist()):
            fh.write(f"{sid}\t{g}\n")
