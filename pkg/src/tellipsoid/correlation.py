"""Treatment-effect removal and the gene-gene correlation blocks the score needs.

Only two blocks of the m x m sample correlation matrix are ever used: the
assumed-null block C00 (c x c) and the competing-vs-null block C10
((m-c) x c). The full matrix is never formed. The cheapest representation is
the factor Z itself, whose rows are the unit-norm centered gene profiles, so
that C = Z Z^T.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray
from scipy.linalg.blas import dsyrk

from .data import ExpressionMatrix, GroupLabels, canonical_columns
from .errors import TellipsoidError
from .tstats import ZAPartition

DEFAULT_DELTA = 1e-10


@dataclass(frozen=True)
class CenteredMatrix:
    """Expression matrix with each gene's within-group mean removed.

    Columns are stored in canonical (group, sample_id) order; `sample_ids`
    and `assignment` follow that order.
    """

    gene_ids: tuple[str, ...]
    sample_ids: tuple[str, ...]
    assignment: NDArray[np.int8]
    values: NDArray[np.float64]
    row_norms: NDArray[np.float64]

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]


def remove_treatment_effects(X: ExpressionMatrix, labels: GroupLabels) -> CenteredMatrix:
    order = canonical_columns(X, labels)
    V = X.values[:, order]
    assignment = labels.assignment[order]
    out = np.empty_like(V)
    for k in (1, 2):
        cols = assignment == k
        g = V[:, cols]
        resid = g - (g.sum(axis=1) / g.shape[1])[:, None]
        # a constant group must centre to exact zeros, not rounding noise
        resid[np.ptp(g, axis=1) == 0] = 0.0
        out[:, cols] = resid
    return CenteredMatrix(
        gene_ids=X.gene_ids,
        sample_ids=tuple(X.sample_ids[j] for j in order),
        assignment=assignment,
        values=out,
        row_norms=np.sqrt(np.einsum("ij,ij->i", out, out)),
    )


def unit_rows(values: NDArray, norms: NDArray | None = None) -> NDArray:
    """Scale rows to unit Euclidean norm; zero rows stay zero."""
    if norms is None:
        norms = np.sqrt(np.einsum("ij,ij->i", values, values))
    Z = np.zeros_like(values)
    nz = norms > 0
    Z[nz] = values[nz] / norms[nz, None]
    return Z


def contrast_basis(assignment: NDArray) -> NDArray:
    """Orthonormal n x (n-2) basis of vectors summing to zero within each group.

    Helmert contrasts are used within each group; `assignment` must list
    group 1 first, as the canonical column order does.
    """
    assignment = np.asarray(assignment)
    n = assignment.size
    n1 = int(np.count_nonzero(assignment == 1))
    if not np.all(assignment[:n1] == 1):
        raise TellipsoidError("contrast basis needs group-1 columns first")
    B = np.zeros((n, n - 2))
    col = 0
    for start, size in ((0, n1), (n1, n - n1)):
        for j in range(1, size):
            B[start:start + j, col] = 1.0
            B[start + j, col] = -j
            B[:, col] /= np.sqrt(j * (j + 1.0))
            col += 1
    return B


def gram(Z: NDArray) -> NDArray:
    """Z Z^T computed from one triangle and mirrored, so it is exactly symmetric."""
    G = dsyrk(1.0, np.asarray(Z, dtype=np.float64, order="F"))
    lower = np.tri(G.shape[0], k=-1, dtype=bool)
    np.copyto(G, G.T, where=lower)
    return G


@dataclass(frozen=True)
class CorrelationModel:
    """Correlation blocks in permutation order, plus the diagonal jitter.

    `factor` holds the unit-norm centered rows in contrast coordinates (Z),
    in permutation order; zero-norm genes have zero rows and `diag_offset` 1 so that their diagonal
    entry is 1 like every other gene. For the dense representation `C00`
    (without jitter) and `C10` are materialized as well. Models built with
    :meth:`from_blocks` carry no factor.
    """

    c: int
    delta: float
    representation: str
    factor: NDArray[np.float64] | None = None
    diag_offset: NDArray[np.float64] | None = None
    C00: NDArray[np.float64] | None = field(default=None, repr=False)
    C10: NDArray[np.float64] | None = field(default=None, repr=False)

    @classmethod
    def from_blocks(cls, C00, C10, delta: float = DEFAULT_DELTA) -> "CorrelationModel":
        """Wrap explicit blocks, e.g. a known covariance matrix."""
        C00 = np.asarray(C00, dtype=np.float64)
        C10 = np.asarray(C10, dtype=np.float64)
        c = C00.shape[0]
        if C00.shape != (c, c) or C10.ndim != 2 or C10.shape[1] != c:
            raise TellipsoidError(f"incompatible block shapes {C00.shape} and {C10.shape}")
        if not delta > 0:
            raise TellipsoidError(f"jitter must be positive, got {delta}")
        return cls(c=c, delta=float(delta), representation="dense", C00=C00, C10=C10)

    @property
    def m(self) -> int:
        return self.c + self.c10().shape[0] if self.factor is None else self.factor.shape[0]

    @property
    def Z0(self) -> NDArray:
        return self.factor[:self.c]

    @property
    def Z1(self) -> NDArray:
        return self.factor[self.c:]

    def c00(self, jitter: bool = False) -> NDArray:
        """The c x c null block, optionally with delta added to its diagonal."""
        C = self.C00
        if C is None:
            C = _c00_from_factor(self.Z0)
        elif jitter:
            C = C.copy()
        if jitter:
            C[np.diag_indices_from(C)] += self.delta
        return C

    def c10(self) -> NDArray:
        if self.C10 is not None:
            return self.C10
        C = self.Z1 @ self.Z0.T
        np.clip(C, -1.0, 1.0, out=C)
        return C


def _c00_from_factor(Z0: NDArray) -> NDArray:
    C = gram(Z0)
    np.clip(C, -1.0, 1.0, out=C)
    # unit rows give |z|^2 = 1 up to rounding and zero rows give 0; both are 1
    C[np.diag_indices_from(C)] = 1.0
    return C


def build_correlation_model(
    Xtilde: CenteredMatrix,
    part: ZAPartition,
    delta: float = DEFAULT_DELTA,
    representation: str = "lowrank",
) -> CorrelationModel:
    """Pearson correlations between centered gene rows, arranged by `part`.

    ``representation="lowrank"`` keeps only the m x n factor;
    ``"dense"`` also materializes C00 and C10.
    """
    if not (np.isfinite(delta) and delta > 0):
        raise TellipsoidError(f"jitter must be positive, got {delta}")
    if representation not in ("lowrank", "dense"):
        raise TellipsoidError(f"unknown representation {representation!r}")
    if part.m != Xtilde.m:
        raise TellipsoidError(f"partition covers {part.m} genes, matrix has {Xtilde.m}")
    perm = part.permutation
    Z = unit_rows(Xtilde.values[perm] @ contrast_basis(Xtilde.assignment))
    Z[Xtilde.row_norms[perm] == 0] = 0.0
    offset = (Xtilde.row_norms[perm] == 0).astype(np.float64)
    model = CorrelationModel(c=part.c, delta=float(delta), representation="lowrank",
                             factor=Z, diag_offset=offset)
    if representation == "dense":
        model = CorrelationModel(c=part.c, delta=float(delta), representation="dense",
                                 factor=Z, diag_offset=offset,
                                 C00=model.c00(), C10=model.c10())
    return model


def theoretical_tcov(rho1: float, rho2: float, n1: int, n2: int, nu: float) -> float:
    """Approximate covariance of two genes' t-statistics.

    `rho1` and `rho2` are the within-group correlations of the two genes in
    groups 1 and 2. The value is (n2*rho1 + n1*rho2)/(n1 + n2) * nu/(nu - 2),
    which is rho * nu/(nu - 2) when rho1 == rho2 and the plain average of the
    two correlations (times the same factor) when n1 == n2.
    """
    for r in (rho1, rho2):
        if not -1.0 <= r <= 1.0:
            raise TellipsoidError(f"correlation {r} outside [-1, 1]")
    if not nu > 2:
        raise TellipsoidError(f"degrees of freedom must exceed 2, got {nu}")
    if n1 < 1 or n2 < 1:
        raise TellipsoidError("group sizes must be positive")
    return (n2 * rho1 + n1 * rho2) / (n1 + n2) * nu / (nu - 2)
