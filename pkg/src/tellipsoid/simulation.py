"""Datasets with known differential genes, and the t-covariance Monte Carlo lab.

Two generators are provided:

* a surrogate built from a real matrix: row-standardize within groups,
  re-split the columns at random, and spike offsets into group 2 of randomly
  chosen genes (:func:`make_surrogate`);
* multivariate Gaussian columns with block-diagonal equicorrelation
  (:func:`gaussian_generate`).

Every random draw comes from a numpy ``Generator`` seeded through
``SeedSequence``, so a seed reproduces its output bit for bit.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from .correlation import theoretical_tcov
from .data import ExpressionMatrix, GroupLabels, check_labels
from .errors import ParseError, TellipsoidError

DIRECTIONS = ("up", "down", "null")
_STREAM = {"split": 1, "spike": 2, "subsample": 3, "gaussian": 4}


def stream(seed: int, purpose: str, *extra: int) -> np.random.Generator:
    """Independent generator for one purpose (and optional index) under `seed`."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), _STREAM[purpose], *extra]))


def derive_seed(seed: int, index: int) -> int:
    """Per-replicate seed; depends only on (seed, index)."""
    return int(np.random.SeedSequence([int(seed), index]).generate_state(1, np.uint32)[0])


@dataclass(frozen=True)
class SpikeSpec:
    """How many genes to shift up/down, by how much, and the group sizes."""

    m_u: int
    m_d: int
    x_u: float
    x_d: float
    n1: int
    n2: int
    seed: int

    def __post_init__(self):
        if self.m_u < 0 or self.m_d < 0:
            raise TellipsoidError("spike counts must be non-negative")
        if not self.x_u > 0:
            raise TellipsoidError(f"up-regulation offset must be positive, got {self.x_u}")
        if not self.x_d < 0:
            raise TellipsoidError(f"down-regulation offset must be negative, got {self.x_d}")
        if self.n1 < 2 or self.n2 < 2:
            raise TellipsoidError(f"group sizes must be at least 2 (n1={self.n1}, n2={self.n2})")

    def proportion(self, m: int) -> float:
        return (self.m_u + self.m_d) / m


@dataclass(frozen=True)
class GroundTruth:
    gene_ids: tuple[str, ...]
    direction: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "gene_ids", tuple(self.gene_ids))
        object.__setattr__(self, "direction", tuple(self.direction))
        if len(self.gene_ids) != len(self.direction):
            raise TellipsoidError("truth IDs and directions differ in length")
        bad = set(self.direction) - set(DIRECTIONS)
        if bad:
            raise TellipsoidError(f"unknown direction {sorted(bad)[0]!r}")

    @property
    def differential(self) -> NDArray[np.bool_]:
        return np.array([d != "null" for d in self.direction])

    def count(self, direction: str) -> int:
        return self.direction.count(direction)

    def null_lookup(self) -> dict[str, bool]:
        return {g: d == "null" for g, d in zip(self.gene_ids, self.direction)}


@dataclass(frozen=True)
class BlockCovSpec:
    """Block-diagonal covariance: unit variances, correlation rho inside blocks.

    The last block is shorter when block_size does not divide m.
    """

    m: int
    block_size: int
    rho: float

    def __post_init__(self):
        if self.m < 4:
            raise TellipsoidError(f"need at least 4 genes, got {self.m}")
        if not 1 <= self.block_size <= self.m:
            raise TellipsoidError(f"block size {self.block_size} out of range 1..{self.m}")
        lo = -1.0 / (self.block_size - 1) if self.block_size > 1 else -np.inf
        if not lo < self.rho < 1:
            raise TellipsoidError(
                f"rho={self.rho} does not give a positive definite covariance "
                f"for blocks of {self.block_size}")

    def blocks(self) -> list[int]:
        full, rest = divmod(self.m, self.block_size)
        return [self.block_size] * full + ([rest] if rest else [])

    def block_matrix(self, size: int) -> NDArray:
        return np.full((size, size), self.rho) + (1.0 - self.rho) * np.eye(size)

    def dense(self) -> NDArray:
        """The full m x m covariance; only sensible for small m."""
        W = np.zeros((self.m, self.m))
        s = 0
        for b in self.blocks():
            W[s:s + b, s:s + b] = self.block_matrix(b)
            s += b
        return W


def row_standardize(X: ExpressionMatrix, labels: GroupLabels) -> ExpressionMatrix:
    """Within each group, give every gene mean 0 and mean square 1."""
    check_labels(X, labels)
    V = X.values
    out = np.empty_like(V)
    for k in (1, 2):
        cols = labels.mask(k)
        g = V[:, cols]
        resid = g - g.mean(axis=1, keepdims=True)
        ms = np.mean(resid ** 2, axis=1)
        flat = (np.ptp(g, axis=1) == 0) | (ms == 0)
        if np.any(flat):
            i = int(np.flatnonzero(flat)[0])
            raise TellipsoidError(
                f"gene {X.gene_ids[i]!r} is constant within group {k}; cannot standardize")
        out[:, cols] = resid / np.sqrt(ms)[:, None]
    return X.with_values(out)


def random_group_split(n: int, n1: int, n2: int, seed: int,
                       sample_ids=None) -> GroupLabels:
    """Exactly n1 samples in group 1 and n2 in group 2, uniformly at random."""
    if n1 + n2 != n:
        raise TellipsoidError(f"group sizes {n1} + {n2} do not add up to {n} samples")
    if n1 < 0 or n2 < 0:
        raise TellipsoidError("group sizes must be non-negative")
    perm = stream(seed, "split").permutation(n)
    a = np.full(n, 2, dtype=np.int8)
    a[perm[:n1]] = 1
    return GroupLabels(a, sample_ids)


def spike_in(X_std: ExpressionMatrix, labels: GroupLabels,
             spec: SpikeSpec) -> tuple[ExpressionMatrix, GroundTruth]:
    """Add x_u (x_d) to the group-2 entries of m_u (m_d) random genes."""
    check_labels(X_std, labels)
    m = X_std.m
    k = spec.m_u + spec.m_d
    if k >= m:
        raise TellipsoidError(f"cannot spike {k} genes out of {m}")
    chosen = stream(spec.seed, "spike").choice(m, size=k, replace=False)
    up, down = chosen[:spec.m_u], chosen[spec.m_u:]
    V = np.array(X_std.values)
    g2 = labels.mask(2)
    V[np.ix_(up, g2)] += spec.x_u
    V[np.ix_(down, g2)] += spec.x_d
    direction = np.full(m, "null", dtype=object)
    direction[up] = "up"
    direction[down] = "down"
    return X_std.with_values(V), GroundTruth(X_std.gene_ids, direction.tolist())


def make_surrogate(X: ExpressionMatrix, labels: GroupLabels,
                   spec: SpikeSpec) -> tuple[ExpressionMatrix, GroundTruth, GroupLabels]:
    """Real-data surrogate with known truth.

    When spec.n1 + spec.n2 is smaller than the number of columns, spec.n1
    columns are first drawn from the original group 1 and spec.n2 from the
    original group 2. The kept matrix is standardized under its original
    labels, its columns are re-split at random into groups of spec.n1 and
    spec.n2, and the spike-ins are applied to the new group 2.
    """
    check_labels(X, labels)
    n_new = spec.n1 + spec.n2
    if n_new > X.n:
        raise TellipsoidError(f"asked for {n_new} samples but the matrix has {X.n}")
    if n_new < X.n:
        rng = stream(spec.seed, "subsample")
        keep = []
        for k, size in ((1, spec.n1), (2, spec.n2)):
            pool = np.flatnonzero(labels.mask(k))
            if size > pool.size:
                raise TellipsoidError(f"group {k} has only {pool.size} samples, need {size}")
            keep.append(np.sort(rng.choice(pool, size=size, replace=False)))
        keep = np.concatenate(keep)
        X, labels = X.take_samples(keep), labels.take(keep)
    X_std = row_standardize(X, labels)
    new_labels = random_group_split(X.n, spec.n1, spec.n2, spec.seed, X.sample_ids)
    X_spiked, truth = spike_in(X_std, new_labels, spec)
    return X_spiked, truth, new_labels


def _ids(prefix: str, count: int) -> list[str]:
    width = len(str(count))
    return [f"{prefix}{i:0{width}d}" for i in range(1, count + 1)]


def gaussian_generate(cov: BlockCovSpec, n1: int, n2: int,
                      spike: SpikeSpec) -> tuple[ExpressionMatrix, GroundTruth, GroupLabels]:
    """Columns drawn i.i.d. from N(0, W), W block-diagonal per `cov`.

    The first n1 columns form group 1. Offsets are added to group-2 entries
    of the spiked genes.
    """
    if (spike.n1, spike.n2) != (n1, n2):
        raise TellipsoidError("spike spec group sizes differ from n1, n2")
    n = n1 + n2
    rng = stream(spike.seed, "gaussian")
    E = rng.standard_normal((cov.m, n))
    V = np.empty_like(E)
    factors = {}
    s = 0
    for b in cov.blocks():
        if b not in factors:
            try:
                factors[b] = np.linalg.cholesky(cov.block_matrix(b))
            except np.linalg.LinAlgError:
                raise TellipsoidError("block covariance is not positive definite") from None
        V[s:s + b] = factors[b] @ E[s:s + b]
        s += b
    X = ExpressionMatrix(_ids("g", cov.m), _ids("s", n), V)
    labels = GroupLabels([1] * n1 + [2] * n2, X.sample_ids)
    X, truth = spike_in(X, labels, spike)
    return X, truth, labels


def write_truth(truth: GroundTruth, path, metadata: dict | None = None) -> None:
    with Path(path).open("w") as fh:
        for key, value in (metadata or {}).items():
            fh.write(f"# {key}={value}\n")
        fh.write("gene_id\tdirection\n")
        for g, d in zip(truth.gene_ids, truth.direction):
            fh.write(f"{g}\t{d}\n")


def read_truth(path) -> GroundTruth:
    ids, dirs = [], []
    header_seen = False
    with Path(path).open() as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line.strip() or line.startswith("#"):
                continue
            cols = line.split("\t")
            if not header_seen and cols == ["gene_id", "direction"]:
                header_seen = True
                continue
            if len(cols) != 2:
                raise ParseError(f"{path}: line {lineno} has {len(cols)} columns, expected 2")
            if cols[1] not in DIRECTIONS:
                raise ParseError(f"{path}: line {lineno}: direction {cols[1]!r} not in {DIRECTIONS}")
            ids.append(cols[0])
            dirs.append(cols[1])
    if len(set(ids)) != len(ids):
        raise ParseError(f"{path}: duplicate gene IDs")
    return GroundTruth(ids, dirs)


def spec_metadata(spec: SpikeSpec, **extra) -> dict:
    meta = asdict(spec)
    meta.update(extra)
    return meta


@dataclass(frozen=True)
class ObservationResult:
    empirical_cov: float
    theoretical_cov: float
    abs_error: float


def _t_pairs(rng, rho1, rho2, n1, n2, shift, reps):
    """t-statistics of two genes over `reps` simulated datasets."""
    out = []
    for n_k, rho, mu in ((n1, rho1, 0.0), (n2, rho2, shift)):
        a = rng.standard_normal((reps, n_k))
        b = rho * a + np.sqrt(1.0 - rho * rho) * rng.standard_normal((reps, n_k))
        out.append((a, b + mu))
    (a1, b1), (a2, b2) = out
    ts = []
    for g1, g2 in ((a1, a2), (b1, b2)):
        ss = ((g1 - g1.mean(1, keepdims=True)) ** 2).sum(1) + ((g2 - g2.mean(1, keepdims=True)) ** 2).sum(1)
        sd = np.sqrt(ss / (n1 + n2 - 2) * (1.0 / n1 + 1.0 / n2))
        ts.append((g2.mean(1) - g1.mean(1)) / sd)
    return ts


def verify_observation(obs: int, rho1: float, rho2: float, n1: int, n2: int,
                       reps: int, seed: int, chunk: int = 10_000) -> ObservationResult:
    """Monte Carlo covariance of two genes' t-statistics against the approximation.

    obs 1: both genes null with a common correlation (rho1 must equal rho2).
    obs 2: the second gene is non-null, shifted by one standard deviation in
    group 2; its correlation with the first may differ between groups.
    obs 3: obs 2 restricted to n1 == n2.
    Replicates are drawn in chunks whose streams depend only on (seed, chunk).
    """
    if obs not in (1, 2, 3):
        raise TellipsoidError(f"observation must be 1, 2 or 3, got {obs}")
    for r in (rho1, rho2):
        if not -1.0 <= r <= 1.0:
            raise TellipsoidError(f"correlation {r} outside [-1, 1]")
    if obs == 1 and rho1 != rho2:
        raise TellipsoidError("observation 1 needs the same correlation in both groups")
    if obs == 3 and n1 != n2:
        raise TellipsoidError("observation 3 needs n1 == n2")
    if n1 < 2 or n2 < 2:
        raise TellipsoidError("group sizes must be at least 2")
    nu = n1 + n2 - 2
    theory = theoretical_tcov(rho1, rho2, n1, n2, nu)
    if reps < 10_000:
        raise TellipsoidError(f"need at least 10000 replicates, got {reps}")
    shift = 0.0 if obs == 1 else 1.0
    t1, t2 = [], []
    for i, start in enumerate(range(0, reps, chunk)):
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), 7, i]))
        a, b = _t_pairs(rng, rho1, rho2, n1, n2, shift, min(chunk, reps - start))
        t1.append(a)
        t2.append(b)
    t1, t2 = np.concatenate(t1), np.concatenate(t2)
    emp = float(np.cov(t1, t2)[0, 1])
    return ObservationResult(emp, theory, abs(emp - theory))
