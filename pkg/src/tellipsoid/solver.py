"""Linear solves against the jittered null block, and the Mahalanobis oracle.

Two routes compute x = (C00 + delta*I)^{-1} t0:

* :func:`solve_dense` factorizes the c x c matrix (LAPACK ``potrf``) and
  polishes the answer with iterative refinement, the residual being
  accumulated in extended precision.
* :func:`solve_lowrank` uses C00 = Z0 Z0^T (+ a diagonal) and the Woodbury
  identity, so only an n x n matrix is factorized.

When n < c the jittered matrix has c - rank(Z0) eigenvalues equal to delta,
so x is dominated by a component of size |t0| / delta. Both routes return
that vector, but float64 can only pin it down to roughly
eps * lambda_max / delta in relative terms, and a dense matrix rounded
entrywise already moves it by that much. Downstream code should consume
Z0^T x (``SolveReport.projection``) or C10 x, in which that component cancels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import solve_triangular
from scipy.linalg.lapack import dpotrf, dpotrs

from .errors import SolverError, TellipsoidError

BACKWARD_ERROR_TOL = 1e-8
REFINEMENT_STEPS = 2
_BLOCK = 512


@dataclass(frozen=True)
class SolveReport:
    """Result of solving (C00 + delta*I) x = t0.

    Attributes:
        solution: x.
        method: ``"dense-cholesky"`` or ``"lowrank-woodbury"``.
        residual_norm: ||C x - t0||_2 / ||t0||_2 with the residual accumulated
            in extended precision.
        backward_error: normwise backward error
            ||r||_inf / (||C||_inf ||x||_inf + ||t0||_inf); solves above
            BACKWARD_ERROR_TOL are rejected.
        projection: Z0^T x, available from the low-rank route only.
    """

    solution: NDArray[np.float64]
    method: str
    residual_norm: float
    backward_error: float
    projection: NDArray[np.float64] | None = None


def _cholesky(A: NDArray, what: str) -> NDArray:
    if not np.all(np.isfinite(A)):
        raise SolverError(f"{what}: matrix has non-finite entries")
    L, info = dpotrf(A, lower=1, clean=1, overwrite_a=0)
    if info > 0:
        raise SolverError(
            f"{what}: leading minor of order {info} is not positive definite "
            "(jitter too small or input corrupted)", minor=int(info))
    if info < 0:
        raise SolverError(f"{what}: potrf rejected argument {-info}")
    return L


def _cho_solve(L: NDArray, b: NDArray) -> NDArray:
    x, info = dpotrs(L, b, lower=1)
    if info != 0:
        raise SolverError(f"potrs failed with info={info}")
    return x


def _dense_residual(A: NDArray, x: NDArray, t: NDArray) -> NDArray:
    """t - A x accumulated in long double, one row block at a time."""
    xl = x.astype(np.longdouble)
    r = np.empty(t.size, dtype=np.longdouble)
    for s in range(0, t.size, _BLOCK):
        r[s:s + _BLOCK] = t[s:s + _BLOCK] - A[s:s + _BLOCK].astype(np.longdouble) @ xl
    return r


def _report(x, r, t, a_norm, method, projection=None) -> SolveReport:
    r64 = r.astype(np.float64)
    t_norm = np.linalg.norm(t)
    residual = float(np.linalg.norm(r64) / t_norm) if t_norm > 0 else float(np.linalg.norm(r64))
    denom = a_norm * np.max(np.abs(x), initial=0.0) + np.max(np.abs(t), initial=0.0)
    backward = float(np.max(np.abs(r64), initial=0.0) / denom) if denom > 0 else 0.0
    if not np.all(np.isfinite(x)) or not backward <= BACKWARD_ERROR_TOL:
        raise SolverError(
            f"{method}: solve rejected, backward error {backward:.3g} "
            f"exceeds {BACKWARD_ERROR_TOL:g}")
    return SolveReport(x, method, residual, backward, projection)


def _refine(solve, residual, t):
    """Iterative refinement; keeps the iterate with the smallest residual."""
    x = solve(t)
    r = residual(x)
    best = (np.linalg.norm(r.astype(np.float64)), x, r)
    for _ in range(REFINEMENT_STEPS):
        x = x + solve(r.astype(np.float64))
        r = residual(x)
        rn = np.linalg.norm(r.astype(np.float64))
        if not rn < best[0]:
            break
        best = (rn, x, r)
    return best[1], best[2]


def solve_dense(C00_jittered, t0) -> SolveReport:
    """Cholesky solve of an SPD system with extended-precision refinement."""
    A = np.asarray(C00_jittered, dtype=np.float64)
    t = np.asarray(t0, dtype=np.float64)
    if A.ndim != 2 or A.shape != (t.size, t.size):
        raise TellipsoidError(f"matrix {A.shape} does not match vector of length {t.size}")
    L = _cholesky(A, "dense-cholesky")
    x, r = _refine(lambda b: _cho_solve(L, b), lambda x: _dense_residual(A, x, t), t)
    return _report(x, r, t, np.abs(A).sum(axis=1).max(), "dense-cholesky")


def solve_lowrank(Z0, delta: float, t0, diag_offset=None) -> SolveReport:
    """Solve (Z0 Z0^T + diag(diag_offset) + delta*I) x = t0 via Woodbury.

    With D = delta + diag_offset (elementwise),
    x = D^{-1} (t0 - Z0 w) where (I + Z0^T D^{-1} Z0) w = Z0^T D^{-1} t0.
    For a zero offset this is x = (t0 - Z0 (delta*I + Z0^T Z0)^{-1} Z0^T t0) / delta.
    The vector w equals Z0^T x and is returned as the report's projection;
    it is recomputed from a thin QR factor of D^{-1/2} Z0 as
    R^T (R R^T + I)^{-1} Q^T D^{-1/2} t0, which keeps it in the row space of
    Z0 even when Z0 has more columns than rank. Cost is O(c n^2 + n^3).
    """
    Z = np.asarray(Z0, dtype=np.float64)
    t = np.asarray(t0, dtype=np.float64)
    if Z.ndim != 2 or Z.shape[0] != t.size:
        raise TellipsoidError(f"factor {Z.shape} does not match vector of length {t.size}")
    if not (np.isfinite(delta) and delta > 0):
        raise TellipsoidError(f"jitter must be positive, got {delta}")
    offset = np.zeros(t.size) if diag_offset is None else np.asarray(diag_offset, dtype=np.float64)
    d = delta + offset
    Zs = Z / d[:, None]
    inner = Z.T @ Zs
    inner[np.diag_indices_from(inner)] += 1.0
    L = _cholesky(inner, "lowrank-woodbury (inner n x n factor)")

    def solve(b):
        return (b - Z @ _cho_solve(L, Zs.T @ b)) / d

    Zl = Z.astype(np.longdouble)
    dl = d.astype(np.longdouble)

    def residual(x):
        xl = x.astype(np.longdouble)
        return t - (Zl @ (Zl.T @ xl) + dl * xl)

    x, r = _refine(solve, residual, t)
    a_norm = np.abs(Z) @ np.abs(Z).sum(axis=0) + d
    return _report(x, r, t, a_norm.max(), "lowrank-woodbury", projection=_projection(Z, d, t))


def _projection(Z, d, t):
    """Z^T (Z Z^T + diag(d))^{-1} t without forming the 1/delta-sized x."""
    s = np.sqrt(d)
    Q, R = np.linalg.qr(Z / s[:, None])
    G = R @ R.T
    G[np.diag_indices_from(G)] += 1.0
    L = _cholesky(G, "lowrank-woodbury (projection factor)")
    return R.T @ _cho_solve(L, Q.T @ (t / s))


def mahalanobis_distance(t, u, Sigma) -> float:
    """sqrt((t - u)^T Sigma^{-1} (t - u)) for SPD `Sigma`."""
    diff = np.asarray(t, dtype=np.float64) - np.asarray(u, dtype=np.float64)
    S = np.asarray(Sigma, dtype=np.float64)
    if S.shape != (diff.size, diff.size):
        raise TellipsoidError(f"covariance {S.shape} does not match vectors of length {diff.size}")
    if not np.allclose(S, S.T, rtol=0, atol=1e-12 * np.abs(S).max(initial=1.0)):
        raise SolverError("covariance matrix is not symmetric")
    L = _cholesky(S, "mahalanobis")
    y = solve_triangular(L, diff, lower=True)
    return float(np.sqrt(y @ y))


def ustar_objective(t, u1, Sigma, c: int) -> float:
    """The squared Mahalanobis distance between t and (0, u1)."""
    t = np.asarray(t, dtype=np.float64)
    u = np.concatenate([np.zeros(c), np.asarray(u1, dtype=np.float64)])
    return mahalanobis_distance(t, u, Sigma) ** 2


def brute_force_ustar(t, Sigma, c: int) -> NDArray[np.float64]:
    """Minimize the distance of t to (0, u1) over u1, by explicit inversion.

    With Sigma^{-1} partitioned as [[A, B], [B^T, D]], setting the gradient of
    the quadratic form in v = t1 - u1 to zero gives D v = -B^T t0. Independent
    of the closed form used for ranking; intended for small m.
    """
    t = np.asarray(t, dtype=np.float64)
    S = np.asarray(Sigma, dtype=np.float64)
    m = t.size
    if S.shape != (m, m):
        raise TellipsoidError(f"covariance {S.shape} does not match vector of length {m}")
    if not 1 <= c <= m - 1:
        raise TellipsoidError(f"cut {c} out of range for m={m}")
    P = np.linalg.inv(S)
    lower_left = P[c:, :c]
    D = P[c:, c:]
    v = np.linalg.solve(D, -lower_left @ t[:c])
    return t[c:] - v
