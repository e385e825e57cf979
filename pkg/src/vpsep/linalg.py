"""Sparse linear solvers with independently certified residuals.

Every implicit step funnels through :func:`solve`, which tries BiCGStab with
Jacobi preconditioning, falls back to GMRES, and verifies the final residual
by recomputing ||b - A x|| itself (never trusting the iteration's own
stopping test). Singular-but-consistent pressure Poisson systems use a
hand-rolled conjugate gradient that projects out the constant nullspace on
every iteration.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class SolverError(RuntimeError):
    """Raised when no solver in the cascade reaches the requested tolerance."""


@dataclass(frozen=True)
class SolverConfig:
    rtol: float = 1e-10
    atol: float = 0.0
    maxiter: int = 4000
    restart: int = 80          # GMRES restart length
    use_jacobi: bool = True


class SolveResult(NamedTuple):
    """Solution plus an independently recomputed residual certificate."""
    x: np.ndarray
    residual: float
    iterations: int


def assemble_from_triplets(rows, cols, vals, shape) -> sp.csr_matrix:
    """Build a CSR matrix from COO triplets, summing duplicates.

    Validates index bounds and value finiteness before assembly.
    """
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    vals = np.asarray(vals, dtype=float)
    if not (rows.shape == cols.shape == vals.shape):
        raise ValueError("triplet arrays must have identical shapes")
    m, n = shape
    if rows.size and (rows.min() < 0 or rows.max() >= m):
        raise ValueError("row index out of bounds")
    if cols.size and (cols.min() < 0 or cols.max() >= n):
        raise ValueError("column index out of bounds")
    if not np.all(np.isfinite(vals)):
        raise ValueError("non-finite matrix entry")
    mat = sp.coo_matrix((vals, (rows, cols)), shape=shape)
    return mat.tocsr()


def _residual_norm(op, x, b) -> float:
    return float(np.linalg.norm(b - op @ x))


def _jacobi_preconditioner(mat: sp.csr_matrix):
    d = mat.diagonal()
    if not np.all(np.isfinite(d)):
        return None
    # Zero diagonal entries (e.g. divergence rows of saddle systems) are
    # left unscaled rather than disabling the preconditioner outright.
    inv = 1.0 / np.where(d == 0.0, 1.0, d)
    return spla.LinearOperator(mat.shape, matvec=lambda v: inv * v, dtype=float)


def solve(mat, b, x0=None, config: SolverConfig | None = None,
          precond_from=None) -> SolveResult:
    """Solve mat @ x = b to ||b - mat x|| <= max(rtol*||b||, atol).

    ``mat`` may be a scipy sparse matrix or a LinearOperator. When ``mat``
    is matrix-free, ``precond_from`` can supply a sparse matrix whose
    diagonal is used for Jacobi preconditioning. The returned residual is
    always recomputed from the candidate solution, never taken from the
    iteration's own bookkeeping.
    """
    cfg = config or SolverConfig()
    b = np.asarray(b, dtype=float).ravel()
    if not np.all(np.isfinite(b)):
        raise SolverError("non-finite right-hand side")
    bnorm = float(np.linalg.norm(b))
    target = max(cfg.rtol * bnorm, cfg.atol)
    if bnorm == 0.0:
        return SolveResult(np.zeros_like(b), 0.0, 0)
    if x0 is not None:
        x0 = np.asarray(x0, dtype=float).ravel()
        if x0.shape != b.shape or not np.all(np.isfinite(x0)):
            x0 = None
        else:
            res0 = _residual_norm(mat, x0, b)
            if res0 <= target:
                return SolveResult(x0.copy(), res0, 0)

    precond = None
    if cfg.use_jacobi:
        diag_source = precond_from if precond_from is not None else mat
        if sp.issparse(diag_source):
            precond = _jacobi_preconditioner(sp.csr_matrix(diag_source))

    iters = 0

    def _count(_arg):
        nonlocal iters
        iters += 1

    x, _ = spla.bicgstab(
        mat, b, x0=x0, rtol=cfg.rtol, atol=cfg.atol, maxiter=cfg.maxiter,
        M=precond, callback=_count,
    )
    if np.all(np.isfinite(x)):
        res = _residual_norm(mat, x, b)
        if res <= target:
            return SolveResult(x, res, iters)

    x, _ = spla.gmres(
        mat, b, x0=x0, rtol=cfg.rtol, atol=cfg.atol,
        maxiter=cfg.maxiter, restart=cfg.restart, M=precond,
        callback=_count, callback_type="pr_norm",
    )
    if np.all(np.isfinite(x)):
        res = _residual_norm(mat, x, b)
        if res <= target:
            return SolveResult(x, res, iters)

    res = _residual_norm(mat, x, b) if np.all(np.isfinite(x)) else float("nan")
    raise SolverError(
        f"linear solve failed: residual {res:.3e} > target {target:.3e} "
        f"(n={b.size}, ||b||={bnorm:.3e})"
    )


def solve_cg_zero_mean(mat, b, x0=None, rtol: float = 1e-11,
                       maxiter: int = 10000) -> np.ndarray:
    """CG for a symmetric positive semidefinite system whose nullspace is the
    constant vector; the mean is projected out of b, x and every search update
    so the iteration stays on the zero-mean subspace.
    """
    b = np.asarray(b, dtype=float).ravel()
    n = b.size

    def demean(v):
        return v - v.mean()

    b = demean(b)
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros(n)
    target = rtol * bnorm
    x = np.zeros(n) if x0 is None else demean(np.asarray(x0, dtype=float).ravel())
    r = demean(b - mat @ x)
    if float(np.linalg.norm(r)) <= target:
        return x
    p = r.copy()
    rs = float(r @ r)
    for _ in range(maxiter):
        ap = demean(mat @ p)
        denom = float(p @ ap)
        if denom <= 0.0:
            break
        alpha = rs / denom
        x += alpha * p
        r -= alpha * ap
        rs_new = float(r @ r)
        if np.sqrt(rs_new) <= target:
            return demean(x)
        p = r + (rs_new / rs) * p
        rs = rs_new
    res = float(np.linalg.norm(demean(b - mat @ x)))
    if res <= target:
        return demean(x)
    raise SolverError(f"projected CG failed: residual {res:.3e} > {target:.3e}")


def mean_augmented(mat: sp.spmatrix, block_start: int, block_len: int,
                   weight: float = 1.0) -> spla.LinearOperator:
    """Wrap ``mat`` so the rows of one block also pick up weight*mean(block).

    Used to pin the pressure mean in saddle-point systems: the augmented
    operator acts as A x + weight * e (e^T x / m) on the selected block,
    which is rank-one and therefore kept matrix-free.
    """
    m = block_len
    s = block_start

    def matvec(v):
        out = mat @ v
        out = np.asarray(out, dtype=float).copy()
        out[s:s + m] += weight * np.mean(v[s:s + m])
        return out

    return spla.LinearOperator(mat.shape, matvec=matvec, dtype=float)
