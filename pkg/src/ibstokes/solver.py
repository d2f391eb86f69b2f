"""Sparse storage and solution of the symmetric indefinite Stokes system.

Compressed row storage and the factorization are provided by scipy; this
module fixes the conventions (deterministic duplicate summation, symmetric
block layout, residual certificates).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import IndexOutOfRange, SolverBreakdown

log = logging.getLogger(__name__)

DIRECT_SOLVE_THRESHOLD = 200_000


def finalize(rows, cols, values, shape) -> sp.csr_matrix:
    """Build a CSR matrix from triplets, summing duplicates.

    Duplicates are summed in insertion order, column indices end up sorted and
    unique within each row, and explicit zeros are dropped.
    """
    rows = np.asarray(rows, dtype=np.int64).ravel()
    cols = np.asarray(cols, dtype=np.int64).ravel()
    values = np.asarray(values, dtype=float).ravel()
    if not (len(rows) == len(cols) == len(values)):
        raise ValueError("triplet arrays differ in length")
    nr, nc = shape
    if len(rows) and (rows.min() < 0 or rows.max() >= nr or cols.min() < 0 or cols.max() >= nc):
        raise IndexOutOfRange(f"triplet index outside matrix shape {shape}")
    # stable sort keeps insertion order among duplicates
    order = np.lexsort((cols, rows))
    r, c, v = rows[order], cols[order], values[order]
    if len(r):
        new = np.ones(len(r), dtype=bool)
        new[1:] = (r[1:] != r[:-1]) | (c[1:] != c[:-1])
        starts = np.flatnonzero(new)
        v = np.add.reduceat(v, starts) if len(starts) else v
        r, c = r[starts], c[starts]
    indptr = np.zeros(nr + 1, dtype=np.int64)
    np.add.at(indptr, r + 1, 1)
    np.cumsum(indptr, out=indptr)
    M = sp.csr_matrix((v, c, indptr), shape=shape)
    M.eliminate_zeros()
    M.has_sorted_indices = True
    return M


@dataclass
class SaddleOperator:
    """Blocks of ``[[A, B^T, 0], [B, 0, c], [0, c^T, 0]]``."""

    A: sp.spmatrix
    B: sp.spmatrix
    c: np.ndarray

    @property
    def n_velocity(self) -> int:
        return self.A.shape[0]

    @property
    def n_pressure(self) -> int:
        return self.B.shape[0]

    @property
    def size(self) -> int:
        return self.n_velocity + self.n_pressure + 1

    def matrix(self) -> sp.csr_matrix:
        c = sp.csr_matrix(np.asarray(self.c, dtype=float).reshape(-1, 1))
        K = sp.bmat([[self.A, self.B.T, None],
                     [self.B, None, c],
                     [None, c.T, None]], format="csr")
        K.sort_indices()
        return K

    def preconditioner(self) -> spla.LinearOperator:
        """Block-diagonal SPD preconditioner: inverse diagonal of ``A``, inverse
        lumped pressure mass, and the inverse multiplier Schur complement."""
        dA = np.asarray(self.A.diagonal(), dtype=float)
        mass = np.abs(np.asarray(self.c, dtype=float))
        schur = mass.sum()
        scale = np.concatenate([1.0 / dA, 1.0 / mass, [1.0 / schur]])
        return spla.LinearOperator((self.size, self.size), matvec=lambda x: scale * x.ravel(),
                                   dtype=float)


@dataclass
class SolveInfo:
    method: str
    iterations: int
    residual: float
    extra: dict = field(default_factory=dict)


def residual_norm(K, x, b) -> float:
    """Relative residual ``|Kx - b| / |b|`` recomputed from the operator."""
    nb = np.linalg.norm(b)
    r = np.linalg.norm(K @ x - b)
    return float(r / nb) if nb > 0 else float(r)


def solve_symmetric_indefinite(op, rhs, tol: float = 1e-10, max_iter: int = 5000,
                               direct_threshold: int = DIRECT_SOLVE_THRESHOLD,
                               refine_steps: int = 3):
    """Solve ``K x = rhs`` for a symmetric (possibly indefinite) ``K``.

    ``op`` is either a :class:`SaddleOperator` or a square sparse/dense matrix.
    Systems up to ``direct_threshold`` unknowns are factorised with SuperLU and
    polished by iterative refinement; larger ones use preconditioned MINRES.
    The relative residual is always recomputed from ``K``.

    Returns
    -------
    x : ndarray
    info : SolveInfo

    Raises
    ------
    SolverBreakdown
        Singular factorisation or residual above ``tol``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if isinstance(op, SaddleOperator):
        K = op.matrix()
        M = op.preconditioner()
    else:
        K = sp.csr_matrix(op)
        M = None
    b = np.asarray(rhs, dtype=float)
    n = K.shape[0]
    if K.shape != (n, n) or b.shape != (n,):
        raise ValueError(f"shape mismatch: operator {K.shape}, rhs {b.shape}")
    if not np.any(b):
        return np.zeros(n), SolveInfo("trivial", 0, 0.0)

    if n <= direct_threshold:
        Kc = K.tocsc()
        res, steps = np.inf, 0
        # Symmetric ordering without diagonal pivoting keeps fill near that of
        # the SPD block; partial pivoting is the fallback for tiny pivots.
        for thresh in (0.0, 1.0):
            try:
                lu = spla.splu(Kc, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=thresh,
                               options={"SymmetricMode": True})
            except RuntimeError as exc:
                log.debug("factorization with pivot threshold %g failed: %s", thresh, exc)
                continue
            x = lu.solve(b)
            res = residual_norm(K, x, b)
            steps = 0
            while not res <= tol and steps < refine_steps:
                x = x + lu.solve(b - K @ x)
                res = residual_norm(K, x, b)
                steps += 1
            if res <= tol:
                log.debug("direct solve n=%d residual=%.3e refinement=%d", n, res, steps)
                return x, SolveInfo("direct", steps, res, {"fill": int(lu.L.nnz + lu.U.nnz)})
        raise SolverBreakdown(steps, res, "direct solve missed tolerance")

    counter = {"it": 0}

    def callback(_):
        counter["it"] += 1

    # MINRES stops on the preconditioned residual; tighten and restart until
    # the true residual meets the tolerance.
    x, rtol = None, 0.1 * tol
    for _ in range(4):
        x, flag = spla.minres(K, b, x0=x, M=M, rtol=rtol,
                              maxiter=max(max_iter - counter["it"], 1), callback=callback)
        res = residual_norm(K, x, b)
        if res <= tol:
            return x, SolveInfo("minres", counter["it"], res)
        if flag < 0 or counter["it"] >= max_iter:
            break
        rtol *= 0.01
    raise SolverBreakdown(counter["it"], res, "MINRES did not converge")
