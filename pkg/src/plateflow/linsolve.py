"""Direct sparse factorization and saddle-point solve helpers.

Sparse matrices are scipy CSR/CSC; the factor-once/solve-many workflow
needed by the coupled solver (one Stokes factorization reused for every
plate basis column) is wrapped in :class:`SparseFactorization`.  Saddle
systems ``[[A, B], [B^T, 0]]`` with a small number of constraints are
solved either directly or through a Schur complement on the multiplier
block; both paths are kept because their agreement is a cheap sanity
check on the assembly.
"""

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class SingularMatrixError(RuntimeError):
    pass


class IterativeSolveError(RuntimeError):
    pass


class SparseFactorization:
    """LU factorization of a sparse matrix, reusable for many right-hand sides."""

    def __init__(self, matrix, symmetric_pattern=True):
        self.matrix = matrix.tocsc()
        self.shape = self.matrix.shape
        perm = "MMD_AT_PLUS_A" if symmetric_pattern else "COLAMD"
        try:
            self._lu = spla.splu(self.matrix, permc_spec=perm,
                                 diag_pivot_thresh=0.1,
                                 options={"SymmetricMode": symmetric_pattern})
        except RuntimeError as err:
            raise SingularMatrixError(f"sparse factorization failed: {err}") from err

    def solve(self, rhs, refine=True):
        """Solve for one vector or a column block of right-hand sides."""
        b = np.asarray(rhs, dtype=float)
        x = self._lu.solve(b)
        if refine:
            # one step of iterative refinement keeps residuals near machine level
            r = b - self.matrix @ x
            x = x + self._lu.solve(r)
        return x

    def residual_norm(self, x, rhs):
        return np.linalg.norm(rhs - self.matrix @ x)


def solve_sparse(matrix, rhs, rtol=1e-10):
    """Factor ``matrix`` and solve, verifying the residual against ``rtol``."""
    fact = SparseFactorization(matrix)
    x = fact.solve(rhs)
    scale = np.linalg.norm(rhs)
    if scale > 0 and fact.residual_norm(x, rhs) > rtol * scale:
        raise SingularMatrixError("direct solve residual exceeds tolerance; "
                                  "matrix is singular or severely ill-conditioned")
    return x


def saddle_matrix(A, B):
    """Assemble the symmetric block matrix [[A, B], [B^T, 0]]."""
    B = np.atleast_2d(B) if not sp.issparse(B) else B
    if sp.issparse(A):
        Bs = sp.csr_matrix(B) if not sp.issparse(B) else B
        zero = sp.csr_matrix((Bs.shape[1], Bs.shape[1]))
        return sp.bmat([[A, Bs], [Bs.T, zero]], format="csr")
    Bd = B.toarray() if sp.issparse(B) else B
    if Bd.ndim == 1:
        Bd = Bd[:, None]
    n, m = Bd.shape
    K = np.zeros((n + m, n + m))
    K[:n, :n] = A
    K[:n, n:] = Bd
    K[n:, :n] = Bd.T
    return K


def solve_saddle_dense(A, B, f, g):
    """Dense direct solve of [[A, B], [B^T, 0]] [x; c] = [f; g]."""
    B = np.asarray(B, dtype=float)
    if B.ndim == 1:
        B = B[:, None]
    n, m = B.shape
    K = saddle_matrix(np.asarray(A, dtype=float), B)
    rhs = np.concatenate([np.asarray(f, dtype=float), np.atleast_1d(np.asarray(g, dtype=float))])
    sol = scipy.linalg.solve(K, rhs, assume_a="sym")
    return sol[:n], sol[n:]


def solve_saddle_schur(A, B, f, g):
    """Schur-complement elimination of the multiplier block.

    Solves A y = f and A Z = B, then the m x m system
    (B^T Z) c = B^T y - g, and finally x = y - Z c.  Requires A
    nonsingular, which holds here since the elliptic blocks are definite.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if B.ndim == 1:
        B = B[:, None]
    lu = scipy.linalg.lu_factor(A)
    y = scipy.linalg.lu_solve(lu, np.asarray(f, dtype=float))
    Z = scipy.linalg.lu_solve(lu, B)
    S = B.T @ Z
    rhs = B.T @ y - np.atleast_1d(np.asarray(g, dtype=float))
    c = scipy.linalg.solve(S, rhs)
    return y - Z @ c, c


def minres_saddle(matrix, rhs, elliptic_block_size, elliptic, mass_diag,
                  rtol=1e-10, maxiter=2000):
    """MINRES fallback for large symmetric saddle systems.

    Preconditioned with an algebraic-multigrid V-cycle on the elliptic
    block and a lumped mass matrix on the constraint block.  Raises
    :class:`IterativeSolveError` when the requested tolerance is not met.
    """
    import pyamg

    n = elliptic_block_size
    ml = pyamg.smoothed_aggregation_solver(elliptic.tocsr())
    amg = ml.aspreconditioner(cycle="V")
    mdiag = np.where(mass_diag > 0, mass_diag, 1.0)

    def apply_prec(v):
        out = np.empty_like(v)
        out[:n] = amg @ v[:n]
        out[n:] = v[n:] / mdiag
        return out

    M = spla.LinearOperator(matrix.shape, matvec=apply_prec)
    b = np.asarray(rhs, dtype=float)
    if b.ndim == 1:
        cols = [b]
    else:
        cols = [b[:, j] for j in range(b.shape[1])]
    out = []
    for col in cols:
        x, info = spla.minres(matrix, col, M=M, rtol=rtol, maxiter=maxiter)
        res = np.linalg.norm(col - matrix @ x)
        if info != 0 or res > 10 * rtol * max(np.linalg.norm(col), 1e-300):
            raise IterativeSolveError(
                f"MINRES did not converge (info={info}, residual={res:.3e})")
        out.append(x)
    return out[0] if np.asarray(rhs).ndim == 1 else np.column_stack(out)
