"""Sparse and dense solvers, dual norms and generalized eigenvalues.

Sparse matrices are ``scipy.sparse`` CSR matrices throughout.
"""

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

DENSE_EIG_LIMIT = 1500


class SolverError(RuntimeError):
    """Iterative solver failure; ``residual`` holds the last relative residual."""

    def __init__(self, msg, residual=np.nan):
        super().__init__(msg)
        self.residual = residual


class NotSPDError(SolverError):
    pass


class SingularMatrixError(np.linalg.LinAlgError):
    pass


def as_csr(A):
    A = sp.csr_matrix(A, dtype=float)
    A.sum_duplicates()
    A.eliminate_zeros()
    return A


def is_symmetric(A, rtol=1e-12):
    A = sp.csr_matrix(A)
    scale = abs(A).max() if A.nnz else 0.0
    if scale == 0.0:
        return True
    d = A - A.T
    return (abs(d).max() if d.nnz else 0.0) <= rtol * scale


# ----------------------------------------------------------------------
def solve_spd(A, b, rel_tol=1e-12, maxiter=None, precond="jacobi", x0=None, callback=None):
    """Preconditioned conjugate gradients for SPD ``A``.

    Stops when ``||A x - b|| <= rel_tol ||b||``. The default cap is
    ``20 * n`` iterations. ``callback(x)`` is called once per iteration.
    """
    A = sp.csr_matrix(A)
    b = np.asarray(b, dtype=float)
    n = len(b)
    if maxiter is None:
        maxiter = 20 * max(n, 1)
    bnorm = np.linalg.norm(b)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    if bnorm == 0.0:
        return np.zeros(n)
    if precond == "jacobi":
        d = A.diagonal()
        if np.any(d <= 0):
            raise NotSPDError("not SPD: nonpositive diagonal entry")
        minv = 1.0 / d
    elif precond is None:
        minv = np.ones(n)
    else:
        raise ValueError(f"unknown preconditioner {precond!r}")
    r = b - A @ x
    z = minv * r
    p = z.copy()
    rz = r @ z
    for it in range(maxiter):
        res = np.linalg.norm(r) / bnorm
        if res <= rel_tol:
            return x
        Ap = A @ p
        pAp = p @ Ap
        if pAp <= 0:
            raise NotSPDError("not SPD: negative curvature p^T A p", res)
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        if callback is not None:
            callback(x)
        z = minv * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    res = np.linalg.norm(b - A @ x) / bnorm
    if res <= rel_tol:
        return x
    raise SolverError(f"CG did not converge in {maxiter} iterations (residual {res:.3e})", res)


def solve_direct(A, b, refine=1):
    """Sparse LU solve with a few steps of iterative refinement."""
    A = sp.csc_matrix(A)
    b = np.asarray(b, dtype=float)
    if A.shape[0] == 0:
        return np.zeros(0)
    lu = spla.splu(A)
    x = lu.solve(b)
    for _ in range(refine):
        x += lu.solve(b - A @ x)
    return x


def solve_dense(A, b, max_dim=64, singular_cond=1e14):
    """Partial-pivoted LU solve of a small dense system.

    Returns ``(x, cond)``; raises :class:`SingularMatrixError` when the
    matrix is singular to working precision.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("solve_dense needs a square matrix")
    if A.shape[0] > max_dim:
        raise ValueError(f"dense systems are limited to dimension {max_dim}")
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > singular_cond:
        raise SingularMatrixError("singular")
    lu, piv = sla.lu_factor(A)
    return sla.lu_solve((lu, piv), b), cond


def dual_norm(e, N):
    """sqrt(e^T N^{-1} e) for SPD ``N``."""
    e = np.asarray(e, dtype=float)
    if sp.issparse(N):
        x = solve_direct(N, e, refine=2)
    else:
        x = sla.solve(np.asarray(N, dtype=float), e, assume_a="pos")
    return float(np.sqrt(max(e @ x, 0.0)))


# ----------------------------------------------------------------------
def _symmetric_inertia(A):
    """Number of negative pivots of a symmetric sparse matrix, or None when
    the factorization did not keep a symmetric ordering."""
    try:
        lu = spla.splu(sp.csc_matrix(A), permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                       options=dict(SymmetricMode=True))
    except RuntimeError:
        return None  # exactly singular
    if not np.array_equal(lu.perm_r, lu.perm_c):
        return None
    d = lu.U.diagonal()
    return int(np.sum(d < 0)), int(np.sum(d == 0))


def min_generalized_eig(A_sym, N, tol=1e-6, seed=0):
    """Smallest eigenvalue of the pencil ``(A_sym, N)`` and its vector.

    Small problems use a dense symmetric eigensolver. Larger ones use
    shift-invert Lanczos at zero (inverse iteration accelerated by a Krylov
    space) once a symmetric LDL^T inertia count shows that ``A_sym`` is
    positive definite; indefinite pencils fall back to the smallest
    algebraic eigenvalue, which is then negative.
    """
    n = A_sym.shape[0]
    if n <= DENSE_EIG_LIMIT:
        Ad = A_sym.toarray() if sp.issparse(A_sym) else np.asarray(A_sym, dtype=float)
        Nd = N.toarray() if sp.issparse(N) else np.asarray(N, dtype=float)
        w, v = sla.eigh(Ad, Nd, subset_by_index=[0, 0])
        return float(w[0]), v[:, 0]
    A_sym = sp.csc_matrix(A_sym)
    N = sp.csc_matrix(N)
    v0 = np.random.default_rng(seed).standard_normal(n)
    inertia = _symmetric_inertia(A_sym)
    if inertia is not None and inertia == (0, 0):
        w, v = spla.eigsh(A_sym, k=1, M=N, sigma=0.0, which="LM", v0=v0, tol=tol * 1e-2)
        return float(w[0]), v[:, 0]
    lu = spla.splu(N)
    Minv = spla.LinearOperator((n, n), matvec=lu.solve)
    w, v = spla.eigsh(A_sym, k=1, M=N, Minv=Minv, which="SA", v0=v0, tol=tol * 1e-2,
                      maxiter=50 * n)
    return float(w[0]), v[:, 0]


def max_generalized_eig(A, B):
    """Largest eigenvalue of a small dense pencil (B SPD)."""
    w = sla.eigh(np.asarray(A, dtype=float), np.asarray(B, dtype=float), eigvals_only=True)
    return float(w[-1])
