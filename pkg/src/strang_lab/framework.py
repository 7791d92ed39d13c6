"""Abstract error analysis: discrete schemes, consistency errors, stability
constants, the energy bound with its converse, and the Aubin-Nitsche identity.

Every scheme is reduced to a linear system on its free unknowns. Unknowns
that carry Dirichlet data are pinned and eliminated; their values enter the
right-hand side and the reconstruction offsets.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .linalg import dual_norm, is_symmetric, min_generalized_eig, solve_direct
from .polybasis import CellBasis, poly_dim


class NonCoerciveError(RuntimeError):
    """Raised when a bound check needs gamma > 0 and the scheme has gamma <= 0."""


# ----------------------------------------------------------------------
class PiecewisePolynomial:
    """Broken polynomial of degree ``degree`` in the scaled monomial basis of
    each cell; ``coef`` has shape (ncells, dim)."""

    def __init__(self, mesh, degree, coef):
        self.mesh = mesh
        self.degree = int(degree)
        self.coef = np.asarray(coef, dtype=float).reshape(mesh.ncells, poly_dim(degree))

    def basis(self, t):
        return CellBasis.for_cell(self.mesh.cell(t), self.degree)

    def __call__(self, t, pts):
        return self.basis(t).eval(pts) @ self.coef[t]

    def grad(self, t, pts):
        return np.einsum("qia,i->qa", self.basis(t).grad(pts), self.coef[t])

    def _qdeg(self, extra):
        return 2 * self.degree + extra

    def l2_error(self, u, extra=6):
        """||self - u||_{L2}, ``u(pts, sub)`` evaluated cell by cell."""
        tot = 0.0
        for t in range(self.mesh.ncells):
            q = self.mesh.cell_quadrature(t, self._qdeg(extra))
            e = self(t, q.nodes) - u(q.nodes, int(self.mesh.subdomain[t]))
            tot += q.weights @ e ** 2
        return float(np.sqrt(tot))

    def energy_error(self, grad, field, extra=6):
        """||K^{1/2}(grad_h self - grad u)||_{L2}."""
        tot = 0.0
        for t in range(self.mesh.ncells):
            sub = int(self.mesh.subdomain[t])
            q = self.mesh.cell_quadrature(t, self._qdeg(extra))
            ge = self.grad(t, q.nodes) - grad(q.nodes, sub)
            tot += q.weights @ np.einsum("qa,ab,qb->q", ge, field.tensor(sub), ge)
        return float(np.sqrt(tot))

    def integrate_against(self, f, extra=6):
        """sum_T int_T f * self."""
        tot = 0.0
        for t in range(self.mesh.ncells):
            q = self.mesh.cell_quadrature(t, self._qdeg(extra))
            tot += q.weights @ (f(q.nodes, int(self.mesh.subdomain[t])) * self(t, q.nodes))
        return float(tot)


def cell_moments(mesh, degree, f, extra=6):
    """Stacked vectors (int_T f m_a)_a over all cells, length ncells * dim."""
    out = np.zeros((mesh.ncells, poly_dim(degree)))
    for t in range(mesh.ncells):
        basis = CellBasis.for_cell(mesh.cell(t), degree)
        q = mesh.cell_quadrature(t, 2 * degree + extra)
        out[t] = basis.eval(q.nodes).T @ (q.weights * f(q.nodes, int(mesh.subdomain[t])))
    return out.ravel()


# ----------------------------------------------------------------------
@dataclass
class DiscreteScheme:
    """An assembled linear scheme A u = b on the free unknowns.

    ``interpolate(case)`` returns the interpolant of the case's exact solution
    on the full unknown vector. ``R`` (optional) maps a full unknown vector to
    stacked cell coefficients of the reconstruction r_h of degree
    ``recon_degree``.
    """

    label: str
    mesh: object
    case: object
    A: sp.csr_matrix
    b: np.ndarray
    N_X: sp.csr_matrix
    N_Y: sp.csr_matrix
    free: np.ndarray
    pinned: np.ndarray
    pinned_values: np.ndarray
    n_full: int
    interpolate: Callable
    R: Optional[sp.csr_matrix] = None
    recon_degree: int = 0
    symmetric: bool = True
    norm_is_energy: bool = False  # N_X = N_Y = A
    gamma_theory: Optional[float] = None
    l2_mode: str = "solution"  # or "interpolant" (measure r_h(u_h - I_h u))
    meta: dict = field(default_factory=dict)
    _icache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        n = len(self.free)
        if self.A.shape != (n, n) or len(self.b) != n:
            raise ValueError("inconsistent system dimensions")
        if self.N_X.shape != (n, n) or self.N_Y.shape != (n, n):
            raise ValueError("inconsistent norm dimensions")
        if self.symmetric and not is_symmetric(self.A):
            raise ValueError(f"{self.label}: matrix flagged symmetric is not")

    @property
    def ndof(self):
        return len(self.free)

    def full(self, v_free, lifted=True):
        """Full unknown vector; pinned entries take the Dirichlet values
        (``lifted``) or zero."""
        v = np.zeros(self.n_full)
        v[self.free] = v_free
        if lifted:
            v[self.pinned] = self.pinned_values
        return v

    def interpolant(self, case=None):
        """Free part of I_h of the case's exact solution."""
        case = self.case if case is None else case
        key = id(case)
        if key not in self._icache:
            self._icache[key] = (case, self.interpolate(case)[self.free])
        return self._icache[key][1].copy()

    def reconstruct(self, v_free, lifted=True):
        if self.R is None:
            raise NotImplementedError(f"{self.label}: no reconstruction operator")
        return PiecewisePolynomial(self.mesh, self.recon_degree, self.R @ self.full(v_free, lifted))

    def recon_load(self, f):
        """Vector (g(r_h phi_i))_i for g(w) = (f, w) over the free basis."""
        if self.R is None:
            raise NotImplementedError(f"{self.label}: no reconstruction operator")
        m = cell_moments(self.mesh, self.recon_degree, f)
        return (self.R.T @ m)[self.free]

    def scaled(self, c):
        """Same scheme with A and b multiplied by ``c``."""
        from dataclasses import replace

        return replace(self, _icache={}, A=(c * self.A).tocsr(), b=c * self.b,
                       N_X=(c * self.N_X).tocsr() if self.norm_is_energy else self.N_X,
                       N_Y=(c * self.N_Y).tocsr() if self.norm_is_energy else self.N_Y)


def reduce_system(A_full, b_full, pinned, pinned_values):
    """Eliminate pinned unknowns; returns (A, b, free)."""
    A_full = sp.csr_matrix(A_full)
    n = A_full.shape[0]
    mask = np.ones(n, dtype=bool)
    mask[pinned] = False
    free = np.flatnonzero(mask)
    Aff = A_full[free][:, free].tocsr()
    b = np.asarray(b_full, dtype=float)[free] - A_full[free][:, pinned] @ pinned_values
    Aff.sum_duplicates()
    return Aff, b, free


def restrict(M, free):
    return sp.csr_matrix(M)[free][:, free].tocsr()


# ----------------------------------------------------------------------
def solve_scheme(s: DiscreteScheme):
    """Solve A u_h = b with sparse LU plus iterative refinement."""
    return solve_direct(s.A, s.b, refine=2)


def consistency_vector(s: DiscreteScheme, case=None, iu=None):
    """e = b - A I_h u on the free unknowns."""
    if iu is None:
        iu = s.interpolant(case)
    return s.b - s.A @ iu


def consistency_dual_norm(s: DiscreteScheme, case=None):
    return dual_norm(consistency_vector(s, case), s.N_Y)


def norm(s, v):
    return float(np.sqrt(max(v @ (s.N_X @ v), 0.0)))


@dataclass
class Stability:
    gamma: float
    vector: Optional[np.ndarray]
    gamma_theory: Optional[float]

    @property
    def coercive(self):
        return self.gamma > 0


def stability_constant(s: DiscreteScheme, tol=1e-6, seed=0):
    """Coercivity constant of the symmetric part of ``A`` against ``N_X``."""
    if s.norm_is_energy:
        return Stability(1.0, None, s.gamma_theory)
    Asym = s.A if s.symmetric else ((s.A + s.A.T) * 0.5).tocsr()
    g, v = min_generalized_eig(Asym, s.N_X, tol=tol, seed=seed)
    return Stability(g, v, s.gamma_theory)


def form_norm_estimate(s: DiscreteScheme, n_pairs=200, power_steps=20, seed=0):
    """Lower estimate of sup a_h(w, v) / (||w||_X ||v||_Y).

    Maximum over seeded random pairs, refined by a few power iterations on
    N_X^{-1} A^T N_Y^{-1} A.
    """
    rng = np.random.default_rng(seed)
    n = s.ndof
    W = rng.standard_normal((n, n_pairs))
    V = rng.standard_normal((n, n_pairs))
    aw = s.A @ W
    num = np.einsum("ij,ij->j", V, aw)
    nw = np.sqrt(np.einsum("ij,ij->j", W, s.N_X @ W))
    nv = np.sqrt(np.einsum("ij,ij->j", V, s.N_Y @ V))
    best = float(np.max(np.abs(num) / (nw * nv)))
    w = W[:, 0]
    luX = spla.splu(sp.csc_matrix(s.N_X))
    luY = luX if s.N_Y is s.N_X else spla.splu(sp.csc_matrix(s.N_Y))
    for _ in range(power_steps):
        y = luY.solve(s.A @ w)
        w = luX.solve(s.A.T @ y)
        nrm = np.sqrt(w @ (s.N_X @ w))
        if nrm == 0:
            break
        w /= nrm
        aw = s.A @ w
        best = max(best, float(np.sqrt(max(aw @ luY.solve(aw), 0.0))))
    return best


@dataclass
class BoundReport:
    err: float           # ||u_h - I_h u||_X
    gamma: float
    gamma_theory: Optional[float]
    dual: float          # ||E_h(u; .)||_{Y*}
    slack_upper: float   # dual / gamma - err
    form_norm: float
    form_norm_random: float
    slack_lower: float   # ||a_h|| err - dual
    scale: float
    residual: float      # relative residual of the error equation

    @property
    def ok(self):
        tol = 1e-9 * self.scale
        return self.slack_upper >= -tol and self.slack_lower >= -tol

    @property
    def rel_upper(self):
        return self.slack_upper / self.scale if self.scale > 0 else 0.0

    @property
    def rel_lower(self):
        return self.slack_lower / self.scale if self.scale > 0 else 0.0


def verify_energy_bound(s: DiscreteScheme, uh=None, stability=None, seed=0):
    """Energy bound err <= dual / gamma and its converse
    dual <= ||a_h|| err."""
    if stability is None:
        stability = stability_constant(s, seed=seed)
    if not stability.coercive:
        raise NonCoerciveError(f"{s.label}: gamma = {stability.gamma:.3e} <= 0")
    if uh is None:
        uh = solve_scheme(s)
    iu = s.interpolant()
    e = consistency_vector(s, iu=iu)
    delta = uh - iu
    # error equation A (u_h - I_h u) = e
    res = np.linalg.norm(s.A @ delta - e) / max(np.linalg.norm(s.b), np.linalg.norm(e), 1e-300)
    err = norm(s, delta)
    dual = dual_norm(e, s.N_Y)
    rand = form_norm_estimate(s, seed=seed)
    witness = dual / err if err > 0 else 0.0
    fn = max(rand, witness)
    # relative to the size of the discrete solution as well, so that exact
    # schemes (err ~ dual ~ round-off) are not judged on noise
    scale = max(err, dual / stability.gamma, norm(s, iu), 1e-300)
    return BoundReport(err=err, gamma=stability.gamma, gamma_theory=stability.gamma_theory,
                       dual=dual, slack_upper=dual / stability.gamma - err,
                       form_norm=fn, form_norm_random=rand,
                       slack_lower=fn * err - dual, scale=scale, residual=res)


@dataclass
class AubinNitsche:
    g_term: float        # g(r_h(u_h - I_h u)) by quadrature
    dual_term: float     # E*_h(z; u_h - I_h u)
    primal_dual: float   # E_h(u; I_h z)
    residual: float      # relative mismatch of the identity


def aubin_nitsche_identity(s: DiscreteScheme, dual_case, uh=None):
    """Check g(r_h(u_h - I_h u)) = E*_h(z; u_h - I_h u) + E_h(u; I_h z) for
    g(w) = (-div(K grad z), w)."""
    if s.R is None:
        raise NotImplementedError(f"{s.label}: no reconstruction operator")
    if uh is None:
        uh = solve_scheme(s)
    iu = s.interpolant()
    delta = uh - iu
    iz = s.interpolant(dual_case)
    g_term = s.reconstruct(delta, lifted=False).integrate_against(dual_case.f)
    e_star = s.recon_load(dual_case.f) - s.A.T @ iz
    dual_term = float(e_star @ delta)
    primal_dual = float(consistency_vector(s, iu=iu) @ iz)
    scale = max(abs(g_term), abs(dual_term), abs(primal_dual), 1e-300)
    return AubinNitsche(g_term, dual_term, primal_dual,
                        abs(g_term - dual_term - primal_dual) / scale)


# ----------------------------------------------------------------------
def error_measures(s: DiscreteScheme, uh):
    """(energy error, reconstructed energy error, L2 error); NaN where the
    scheme has no meaningful value."""
    iu = s.interpolant()
    err = norm(s, uh - iu)
    rec = l2 = np.nan
    if s.R is not None:
        case = s.case
        if s.l2_mode == "interpolant":
            l2 = s.reconstruct(uh - iu, lifted=False).l2_error(lambda x, sub: np.zeros(len(x)))
        else:
            ph = s.reconstruct(uh)
            l2 = ph.l2_error(case.u)
            if s.recon_degree > 0:
                rec = ph.energy_error(case.grad, case.field)
    return err, rec, l2
