"""Finite volume schemes: hybrid (cell + face unknowns) with TPFA or HMM
fluxes, and cell-centred MPFA-L/G type schemes built from group gradients.

Sign convention: a flux F_TF approximates -int_F K grad u . n_TF, the
outflow of T through F.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .framework import DiscreteScheme, reduce_system, restrict
from .linalg import SingularMatrixError, is_symmetric, max_generalized_eig, solve_dense


class AdmissibilityError(ValueError):
    """Mesh points do not satisfy the K-orthogonality needed by TPFA."""


@dataclass
class FluxFamily:
    """Linear numerical fluxes.

    Hybrid families store, for each cell, a matrix ``W_T`` with
    ``F_TF(v) = sum_F' W_T[F, F'] (v_T - v_F')`` in the cell's face order.
    Cell-centred families store a sparse matrix ``phi`` whose row F gives
    F_{T1 F} as a functional of ``[cell values; boundary face data]``;
    the flux of the second neighbour is its negative.
    """

    kind: str
    label: str
    local: Optional[list] = None
    phi: Optional[sp.csr_matrix] = None
    meta: dict = field(default_factory=dict)

    def cell_rows(self, mesh, t):
        """Cell-centred: rows F_TF for the faces of ``t`` (dense, full width)."""
        if self.kind != "cell-centred":
            raise ValueError("cell_rows is for cell-centred families")
        faces = mesh.cell_faces[t]
        return self.phi[faces].toarray() * mesh.cell_signs[t][:, None]


def _lam_min(field, mesh, t):
    return field.cell_bounds(mesh, t)[0]


def _lam_max(field, mesh, t):
    return field.cell_bounds(mesh, t)[1]


# ----------------------------------------------------------------------
# hybrid fluxes
def check_tpfa_admissible(mesh, field, angle_tol=1e-8):
    for t in range(mesh.ncells):
        c = mesh.cell(t)
        K = field.tensor(c.subdomain)
        for i in range(c.nfaces):
            kn = K @ c.normals[i]
            dx = c.face_points[i] - c.point
            nd = np.linalg.norm(dx)
            if nd == 0.0:
                raise AdmissibilityError(f"cell {t}, face {c.faces[i]}: x_T coincides with x_F")
            cosang = dx @ kn / (nd * np.linalg.norm(kn))
            ang = np.arccos(np.clip(cosang, -1.0, 1.0))
            if ang > angle_tol:
                raise AdmissibilityError(
                    f"mesh not K-admissible at cell {t}, face {c.faces[i]} "
                    f"(angle {ang:.3e} rad between x_F - x_T and K n)")


def tpfa_fluxes(mesh, field, angle_tol=1e-8):
    """Two-point fluxes |F| |K n| (v_T - v_F) / |x_T - x_F|."""
    check_tpfa_admissible(mesh, field, angle_tol)
    local = []
    for t in range(mesh.ncells):
        c = mesh.cell(t)
        K = field.tensor(c.subdomain)
        kn = np.linalg.norm(c.normals @ K.T, axis=1)
        dist = np.linalg.norm(c.face_points - c.point, axis=1)
        local.append(np.diag(c.lengths * kn / dist))
    return FluxFamily("hybrid", "tpfa", local=local)


def hmm_gradient_matrix(cell, K):
    """Matrix of f -> G_T(f) = -(1/|T|) K^{-1} sum_F f_F (xbar_F - x_T)."""
    X = cell.face_midpoints - cell.point
    return -np.linalg.solve(K, X.T) / cell.area


def hmm_residual_matrix(cell, K):
    """Matrix of f -> (f_F + |F| K G_T(f) . n_TF)_F."""
    G = hmm_gradient_matrix(cell, K)
    return np.eye(cell.nfaces) + (cell.lengths[:, None] * cell.normals) @ K @ G


def hmm_local_matrix(cell, K, lam_max, stab_scale=1.0, B=None):
    """Matrix M with fluxes F = M^{-1} (v_T - v_F)."""
    X = cell.face_midpoints - cell.point
    R = hmm_residual_matrix(cell, K)
    if B is None:
        B = np.diag(stab_scale * cell.distances / (cell.lengths * lam_max))
    return X @ np.linalg.solve(K, X.T) / cell.area + R.T @ B @ R


def hmm_fluxes(mesh, field, stab_scale=1.0):
    """Mixed finite volume (HMM) fluxes with the diagonal stabilization
    B_FF = stab_scale d_TF / (|F| lambda_max)."""
    if stab_scale <= 0:
        raise ValueError("stab_scale must be positive")
    if not np.allclose(mesh.face_points, mesh.face_midpoint, atol=1e-14):
        mesh = mesh.with_points(face_points=mesh.face_midpoint)
    local = []
    for t in range(mesh.ncells):
        c = mesh.cell(t)
        K = field.tensor(c.subdomain)
        M = hmm_local_matrix(c, K, _lam_max(field, mesh, t), stab_scale)
        try:
            W = np.linalg.inv(M)
        except np.linalg.LinAlgError:
            raise SingularMatrixError(f"HMM local system singular in cell {t}") from None
        local.append(0.5 * (W + W.T))
    return FluxFamily("hybrid", "hmm", local=local, meta=dict(stab_scale=stab_scale))


def hybrid_flux_values(mesh, family, v_full):
    """List of per-cell flux arrays for a full hybrid vector
    ``[v_T (cells); v_F (faces)]``."""
    nc = mesh.ncells
    out = []
    for t in range(nc):
        dv = v_full[t] - v_full[nc + mesh.cell_faces[t]]
        out.append(family.local[t] @ dv)
    return out


# ----------------------------------------------------------------------
# cell-centred MPFA fluxes
@dataclass
class GroupGradient:
    cell: int                 # T_G
    vertex: int               # global vertex id shared by the faces
    faces: tuple              # global face ids
    A: np.ndarray             # 2 x 2
    cols: np.ndarray          # columns of B_G: [cells; nc + boundary index]
    B: np.ndarray             # 2 x len(cols)
    gradient: Optional[np.ndarray]  # A^{-1} B, None if singular
    cond: float

    @property
    def invertible(self):
        return self.gradient is not None


def _boundary_index(mesh):
    bidx = np.full(mesh.nfaces, -1, dtype=np.int64)
    bidx[mesh.boundary_faces] = np.arange(len(mesh.boundary_faces))
    return bidx


def _local_face(mesh, t, f):
    return int(np.flatnonzero(mesh.cell_faces[t] == f)[0])


def mpfa_group_gradient(mesh, field, cell, local_vertex):
    """Group gradient for the two faces of ``cell`` meeting at its
    ``local_vertex``-th vertex.

    Rows impose continuity of values and of normal fluxes of the piecewise
    affine reconstruction across each face; boundary rows match the face
    data at the face centroid.
    """
    nc = mesh.ncells
    bidx = _boundary_index(mesh)
    cv = mesh.cell(cell)
    n = cv.nfaces
    i_faces = ((local_vertex - 1) % n, local_vertex)
    KG = field.tensor(cv.subdomain)
    xG = cv.point
    A = np.zeros((2, 2))
    cols = [cell]
    rows_b = []
    for r, i in enumerate(i_faces):
        f = int(cv.faces[i])
        nG = cv.normals[i]
        t1, t2 = mesh.face_cells[f]
        if t2 >= 0:
            other = int(t2 if t1 == cell else t1)
            j = _local_face(mesh, other, f)
            KT = field.tensor(int(mesh.subdomain[other]))
            delta = (KT @ nG) @ nG
            d = mesh.cell_distances[other][j]
            A[r] = delta / d * (mesh.cell_points[other] - xG) + (KG - KT) @ nG
            rows_b.append((other, delta / d))
        else:
            delta = (KG @ nG) @ nG
            d = cv.distances[i]
            A[r] = delta / d * (mesh.face_midpoint[f] - xG)
            rows_b.append((nc + int(bidx[f]), delta / d))
    for c, _ in rows_b:
        cols.append(c)
    cols = np.array(cols, dtype=np.int64)
    B = np.zeros((2, len(cols)))
    for r, (c, w) in enumerate(rows_b):
        B[r, 0] -= w
        B[r, r + 1] += w
    try:
        X, cond = solve_dense(A, B)
        grad = X
    except SingularMatrixError:
        grad, cond = None, np.inf
    faces = tuple(int(cv.faces[i]) for i in i_faces)
    vertex = int(mesh.cells[cell][local_vertex])
    return GroupGradient(cell, vertex, faces, A, cols, B, grad, cond)


def all_groups(mesh, field):
    return [mpfa_group_gradient(mesh, field, t, i)
            for t in range(mesh.ncells) for i in range(len(mesh.cells[t]))]


MPFA_STRATEGIES = ("uniform", "l", "g")


def mpfa_fluxes(mesh, field, strategy="uniform"):
    """Convex combinations of group-gradient fluxes.

    ``uniform`` averages over the invertible groups of a face, ``l`` keeps
    the best conditioned group (L-proxy) and ``g`` weights groups by the
    inverse condition number (G-proxy).
    """
    strategy = strategy.lower()
    if strategy not in MPFA_STRATEGIES:
        raise ValueError(f"unknown MPFA strategy {strategy!r}")
    if not np.allclose(mesh.face_points, mesh.face_midpoint, atol=1e-14):
        mesh = mesh.with_points(face_points=mesh.face_midpoint)
    nc = mesh.ncells
    nb = len(mesh.boundary_faces)
    per_face = [[] for _ in range(mesh.nfaces)]
    for g in all_groups(mesh, field):
        if not g.invertible:
            continue
        cv_KG = field.tensor(int(mesh.subdomain[g.cell]))
        for f in g.faces:
            i = _local_face(mesh, g.cell, f)
            n_out = mesh.face_normal[f] * mesh.cell_signs[g.cell][i]
            # F_{T_G F} = -|F| (K_G grad) . n_{T_G F}; store as F_{T1 F}
            row = -mesh.face_length[f] * (cv_KG @ n_out) @ g.gradient
            row = row * mesh.cell_signs[g.cell][i]
            per_face[f].append((g, row))
    rows, cols, vals = [], [], []
    weights = []
    for f in range(mesh.nfaces):
        cand = per_face[f]
        if not cand:
            raise SingularMatrixError(f"face {f} has no invertible group")
        conds = np.array([g.cond for g, _ in cand])
        if strategy == "uniform":
            th = np.full(len(cand), 1.0 / len(cand))
        elif strategy == "l":
            th = np.zeros(len(cand))
            th[int(np.argmin(conds))] = 1.0
        else:
            th = 1.0 / conds
            th /= th.sum()
        weights.append(th)
        for w, (g, row) in zip(th, cand):
            if w == 0.0:
                continue
            rows.extend([f] * len(g.cols))
            cols.extend(g.cols.tolist())
            vals.extend((w * row).tolist())
    phi = sp.csr_matrix((vals, (rows, cols)), shape=(mesh.nfaces, nc + nb))
    phi.sum_duplicates()
    labels = dict(uniform="mpfa-uniform", l="mpfa-l", g="mpfa-g")
    return FluxFamily("cell-centred", labels[strategy], phi=phi,
                      meta=dict(strategy=strategy, weights=weights,
                                groups_per_face=[len(c) for c in per_face]))


# ----------------------------------------------------------------------
# norms
def hybrid_norm_matrix(mesh, field):
    """sum_T lambda_T sum_F |F| / d_TF (v_T - v_F)^2 on [cells; faces]."""
    nc = mesh.ncells
    rows, cols, vals = [], [], []
    for t in range(nc):
        f = mesh.cell_faces[t]
        w = _lam_min(field, mesh, t) * mesh.face_length[f] / mesh.cell_distances[t]
        idx = nc + f
        rows += [t] * len(f) + idx.tolist() + [t] * len(f) + idx.tolist()
        cols += [t] * len(f) + idx.tolist() + idx.tolist() + [t] * len(f)
        vals += w.tolist() + w.tolist() + (-w).tolist() + (-w).tolist()
    n = nc + mesh.nfaces
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def face_jump_matrix(mesh):
    """J with (J v)_F = v_T1 - v_T2 (boundary: v_T1)."""
    fc = mesh.face_cells
    rows = np.arange(mesh.nfaces)
    inner = mesh.internal_faces
    r = np.concatenate([rows, inner])
    c = np.concatenate([fc[:, 0], fc[inner, 1]])
    v = np.concatenate([np.ones(mesh.nfaces), -np.ones(len(inner))])
    return sp.csr_matrix((v, (r, c)), shape=(mesh.nfaces, mesh.ncells))


def cellcentred_face_weights(mesh, field):
    """(lambda_F, d_F) per face."""
    lam = np.array([_lam_min(field, mesh, t) for t in range(mesh.ncells)])
    lam_f = np.empty(mesh.nfaces)
    d_f = np.zeros(mesh.nfaces)
    for t in range(mesh.ncells):
        for i, f in enumerate(mesh.cell_faces[t]):
            d_f[f] += mesh.cell_distances[t][i]
    t1, t2 = mesh.face_cells[:, 0], mesh.face_cells[:, 1]
    lam_f[:] = lam[t1]
    inner = t2 >= 0
    lam_f[inner] = np.minimum(lam[t1[inner]], lam[t2[inner]])
    return lam_f, d_f


def cellcentred_norm_matrix(mesh, field):
    J = face_jump_matrix(mesh)
    lam_f, d_f = cellcentred_face_weights(mesh, field)
    return (J.T @ sp.diags(lam_f * mesh.face_length / d_f) @ J).tocsr()


# ----------------------------------------------------------------------
def _cell_load(mesh, f, degree=6):
    b = np.empty(mesh.ncells)
    for t in range(mesh.ncells):
        q = mesh.cell_quadrature(t, degree)
        b[t] = q.weights @ f(q.nodes, int(mesh.subdomain[t]))
    return b


def _cell_values(mesh, fn, pts=None):
    pts = mesh.cell_points if pts is None else pts
    out = np.empty(mesh.ncells)
    for s in np.unique(mesh.subdomain):
        m = mesh.subdomain == s
        out[m] = fn(pts[m], int(s))
    return out


def hybrid_interpolate(mesh, case):
    """[u(x_T); u(x_F)]."""
    return np.concatenate([_cell_values(mesh, case.u), case.u(mesh.face_points)])


def assemble_hybrid_fv(mesh, field, fluxes, case, label=None):
    """Hybrid FV scheme a_h(u, v) = sum_T sum_F F_TF(u) (v_T - v_F) with
    boundary face values pinned to u(x_F)."""
    if fluxes.kind != "hybrid":
        raise ValueError("hybrid assembly needs a hybrid flux family")
    if fluxes.label == "hmm" and not np.allclose(mesh.face_points, mesh.face_midpoint, atol=1e-14):
        mesh = mesh.with_points(face_points=mesh.face_midpoint)
    nc, nf = mesh.ncells, mesh.nfaces
    n = nc + nf
    rows, cols, vals = [], [], []
    for t in range(nc):
        W = fluxes.local[t]
        idx = np.concatenate([[t], nc + mesh.cell_faces[t]])
        # local map D: (v_T - v_F)_F = D @ v[idx]
        D = np.hstack([np.ones((len(W), 1)), -np.eye(len(W))])
        Aloc = D.T @ W @ D
        rows.append(np.repeat(idx, len(idx)))
        cols.append(np.tile(idx, len(idx)))
        vals.append(Aloc.ravel())
    A_full = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                           shape=(n, n))
    b_full = np.zeros(n)
    b_full[:nc] = _cell_load(mesh, case.f)
    pinned = nc + mesh.boundary_faces
    iu_full = hybrid_interpolate(mesh, case)
    pv = iu_full[pinned]
    A, b, free = reduce_system(A_full, b_full, pinned, pv)
    N = restrict(hybrid_norm_matrix(mesh, field), free)
    R = sp.hstack([sp.identity(nc), sp.csr_matrix((nc, nf))]).tocsr()
    sym = bool(all(np.allclose(W, W.T, rtol=0, atol=1e-13 * np.abs(W).max()) for W in fluxes.local))
    return DiscreteScheme(
        label=label or fluxes.label, mesh=mesh, case=case, A=A, b=b, N_X=N, N_Y=N,
        free=free, pinned=pinned, pinned_values=pv, n_full=n,
        interpolate=lambda c: hybrid_interpolate(mesh, c), R=R, recon_degree=0,
        symmetric=sym, l2_mode="interpolant",
        meta=dict(fluxes=fluxes, A_full=A_full, b_full=b_full, kind="hybrid"))


def cellcentred_interpolate(mesh, case):
    """[u(x_T); u(xbar_F) on boundary faces]."""
    return np.concatenate([_cell_values(mesh, case.u),
                           case.u(mesh.face_midpoint[mesh.boundary_faces])])


def assemble_cellcentred_fv(mesh, field, fluxes, case, label=None):
    """Cell-centred FV scheme sum_F F_TF(u_h) = int_T f with boundary data
    u(xbar_F) entering the fluxes of boundary faces."""
    if fluxes.kind != "cell-centred":
        raise ValueError("cell-centred assembly needs a cell-centred flux family")
    nc = mesh.ncells
    nb = len(mesh.boundary_faces)
    J = face_jump_matrix(mesh)
    A_full = (J.T @ fluxes.phi).tocsr()  # nc x (nc + nb)
    # square up with identity rows for the boundary data
    A_sq = sp.vstack([A_full, sp.hstack([sp.csr_matrix((nb, nc)), sp.identity(nb)])]).tocsr()
    b_full = np.concatenate([_cell_load(mesh, case.f), np.zeros(nb)])
    pinned = nc + np.arange(nb)
    iu_full = cellcentred_interpolate(mesh, case)
    pv = iu_full[pinned]
    A, b, free = reduce_system(A_sq, b_full, pinned, pv)
    N = cellcentred_norm_matrix(mesh, field)
    R = sp.hstack([sp.identity(nc), sp.csr_matrix((nc, nb))]).tocsr()
    return DiscreteScheme(
        label=label or fluxes.label, mesh=mesh, case=case, A=A, b=b, N_X=N, N_Y=N,
        free=free, pinned=pinned, pinned_values=pv, n_full=nc + nb,
        interpolate=lambda c: cellcentred_interpolate(mesh, c), R=R, recon_degree=0,
        symmetric=is_symmetric(A), l2_mode="interpolant",
        meta=dict(fluxes=fluxes, kind="cell-centred"))


# ----------------------------------------------------------------------
def exact_face_fluxes(mesh, case, t, degree=6):
    """int_F K_T grad u|_T . n_TF for the faces of ``t``."""
    sub = int(mesh.subdomain[t])
    K = case.field.tensor(sub)
    c = mesh.cell(t)
    out = np.empty(c.nfaces)
    for i, f in enumerate(c.faces):
        q = mesh.face_quadrature(int(f), degree)
        out[i] = q.weights @ (case.grad(q.nodes, sub) @ K.T @ c.normals[i])
    return out


@dataclass
class FluxResiduals:
    residuals: list     # per cell (hybrid) or per face (cell-centred)
    aggregate: float


def flux_consistency_residuals(mesh, field, fluxes, case, degree=6):
    """Residuals int_F K grad u . n_TF + F_TF(I_h u) and their weighted
    aggregate, the right-hand side of the FV energy estimate (gamma = 1)."""
    if fluxes.kind == "hybrid":
        if fluxes.label == "hmm":
            mesh = mesh.with_points(face_points=mesh.face_midpoint)
        iu = hybrid_interpolate(mesh, case)
        vals = hybrid_flux_values(mesh, fluxes, iu)
        res, tot = [], 0.0
        for t in range(mesh.ncells):
            r = exact_face_fluxes(mesh, case, t, degree) + vals[t]
            res.append(r)
            d = mesh.cell_distances[t]
            tot += ((d / mesh.face_length[mesh.cell_faces[t]]) * r ** 2).sum() / _lam_min(field, mesh, t)
        return FluxResiduals(res, float(np.sqrt(tot)))
    iu = cellcentred_interpolate(mesh, case)
    F = fluxes.phi @ iu
    lam_f, d_f = cellcentred_face_weights(mesh, field)
    r = np.empty(mesh.nfaces)
    for f in range(mesh.nfaces):
        t = int(mesh.face_cells[f, 0])
        i = _local_face(mesh, t, f)
        sub = int(mesh.subdomain[t])
        q = mesh.face_quadrature(f, degree)
        n = mesh.face_normal[f] * mesh.cell_signs[t][i]
        r[f] = q.weights @ (case.grad(q.nodes, sub) @ field.tensor(sub).T @ n) + F[f]
    agg = np.sqrt(np.sum(d_f / (lam_f * mesh.face_length) * r ** 2))
    return FluxResiduals(list(r), float(agg))


def conservativity_defect(mesh, fluxes, v_full=None):
    """Largest |F_TF + F_T'F| over internal faces.

    Cell-centred families are checked coefficient-wise on the functionals;
    hybrid ones on the flux values of ``v_full`` (typically the discrete
    solution, whose face equations impose conservativity).
    """
    inner = mesh.internal_faces
    if fluxes.kind == "cell-centred":
        worst = 0.0
        for f in inner:
            t1, t2 = mesh.face_cells[f]
            r1 = fluxes.cell_rows(mesh, t1)[_local_face(mesh, t1, f)]
            r2 = fluxes.cell_rows(mesh, t2)[_local_face(mesh, t2, f)]
            worst = max(worst, float(np.abs(r1 + r2).max()))
        return worst
    if v_full is None:
        raise ValueError("hybrid conservativity is checked on a discrete function")
    vals = hybrid_flux_values(mesh, fluxes, v_full)
    worst = 0.0
    for f in inner:
        t1, t2 = mesh.face_cells[f]
        worst = max(worst, abs(vals[t1][_local_face(mesh, t1, f)]
                               + vals[t2][_local_face(mesh, t2, f)]))
    return worst


def balance_defect(scheme, uh):
    """Largest relative |sum_F F_TF(u_h) - int_T f| over cells."""
    mesh = scheme.mesh
    fam = scheme.meta["fluxes"]
    v = scheme.full(uh)
    load = _cell_load(mesh, scheme.case.f)
    if fam.kind == "hybrid":
        vals = hybrid_flux_values(mesh, fam, v)
        sums = np.array([s.sum() for s in vals])
        fmax = max(np.abs(s).max() for s in vals)
    else:
        F = fam.phi @ v
        sums = face_jump_matrix(mesh).T @ F
        fmax = np.abs(F).max()
    scale = max(np.abs(load).max(), fmax, 1e-300)
    return float(np.abs(sums - load).max() / scale)


@dataclass
class FluxQuality:
    linear_exactness: float
    C_b: Optional[float]
    gamma: Optional[float]


def linear_exactness_residual(mesh, field, fluxes, n_probe=20, seed=0):
    """Max over seeded random affine L of |F_TF(I_h L) + |F| K grad L . n_TF|,
    relative to the exact flux size."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_probe):
        a = rng.standard_normal()
        g = rng.standard_normal(2)
        if fluxes.kind == "hybrid":
            v = np.concatenate([a + mesh.cell_points @ g, a + mesh.face_points @ g])
            vals = hybrid_flux_values(mesh, fluxes, v)
        else:
            nb = mesh.boundary_faces
            v = np.concatenate([a + mesh.cell_points @ g, a + mesh.face_midpoint[nb] @ g])
            F = fluxes.phi @ v
            vals = [F[mesh.cell_faces[t]] * mesh.cell_signs[t] for t in range(mesh.ncells)]
        for t in range(mesh.ncells):
            c = mesh.cell(t)
            K = field.tensor(c.subdomain)
            exact = -c.lengths * (c.normals @ (K @ g))
            scale = max(np.abs(exact).max(), 1e-300)
            worst = max(worst, float(np.abs(vals[t] - exact).max() / scale))
    return worst


def boundedness_constant(mesh, field, fluxes):
    """Smallest C_b with sum_F d_TF/|F| F_TF(v)^2 <= C_b lambda_max^2 |v|_{1,T}^2
    in every cell (dense generalized eigenproblem per cell)."""
    best = 0.0
    for t in range(mesh.ncells):
        W = fluxes.local[t]
        d = mesh.cell_distances[t]
        L = mesh.face_length[mesh.cell_faces[t]]
        lam = _lam_max(field, mesh, t)
        lhs = W.T @ np.diag(d / L) @ W
        rhs = lam ** 2 * np.diag(L / d)
        best = max(best, max_generalized_eig(lhs, rhs))
    return best


def tpfa_boundedness_closed_form(mesh, field):
    """max d^2 |K n|^2 / (lambda_max^2 |x_T - x_F|^2); for isotropic K this is
    max d^2 / |x_T - x_F|^2."""
    best = 0.0
    for t in range(mesh.ncells):
        c = mesh.cell(t)
        K = field.tensor(c.subdomain)
        lam = _lam_max(field, mesh, t)
        kn = np.linalg.norm(c.normals @ K.T, axis=1)
        dist = np.linalg.norm(c.face_points - c.point, axis=1)
        best = max(best, float(np.max(c.distances ** 2 * kn ** 2 / (lam ** 2 * dist ** 2))))
    return best


def flux_quality_checks(mesh, field, fluxes, case=None, n_probe=20, seed=0):
    """Linear exactness, boundedness constant (hybrid only) and coercivity."""
    from .framework import stability_constant
    from .model import case_affine

    if case is None:
        case = case_affine(K=field.tensor(0)) if field.nsub == 1 else None
    lin = linear_exactness_residual(mesh, field, fluxes, n_probe, seed)
    cb = boundedness_constant(mesh, field, fluxes) if fluxes.kind == "hybrid" else None
    gamma = None
    if case is not None:
        if fluxes.kind == "hybrid":
            s = assemble_hybrid_fv(mesh, field, fluxes, case)
        else:
            s = assemble_cellcentred_fv(mesh, field, fluxes, case)
        gamma = stability_constant(s).gamma
    return FluxQuality(lin, cb, gamma)


# ----------------------------------------------------------------------
FV_SCHEMES = ("tpfa", "hmm", "mpfa-uniform", "mpfa-l", "mpfa-g")


def build_fv(name, mesh, case, stab_scale=1.0):
    """Assemble one of the named FV schemes for ``case``."""
    field = case.field
    if name == "tpfa":
        return assemble_hybrid_fv(mesh, field, tpfa_fluxes(mesh, field), case)
    if name == "hmm":
        m = mesh.with_points(face_points=mesh.face_midpoint)
        return assemble_hybrid_fv(m, field, hmm_fluxes(m, field, stab_scale), case)
    if name.startswith("mpfa-"):
        m = mesh.with_points(face_points=mesh.face_midpoint)
        return assemble_cellcentred_fv(m, field, mpfa_fluxes(m, field, name[5:]), case)
    raise KeyError(f"unknown FV scheme {name!r}")
