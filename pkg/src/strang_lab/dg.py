"""Symmetric weighted interior penalty (SWIP) discontinuous Galerkin method
on polygonal meshes.

Jumps and averages use the fixed face orientation: [v] = v_T1 - v_T2 and
{w} = w1 w_T1 + w2 w_T2, with n_F the outward normal of T1. On boundary
faces [v] = {v} = v. Dirichlet data enter through Nitsche terms.
"""

import warnings

import numpy as np
import scipy.sparse as sp

from .framework import DiscreteScheme
from .linalg import max_generalized_eig
from .polybasis import CellBasis, l2_project, poly_dim

DG_DEGREES = (1, 2, 3)


def dg_weights(delta1, delta2):
    """Diffusion-dependent weights and the harmonic face diffusivity.

    Returns ``(w1, w2, lam_F)`` with w1 = sqrt(d2) / (sqrt(d1) + sqrt(d2))
    and lam_F = 2 d1 d2 / (d1 + d2).
    """
    if not (delta1 > 0 and delta2 > 0):
        raise ValueError("face diffusivities must be positive")
    s1, s2 = np.sqrt(delta1), np.sqrt(delta2)
    w1 = s2 / (s1 + s2)
    return w1, 1.0 - w1, 2.0 * delta1 * delta2 / (delta1 + delta2)


def face_data(mesh, field, f):
    """(delta_T1F, delta_T2F or None, w1, w2, lam_F) for face ``f``."""
    n = mesh.face_normal[f]
    t1, t2 = mesh.face_cells[f]
    d1 = field.tensor(int(mesh.subdomain[t1])) @ n @ n
    if t2 < 0:
        return d1, None, 1.0, 0.0, d1
    d2 = field.tensor(int(mesh.subdomain[t2])) @ n @ n
    w1, w2, lam = dg_weights(d1, d2)
    return d1, d2, w1, w2, lam


def jump_avg_eval(mesh, field, f, left, right, pts):
    """Jump and weighted average of K grad . n_F at points of face ``f``.

    ``left`` and ``right`` are ``(value, grad)`` pairs of callables for the
    restrictions to T1 and T2 (``right`` is ignored on boundary faces).
    """
    pts = np.atleast_2d(pts)
    n = mesh.face_normal[f]
    t1, t2 = mesh.face_cells[f]
    _, _, w1, w2, _ = face_data(mesh, field, f)
    K1 = field.tensor(int(mesh.subdomain[t1]))
    v1, g1 = left[0](pts), left[1](pts)
    flux1 = g1 @ K1.T @ n
    if t2 < 0:
        return v1, flux1
    K2 = field.tensor(int(mesh.subdomain[t2]))
    v2, g2 = right[0](pts), right[1](pts)
    return v1 - v2, w1 * flux1 + w2 * (g2 @ K2.T @ n)


# ----------------------------------------------------------------------
def _cell_trace_ratio(cell, k, faces_q):
    basis = CellBasis.for_cell(cell, k)
    from .quadrature import polygon_quadrature

    q = polygon_quadrature(cell.vertices, 2 * k, cell.centroid)
    phi = basis.eval(q.nodes)
    MT = (phi * q.weights[:, None]).T @ phi
    best = 0.0
    for i, fq in enumerate(faces_q):
        pf = basis.eval(fq.nodes)
        MF = cell.lengths[i] * (pf * fq.weights[:, None]).T @ pf
        best = max(best, max_generalized_eig(MF, MT))
    return best


def ctr_estimate(mesh, k):
    """Discrete trace constant: max over (T, F) of sqrt(lambda_max) of
    (h_F M_F, M_T) on P^k(T)."""
    from .quadrature import segment_quadrature

    cache = {}
    best = 0.0
    for t in range(mesh.ncells):
        cell = mesh.cell(t)
        key = np.round((cell.vertices - cell.centroid) / cell.diameter, 12).tobytes()
        if key not in cache:
            fq = [segment_quadrature(*cell.edge(i), 2 * k) for i in range(cell.nfaces)]
            cache[key] = _cell_trace_ratio(cell, k, fq)
        best = max(best, cache[key])
    return float(np.sqrt(best))


def gamma_theory(eta, c_tr, n_faces):
    return (eta - c_tr ** 2 * n_faces) / (1.0 + eta)


# ----------------------------------------------------------------------
def dg_interpolate(mesh, k, case, extra=6):
    dim = poly_dim(k)
    out = np.empty(mesh.ncells * dim)
    for t in range(mesh.ncells):
        cell = mesh.cell(t)
        q = mesh.cell_quadrature(t, 2 * k + extra)
        sub = cell.subdomain
        out[t * dim:(t + 1) * dim] = l2_project(cell, lambda x: case.u(x, sub), k, quad=q)
    return out


def assemble_swip(mesh, field, k, eta, case, warn=True):
    """SWIP system, DG norm matrix and the theoretical coercivity constant."""
    if k not in DG_DEGREES:
        raise ValueError(f"DG degree must be one of {DG_DEGREES}")
    if eta <= 0:
        raise ValueError("penalty eta must be positive")
    field.check_mesh(mesh)
    dim = poly_dim(k)
    n = mesh.ncells * dim
    c_tr = ctr_estimate(mesh, k)
    n_faces = mesh.regularity_metrics().max_faces_per_cell
    g_th = gamma_theory(eta, c_tr, n_faces)
    if warn and eta <= c_tr ** 2 * n_faces:
        warnings.warn(f"eta = {eta} is below the coercivity threshold C_tr^2 N = "
                      f"{c_tr ** 2 * n_faces:.3f}; coercivity is checked numerically",
                      stacklevel=2)
    rows, cols, A_vals, N_vals = [], [], [], []
    b = np.zeros(n)
    bases = [CellBasis.for_cell(mesh.cell(t), k) for t in range(mesh.ncells)]
    cache = {}

    def block(idx_r, idx_c, A, N):
        rows.append(np.repeat(idx_r, len(idx_c)))
        cols.append(np.tile(idx_c, len(idx_r)))
        A_vals.append(A.ravel())
        N_vals.append(N.ravel())

    for t in range(mesh.ncells):
        sub = int(mesh.subdomain[t])
        K = field.tensor(sub)
        basis = bases[t]
        cell = mesh.cell(t)
        key = (np.round((cell.vertices - cell.point) / cell.diameter, 13).tobytes(),
               round(cell.diameter, 14), K.tobytes())
        S = cache.get(key)
        if S is None:
            q = mesh.cell_quadrature(t, 2 * k)
            g = basis.grad(q.nodes)
            S = np.einsum("q,qia,ab,qjb->ij", q.weights, g, K, g)
            cache[key] = S
        idx = t * dim + np.arange(dim)
        block(idx, idx, S, S)
        q = mesh.cell_quadrature(t, 2 * k + 6)
        b[idx] += basis.eval(q.nodes).T @ (q.weights * case.f(q.nodes, sub))

    for f in range(mesh.nfaces):
        t1, t2 = (int(x) for x in mesh.face_cells[f])
        q = mesh.face_quadrature(f, 2 * k + 2)
        nF = mesh.face_normal[f]
        hF = mesh.face_length[f]
        _, _, w1, w2, lam = face_data(mesh, field, f)
        K1 = field.tensor(int(mesh.subdomain[t1]))
        p1 = bases[t1].eval(q.nodes)
        a1 = bases[t1].grad(q.nodes) @ (K1 @ nF)
        if t2 >= 0:
            K2 = field.tensor(int(mesh.subdomain[t2]))
            p2 = bases[t2].eval(q.nodes)
            a2 = bases[t2].grad(q.nodes) @ (K2 @ nF)
            J = np.hstack([p1, -p2])
            Avg = np.hstack([w1 * a1, w2 * a2])
            idx = np.concatenate([t1 * dim + np.arange(dim), t2 * dim + np.arange(dim)])
        else:
            J, Avg = p1, a1
            idx = t1 * dim + np.arange(dim)
        W = q.weights[:, None]
        JJ = (J * W).T @ J
        JA = (J * W).T @ Avg
        pen = lam / hF
        block(idx, idx, -JA - JA.T + eta * pen * JJ, pen * JJ)
        if t2 < 0:
            g = case.u(q.nodes, int(mesh.subdomain[t1]))
            b[idx] += -(Avg * W).T @ g + eta * pen * (J * W).T @ g

    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    A = sp.csr_matrix((np.concatenate(A_vals), (rows, cols)), shape=(n, n))
    N = sp.csr_matrix((np.concatenate(N_vals), (rows, cols)), shape=(n, n))
    A = (0.5 * (A + A.T)).tocsr()
    N = (0.5 * (N + N.T)).tocsr()
    return DiscreteScheme(
        label=f"dg{k}", mesh=mesh, case=case, A=A, b=b, N_X=N, N_Y=N,
        free=np.arange(n), pinned=np.zeros(0, dtype=np.int64), pinned_values=np.zeros(0),
        n_full=n, interpolate=lambda c: dg_interpolate(mesh, k, c),
        R=sp.identity(n, format="csr"), recon_degree=k, symmetric=True,
        gamma_theory=g_th,
        meta=dict(k=k, eta=eta, c_tr=c_tr, n_faces=n_faces,
                  threshold=c_tr ** 2 * n_faces))
