"""Nonconforming virtual element method of degree k in {1, 2}.

Local DOFs of a cell, in order: for each face (cell loop order) the scaled
moments (1/|F|) int_F v m_j for j < k against the face basis with the
global tangent, then the cell moments (1/|T|) int_T v m_a for |a| <= k-2.
Face DOFs are shared by the two neighbours, which gives the continuity of
the face moments across internal faces.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .framework import DiscreteScheme, reduce_system
from .polybasis import CellBasis, FaceBasis, exponents, poly_dim

VEM_DEGREES = (1, 2)


def default_closure(k):
    return "boundary-mean" if k == 1 else "cell-mean"


def _check_degree(k):
    if k not in VEM_DEGREES:
        raise ValueError(f"VEM degree must be 1 or 2, got {k}")


def local_ndof(nfaces, k):
    return nfaces * k + poly_dim(k - 2)


@dataclass
class VemLocal:
    cell: int
    k: int
    Pi: np.ndarray        # DOFs -> P^k coefficients
    D: np.ndarray         # P^k coefficients -> DOFs
    G: np.ndarray         # (K grad m_a, grad m_b)_T
    consistency: np.ndarray
    stabilization: np.ndarray
    load: np.ndarray

    @property
    def stiffness(self):
        return self.consistency + self.stabilization


def _cell_data(cell, K, k, closure):
    """(Pi, D, G) for one cell."""
    basis = CellBasis.for_cell(cell, k)
    dim = basis.dim
    nF = cell.nfaces
    ncm = poly_dim(k - 2)
    ndof = nF * k + ncm
    quad = _cell_quad(cell, 2 * k + 2)
    phi = basis.eval(quad.nodes)
    g = basis.grad(quad.nodes)
    Kg = g @ K.T
    G = np.einsum("q,qia,qja->ij", quad.weights, Kg, g)

    D = np.zeros((ndof, dim))
    B = np.zeros((dim, ndof))
    boundary_row = np.zeros(dim)
    for i in range(nF):
        fb = FaceBasis.for_cell_face(cell, i, k - 1)
        fq = _face_quad(cell, i, 2 * k + 2)
        L = cell.lengths[i]
        mf = fb.eval(fq.nodes)  # (q, k)
        mc = basis.eval(fq.nodes)  # (q, dim)
        D[i * k:(i + 1) * k] = (mf * fq.weights[:, None]).T @ mc / L
        Mf = (mf * fq.weights[:, None]).T @ mf
        flux = basis.grad(fq.nodes) @ K.T @ cell.normals[i]  # (q, dim): K grad m_a . n
        a = np.linalg.solve(Mf, (mf * fq.weights[:, None]).T @ flux)  # (k, dim)
        B[:, i * k:(i + 1) * k] += L * a.T
        boundary_row += fq.weights @ mc
    if ncm:
        cb = CellBasis.for_cell(cell, k - 2)
        mcell = cb.eval(quad.nodes)
        D[nF * k:] = (mcell * quad.weights[:, None]).T @ phi / cell.area
        Mc = (mcell * quad.weights[:, None]).T @ mcell
        # div(K grad m_a) in P^{k-2}
        h = basis.hess(quad.nodes)
        divK = np.einsum("qiab,ab->qi", h, K)
        c = np.linalg.solve(Mc, (mcell * quad.weights[:, None]).T @ divK)  # (ncm, dim)
        B[:, nF * k:] -= cell.area * c.T
    Gt = G.copy()
    Bt = B.copy()
    if closure == "boundary-mean":
        Gt[0] = boundary_row
        Bt[0] = 0.0
        for i in range(nF):
            Bt[0, i * k] = cell.lengths[i]
    elif closure == "cell-mean":
        if not ncm:
            raise ValueError("cell-mean closure needs cell moments (k >= 2)")
        Gt[0] = phi.T @ quad.weights
        Bt[0] = 0.0
        Bt[0, nF * k] = cell.area
    else:
        raise ValueError(f"unknown closure {closure!r}")
    Pi = np.linalg.solve(Gt, Bt)
    return Pi, D, G


def _cell_quad(cell, degree):
    from .quadrature import polygon_quadrature

    return polygon_quadrature(cell.vertices, degree, cell.centroid)


def _face_quad(cell, i, degree):
    from .quadrature import segment_quadrature

    return segment_quadrature(*cell.edge(i), degree)


def projector_matrix(cell, K, k, closure=None):
    """Matrix of the oblique elliptic projector from local DOFs to P^k
    coefficients (scaled monomials around x_T)."""
    _check_degree(k)
    Pi, _, _ = _cell_data(cell, np.asarray(K, dtype=float), k, closure or default_closure(k))
    return Pi


def dof_matrix(cell, K, k):
    """Matrix sending P^k coefficients to local DOFs."""
    _check_degree(k)
    _, D, _ = _cell_data(cell, np.asarray(K, dtype=float), k, default_closure(k))
    return D


def vem_projector_from_dofs(cell, K, k, dofs, closure=None):
    return projector_matrix(cell, K, k, closure) @ np.asarray(dofs, dtype=float)


def local_dofs(cell, k, value, sub=None, degree=12):
    """DOFs of a function given by ``value(pts, sub)``."""
    nF = cell.nfaces
    out = np.zeros(local_ndof(nF, k))
    for i in range(nF):
        fb = FaceBasis.for_cell_face(cell, i, k - 1)
        fq = _face_quad(cell, i, degree)
        out[i * k:(i + 1) * k] = fb.eval(fq.nodes).T @ (fq.weights * value(fq.nodes, sub)) \
            / cell.lengths[i]
    if k >= 2:
        cb = CellBasis.for_cell(cell, k - 2)
        q = _cell_quad(cell, degree)
        out[nF * k:] = cb.eval(q.nodes).T @ (q.weights * value(q.nodes, sub)) / cell.area
    return out


def _load(cell, k, Pi, f, sub, degree=8):
    """Local vector (f, pi^{0,l} phi_i) with l = k - 1."""
    nF = cell.nfaces
    q = _cell_quad(cell, degree)
    fv = f(q.nodes, sub)
    if k == 1:
        # the cell mean of v is the mean of its elliptic projection
        basis = CellBasis.for_cell(cell, 1)
        mean_row = (basis.eval(q.nodes).T @ q.weights) @ Pi / cell.area
        return (q.weights @ fv) * mean_row
    b1 = CellBasis.for_cell(cell, 1)
    bk = CellBasis.for_cell(cell, k)
    p1 = b1.eval(q.nodes)
    M1 = (p1 * q.weights[:, None]).T @ p1
    M1k = (p1 * q.weights[:, None]).T @ bk.eval(q.nodes)
    # moments int v q_j: degree 0 from the cell DOF, degree 1 from Pi v
    mom = np.zeros((3, local_ndof(nF, k)))
    mom[0, nF * k] = cell.area
    mom[1:] = M1k[1:] @ Pi
    fm = p1.T @ (q.weights * fv)
    return fm @ np.linalg.solve(M1, mom)


class _LocalCache:
    """Reuse local matrices of translated copies of the same cell."""

    def __init__(self):
        self.store = {}

    def key(self, cell, K, k):
        rel = np.round((cell.vertices - cell.point) / cell.diameter, 13)
        return (k, rel.tobytes(), np.round(cell.diameter, 14), cell.signs.tobytes(), K.tobytes())


def vem_local(cell, K, k, f=None, sub=None, cache=None):
    """Local stiffness (consistency + stabilization) and load of one cell."""
    _check_degree(k)
    K = np.asarray(K, dtype=float)
    key = cache.key(cell, K, k) if cache is not None else None
    if key is not None and key in cache.store:
        Pi, D, G, cons, stab = cache.store[key]
    else:
        Pi, D, G = _cell_data(cell, K, k, default_closure(k))
        cons = Pi.T @ G @ Pi
        lam_max = np.linalg.eigvalsh(K)[-1]
        E = np.eye(len(D)) - D @ Pi
        stab = lam_max * E.T @ E
        cons = 0.5 * (cons + cons.T)
        stab = 0.5 * (stab + stab.T)
        if key is not None:
            cache.store[key] = (Pi, D, G, cons, stab)
    load = np.zeros(len(D)) if f is None else _load(cell, k, Pi, f, sub)
    return VemLocal(cell.index, k, Pi, D, G, cons, stab, load)


# ----------------------------------------------------------------------
def global_dofs(mesh, k, t):
    nF = mesh.nfaces
    ncm = poly_dim(k - 2)
    faces = mesh.cell_faces[t]
    idx = (faces[:, None] * k + np.arange(k)[None, :]).ravel()
    return np.concatenate([idx, nF * k + t * ncm + np.arange(ncm)]).astype(np.int64)


def n_global(mesh, k):
    return mesh.nfaces * k + mesh.ncells * poly_dim(k - 2)


def vem_interpolate(mesh, k, case, degree=12):
    v = np.zeros(n_global(mesh, k))
    for f in range(mesh.nfaces):
        fb = FaceBasis.for_face(mesh, f, k - 1)
        q = mesh.face_quadrature(f, degree)
        t = int(mesh.face_cells[f, 0])
        v[f * k:(f + 1) * k] = fb.eval(q.nodes).T @ (q.weights * case.u(q.nodes, int(mesh.subdomain[t]))) \
            / mesh.face_length[f]
    if k >= 2:
        ncm = poly_dim(k - 2)
        base = mesh.nfaces * k
        for t in range(mesh.ncells):
            cb = CellBasis.for_cell(mesh.cell(t), k - 2)
            q = mesh.cell_quadrature(t, degree)
            v[base + t * ncm: base + (t + 1) * ncm] = \
                cb.eval(q.nodes).T @ (q.weights * case.u(q.nodes, int(mesh.subdomain[t]))) \
                / mesh.cell_area[t]
    return v


def assemble_vem(mesh, field, k, case):
    """Global VEM system with boundary face moments pinned to those of u."""
    _check_degree(k)
    field.check_mesh(mesh)
    n = n_global(mesh, k)
    dim = poly_dim(k)
    cache = _LocalCache()
    rows, cols, vals = [], [], []
    b_full = np.zeros(n)
    r_rows, r_cols, r_vals = [], [], []
    for t in range(mesh.ncells):
        cell = mesh.cell(t)
        sub = cell.subdomain
        loc = vem_local(cell, field.tensor(sub), k, case.f, sub, cache)
        idx = global_dofs(mesh, k, t)
        S = loc.stiffness
        rows.append(np.repeat(idx, len(idx)))
        cols.append(np.tile(idx, len(idx)))
        vals.append(S.ravel())
        np.add.at(b_full, idx, loc.load)
        r_rows.append(np.repeat(t * dim + np.arange(dim), len(idx)))
        r_cols.append(np.tile(idx, dim))
        r_vals.append(loc.Pi.ravel())
    A_full = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                           shape=(n, n))
    R = sp.csr_matrix((np.concatenate(r_vals), (np.concatenate(r_rows), np.concatenate(r_cols))),
                      shape=(mesh.ncells * dim, n))
    pinned = (mesh.boundary_faces[:, None] * k + np.arange(k)[None, :]).ravel()
    iu = vem_interpolate(mesh, k, case)
    pv = iu[pinned]
    A, b, free = reduce_system(A_full, b_full, pinned, pv)
    A = (0.5 * (A + A.T)).tocsr()
    return DiscreteScheme(
        label=f"vem{k}", mesh=mesh, case=case, A=A, b=b, N_X=A, N_Y=A,
        free=free, pinned=pinned, pinned_values=pv, n_full=n,
        interpolate=lambda c: vem_interpolate(mesh, k, c), R=R, recon_degree=k,
        symmetric=True, norm_is_energy=True, meta=dict(k=k, l=k - 1, A_full=A_full))
