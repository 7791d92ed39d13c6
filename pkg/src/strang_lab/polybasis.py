"""Scaled monomial bases, L2 projectors and the oblique elliptic projector.

Cell bases are the monomials ((x - x_T) / h_T)^a, ordered by total degree
and, within a degree, by decreasing power of x. Face bases are Legendre
polynomials of the arclength coordinate s = 2 (x - m_F) . t_F / |F|,
normalized to unit mean square on the face; m_F is the midpoint and t_F
the global tangent, so both neighbours of a face see the same basis.
"""

import numpy as np
from numpy.polynomial import legendre

from .quadrature import polygon_quadrature, segment_quadrature

RENORMALIZE_COND = 1e8


def exponents(k):
    return [(d - j, j) for d in range(k + 1) for j in range(d + 1)]


def poly_dim(k):
    return (k + 1) * (k + 2) // 2 if k >= 0 else 0


class CellBasis:
    """Scaled monomials of total degree <= ``degree`` around ``center``."""

    def __init__(self, center, scale, degree):
        self.center = np.asarray(center, dtype=float)
        self.scale = float(scale)
        self.degree = int(degree)
        self.exps = np.array(exponents(self.degree), dtype=np.int64).reshape(-1, 2)

    @classmethod
    def for_cell(cls, cell, degree):
        return cls(cell.point, cell.diameter, degree)

    @property
    def dim(self):
        return len(self.exps)

    def _scaled(self, pts):
        return (np.atleast_2d(pts) - self.center) / self.scale

    @staticmethod
    def _pow(x, p):
        out = np.zeros_like(x)
        mask = p >= 0
        out[..., mask] = x[..., mask] ** p[mask]
        return out

    def eval(self, pts):
        z = self._scaled(pts)
        ex, ey = self.exps[:, 0], self.exps[:, 1]
        return z[:, :1] ** ex * z[:, 1:] ** ey

    def grad(self, pts):
        z = self._scaled(pts)
        x, y = z[:, :1], z[:, 1:]
        ex, ey = self.exps[:, 0], self.exps[:, 1]
        px = self._pow(np.broadcast_to(x, (len(z), self.dim)).copy(), ex - 1)
        py = self._pow(np.broadcast_to(y, (len(z), self.dim)).copy(), ey - 1)
        gx = ex * px * y ** ey / self.scale
        gy = ey * x ** ex * py / self.scale
        return np.stack([gx, gy], axis=2)

    def hess(self, pts):
        z = self._scaled(pts)
        n = len(z)
        x = np.broadcast_to(z[:, :1], (n, self.dim)).copy()
        y = np.broadcast_to(z[:, 1:], (n, self.dim)).copy()
        ex, ey = self.exps[:, 0], self.exps[:, 1]
        s2 = self.scale ** 2
        hxx = ex * (ex - 1) * self._pow(x, ex - 2) * y ** ey / s2
        hyy = ey * (ey - 1) * x ** ex * self._pow(y, ey - 2) / s2
        hxy = ex * ey * self._pow(x, ex - 1) * self._pow(y, ey - 1) / s2
        return np.stack([np.stack([hxx, hxy], axis=2), np.stack([hxy, hyy], axis=2)], axis=3)


class FaceBasis:
    """Orthonormal Legendre basis of degree <= ``degree`` along a face:
    (1/|F|) int_F m_i m_j = delta_ij."""

    def __init__(self, center, tangent, scale, degree):
        self.center = np.asarray(center, dtype=float)
        self.tangent = np.asarray(tangent, dtype=float)
        self.scale = float(scale)
        self.degree = int(degree)

    @classmethod
    def for_face(cls, mesh, f, degree):
        return cls(mesh.face_midpoint[f], mesh.face_tangent[f], mesh.face_length[f], degree)

    @classmethod
    def for_cell_face(cls, cell, i, degree):
        """Face basis of the ``i``-th face of ``cell`` with the global tangent."""
        a, b = cell.edge(i)
        t = cell.signs[i] * (b - a) / cell.lengths[i]
        return cls(cell.face_midpoints[i], t, cell.lengths[i], degree)

    @property
    def dim(self):
        return self.degree + 1

    def eval(self, pts):
        s = 2.0 * ((np.atleast_2d(pts) - self.center) @ self.tangent) / self.scale
        norms = np.sqrt(2.0 * np.arange(self.degree + 1) + 1.0)
        return legendre.legvander(s, self.degree) * norms


# ----------------------------------------------------------------------
def cell_quadrature(cell, degree):
    return polygon_quadrature(cell.vertices, degree, cell.centroid)


def face_quadratures(cell, degree):
    return [segment_quadrature(*cell.edge(i), degree) for i in range(cell.nfaces)]


def mass_matrix(basis, quad):
    phi = basis.eval(quad.nodes)
    return (phi * quad.weights[:, None]).T @ phi


def gram_schmidt(M):
    """Modified Gram-Schmidt in the inner product ``M``.

    Returns ``R`` with ``R.T @ M @ R = I``; column j of ``R`` combines the
    first j+1 basis functions.
    """
    n = len(M)
    R = np.eye(n)
    for j in range(n):
        for _ in range(2):  # second sweep restores orthogonality
            for i in range(j):
                c = R[:, i] @ M @ R[:, j]
                R[:, j] -= c * R[:, i]
        R[:, j] /= np.sqrt(R[:, j] @ M @ R[:, j])
    return R


def solve_gram(M, rhs):
    """Solve ``M c = rhs`` for a local Gram matrix, re-orthogonalizing when
    the matrix is ill conditioned."""
    if np.linalg.cond(M) > RENORMALIZE_COND:
        R = gram_schmidt(M)
        return R @ (R.T @ rhs)
    return np.linalg.solve(M, rhs)


def l2_project(cell, f, l, extra_degree=6, quad=None):
    """Coefficients of the L2 projection of ``f`` onto P^l(cell).

    ``f`` maps an (n, 2) array of points to n values.
    """
    basis = CellBasis.for_cell(cell, l)
    if quad is None:
        quad = cell_quadrature(cell, 2 * l + extra_degree)
    phi = basis.eval(quad.nodes)
    M = (phi * quad.weights[:, None]).T @ phi
    rhs = phi.T @ (quad.weights * f(quad.nodes))
    return solve_gram(M, rhs)


def stiffness_matrix(basis, K, quad):
    g = basis.grad(quad.nodes)
    Kg = g @ np.asarray(K).T
    return np.einsum("q,qia,qja->ij", quad.weights, Kg, g)


def oblique_project(cell, K, v, k, closure="cell-mean", extra_degree=6):
    """Oblique elliptic projection onto P^k(cell).

    ``v`` is either a pair ``(value, gradient)`` of callables or an array of
    nonconforming VEM degrees of freedom (face moments to degree k-1, then
    cell moments to degree k-2). ``closure`` fixes the constant part through
    the cell mean (``"cell-mean"``) or the boundary mean (``"boundary-mean"``).
    """
    if isinstance(v, np.ndarray):
        from .vem import projector_matrix

        return projector_matrix(cell, K, k, closure) @ v
    value, grad = v
    basis = CellBasis.for_cell(cell, k)
    quad = cell_quadrature(cell, 2 * k + extra_degree)
    K = np.asarray(K, dtype=float)
    g = basis.grad(quad.nodes)
    Kg = g @ K.T
    G = np.einsum("q,qia,qja->ij", quad.weights, Kg, g)
    rhs = np.einsum("q,qia,qa->i", quad.weights, Kg, grad(quad.nodes))
    if basis.dim == 1:
        coef = np.zeros(1)
    else:
        coef = np.zeros(basis.dim)
        coef[1:] = solve_gram(G[1:, 1:], rhs[1:])
    row, target = _closure_row(cell, basis, closure, value, quad, extra_degree)
    coef[0] = (target - row[1:] @ coef[1:]) / row[0]
    return coef


def _closure_row(cell, basis, closure, value, quad, extra_degree):
    if closure == "cell-mean":
        return basis.eval(quad.nodes).T @ quad.weights, quad.weights @ value(quad.nodes)
    if closure == "boundary-mean":
        row = np.zeros(basis.dim)
        target = 0.0
        for fq in face_quadratures(cell, basis.degree + extra_degree):
            row += basis.eval(fq.nodes).T @ fq.weights
            target += fq.weights @ value(fq.nodes)
        return row, target
    raise ValueError(f"unknown closure {closure!r}")


# ----------------------------------------------------------------------
def projection_errors(cell, K, coef, k, value, grad, quad_degree):
    """Squared local errors of a projection: L2, H1 seminorm, K-weighted
    gradient, and L2 trace on the faces."""
    basis = CellBasis.for_cell(cell, k)
    quad = cell_quadrature(cell, quad_degree)
    e = value(quad.nodes) - basis.eval(quad.nodes) @ coef
    ge = grad(quad.nodes) - np.einsum("qia,i->qa", basis.grad(quad.nodes), coef)
    Kge = ge @ np.asarray(K).T
    tr = 0.0
    for fq in face_quadratures(cell, quad_degree):
        ef = value(fq.nodes) - basis.eval(fq.nodes) @ coef
        tr += fq.weights @ ef ** 2
    return (quad.weights @ e ** 2,
            quad.weights @ (ge ** 2).sum(axis=1),
            quad.weights @ (Kge * ge).sum(axis=1),
            tr)


def eoc(errors, hs):
    """Experimental orders between consecutive levels (first entry NaN)."""
    errors = np.asarray(errors, dtype=float)
    hs = np.asarray(hs, dtype=float)
    out = np.full(len(errors), np.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        out[1:] = np.log(errors[:-1] / errors[1:]) / np.log(hs[:-1] / hs[1:])
    return out


def projector_rate_study(projector, K, value, grad, k, levels=4, n0=4,
                         closure="cell-mean", mesh_factory=None):
    """Projection errors on a sequence of uniformly refined meshes.

    Returns a list of dicts (one per level) with ``h``, ``l2``, ``h1``,
    ``weighted`` (the K^{1/2}-weighted gradient error), ``trace`` and the
    corresponding ``eoc_*`` entries.
    """
    from .mesh import build_cartesian

    if mesh_factory is None:
        def mesh_factory(n):
            return build_cartesian(n, n)

    K = np.asarray(K, dtype=float)
    rows = []
    for j in range(levels):
        mesh = mesh_factory(n0 * 2 ** j)
        tot = np.zeros(4)
        for t in range(mesh.ncells):
            cell = mesh.cell(t)
            if projector == "l2":
                coef = l2_project(cell, value, k)
            elif projector == "oblique":
                coef = oblique_project(cell, K, (value, grad), k, closure)
            else:
                raise ValueError(f"unknown projector {projector!r}")
            tot += projection_errors(cell, K, coef, k, value, grad, 2 * k + 8)
        l2, h1, w, tr = np.sqrt(tot)
        rows.append(dict(h=mesh.h, l2=l2, h1=h1, weighted=w, trace=tr))
    hs = [r["h"] for r in rows]
    for key in ("l2", "h1", "weighted", "trace"):
        rates = eoc([r[key] for r in rows], hs)
        for r, v in zip(rows, rates):
            r["eoc_" + key] = v
    return rows
