"""Gauss rules on segments, triangles and polygons.

Polygons are split into triangles (fan from the centroid when the polygon
is star-shaped with respect to it, ear clipping otherwise) and a collapsed
Gauss rule is applied on each triangle. All weights are positive.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre


@dataclass(frozen=True)
class Quadrature:
    nodes: np.ndarray
    weights: np.ndarray
    degree: int

    def integrate(self, values):
        """Integrate sampled values; the leading axis must match the nodes."""
        return np.tensordot(self.weights, values, axes=(0, 0))


@lru_cache(maxsize=None)
def _gauss_legendre01(n):
    x, w = roots_legendre(n)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def reference_triangle_rule(degree):
    """Collapsed Gauss rule on the triangle (0,0), (1,0), (0,1).

    Exact for polynomials of total degree ``degree``.
    """
    n = max(1, (degree + 2) // 2)
    # Jacobi(1, 0) absorbs the Duffy Jacobian (1 - s)
    s, ws = roots_jacobi(n, 1.0, 0.0)
    s = 0.5 * (s + 1.0)
    ws = 0.25 * ws
    t, wt = _gauss_legendre01(n)
    S, Tt = np.meshgrid(s, t, indexing="ij")
    x = S.ravel()
    y = ((1.0 - S) * Tt).ravel()
    w = np.outer(ws, wt).ravel()
    nodes = np.column_stack([x, y])
    nodes.setflags(write=False)
    w.setflags(write=False)
    return nodes, w


def segment_quadrature(p0, p1, degree):
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    n = max(1, (degree + 2) // 2)
    t, w = _gauss_legendre01(n)
    length = float(np.hypot(*(p1 - p0)))
    nodes = p0[None, :] + t[:, None] * (p1 - p0)[None, :]
    return Quadrature(nodes, w * length, degree)


def triangle_quadrature(a, b, c, degree):
    ref, w = reference_triangle_rule(degree)
    a = np.asarray(a, dtype=float)
    e1 = np.asarray(b, dtype=float) - a
    e2 = np.asarray(c, dtype=float) - a
    jac = e1[0] * e2[1] - e1[1] * e2[0]
    nodes = a[None, :] + ref[:, :1] * e1[None, :] + ref[:, 1:] * e2[None, :]
    return Quadrature(nodes, w * abs(jac), degree)


def _signed_area(a, b, c):
    return 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))


def polygon_area_centroid(xy):
    x, y = xy[:, 0], xy[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    area = 0.5 * cross.sum()
    cx = ((x + xn) * cross).sum() / (6.0 * area)
    cy = ((y + yn) * cross).sum() / (6.0 * area)
    return area, np.array([cx, cy])


def ear_clip(xy):
    """Triangulate a simple ccw polygon; returns index triples."""
    idx = list(range(len(xy)))
    tris = []
    guard = 0
    while len(idx) > 3:
        guard += 1
        if guard > 10 * len(xy) ** 2:
            raise ValueError("ear clipping failed: polygon is not simple")
        n = len(idx)
        for i in range(n):
            ia, ib, ic = idx[i - 1], idx[i], idx[(i + 1) % n]
            a, b, c = xy[ia], xy[ib], xy[ic]
            if _signed_area(a, b, c) <= 0.0:
                continue
            inside = False
            for j in idx:
                if j in (ia, ib, ic):
                    continue
                p = xy[j]
                if (_signed_area(a, b, p) >= 0 and _signed_area(b, c, p) >= 0
                        and _signed_area(c, a, p) >= 0):
                    inside = True
                    break
            if inside:
                continue
            tris.append((ia, ib, ic))
            idx.pop(i)
            break
        else:
            raise ValueError("ear clipping failed: no ear found")
    tris.append(tuple(idx))
    return tris


def polygon_triangles(xy, center=None):
    """Sub-triangles of a ccw polygon as a list of (a, b, c) coordinate triples."""
    xy = np.asarray(xy, dtype=float)
    if center is None:
        _, center = polygon_area_centroid(xy)
    n = len(xy)
    area, _ = polygon_area_centroid(xy)
    tol = 1e-14 * abs(area)
    fan = [(center, xy[i], xy[(i + 1) % n]) for i in range(n)]
    if all(_signed_area(*t) > tol for t in fan):
        return fan
    return [(xy[i], xy[j], xy[k]) for i, j, k in ear_clip(xy)]


def polygon_quadrature(xy, degree, center=None):
    """Quadrature on the ccw polygon with vertex coordinates ``xy``.

    Exact for polynomials of total degree ``degree``.
    """
    if degree < 0:
        raise ValueError("quadrature degree must be nonnegative")
    nodes, weights = [], []
    for a, b, c in polygon_triangles(xy, center):
        q = triangle_quadrature(a, b, c, degree)
        nodes.append(q.nodes)
        weights.append(q.weights)
    return Quadrature(np.vstack(nodes), np.concatenate(weights), degree)
