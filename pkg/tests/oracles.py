"""Independent reference computations used by the tests.

Nothing here calls the package's quadrature, basis or scheme code; the
oracles work from raw vertex coordinates.
"""

import math

import numpy as np
from numpy.polynomial import polynomial as P


def polygon_area(xy):
    x, y = np.asarray(xy, dtype=float).T
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def monomial_integral(xy, a, b):
    """int_P x^a y^b by Green's theorem, int x^a y^b = (1/(a+1)) oint x^(a+1) y^b dy,
    with exact polynomial arithmetic along each edge."""
    xy = np.asarray(xy, dtype=float)
    tot = 0.0
    for i in range(len(xy)):
        p0, p1 = xy[i], xy[(i + 1) % len(xy)]
        # x(s) = p0x + s dx, y(s) = p0y + s dy on s in [0, 1]
        xs = P.polypow([p0[0], p1[0] - p0[0]], a + 1)
        ys = P.polypow([p0[1], p1[1] - p0[1]], b)
        integrand = P.polymul(xs, ys) * (p1[1] - p0[1])
        anti = P.polyint(integrand)
        tot += P.polyval(1.0, anti) - P.polyval(0.0, anti)
    return tot / (a + 1)


def centroid(xy):
    A = polygon_area(xy)
    return np.array([monomial_integral(xy, 1, 0), monomial_integral(xy, 0, 1)]) / A


def random_convex_polygon(rng, n=None, radius=1.0):
    """Convex polygon: hull of points on a perturbed circle (at least three
    vertices survive since the angular gaps stay below pi)."""
    n = n or int(rng.integers(3, 9))
    ang = np.sort(rng.uniform(0, 2 * np.pi, n))
    # keep gaps below pi so the origin stays inside
    while np.max(np.diff(np.concatenate([ang, [ang[0] + 2 * np.pi]]))) >= 0.9 * np.pi:
        ang = np.sort(rng.uniform(0, 2 * np.pi, n))
    r = radius * rng.uniform(0.7, 1.0, n)
    c = rng.uniform(-2, 2, 2)
    return convex_hull_polygon(c + np.column_stack([r * np.cos(ang), r * np.sin(ang)]))


def convex_hull_polygon(xy):
    """Counter-clockwise convex hull (monotone chain)."""
    pts = sorted(map(tuple, np.asarray(xy, dtype=float)))

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1])


# ----------------------------------------------------------------------
def hmm_local_bruteforce(xy, K, stab_scale=1.0, point=None):
    """HMM matrix W with F_F = sum_F' W[F, F'] (v_T - v_F') built element by
    element from vertex coordinates.

    Gradient from fluxes: G(f) = -(1/|T|) K^{-1} sum_F f_F (xbar_F - x_T).
    Residual: r_F(f) = f_F + |F| K G(f) . n_F.
    Inner product: M(f, g) = (1/|T|) sum_{F,F'} f_F g_F' (xbar_F - x_T)^T K^{-1} (xbar_F' - x_T)
                   + sum_F B_F r_F(f) r_F(g),  B_F = stab d_F / (|F| lam_max).
    """
    xy = np.asarray(xy, dtype=float)
    K = np.asarray(K, dtype=float)
    n = len(xy)
    area = polygon_area(xy)
    xT = centroid(xy) if point is None else np.asarray(point, dtype=float)
    Kinv = np.linalg.inv(K)
    lam_max = max(np.linalg.eigvalsh(K))
    mids, normals, lengths, dists = [], [], [], []
    for i in range(n):
        a, b = xy[i], xy[(i + 1) % n]
        e = b - a
        L = math.hypot(*e)
        nrm = np.array([e[1], -e[0]]) / L
        mids.append(0.5 * (a + b))
        normals.append(nrm)
        lengths.append(L)
        dists.append(float((a - xT) @ nrm))
    M = np.zeros((n, n))
    # columns: response to unit flux on face j
    resid = np.zeros((n, n))
    for j in range(n):
        G = -Kinv @ (mids[j] - xT) / area
        for i in range(n):
            resid[i, j] = (1.0 if i == j else 0.0) + lengths[i] * (K @ G) @ normals[i]
    for i in range(n):
        for j in range(n):
            M[i, j] = (mids[i] - xT) @ Kinv @ (mids[j] - xT) / area
            for f in range(n):
                B = stab_scale * dists[f] / (lengths[f] * lam_max)
                M[i, j] += B * resid[f, i] * resid[f, j]
    return np.linalg.inv(M)


def tpfa_transmissibility(length, K, normal, xT, xF):
    """|F| |K n| / |x_T - x_F| for one K-orthogonal face."""
    return length * np.linalg.norm(np.asarray(K) @ normal) / np.linalg.norm(np.subtract(xT, xF))


def cellcentred_tpfa_cartesian(n, k_of_x, u_exact, f_exact, quad_pts=8):
    """Five-point scheme with harmonic transmissibilities on the uniform
    n x n grid of the unit square, isotropic diffusion k_of_x(cell centre x)
    and Dirichlet data at boundary face midpoints. Returns (n, n) cell values
    indexed [i (x), j (y)]."""
    h = 1.0 / n
    xc = (np.arange(n) + 0.5) * h
    k = np.array([[k_of_x(x) for _ in range(n)] for x in xc])
    idx = np.arange(n * n).reshape(n, n)
    A = np.zeros((n * n, n * n))
    b = np.zeros(n * n)
    g, w = np.polynomial.legendre.leggauss(quad_pts)
    g = 0.5 * (g + 1)
    w = 0.5 * w
    for i in range(n):
        for j in range(n):
            r = idx[i, j]
            X, Y = np.meshgrid(i * h + g * h, j * h + g * h, indexing="ij")
            b[r] = (np.outer(w, w) * f_exact(np.column_stack([X.ravel(), Y.ravel()])).reshape(
                quad_pts, quad_pts)).sum() * h * h
            for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                ii, jj = i + di, j + dj
                if 0 <= ii < n and 0 <= jj < n:
                    T = h / (0.5 * h / k[i, j] + 0.5 * h / k[ii, jj])
                    A[r, r] += T
                    A[r, idx[ii, jj]] -= T
                else:
                    T = h * k[i, j] / (0.5 * h)
                    xf = np.array([[xc[i] + di * 0.5 * h, xc[j] + dj * 0.5 * h]])
                    A[r, r] += T
                    b[r] += T * u_exact(xf)[0]
    return np.linalg.solve(A, b).reshape(n, n)
