"""Diffusion fields and manufactured solutions on the unit square."""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np


class DiffusionField:
    """Piecewise constant SPD tensor, one 2x2 matrix per subdomain.

    A field with a single tensor is constant and applies to every
    subdomain tag.
    """

    def __init__(self, tensors):
        t = np.array(tensors, dtype=float)
        if t.shape == (2, 2):
            t = t[None]
        if t.ndim != 3 or t.shape[1:] != (2, 2):
            raise ValueError("tensors must be 2x2 matrices")
        # symmetric storage: keep (xx, xy, yy) only
        t[:, 1, 0] = t[:, 0, 1]
        lam, Q = np.linalg.eigh(t)
        if np.any(lam[:, 0] <= 0):
            raise ValueError("diffusion tensors must be positive definite")
        t.setflags(write=False)
        self.tensors = t
        self.lam_min = lam[:, 0]
        self.lam_max = lam[:, 1]
        self.eigvecs = Q

    @classmethod
    def constant(cls, K):
        return cls([K])

    @classmethod
    def isotropic(cls, values):
        return cls([v * np.eye(2) for v in values])

    @property
    def nsub(self):
        return len(self.tensors)

    def _i(self, sub):
        if self.nsub == 1:
            return 0
        if not 0 <= sub < self.nsub:
            raise ValueError(f"no diffusion tensor for subdomain {sub}")
        return sub

    def tensor(self, sub=0):
        return self.tensors[self._i(sub)]

    def bounds(self, sub=0):
        """(lambda_min, lambda_max, anisotropy ratio) on a subdomain."""
        i = self._i(sub)
        return self.lam_min[i], self.lam_max[i], self.lam_max[i] / self.lam_min[i]

    def cell_tensor(self, mesh, t):
        return self.tensor(int(mesh.subdomain[t]))

    def cell_bounds(self, mesh, t):
        return self.bounds(int(mesh.subdomain[t]))

    def check_mesh(self, mesh):
        if self.nsub > 1 and mesh.subdomain.max() >= self.nsub:
            raise ValueError("mesh carries more subdomains than the diffusion field")


def _sub_array(x, sub, locate):
    if sub is None:
        return locate(x)
    return np.full(len(x), sub, dtype=np.int64)


@dataclass
class ManufacturedCase:
    """Exact solution data for -div(K grad u) = f.

    The callables take an (n, 2) array of points and an optional subdomain
    tag ``sub`` telling which one-sided formula to use on interfaces.
    """

    name: str
    field: DiffusionField
    u: Callable
    grad: Callable
    f: Callable
    homogeneous: bool = True
    smooth: tuple = (True,)
    params: dict = field(default_factory=dict)
    locate: Optional[Callable] = None

    def flux(self, x, sub=None):
        """K grad u at the points (one-sided through ``sub``)."""
        x = np.atleast_2d(x)
        g = self.grad(x, sub)
        subs = np.zeros(len(x), dtype=np.int64) if sub is None and self.locate is None \
            else _sub_array(x, sub, self.locate)
        K = self.field.tensors[np.minimum(subs, self.field.nsub - 1)]
        return np.einsum("nij,nj->ni", K, g)


def case_smooth_sine(K=np.eye(2)):
    """u = sin(pi x) sin(pi y) with constant K."""
    K = np.asarray(K, dtype=float)
    fld = DiffusionField.constant(K)
    K = fld.tensors[0]
    pi = np.pi

    def u(x, sub=None):
        x = np.atleast_2d(x)
        return np.sin(pi * x[:, 0]) * np.sin(pi * x[:, 1])

    def grad(x, sub=None):
        x = np.atleast_2d(x)
        sx, sy = np.sin(pi * x[:, 0]), np.sin(pi * x[:, 1])
        cx, cy = np.cos(pi * x[:, 0]), np.cos(pi * x[:, 1])
        return pi * np.column_stack([cx * sy, sx * cy])

    def f(x, sub=None):
        x = np.atleast_2d(x)
        sx, sy = np.sin(pi * x[:, 0]), np.sin(pi * x[:, 1])
        cx, cy = np.cos(pi * x[:, 0]), np.cos(pi * x[:, 1])
        return pi ** 2 * ((K[0, 0] + K[1, 1]) * sx * sy - 2 * K[0, 1] * cx * cy)

    return ManufacturedCase("smooth-sine", fld, u, grad, f, homogeneous=True)


def case_affine(K=np.eye(2), a=0.5, b=(1.0, -0.5)):
    """u = a + b.x, f = 0, Dirichlet data taken from u."""
    fld = DiffusionField.constant(np.asarray(K, dtype=float))
    b = np.asarray(b, dtype=float)

    def u(x, sub=None):
        return a + np.atleast_2d(x) @ b

    def grad(x, sub=None):
        return np.tile(b, (len(np.atleast_2d(x)), 1))

    def f(x, sub=None):
        return np.zeros(len(np.atleast_2d(x)))

    homog = bool(a == 0 and not b.any())
    return ManufacturedCase("affine", fld, u, grad, f, homogeneous=homog,
                            params=dict(a=a, b=b.tolist()))


def layered_slopes(k_left, k_right, x_interface):
    """Slopes of the continuous, flux-continuous piecewise linear profile
    with u(0) = 0 and u(1) = 1."""
    # s_L x_i + s_R (1 - x_i) = 1 and k_L s_L = k_R s_R
    s_l = 1.0 / (x_interface + (1.0 - x_interface) * k_left / k_right)
    return s_l, k_left * s_l / k_right


def case_layered(k_left=1.0, k_right=4.0, x_interface=0.5):
    """Piecewise linear u(x) across a vertical interface; subdomain 0 is the
    left strip, 1 the right one."""
    if not (k_left > 0 and k_right > 0):
        raise ValueError("layer diffusivities must be positive")
    if not 0.0 < x_interface < 1.0:
        raise ValueError("interface must lie inside (0, 1)")
    fld = DiffusionField.isotropic([k_left, k_right])
    s_l, s_r = layered_slopes(k_left, k_right, x_interface)
    xi = x_interface

    def locate(x):
        return (np.atleast_2d(x)[:, 0] > xi).astype(np.int64)

    def u(x, sub=None):
        x = np.atleast_2d(x)
        s = _sub_array(x, sub, locate)
        return np.where(s == 0, s_l * x[:, 0], s_l * xi + s_r * (x[:, 0] - xi))

    def grad(x, sub=None):
        x = np.atleast_2d(x)
        s = _sub_array(x, sub, locate)
        gx = np.where(s == 0, s_l, s_r)
        return np.column_stack([gx, np.zeros(len(x))])

    def f(x, sub=None):
        return np.zeros(len(np.atleast_2d(x)))

    return ManufacturedCase("layered", fld, u, grad, f, homogeneous=False,
                            smooth=(True, True),
                            params=dict(k_left=k_left, k_right=k_right, x_interface=xi,
                                        s_left=s_l, s_right=s_r),
                            locate=locate)


CASES = {
    "smooth-sine": case_smooth_sine,
    "affine": case_affine,
    "layered": case_layered,
}


def get_case(name, **kwargs):
    try:
        factory = CASES[name]
    except KeyError:
        raise KeyError(f"unknown case {name!r}; known: {', '.join(sorted(CASES))}") from None
    return factory(**kwargs)


def check_compliance(case, mesh):
    """Raise if the mesh does not resolve the case's subdomains."""
    case.field.check_mesh(mesh)
    if case.locate is None:
        return
    for t in range(mesh.ncells):
        xy = mesh.vertices[mesh.cells[t]]
        side = case.locate(mesh.cell_centroid[t][None])[0]
        if side != mesh.subdomain[t]:
            raise ValueError(f"cell {t}: subdomain tag does not match case {case.name!r}")
        xi = case.params.get("x_interface")
        if xi is not None and xy[:, 0].min() < xi - 1e-12 and xy[:, 0].max() > xi + 1e-12:
            raise ValueError(f"cell {t} straddles the interface x = {xi}")


# ----------------------------------------------------------------------
def residual_check(case, n=100, seed=0, step=1e-4):
    """Max relative residual of -div(K grad u) - f at random interior points,
    using centred differences of the analytic flux."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    subs = range(case.field.nsub) if case.locate is not None else [None]
    for sub in subs:
        pts = _interior_points(case, sub, n, rng, step)
        div = np.zeros(len(pts))
        for a in range(2):
            e = np.zeros(2)
            e[a] = step
            fp = case.flux(pts + e, sub)[:, a]
            fm = case.flux(pts - e, sub)[:, a]
            div += (fp - fm) / (2 * step)
        f = case.f(pts, sub)
        scale = max(np.abs(f).max(), np.abs(case.flux(pts, sub)).max(), 1.0)
        worst = max(worst, np.abs(-div - f).max() / scale)
    return worst


def _interior_points(case, sub, n, rng, margin):
    lo, hi = margin * 2, 1 - margin * 2
    if sub is None:
        return rng.uniform(lo, hi, size=(n, 2))
    xi = case.params["x_interface"]
    x0, x1 = (lo, xi - 2 * margin) if sub == 0 else (xi + 2 * margin, hi)
    return np.column_stack([rng.uniform(x0, x1, n), rng.uniform(lo, hi, n)])


def boundary_check(case, n=100, seed=0):
    """Max |u| on random boundary points (zero for homogeneous cases)."""
    rng = np.random.default_rng(seed)
    s = rng.random(n)
    side = rng.integers(0, 4, n)
    pts = np.column_stack([
        np.where(side == 0, s, np.where(side == 1, 1.0, np.where(side == 2, s, 0.0))),
        np.where(side == 0, 0.0, np.where(side == 1, s, np.where(side == 2, 1.0, s))),
    ])
    return float(np.abs(case.u(pts)).max())


def interface_flux_check(case, n=20, seed=0):
    """Max mismatch of the normal flux across each vertical interface."""
    if case.locate is None:
        return 0.0
    rng = np.random.default_rng(seed)
    xi = case.params["x_interface"]
    pts = np.column_stack([np.full(n, xi), rng.random(n)])
    left = case.flux(pts, 0)[:, 0]
    right = case.flux(pts, 1)[:, 0]
    return float(np.abs(left - right).max())
