import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import monomial_integral, random_convex_polygon
from strang_lab.mesh import Mesh
from strang_lab.polybasis import (CellBasis, FaceBasis, eoc, exponents, l2_project,
                                  oblique_project, poly_dim, projector_rate_study)


def single_cell(xy):
    return Mesh(xy, [list(range(len(xy)))]).cell(0)


def random_poly(coef_seed, k):
    rng = np.random.default_rng(coef_seed)
    c = rng.standard_normal(poly_dim(k))
    ex = exponents(k)

    def value(x):
        return sum(ci * x[:, 0] ** a * x[:, 1] ** b for ci, (a, b) in zip(c, ex))

    def grad(x):
        gx = sum(ci * a * x[:, 0] ** max(a - 1, 0) * x[:, 1] ** b for ci, (a, b) in zip(c, ex))
        gy = sum(ci * b * x[:, 0] ** a * x[:, 1] ** max(b - 1, 0) for ci, (a, b) in zip(c, ex))
        return np.column_stack([gx, gy])

    return value, grad


def test_dims():
    assert [poly_dim(k) for k in range(-1, 4)] == [0, 1, 3, 6, 10]


def test_cell_basis_gradient_fd():
    b = CellBasis(np.array([0.3, -0.1]), 0.7, 3)
    x = np.array([[0.4, 0.2]])
    e = 1e-6
    fd = np.stack([(b.eval(x + [e, 0]) - b.eval(x - [e, 0]))[0] / (2 * e),
                   (b.eval(x + [0, e]) - b.eval(x - [0, e]))[0] / (2 * e)], axis=1)
    assert np.allclose(b.grad(x)[0], fd, atol=1e-8)


def test_face_basis_orthonormal(cart8):
    fb = FaceBasis.for_face(cart8, 5, 3)
    q = cart8.face_quadrature(5, 8)
    m = fb.eval(q.nodes)
    G = (m * q.weights[:, None]).T @ m / cart8.face_length[5]
    assert np.allclose(G, np.eye(4), atol=1e-13)


def test_face_basis_shared_between_neighbours(cart8):
    f = cart8.internal_faces[3]
    t1, t2 = cart8.face_cells[f]
    i1 = list(cart8.cell_faces[t1]).index(f)
    i2 = list(cart8.cell_faces[t2]).index(f)
    q = cart8.face_quadrature(f, 4)
    a = FaceBasis.for_cell_face(cart8.cell(t1), i1, 2).eval(q.nodes)
    b = FaceBasis.for_cell_face(cart8.cell(t2), i2, 2).eval(q.nodes)
    assert np.allclose(a, b)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 31), st.integers(0, 3))
def test_l2_projector_reproduces_polynomials(seed, k):
    cell = single_cell(random_convex_polygon(np.random.default_rng(seed)))
    value, _ = random_poly(seed + 1, k)
    c = l2_project(cell, value, k)
    b = CellBasis.for_cell(cell, k)
    pts = cell.vertices * 0.9 + 0.1 * cell.centroid
    assert np.abs(b.eval(pts) @ c - value(pts)).max() <= 1e-10 * max(1, np.abs(value(pts)).max())


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 31), st.integers(1, 3), st.sampled_from(["cell-mean", "boundary-mean"]))
def test_oblique_projector_reproduces_polynomials(seed, k, closure):
    rng = np.random.default_rng(seed)
    cell = single_cell(random_convex_polygon(rng))
    K = np.array([[2.0, 0.3], [0.3, 0.5]])
    value, grad = random_poly(seed + 2, k)
    c = oblique_project(cell, K, (value, grad), k, closure)
    b = CellBasis.for_cell(cell, k)
    pts = cell.vertices * 0.9 + 0.1 * cell.centroid
    assert np.abs(b.eval(pts) @ c - value(pts)).max() <= 1e-10 * max(1, np.abs(value(pts)).max())


def test_l2_projection_orthogonality(unit_square):
    cell = unit_square.cell(0)
    f = lambda x: np.exp(x[:, 0]) * np.cos(x[:, 1])  # noqa: E731
    c = l2_project(cell, f, 2)
    q = unit_square.cell_quadrature(0, 16)
    b = CellBasis.for_cell(cell, 2)
    r = f(q.nodes) - b.eval(q.nodes) @ c
    assert np.abs(b.eval(q.nodes).T @ (q.weights * r)).max() < 1e-10


def test_l2_mean_matches_oracle():
    xy = np.array([[0, 0], [2, 0], [2, 1], [1, 2], [0, 1]], dtype=float)
    cell = single_cell(xy)
    c = l2_project(cell, lambda x: x[:, 0] ** 2, 0)
    assert c[0] == pytest.approx(monomial_integral(xy, 2, 0) / monomial_integral(xy, 0, 0), rel=1e-12)


def test_oblique_closures_on_x_squared(unit_square):
    """Projection of x^2 onto P^1 with K = I: gradient (1, 0), constant fixed by
    the closure. Cell mean of x^2 is 1/3; boundary mean is 5/12."""
    cell = unit_square.cell(0)
    v = (lambda x: x[:, 0] ** 2, lambda x: np.column_stack([2 * x[:, 0], 0 * x[:, 0]]))
    b = CellBasis.for_cell(cell, 1)
    p = np.array([[0.0, 0.0]])
    for closure, const in (("cell-mean", -1 / 6), ("boundary-mean", -1 / 12)):
        c = oblique_project(cell, np.eye(2), v, 1, closure)
        assert (b.eval(p) @ c)[0] == pytest.approx(const, abs=1e-13)
        assert (b.eval(np.array([[1.0, 0.3]])) @ c)[0] == pytest.approx(1 + const, abs=1e-13)


def test_eoc_helper():
    r = eoc([1.0, 0.25, 0.0625], [1.0, 0.5, 0.25])
    assert np.isnan(r[0]) and np.allclose(r[1:], 2.0)


@pytest.mark.parametrize("k", [1, 2])
def test_oblique_rates(k):
    sine = lambda x: np.sin(np.pi * x[:, 0]) * np.sin(np.pi * x[:, 1])  # noqa: E731
    grad = lambda x: np.pi * np.column_stack([  # noqa: E731
        np.cos(np.pi * x[:, 0]) * np.sin(np.pi * x[:, 1]),
        np.sin(np.pi * x[:, 0]) * np.cos(np.pi * x[:, 1])])
    rows = projector_rate_study("oblique", np.eye(2), sine, grad, k, levels=3, n0=4)
    assert abs(rows[-1]["eoc_h1"] - k) < 0.2
    assert abs(rows[-1]["eoc_l2"] - (k + 1)) < 0.3
