"""Two-dimensional polytopal meshes.

A :class:`Mesh` is built from vertex coordinates and counter-clockwise
vertex loops. Faces are the straight edges of the loops; each face is
oriented from its lower-index neighbour ``T1`` (the one whose loop
traverses it) to ``T2`` (``-1`` on the boundary), which fixes the sign of
jumps for every scheme.
"""

import math
from dataclasses import dataclass

import numpy as np

from .quadrature import polygon_area_centroid, polygon_quadrature, segment_quadrature


class MeshError(ValueError):
    """Raised when connectivity or geometry violates a mesh invariant."""


@dataclass(frozen=True)
class CellView:
    """Local geometry of one cell, in the order of its boundary loop."""

    index: int
    vertices: np.ndarray  # (n, 2), ccw
    area: float
    centroid: np.ndarray
    diameter: float
    point: np.ndarray  # x_T
    subdomain: int
    faces: np.ndarray  # global face ids, edge i joins vertex i and i+1
    normals: np.ndarray  # outward unit normals n_TF
    signs: np.ndarray  # +1 where T is the face's first neighbour
    lengths: np.ndarray  # |F|
    distances: np.ndarray  # d_TF
    face_points: np.ndarray  # x_F
    face_midpoints: np.ndarray

    @property
    def nfaces(self):
        return len(self.faces)

    def edge(self, i):
        n = len(self.vertices)
        return self.vertices[i], self.vertices[(i + 1) % n]


@dataclass(frozen=True)
class RegularityMetrics:
    h: float
    theta: float
    eta_jump: float
    max_faces_per_cell: int


def _readonly(a):
    a = np.array(a)
    a.setflags(write=False)
    return a


class Mesh:
    """Immutable polygonal mesh with the geometric data used by the schemes."""

    def __init__(self, vertices, cells, subdomain=None, cell_points=None,
                 face_points=None):
        vertices = np.asarray(vertices, dtype=float)
        if vertices.ndim != 2 or vertices.shape[1] != 2:
            raise MeshError("vertices must be an (N, 2) array")
        cells = [np.asarray(c, dtype=np.int64) for c in cells]
        if not cells:
            raise MeshError("mesh has no cells")
        for i, c in enumerate(cells):
            if len(c) < 3:
                raise MeshError(f"degenerate cell {i}: {len(c)} vertices")
            if c.min() < 0 or c.max() >= len(vertices):
                raise MeshError(f"cell {i} references a missing vertex")
            if len(set(c.tolist())) != len(c):
                raise MeshError(f"degenerate cell {i}: repeated vertex")
        nc = len(cells)
        self.vertices = _readonly(vertices)
        self.cells = tuple(_readonly(c) for c in cells)
        sub = np.zeros(nc, dtype=np.int64) if subdomain is None else np.asarray(subdomain, dtype=np.int64)
        if sub.shape != (nc,):
            raise MeshError("subdomain tags must give one integer per cell")
        if sub.min() < 0:
            raise MeshError("subdomain tags must be nonnegative")
        self.subdomain = _readonly(sub)

        area = np.empty(nc)
        centroid = np.empty((nc, 2))
        diameter = np.empty(nc)
        for i, c in enumerate(cells):
            xy = vertices[c]
            a, g = polygon_area_centroid(xy)
            if a <= 0.0:
                raise MeshError(f"orientation: cell {i} is not counter-clockwise (signed area {a:.3e})")
            area[i] = a
            centroid[i] = g
            d = xy[:, None, :] - xy[None, :, :]
            diameter[i] = math.sqrt((d ** 2).sum(axis=2).max())
        self.cell_area = _readonly(area)
        self.cell_centroid = _readonly(centroid)
        self.cell_diameter = _readonly(diameter)
        if cell_points is None:
            cell_points = centroid
        cell_points = np.asarray(cell_points, dtype=float)
        if cell_points.shape != (nc, 2):
            raise MeshError("cell points must be an (ncells, 2) array")
        self.cell_points = _readonly(cell_points)

        self._build_faces(face_points)
        self.validate()
        self._quad_cache = {}

    # ------------------------------------------------------------------
    def _build_faces(self, face_points):
        directed = {}
        for t, c in enumerate(self.cells):
            n = len(c)
            for i in range(n):
                a, b = int(c[i]), int(c[(i + 1) % n])
                if (a, b) in directed:
                    raise MeshError(
                        f"orientation: edge ({a}, {b}) traversed in the same direction "
                        f"by cells {directed[(a, b)]} and {t}")
                directed[(a, b)] = t
        # cells are visited in ascending order, so the first visitor of an
        # edge is its lower-index neighbour T1
        face_id = {}
        fv, fc = [], []
        for t, c in enumerate(self.cells):
            n = len(c)
            for i in range(n):
                a, b = int(c[i]), int(c[(i + 1) % n])
                key = (min(a, b), max(a, b))
                if key not in face_id:
                    face_id[key] = len(fv)
                    fv.append((a, b))
                    fc.append((t, directed.get((b, a), -1)))
        self.face_vertices = _readonly(np.array(fv, dtype=np.int64))
        self.face_cells = _readonly(np.array(fc, dtype=np.int64))
        nf = len(fv)

        p0 = self.vertices[self.face_vertices[:, 0]]
        p1 = self.vertices[self.face_vertices[:, 1]]
        e = p1 - p0
        length = np.hypot(e[:, 0], e[:, 1])
        if np.any(length <= 0):
            raise MeshError("degenerate face of zero length")
        tangent = e / length[:, None]
        self.face_length = _readonly(length)
        self.face_tangent = _readonly(tangent)
        self.face_normal = _readonly(np.column_stack([tangent[:, 1], -tangent[:, 0]]))
        mid = 0.5 * (p0 + p1)
        self.face_midpoint = _readonly(mid)
        if face_points is None:
            face_points = mid
        face_points = np.asarray(face_points, dtype=float)
        if face_points.shape != (nf, 2):
            raise MeshError("face points must be an (nfaces, 2) array")
        self.face_points = _readonly(face_points)

        cell_faces, cell_signs = [], []
        for t, c in enumerate(self.cells):
            n = len(c)
            ids = np.empty(n, dtype=np.int64)
            sg = np.empty(n)
            for i in range(n):
                a, b = int(c[i]), int(c[(i + 1) % n])
                f = face_id[(min(a, b), max(a, b))]
                ids[i] = f
                sg[i] = 1.0 if self.face_cells[f, 0] == t else -1.0
            cell_faces.append(_readonly(ids))
            cell_signs.append(_readonly(sg))
        self.cell_faces = tuple(cell_faces)
        self.cell_signs = tuple(cell_signs)
        self.boundary_faces = _readonly(np.flatnonzero(self.face_cells[:, 1] < 0))
        self.internal_faces = _readonly(np.flatnonzero(self.face_cells[:, 1] >= 0))

        dist = []
        for t in range(len(self.cells)):
            f = self.cell_faces[t]
            n = self.face_normal[f] * self.cell_signs[t][:, None]
            x0 = self.vertices[self.face_vertices[f, 0]]
            dist.append(_readonly(((x0 - self.cell_points[t]) * n).sum(axis=1)))
        self.cell_distances = tuple(dist)

    # ------------------------------------------------------------------
    @property
    def ncells(self):
        return len(self.cells)

    @property
    def nfaces(self):
        return len(self.face_vertices)

    @property
    def nvertices(self):
        return len(self.vertices)

    @property
    def h(self):
        return float(self.cell_diameter.max())

    def cell(self, t):
        f = self.cell_faces[t]
        s = self.cell_signs[t]
        return CellView(
            index=t,
            vertices=self.vertices[self.cells[t]],
            area=float(self.cell_area[t]),
            centroid=self.cell_centroid[t],
            diameter=float(self.cell_diameter[t]),
            point=self.cell_points[t],
            subdomain=int(self.subdomain[t]),
            faces=f,
            normals=self.face_normal[f] * s[:, None],
            signs=s,
            lengths=self.face_length[f],
            distances=self.cell_distances[t],
            face_points=self.face_points[f],
            face_midpoints=self.face_midpoint[f],
        )

    def face_ends(self, f):
        a, b = self.face_vertices[f]
        return self.vertices[a], self.vertices[b]

    def cell_quadrature(self, t, degree):
        key = ("c", t, degree)
        q = self._quad_cache.get(key)
        if q is None:
            q = polygon_quadrature(self.vertices[self.cells[t]], degree, self.cell_centroid[t])
            self._quad_cache[key] = q
        return q

    def face_quadrature(self, f, degree):
        key = ("f", f, degree)
        q = self._quad_cache.get(key)
        if q is None:
            q = segment_quadrature(*self.face_ends(f), degree)
            self._quad_cache[key] = q
        return q

    def with_points(self, cell_points=None, face_points=None):
        """Copy of the mesh with relocated x_T and/or x_F."""
        return Mesh(self.vertices, self.cells, self.subdomain,
                    self.cell_points if cell_points is None else cell_points,
                    self.face_points if face_points is None else face_points)

    # ------------------------------------------------------------------
    def validate(self):
        """Check every geometric invariant; raises :class:`MeshError`."""
        counts = np.zeros(self.nfaces, dtype=np.int64)
        for t in range(self.ncells):
            counts[self.cell_faces[t]] += 1
        if np.any(counts > 2):
            raise MeshError("non-manifold connectivity: face shared by more than two cells")
        for t in range(self.ncells):
            f = self.cell_faces[t]
            n = self.face_normal[f] * self.cell_signs[t][:, None]
            L = self.face_length[f]
            hT = self.cell_diameter[t]
            closure = np.abs((L[:, None] * n).sum(axis=0)).max()
            if closure > 1e-12 * hT:
                raise MeshError(f"cell {t}: normals do not close (residual {closure:.3e})")
            d = self.cell_distances[t]
            if np.any(d <= 0):
                raise MeshError(f"cell {t}: d_TF <= 0, cell not star-shaped w.r.t. its point")
            s = (d * L).sum()
            if abs(s - 2 * self.cell_area[t]) > 1e-12 * 2 * self.cell_area[t]:
                raise MeshError(f"cell {t}: sum d_TF|F| = {s!r} differs from 2|T|")
        for f in self.internal_faces:
            t1, t2 = self.face_cells[f]
            if not t1 < t2:
                raise MeshError(f"orientation: face {f} neighbours not in ascending order")
        for f in range(self.nfaces):
            p0, p1 = self.face_ends(f)
            xf = self.face_points[f]
            # x_F must lie on the face segment
            e = p1 - p0
            s = np.dot(xf - p0, e) / np.dot(e, e)
            w = xf - p0
            off = abs(e[0] * w[1] - e[1] * w[0]) / np.linalg.norm(e)
            if off > 1e-12 * self.face_length[f] or s < -1e-12 or s > 1 + 1e-12:
                raise MeshError(f"face {f}: face point lies off the face")

    def regularity_metrics(self):
        return regularity_metrics(self)

    def __eq__(self, other):
        if not isinstance(other, Mesh):
            return NotImplemented
        return (np.array_equal(self.vertices, other.vertices)
                and len(self.cells) == len(other.cells)
                and all(np.array_equal(a, b) for a, b in zip(self.cells, other.cells))
                and np.array_equal(self.subdomain, other.subdomain)
                and np.array_equal(self.cell_points, other.cell_points)
                and np.array_equal(self.face_points, other.face_points))

    __hash__ = None

    def __repr__(self):
        return f"Mesh(ncells={self.ncells}, nfaces={self.nfaces}, h={self.h:.4g})"


# ----------------------------------------------------------------------
def build_cartesian(nx, ny, domain=(0.0, 1.0, 0.0, 1.0), n_subdomains_x=1):
    """Uniform ``nx`` x ``ny`` rectangles on ``domain = (x0, x1, y0, y1)``.

    Cells are split into ``n_subdomains_x`` vertical strips of equal width;
    ``nx`` must be a multiple of the strip count so that interfaces fall on
    mesh faces.
    """
    if nx < 1 or ny < 1:
        raise MeshError("nx and ny must be positive")
    x0, x1, y0, y1 = map(float, domain)
    if not (x1 > x0 and y1 > y0):
        raise MeshError("degenerate rectangle")
    if n_subdomains_x < 1 or nx % n_subdomains_x:
        raise MeshError("n_subdomains_x must divide nx (interfaces must lie on faces)")
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i, j):
        return j * (nx + 1) + i

    cells, sub = [], []
    per_strip = nx // n_subdomains_x
    for j in range(ny):
        for i in range(nx):
            cells.append([vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)])
            sub.append(i // per_strip)
    return Mesh(vertices, cells, sub)


def regularity_metrics(mesh):
    theta = 0.0
    for t in range(mesh.ncells):
        d = mesh.cell_distances[t]
        theta = max(theta, mesh.cell_diameter[t] / d.min() + len(d))
    eta = 0.0
    for f in mesh.internal_faces:
        t1, t2 = mesh.face_cells[f]
        d1 = _distance_to_face(mesh, t1, f)
        d2 = _distance_to_face(mesh, t2, f)
        eta = max(eta, d1 / d2 + d2 / d1)
    return RegularityMetrics(
        h=mesh.h,
        theta=float(theta),
        eta_jump=float(eta),
        max_faces_per_cell=max(len(c) for c in mesh.cells),
    )


def _distance_to_face(mesh, t, f):
    i = int(np.flatnonzero(mesh.cell_faces[t] == f)[0])
    return float(mesh.cell_distances[t][i])


def _constraint_edges(mesh):
    """Boundary and subdomain-interface edges, as vertex pairs."""
    edges = []
    for f in range(mesh.nfaces):
        t1, t2 = mesh.face_cells[f]
        if t2 < 0 or mesh.subdomain[t1] != mesh.subdomain[t2]:
            edges.append(tuple(mesh.face_vertices[f]))
    return edges


def perturb(mesh, amplitude, seed=0):
    """Randomly displace vertices by at most ``amplitude`` times the shortest
    incident face length.

    Vertices on the boundary or on subdomain interfaces slide only along
    their (straight) constraint line; corners and junctions stay fixed. Cell
    and face points are reset to centroids and midpoints.
    """
    if not 0.0 <= amplitude < 0.5:
        raise ValueError("amplitude must lie in [0, 0.5)")
    if amplitude == 0.0:
        return mesh
    rng = np.random.default_rng(seed)
    nv = mesh.nvertices
    lmin = np.full(nv, np.inf)
    for f in range(mesh.nfaces):
        a, b = mesh.face_vertices[f]
        lmin[a] = min(lmin[a], mesh.face_length[f])
        lmin[b] = min(lmin[b], mesh.face_length[f])
    dirs = [[] for _ in range(nv)]
    for a, b in _constraint_edges(mesh):
        e = mesh.vertices[b] - mesh.vertices[a]
        e = e / np.linalg.norm(e)
        dirs[a].append(e)
        dirs[b].append(e)

    # one draw per vertex keeps the stream independent of constraint type
    r = np.sqrt(rng.random(nv))
    phi = 2.0 * np.pi * rng.random(nv)
    u = rng.uniform(-1.0, 1.0, nv)
    new = mesh.vertices.copy()
    for v in range(nv):
        step = amplitude * lmin[v]
        if not dirs[v]:
            new[v] += step * r[v] * np.array([np.cos(phi[v]), np.sin(phi[v])])
            continue
        e0 = dirs[v][0]
        if all(abs(e0[0] * e[1] - e0[1] * e[0]) < 1e-12 for e in dirs[v]):
            new[v] += step * u[v] * e0
    try:
        return Mesh(new, mesh.cells, mesh.subdomain)
    except MeshError as exc:
        raise MeshError(f"perturbation produced an invalid mesh: {exc}") from exc


# ----------------------------------------------------------------------
def write_mesh(mesh, path):
    lines = ["polymesh 1", f"vertices {mesh.nvertices}"]
    lines += [f"{x!r} {y!r}" for x, y in mesh.vertices.tolist()]
    lines.append(f"cells {mesh.ncells}")
    lines += [" ".join(str(int(i)) for i in c) for c in mesh.cells]
    lines.append(f"subdomains {mesh.ncells}")
    lines += [str(int(s)) for s in mesh.subdomain]
    if not np.array_equal(mesh.cell_points, mesh.cell_centroid):
        lines.append(f"cellpoints {mesh.ncells}")
        lines += [f"{x!r} {y!r}" for x, y in mesh.cell_points.tolist()]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_mesh(path):
    """Parse the ``polymesh 1`` text format; validates all invariants."""
    with open(path) as fh:
        raw = fh.readlines()
    rows = []
    for lineno, line in enumerate(raw, start=1):
        text = line.split("#", 1)[0].strip()
        if text:
            rows.append((lineno, text))
    if not rows or rows[0][1] != "polymesh 1":
        raise MeshError(f"line {rows[0][0] if rows else 1}: expected header 'polymesh 1'")
    pos = 1
    sections = {}

    def take(count, lineno, name):
        nonlocal pos
        out = rows[pos:pos + count]
        if len(out) < count:
            raise MeshError(f"line {lineno}: section '{name}' truncated")
        pos += count
        return out

    while pos < len(rows):
        lineno, text = rows[pos]
        parts = text.split()
        if len(parts) != 2 or not parts[1].isdigit():
            raise MeshError(f"line {lineno}: expected '<section> <count>', got {text!r}")
        name, count = parts[0], int(parts[1])
        if name not in ("vertices", "cells", "subdomains", "cellpoints"):
            raise MeshError(f"line {lineno}: unknown section {name!r}")
        pos += 1
        sections[name] = (lineno, take(count, lineno, name))

    if "vertices" not in sections or "cells" not in sections:
        raise MeshError("missing 'vertices' or 'cells' section")

    def floats(entries, width):
        out = []
        for ln, text in entries:
            try:
                vals = [float(s) for s in text.split()]
            except ValueError:
                raise MeshError(f"line {ln}: malformed number in {text!r}") from None
            if len(vals) != width:
                raise MeshError(f"line {ln}: expected {width} values")
            out.append(vals)
        return np.array(out, dtype=float).reshape(-1, width)

    vertices = floats(sections["vertices"][1], 2)
    cells = []
    for ln, text in sections["cells"][1]:
        try:
            idx = [int(s) for s in text.split()]
        except ValueError:
            raise MeshError(f"line {ln}: malformed vertex index in {text!r}") from None
        if len(idx) < 3:
            raise MeshError(f"line {ln}: degenerate cell with {len(idx)} vertices")
        if min(idx) < 0 or max(idx) >= len(vertices):
            raise MeshError(f"line {ln}: vertex index out of range")
        cells.append(idx)
    sub = None
    if "subdomains" in sections:
        ln0, entries = sections["subdomains"]
        if len(entries) != len(cells):
            raise MeshError(f"line {ln0}: subdomain count does not match cells")
        try:
            sub = [int(t) for _, t in entries]
        except ValueError:
            raise MeshError(f"line {ln0}: malformed subdomain tag") from None
    cp = None
    if "cellpoints" in sections:
        ln0, entries = sections["cellpoints"]
        if len(entries) != len(cells):
            raise MeshError(f"line {ln0}: cellpoints count does not match cells")
        cp = floats(entries, 2)
    return Mesh(vertices, cells, sub, cp)
