"""Structured criss-cross meshes of the unit square and the unit cube.

The square ``(0,1)^2`` at refinement level ``n`` is an ``n x n`` grid with
every cell split through its center into 4 triangles (``4 n^2`` elements).
The cube ``(0,1)^2 x (-1,0)`` splits every grid cell through its cell
center and 6 face centers into 24 tetrahedra (``24 n^3`` elements).  The
top boundary plane ``z = 0`` of the cube mesh reproduces the square mesh
of the same level exactly, which is what the plate/fluid coupling relies
on.

Vertex ordering is deterministic (grid points lexicographically, then
face centers, then cell centers), so repeated runs are bit-identical.
All arrays are frozen after construction; meshes can be shared freely.
"""

from dataclasses import dataclass, field

import numpy as np

# boundary face tags for the cube mesh
OMEGA = 1      # top face z = 0 (the plate region)
S_WALL = 2     # the five remaining walls
INTERIOR = 0

_TOL = 1e-12
_MAX_LEVEL = 1024


def _freeze(*arrays):
    for a in arrays:
        a.flags.writeable = False


def _unique_edges(cells, pairs):
    """Unique sorted vertex pairs of ``cells`` plus per-cell edge ids."""
    raw = cells[:, pairs].reshape(-1, 2)
    raw = np.sort(raw, axis=1)
    edges, inverse = np.unique(raw, axis=0, return_inverse=True)
    return edges, inverse.reshape(len(cells), len(pairs))


@dataclass
class SquareMesh:
    """Criss-cross triangulation of the unit square."""

    level: int
    vertices: np.ndarray          # (nv, 2)
    triangles: np.ndarray         # (nt, 3) CCW
    edges: np.ndarray = field(init=False)        # (ne, 2) sorted pairs
    tri_edges: np.ndarray = field(init=False)    # (nt, 3) edge ids, local order (01, 12, 20)
    boundary_edge: np.ndarray = field(init=False)
    boundary_vertex: np.ndarray = field(init=False)

    def __post_init__(self):
        pairs = [(0, 1), (1, 2), (2, 0)]
        self.edges, self.tri_edges = _unique_edges(self.triangles, pairs)
        counts = np.bincount(self.tri_edges.ravel(), minlength=len(self.edges))
        self.boundary_edge = counts == 1
        self.boundary_vertex = np.zeros(len(self.vertices), dtype=bool)
        self.boundary_vertex[self.edges[self.boundary_edge].ravel()] = True
        _freeze(self.vertices, self.triangles, self.edges, self.tri_edges,
                self.boundary_edge, self.boundary_vertex)

    @property
    def num_vertices(self):
        return len(self.vertices)

    @property
    def num_edges(self):
        return len(self.edges)

    @property
    def num_triangles(self):
        return len(self.triangles)

    def corners(self):
        """Vertex coordinates per triangle, shape (nt, 3, 2)."""
        return self.vertices[self.triangles]

    def areas(self):
        c = self.corners()
        d1 = c[:, 1] - c[:, 0]
        d2 = c[:, 2] - c[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def locate(self, points):
        """Triangle index containing each point of ``points`` (m, 2).

        Points must lie in the closed unit square; points on shared edges
        are assigned deterministically (south, east, north, west priority
        within a cell).
        """
        p = np.atleast_2d(np.asarray(points, dtype=float))
        if np.any(p < -_TOL) or np.any(p > 1.0 + _TOL):
            raise ValueError("point outside the unit square")
        n = self.level
        ij = np.clip((p * n).astype(int), 0, n - 1)
        xi = p[:, 0] * n - ij[:, 0]
        eta = p[:, 1] * n - ij[:, 1]
        local = np.full(len(p), -1, dtype=int)
        west = xi <= np.minimum(eta, 1.0 - eta)
        north = eta >= np.maximum(xi, 1.0 - xi)
        east = xi >= np.maximum(eta, 1.0 - eta)
        south = eta <= np.minimum(xi, 1.0 - xi)
        local[west] = 3
        local[north] = 2
        local[east] = 1
        local[south] = 0
        return 4 * (ij[:, 0] * n + ij[:, 1]) + local


def build_square_mesh(level):
    """Criss-cross mesh of the unit square with ``4 * level**2`` triangles."""
    n = _check_level(level)
    g = np.arange(n + 1) / n
    gi, gj = np.meshgrid(g, g, indexing="ij")
    grid = np.column_stack([gi.ravel(), gj.ravel()])
    c = (np.arange(n) + 0.5) / n
    ci, cj = np.meshgrid(c, c, indexing="ij")
    centers = np.column_stack([ci.ravel(), cj.ravel()])
    vertices = np.vstack([grid, centers])

    def vid(i, j):
        return i * (n + 1) + j

    ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    ii, jj = ii.ravel(), jj.ravel()
    c00 = vid(ii, jj)
    c10 = vid(ii + 1, jj)
    c11 = vid(ii + 1, jj + 1)
    c01 = vid(ii, jj + 1)
    mid = (n + 1) ** 2 + ii * n + jj
    tris = np.empty((n * n, 4, 3), dtype=np.int64)
    tris[:, 0] = np.column_stack([c00, c10, mid])   # south
    tris[:, 1] = np.column_stack([c10, c11, mid])   # east
    tris[:, 2] = np.column_stack([c11, c01, mid])   # north
    tris[:, 3] = np.column_stack([c01, c00, mid])   # west
    return SquareMesh(n, vertices, tris.reshape(-1, 3))


@dataclass
class CubeMesh:
    """24-tets-per-cell subdivision of ``(0,1)^2 x (-1,0)``."""

    level: int
    vertices: np.ndarray      # (nv, 3)
    tets: np.ndarray          # (nt, 4) positively oriented
    edges: np.ndarray = field(init=False)       # (ne, 2)
    tet_edges: np.ndarray = field(init=False)   # (nt, 6), local order (01,02,03,12,13,23)
    faces: np.ndarray = field(init=False)       # (nf, 3) sorted triples
    face_tag: np.ndarray = field(init=False)    # OMEGA / S_WALL / INTERIOR

    def __post_init__(self):
        pairs = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
        self.edges, self.tet_edges = _unique_edges(self.tets, pairs)
        trip = [(1, 2, 3), (0, 2, 3), (0, 1, 3), (0, 1, 2)]
        raw = np.sort(self.tets[:, trip].reshape(-1, 3), axis=1)
        self.faces, inv = np.unique(raw, axis=0, return_inverse=True)
        counts = np.bincount(inv, minlength=len(self.faces))
        self.face_tag = np.full(len(self.faces), INTERIOR, dtype=np.int8)
        boundary = counts == 1
        z = self.vertices[:, 2]
        on_top = np.all(np.abs(z[self.faces]) < _TOL, axis=1)
        self.face_tag[boundary & on_top] = OMEGA
        self.face_tag[boundary & ~on_top] = S_WALL
        _freeze(self.vertices, self.tets, self.edges, self.tet_edges,
                self.faces, self.face_tag)

    @property
    def num_vertices(self):
        return len(self.vertices)

    @property
    def num_edges(self):
        return len(self.edges)

    @property
    def num_tets(self):
        return len(self.tets)

    def corners(self):
        return self.vertices[self.tets]

    def volumes(self):
        c = self.corners()
        d = c[:, 1:] - c[:, :1]
        return np.linalg.det(d) / 6.0

    def boundary_faces(self, tag):
        return self.faces[self.face_tag == tag]


def build_cube_mesh(level):
    """Criss-cross mesh of the cube with ``24 * level**3`` tetrahedra."""
    n = _check_level(level)
    g = np.arange(n + 1) / n
    h = (np.arange(n) + 0.5) / n

    def stack3(a, b, c):
        A, B, C = np.meshgrid(a, b, c, indexing="ij")
        return np.column_stack([A.ravel(), B.ravel(), C.ravel()])

    grid = stack3(g, g, g)
    fx = stack3(g, h, h)
    fy = stack3(h, g, h)
    fz = stack3(h, h, g)
    cc = stack3(h, h, h)
    vertices = np.vstack([grid, fx, fy, fz, cc])
    vertices[:, 2] -= 1.0

    b0 = (n + 1) ** 3
    b1 = b0 + (n + 1) * n * n
    b2 = b1 + n * (n + 1) * n
    b3 = b2 + n * n * (n + 1)

    def vid(i, j, k):
        return (i * (n + 1) + j) * (n + 1) + k

    def fxid(i, j, k):
        return b0 + (i * n + j) * n + k

    def fyid(i, j, k):
        return b1 + (i * (n + 1) + j) * n + k

    def fzid(i, j, k):
        return b2 + (i * n + j) * (n + 1) + k

    def ccid(i, j, k):
        return b3 + (i * n + j) * n + k

    ii, jj, kk = np.meshgrid(np.arange(n), np.arange(n), np.arange(n),
                             indexing="ij")
    ii, jj, kk = ii.ravel(), jj.ravel(), kk.ravel()
    v = {(di, dj, dk): vid(ii + di, jj + dj, kk + dk)
         for di in (0, 1) for dj in (0, 1) for dk in (0, 1)}
    center = ccid(ii, jj, kk)
    # (4 cyclic corners, face center) per cell face
    face_loops = [
        ([(0, 0, 0), (0, 1, 0), (0, 1, 1), (0, 0, 1)], fxid(ii, jj, kk)),
        ([(1, 0, 0), (1, 1, 0), (1, 1, 1), (1, 0, 1)], fxid(ii + 1, jj, kk)),
        ([(0, 0, 0), (1, 0, 0), (1, 0, 1), (0, 0, 1)], fyid(ii, jj, kk)),
        ([(0, 1, 0), (1, 1, 0), (1, 1, 1), (0, 1, 1)], fyid(ii, jj + 1, kk)),
        ([(0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0)], fzid(ii, jj, kk)),
        ([(0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1)], fzid(ii, jj, kk + 1)),
    ]
    tets = []
    for loop, fc in face_loops:
        for a in range(4):
            qa = v[loop[a]]
            qb = v[loop[(a + 1) % 4]]
            tets.append(np.column_stack([qa, qb, fc, center]))
    tets = np.concatenate(tets, axis=0)
    # enforce positive orientation
    c = vertices[tets]
    vol = np.linalg.det(c[:, 1:] - c[:, :1])
    flip = vol < 0
    tets[flip, 0], tets[flip, 1] = tets[flip, 1], tets[flip, 0].copy()
    return CubeMesh(n, vertices, tets)


def refine(levels, dim=2):
    """Meshes for a strictly increasing sequence of refinement levels."""
    levels = [int(l) for l in levels]
    if not levels or any(b <= a for a, b in zip(levels, levels[1:])):
        raise ValueError("levels must be a nonempty strictly increasing sequence")
    builder = build_square_mesh if dim == 2 else build_cube_mesh
    return [builder(l) for l in levels]


def _check_level(level):
    n = int(level)
    if n < 1:
        raise ValueError(f"mesh level must be >= 1, got {level}")
    if n > _MAX_LEVEL:
        raise ValueError(f"mesh level {level} exceeds supported maximum {_MAX_LEVEL}")
    return n
