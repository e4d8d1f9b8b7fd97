"""Quintic Argyris elements on criss-cross square meshes.

Each triangle carries 21 degrees of freedom: value, both first
derivatives and the three second derivatives at every vertex, plus the
normal derivative at every edge midpoint.  The local basis is built per
element by inverting the 21 x 21 matrix of DOF functionals applied to
the quintic monomials in centered/scaled element coordinates; this keeps
the construction free of reference-element derivative transformations
and is well conditioned for the meshes used here.

Edge normal convention: the global edge normal is the counterclockwise
90-degree rotation of the edge direction running from the lower to the
higher vertex id.  Both elements sharing an edge use that same global
normal for the midpoint DOF, so the assembled space is C^1 conforming
with no per-element sign flips.

The clamped-plate subspace of H^2_0 is realized by eliminating, on the
axis-aligned square, every boundary DOF forced by w = dw/dn = 0: values,
both gradients, the tangential-tangential and tangential-normal second
derivatives for each incident boundary direction (all three second
derivatives at corners), and all boundary edge-midpoint normal
derivatives.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .linsolve import solve_sparse
from .quadrature import triangle_rule

_TOL = 1e-12

# quintic monomial exponents, 21 in total
EXPONENTS = np.array([(i, d - i) for d in range(6) for i in range(d + 1)],
                     dtype=np.int64)

DOFS_PER_VERTEX = 6  # value, dx, dy, dxx, dxy, dyy


def _falling(e, k):
    out = np.ones(e.shape, dtype=float)
    for t in range(k):
        out = out * np.maximum(e - t, 0)
    return out


def monomial_table(pts, dx=0, dy=0):
    """Derivatives of the 21 quintic monomials at ``pts`` (..., 2)."""
    p = np.asarray(pts, dtype=float)
    i = EXPONENTS[:, 0]
    j = EXPONENTS[:, 1]
    coef = _falling(i, dx) * _falling(j, dy)
    pi = np.maximum(i - dx, 0)
    pj = np.maximum(j - dy, 0)
    return coef * p[..., 0:1] ** pi * p[..., 1:2] ** pj


@dataclass
class ArgyrisSpace:
    """Global quintic Argyris space with H^2_0 constraints on the unit square."""

    mesh: object
    tri_dofs: np.ndarray          # (nt, 21) global DOF ids
    basis_coeffs: np.ndarray      # (nt, 21, 21) monomial coeffs per basis function
    centers: np.ndarray           # (nt, 2) element centroids
    scales: np.ndarray            # (nt,) element diameters
    areas: np.ndarray             # (nt,)
    edge_normals: np.ndarray      # (ne, 2) global unit normals
    normal_orientation: np.ndarray  # (nt, 3) sign of global vs outward normal
    constrained: np.ndarray       # (ndof,) bool
    free_index: np.ndarray        # (ndof,) position among free DOFs or -1

    @property
    def num_dofs(self):
        return self.constrained.size

    @property
    def num_free(self):
        return int(np.count_nonzero(~self.constrained))

    def local_coords(self, tri_ids, pts):
        return (pts - self.centers[tri_ids]) / self.scales[tri_ids, None]

    def zero_field(self):
        return PlateField(self, np.zeros(self.num_free))


def build_space(mesh):
    """Construct the Argyris space over a :class:`SquareMesh`."""
    tris = mesh.triangles
    verts = mesh.vertices
    corners = verts[tris]
    areas = mesh.areas()
    if np.any(areas <= 0):
        raise ValueError("mesh contains a degenerate or inverted triangle")

    nv = mesh.num_vertices
    ne = mesh.num_edges
    nt = mesh.num_triangles

    # global DOF layout: 6 per vertex then 1 per edge
    tri_dofs = np.empty((nt, 21), dtype=np.int64)
    for lv in range(3):
        base = tris[:, lv] * DOFS_PER_VERTEX
        for d in range(DOFS_PER_VERTEX):
            tri_dofs[:, 6 * lv + d] = base + d
    tri_dofs[:, 18:21] = DOFS_PER_VERTEX * nv + mesh.tri_edges

    # global edge normals: CCW rotation of (lo -> hi) direction
    evec = verts[mesh.edges[:, 1]] - verts[mesh.edges[:, 0]]
    elen = np.linalg.norm(evec, axis=1)
    edge_normals = np.column_stack([-evec[:, 1], evec[:, 0]]) / elen[:, None]

    centers = corners.mean(axis=1)
    d01 = np.linalg.norm(corners[:, 0] - corners[:, 1], axis=1)
    d12 = np.linalg.norm(corners[:, 1] - corners[:, 2], axis=1)
    d20 = np.linalg.norm(corners[:, 2] - corners[:, 0], axis=1)
    scales = np.maximum(np.maximum(d01, d12), d20)

    # 21 x 21 DOF-functional matrix per element, in local coordinates
    V = np.empty((nt, 21, 21))
    s = scales[:, None]
    for lv in range(3):
        lp = (corners[:, lv] - centers) / scales[:, None]
        V[:, 6 * lv + 0] = monomial_table(lp)
        V[:, 6 * lv + 1] = monomial_table(lp, 1, 0) / s
        V[:, 6 * lv + 2] = monomial_table(lp, 0, 1) / s
        V[:, 6 * lv + 3] = monomial_table(lp, 2, 0) / s ** 2
        V[:, 6 * lv + 4] = monomial_table(lp, 1, 1) / s ** 2
        V[:, 6 * lv + 5] = monomial_table(lp, 0, 2) / s ** 2
    local_edges = [(0, 1), (1, 2), (2, 0)]
    normal_orientation = np.empty((nt, 3), dtype=np.int8)
    for le, (a, b) in enumerate(local_edges):
        mid = 0.5 * (corners[:, a] + corners[:, b])
        lp = (mid - centers) / scales[:, None]
        nrm = edge_normals[mesh.tri_edges[:, le]]
        V[:, 18 + le] = (nrm[:, 0:1] * monomial_table(lp, 1, 0)
                         + nrm[:, 1:2] * monomial_table(lp, 0, 1)) / s
        tang = corners[:, b] - corners[:, a]
        outward = np.column_stack([tang[:, 1], -tang[:, 0]])  # CW: points away from CCW interior
        normal_orientation[:, le] = np.where(
            np.einsum("ij,ij->i", nrm, outward) > 0, 1, -1)
    basis_coeffs = np.linalg.inv(V)

    constrained = _clamped_constraints(mesh)
    free_index = np.full(constrained.size, -1, dtype=np.int64)
    free_index[~constrained] = np.arange(np.count_nonzero(~constrained))

    return ArgyrisSpace(mesh, tri_dofs, basis_coeffs, centers, scales, areas,
                        edge_normals, normal_orientation, constrained, free_index)


def _clamped_constraints(mesh):
    nv = mesh.num_vertices
    constrained = np.zeros(DOFS_PER_VERTEX * nv + mesh.num_edges, dtype=bool)
    xy = mesh.vertices
    for v in np.nonzero(mesh.boundary_vertex)[0]:
        x, y = xy[v]
        constrained[6 * v: 6 * v + 3] = True  # value, dx, dy
        on_h = min(y, 1.0 - y) < _TOL        # lies on y = 0 or y = 1
        on_v = min(x, 1.0 - x) < _TOL
        if on_h:
            constrained[6 * v + 3] = True    # dxx (tangential-tangential)
            constrained[6 * v + 4] = True    # dxy (tangential-normal)
        if on_v:
            constrained[6 * v + 5] = True
            constrained[6 * v + 4] = True
    constrained[DOFS_PER_VERTEX * nv + np.nonzero(mesh.boundary_edge)[0]] = True
    return constrained


@dataclass
class PlateField:
    """Coefficient vector over the free Argyris DOFs, evaluable anywhere in the square."""

    space: ArgyrisSpace
    coeffs: np.ndarray

    def full_coeffs(self):
        full = np.zeros(self.space.num_dofs)
        full[~self.space.constrained] = self.coeffs
        return full

    def _element_polys(self, tri_ids, full=None):
        if full is None:
            full = self.full_coeffs()
        local = full[self.space.tri_dofs[tri_ids]]
        return np.einsum("tka,ta->tk", self.space.basis_coeffs[tri_ids], local)

    def __call__(self, points):
        return self.evaluate(points, 0)

    def evaluate(self, points, order=0):
        """Value (order 0), gradient (1) or Hessian (2, as dxx, dxy, dyy)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        tri_ids = self.space.mesh.locate(pts)
        lp = self.space.local_coords(tri_ids, pts)
        poly = self._element_polys(tri_ids)
        s = self.space.scales[tri_ids]
        if order == 0:
            return np.einsum("mk,mk->m", monomial_table(lp), poly)
        if order == 1:
            gx = np.einsum("mk,mk->m", monomial_table(lp, 1, 0), poly)
            gy = np.einsum("mk,mk->m", monomial_table(lp, 0, 1), poly)
            return np.column_stack([gx, gy]) / s[:, None]
        if order == 2:
            hxx = np.einsum("mk,mk->m", monomial_table(lp, 2, 0), poly)
            hxy = np.einsum("mk,mk->m", monomial_table(lp, 1, 1), poly)
            hyy = np.einsum("mk,mk->m", monomial_table(lp, 0, 2), poly)
            return np.column_stack([hxx, hxy, hyy]) / s[:, None] ** 2
        raise ValueError("derivative order must be 0, 1 or 2")

    def integral(self):
        """Integral over the unit square (exact for the quintic field)."""
        space = self.space
        rule = triangle_rule(5)
        vals = _tabulate(space, rule, 0, 0)
        poly = self._element_polys(np.arange(len(space.areas)))
        per_q = np.einsum("tqk,tk->tq", vals, poly)
        return float(np.einsum("tq,q,t->", per_q, rule.weights, 2.0 * space.areas))


def interpolate(space, value, gradient, hessian):
    """Argyris interpolant of a smooth function given exact derivatives.

    ``value(pts) -> (m,)``, ``gradient(pts) -> (m, 2)`` and
    ``hessian(pts) -> (m, 3)`` (dxx, dxy, dyy row order).  Returns the full
    DOF vector; use :func:`field_from_full` to obtain a constrained field.
    """
    mesh = space.mesh
    nv = mesh.num_vertices
    full = np.zeros(space.num_dofs)
    pts = mesh.vertices
    full[0:6 * nv:6] = value(pts)
    grad = gradient(pts)
    full[1:6 * nv:6] = grad[:, 0]
    full[2:6 * nv:6] = grad[:, 1]
    hess = hessian(pts)
    full[3:6 * nv:6] = hess[:, 0]
    full[4:6 * nv:6] = hess[:, 1]
    full[5:6 * nv:6] = hess[:, 2]
    mids = 0.5 * (mesh.vertices[mesh.edges[:, 0]] + mesh.vertices[mesh.edges[:, 1]])
    gm = gradient(mids)
    full[6 * nv:] = np.einsum("ij,ij->i", gm, space.edge_normals)
    return full


def field_from_full(space, full, check_constraints=False, tol=1e-9):
    if check_constraints:
        bad = np.abs(full[space.constrained]).max(initial=0.0)
        if bad > tol:
            raise ValueError(f"constrained DOFs not zero (max {bad:.2e})")
    return PlateField(space, full[~space.constrained].copy())


def _tabulate(space, rule, dx, dy):
    """Monomial derivative tables at mapped quadrature points, (nt, nq, 21)."""
    corners = space.mesh.corners()
    bary = rule.points  # (nq, 3)
    phys = np.einsum("qc,tcd->tqd", bary, corners)
    lp = (phys - space.centers[:, None, :]) / space.scales[:, None, None]
    return monomial_table(lp, dx, dy)


def _scatter(space, local, symmetric=True):
    """Assemble per-element 21x21 blocks into a CSR matrix over all DOFs."""
    nt = local.shape[0]
    rows = np.repeat(space.tri_dofs, 21, axis=1).ravel()
    cols = np.tile(space.tri_dofs, (1, 21)).ravel()
    mat = sp.coo_matrix((local.ravel(), (rows, cols)),
                        shape=(space.num_dofs, space.num_dofs)).tocsr()
    if symmetric:
        mat = 0.5 * (mat + mat.T)
    return mat


def _element_gram(space, tables, weights):
    """Sum_q w_q 2|T| (sum_i tab_i a)(sum_i tab_i b) for basis functions a, b."""
    nt = space.basis_coeffs.shape[0]
    acc = np.zeros((nt, 21, 21))
    w = weights[None, :] * (2.0 * space.areas)[:, None]
    for tab in tables:
        vals = np.einsum("tqk,tka->tqa", tab, space.basis_coeffs)
        acc += np.einsum("tqa,tqb,tq->tab", vals, vals, w)
    return acc


def assemble_bending(space, degree=6, reduce_to_free=True):
    """Stiffness matrix of the form integral(laplacian a * laplacian b)."""
    rule = triangle_rule(degree)
    s2 = space.scales[:, None, None] ** 2
    lap = (_tabulate(space, rule, 2, 0) + _tabulate(space, rule, 0, 2)) / s2
    K = _scatter(space, _element_gram(space, [lap], rule.weights))
    return _maybe_reduce(space, K, reduce_to_free)


def assemble_hessian_gram(space, degree=6, reduce_to_free=True):
    """Matrix of the Hessian inner product (used by the seminorm variant)."""
    rule = triangle_rule(degree)
    s2 = space.scales[:, None, None] ** 2
    hxx = _tabulate(space, rule, 2, 0) / s2
    hxy = _tabulate(space, rule, 1, 1) / s2
    hyy = _tabulate(space, rule, 0, 2) / s2
    local = _element_gram(space, [hxx, hyy], rule.weights)
    local += 2.0 * _element_gram(space, [hxy], rule.weights)
    return _maybe_reduce(space, _scatter(space, local), reduce_to_free)


def assemble_mass(space, rho=0.0, degree=10, reduce_to_free=True):
    """Matrix of (a, b) + rho (grad a, grad b); rho = 0 is the plain mass matrix."""
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    rule = triangle_rule(degree)
    vals = _tabulate(space, rule, 0, 0)
    local = _element_gram(space, [vals], rule.weights)
    if rho > 0:
        s = space.scales[:, None, None]
        gx = _tabulate(space, rule, 1, 0) / s
        gy = _tabulate(space, rule, 0, 1) / s
        local += rho * _element_gram(space, [gx, gy], rule.weights)
    return _maybe_reduce(space, _scatter(space, local), reduce_to_free)


def _maybe_reduce(space, mat, reduce_to_free):
    if not reduce_to_free:
        return mat
    free = ~space.constrained
    return mat[free][:, free].tocsr()


def assemble_load(space, value, gradient=None, rho=0.0, degree=10,
                  reduce_to_free=True):
    """Load vector of (g, a) + rho (grad g, grad a) for a callable ``g``.

    ``gradient`` is only needed when ``rho > 0`` and must return (m, 2).
    """
    rule = triangle_rule(degree)
    corners = space.mesh.corners()
    phys = np.einsum("qc,tcd->tqd", rule.points, corners)
    flat = phys.reshape(-1, 2)
    g = np.asarray(value(flat), dtype=float).reshape(phys.shape[:2])
    w = rule.weights[None, :] * (2.0 * space.areas)[:, None]
    vals = _tabulate(space, rule, 0, 0)
    basis = np.einsum("tqk,tka->tqa", vals, space.basis_coeffs)
    local = np.einsum("tq,tqa,tq->ta", g, basis, w)
    if rho > 0:
        if gradient is None:
            raise ValueError("gradient callable required for rho > 0 loads")
        gg = np.asarray(gradient(flat), dtype=float).reshape(phys.shape[:2] + (2,))
        s = space.scales[:, None, None]
        for d, (dx, dy) in enumerate([(1, 0), (0, 1)]):
            tab = _tabulate(space, rule, dx, dy) / s
            gbasis = np.einsum("tqk,tka->tqa", tab, space.basis_coeffs)
            local += rho * np.einsum("tq,tqa,tq->ta", gg[..., d], gbasis, w)
    vec = np.zeros(space.num_dofs)
    np.add.at(vec, space.tri_dofs.ravel(), local.ravel())
    return vec[~space.constrained] if reduce_to_free else vec


def dof_integrals(space, reduce_to_free=True):
    """Vector of integrals of every basis function (the constraint form)."""
    rule = triangle_rule(5)
    vals = _tabulate(space, rule, 0, 0)
    basis = np.einsum("tqk,tka->tqa", vals, space.basis_coeffs)
    w = rule.weights[None, :] * (2.0 * space.areas)[:, None]
    local = np.einsum("tqa,tq->ta", basis, w)
    vec = np.zeros(space.num_dofs)
    np.add.at(vec, space.tri_dofs.ravel(), local.ravel())
    return vec[~space.constrained] if reduce_to_free else vec


def basis_matrix_at_points(space, points):
    """Sparse (npoints, nfree) matrix of free basis function values at ``points``.

    Rows corresponding to points on shared edges use the deterministic
    triangle choice of :meth:`SquareMesh.locate`; values agree across the
    edge by C^1 conformity.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    tri_ids = space.mesh.locate(pts)
    lp = space.local_coords(tri_ids, pts)
    vals = np.einsum("mk,mka->ma", monomial_table(lp), space.basis_coeffs[tri_ids])
    cols = space.tri_dofs[tri_ids]
    rows = np.repeat(np.arange(len(pts)), 21)
    keep = ~space.constrained[cols.ravel()]
    free_cols = space.free_index[cols.ravel()[keep]]
    mat = sp.coo_matrix((vals.ravel()[keep], (rows[keep], free_cols)),
                        shape=(len(pts), space.num_free))
    return mat.tocsr()


def solve_xi(space):
    """Energy projection of the unit load: (lap xi, lap psi) = (1, psi)."""
    K = assemble_bending(space)
    b = dof_integrals(space)
    xi = solve_sparse(K, b)
    return PlateField(space, xi)


def discrete_infsup_constant(space, xi=None):
    """Computable inf-sup lower bound: the clamped-plate energy norm of xi.

    Uses the discrete identity integral(xi_h) = |lap xi_h|^2, exact up to
    the solver residual; the quadrature-based version of that identity is
    exercised separately by the verification suite.
    """
    if xi is None:
        xi = solve_xi(space)
    energy = dof_integrals(space) @ xi.coeffs
    return float(np.sqrt(max(energy, 0.0)))
