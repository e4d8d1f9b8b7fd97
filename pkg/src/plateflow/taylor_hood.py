"""Taylor-Hood P2/P1 elements and the two discrete Stokes solution maps.

Velocity lives on vertex plus edge-midpoint nodes (three components per
node, interleaved), pressure on the mesh vertices.  The boundary value
problem for each map is the mixed system

    lam (u, v) + (grad u, grad v) - (div v, p) = F(v)
    -(div u, q)                                 = G(q)

with a scalar Lagrange multiplier pinning the pressure mean to zero.
Velocity Dirichlet data is imposed nodally: map ``f`` lifts a plate
trace ``[0, 0, phi]`` on the top face (zero extension into the
interior), map ``mu`` is the homogeneous problem driven by a volume
force.  The saddle matrix depends only on (mesh, lam) and its
factorization is reused across all right-hand sides, which is what makes
the column-by-column coupled assembly affordable.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .linsolve import IterativeSolveError, SparseFactorization, minres_saddle
from .quadrature import tet_rule

_TOL = 1e-12

INTERIOR_NODE = 0
OMEGA_NODE = 1
S_NODE = 2

#: local P2 node order: 4 vertices then the 6 edges (01, 02, 03, 12, 13, 23)
EDGE_PAIRS = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]


def p2_basis(xyz):
    """P2 shape functions at reference points (nq, 3) -> (nq, 10)."""
    x, y, z = xyz[:, 0], xyz[:, 1], xyz[:, 2]
    L = np.column_stack([1.0 - x - y - z, x, y, z])
    vertex = L * (2.0 * L - 1.0)
    edge = np.stack([4.0 * L[:, a] * L[:, b] for a, b in EDGE_PAIRS], axis=1)
    return np.concatenate([vertex, edge], axis=1)


def p2_basis_grad(xyz):
    """Reference gradients, (nq, 10, 3)."""
    x, y, z = xyz[:, 0], xyz[:, 1], xyz[:, 2]
    L = np.column_stack([1.0 - x - y - z, x, y, z])
    dL = np.array([[-1.0, -1.0, -1.0], [1.0, 0.0, 0.0],
                   [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    nq = len(xyz)
    out = np.empty((nq, 10, 3))
    for i in range(4):
        out[:, i] = (4.0 * L[:, i:i + 1] - 1.0) * dL[i]
    for e, (a, b) in enumerate(EDGE_PAIRS):
        out[:, 4 + e] = 4.0 * (L[:, a:a + 1] * dL[b] + L[:, b:b + 1] * dL[a])
    return out


def p1_basis(xyz):
    x, y, z = xyz[:, 0], xyz[:, 1], xyz[:, 2]
    return np.column_stack([1.0 - x - y - z, x, y, z])


@dataclass
class TaylorHoodSpace:
    """P2 velocity / P1 pressure space over a :class:`CubeMesh`."""

    mesh: object
    nodes: np.ndarray       # (nn, 3) vertex then edge-midpoint coordinates
    tet_nodes: np.ndarray   # (nt, 10)
    node_class: np.ndarray  # INTERIOR_NODE / OMEGA_NODE / S_NODE

    @property
    def num_nodes(self):
        return len(self.nodes)

    @property
    def num_velocity_dofs(self):
        return 3 * len(self.nodes)

    @property
    def num_pressure_dofs(self):
        return self.mesh.num_vertices

    @property
    def omega_nodes(self):
        return np.nonzero(self.node_class == OMEGA_NODE)[0]

    @property
    def interior_velocity_dofs(self):
        free_nodes = self.node_class == INTERIOR_NODE
        return np.nonzero(np.repeat(free_nodes, 3))[0]


def build_taylor_hood(mesh):
    mids = 0.5 * (mesh.vertices[mesh.edges[:, 0]] + mesh.vertices[mesh.edges[:, 1]])
    nodes = np.vstack([mesh.vertices, mids])
    tet_nodes = np.concatenate([mesh.tets, mesh.num_vertices + mesh.tet_edges],
                               axis=1)
    x, y, z = nodes[:, 0], nodes[:, 1], nodes[:, 2]
    on_side = (np.abs(x) < _TOL) | (np.abs(x - 1) < _TOL) \
        | (np.abs(y) < _TOL) | (np.abs(y - 1) < _TOL) | (np.abs(z + 1) < _TOL)
    on_top = np.abs(z) < _TOL
    node_class = np.full(len(nodes), INTERIOR_NODE, dtype=np.int8)
    node_class[on_side] = S_NODE
    node_class[on_top & ~on_side] = OMEGA_NODE
    return TaylorHoodSpace(mesh, nodes, tet_nodes, node_class)


def _element_geometry(space):
    corners = space.mesh.corners()
    J = corners[:, 1:] - corners[:, :1]          # (nt, 3, 3) rows are edge vectors
    detJ = np.linalg.det(J)
    Jinv = np.linalg.inv(J)
    return corners, J, detJ, Jinv


class StokesSolver:
    """Assembled Taylor-Hood operator at fixed ``lam`` with a reusable factorization.

    ``method='direct'`` uses a sparse LU; ``method='minres'`` switches to
    the preconditioned iterative fallback intended for meshes too large
    to factor.
    """

    def __init__(self, space, lam, load_degree=6, method="direct", rtol=1e-10):
        if lam <= 0:
            raise ValueError("lam must be positive")
        self.space = space
        self.lam = float(lam)
        self.load_degree = load_degree
        self.method = method
        self.rtol = rtol
        self._assemble()
        nI = len(self.interior)
        npres = space.num_pressure_dofs
        self.block_sizes = (nI, npres, 1)
        c_col = sp.csc_matrix(self.pressure_integrals[:, None])
        self.saddle = sp.bmat(
            [[self.W[self.interior][:, self.interior], self.B[self.interior], None],
             [self.B[self.interior].T, None, c_col],
             [None, c_col.T, None]], format="csc")
        if method == "direct":
            self._fact = SparseFactorization(self.saddle, symmetric_pattern=True)
        else:
            self._fact = None

    # -- assembly -----------------------------------------------------------

    def _assemble(self, chunk=4096):
        space = self.space
        rule = tet_rule(4)
        N = p2_basis(rule.xy)
        G = p2_basis_grad(rule.xy)
        P = p1_basis(rule.xy)
        corners, J, detJ, Jinv = _element_geometry(space)
        nt = space.mesh.num_tets
        nn = space.num_nodes
        npres = space.num_pressure_dofs

        mass_ij, mass_v = [], []
        stiff_v = []
        div_ij, div_v = [], []
        pint = np.zeros(npres)
        for lo in range(0, nt, chunk):
            hi = min(lo + chunk, nt)
            tn = space.tet_nodes[lo:hi]
            dJ = detJ[lo:hi]
            # rows of J are edge vectors, so x = v0 + J^T xhat and
            # grad_x = Jinv[k, l] grad_ref[l]
            gphys = np.einsum("qal,tkl->tqak", G, Jinv[lo:hi])
            w = rule.weights[None, :] * dJ[:, None]
            Me = np.einsum("qa,qb,tq->tab", N, N, w)
            Ke = np.einsum("tqak,tqbk,tq->tab", gphys, gphys, w)
            rows = np.repeat(tn, 10, axis=1).ravel()
            cols = np.tile(tn, (1, 10)).ravel()
            mass_ij.append((rows, cols))
            mass_v.append(Me.ravel())
            stiff_v.append(Ke.ravel())
            # divergence coupling: -(d/dx_c N_a, P_l)
            De = -np.einsum("tqac,ql,tq->tacl", gphys, P, w)
            vrows = (3 * tn[:, :, None, None]
                     + np.arange(3)[None, None, :, None])
            prows = space.mesh.tets[lo:hi][:, None, None, :]
            vrows, prows = np.broadcast_arrays(vrows, prows)
            div_ij.append((vrows.ravel(), prows.ravel()))
            div_v.append(De.ravel())
            np.add.at(pint, space.mesh.tets[lo:hi].ravel(),
                      np.einsum("ql,tq->tl", P, w).ravel())

        rows = np.concatenate([r for r, _ in mass_ij])
        cols = np.concatenate([c for _, c in mass_ij])
        M_s = sp.coo_matrix((np.concatenate(mass_v), (rows, cols)),
                            shape=(nn, nn)).tocsr()
        K_s = sp.coo_matrix((np.concatenate(stiff_v), (rows, cols)),
                            shape=(nn, nn)).tocsr()
        self.mass_scalar = M_s
        self.M = sp.kron(M_s, sp.identity(3), format="csr")
        self.K = sp.kron(K_s, sp.identity(3), format="csr")
        self.W = (self.lam * self.M + self.K).tocsr()
        vr = np.concatenate([r for r, _ in div_ij])
        pc = np.concatenate([c for _, c in div_ij])
        self.B = sp.coo_matrix((np.concatenate(div_v), (vr, pc)),
                               shape=(3 * nn, npres)).tocsr()
        self.pressure_integrals = pint
        self.interior = space.interior_velocity_dofs
        self._geom = (corners, detJ, Jinv)

    # -- right-hand sides ---------------------------------------------------

    def lift_trace(self, phi):
        """Zero-extended lifting [0, 0, phi] on the top face, 0 elsewhere."""
        space = self.space
        L = np.zeros(space.num_velocity_dofs)
        onodes = space.omega_nodes
        vals = np.asarray(phi(space.nodes[onodes][:, :2]), dtype=float)
        if vals.shape != (len(onodes),):
            raise ValueError("trace function must return one value per top-face node")
        L[3 * onodes + 2] = vals
        return L

    def lift_matrix(self, trace_values):
        """Sparse lifting columns from (n_omega, k) trace samples (dense or sparse)."""
        space = self.space
        T = sp.coo_matrix(trace_values)
        rows = 3 * space.omega_nodes[T.row] + 2
        return sp.csc_matrix((T.data, (rows, T.col)),
                             shape=(space.num_velocity_dofs, T.shape[1]))

    def volume_load(self, u_star):
        """Velocity load vector (u*, v) integrated at ``load_degree``."""
        space = self.space
        rule = tet_rule(self.load_degree)
        N = p2_basis(rule.xy)
        corners, detJ, _ = self._geom
        phys = np.einsum("qc,tcd->tqd", rule.points, corners)
        vals = np.asarray(u_star(phys.reshape(-1, 3)), dtype=float)
        vals = vals.reshape(phys.shape[0], phys.shape[1], 3)
        w = rule.weights[None, :] * detJ[:, None]
        Fe = np.einsum("tqc,qa,tq->tac", vals, N, w)
        load = np.zeros(space.num_velocity_dofs)
        idx = (3 * space.tet_nodes[:, :, None] + np.arange(3)[None, None, :])
        np.add.at(load, idx.ravel(), Fe.ravel())
        return load

    # -- solves --------------------------------------------------------------

    def solve_blocks(self, rhs):
        """Solve the saddle system for a vector or dense block of right-hand sides."""
        if self._fact is not None:
            sol = self._fact.solve(rhs)
            scale = np.linalg.norm(rhs)
            if scale > 0:
                res = np.linalg.norm(rhs - self.saddle @ sol)
                if res > max(self.rtol, 1e-9) * scale:
                    raise IterativeSolveError(
                        f"direct Stokes solve residual {res:.2e} exceeds tolerance")
            return sol
        nI = self.block_sizes[0]
        mdiag = np.concatenate([self.mass_diag_pressure(), [1.0]])
        return minres_saddle(self.saddle, rhs, nI,
                             self.W[self.interior][:, self.interior], mdiag,
                             rtol=self.rtol)

    def mass_diag_pressure(self):
        v = self.pressure_integrals
        return np.where(v > 0, v, 1.0)

    def map_f_rhs(self, lift, phi_integral):
        I = self.interior
        rhs_u = -(self.W @ lift)[I]
        rhs_p = -phi_integral * self.pressure_integrals - self.B.T @ lift
        if np.ndim(lift) == 2 or sp.issparse(lift):
            raise ValueError("map_f_rhs expects a single lifting vector")
        return np.concatenate([rhs_u, rhs_p, [0.0]])

    def solve_map_f(self, phi, phi_integral):
        """Discrete inhomogeneous-trace map: velocity with trace [0,0,phi], pressure.

        ``phi`` is a callable on (m, 2) arrays of top-face coordinates and
        ``phi_integral`` its integral over the plate.  Returns
        ``(velocity, pressure, multiplier)`` with the boundary lifting
        already added to the velocity vector.
        """
        L = self.lift_trace(phi)
        sol = self.solve_blocks(self.map_f_rhs(L, phi_integral))
        return self._unpack_velocity(sol, L)

    def solve_map_mu(self, u_star):
        """Discrete homogeneous-Dirichlet map driven by the volume force."""
        load = self.volume_load(u_star)
        nI, npres, _ = self.block_sizes
        rhs = np.concatenate([load[self.interior], np.zeros(npres), [0.0]])
        return self._unpack_velocity(self.solve_blocks(rhs))

    def _unpack_velocity(self, sol, lift=None):
        nI, npres, _ = self.block_sizes
        U = np.zeros(self.space.num_velocity_dofs) if lift is None else lift.copy()
        U[self.interior] = sol[:nI] if lift is None else U[self.interior] + sol[:nI]
        p = sol[nI:nI + npres]
        mult = float(sol[-1])
        return FluidField(self.space, U), PressureField(self.space, p), mult

    # -- diagnostics ----------------------------------------------------------

    def divergence_residual(self, velocity):
        """b(u_h, q) for every pressure test function; ~0 for map-mu solutions."""
        return self.B.T @ velocity.coeffs


@dataclass
class FluidField:
    """Interleaved P2 velocity coefficients (3 per node)."""

    space: TaylorHoodSpace
    coeffs: np.ndarray

    def nodal_values(self):
        return self.coeffs.reshape(-1, 3)

    def vertex_values(self):
        return self.nodal_values()[:self.space.mesh.num_vertices]

    def norms(self, solver):
        """(L2 norm, H1 seminorm) from the assembled mass/stiffness matrices."""
        u = self.coeffs
        return (float(np.sqrt(u @ (solver.M @ u))),
                float(np.sqrt(u @ (solver.K @ u))))


@dataclass
class PressureField:
    """P1 pressure coefficients on the mesh vertices."""

    space: TaylorHoodSpace
    coeffs: np.ndarray
    mean_zero: bool = True

    def with_constant(self, c):
        return PressureField(self.space, self.coeffs + c, mean_zero=False)

    def mean(self, solver):
        return float(solver.pressure_integrals @ self.coeffs)
