"""Reduced plate saddle problem coupled through discrete fluid maps.

Eliminating the fluid turns the resolvent system into a constrained
problem for the plate displacement alone:

    a(w1, phi) + b(phi, c) = F(phi),    b(w1, r) = 0,

where a(.,.) adds three pieces: the lam^2-weighted plate velocity mass,
the bending energy, and a fluid Gram term lam [ (grad f(psi), grad
f(phi)) + lam (f(psi), f(phi)) ] built from the trace-driven Stokes map.
Assembling the fluid piece column by column costs one Stokes solve per
free plate DOF against a single factorization.

Instead of storing every full fluid solution, the Gram entries are
contracted through the discrete Stokes equations themselves: testing the
momentum equation of solve i with the interior part of solve j leaves

    a_lam(f_i, f_j) = b(lift_j, pi_i) + a_lam(f_i, lift_j),

which only involves the pressure near the plate and the velocity on the
top layer of elements (the lifting is a zero extension).  The same
contraction collapses the fluid terms of the load functional.  The
direct six-term evaluation is kept (:func:`apply_load_functional`) and
tested against this fast path.
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from .argyris import (PlateField, assemble_bending, assemble_load,
                      assemble_mass, basis_matrix_at_points, dof_integrals)
from .linsolve import solve_saddle_dense, solve_saddle_schur
from .quadrature import triangle_rule


@dataclass
class ResolventData:
    """Right-hand side of the resolvent system plus the operator parameters.

    ``plate_load`` is the already-applied combination
    ``P_rho(lam w1* + w2*)``; when it is ``None`` the load is integrated
    by parts from ``w2_star`` (and the gradients, for rho > 0).
    """

    lam: float
    rho: float
    w1_star: Callable
    u_star: Callable
    plate_load: Optional[Callable] = None
    w2_star: Optional[Callable] = None
    w1_star_grad: Optional[Callable] = None
    w2_star_grad: Optional[Callable] = None
    w1_star_lap: Optional[Callable] = None

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("lam must be positive")
        if self.rho < 0:
            raise ValueError("rho must be nonnegative")
        if self.plate_load is None and self.w2_star is None:
            raise ValueError("either plate_load or w2_star must be supplied")

    @classmethod
    def from_case(cls, case):
        return cls(lam=case.lam, rho=case.rho,
                   w1_star=case.w1_star, u_star=case.u_star,
                   plate_load=case.plate_load, w2_star=case.w2_star,
                   w1_star_grad=case.w1_star_grad,
                   w1_star_lap=case.w1_star_lap)

    def plate_load_vector(self, plate_space, degree=10):
        if self.plate_load is not None:
            return assemble_load(plate_space, self.plate_load, degree=degree)
        lam = self.lam

        def combo(pts):
            return lam * self.w1_star(pts) + self.w2_star(pts)

        if self.rho == 0:
            return assemble_load(plate_space, combo, degree=degree)
        if self.w1_star_grad is None or self.w2_star_grad is None:
            raise ValueError("rho > 0 loads need data gradients")

        def combo_grad(pts):
            return lam * self.w1_star_grad(pts) + self.w2_star_grad(pts)

        return assemble_load(plate_space, combo, gradient=combo_grad,
                             rho=self.rho, degree=degree)


@dataclass
class CombinationField:
    """Evaluable ``lam * field - shift`` used for the recovered plate velocity."""

    lam: float
    field: PlateField
    shift_value: Callable
    shift_gradient: Optional[Callable] = None

    def __call__(self, pts):
        return self.evaluate(pts, 0)

    def evaluate(self, pts, order=0):
        if order == 0:
            return self.lam * self.field.evaluate(pts, 0) - self.shift_value(pts)
        if order == 1:
            if self.shift_gradient is None:
                raise ValueError("shift gradient not available")
            return self.lam * self.field.evaluate(pts, 1) - self.shift_gradient(pts)
        raise ValueError("only value and gradient are defined for this field")


@dataclass
class ReducedSystem:
    """Dense constrained plate system with the assembly byproducts."""

    A: np.ndarray                # a_lam on free plate DOFs
    constraint: np.ndarray       # column b(phi_i, 1) = -integral(phi_i)
    load: np.ndarray
    bending: sp.csr_matrix
    mass_rho: sp.csr_matrix
    fluid_gram: np.ndarray
    trace_matrix: sp.csr_matrix  # plate basis values at top-face fluid nodes
    fluid_cache: dict


def _integral_over_plate(plate_space, fn, degree=12):
    rule = triangle_rule(degree)
    corners = plate_space.mesh.corners()
    phys = np.einsum("qc,tcd->tqd", rule.points, corners)
    vals = np.asarray(fn(phys.reshape(-1, 2)), dtype=float).reshape(phys.shape[:2])
    w = rule.weights[None, :] * (2.0 * plate_space.areas)[:, None]
    return float(np.einsum("tq,tq->", vals, w))


def assemble_reduced_system(data, plate_space, stokes, chunk=96,
                            load_degree=10, dense_gram=False):
    """Build the dense reduced saddle system for the plate displacement.

    ``stokes`` must be a :class:`~plateflow.taylor_hood.StokesSolver`
    sharing ``lam`` with ``data``.  ``dense_gram=True`` switches the fluid
    Gram assembly to the memory-heavy full-solution product; it exists as
    a cross-check and for tests.
    """
    if abs(stokes.lam - data.lam) > 1e-14:
        raise ValueError("Stokes solver lam differs from data lam")
    lam = data.lam
    K_bend = assemble_bending(plate_space)
    M_rho = assemble_mass(plate_space, rho=data.rho)
    ints = dof_integrals(plate_space)
    nfree = plate_space.num_free

    onodes_xy = stokes.space.nodes[stokes.space.omega_nodes][:, :2]
    T = basis_matrix_at_points(plate_space, onodes_xy)
    L = stokes.lift_matrix(T)                       # (nvel, nfree)
    D = (stokes.B.T @ L).tocsc()                    # (npres, nfree)
    G = (stokes.W @ L).tocsc()                      # (nvel, nfree)

    nI, npres, _ = stokes.block_sizes
    interior = stokes.interior
    rows_G = np.unique(G.indices)
    rows_D = np.unique(D.indices)
    G_csr = G.tocsr()
    G_R = G_csr[rows_G].toarray()
    D_R = D.tocsr()[rows_D].toarray()
    L_R = L.tocsr()[rows_G].toarray()
    # positions of the restricted velocity rows inside the interior block
    in_interior = np.isin(rows_G, interior)
    interior_pos = np.searchsorted(interior, rows_G[in_interior])

    U_R = np.empty((len(rows_G), nfree))
    Pi_R = np.empty((len(rows_D), nfree))
    G_int = G_csr[interior].tocsc()
    c_p = stokes.pressure_integrals
    for lo in range(0, nfree, chunk):
        hi = min(lo + chunk, nfree)
        cols = np.arange(lo, hi)
        rhs = np.empty((nI + npres + 1, hi - lo))
        rhs[:nI] = -G_int[:, cols].toarray()
        rhs[nI:nI + npres] = -np.outer(c_p, ints[cols]) - D[:, cols].toarray()
        rhs[-1] = 0.0
        sol = stokes.solve_blocks(rhs)
        U_chunk = L_R[:, cols].copy()
        U_chunk[in_interior] += sol[:nI][interior_pos]
        U_R[:, cols] = U_chunk
        Pi_R[:, cols] = sol[nI:nI + npres][rows_D]

    fluid_gram = lam * (Pi_R.T @ D_R + U_R.T @ G_R)
    fluid_gram = 0.5 * (fluid_gram + fluid_gram.T)
    if dense_gram:
        fluid_gram = _dense_fluid_gram(stokes, plate_space, T, ints, lam)

    # data-driven fluid solves shared by the load and the recovery stage
    w1s_trace = np.asarray(data.w1_star(onodes_xy), dtype=float)
    w1s_int = _integral_over_plate(plate_space, data.w1_star)
    L_w = stokes.lift_matrix(sp.csc_matrix(w1s_trace[:, None])).toarray().ravel()
    sol_w = stokes.solve_blocks(stokes.map_f_rhs(L_w, w1s_int))
    U_w = L_w.copy()
    U_w[interior] += sol_w[:nI]
    pi_w = sol_w[nI:nI + npres]
    ustar_load = stokes.volume_load(data.u_star)
    rhs_mu = np.concatenate([ustar_load[interior], np.zeros(npres), [0.0]])
    sol_mu = stokes.solve_blocks(rhs_mu)
    U_mu = np.zeros(stokes.space.num_velocity_dofs)
    U_mu[interior] = sol_mu[:nI]
    q_mu = sol_mu[nI:nI + npres]

    load_fluid = (D.T @ (pi_w - q_mu)) + (G.T @ (U_w - U_mu)) + (L.T @ ustar_load)
    load_plate = data.plate_load_vector(plate_space, degree=load_degree)
    load = np.asarray(load_fluid).ravel() + load_plate

    A = (lam ** 2 * M_rho + K_bend).toarray() + fluid_gram
    A = 0.5 * (A + A.T)
    cache = dict(U_w=U_w, pi_w=pi_w, U_mu=U_mu, q_mu=q_mu,
                 ustar_load=ustar_load, w1s_int=w1s_int)
    return ReducedSystem(A=A, constraint=-ints, load=load, bending=K_bend,
                         mass_rho=M_rho, fluid_gram=fluid_gram, trace_matrix=T,
                         fluid_cache=cache)


def _dense_fluid_gram(stokes, plate_space, T, ints, lam):
    """Reference fluid Gram via full solution vectors (small meshes only)."""
    nfree = plate_space.num_free
    cols = []
    for j in range(nfree):
        tr = np.asarray(T[:, j].todense()).ravel()
        L_j = stokes.lift_matrix(sp.csc_matrix(tr[:, None])).toarray().ravel()
        sol = stokes.solve_blocks(stokes.map_f_rhs(L_j, ints[j]))
        U = L_j
        U[stokes.interior] += sol[:stokes.block_sizes[0]]
        cols.append(U)
    F = np.column_stack(cols)
    W = stokes.W
    return lam * (F.T @ (W @ F))


@dataclass
class CoupledSolution:
    """Recovered discrete solution of the resolvent system."""

    w1h: PlateField
    w2h: CombinationField
    uh: object             # FluidField
    ph: object             # PressureField, constant included
    c_tilde: float
    system: ReducedSystem
    stokes: object
    data: ResolventData


def solve_resolvent(data, plate_space, stokes, system=None, use_schur=False,
                    **assembly_kwargs):
    """Solve the reduced system and recover plate velocity, fluid and pressure."""
    if system is None:
        system = assemble_reduced_system(data, plate_space, stokes,
                                         **assembly_kwargs)
    solve = solve_saddle_schur if use_schur else solve_saddle_dense
    alpha, mult = solve(system.A, system.constraint, system.load, 0.0)
    c_tilde = float(mult[0])
    w1h = PlateField(plate_space, alpha)
    w2h = CombinationField(data.lam, w1h, data.w1_star, data.w1_star_grad)

    # u_h = f0h(lam w1h - w1*) + lift + mu_h(u*);  p_h = pi_h + q_h + c
    onodes_xy = stokes.space.nodes[stokes.space.omega_nodes][:, :2]
    trace = data.lam * (system.trace_matrix @ alpha) \
        - np.asarray(data.w1_star(onodes_xy), dtype=float)
    phi_int = data.lam * float(system.constraint @ alpha) * -1.0 \
        - system.fluid_cache["w1s_int"]
    L = stokes.lift_matrix(sp.csc_matrix(trace[:, None])).toarray().ravel()
    nI, npres, _ = stokes.block_sizes
    sol = stokes.solve_blocks(stokes.map_f_rhs(L, phi_int))
    U = L.copy()
    U[stokes.interior] += sol[:nI]
    U += system.fluid_cache["U_mu"]
    p_nodal = sol[nI:nI + npres] + system.fluid_cache["q_mu"] + c_tilde

    from .taylor_hood import FluidField, PressureField
    uh = FluidField(stokes.space, U)
    ph = PressureField(stokes.space, p_nodal, mean_zero=False)
    return CoupledSolution(w1h=w1h, w2h=w2h, uh=uh, ph=ph, c_tilde=c_tilde,
                           system=system, stokes=stokes, data=data)


def apply_load_functional(data, plate_space, stokes, free_dof, system,
                          load_degree=10):
    """Direct six-term evaluation of the load functional at one basis function.

    Uses the cached data solves plus one fresh Stokes solve for the basis
    function itself; exists as an independent check on the contracted
    load assembly in :func:`assemble_reduced_system`.
    """
    cache = system.fluid_cache
    ints = -system.constraint
    onodes_xy = stokes.space.nodes[stokes.space.omega_nodes][:, :2]
    T = system.trace_matrix
    tr = np.asarray(T[:, free_dof].todense()).ravel()
    L_j = stokes.lift_matrix(sp.csc_matrix(tr[:, None])).toarray().ravel()
    nI, npres, _ = stokes.block_sizes
    sol = stokes.solve_blocks(stokes.map_f_rhs(L_j, ints[free_dof]))
    U_j = L_j
    U_j[stokes.interior] += sol[:nI]

    M, K = stokes.M, stokes.K
    lam = data.lam
    U_w, U_mu = cache["U_w"], cache["U_mu"]
    value = (U_w @ (K @ U_j)) + lam * (U_w @ (M @ U_j)) \
        - (U_mu @ (K @ U_j)) - lam * (U_mu @ (M @ U_j)) \
        + cache["ustar_load"] @ U_j
    plate_vec = data.plate_load_vector(plate_space, degree=load_degree)
    return value + plate_vec[free_dof]
