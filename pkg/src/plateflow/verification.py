"""Error norms, the discrete energy identity, and the convergence study.

Plate errors are integrated triangle by triangle with a high-order rule
(degree 12 by default); the reported H^2 quantity is the full Hessian
seminorm, with the Laplacian seminorm available behind a flag.  For
fields in the clamped space the two coincide up to quadrature error,
which the test suite exploits as a consistency check.  Fluid errors use
the tetrahedral rule of degree 6.  Convergence rates are the base-2 log
of consecutive error ratios, matching meshes that are refined by a
factor of two per step.
"""

import csv
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .argyris import build_space
from .coupled import ResolventData, solve_resolvent
from .manufactured import manufactured_case
from .meshing import build_cube_mesh, build_square_mesh
from .quadrature import tet_rule, triangle_rule
from .taylor_hood import (StokesSolver, build_taylor_hood, p1_basis, p2_basis,
                          p2_basis_grad)


def zero_scalar(pts):
    return np.zeros(len(np.atleast_2d(pts)))


def zero_vector(pts):
    return np.zeros((len(np.atleast_2d(pts)), 3))


def zero_jacobian(pts):
    return np.zeros((len(np.atleast_2d(pts)), 3, 3))


def plate_error_norms(field, exact_value, exact_gradient, exact_hessian,
                      degree=12, h2_variant="hessian"):
    """(H2 seminorm, H1 seminorm, L2) errors of a plate field.

    ``field`` is anything with ``evaluate(points, order)`` following the
    :class:`~plateflow.argyris.PlateField` convention (Hessian rows are
    dxx, dxy, dyy).  ``h2_variant`` selects the full Hessian seminorm or
    the Laplacian seminorm.
    """
    mesh = field.space.mesh if hasattr(field, "space") else field.mesh
    rule = triangle_rule(degree)
    corners = mesh.corners()
    phys = np.einsum("qc,tcd->tqd", rule.points, corners)
    flat = phys.reshape(-1, 2)
    areas = mesh.areas()
    w = (rule.weights[None, :] * (2.0 * areas)[:, None]).ravel()

    dv = field.evaluate(flat, 0) - exact_value(flat)
    dg = field.evaluate(flat, 1) - exact_gradient(flat)
    dh = field.evaluate(flat, 2) - exact_hessian(flat)
    e_l2 = float(np.sqrt(w @ dv ** 2))
    e_h1 = float(np.sqrt(w @ (dg ** 2).sum(axis=1)))
    if h2_variant == "hessian":
        dens = dh[:, 0] ** 2 + 2.0 * dh[:, 1] ** 2 + dh[:, 2] ** 2
    elif h2_variant == "laplacian":
        dens = (dh[:, 0] + dh[:, 2]) ** 2
    else:
        raise ValueError("h2_variant must be 'hessian' or 'laplacian'")
    e_h2 = float(np.sqrt(w @ dens))
    return e_h2, e_h1, e_l2


def plate_field_integral(field, degree=12):
    """Quadrature integral of an evaluable plate field over the square."""
    mesh = field.space.mesh if hasattr(field, "space") else field.mesh
    rule = triangle_rule(degree)
    phys = np.einsum("qc,tcd->tqd", rule.points, mesh.corners())
    w = (rule.weights[None, :] * (2.0 * mesh.areas())[:, None]).ravel()
    return float(w @ field.evaluate(phys.reshape(-1, 2), 0))


def fluid_error_norms(velocity, pressure, exact_u, exact_u_jac,
                      exact_p=None, degree=6):
    """(L2 velocity, H1 seminorm velocity, L2 pressure) errors."""
    space = velocity.space
    rule = tet_rule(degree)
    N = p2_basis(rule.xy)
    G = p2_basis_grad(rule.xy)
    P1 = p1_basis(rule.xy)
    corners = space.mesh.corners()
    J = corners[:, 1:] - corners[:, :1]
    detJ = np.linalg.det(J)
    Jinv = np.linalg.inv(J)
    phys = np.einsum("qc,tcd->tqd", rule.points, corners)
    flat = phys.reshape(-1, 3)
    w = rule.weights[None, :] * detJ[:, None]

    Uel = velocity.nodal_values()[space.tet_nodes]
    uh = np.einsum("qa,tac->tqc", N, Uel)
    du = uh - exact_u(flat).reshape(phys.shape[0], -1, 3)
    gph = np.einsum("qal,tkl->tqak", G, Jinv)
    jh = np.einsum("tqak,tac->tqck", gph, Uel)
    dj = jh - exact_u_jac(flat).reshape(phys.shape[0], -1, 3, 3)
    e_l2 = float(np.sqrt(np.einsum("tqc,tqc,tq->", du, du, w)))
    e_h1 = float(np.sqrt(np.einsum("tqck,tqck,tq->", dj, dj, w)))

    ph = np.einsum("ql,tl->tq", P1, pressure.coeffs[space.mesh.tets])
    if exact_p is not None:
        ph = ph - exact_p(flat).reshape(phys.shape[:2])
    e_p = float(np.sqrt(np.einsum("tq,tq,tq->", ph, ph, w)))
    return e_l2, e_h1, e_p


def energy_identity(solution, degree=12):
    """Discrete residual of lam ||x||^2 + ||grad u||^2 = (x*, x).

    Returns ``(residual, energy)`` where ``energy = lam ||x_h||^2`` in the
    coupled norm; the relative residual is their quotient.  Requires the
    closed-form combination fields of the rho = 0 data.
    """
    data = solution.data
    if data.w2_star is None or data.w1_star_lap is None:
        raise ValueError("energy identity needs w2_star and w1_star_lap data")
    lam = data.lam
    sys = solution.system
    alpha = solution.w1h.coeffs
    bend = float(alpha @ (sys.bending @ alpha))

    mesh = solution.w1h.space.mesh
    rule = triangle_rule(degree)
    phys = np.einsum("qc,tcd->tqd", rule.points, mesh.corners())
    flat = phys.reshape(-1, 2)
    w = (rule.weights[None, :] * (2.0 * mesh.areas())[:, None]).ravel()
    w2h_vals = solution.w2h.evaluate(flat, 0)
    plate_vel = float(w @ w2h_vals ** 2)
    if data.rho > 0:
        g = solution.w2h.evaluate(flat, 1)
        plate_vel += data.rho * float(w @ (g ** 2).sum(axis=1))

    U = solution.uh.coeffs
    stokes = solution.stokes
    u_l2sq = float(U @ (stokes.M @ U))
    u_h1sq = float(U @ (stokes.K @ U))
    lhs = lam * (bend + plate_vel + u_l2sq) + u_h1sq

    hess = solution.w1h.evaluate(flat, 2)
    lap_w1h = hess[:, 0] + hess[:, 2]
    pair_bend = float(w @ (data.w1_star_lap(flat) * lap_w1h))
    pair_vel = float(w @ (data.w2_star(flat) * w2h_vals))
    pair_fluid = float(sys.fluid_cache["ustar_load"] @ U)
    rhs = pair_bend + pair_vel + pair_fluid

    energy = lam * (bend + plate_vel + u_l2sq)
    return abs(lhs - rhs), energy


@dataclass
class LevelRecord:
    level: int
    char_length: float
    plate_elements: int
    fluid_elements: int
    plate_h2: float
    plate_h1: float
    plate_l2: float
    fluid_l2: float
    fluid_h1: float
    pressure_l2: float
    energy_residual_rel: Optional[float] = None

    ERROR_COLUMNS = ("plate_h2", "plate_h1", "plate_l2",
                     "fluid_l2", "fluid_h1", "pressure_l2")


@dataclass
class ConvergenceReport:
    lam: float
    rho: float
    h2_variant: str
    records: list = field(default_factory=list)

    def rates(self):
        """log2 error ratios of consecutive levels, one dict per mesh pair."""
        out = []
        for a, b in zip(self.records, self.records[1:]):
            row = {"pair": f"{a.level}->{b.level}"}
            for col in LevelRecord.ERROR_COLUMNS:
                ea, eb = getattr(a, col), getattr(b, col)
                row[col] = float(np.log2(ea / eb)) if ea > 0 and eb > 0 else np.nan
            out.append(row)
        return out

    def write_csv(self, errors_path, rates_path=None):
        with open(errors_path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["level", "elements", "char_length"]
                        + list(LevelRecord.ERROR_COLUMNS) + ["energy_residual_rel"])
            for r in self.records:
                wr.writerow([r.level, r.plate_elements, f"{r.char_length:.10g}"]
                            + [f"{getattr(r, c):.12e}" for c in LevelRecord.ERROR_COLUMNS]
                            + ["" if r.energy_residual_rel is None
                               else f"{r.energy_residual_rel:.12e}"])
        if rates_path is not None:
            with open(rates_path, "w", newline="") as fh:
                wr = csv.writer(fh)
                wr.writerow(["pair"] + list(LevelRecord.ERROR_COLUMNS))
                for row in self.rates():
                    wr.writerow([row["pair"]]
                                + [f"{row[c]:.4f}" for c in LevelRecord.ERROR_COLUMNS])

    def plate_table(self):
        head = ["elements", "h", "H2 seminorm", "H1 seminorm", "L2"]
        rows = [[str(r.plate_elements), f"{r.char_length:g}",
                 f"{r.plate_h2:.3e}", f"{r.plate_h1:.3e}", f"{r.plate_l2:.3e}"]
                for r in self.records]
        return _align(head, rows, title="plate displacement errors")

    def fluid_table(self):
        head = ["elements", "h", "L2 velocity", "H1 velocity", "L2 pressure"]
        rows = [[str(r.fluid_elements), f"{r.char_length:g}",
                 f"{r.fluid_l2:.3e}", f"{r.fluid_h1:.3e}", f"{r.pressure_l2:.3e}"]
                for r in self.records]
        return _align(head, rows, title="fluid errors")

    def rate_table(self):
        head = ["pair"] + [c for c in LevelRecord.ERROR_COLUMNS]
        rows = [[row["pair"]] + [f"{row[c]:.2f}" for c in LevelRecord.ERROR_COLUMNS]
                for row in self.rates()]
        return _align(head, rows, title="observed convergence rates (log2 ratios)")


def _align(head, rows, title=None):
    cols = [head] + rows
    widths = [max(len(r[i]) for r in cols) for i in range(len(head))]
    lines = [] if title is None else [title]
    lines.append("  ".join(h.rjust(w) for h, w in zip(head, widths)))
    lines.append("  ".join("-" * w for w in widths))
    for r in rows:
        lines.append("  ".join(v.rjust(w) for v, w in zip(r, widths)))
    return "\n".join(lines)


def convergence_study(levels, lam=1.0, rho=0.0, case=None, h2_variant="hessian",
                      plate_error_degree=12, fluid_error_degree=6,
                      fluid_levels=None, progress=None, **solver_kwargs):
    """Solve the manufactured problem per level and report errors and rates.

    ``fluid_levels`` overrides the fluid mesh level per entry (defaults to
    the plate levels); deterministic for fixed inputs.
    """
    levels = [int(l) for l in levels]
    if len(levels) < 1 or any(b <= a for a, b in zip(levels, levels[1:])):
        raise ValueError("levels must be strictly increasing")
    if case is None:
        case = manufactured_case(lam=lam, rho=rho)
    data = ResolventData.from_case(case)
    fluid_levels = levels if fluid_levels is None else [int(l) for l in fluid_levels]
    if len(fluid_levels) != len(levels):
        raise ValueError("fluid_levels must match levels")

    report = ConvergenceReport(lam=lam, rho=rho, h2_variant=h2_variant)
    for lvl, flvl in zip(levels, fluid_levels):
        if progress:
            progress(f"level {lvl}: building spaces")
        plate_space = build_space(build_square_mesh(lvl))
        th_space = build_taylor_hood(build_cube_mesh(flvl))
        stokes = StokesSolver(th_space, lam=lam, **solver_kwargs)
        if progress:
            progress(f"level {lvl}: solving coupled system "
                     f"({plate_space.num_free} plate DOFs, "
                     f"{th_space.num_velocity_dofs} velocity DOFs)")
        sol = solve_resolvent(data, plate_space, stokes)
        e_h2, e_h1, e_l2 = plate_error_norms(
            sol.w1h, case.w1, case.w1_grad, case.w1_hess,
            degree=plate_error_degree, h2_variant=h2_variant)
        f_l2, f_h1, f_p = fluid_error_norms(
            sol.uh, sol.ph, case.u, case.u_jac, degree=fluid_error_degree)
        resid_rel = None
        if data.w2_star is not None and data.w1_star_lap is not None:
            resid, energy = energy_identity(sol)
            resid_rel = resid / energy
        report.records.append(LevelRecord(
            level=lvl, char_length=1.0 / lvl,
            plate_elements=plate_space.mesh.num_triangles,
            fluid_elements=th_space.mesh.num_tets,
            plate_h2=e_h2, plate_h1=e_h1, plate_l2=e_l2,
            fluid_l2=f_l2, fluid_h1=f_h1, pressure_l2=f_p,
            energy_residual_rel=resid_rel))
        if progress:
            progress(f"level {lvl}: plate H2 error {e_h2:.3e}, "
                     f"fluid H1 error {f_h1:.3e}")
    return report


def infsup_study(levels, reference_level=None):
    """Inf-sup witness per level plus observed orders toward a fine reference.

    Returns ``(betas, beta_ref, orders)`` where ``orders[k]`` compares the
    reference gap of consecutive levels.
    """
    from .argyris import discrete_infsup_constant

    levels = [int(l) for l in levels]
    betas = [discrete_infsup_constant(build_space(build_square_mesh(lvl)))
             for lvl in levels]
    if reference_level is None:
        reference_level = 2 * max(levels)
    beta_ref = discrete_infsup_constant(
        build_space(build_square_mesh(reference_level)))
    gaps = [beta_ref - b for b in betas]
    orders = [float(np.log2(a / b)) if a > 0 and b > 0 else np.nan
              for a, b in zip(gaps, gaps[1:])]
    return betas, beta_ref, orders
