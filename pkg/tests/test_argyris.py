import numpy as np
import pytest
import scipy.linalg
import sympy as sym

from plateflow.argyris import (assemble_bending, assemble_hessian_gram,
                               assemble_load, assemble_mass, build_space,
                               dof_integrals, field_from_full, interpolate,
                               monomial_table, EXPONENTS, PlateField)
from plateflow.meshing import build_square_mesh
from tests.conftest import poly_callables

_x, _y = sym.symbols("x y")


def random_quintic(rng):
    coeffs = rng.standard_normal(21)
    return sum(float(c) * _x ** int(i) * _y ** int(j)
               for c, (i, j) in zip(coeffs, EXPONENTS))


def interp_field_unconstrained(space, expr):
    v, g, h = poly_callables(expr)
    return interpolate(space, v, g, h)


def eval_full(space, full, pts, order=0):
    # evaluation helper that bypasses the H^2_0 constraint masking
    f = PlateField(space, np.zeros(space.num_free))
    tri = space.mesh.locate(pts)
    lp = space.local_coords(tri, pts)
    poly = np.einsum("tka,ta->tk", space.basis_coeffs[tri], full[space.tri_dofs[tri]])
    if order == 0:
        return np.einsum("mk,mk->m", monomial_table(lp), poly)
    if order == 1:
        g = [np.einsum("mk,mk->m", monomial_table(lp, *d), poly) for d in [(1, 0), (0, 1)]]
        return np.column_stack(g) / space.scales[tri, None]
    h = [np.einsum("mk,mk->m", monomial_table(lp, *d), poly)
         for d in [(2, 0), (1, 1), (0, 2)]]
    return np.column_stack(h) / space.scales[tri, None] ** 2


def test_dof_counts(plate_space2):
    mesh1 = build_square_mesh(1)
    sp1 = build_space(mesh1)
    assert sp1.num_dofs == 6 * 5 + 8 == 38
    assert plate_space2.num_dofs == 6 * plate_space2.mesh.num_vertices \
        + plate_space2.mesh.num_edges


def test_dof_duality_identity(plate_space2, rng):
    """The 21 DOF functionals applied to the 21 local basis functions are I."""
    space = plate_space2
    mesh = space.mesh
    for t in rng.choice(mesh.num_triangles, size=5, replace=False):
        actual = np.empty((21, 21))
        dofs = space.tri_dofs[t]
        verts = mesh.vertices[mesh.triangles[t]]
        mids = 0.5 * (mesh.vertices[mesh.edges[mesh.tri_edges[t], 0]]
                      + mesh.vertices[mesh.edges[mesh.tri_edges[t], 1]])
        normals = space.edge_normals[mesh.tri_edges[t]]
        for a in range(21):
            full = np.zeros(space.num_dofs)
            full[dofs[a]] = 1.0
            poly = np.einsum("ka,a->k", space.basis_coeffs[t], full[space.tri_dofs[t]])
            s = space.scales[t]
            for lv in range(3):
                lp = (verts[lv] - space.centers[t]) / s
                actual[6 * lv + 0, a] = monomial_table(lp) @ poly
                actual[6 * lv + 1, a] = monomial_table(lp, 1, 0) @ poly / s
                actual[6 * lv + 2, a] = monomial_table(lp, 0, 1) @ poly / s
                actual[6 * lv + 3, a] = monomial_table(lp, 2, 0) @ poly / s ** 2
                actual[6 * lv + 4, a] = monomial_table(lp, 1, 1) @ poly / s ** 2
                actual[6 * lv + 5, a] = monomial_table(lp, 0, 2) @ poly / s ** 2
            for le in range(3):
                lp = (mids[le] - space.centers[t]) / s
                dn = (normals[le, 0] * monomial_table(lp, 1, 0)
                      + normals[le, 1] * monomial_table(lp, 0, 1)) @ poly / s
                actual[18 + le, a] = dn
        np.testing.assert_allclose(actual, np.eye(21), atol=1e-9)


@pytest.mark.parametrize("level", [1, 2, 4])
def test_quintic_reproduction(level, rng):
    space = build_space(build_square_mesh(level))
    expr = random_quintic(rng)
    full = interp_field_unconstrained(space, expr)
    v, g, h = poly_callables(expr)
    pts = rng.random((50 * space.mesh.num_triangles, 2))
    np.testing.assert_allclose(eval_full(space, full, pts), v(pts),
                               atol=1e-9 * max(1, np.abs(v(pts)).max()))
    cent = space.mesh.corners().mean(axis=1)
    np.testing.assert_allclose(eval_full(space, full, cent, 1), g(cent), atol=1e-8)
    np.testing.assert_allclose(eval_full(space, full, cent, 2), h(cent), atol=1e-7)


def test_named_quintic_point_value(plate_space2):
    space = plate_space2
    full = interp_field_unconstrained(space, _x ** 2 * _y ** 3)
    val = eval_full(space, full, np.array([[0.3, 0.4]]))[0]
    assert abs(val - 0.00576) < 1e-12


def test_c1_continuity_across_interior_edges(plate_space2, rng):
    """Value and normal-derivative jumps vanish at interior edge midpoints."""
    space = plate_space2
    mesh = space.mesh
    expr = random_quintic(rng)
    full = interp_field_unconstrained(space, expr)
    interior = np.nonzero(~mesh.boundary_edge)[0]
    counts = np.zeros(mesh.num_edges, dtype=int)
    owners = {}
    for t in range(mesh.num_triangles):
        for e in mesh.tri_edges[t]:
            owners.setdefault(e, []).append(t)
            counts[e] += 1
    for e in interior:
        t1, t2 = owners[e]
        mid = 0.5 * (mesh.vertices[mesh.edges[e, 0]] + mesh.vertices[mesh.edges[e, 1]])
        nrm = space.edge_normals[e]
        sides = []
        for t in (t1, t2):
            lp = (mid - space.centers[t]) / space.scales[t]
            poly = np.einsum("ka,a->k", space.basis_coeffs[t], full[space.tri_dofs[t]])
            val = monomial_table(lp) @ poly
            dn = (nrm[0] * monomial_table(lp, 1, 0)
                  + nrm[1] * monomial_table(lp, 0, 1)) @ poly / space.scales[t]
            sides.append((val, dn))
        assert abs(sides[0][0] - sides[1][0]) < 1e-10
        assert abs(sides[0][1] - sides[1][1]) < 1e-10


def test_clamped_constraint_pattern():
    space = build_space(build_square_mesh(2))
    mesh = space.mesh
    # mid-side boundary vertex on y = 0: all but dyy constrained at the vertex
    v = np.where((np.abs(mesh.vertices[:, 1]) < 1e-14)
                 & (np.abs(mesh.vertices[:, 0] - 0.5) < 1e-14))[0][0]
    flags = space.constrained[6 * v: 6 * v + 6]
    assert list(flags) == [True, True, True, True, True, False]
    # corner vertex: everything constrained
    c = np.where((np.abs(mesh.vertices[:, 0]) < 1e-14)
                 & (np.abs(mesh.vertices[:, 1]) < 1e-14))[0][0]
    assert space.constrained[6 * c: 6 * c + 6].all()
    # all boundary edge DOFs constrained
    nv = mesh.num_vertices
    assert space.constrained[6 * nv:][mesh.boundary_edge].all()
    assert not space.constrained[6 * nv:][~mesh.boundary_edge].any()


def test_zero_field_evaluates_to_zero(plate_space2, rng):
    field = plate_space2.zero_field()
    pts = rng.random((20, 2))
    assert np.all(field.evaluate(pts, 0) == 0)
    assert np.all(field.evaluate(pts, 2) == 0)


def test_bending_matrix_symmetry_and_spd(plate_space2):
    K = assemble_bending(plate_space2).toarray()
    assert np.abs(K - K.T).max() <= 1e-12 * np.abs(K).max()
    scipy.linalg.cho_factor(K)  # raises if not positive definite


def test_bending_energy_matches_symbolic_oracle(plate_space2, rng):
    space = plate_space2
    expr = random_quintic(rng)
    K = assemble_bending(space, reduce_to_free=False)
    f = interp_field_unconstrained(space, expr)
    lap = sym.diff(expr, _x, 2) + sym.diff(expr, _y, 2)
    exact = float(sym.integrate(lap ** 2, (_x, 0, 1), (_y, 0, 1)))
    assert abs(f @ (K @ f) - exact) < 1e-9 * max(1.0, exact)


def test_mass_matrix_matches_symbolic_oracle(plate_space2, rng):
    space = plate_space2
    p_expr = random_quintic(rng)
    q_expr = random_quintic(rng)
    M1 = assemble_mass(space, rho=1.0, reduce_to_free=False)
    fp = interp_field_unconstrained(space, p_expr)
    fq = interp_field_unconstrained(space, q_expr)
    exact = float(sym.integrate(
        p_expr * q_expr
        + sym.diff(p_expr, _x) * sym.diff(q_expr, _x)
        + sym.diff(p_expr, _y) * sym.diff(q_expr, _y),
        (_x, 0, 1), (_y, 0, 1)))
    assert abs(fp @ (M1 @ fq) - exact) < 1e-9 * max(1.0, abs(exact))


def test_mass_rho_monotone(plate_space2, rng):
    x = rng.standard_normal(plate_space2.num_free)
    e1 = x @ (assemble_mass(plate_space2, rho=0.1) @ x)
    e2 = x @ (assemble_mass(plate_space2, rho=0.5) @ x)
    assert e2 >= e1
    with pytest.raises(ValueError):
        assemble_mass(plate_space2, rho=-1.0)


def test_bending_kernel_contains_linears(plate_space2):
    space = plate_space2
    K = assemble_bending(space, reduce_to_free=False)
    scale = np.abs(K.toarray()).max()
    for expr in (sym.Integer(1), _x, _y):
        f = interp_field_unconstrained(space, sym.sympify(expr))
        assert np.abs(K @ f).max() < 1e-10 * scale


def test_hessian_gram_kernel_is_exactly_linears():
    space = build_space(build_square_mesh(1))
    H = assemble_hessian_gram(space, reduce_to_free=False).toarray()
    w = scipy.linalg.eigvalsh(H)
    num_zero = int(np.sum(np.abs(w) < 1e-8 * np.abs(w).max()))
    assert num_zero == 3


def test_constraint_elimination_definite(plate_space2):
    H = assemble_hessian_gram(plate_space2).toarray()
    scipy.linalg.cho_factor(H)


def test_integral_form_matches_quadrature(plate_space2, rng):
    space = plate_space2
    b = dof_integrals(space)
    coeffs = rng.standard_normal(space.num_free)
    field = PlateField(space, coeffs)
    assert abs(coeffs @ b - field.integral()) < 1e-10 * max(1.0, abs(field.integral()))


def test_load_vector_matches_symbolic_oracle(plate_space2, rng):
    space = plate_space2
    g_expr = _x ** 3 * _y ** 2 + 2 * _x * _y
    q_expr = random_quintic(rng)
    v, grad, _ = poly_callables(g_expr)
    load = assemble_load(space, v, gradient=grad, rho=0.3, reduce_to_free=False)
    f = interp_field_unconstrained(space, q_expr)
    exact = float(sym.integrate(
        g_expr * q_expr
        + sym.Rational(3, 10) * (sym.diff(g_expr, _x) * sym.diff(q_expr, _x)
                                 + sym.diff(g_expr, _y) * sym.diff(q_expr, _y)),
        (_x, 0, 1), (_y, 0, 1)))
    assert abs(load @ f - exact) < 1e-9 * max(1.0, abs(exact))


def test_field_from_full_checks_constraints(plate_space2):
    full = np.ones(plate_space2.num_dofs)
    with pytest.raises(ValueError):
        field_from_full(plate_space2, full, check_constraints=True)
