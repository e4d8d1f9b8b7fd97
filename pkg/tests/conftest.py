import numpy as np
import pytest
import sympy as sym

from plateflow import meshing
from plateflow.argyris import build_space


def poly_callables(expr):
    """value / gradient / hessian callables for a sympy expression in x, y."""
    x, y = sym.symbols("x y")
    funcs = {
        "v": expr,
        "gx": sym.diff(expr, x), "gy": sym.diff(expr, y),
        "hxx": sym.diff(expr, x, 2), "hxy": sym.diff(expr, x, y),
        "hyy": sym.diff(expr, y, 2),
    }
    lam = {k: sym.lambdify((x, y), f, "numpy") for k, f in funcs.items()}

    def at(f, pts):
        return np.broadcast_to(np.asarray(f(pts[:, 0], pts[:, 1]), dtype=float),
                               (len(pts),)).copy()

    value = lambda pts: at(lam["v"], pts)
    gradient = lambda pts: np.column_stack([at(lam["gx"], pts), at(lam["gy"], pts)])
    hessian = lambda pts: np.column_stack(
        [at(lam["hxx"], pts), at(lam["hxy"], pts), at(lam["hyy"], pts)])
    return value, gradient, hessian


@pytest.fixture(scope="session")
def square2():
    return meshing.build_square_mesh(2)


@pytest.fixture(scope="session")
def cube2():
    return meshing.build_cube_mesh(2)


@pytest.fixture(scope="session")
def plate_space2(square2):
    return build_space(square2)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
