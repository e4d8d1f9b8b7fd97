"""Closed-form polynomial solution of the coupled resolvent system.

The plate displacement is a separable polynomial, odd about x = 1/2 so
both plate components have zero mean, and the fluid velocity is built
from a depth profile whose value and slope vanish on the bottom wall.
The fields satisfy: divergence-free velocity, no-slip on the five walls,
velocity trace [0, 0, w2] on the top face, and an exactly vanishing
pressure (the plate load and the fluid normal stress cancel).  Data
terms are derived by substituting into the static system at resolvent
shift ``lam``:

    w1* = lam w1 - w2,   w2* = lam w2 + bilap(w1),   u* = lam u - lap(u),

and the plate load in already-applied operator form
``lam^2 (w1 + rho w2) + bilap(w1)``, which stays closed-form for every
rotational-inertia value rho >= 0 (the inverse-operator form of w2*
does not).

All derivative callables are generated from `numpy.polynomial` factor
polynomials, so there is no hand transcription of high-order
derivatives anywhere.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from numpy.polynomial import Polynomial as P


def _derivs(poly, n):
    out = [poly]
    for _ in range(n):
        out.append(out[-1].deriv())
    return out


def _build_factors():
    x = P([0.0, 1.0])
    xm1 = P([-1.0, 1.0])
    X = x ** 4 * xm1 ** 4 * P([-1.0, 2.0])    # x^4 (x-1)^4 (2x-1)
    Y = x ** 4 * xm1 ** 4
    Wp = (x ** 5 * xm1 ** 5) / 5.0            # antiderivative pair: Wp' = X
    Z = P([-1.0, 0.0, 0.0, -10.0, -15.0, -6.0])  # -6z^5 - 15z^4 - 10z^3 - 1
    return _derivs(X, 4), _derivs(Y, 4), _derivs(Wp, 2), _derivs(Z, 3)


@dataclass
class ManufacturedCase:
    """Exact fields and derived data for the polynomial test problem."""

    lam: float
    rho: float
    # plate displacement and velocity-like component
    w1: Callable
    w1_grad: Callable
    w1_hess: Callable
    w1_lap: Callable
    w2: Callable
    w2_grad: Callable
    w2_lap: Callable
    bilap_w1: Callable
    # fluid velocity
    u: Callable
    u_jac: Callable
    u_lap: Callable
    # data entering the resolvent right-hand side
    w1_star: Callable
    w1_star_grad: Callable
    w1_star_lap: Callable
    w2_star: Optional[Callable]
    u_star: Callable
    plate_load: Callable

    def p(self, pts):
        return np.zeros(len(np.atleast_2d(pts)))


def manufactured_case(lam=1.0, rho=0.0):
    """Build the test case for resolvent shift ``lam`` and inertia ``rho``.

    For ``rho > 0`` the combination ``w2_star`` involves an inverse
    elliptic operator and is not closed form; it is set to ``None`` and
    the solver consumes ``plate_load`` instead, which is exact for all
    rho.
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    X, Y, Wp, Z = _build_factors()

    def split(pts, dim):
        p = np.atleast_2d(np.asarray(pts, dtype=float))
        return [p[:, d] for d in range(dim)]

    # plate scalar fields: w1 = -X Y, w2 = -lap(w1) = X'' Y + X Y''
    def w1(pts):
        x, y = split(pts, 2)
        return -X[0](x) * Y[0](y)

    def w1_grad(pts):
        x, y = split(pts, 2)
        return np.column_stack([-X[1](x) * Y[0](y), -X[0](x) * Y[1](y)])

    def w1_hess(pts):
        x, y = split(pts, 2)
        return np.column_stack([-X[2](x) * Y[0](y),
                                -X[1](x) * Y[1](y),
                                -X[0](x) * Y[2](y)])

    def w2(pts):
        x, y = split(pts, 2)
        return X[2](x) * Y[0](y) + X[0](x) * Y[2](y)

    def w1_lap(pts):
        return -w2(pts)

    def w2_grad(pts):
        x, y = split(pts, 2)
        return np.column_stack([X[3](x) * Y[0](y) + X[1](x) * Y[2](y),
                                X[2](x) * Y[1](y) + X[0](x) * Y[3](y)])

    def lap_w2(pts):
        x, y = split(pts, 2)
        return X[4](x) * Y[0](y) + 2.0 * X[2](x) * Y[2](y) + X[0](x) * Y[4](y)

    def bilap_w1(pts):
        return -lap_w2(pts)

    # fluid velocity u = [ (X' Y + Wp Y'') Z', 0, -w2 Z ]
    def u(pts):
        x, y, z = split(pts, 3)
        g = X[1](x) * Y[0](y) + Wp[0](x) * Y[2](y)
        w2xy = X[2](x) * Y[0](y) + X[0](x) * Y[2](y)
        return np.column_stack([g * Z[1](z), np.zeros_like(x), -w2xy * Z[0](z)])

    def u_jac(pts):
        x, y, z = split(pts, 3)
        w2xy = X[2](x) * Y[0](y) + X[0](x) * Y[2](y)
        J = np.zeros((len(x), 3, 3))
        J[:, 0, 0] = w2xy * Z[1](z)
        J[:, 0, 1] = (X[1](x) * Y[1](y) + Wp[0](x) * Y[3](y)) * Z[1](z)
        J[:, 0, 2] = (X[1](x) * Y[0](y) + Wp[0](x) * Y[2](y)) * Z[2](z)
        J[:, 2, 0] = -(X[3](x) * Y[0](y) + X[1](x) * Y[2](y)) * Z[0](z)
        J[:, 2, 1] = -(X[2](x) * Y[1](y) + X[0](x) * Y[3](y)) * Z[0](z)
        J[:, 2, 2] = -w2xy * Z[1](z)
        return J

    def u_lap(pts):
        x, y, z = split(pts, 3)
        g = X[1](x) * Y[0](y) + Wp[0](x) * Y[2](y)
        gxx_gyy = (X[3](x) * Y[0](y) + 2.0 * X[1](x) * Y[2](y)
                   + Wp[0](x) * Y[4](y))
        w2xy = X[2](x) * Y[0](y) + X[0](x) * Y[2](y)
        lap_w2xy = (X[4](x) * Y[0](y) + 2.0 * X[2](x) * Y[2](y)
                    + X[0](x) * Y[4](y))
        out = np.zeros((len(x), 3))
        out[:, 0] = gxx_gyy * Z[1](z) + g * Z[3](z)
        out[:, 2] = -(lap_w2xy * Z[0](z) + w2xy * Z[2](z))
        return out

    # resolvent data
    def w1_star(pts):
        return lam * w1(pts) - w2(pts)

    def w1_star_grad(pts):
        return lam * w1_grad(pts) - w2_grad(pts)

    def w1_star_lap(pts):
        return lam * w1_lap(pts) - lap_w2(pts)

    def w2_star(pts):
        return lam * w2(pts) + bilap_w1(pts)

    def u_star(pts):
        return lam * u(pts) - u_lap(pts)

    def plate_load(pts):
        # P_rho(lam w1* + w2*) = lam^2 (w1 + rho w2) + bilap(w1)
        return lam ** 2 * (w1(pts) + rho * w2(pts)) + bilap_w1(pts)

    return ManufacturedCase(
        lam=lam, rho=rho,
        w1=w1, w1_grad=w1_grad, w1_hess=w1_hess, w1_lap=w1_lap,
        w2=w2, w2_grad=w2_grad, w2_lap=lap_w2, bilap_w1=bilap_w1,
        u=u, u_jac=u_jac, u_lap=u_lap,
        w1_star=w1_star, w1_star_grad=w1_star_grad, w1_star_lap=w1_star_lap,
        w2_star=w2_star if rho == 0 else None,
        u_star=u_star, plate_load=plate_load)
