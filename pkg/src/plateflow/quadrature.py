"""Gaussian quadrature on the reference triangle and tetrahedron.

Rules are built as conical products of Gauss-Jacobi lines (the collapsed
coordinate transform), so arbitrary polynomial exactness degrees are
available without tabulated data.  The reference triangle is
``{x, y >= 0, x + y <= 1}`` and the reference tetrahedron
``{x, y, z >= 0, x + y + z <= 1}``.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

MAX_DEGREE = 50


@dataclass(frozen=True)
class QuadratureRule:
    """Quadrature nodes in barycentric coordinates with positive weights.

    Attributes
    ----------
    points : ndarray, shape (n, dim + 1)
        Barycentric coordinates of the nodes.
    weights : ndarray, shape (n,)
        Weights summing to the reference measure (1/2 or 1/6).
    exact_degree : int
        Total polynomial degree integrated exactly.
    """

    points: np.ndarray
    weights: np.ndarray
    exact_degree: int

    @property
    def xy(self):
        """Cartesian reference coordinates, shape (n, dim)."""
        return self.points[:, 1:]

    def __len__(self):
        return self.weights.size


def _gauss_01(m):
    t, w = roots_legendre(m)
    return 0.5 * (1.0 + t), 0.5 * w


def _jacobi_01(m, alpha):
    # weight (1-a)^alpha on [0, 1]
    t, w = roots_jacobi(m, alpha, 0.0)
    return 0.5 * (1.0 + t), w / 2.0 ** (alpha + 1)


def triangle_rule(degree):
    """Rule on the reference triangle exact for total degree >= ``degree``."""
    if degree < 0 or degree > MAX_DEGREE:
        raise ValueError(f"unsupported triangle quadrature degree {degree}")
    m = max(1, (degree + 2) // 2)  # 2m - 1 >= degree
    a, wa = _jacobi_01(m, 1.0)
    b, wb = _gauss_01(m)
    A, B = np.meshgrid(a, b, indexing="ij")
    x = A.ravel()
    y = (B * (1.0 - A)).ravel()
    w = np.outer(wa, wb).ravel()
    pts = np.column_stack([1.0 - x - y, x, y])
    return QuadratureRule(pts, w, 2 * m - 1)


def tet_rule(degree):
    """Rule on the reference tetrahedron exact for total degree >= ``degree``."""
    if degree < 0 or degree > MAX_DEGREE:
        raise ValueError(f"unsupported tetrahedron quadrature degree {degree}")
    m = max(1, (degree + 2) // 2)
    a, wa = _jacobi_01(m, 2.0)
    b, wb = _jacobi_01(m, 1.0)
    c, wc = _gauss_01(m)
    A, B, C = np.meshgrid(a, b, c, indexing="ij")
    x = A.ravel()
    y = (B * (1.0 - A)).ravel()
    z = (C * (1.0 - A) * (1.0 - B)).ravel()
    w = (wa[:, None, None] * wb[None, :, None] * wc[None, None, :]).ravel()
    pts = np.column_stack([1.0 - x - y - z, x, y, z])
    return QuadratureRule(pts, w, 2 * m - 1)
