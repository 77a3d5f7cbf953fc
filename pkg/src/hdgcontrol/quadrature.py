"""Quadrature rules on reference simplices.

Rules are collapsed (Duffy) tensor products of Gauss-Jacobi rules, so every
order is available and all weights are positive.  The reference simplex of
dimension ``d`` is ``{x >= 0, sum(x) <= 1}`` with measure ``1/d!``.
"""
from dataclasses import dataclass
from functools import lru_cache
from math import factorial

import numpy as np
from scipy.special import roots_jacobi

MAX_ORDER = 30


class QuadratureError(ValueError):
    """Requested rule is not available."""


@dataclass(frozen=True)
class QuadratureRule:
    """Points (cartesian reference coordinates) and positive weights."""

    dim: int
    order: int
    points: np.ndarray  # (n, dim)
    weights: np.ndarray  # (n,)

    @property
    def barycentric(self):
        """Barycentric coordinates, shape (n, dim + 1)."""
        lam0 = 1.0 - self.points.sum(axis=1, keepdims=True)
        return np.hstack([lam0, self.points])

    def __len__(self):
        return len(self.weights)


def _gauss_jacobi01(n, alpha):
    """n-point rule on [0, 1] for the weight (1 - t)^alpha."""
    x, w = roots_jacobi(n, alpha, 0.0)
    return (x + 1.0) / 2.0, w / 2.0 ** (alpha + 1)


@lru_cache(maxsize=None)
def quadrature_rule(dim, order):
    """Return a rule on the reference ``dim``-simplex exact to ``order``.

    ``dim == 0`` gives the trivial one-point rule used for faces of 1D
    elements.
    """
    if order < 0 or order > MAX_ORDER:
        raise QuadratureError(f"unsupported quadrature order {order} (max {MAX_ORDER})")
    if dim == 0:
        return QuadratureRule(0, order, np.zeros((1, 0)), np.ones(1))
    if dim not in (1, 2, 3):
        raise QuadratureError(f"unsupported dimension {dim}")

    # collapsed direction i carries the Jacobian factor (1 - t_i)^(dim - 1 - i)
    n = order // 2 + 1
    axes = [_gauss_jacobi01(n, dim - 1 - i) for i in range(dim)]
    grids = np.meshgrid(*[a[0] for a in axes], indexing="ij")
    wgrids = np.meshgrid(*[a[1] for a in axes], indexing="ij")
    t = np.stack([g.ravel() for g in grids], axis=1)
    w = np.prod(np.stack([g.ravel() for g in wgrids], axis=1), axis=1)

    pts = np.empty_like(t)
    scale = np.ones(len(t))
    for i in range(dim):
        pts[:, i] = t[:, i] * scale
        scale = scale * (1.0 - t[:, i])
    pts.setflags(write=False)
    w.setflags(write=False)
    return QuadratureRule(dim, order, pts, w)


def reference_measure(dim):
    return 1.0 / factorial(dim)


def reference_vertices(dim):
    """Vertices of the reference simplex, shape (dim + 1, dim)."""
    return np.vstack([np.zeros(dim), np.eye(dim)])


def monomial_integral(exponents):
    """Exact integral of prod x_i^a_i over the reference simplex."""
    exponents = tuple(int(a) for a in exponents)
    num = np.prod([factorial(a) for a in exponents])
    return num / factorial(sum(exponents) + len(exponents))
