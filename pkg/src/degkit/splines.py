"""B-spline basis helpers shared by the index, functional, and regression code."""

import numpy as np
from scipy.interpolate import BSpline


def knot_vector(lo, hi, degree, num_interior, placement="uniform", values=None):
    """Full (clamped) knot vector on [lo, hi].

    placement='quantile' places interior knots at quantiles of `values`.
    """
    if hi <= lo:
        raise ValueError("knot range must have hi > lo")
    if num_interior > 0:
        if placement == "quantile":
            if values is None:
                raise ValueError("quantile placement needs data values")
            qs = np.linspace(0, 1, num_interior + 2)[1:-1]
            interior = np.quantile(np.asarray(values, float), qs)
            # guard against ties collapsing the basis
            interior = np.clip(interior, lo + 1e-9 * (hi - lo), hi - 1e-9 * (hi - lo))
            interior = np.maximum.accumulate(interior)
        elif placement == "uniform":
            interior = np.linspace(lo, hi, num_interior + 2)[1:-1]
        else:
            raise ValueError(f"unknown knot placement {placement!r}")
    else:
        interior = np.array([])
    return np.concatenate(
        [np.full(degree + 1, lo), interior, np.full(degree + 1, hi)]
    )


def basis_dim(degree, num_interior) -> int:
    return degree + num_interior + 1


def design_matrix(x, knots, degree, clamp=True) -> np.ndarray:
    """Evaluate all basis functions at x; out-of-range x clamp to the boundary."""
    x = np.asarray(x, dtype=float)
    lo, hi = knots[degree], knots[-degree - 1]
    if clamp:
        x = np.clip(x, lo, hi)
    # keep the right endpoint inside the last span
    x = np.minimum(x, hi - 1e-12 * max(hi - lo, 1.0))
    return BSpline.design_matrix(x, knots, degree).toarray()


def second_difference_penalty(dim) -> np.ndarray:
    """D'D for second differences of the coefficient vector."""
    if dim < 3:
        return np.zeros((dim, dim))
    D = np.diff(np.eye(dim), n=2, axis=0)
    return D.T @ D
