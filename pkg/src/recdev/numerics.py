"""Shared numerical primitives: quadrature rules, compensated sums, exp guards.

Two node families cover every integral in the package:

* composite Gauss-Legendre panels, for integrands that are analytic on a
  finite box (kernel profiles, tilted expectations, bias integrands);
* tanh-sinh (double-exponential) nodes, for integrands with an algebraic
  endpoint singularity such as the s^(-a d) weight on (0, 1].

Both are exposed as plain (nodes, weights) arrays so callers can evaluate
vectorised integrands, and both support level refinement: level L+1 roughly
doubles the node count, and the difference between two consecutive levels is
used as the error estimate.  A rule that cannot meet the requested absolute
tolerance within the level budget raises QuadratureError rather than
returning a silent best-effort value.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

# exp() arguments above this are refused rather than allowed to overflow
EXP_ARG_LIMIT = 700.0


class QuadratureError(RuntimeError):
    """A quadrature rule failed to reach the requested tolerance."""


class RootFindError(RuntimeError):
    """Root bracketing or iteration exhausted its budget."""


class OverflowGuardError(OverflowError):
    """An exp() argument exceeded the guard threshold of 700."""


def check_exp_bound(max_arg: float, context: str) -> None:
    """Refuse exp() arguments that would overflow double precision.

    Raises OverflowGuardError naming the offending context so the caller
    sees which quantity (tilt parameter, transform argument) went out of
    range instead of a downstream inf/nan.
    """
    if max_arg > EXP_ARG_LIMIT:
        raise OverflowGuardError(
            f"{context}: exp argument {max_arg:.3g} exceeds guard {EXP_ARG_LIMIT:g}"
        )


def gauss_legendre_panels(a: float, b: float, panels: int, order: int = 16):
    """Composite Gauss-Legendre rule on [a, b] with `panels` equal panels.

    Returns (nodes, weights) as float64 arrays of length panels * order.
    """
    if not (b > a):
        raise ValueError(f"empty interval [{a}, {b}]")
    if panels < 1 or order < 2:
        raise ValueError("need panels >= 1 and order >= 2")
    x0, w0 = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x0[None, :]).ravel()
    weights = (half[:, None] * w0[None, :]).ravel()
    return nodes, weights


def tanh_sinh(a: float, b: float, level: int):
    """Tanh-sinh rule on (a, b), open at both endpoints.

    Node k sits at the image of t = k*h under x = tanh((pi/2) sinh t) mapped
    to (a, b), with h = 2^-level.  Positions are computed as distances from
    the nearer endpoint so integrands with an endpoint singularity (for
    example s^(-g) with 0 < g < 1) can be evaluated at full precision there.
    Nodes whose distance to the endpoint underflows are dropped; the
    double-exponential weight decay makes their contribution negligible.
    """
    if not (b > a):
        raise ValueError(f"empty interval [{a}, {b}]")
    if level < 0:
        raise ValueError("level must be >= 0")
    h = 2.0 ** (-level)
    # |t| beyond ~4.3 puts nodes within 1e-280 of the endpoint
    kmax = int(math.ceil(4.3 / h))
    t = h * np.arange(-kmax, kmax + 1)
    u = 0.5 * math.pi * np.sinh(t)
    # distance from the nearer endpoint: (1 - |tanh u|)/2 = 1/(1 + e^{2|u|})
    gap = 1.0 / (1.0 + np.exp(2.0 * np.abs(u)))
    w = 0.5 * math.pi * np.cosh(t) / np.cosh(u) ** 2 * h
    keep = gap > 1e-300
    t, u, gap, w = t[keep], u[keep], gap[keep], w[keep]
    scale = 0.5 * (b - a)
    x = np.where(t < 0, a + 2.0 * scale * gap, b - 2.0 * scale * gap)
    # centre node is exact
    x[t == 0] = 0.5 * (a + b)
    return x, w * scale


def integrate_to_tol(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    *,
    tol: float = 1e-10,
    singular: bool = False,
    max_level: int = 9,
) -> float:
    """Integrate a vectorised callable on [a, b] to absolute tolerance.

    Refines through levels until two consecutive levels agree within `tol`;
    raises QuadratureError if the budget runs out.  `singular=True` selects
    tanh-sinh nodes (endpoint singularities allowed), otherwise composite
    Gauss-Legendre panels are used.
    """
    prev = None
    for level in range(max_level + 1):
        if singular:
            x, w = tanh_sinh(a, b, level + 3)
        else:
            x, w = gauss_legendre_panels(a, b, 2**level, order=16)
        val = float(np.dot(w, f(x)))
        if prev is not None and abs(val - prev) <= tol:
            return val
        prev = val
    raise QuadratureError(
        f"integral on [{a}, {b}] did not reach abs tol {tol:g} "
        f"within {max_level} refinement levels (last delta "
        f"{abs(val - prev):.3g})"
    )


class NeumaierSum:
    """Compensated accumulator (Neumaier variant of Kahan summation).

    Works on scalars or fixed-shape numpy arrays.  `add` folds in one term;
    `total` returns sum + carry without disturbing the running state.
    """

    def __init__(self, shape=None):
        if shape is None:
            self._s = 0.0
            self._c = 0.0
        else:
            self._s = np.zeros(shape)
            self._c = np.zeros(shape)

    def add(self, x) -> None:
        t = self._s + x
        if isinstance(self._s, np.ndarray):
            big = np.abs(self._s) >= np.abs(x)
            self._c += np.where(big, (self._s - t) + x, (x - t) + self._s)
        else:
            if abs(self._s) >= abs(x):
                self._c += (self._s - t) + x
            else:
                self._c += (x - t) + self._s
        self._s = t

    @property
    def total(self):
        return self._s + self._c


def compensated_cumsum(x: np.ndarray) -> np.ndarray:
    """Prefix sums of a 1-D array with Neumaier compensation.

    Element-wise Python loop; callers cache the result.  For the monotone
    positive sequences used here the uncompensated drift only matters past
    n ~ 1e5, but campaigns run to 1e6 terms where it does.
    """
    out = np.empty(len(x), dtype=np.float64)
    s = 0.0
    c = 0.0
    for i, v in enumerate(x.tolist()):
        t = s + v
        if abs(s) >= abs(v):
            c += (s - t) + v
        else:
            c += (v - t) + s
        s = t
        out[i] = s + c
    return out
