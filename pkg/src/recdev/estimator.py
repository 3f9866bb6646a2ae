"""Streaming kernel estimator with per-observation bandwidths.

The estimator of the alpha-partial of a density f from observations
X_1, X_2, ... is

    f_n(x) = (1/n) sum_{i<=n} h_i^-(d+|alpha|) (d^alpha K)((x - X_i)/h_i),

with h_i = h(i) a decreasing bandwidth schedule.  Each observation enters
with the bandwidth of its arrival index, so the update is O(grid) per
observation and never revisits history; the price is that the estimate
depends on the observation order (a permutation of the sample changes the
value).  Running sums are compensated, so long streams do not lose the
small late terms against the large early ones.

Also provided: a closed-batch evaluation used as an independent test
oracle, the exact mean of the estimator under a known sampling density
(a kernel-support quadrature), and the bias/fluctuation decomposition with
the bias normalizer and uniform bias bound used in convergence studies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bandwidth import BandwidthSchedule
from .densities import Density
from .kernels import KernelModel, MultiIndex, as_multi_index, kernel_moment, kernel_quadrature
from .numerics import NeumaierSum, QuadratureError


class RecursiveEstimator:
    """Order-sensitive streaming estimator on a fixed evaluation grid."""

    def __init__(self, kernel: KernelModel, schedule: BandwidthSchedule, grid, alpha=None):
        self.kernel = kernel
        self.schedule = schedule
        self.alpha = as_multi_index(
            alpha if alpha is not None else (0,) * kernel.dimension, kernel.dimension
        )
        schedule.check_compatible(kernel.dimension, self.alpha.order)
        pts = np.asarray(grid, dtype=np.float64)
        if kernel.dimension == 1 and not (pts.ndim == 2 and pts.shape[-1] == 1):
            pts = pts.reshape(-1, 1)
        if pts.ndim != 2 or pts.shape[1] != kernel.dimension:
            raise ValueError(
                f"grid must be (m, {kernel.dimension}), got shape {pts.shape}"
            )
        self.grid = pts
        self._power = kernel.dimension + self.alpha.order
        self._sum = NeumaierSum(shape=(len(pts),))
        self.count = 0

    def reset(self) -> None:
        self._sum = NeumaierSum(shape=(len(self.grid),))
        self.count = 0

    def _term(self, x, index: int) -> np.ndarray:
        h = self.schedule.h(index)
        z = (self.grid - x) / h
        return self.kernel.deriv_eval(self.alpha, z) / h**self._power

    def update(self, x) -> None:
        """Fold in one observation; O(grid size), independent of history."""
        x = np.asarray(x, dtype=np.float64).reshape(self.kernel.dimension)
        self.count += 1
        self._sum.add(self._term(x, self.count))

    def update_batch(self, X) -> None:
        """Fold in rows of X in order (order matters; see module docstring)."""
        X = np.asarray(X, dtype=np.float64)
        if self.kernel.dimension == 1 and X.ndim == 1:
            X = X.reshape(-1, 1)
        for row in X:
            self.update(row)

    def values(self) -> np.ndarray:
        """Current estimate on the grid; raises before any observation."""
        if self.count == 0:
            raise ValueError("estimator has no observations yet")
        return self._sum.total / self.count


def batch_values(
    kernel: KernelModel,
    schedule: BandwidthSchedule,
    X,
    grid,
    alpha=None,
    chunk: int = 65536,
) -> np.ndarray:
    """Whole-sample evaluation of the estimator, vectorised over observations.

    Mathematically identical to streaming the rows of X through
    RecursiveEstimator; computed by a different summation route, so tests
    can compare the two.
    """
    mi = as_multi_index(alpha if alpha is not None else (0,) * kernel.dimension, kernel.dimension)
    schedule.check_compatible(kernel.dimension, mi.order)
    X = np.asarray(X, dtype=np.float64)
    if kernel.dimension == 1 and X.ndim == 1:
        X = X.reshape(-1, 1)
    pts = np.asarray(grid, dtype=np.float64)
    if kernel.dimension == 1 and not (pts.ndim == 2 and pts.shape[-1] == 1):
        pts = pts.reshape(-1, 1)
    n, d = X.shape
    if n == 0:
        raise ValueError("empty sample")
    hs = schedule.values(n)
    power = d + mi.order
    acc = NeumaierSum(shape=(len(pts),))
    step = max(1, chunk // max(len(pts), 1))
    for i0 in range(0, n, step):
        hb = hs[i0 : i0 + step]
        z = (pts[None, :, :] - X[i0 : i0 + step, None, :]) / hb[:, None, None]
        vals = kernel.deriv_eval(mi, z.reshape(-1, d)).reshape(len(hb), len(pts))
        vals /= (hb**power)[:, None]
        acc.add(vals.sum(axis=0))
    return acc.total / n


def expected_estimate(
    kernel: KernelModel,
    schedule: BandwidthSchedule,
    density: Density,
    n: int,
    points,
    alpha=None,
    tol: float = 1e-9,
) -> np.ndarray:
    """Exact mean (1/n) sum_i int K(y) g(x - h_i y) dy with g the alpha-partial of f.

    Integrating the kernel against the shifted density in the substituted
    variable keeps every factor bounded (no h^-|alpha| appears).  The
    kernel-support quadrature is refined once; disagreement beyond `tol`
    raises QuadratureError rather than returning a doubtful mean.
    """
    mi = as_multi_index(alpha if alpha is not None else (0,) * kernel.dimension, kernel.dimension)
    pts = np.asarray(points, dtype=np.float64)
    if kernel.dimension == 1 and not (pts.ndim == 2 and pts.shape[-1] == 1):
        pts = pts.reshape(-1, 1)
    if n < 1:
        raise ValueError("n must be >= 1")
    hs = schedule.values(n)
    out = None
    for level in (1, 2):
        y, w = kernel_quadrature(kernel, level=level)
        wk = w * kernel.eval_fn(y)
        acc = NeumaierSum(shape=(len(pts),))
        # arguments x - h_i y depend on i only through h_i; chunk i to
        # bound the (chunk, nodes, m, d) temporary
        step = max(1, int(4_000_000 // max(len(y) * len(pts), 1)))
        for i0 in range(0, n, step):
            hb = hs[i0 : i0 + step]
            args = pts[None, None, :, :] - hb[:, None, None, None] * y[None, :, None, :]
            g = density.partial(mi.components, args.reshape(-1, kernel.dimension))
            g = g.reshape(len(hb), len(y), len(pts))
            acc.add(np.einsum("k,bkm->m", wk, g))
        val = acc.total / n
        if out is not None and float(np.max(np.abs(val - out))) <= tol:
            return val
        out = val
    raise QuadratureError(
        f"mean-estimate quadrature did not stabilise to {tol:g} after refinement"
    )


@dataclass(frozen=True)
class CenteredDecomposition:
    """estimate = target + bias + fluctuation, all on the same points."""

    estimate: np.ndarray
    mean: np.ndarray
    target: np.ndarray
    bias: np.ndarray
    fluctuation: np.ndarray


def decompose(
    kernel: KernelModel,
    schedule: BandwidthSchedule,
    density: Density,
    X,
    points,
    alpha=None,
) -> CenteredDecomposition:
    """Split the estimate into deterministic bias and centred fluctuation.

    The deviation theory applies to the fluctuation part; the bias part is
    deterministic and has its own normalized limit (see bias_ratio_limit).
    """
    mi = as_multi_index(alpha if alpha is not None else (0,) * kernel.dimension, kernel.dimension)
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0] if X.ndim > 1 else len(X)
    est = batch_values(kernel, schedule, X, points, alpha=mi.components)
    mean = expected_estimate(kernel, schedule, density, n, points, alpha=mi.components)
    target = density.partial(mi.components, points)
    return CenteredDecomposition(
        estimate=est,
        mean=mean,
        target=target,
        bias=mean - target,
        fluctuation=est - mean,
    )


def bias_normalizer(schedule: BandwidthSchedule, q: int, n: int) -> float:
    """(1/n) sum_{i<=n} h_i^q, the scale on which the bias stabilises."""
    if q < 1:
        raise ValueError("q must be >= 1")
    return schedule.prefix_sum(float(q), n) / n


def bias_ratio_limit(kernel: KernelModel, density: Density, q: int, points, alpha=None):
    """Limit of bias / bias_normalizer for a q-smooth target.

    For symmetric kernels the lower Taylor terms integrate to zero and the
    normalized bias converges to sum over q-th partials of the target
    weighted by kernel moments; in one dimension this is
    ((-1)^q / q!) m_q(K) g^(q+|alpha|)(x), e.g. m_2(K) f''(x)/2 for the
    plain density estimate with q = 2.
    """
    d = kernel.dimension
    mi = as_multi_index(alpha if alpha is not None else (0,) * d, d)
    pts = np.asarray(points, dtype=np.float64)
    if d == 1:
        m_q = kernel_moment(kernel, q)
        g_q = density.partial((mi.components[0] + q,), pts)
        return ((-1) ** q / math.factorial(q)) * m_q * g_q
    if q != 2:
        raise ValueError("multivariate ratio limits are implemented for q = 2 only")
    if pts.ndim != 2 or pts.shape[1] != d:
        raise ValueError(f"points must be (m, {d})")
    out = np.zeros(len(pts))
    for j in range(d):
        comps = list(mi.components)
        comps[j] += 2
        out += 0.5 * kernel_moment(kernel, 2, axis=j) * density.partial(tuple(comps), pts)
    return out


def bias_sup_bound(kernel: KernelModel, q: int, deriv_sup: float) -> float:
    """Uniform bias bound per unit of bias_normalizer, valid at every n.

    sup_x |E f_n - target| <= (deriv_sup / q!) int ||z||^q |K(z)| dz
    * bias_normalizer(n), where deriv_sup bounds the q-th directional
    derivatives of the target.  A Taylor-Lagrange remainder gives the
    inequality for each term of the sum separately, hence for all n, not
    only in the limit.
    """
    from .kernels import norm_moment

    if q < 1:
        raise ValueError("q must be >= 1")
    if deriv_sup < 0:
        raise ValueError("derivative sup bound must be nonnegative")
    return deriv_sup / math.factorial(q) * norm_moment(kernel, q)
