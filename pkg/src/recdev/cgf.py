"""Finite-n cumulant generating functions of the centred estimator.

With the deviation statistic v_n (f_n(x) - E f_n(x)) and the speed
b_n = (sum_i h_i^(d+2|alpha|)) / v_n^2, the normalized log moment
generating function is

    L_n(u) = (1/b_n) log E exp(u b_n v_n (f_n(x) - E f_n(x)))
           = (v_n^2/a_n) sum_i log E exp(theta_i Y_i) - u v_n E f_n(x),

with a_n = sum_i h_i^(d+2|alpha|), theta_i = u a_n/(n v_n h_i^(d+|alpha|))
and Y_i the kernel term of observation i.  Independence turns the log MGF
into the sum above; each factor is an integral against the sampling
density localized by the kernel support,

    E exp(theta Y_i) = 1 + h_i^d int expm1(theta (d^alpha K)(z)) f(x - h_i z) dz,

which is evaluated by kernel-support quadrature.  The centring term uses
the integrated-by-parts form int K(z) (d^alpha f)(x - h_i z) dz, which has
no h^-|alpha| amplification.

L_n converges pointwise to an explicit limit: the transform-based curve
f(x)(1-ad) (psi(u) - u/(1-ad)) for the plain unscaled estimator, and the
quadratic u^2 f(x) ||d^alpha K||_2^2 / (2 (1 - a^2 (d+2|alpha|)^2)) in
every scaled or derivative case.  `convergence_diagnostic` tabulates the
finite-n curves against the limit over a grid of u.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .bandwidth import BandwidthSchedule, ScalingSequence, speed
from .densities import Density
from .kernels import KernelModel, as_multi_index, kernel_quadrature
from .numerics import NeumaierSum, QuadratureError, check_exp_bound
from .estimator import expected_estimate
from .ratefn import PsiEvaluator


@dataclass
class CgfSpec:
    """Everything the cumulant curves depend on: model, schedule, and point."""

    kernel: KernelModel
    schedule: BandwidthSchedule
    scaling: ScalingSequence
    density: Density
    point: np.ndarray
    alpha: tuple = None
    _psi: Optional[PsiEvaluator] = field(default=None, repr=False)

    def __post_init__(self):
        d = self.kernel.dimension
        self.alpha = as_multi_index(
            self.alpha if self.alpha is not None else (0,) * d, d
        )
        self.schedule.check_compatible(d, self.alpha.order)
        pt = np.asarray(self.point, dtype=np.float64).reshape(-1)
        if len(pt) != d:
            raise ValueError(f"point must have {d} coordinates")
        self.point = pt

    @property
    def regime(self) -> str:
        """"ldp" for the plain unscaled estimator, else "moderate"."""
        if self.scaling.is_constant_one and self.alpha.order == 0:
            return "ldp"
        return "moderate"

    @property
    def density_at_point(self) -> float:
        return float(self.density.pdf(self.point.reshape(1, -1))[0])

    def psi(self) -> PsiEvaluator:
        if self._psi is None:
            self._psi = PsiEvaluator(self.kernel, self.schedule.a)
        return self._psi

    def speed(self, n: int) -> float:
        return speed(self.schedule, self.scaling, self.kernel.dimension, self.alpha.order, n)


def _finite_n_at_level(spec: CgfSpec, u: np.ndarray, n: int, level: int) -> np.ndarray:
    kernel, schedule = spec.kernel, spec.schedule
    d = kernel.dimension
    p = d + spec.alpha.order
    hs = schedule.values(n)
    v_n = spec.scaling.value(n)
    a_n = schedule.prefix_sum(float(d + 2 * spec.alpha.order), n)
    y, w = kernel_quadrature(kernel, level=level)
    ky = kernel.deriv_eval(spec.alpha, y)
    # theta_i is largest at the smallest bandwidth; guard before any exp
    theta_scale = a_n / (n * v_n)
    max_theta = float(np.max(np.abs(u))) * theta_scale / float(np.min(hs)) ** p
    check_exp_bound(max_theta * float(np.max(np.abs(ky))), "finite-n cumulant")

    acc = NeumaierSum(shape=(len(u),))
    step = max(1, int(2_000_000 // max(len(y), 1)))
    for i0 in range(0, n, step):
        hb = hs[i0 : i0 + step]
        args = spec.point[None, None, :] - hb[:, None, None] * y[None, :, :]
        fv = spec.density.pdf(args.reshape(-1, d)).reshape(len(hb), len(y))
        fw = fv * w[None, :]
        theta = (u[:, None] * (theta_scale / hb**p)[None, :]).T  # (chunk, nu)
        # sum_k w_k expm1(theta_i ky_k) f(x - h_i y_k), for every (i, u)
        block = np.expm1(theta[:, :, None] * ky[None, None, :])
        m = np.einsum("iuk,ik->iu", block, fw)
        acc.add(np.log1p(hb[:, None] ** d * m).sum(axis=0))
    term1 = (v_n * v_n / a_n) * acc.total
    mean = expected_estimate(
        kernel, schedule, spec.density, n, spec.point.reshape(1, -1), alpha=spec.alpha.components
    )[0]
    return term1 - u * v_n * mean


def cgf_finite_n(spec: CgfSpec, u, n: int, *, tol: float = 1e-8):
    """L_n(u) at sample size n, scalar or vectorised over u.

    The kernel-support quadrature inside each factor is refined once and
    the two resolutions must agree within `tol` (QuadratureError otherwise).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    arr = np.atleast_1d(np.asarray(u, dtype=np.float64))
    scalar = np.isscalar(u) or np.ndim(u) == 0
    lo = _finite_n_at_level(spec, arr, n, 1)
    hi = _finite_n_at_level(spec, arr, n, 2)
    gap = float(np.max(np.abs(hi - lo)))
    if gap > tol:
        raise QuadratureError(
            f"finite-n cumulant quadrature disagrees by {gap:.3g} (> {tol:g})"
        )
    return float(hi[0]) if scalar else hi.reshape(np.shape(u))


def cgf_limit(spec: CgfSpec, u):
    """The n -> infinity cumulant curve for the spec's regime."""
    arr = np.atleast_1d(np.asarray(u, dtype=np.float64))
    scalar = np.isscalar(u) or np.ndim(u) == 0
    fx = spec.density_at_point
    if spec.regime == "ldp":
        ev = spec.psi()
        out = fx * (1.0 - ev.ad) * ev.psi(arr) - arr * fx
    else:
        m = spec.schedule.a * (spec.kernel.dimension + 2 * spec.alpha.order)
        l2 = spec.kernel.l2_norm_sq(spec.alpha)
        out = arr * arr * fx * l2 / (2.0 * (1.0 - m * m))
    return float(out[0]) if scalar else out.reshape(np.shape(u))


@dataclass(frozen=True)
class CgfConvergence:
    """Finite-n cumulant curves tabulated against their limit."""

    u: np.ndarray
    n_values: np.ndarray
    finite_n: np.ndarray  # shape (len(n_values), len(u))
    limit: np.ndarray
    sup_gap: np.ndarray  # max_u |L_n - L| per n

    @property
    def gaps_decrease(self) -> bool:
        return bool(np.all(np.diff(self.sup_gap) < 0))


def convergence_diagnostic(spec: CgfSpec, u_values, n_values) -> CgfConvergence:
    """Tabulate L_n over u for each n against the limiting curve."""
    u = np.asarray(u_values, dtype=np.float64).reshape(-1)
    ns = np.asarray(n_values, dtype=np.int64).reshape(-1)
    if len(u) == 0 or len(ns) == 0:
        raise ValueError("need at least one u and one n")
    if np.any(ns < 1) or np.any(np.diff(ns) <= 0):
        raise ValueError("n_values must be increasing positive integers")
    limit = np.atleast_1d(cgf_limit(spec, u))
    rows = np.empty((len(ns), len(u)))
    for r, n in enumerate(ns):
        rows[r] = np.atleast_1d(cgf_finite_n(spec, u, int(n)))
    gaps = np.max(np.abs(rows - limit[None, :]), axis=1)
    return CgfConvergence(u=u, n_values=ns, finite_n=rows, limit=limit, sup_gap=gaps)
