"""Deviation rate functions built from the kernel transform psi.

For a kernel K on R^d and bandwidth exponent a with a*d < 1, define

    psi(u)  = int_0^1 int_{R^d} s^(-a d) (exp(s^(a d) u K(z)/(1 - a d)) - 1) dz ds.

psi is strictly convex and smooth with psi(0) = 0 and psi'(0) = 1/(1 - a d).
Its convex conjugate I(t) = sup_u (u t - psi(u)) is the pointwise rate of
the density estimator in the large-deviation regime, after recentring and
scaling by the density value.  The moderate-deviation regime has the
explicit quadratic rate and needs no transform.

The shape of I depends on the sign sets of K.  With lambda{K < 0} = 0 the
range of psi' is (0, inf): I is +inf on t < 0, equals lambda{K > 0}/(1 - a d)
at t = 0 (infinite for kernels with unbounded positive support), and is
finite for t > 0.  With lambda{K < 0} > 0 the range of psi' is all of R and
I is finite everywhere.  I vanishes exactly at t = psi'(0).

Numerics: psi and its derivatives share one tensor quadrature, tanh-sinh in
both s (against the algebraic s^(a d) endpoint behaviour) and z (node
clustering at the support edges resolves the exp boundary layer for very
negative u), refined level by level until two levels agree within the
absolute tolerance; the conjugate is evaluated by inverting psi' with a
bracketed Newton iteration safeguarded by bisection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .bandwidth import ScalingSequence
from .kernels import KernelModel, MultiIndex, as_multi_index
from .numerics import (
    EXP_ARG_LIMIT,
    QuadratureError,
    RootFindError,
    check_exp_bound,
    tanh_sinh,
)


@dataclass(frozen=True)
class RateValue:
    """A rate-function value: a finite number >= 0, or explicit +infinity.

    Infinity is a modelled state, never the result of a float overflow, so
    downstream code can branch on `finite` instead of testing isinf.
    """

    value: float
    finite: bool = True

    def __post_init__(self):
        if self.finite:
            if not math.isfinite(self.value):
                raise ValueError("finite RateValue holds a non-finite float")
            if self.value < 0:
                raise ValueError(f"rate values are nonnegative, got {self.value}")
        else:
            if not (math.isinf(self.value) and self.value > 0):
                raise ValueError("non-finite RateValue must hold +inf")

    @classmethod
    def infinite(cls) -> "RateValue":
        return cls(math.inf, False)

    @classmethod
    def of(cls, value: float) -> "RateValue":
        # tolerate tiny negative round-off from t u - psi(u) near the minimum
        if -1e-9 < value < 0.0:
            value = 0.0
        return cls(value)

    def __float__(self) -> float:
        return self.value

    def csv_str(self) -> str:
        return "inf" if not self.finite else repr(self.value)


def _min_rate(x: RateValue, y: RateValue) -> RateValue:
    return x if x.value <= y.value else y


class PsiEvaluator:
    """Evaluates psi, psi', psi'' and the conjugate transform for one kernel.

    Quadrature levels are cached; evaluation starts at the lowest accepted
    level and escalates until two consecutive levels agree within `tol`
    (checked on probe points for vectorised calls).  Exhausting the level
    budget raises QuadratureError; exp arguments beyond the 700 guard raise
    OverflowGuardError before any overflow happens.
    """

    def __init__(self, kernel: KernelModel, a: float, *, tol: float = 1e-10, max_level: int = 4):
        if kernel.dimension > 3:
            raise ValueError("psi quadrature supports d <= 3")
        self.kernel = kernel
        self.a = float(a)
        self.ad = self.a * kernel.dimension
        if not (0.0 <= self.ad < 1.0):
            raise ValueError(f"need 0 <= a*d < 1, got a*d = {self.ad}")
        self.tol = tol
        self.max_level = max_level
        self._levels: dict[int, dict] = {}
        self._accepted = 0
        # exp-argument extremes per unit u, for the overflow guard; only
        # the positive side can overflow (the negative side underflows to 0)
        c = 1.0 / (1.0 - self.ad)
        sup = kernel.sup_norm()
        self._arg_hi = c * sup
        self._arg_lo = -c * sup if kernel.negative_support_measure > 0 else 0.0

    # -- plumbing --------------------------------------------------------

    def _tensor(self, level: int) -> dict:
        cached = self._levels.get(level)
        if cached is not None:
            return cached
        d = self.kernel.dimension
        r = self.kernel.support_radius
        s, ws = tanh_sinh(0.0, 1.0, 4 + level)
        # tanh-sinh in z as well: clusters nodes at the support edges, so
        # the O(1/|u|) boundary layer of exp(u s^ad K c) for compactly
        # supported kernels stays resolved at any u inside the exp guard
        z_level = {1: 4 + level, 2: 3 + level}.get(d, min(2 + level, 4))
        x, wx = tanh_sinh(-r, r, z_level)
        if d == 1:
            z = x.reshape(-1, 1)
            wz = wx
        else:
            grids = np.meshgrid(*([x] * d), indexing="ij")
            z = np.stack(grids, axis=-1).reshape(-1, d)
            wz = np.ones(len(z))
            for wm in np.meshgrid(*([wx] * d), indexing="ij"):
                wz *= wm.reshape(-1)
        kz = self.kernel.eval_fn(z)
        sad = s**self.ad
        c = 1.0 / (1.0 - self.ad)
        # weights over (s, z) are separable per quantity: a_i * b_j with
        # the shared exp argument u * y_i * kz_j; only 1-d arrays are
        # cached and blocks are streamed, so memory stays flat in d
        entry = {
            "y": sad * c,
            "kz": kz,
            "a_psi": ws / sad,
            "b_psi": wz,
            "a_prime": ws,
            "b_prime": wz * kz * c,
            "a_second": ws * sad,
            "b_second": wz * kz**2 * c * c,
        }
        self._levels[level] = entry
        return entry

    def _guard(self, u: np.ndarray) -> None:
        u_pos = max(float(np.max(u)), 0.0)
        u_neg = min(float(np.min(u)), 0.0)
        m = max(u_pos * self._arg_hi, u_neg * self._arg_lo)
        check_exp_bound(m, "psi evaluation")

    def _eval_level(self, u: np.ndarray, level: int, kind: str) -> np.ndarray:
        t = self._tensor(level)
        y, kz = t["y"], t["kz"]
        a, b = t["a_" + kind], t["b_" + kind]
        fn = np.expm1 if kind == "psi" else np.exp
        out = np.zeros(len(u))
        # stream s-blocks x u-chunks with temporaries capped near 8e6 doubles
        s_step = max(1, int(1_000_000 // max(len(kz), 1)))
        for j in range(0, len(y), s_step):
            arg = np.outer(y[j : j + s_step], kz).ravel()
            w = (a[j : j + s_step, None] * b[None, :]).ravel()
            u_step = max(1, int(8_000_000 // len(arg)))
            for k in range(0, len(u), u_step):
                block = np.outer(u[k : k + u_step], arg)
                out[k : k + u_step] += fn(block, out=block) @ w
        return out

    def _eval(self, u, kind: str):
        arr = np.atleast_1d(np.asarray(u, dtype=np.float64))
        scalar = np.isscalar(u) or np.ndim(u) == 0
        if arr.size == 0:
            return arr.copy()
        self._guard(arr)
        # probe points for the two-level error check
        if arr.size <= 8:
            probes = arr
        else:
            idx = np.unique(np.linspace(0, arr.size - 1, 9).astype(int))
            order = np.argsort(np.abs(arr))
            probes = np.concatenate([arr[order[idx]], [arr[order[-1]]]])
        level = self._accepted
        while True:
            hi = self._eval_level(probes, level + 1, kind)
            lo = self._eval_level(probes, level, kind)
            err = float(np.max(np.abs(hi - lo)))
            if err <= self.tol:
                break
            level += 1
            if level + 1 > self.max_level:
                raise QuadratureError(
                    f"psi tensor rule did not reach abs tol {self.tol:g} "
                    f"(last two-level delta {err:.3g})"
                )
        self._accepted = level
        vals = self._eval_level(arr, level + 1, kind)
        return float(vals[0]) if scalar else vals.reshape(np.shape(u))

    # -- public surface ----------------------------------------------------

    def psi(self, u):
        """psi(u); exactly 0.0 at u = 0."""
        return self._eval(u, "psi")

    def psi_prime(self, u):
        return self._eval(u, "prime")

    def psi_second(self, u):
        return self._eval(u, "second")

    @property
    def prime_at_zero(self) -> float:
        """psi'(0) = 1/(1 - a d), exact."""
        return 1.0 / (1.0 - self.ad)

    @property
    def signed_kernel(self) -> bool:
        return self.kernel.negative_support_measure > 0.0

    def inverse_prime(self, t: float, *, root_tol: float = 1e-10) -> float:
        """Solve psi'(u) = t by bracketed Newton with bisection fallback.

        Terminates when |psi'(u) - t| <= root_tol (plus a 4-ulp relative
        cushion so very large targets remain solvable).  Raises
        RootFindError if the bracket search or the iteration exhausts its
        budget, and ValueError for targets outside the range of psi'.
        """
        t = float(t)
        if not self.signed_kernel and t <= 0.0:
            raise ValueError(
                "psi' has range (0, inf) for kernels with no negative part; "
                f"target {t} is outside"
            )
        tol = root_tol + 4.0 * abs(t) * np.finfo(float).eps
        t0 = self.psi_prime(0.0)
        if abs(t0 - t) <= tol:
            return 0.0
        u_cap_pos = EXP_ARG_LIMIT / self._arg_hi if self._arg_hi > 0 else math.inf
        u_cap_neg = EXP_ARG_LIMIT / -self._arg_lo if self._arg_lo < 0 else math.inf
        lo, hi = None, None
        if t > t0:
            prev, cur = 0.0, 1.0
            for _ in range(200):
                if cur > u_cap_pos:
                    raise RootFindError(
                        f"target {t:.6g} needs u beyond the exp overflow guard"
                    )
                if self.psi_prime(cur) >= t:
                    lo, hi = prev, cur
                    break
                prev, cur = cur, cur * 2.0
            else:
                raise RootFindError("bracket search exhausted (upper branch)")
        else:
            prev, cur = 0.0, -1.0
            for _ in range(200):
                if abs(cur) > min(u_cap_neg, 1e18):
                    raise RootFindError(
                        f"target {t:.6g} needs u beyond the search budget"
                    )
                if self.psi_prime(cur) <= t:
                    lo, hi = cur, prev
                    break
                prev, cur = cur, cur * 2.0
            else:
                raise RootFindError("bracket search exhausted (lower branch)")
        u = 0.5 * (lo + hi)
        for _ in range(100):
            f = self.psi_prime(u) - t
            if abs(f) <= tol:
                return u
            if f > 0:
                hi = u
            else:
                lo = u
            step = f / self.psi_second(u)
            cand = u - step
            if not (lo < cand < hi):
                cand = 0.5 * (lo + hi)
            u = cand
        raise RootFindError(f"Newton iteration for psi'(u) = {t:.6g} did not converge")

    def legendre(self, t: float) -> RateValue:
        """The convex conjugate I(t) = sup_u (u t - psi(u)) with branch logic.

        Short-circuits the non-finite branches before any root-finding:
        for kernels with lambda{K < 0} = 0, I is +inf on t < 0 and equals
        lambda{K > 0}/(1 - a d) at t = 0.
        """
        t = float(t)
        if not self.signed_kernel:
            if t < 0.0:
                return RateValue.infinite()
            if t == 0.0:
                lam = self.kernel.positive_support_measure
                if math.isinf(lam):
                    return RateValue.infinite()
                return RateValue.of(lam / (1.0 - self.ad))
        u = self.inverse_prime(t)
        return RateValue.of(t * u - self.psi(u))


def pointwise_rate_density(psi_ev: PsiEvaluator, f_x: float, t: float) -> RateValue:
    """Pointwise large-deviation rate at a point with density value f_x.

    Recentring puts the estimator's almost-sure limit at rate zero:
    the rate of deviation t is f_x (1 - a d) I(1/(1 - a d) + t/(f_x (1 - a d))).
    At points where f_x = 0 the rate degenerates to 0 at t = 0 and +inf
    elsewhere.
    """
    if f_x < 0:
        raise ValueError("density values are nonnegative")
    if f_x == 0.0:
        return RateValue.of(0.0) if t == 0.0 else RateValue.infinite()
    scale = f_x * (1.0 - psi_ev.ad)
    # (f_x + t)/scale == 1/(1-ad) + t/scale, but is exactly 0 at the
    # floor t = -f_x, keeping the branch at the conjugate's left endpoint
    base = psi_ev.legendre((f_x + t) / scale)
    if not base.finite:
        return RateValue.infinite()
    return RateValue.of(scale * base.value)


def quadratic_rate(
    f_x: float,
    l2_alpha: float,
    a: float,
    d: int,
    alpha_order: int,
    t: float,
) -> RateValue:
    """Moderate-deviation rate t^2 (1 - a^2 (d+2|alpha|)^2) / (2 f_x int (d^a K)^2)."""
    if f_x < 0:
        raise ValueError("density values are nonnegative")
    if l2_alpha <= 0:
        raise ValueError("kernel L2 norm must be positive")
    m = a * (d + 2 * alpha_order)
    if m >= 1.0:
        raise ValueError(f"a (d + 2|alpha|) = {m:.4g} >= 1 is outside the theory")
    if f_x == 0.0:
        return RateValue.of(0.0) if t == 0.0 else RateValue.infinite()
    return RateValue.of(t * t * (1.0 - m * m) / (2.0 * f_x * l2_alpha))


@dataclass
class UniformRateSpec:
    """Inputs for uniform (sup over a region) deviation rates.

    mode "ldp_density" is the unscaled density estimator (|alpha| = 0,
    v = 1) and uses the transform; mode "quadratic" covers every scaled or
    derivative case.  `sup_density` is the sup of f over the region,
    computed on the experiment grid by callers.
    """

    mode: str
    sup_density: float
    kernel: KernelModel
    a: float
    alpha: MultiIndex
    scaling: ScalingSequence
    psi: Optional[PsiEvaluator] = field(default=None, repr=False)

    def __post_init__(self):
        if self.mode not in ("ldp_density", "quadratic"):
            raise ValueError(f"unknown uniform-rate mode '{self.mode}'")
        if self.sup_density <= 0:
            raise ValueError("sup_density must be positive")
        self.alpha = as_multi_index(self.alpha, self.kernel.dimension)
        if self.mode == "ldp_density":
            if self.alpha.order != 0:
                raise ValueError("mode ldp_density requires |alpha| = 0")
            if not self.scaling.is_constant_one:
                raise ValueError("mode ldp_density requires the constant scaling v = 1")
            if self.psi is None:
                self.psi = PsiEvaluator(self.kernel, self.a)
        m = self.a * (self.kernel.dimension + 2 * self.alpha.order)
        if m >= 1.0:
            raise ValueError(f"a (d + 2|alpha|) = {m:.4g} >= 1 is outside the theory")

    @property
    def _quad_slope(self) -> float:
        m = self.a * (self.kernel.dimension + 2 * self.alpha.order)
        return (1.0 - m * m) / (self.sup_density * self.kernel.l2_norm_sq(self.alpha))


def uniform_rate(spec: UniformRateSpec, delta: float):
    """(g(delta), g(-delta), min of the two) for the sup-deviation statistic.

    In ldp_density mode the down-crossing branch g(-delta) becomes +inf as
    soon as delta >= sup_density for kernels with unbounded positive
    support, and hits the finite t = 0 branch exactly at delta = sup_density
    for compactly supported ones.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    if spec.mode == "ldp_density":
        g_pos = pointwise_rate_density(spec.psi, spec.sup_density, delta)
        g_neg = pointwise_rate_density(spec.psi, spec.sup_density, -delta)
    else:
        g_pos = quadratic_rate(
            spec.sup_density,
            spec.kernel.l2_norm_sq(spec.alpha),
            spec.a,
            spec.kernel.dimension,
            spec.alpha.order,
            delta,
        )
        g_neg = g_pos
    return g_pos, g_neg, _min_rate(g_pos, g_neg)


def phi_maximizer(spec: UniformRateSpec, delta: float) -> float:
    """The tilt u at which u*delta - sup_x Lambda_x(u) attains g(delta).

    `delta` may be signed; negative values give the down-crossing tilt.
    The duality identity u*delta - Lambda(u; sup_density) = g(delta) holds
    to root-finding accuracy and is asserted in tests.
    """
    if delta == 0:
        return 0.0
    if spec.mode == "ldp_density":
        scale = spec.sup_density * (1.0 - spec.psi.ad)
        return spec.psi.inverse_prime(spec.psi.prime_at_zero + delta / scale)
    return delta * spec._quad_slope


def uniform_cgf_limit(spec: UniformRateSpec, u: float) -> float:
    """sup_x Lambda_x(u) over the region, i.e. Lambda at f = sup_density."""
    if spec.mode == "ldp_density":
        ad = spec.psi.ad
        return spec.sup_density * (1.0 - ad) * (
            spec.psi.psi(u) - u / (1.0 - ad)
        )
    return 0.5 * u * u / spec._quad_slope
