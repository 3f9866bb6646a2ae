"""Kernel models: evaluation, partial derivatives, and the constants they feed.

A kernel here is a bounded integrable function K on R^d with integral one.
The built-in families (gaussian, epanechnikov, quartic) are products of a
one-dimensional profile across coordinates, which keeps every constant a
product of one-dimensional factors.  Signed or non-product kernels can be
wrapped through the generic KernelModel constructor; they must then supply
the support-sign measures themselves.

Constants with a closed form (L2 norms, low moments, sup norms of the
gaussian family) are filled analytically; everything else falls back to
adaptive quadrature with a hard absolute tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .numerics import QuadratureError, gauss_legendre_panels, integrate_to_tol

SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class MultiIndex:
    """Partial-derivative multi-index (a_1, ..., a_d) with |a| = sum a_j."""

    components: tuple[int, ...]

    def __post_init__(self):
        comps = tuple(int(c) for c in self.components)
        if len(comps) == 0:
            raise ValueError("multi-index needs at least one component")
        if any(c < 0 for c in comps):
            raise ValueError(f"multi-index components must be >= 0, got {comps}")
        object.__setattr__(self, "components", comps)

    @property
    def order(self) -> int:
        return sum(self.components)

    @property
    def dimension(self) -> int:
        return len(self.components)

    def lowered(self, axis: int) -> "MultiIndex":
        """The multi-index with one derivative removed on `axis`."""
        if self.components[axis] < 1:
            raise ValueError(f"axis {axis} has no derivative to lower")
        comps = list(self.components)
        comps[axis] -= 1
        return MultiIndex(tuple(comps))


def as_multi_index(alpha, dimension: int) -> MultiIndex:
    if isinstance(alpha, MultiIndex):
        mi = alpha
    else:
        mi = MultiIndex(tuple(alpha))
    if mi.dimension != dimension:
        raise ValueError(
            f"multi-index {mi.components} has dimension {mi.dimension}, kernel has {dimension}"
        )
    return mi


class _Profile:
    """One-dimensional kernel profile with analytic derivatives."""

    name: str = ""
    radius: float = 1.0
    max_order: int = 0
    # closed-form tables keyed by derivative order, filled per subclass
    l2_table: dict = {}
    sup_table: dict = {}

    def value(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def derivative(self, k: int, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def moment(self, s: int) -> float:
        """integral of x^s * profile(x) over R (closed form where cheap)."""
        raise NotImplementedError


class _GaussianProfile(_Profile):
    name = "gaussian"
    # phi(8.5) ~ 5e-17; integrand tails beyond the box are < 1e-14 even
    # after multiplication by moderate exp factors
    radius = 8.5
    max_order = 6

    def value(self, x):
        return np.exp(-0.5 * x * x) / SQRT_2PI

    def derivative(self, k, x):
        if k == 0:
            return self.value(x)
        # phi^(k)(x) = (-1)^k He_k(x) phi(x), probabilists' Hermite
        he_prev = np.ones_like(x)
        he = np.asarray(x, dtype=float).copy()
        for j in range(1, k):
            he_prev, he = he, x * he - j * he_prev
        return ((-1.0) ** k) * he * self.value(x)

    def moment(self, s):
        if s % 2 == 1:
            return 0.0
        # double factorial (s-1)!!
        out = 1.0
        for j in range(1, s, 2):
            out *= j
        return out

    @property
    def l2_table(self):
        # int (phi^(k))^2 = (2k)! / (k! 4^k 2 sqrt(pi))
        return {
            k: math.factorial(2 * k)
            / (math.factorial(k) * 4.0**k * 2.0 * math.sqrt(math.pi))
            for k in range(self.max_order + 1)
        }

    @property
    def sup_table(self):
        # |phi^(k)| maxima for the orders used in practice
        phi = lambda x: math.exp(-0.5 * x * x) / SQRT_2PI
        return {0: phi(0.0), 1: phi(1.0), 2: phi(0.0)}


class _EpanechnikovProfile(_Profile):
    name = "epanechnikov"
    radius = 1.0
    max_order = 0  # the slope is discontinuous at the support edge
    l2_table = {0: 3.0 / 5.0}
    sup_table = {0: 0.75}

    def value(self, x):
        inside = np.abs(x) < 1.0
        return np.where(inside, 0.75 * (1.0 - x * x), 0.0)

    def derivative(self, k, x):
        if k == 0:
            return self.value(x)
        raise ValueError("epanechnikov kernel is not differentiable at its support edge")

    def moment(self, s):
        if s % 2 == 1:
            return 0.0
        # int x^s 3/4 (1 - x^2) on [-1, 1]
        return 1.5 * (1.0 / (s + 1.0) - 1.0 / (s + 3.0))


class _QuarticProfile(_Profile):
    name = "quartic"
    radius = 1.0
    max_order = 1  # C^1 across the support edge, second derivative jumps
    l2_table = {0: 5.0 / 7.0, 1: 15.0 / 7.0}
    sup_table = {0: 15.0 / 16.0, 1: 15.0 / (4.0 * math.sqrt(3.0)) * (2.0 / 3.0)}

    def value(self, x):
        inside = np.abs(x) < 1.0
        t = 1.0 - x * x
        return np.where(inside, (15.0 / 16.0) * t * t, 0.0)

    def derivative(self, k, x):
        if k == 0:
            return self.value(x)
        if k == 1:
            inside = np.abs(x) < 1.0
            return np.where(inside, -(15.0 / 4.0) * x * (1.0 - x * x), 0.0)
        raise ValueError("quartic kernel has no continuous derivatives past order 1")

    def moment(self, s):
        if s % 2 == 1:
            return 0.0
        # int x^s 15/16 (1 - x^2)^2 on [-1, 1]
        return (15.0 / 8.0) * (
            1.0 / (s + 1.0) - 2.0 / (s + 3.0) + 1.0 / (s + 5.0)
        )


_PROFILES = {
    "gaussian": _GaussianProfile(),
    "epanechnikov": _EpanechnikovProfile(),
    "quartic": _QuarticProfile(),
}


@dataclass
class KernelModel:
    """A kernel on R^d plus the metadata the deviation theory needs.

    `eval_fn` maps an (n, d) array to (n,) values.  `deriv_fn(alpha, pts)`
    evaluates the partial derivative for a MultiIndex alpha; it may be None
    for kernels wrapped without derivative support.  The sign-set measures
    are Lebesgue measures of {K > 0} and {K < 0} and drive the branch logic
    of the rate transform, so custom kernels must state them explicitly.
    """

    name: str
    dimension: int
    eval_fn: Callable[[np.ndarray], np.ndarray]
    deriv_fn: Optional[Callable[[MultiIndex, np.ndarray], np.ndarray]]
    support_radius: float
    moment_order: int
    positive_support_measure: float
    negative_support_measure: float
    max_derivative_order: int
    is_product: bool = False
    profile: Optional[_Profile] = None
    _l2_cache: dict = field(default_factory=dict, repr=False)
    _sup_cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")
        if self.support_radius <= 0:
            raise ValueError("support_radius must be positive")
        if min(self.positive_support_measure, self.negative_support_measure) < 0:
            raise ValueError("support measures must be >= 0")

    # -- evaluation ----------------------------------------------------

    def _as_points(self, points) -> tuple[np.ndarray, tuple]:
        pts = np.asarray(points, dtype=np.float64)
        if self.dimension == 1 and not (pts.ndim == 2 and pts.shape[-1] == 1):
            # d = 1 inputs are scalars; only an explicit (n, 1) array is
            # already in point form
            pts = pts.reshape(pts.shape + (1,))
        if pts.shape[-1] != self.dimension:
            raise ValueError(
                f"points have last dimension {pts.shape[-1]}, kernel needs {self.dimension}"
            )
        lead = pts.shape[:-1]
        return pts.reshape(-1, self.dimension), lead

    def eval(self, points):
        pts, lead = self._as_points(points)
        return self.eval_fn(pts).reshape(lead)

    def deriv_eval(self, alpha, points):
        mi = as_multi_index(alpha, self.dimension)
        if mi.order == 0:
            return self.eval(points)
        if mi.order > self.max_derivative_order:
            raise ValueError(
                f"kernel '{self.name}' supports derivatives up to order "
                f"{self.max_derivative_order}, requested |alpha| = {mi.order}"
            )
        if self.deriv_fn is None:
            raise ValueError(f"kernel '{self.name}' has no derivative implementation")
        pts, lead = self._as_points(points)
        return self.deriv_fn(mi, pts).reshape(lead)

    # -- constants -----------------------------------------------------

    def sup_norm(self, alpha=None) -> float:
        """sup |d^alpha K|, from closed forms where known, else a grid scan."""
        mi = self._alpha_or_zero(alpha)
        key = mi.components
        if key not in self._sup_cache:
            self._sup_cache[key] = self._compute_sup(mi)
        return self._sup_cache[key]

    def l2_norm_sq(self, alpha=None) -> float:
        """integral of (d^alpha K)^2 over R^d."""
        mi = self._alpha_or_zero(alpha)
        key = mi.components
        if key not in self._l2_cache:
            self._l2_cache[key] = self._compute_l2(mi)
        return self._l2_cache[key]

    def _alpha_or_zero(self, alpha) -> MultiIndex:
        if alpha is None:
            return MultiIndex((0,) * self.dimension)
        return as_multi_index(alpha, self.dimension)

    def _compute_sup(self, mi: MultiIndex) -> float:
        if self.is_product and self.profile is not None:
            out = 1.0
            for aj in mi.components:
                tab = self.profile.sup_table
                if aj in tab:
                    out *= tab[aj]
                else:
                    out *= _scan_sup(
                        lambda x, k=aj: self.profile.derivative(k, x),
                        self.support_radius,
                    )
            return out
        if mi.order > self.max_derivative_order:
            raise ValueError("derivative order beyond kernel smoothness")
        f = (lambda p: self.eval_fn(p)) if mi.order == 0 else (
            lambda p: self.deriv_fn(mi, p)
        )
        return _scan_sup_nd(f, self.dimension, self.support_radius)

    def _compute_l2(self, mi: MultiIndex) -> float:
        if self.is_product and self.profile is not None:
            out = 1.0
            for aj in mi.components:
                tab = self.profile.l2_table
                if aj in tab:
                    out *= tab[aj]
                else:
                    out *= integrate_to_tol(
                        lambda x, k=aj: self.profile.derivative(k, x) ** 2,
                        -self.support_radius,
                        self.support_radius,
                        tol=1e-12,
                    )
            return out
        f = (lambda p: self.eval_fn(p)) if mi.order == 0 else (
            lambda p: self.deriv_fn(mi, p)
        )
        return _tensor_integral(
            lambda p: f(p) ** 2, self.dimension, self.support_radius
        )


def _scan_sup(f, radius: float) -> float:
    """sup |f| on [-radius, radius] by dense scan plus local refinement."""
    x = np.linspace(-radius, radius, 20001)
    v = np.abs(f(x))
    i = int(np.argmax(v))
    lo = x[max(i - 1, 0)]
    hi = x[min(i + 1, len(x) - 1)]
    for _ in range(60):
        xs = np.linspace(lo, hi, 9)
        vs = np.abs(f(xs))
        j = int(np.argmax(vs))
        lo = xs[max(j - 1, 0)]
        hi = xs[min(j + 1, len(xs) - 1)]
    return float(np.abs(f(np.array([0.5 * (lo + hi)])))[0])


def _scan_sup_nd(f, d: int, radius: float) -> float:
    if d == 1:
        return _scan_sup(lambda x: f(x.reshape(-1, 1)), radius)
    if d > 3:
        raise ValueError("sup scan beyond d = 3 is not supported; supply the constant")
    n = 201 if d == 2 else 41
    axes = [np.linspace(-radius, radius, n)] * d
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    return float(np.max(np.abs(f(mesh))))


def _tensor_integral(f, d: int, radius: float, tol: float = 1e-10) -> float:
    """Tensor Gauss-Legendre integral over [-radius, radius]^d with doubling check."""
    if d > 3:
        raise ValueError(
            "tensor quadrature beyond d = 3 is not supported; "
            "use a product kernel or supply the constant"
        )
    prev = None
    for level in range(6):
        panels = (4 if radius > 2 else 2) * 2**level
        x, w = gauss_legendre_panels(-radius, radius, panels, order=12)
        grids = np.meshgrid(*([x] * d), indexing="ij")
        pts = np.stack(grids, axis=-1).reshape(-1, d)
        ws = np.ones(len(pts))
        for wm in np.meshgrid(*([w] * d), indexing="ij"):
            ws *= wm.reshape(-1)
        val = float(np.dot(ws, f(pts)))
        if prev is not None and abs(val - prev) <= tol:
            return val
        prev = val
    raise QuadratureError(f"tensor integral did not converge to {tol:g} in d={d}")


def kernel_quadrature(model: KernelModel, level: int = 0, order: int = 16):
    """Tensor Gauss-Legendre nodes/weights over the kernel's support box.

    Returns (points (m, d), weights (m,)); `level` doubles the panel count,
    so integrals evaluated at consecutive levels give an error estimate.
    """
    if model.dimension > 3:
        raise ValueError("tensor quadrature beyond d = 3 is not supported")
    r = model.support_radius
    panels = max(2, int(np.ceil(r))) * 2**level
    x, w = gauss_legendre_panels(-r, r, panels, order=order)
    d = model.dimension
    if d == 1:
        return x.reshape(-1, 1), w
    grids = np.meshgrid(*([x] * d), indexing="ij")
    pts = np.stack(grids, axis=-1).reshape(-1, d)
    ws = np.ones(len(pts))
    for wm in np.meshgrid(*([w] * d), indexing="ij"):
        ws *= wm.reshape(-1)
    return pts, ws


def builtin_kernel(name: str, d: int = 1) -> KernelModel:
    """Construct a built-in product kernel on R^d.

    Supported names: gaussian, epanechnikov, quartic.  The non-gaussian
    families have compact support, so the measure of {K > 0} is the volume
    of the open box (-1, 1)^d; the gaussian's is infinite.
    """
    if name not in _PROFILES:
        raise ValueError(f"unknown kernel '{name}'; choose from {sorted(_PROFILES)}")
    if d < 1:
        raise ValueError("d must be >= 1")
    profile = _PROFILES[name]

    def eval_fn(pts: np.ndarray) -> np.ndarray:
        out = profile.value(pts[:, 0])
        for j in range(1, d):
            out = out * profile.value(pts[:, j])
        return out

    def deriv_fn(mi: MultiIndex, pts: np.ndarray) -> np.ndarray:
        out = np.ones(len(pts))
        for j, aj in enumerate(mi.components):
            out = out * profile.derivative(aj, pts[:, j])
        return out

    pos = math.inf if name == "gaussian" else 2.0**d
    return KernelModel(
        name=name,
        dimension=d,
        eval_fn=eval_fn,
        deriv_fn=deriv_fn,
        support_radius=profile.radius,
        moment_order=2,
        positive_support_measure=pos,
        negative_support_measure=0.0,
        max_derivative_order=profile.max_order,
        is_product=True,
        profile=profile,
    )


def kernel_moment(model: KernelModel, s: int, axis: int = 0, absolute: bool = False) -> float:
    """integral of y_axis^s K(y) dy (or of y_axis^s |K(y)| with absolute=True)."""
    if s < 0:
        raise ValueError("moment order must be >= 0")
    if axis < 0 or axis >= model.dimension:
        raise ValueError(f"axis {axis} out of range for d={model.dimension}")
    if model.is_product and model.profile is not None:
        if not absolute or model.negative_support_measure == 0.0:
            return model.profile.moment(s)

    if absolute:
        f = lambda p: np.abs(model.eval_fn(p)) * p[:, axis] ** s
    else:
        f = lambda p: model.eval_fn(p) * p[:, axis] ** s
    return _tensor_integral(f, model.dimension, model.support_radius)


def norm_moment(model: KernelModel, s: int = 2) -> float:
    """integral of ||y||^s |K(y)| dy, the constant in the uniform bias bound."""
    if s == 2 and model.negative_support_measure == 0.0:
        # ||y||^2 splits across axes and |K| = K
        return sum(kernel_moment(model, 2, axis=j) for j in range(model.dimension))
    f = lambda p: np.abs(model.eval_fn(p)) * np.sum(p * p, axis=1) ** (s / 2.0)
    return _tensor_integral(f, model.dimension, model.support_radius)


def finite_difference_check(model: KernelModel, alpha, points, h: float = 1e-3) -> float:
    """Largest gap between d^alpha K and a central difference of d^(alpha - e_j).

    Differentiates once along the first axis carrying a derivative; the
    lower-order partial comes from the model itself, so the check validates
    each derivative order against the one below it.
    """
    mi = as_multi_index(alpha, model.dimension)
    if mi.order == 0:
        raise ValueError("finite-difference check needs |alpha| >= 1")
    axis = next(j for j, aj in enumerate(mi.components) if aj > 0)
    lower = mi.lowered(axis)
    pts = np.asarray(points, dtype=np.float64)
    if model.dimension == 1 and (pts.ndim == 0 or pts.shape[-1] != 1):
        pts = pts.reshape(-1, 1)
    pts = pts.reshape(-1, model.dimension)
    shift = np.zeros(model.dimension)
    shift[axis] = h
    fd = (model.deriv_eval(lower, pts + shift) - model.deriv_eval(lower, pts - shift)) / (
        2.0 * h
    )
    exact = model.deriv_eval(mi, pts)
    return float(np.max(np.abs(fd - exact)))
