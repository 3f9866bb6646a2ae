"""Sampling densities with analytic partial derivatives.

The estimator targets d^alpha f, so densities used in experiments must
expose the same partial derivatives as the kernels do.  Three families are
provided: diagonal gaussian, gaussian mixture, and uniform box.  The box
density is not differentiable across its boundary and therefore only
supports |alpha| = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .kernels import MultiIndex, as_multi_index

SQRT_2PI = math.sqrt(2.0 * math.pi)


def _phi_derivative(k: int, x: np.ndarray) -> np.ndarray:
    """k-th derivative of the standard normal pdf."""
    phi = np.exp(-0.5 * x * x) / SQRT_2PI
    if k == 0:
        return phi
    he_prev = np.ones_like(x)
    he = np.array(x, dtype=float, copy=True)
    for j in range(1, k):
        he_prev, he = he, x * he - j * he_prev
    return ((-1.0) ** k) * he * phi


class Density:
    """Shared point handling; subclasses fill pdf/partial/sample."""

    dimension: int = 1
    name: str = ""
    max_derivative_order: int = 0

    def _as_points(self, points):
        pts = np.asarray(points, dtype=np.float64)
        if self.dimension == 1 and not (pts.ndim == 2 and pts.shape[-1] == 1):
            # d = 1 inputs are scalars; only an explicit (n, 1) array is
            # already in point form
            pts = pts.reshape(pts.shape + (1,))
        if pts.shape[-1] != self.dimension:
            raise ValueError(
                f"points have last dimension {pts.shape[-1]}, density has {self.dimension}"
            )
        return pts.reshape(-1, self.dimension), pts.shape[:-1]

    def pdf(self, points):
        pts, lead = self._as_points(points)
        return self._pdf(pts).reshape(lead)

    def partial(self, alpha, points):
        mi = as_multi_index(alpha, self.dimension)
        if mi.order > self.max_derivative_order:
            raise ValueError(
                f"density '{self.name}' supports derivatives up to order "
                f"{self.max_derivative_order}, requested |alpha| = {mi.order}"
            )
        pts, lead = self._as_points(points)
        return self._partial(mi, pts).reshape(lead)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        raise NotImplementedError

    def max_abs_derivative(self, order: int) -> float:
        """sup_x |f^(order)(x)| (one-dimensional densities only)."""
        raise NotImplementedError

    def _pdf(self, pts):
        raise NotImplementedError

    def _partial(self, mi, pts):
        raise NotImplementedError


@dataclass(frozen=False)
class GaussianDensity(Density):
    """Product of independent normals with per-coordinate mean and sigma."""

    def __init__(self, mean, sigma):
        self.mean = np.atleast_1d(np.asarray(mean, dtype=np.float64))
        self.sigma = np.atleast_1d(np.asarray(sigma, dtype=np.float64))
        if self.mean.shape != self.sigma.shape or self.mean.ndim != 1:
            raise ValueError("mean and sigma must be 1-D arrays of equal length")
        if np.any(self.sigma <= 0):
            raise ValueError("sigma must be positive")
        self.dimension = len(self.mean)
        self.name = "gaussian"
        self.max_derivative_order = 6

    def _pdf(self, pts):
        z = (pts - self.mean) / self.sigma
        out = np.ones(len(pts))
        for j in range(self.dimension):
            out *= _phi_derivative(0, z[:, j]) / self.sigma[j]
        return out

    def _partial(self, mi, pts):
        z = (pts - self.mean) / self.sigma
        out = np.ones(len(pts))
        for j, aj in enumerate(mi.components):
            out *= _phi_derivative(aj, z[:, j]) / self.sigma[j] ** (aj + 1)
        return out

    def sample(self, rng, n):
        eps = rng.standard_normal((n, self.dimension))
        return self.mean + self.sigma * eps

    def max_abs_derivative(self, order):
        if self.dimension != 1:
            raise ValueError("derivative sup is implemented for d = 1 only")
        s = float(self.sigma[0])
        x = np.linspace(-10.0, 10.0, 40001)
        v = np.abs(_phi_derivative(order, x)) / s ** (order + 1)
        i = int(np.argmax(v))
        lo, hi = x[max(i - 1, 0)], x[min(i + 1, len(x) - 1)]
        for _ in range(60):
            xs = np.linspace(lo, hi, 9)
            vs = np.abs(_phi_derivative(order, xs))
            j = int(np.argmax(vs))
            lo, hi = xs[max(j - 1, 0)], xs[min(j + 1, len(xs) - 1)]
        xm = 0.5 * (lo + hi)
        return float(abs(_phi_derivative(order, np.array([xm]))[0]) / s ** (order + 1))


class GaussianMixtureDensity(Density):
    """Weighted mixture of diagonal gaussians."""

    def __init__(self, weights, means, sigmas):
        self.weights = np.asarray(weights, dtype=np.float64)
        self.means = np.atleast_2d(np.asarray(means, dtype=np.float64))
        self.sigmas = np.atleast_2d(np.asarray(sigmas, dtype=np.float64))
        if self.weights.ndim != 1 or len(self.weights) != len(self.means):
            raise ValueError("weights and means must have matching first dimension")
        if self.means.shape != self.sigmas.shape:
            raise ValueError("means and sigmas must have matching shapes")
        if np.any(self.weights <= 0) or abs(self.weights.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be positive and sum to one")
        if np.any(self.sigmas <= 0):
            raise ValueError("sigmas must be positive")
        self.dimension = self.means.shape[1]
        self.name = "gaussian_mixture"
        self.max_derivative_order = 6
        self._components = [
            GaussianDensity(self.means[m], self.sigmas[m]) for m in range(len(self.weights))
        ]

    def _pdf(self, pts):
        out = np.zeros(len(pts))
        for w, comp in zip(self.weights, self._components):
            out += w * comp._pdf(pts)
        return out

    def _partial(self, mi, pts):
        out = np.zeros(len(pts))
        for w, comp in zip(self.weights, self._components):
            out += w * comp._partial(mi, pts)
        return out

    def sample(self, rng, n):
        comp = rng.choice(len(self.weights), size=n, p=self.weights)
        eps = rng.standard_normal((n, self.dimension))
        return self.means[comp] + self.sigmas[comp] * eps

    def max_abs_derivative(self, order):
        if self.dimension != 1:
            raise ValueError("derivative sup is implemented for d = 1 only")
        span = np.abs(self.means[:, 0]) + 10.0 * self.sigmas[:, 0]
        r = float(np.max(span))
        x = np.linspace(-r, r, 80001).reshape(-1, 1)
        mi = MultiIndex((order,))
        v = np.abs(self._partial(mi, x))
        i = int(np.argmax(v))
        lo, hi = x[max(i - 1, 0), 0], x[min(i + 1, len(x) - 1), 0]
        for _ in range(60):
            xs = np.linspace(lo, hi, 9).reshape(-1, 1)
            vs = np.abs(self._partial(mi, xs))
            j = int(np.argmax(vs))
            lo, hi = xs[max(j - 1, 0), 0], xs[min(j + 1, len(xs) - 1), 0]
        return float(np.abs(self._partial(mi, np.array([[0.5 * (lo + hi)]])))[0])


class UniformBoxDensity(Density):
    """Constant density on an axis-aligned box; |alpha| = 0 only."""

    def __init__(self, low, high):
        self.low = np.atleast_1d(np.asarray(low, dtype=np.float64))
        self.high = np.atleast_1d(np.asarray(high, dtype=np.float64))
        if self.low.shape != self.high.shape or self.low.ndim != 1:
            raise ValueError("low and high must be 1-D arrays of equal length")
        if np.any(self.high <= self.low):
            raise ValueError("box must have positive volume")
        self.dimension = len(self.low)
        self.name = "uniform_box"
        self.max_derivative_order = 0
        self._volume = float(np.prod(self.high - self.low))

    def _pdf(self, pts):
        inside = np.all((pts >= self.low) & (pts <= self.high), axis=1)
        return np.where(inside, 1.0 / self._volume, 0.0)

    def _partial(self, mi, pts):
        return self._pdf(pts)

    def sample(self, rng, n):
        u = rng.random((n, self.dimension))
        return self.low + u * (self.high - self.low)

    def max_abs_derivative(self, order):
        if order == 0:
            return 1.0 / self._volume
        raise ValueError("uniform box density is not differentiable across its boundary")


def build_density(name: str, params: dict) -> Density:
    """Construct a density from flat config parameters."""
    if name == "gaussian":
        return GaussianDensity(params.get("mean", [0.0]), params.get("sigma", [1.0]))
    if name == "gaussian_mixture":
        return GaussianMixtureDensity(params["weights"], params["means"], params["sigmas"])
    if name == "uniform_box":
        return UniformBoxDensity(params.get("low", [0.0]), params.get("high", [1.0]))
    raise ValueError(
        f"unknown density '{name}'; choose from gaussian, gaussian_mixture, uniform_box"
    )
