"""Monte Carlo verification of the deviation principles at desk scale.

The engine estimates P[ sup_{x in U} v_n |d^alpha f_n(x) - d^alpha f(x)| >= delta ]
by replicated simulation (a single evaluation point is the sup over a
singleton, so pointwise runs and uniform runs share one code path and are
bit-identical when the grids coincide).  Each replication draws its own
stream from a counter-based generator keyed by (seed, replication index),
so results do not depend on chunking or thread scheduling.  Within a
replication the checkpoint estimates at n_1 < n_2 < ... reuse one stream
prefix: segment sums between checkpoints accumulate into prefix sums, so a
full n_max-observation stream is simulated once per replication.

Reports juxtapose the empirical normalized log-probabilities
(1/b_n) log p_hat_n with the theoretical references from the rate modules:
the pointwise rate, the quadratic rate, or the uniform sup-rate with its
two-sided envelope and the moment-exponent sandwich
[-g(delta), -(xi/(xi+d)) g(delta)] for unbounded regions.  Zero-count
cells are censored at 1/R and flagged, never silently logged as -inf.
Also here: the deterministic bias study (quadrature, no simulation) and
the finite-n Chernoff upper curve evaluated at the optimal tilt.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .bandwidth import speed
from .cgf import CgfSpec, cgf_finite_n
from .densities import Density
from .estimator import bias_normalizer, bias_sup_bound, expected_estimate
from .ratefn import (
    RateValue,
    UniformRateSpec,
    phi_maximizer,
    pointwise_rate_density,
    quadratic_rate,
    uniform_rate,
)


class UnderpoweredExperimentError(RuntimeError):
    """Every cell of the experiment had zero exceedances."""


@dataclass
class DeviationExperiment:
    """One tail-probability experiment: model bundle, threshold, and budget."""

    spec: CgfSpec
    delta: float
    n_list: tuple
    replications: int
    rng_seed: int
    region: Optional[np.ndarray] = None  # grid for U in sup mode
    xi: Optional[float] = None  # moment exponent for the unbounded-U bound
    chunk_target: int = 4_000_000  # rep-chunking budget in stream entries

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.delta <= 0:
            raise ValueError("delta must be > 0")
        ns = tuple(int(n) for n in self.n_list)
        if len(ns) == 0 or any(n < 1 for n in ns) or any(np.diff(ns) <= 0):
            raise ValueError("n_list must be increasing positive integers")
        self.n_list = ns
        if self.region is not None:
            d = self.spec.kernel.dimension
            reg = np.asarray(self.region, dtype=np.float64)
            if d == 1 and not (reg.ndim == 2 and reg.shape[-1] == 1):
                reg = reg.reshape(-1, 1)
            if reg.ndim != 2 or reg.shape[1] != d or len(reg) == 0:
                raise ValueError(f"region grid must be a nonempty (m, {d}) array")
            self.region = reg
        if self.xi is not None and self.xi <= 0:
            raise ValueError("xi must be > 0")


@dataclass(frozen=True)
class DeviationRow:
    """Empirical tail cell at one n, with its normalized log-probability."""

    n: int
    speed: float
    count: int
    p_hat: float
    censored: bool
    normalized_log: float
    chernoff_bound: Optional[float] = None


@dataclass(frozen=True)
class BiasRow:
    n: int
    normalizer: float
    bias: float
    ratio: float
    sup_normalized: Optional[float] = None


@dataclass(frozen=True)
class Verdict:
    name: str
    passed: bool
    detail: str


@dataclass(frozen=True)
class DeviationReport:
    """Immutable result of one experiment run."""

    kind: str
    delta: Optional[float]
    replications: Optional[int]
    rate: Optional[RateValue]
    sandwich: Optional[tuple]
    rows: tuple = ()
    bias_rows: tuple = ()
    bias_bound: Optional[float] = None
    verdicts: tuple = ()
    notes: tuple = ()

    @property
    def all_passed(self) -> bool:
        return all(v.passed for v in self.verdicts)


def _thread_count() -> int:
    raw = os.environ.get("RECDEV_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _simulate_counts(exp: DeviationExperiment, grid: np.ndarray) -> np.ndarray:
    """Exceedance counts of sup_grid v_n |est - target| >= delta per checkpoint.

    Counts are integers and replications are keyed individually, so the
    result is independent of chunk size and thread count.
    """
    spec = exp.spec
    kernel, schedule, scaling = spec.kernel, spec.schedule, spec.scaling
    d = kernel.dimension
    alpha = spec.alpha
    p = d + alpha.order
    n_list = np.asarray(exp.n_list, dtype=np.int64)
    n_max = int(n_list[-1])
    hs = schedule.values(n_max)
    inv = hs**-p
    starts = np.concatenate([[0], n_list[:-1]])
    v_at = scaling.values(n_list.astype(np.float64))
    target = spec.density.partial(alpha.components, grid)
    delta = exp.delta

    chunk = max(1, int(exp.chunk_target // max(n_max, 1)))
    n_chunks = (exp.replications + chunk - 1) // chunk

    def run_chunk(c: int) -> np.ndarray:
        r0 = c * chunk
        r1 = min(r0 + chunk, exp.replications)
        b = r1 - r0
        X = np.empty((b, n_max, d))
        for j in range(b):
            bitgen = np.random.Philox(key=np.array([exp.rng_seed, r0 + j], dtype=np.uint64))
            X[j] = spec.density.sample(np.random.Generator(bitgen), n_max)
        sup_stat = np.zeros((b, len(n_list)))
        for g in range(len(grid)):
            z = (grid[g][None, None, :] - X) / hs[None, :, None]
            vals = kernel.deriv_eval(alpha, z.reshape(-1, d)).reshape(b, n_max)
            vals *= inv[None, :]
            seg = np.add.reduceat(vals, starts, axis=1)
            est = np.cumsum(seg, axis=1) / n_list[None, :]
            stat = np.abs(est - target[g]) * v_at[None, :]
            np.maximum(sup_stat, stat, out=sup_stat)
        return (sup_stat >= delta).sum(axis=0).astype(np.int64)

    workers = _thread_count()
    if workers > 1 and n_chunks > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run_chunk, range(n_chunks)))
    else:
        parts = [run_chunk(c) for c in range(n_chunks)]
    return np.sum(parts, axis=0)


def _rows_from_counts(exp: DeviationExperiment, counts: np.ndarray) -> tuple:
    spec = exp.spec
    rows = []
    for n, cnt in zip(exp.n_list, counts):
        b_n = speed(spec.schedule, spec.scaling, spec.kernel.dimension, spec.alpha.order, n)
        censored = cnt == 0
        p_hat = max(int(cnt), 1) / exp.replications
        rows.append(
            DeviationRow(
                n=int(n),
                speed=b_n,
                count=int(cnt),
                p_hat=p_hat,
                censored=bool(censored),
                normalized_log=math.log(p_hat) / b_n,
            )
        )
    if all(r.count == 0 for r in rows):
        raise UnderpoweredExperimentError(
            f"no exceedances of delta={exp.delta} in {exp.replications} replications "
            "at any n; increase replications or lower delta"
        )
    return tuple(rows)


def _rate_spec(exp: DeviationExperiment, sup_density: float) -> UniformRateSpec:
    spec = exp.spec
    mode = "ldp_density" if spec.regime == "ldp" else "quadratic"
    psi = spec._psi if mode == "ldp_density" else None
    return UniformRateSpec(
        mode=mode,
        sup_density=sup_density,
        kernel=spec.kernel,
        a=spec.schedule.a,
        alpha=spec.alpha,
        scaling=spec.scaling,
        psi=psi,
    )


def _two_sided_rate(exp: DeviationExperiment, sup_density: float) -> RateValue:
    """min of the up- and down-crossing rates at the experiment's delta."""
    rspec = _rate_spec(exp, sup_density)
    if rspec.psi is not None and exp.spec._psi is None:
        exp.spec._psi = rspec.psi
    _, _, tilde = uniform_rate(rspec, exp.delta)
    return tilde


def run_pointwise(exp: DeviationExperiment, mode: str) -> DeviationReport:
    """Tail probabilities of v_n |d^alpha f_n(x) - d^alpha f(x)| at one point.

    mode "ldp" is the plain unscaled density estimator; mode "mdp" the
    scaled or derivative case; either must match the spec's regime.
    """
    spec = exp.spec
    if mode not in ("ldp", "mdp"):
        raise ValueError("mode must be 'ldp' or 'mdp'")
    if (mode == "ldp") != (spec.regime == "ldp"):
        raise ValueError(
            f"mode '{mode}' conflicts with the spec regime '{spec.regime}': "
            "ldp needs the constant scaling and |alpha| = 0"
        )
    grid = spec.point.reshape(1, -1)
    fx = spec.density_at_point
    if fx > 0:
        rate = _two_sided_rate(exp, fx)
    else:
        rate = RateValue.infinite()
    counts = _simulate_counts(exp, grid)
    rows = _rows_from_counts(exp, counts)
    verdicts = _tail_verdicts(rows, rate)
    return DeviationReport(
        kind=f"pointwise_{mode}",
        delta=exp.delta,
        replications=exp.replications,
        rate=rate,
        sandwich=None,
        rows=rows,
        verdicts=verdicts,
    )


def run_uniform(exp: DeviationExperiment, bounded: bool = True) -> DeviationReport:
    """Tail probabilities of the sup over the region grid, with the sandwich.

    The sup-norm of f over U is taken on the supplied grid.  For bounded
    regions (and for densities with all moments finite) the reference is
    -g(delta) itself; otherwise the upper member is -(xi/(xi+d)) g(delta)
    from the supplied moment exponent.
    """
    spec = exp.spec
    if exp.region is None:
        raise ValueError("uniform mode needs a region grid")
    if not bounded and exp.xi is None:
        raise ValueError("unbounded mode needs the moment exponent xi")
    sup_density = float(np.max(spec.density.pdf(exp.region)))
    rate = _two_sided_rate(exp, sup_density)
    lower = -rate.value
    factor = 1.0 if bounded or exp.xi is None else exp.xi / (exp.xi + spec.kernel.dimension)
    upper = -factor * rate.value if rate.finite else -math.inf
    counts = _simulate_counts(exp, exp.region)
    rows = _rows_from_counts(exp, counts)
    verdicts = ()
    if rate.finite:
        slack = 0.3 * rate.value
        final = rows[-1].normalized_log
        verdicts = (
            Verdict(
                "sandwich_upper",
                final <= upper + slack,
                f"final normalized log {final:.6g} vs upper {upper:.6g} + slack {slack:.6g}",
            ),
            Verdict(
                "sandwich_lower",
                final >= lower - slack,
                f"final normalized log {final:.6g} vs lower {lower:.6g} - slack {slack:.6g}",
            ),
        )
    return DeviationReport(
        kind="uniform_bounded" if bounded else "uniform_unbounded",
        delta=exp.delta,
        replications=exp.replications,
        rate=rate,
        sandwich=(lower, upper),
        rows=rows,
        verdicts=verdicts,
    )


def _tail_verdicts(rows: tuple, rate: RateValue) -> tuple:
    """Convergence verdicts for a finite governing rate.

    The normalized log-probabilities approach -rate from below (the
    sub-exponential prefactor pushes log p_hat under -speed * rate), so
    "approaches the rate" is judged on the gap |normalized_log + rate|,
    which must shrink along n; the final gap must be within 30% of the
    rate.  With an infinite rate there is nothing to compare against.
    """
    if not rate.finite or rate.value <= 0:
        return ()
    logs = [r.normalized_log for r in rows]
    gaps = [abs(v + rate.value) for v in logs]
    out = []
    if len(rows) >= 2:
        shrinking = all(b < a for a, b in zip(gaps, gaps[1:]))
        out.append(
            Verdict(
                "gap_to_rate_decreasing",
                shrinking,
                "gaps to the rate " + (" > ".join(f"{v:.5g}" for v in gaps)),
            )
        )
    out.append(
        Verdict(
            "final_within_30pct",
            gaps[-1] <= 0.3 * rate.value,
            f"|{logs[-1]:.6g} - ({-rate.value:.6g})| = {gaps[-1]:.6g} vs 30% = {0.3*rate.value:.6g}",
        )
    )
    return tuple(out)


def run_bias_study(exp: DeviationExperiment, q: int = 2, m_q: Optional[float] = None) -> DeviationReport:
    """Deterministic bias table: ratio to (1/n) sum h_i^q and the sup bound.

    m_q bounds the q-th derivatives of the target d^alpha f; if omitted it
    is computed from the density (one-dimensional densities only).  With a
    region grid the normalized sup over the grid is checked against the
    bound, which holds at every n, not just in the limit.
    """
    spec = exp.spec
    kernel, schedule, density = spec.kernel, spec.schedule, spec.density
    if m_q is None:
        m_q = density.max_abs_derivative(spec.alpha.order + q)
    bound = bias_sup_bound(kernel, q, m_q)
    pt = spec.point.reshape(1, -1)
    target_pt = density.partial(spec.alpha.components, pt)[0]
    rows = []
    for n in exp.n_list:
        norm = bias_normalizer(schedule, q, n)
        b = expected_estimate(kernel, schedule, density, n, pt, alpha=spec.alpha.components)[0] - target_pt
        sup_norm = None
        if exp.region is not None:
            means = expected_estimate(
                kernel, schedule, density, n, exp.region, alpha=spec.alpha.components
            )
            targets = density.partial(spec.alpha.components, exp.region)
            sup_norm = float(np.max(np.abs(means - targets))) / norm
        rows.append(
            BiasRow(n=int(n), normalizer=norm, bias=float(b), ratio=float(b) / norm, sup_normalized=sup_norm)
        )
    verdicts = []
    if len(rows) >= 2:
        r_prev, r_last = rows[-2].ratio, rows[-1].ratio
        denom = max(abs(r_last), 1e-300)
        change = abs(r_last - r_prev) / denom
        verdicts.append(
            Verdict(
                "bias_ratio_stable",
                change < 0.10,
                f"ratio moved {change:.3%} between n={rows[-2].n} and n={rows[-1].n}",
            )
        )
    if exp.region is not None:
        worst = max(r.sup_normalized for r in rows)
        verdicts.append(
            Verdict(
                "bias_bound_holds",
                worst <= bound * (1 + 1e-9),
                f"sup normalized bias {worst:.6g} vs bound {bound:.6g}",
            )
        )
    return DeviationReport(
        kind="bias",
        delta=None,
        replications=None,
        rate=None,
        sandwich=None,
        bias_rows=tuple(rows),
        bias_bound=bound,
        verdicts=tuple(verdicts),
    )


def chernoff_upper_curve(
    exp: DeviationExperiment, base: Optional[DeviationReport] = None
) -> DeviationReport:
    """Finite-n Chernoff bound at the optimal tilt, checked against p_hat.

    The two-sided bound sums exp(-b_n (u delta_side - L_n(u))) over the two
    crossing directions, with u the maximizer of the limiting curve and
    delta_side adjusted by the exact finite-n bias (the simulated statistic
    is centred at the target, the cumulant at the mean).  `base` reuses
    the rows of a previous run with the same seed and budget; otherwise
    the simulation is rerun (bit-identical by construction).
    """
    spec = exp.spec
    grid = spec.point.reshape(1, -1)
    fx = spec.density_at_point
    if fx <= 0:
        raise ValueError("the Chernoff curve needs f(x) > 0 at the experiment point")
    if base is not None:
        rows = base.rows
        if tuple(r.n for r in rows) != tuple(exp.n_list):
            raise ValueError("base report rows do not match the experiment n_list")
    else:
        rows = _rows_from_counts(exp, _simulate_counts(exp, grid))
    rspec = _rate_spec(exp, fx)
    target = spec.density.partial(spec.alpha.components, grid)[0]
    out_rows = []
    notes = []
    for row in rows:
        n = row.n
        v_n = spec.scaling.value(n)
        mean = expected_estimate(
            spec.kernel, spec.schedule, spec.density, n, grid, alpha=spec.alpha.components
        )[0]
        bias = mean - target
        total = 0.0
        for sign in (+1.0, -1.0):
            d_eff = exp.delta - sign * v_n * bias
            if d_eff <= 0:
                total += 1.0  # threshold swallowed by the bias; bound is trivial
                notes.append(f"n={n}: side {sign:+.0f} has nonpositive effective threshold")
                continue
            u = phi_maximizer(rspec, sign * d_eff)
            ln = cgf_finite_n(spec, u, n)
            total += math.exp(-row.speed * (u * sign * d_eff - ln))
        bound = min(total, 1.0)
        out_rows.append(
            DeviationRow(
                n=row.n,
                speed=row.speed,
                count=row.count,
                p_hat=row.p_hat,
                censored=row.censored,
                normalized_log=row.normalized_log,
                chernoff_bound=bound,
            )
        )
    ok = True
    details = []
    for r in out_rows:
        se = math.sqrt(max(r.p_hat * (1 - r.p_hat), 1.0 / exp.replications) / exp.replications)
        holds = r.p_hat <= r.chernoff_bound + 3.0 * se
        ok = ok and holds
        details.append(f"n={r.n}: p_hat={r.p_hat:.3g} bound={r.chernoff_bound:.3g}")
    verdicts = (Verdict("chernoff_domination", ok, "; ".join(details)),)
    return DeviationReport(
        kind="chernoff",
        delta=exp.delta,
        replications=exp.replications,
        rate=_two_sided_rate(exp, fx) if fx > 0 else RateValue.infinite(),
        sandwich=None,
        rows=tuple(out_rows),
        verdicts=verdicts,
        notes=tuple(notes),
    )
