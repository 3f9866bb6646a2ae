"""Command line front end: flat JSON config, validation, CSV/JSON emission.

Subcommands
-----------
estimate   draw a seeded sample and tabulate the estimator on a grid
rate       tabulate the conjugate rate function on a t grid
cgf        finite-n cumulant curves against their limiting form
simulate   Monte Carlo tail probabilities against the governing rate
bias       deterministic bias table with the ratio and sup bound
chernoff   empirical tails against the finite-n Chernoff upper curve

One flat JSON document configures every subcommand; command line flags
override single fields, and the overrides are echoed into the JSON summary.
CSV output uses '.' decimals and literal "inf"/"-inf" for infinite rates so
files diff cleanly across platforms.  The JSON summary carries {config,
per_n, verdicts} plus the tolerance policy in force; output paths are kept
out of it so reruns into different directories stay byte-identical.

Exit status: 0 when every verdict passes, 1 when one fails, 2 for an
invalid config, 3 when a numerical routine gives up.  The environment
variable RECDEV_THREADS caps the simulation worker count.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .bandwidth import BandwidthSchedule, ScalingSequence
from .cgf import CgfSpec, convergence_diagnostic
from .densities import build_density
from .deviations import (
    DeviationExperiment,
    UnderpoweredExperimentError,
    chernoff_upper_curve,
    run_bias_study,
    run_pointwise,
    run_uniform,
)
from .estimator import batch_values
from .kernels import builtin_kernel
from .numerics import OverflowGuardError, QuadratureError, RootFindError
from .ratefn import PsiEvaluator

_KERNELS = ("gaussian", "epanechnikov", "quartic")
_BANDWIDTH_KINDS = ("power", "power_log")
_SCALING_KINDS = ("constant_one", "power")
_MODES = ("ldp", "mdp", "uniform_bounded", "uniform_unbounded")


@dataclass
class ExperimentConfig:
    """Flat bag of experiment parameters; one JSON document drives all runs.

    density_params collects every density_* key from the file with the
    prefix stripped (density_mean -> mean), so the document itself stays a
    single flat object.  out is where files land and is never echoed.
    """

    kernel: str = "gaussian"
    dimension: int = 1
    bandwidth_kind: str = "power"
    bandwidth_c: float = 1.0
    bandwidth_a: float = 0.3
    scaling_kind: str = "constant_one"
    scaling_b: float = 0.0
    alpha: list = field(default_factory=list)  # empty means all zeros
    density: str = "gaussian"
    density_params: dict = field(default_factory=dict)
    point: list = field(default_factory=lambda: [0.0])
    region: Optional[object] = None  # "lo:hi:step" or explicit point list
    delta: float = 0.2
    n_list: list = field(default_factory=lambda: [100, 1000, 10000])
    replications: int = 10000
    seed: int = 0
    xi: Optional[float] = None
    mode: Optional[str] = None  # inferred from scaling/region when absent
    u_values: list = field(default_factory=lambda: [1.0])
    t_grid: str = "0:3:0.1"
    q: int = 2
    m_q: Optional[float] = None
    out: str = "."

    def alpha_components(self) -> list:
        return list(self.alpha) if self.alpha else [0] * self.dimension

    def alpha_order(self) -> int:
        return int(sum(self.alpha_components()))

    def resolved_mode(self) -> str:
        if self.mode is not None:
            return self.mode
        if self.region is not None:
            return "uniform_unbounded" if self.xi is not None else "uniform_bounded"
        if self.scaling_kind == "constant_one" and self.alpha_order() == 0:
            return "ldp"
        return "mdp"


def config_from_dict(raw: dict) -> ExperimentConfig:
    """Build a config from a flat JSON object, rejecting unknown keys."""
    known = {f.name for f in dataclasses.fields(ExperimentConfig)} - {"density_params"}
    kwargs = {}
    params = {}
    for key, value in raw.items():
        if key == "density":
            kwargs[key] = value
        elif key.startswith("density_"):
            params[key[len("density_"):]] = value
        elif key in known:
            kwargs[key] = value
        else:
            raise ValueError(f"unknown config field '{key}'")
    return ExperimentConfig(density_params=params, **kwargs)


def load_config(path: str) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}")
    if not isinstance(raw, dict):
        raise ValueError(f"{path}: config must be a single JSON object")
    try:
        return config_from_dict(raw)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"{path}: {exc}")


def config_echo(cfg: ExperimentConfig) -> dict:
    """The flat document back again, minus output paths."""
    out = {}
    for f in dataclasses.fields(ExperimentConfig):
        if f.name in ("density_params", "out"):
            continue
        out[f.name] = getattr(cfg, f.name)
    for key, value in sorted(cfg.density_params.items()):
        out["density_" + key] = value
    return out


def parse_range(text: str) -> np.ndarray:
    """start:stop:step inclusive of the endpoint up to rounding."""
    parts = str(text).split(":")
    if len(parts) != 3:
        raise ValueError(f"range '{text}' must be start:stop:step")
    lo, hi, step = (float(p) for p in parts)
    if not (step > 0 and hi >= lo):
        raise ValueError(f"range '{text}' needs step > 0 and stop >= start")
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return lo + step * np.arange(count)


def region_points(cfg: ExperimentConfig) -> Optional[np.ndarray]:
    """Evaluation grid for U: a range string (per axis) or explicit points."""
    if cfg.region is None:
        return None
    if isinstance(cfg.region, str):
        axis = parse_range(cfg.region)
        if cfg.dimension == 1:
            return axis.reshape(-1, 1)
        mesh = np.meshgrid(*([axis] * cfg.dimension), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)
    pts = np.asarray(cfg.region, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1) if cfg.dimension == 1 else pts.reshape(1, -1)
    if pts.ndim != 2 or pts.shape[-1] != cfg.dimension:
        raise ValueError(f"region points must have {cfg.dimension} coordinates each")
    return pts


# ---------------------------------------------------------------------------
# Hypothesis validation.  Centralized so the messages can cite the tags; the
# numerical modules still enforce their own hard preconditions defensively.


def _structural(cfg: ExperimentConfig, sub: str, bad: list) -> None:
    if cfg.kernel not in _KERNELS:
        bad.append(f"kernel must be one of {', '.join(_KERNELS)}; got '{cfg.kernel}'")
    if not (isinstance(cfg.dimension, int) and cfg.dimension >= 1):
        bad.append(f"dimension must be a positive integer; got {cfg.dimension!r}")
        return
    if cfg.bandwidth_kind not in _BANDWIDTH_KINDS:
        bad.append(f"bandwidth_kind must be power or power_log; got '{cfg.bandwidth_kind}'")
    if not cfg.bandwidth_c > 0:
        bad.append(f"bandwidth_c must be positive; got {cfg.bandwidth_c}")
    if not 0 <= cfg.bandwidth_a < 1:
        bad.append(f"bandwidth_a must lie in [0, 1); got {cfg.bandwidth_a}")
    if cfg.scaling_kind not in _SCALING_KINDS:
        bad.append(f"scaling_kind must be constant_one or power; got '{cfg.scaling_kind}'")
    elif cfg.scaling_kind == "power" and not 0 < cfg.scaling_b < 0.5:
        bad.append(f"scaling_b must lie in (0, 1/2); got {cfg.scaling_b}")
    alpha = cfg.alpha_components()
    if len(alpha) != cfg.dimension or any(
        not (isinstance(k, int) and k >= 0) for k in alpha
    ):
        bad.append(f"alpha must hold {cfg.dimension} nonnegative integers; got {cfg.alpha}")
        alpha = [0] * cfg.dimension
    if cfg.kernel in _KERNELS:
        kernel = builtin_kernel(cfg.kernel, cfg.dimension)
        if sum(alpha) > kernel.max_derivative_order:
            bad.append(
                f"kernel '{cfg.kernel}' supports derivatives up to order "
                f"{kernel.max_derivative_order}; got |alpha| = {sum(alpha)}"
            )
    try:
        density = build_density(cfg.density, cfg.density_params)
        if density.dimension != cfg.dimension:
            bad.append(
                f"density has dimension {density.dimension}, config says {cfg.dimension}"
            )
    except (KeyError, TypeError, ValueError) as exc:
        bad.append(f"density: {exc}")
    pt = np.asarray(cfg.point, dtype=np.float64).reshape(-1)
    if pt.size != cfg.dimension:
        bad.append(f"point must have {cfg.dimension} coordinates; got {cfg.point}")
    if cfg.mode is not None and cfg.mode not in _MODES:
        bad.append(f"mode must be one of {', '.join(_MODES)}; got '{cfg.mode}'")
    if sub in ("simulate", "chernoff", "cgf", "estimate", "bias"):
        ns = list(cfg.n_list)
        if not ns or any(not (isinstance(n, int) and n >= 1) for n in ns) or any(
            b <= a for a, b in zip(ns, ns[1:])
        ):
            bad.append(f"n_list must be strictly increasing positive integers; got {cfg.n_list}")
    if sub in ("simulate", "chernoff"):
        if not cfg.delta > 0:
            bad.append(f"delta must be positive; got {cfg.delta}")
        if not (isinstance(cfg.replications, int) and cfg.replications >= 1):
            bad.append(f"replications must be a positive integer; got {cfg.replications}")
    if sub == "cgf" and not cfg.u_values:
        bad.append("u_values must be nonempty")
    if sub == "rate":
        try:
            parse_range(cfg.t_grid)
        except ValueError as exc:
            bad.append(str(exc))
    if sub == "bias":
        if not (isinstance(cfg.q, int) and cfg.q >= 2):
            bad.append(f"q must be an integer >= 2; got {cfg.q}")
        if cfg.m_q is not None and not cfg.m_q > 0:
            bad.append(f"m_q must be positive when given; got {cfg.m_q}")
    if cfg.xi is not None and not cfg.xi > 0:
        bad.append(f"xi must be positive when given; got {cfg.xi}")
    if cfg.region is not None:
        try:
            region_points(cfg)
        except ValueError as exc:
            bad.append(f"region: {exc}")


def validate(cfg: ExperimentConfig, subcommand: str = "simulate") -> list:
    """Pure check of the hypothesis constraints a subcommand relies on.

    Returns the list of violations, each naming its hypothesis tag; an
    empty list means the run may proceed.  Purely structural problems
    (unknown names, shape mismatches) are reported without a tag.
    """
    bad: list = []
    _structural(cfg, subcommand, bad)
    if bad:
        return bad

    a, b, q = cfg.bandwidth_a, cfg.scaling_b, cfg.q
    k = cfg.dimension + 2 * cfg.alpha_order()
    mode = cfg.resolved_mode()
    needs_theory = subcommand in ("rate", "cgf", "simulate", "chernoff")

    if needs_theory:
        if a <= 0:
            bad.append(f"(H3): a must be positive so the bandwidth shrinks; got a={a:g}")
        elif a * k >= 1:
            bad.append(f"(H3): a < 1/(d+2|alpha|)=1/{k}; got a={a:g}")
    if needs_theory and mode == "ldp" and cfg.bandwidth_kind != "power":
        bad.append("(H2): LDP density case requires h_n=cn^{-a}")
    if subcommand in ("cgf", "simulate", "chernoff") and cfg.scaling_kind == "power":
        bound = (1 - a * k) / 2
        if not b < bound:
            bad.append(f"(H6): b must be < (1-a(d+2|alpha|))/2 = {bound:g}; got b={b:g}")
        if not b < a * q:
            bad.append(f"(H7)ii): b must be < a*q = {a * q:g}; got b={b:g}")
    if subcommand == "simulate" and mode.startswith("uniform"):
        if cfg.region is None:
            bad.append("uniform mode needs a region grid")
        if mode == "uniform_unbounded" and cfg.xi is None:
            bad.append("(H8)i): unbounded mode needs the moment exponent xi")
        if cfg.scaling_kind == "power":
            bound = (1 - a * k) / 2
            if not b < bound:
                bad.append(
                    f"(H10): b must be < (1-a(d+2|alpha|))/2 = {bound:g} "
                    f"for the uniform case; got b={b:g}"
                )
    if subcommand == "bias" and q % 2 != 0:
        bad.append(f"(H7)i): builtin kernels have nonzero even moments below odd q; use even q, got q={q}")
    if needs_theory and cfg.mode is not None:
        regime = "ldp" if cfg.scaling_kind == "constant_one" and cfg.alpha_order() == 0 else "mdp"
        if mode in ("ldp", "mdp") and mode != regime:
            bad.append(
                f"mode '{mode}' conflicts with scaling_kind='{cfg.scaling_kind}' "
                f"and |alpha|={cfg.alpha_order()}"
            )
    return bad


# ---------------------------------------------------------------------------
# Object assembly and output helpers.


def _build_spec(cfg: ExperimentConfig) -> CgfSpec:
    return CgfSpec(
        kernel=builtin_kernel(cfg.kernel, cfg.dimension),
        schedule=BandwidthSchedule(kind=cfg.bandwidth_kind, c=cfg.bandwidth_c, a=cfg.bandwidth_a),
        scaling=ScalingSequence(kind=cfg.scaling_kind, b=cfg.scaling_b),
        density=build_density(cfg.density, cfg.density_params),
        point=cfg.point,
        alpha=cfg.alpha_components(),
    )


def _build_experiment(cfg: ExperimentConfig) -> DeviationExperiment:
    return DeviationExperiment(
        spec=_build_spec(cfg),
        delta=cfg.delta,
        n_list=tuple(int(n) for n in cfg.n_list),
        replications=int(cfg.replications),
        rng_seed=int(cfg.seed),
        region=region_points(cfg),
        xi=cfg.xi,
    )


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    x = float(value)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def _write_csv(path: str, header: list, rows: list) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    return obj


def _write_json(path: str, summary: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(_jsonable(summary), sort_keys=True, indent=2) + "\n")


def _deviation_rows(report) -> list:
    return [
        {
            "n": r.n,
            "speed": r.speed,
            "count": r.count,
            "p_hat": r.p_hat,
            "censored": bool(r.censored),
            "normalized_log": r.normalized_log,
        }
        for r in report.rows
    ]


def _verdict_dicts(report) -> list:
    return [{"name": v.name, "passed": bool(v.passed), "detail": v.detail} for v in report.verdicts]


# ---------------------------------------------------------------------------
# Subcommand bodies.  Each returns (csv_header, csv_rows, summary, verdicts).


def _cmd_estimate(cfg: ExperimentConfig):
    spec = _build_spec(cfg)
    grid = region_points(cfg)
    if grid is None:
        grid = spec.point.reshape(1, -1)
    n = int(cfg.n_list[-1])
    gen = np.random.Generator(np.random.Philox(key=np.array([cfg.seed, 0], dtype=np.uint64)))
    sample = spec.density.sample(gen, n)
    estimates = batch_values(spec.kernel, spec.schedule, sample, grid, alpha=spec.alpha.components)
    targets = spec.density.partial(spec.alpha.components, grid)
    header = [f"x{j}" for j in range(cfg.dimension)] + ["estimate", "target", "abs_error"]
    rows = [
        list(grid[i]) + [estimates[i], targets[i], abs(estimates[i] - targets[i])]
        for i in range(len(grid))
    ]
    summary = {
        "subcommand": "estimate",
        "n": n,
        "grid_size": len(grid),
        "sup_abs_error": float(np.max(np.abs(estimates - targets))),
    }
    return header, rows, summary, []


def _cmd_rate(cfg: ExperimentConfig):
    kernel = builtin_kernel(cfg.kernel, cfg.dimension)
    psi = PsiEvaluator(kernel, cfg.bandwidth_a)
    ts = parse_range(cfg.t_grid)
    values = [psi.legendre(float(t)) for t in ts]
    header = ["t", "rate"]
    rows = [[float(t), (rv.value if rv.finite else math.inf)] for t, rv in zip(ts, values)]
    summary = {
        "subcommand": "rate",
        "t_grid": cfg.t_grid,
        "rows": len(rows),
        "finite_entries": sum(1 for rv in values if rv.finite),
    }
    return header, rows, summary, []


def _cmd_cgf(cfg: ExperimentConfig):
    spec = _build_spec(cfg)
    conv = convergence_diagnostic(spec, cfg.u_values, cfg.n_list)
    header = ["n", "u", "finite_n", "limit", "abs_error"]
    rows = []
    for r, n in enumerate(conv.n_values):
        for c, u in enumerate(conv.u):
            rows.append(
                [int(n), float(u), conv.finite_n[r, c], conv.limit[c],
                 abs(conv.finite_n[r, c] - conv.limit[c])]
            )
    verdicts = [
        {
            "name": "abs_error_decreasing",
            "passed": bool(conv.gaps_decrease),
            "detail": "sup_u gaps " + " -> ".join(f"{g:.6g}" for g in conv.sup_gap),
        }
    ]
    summary = {
        "subcommand": "cgf",
        "regime": spec.regime,
        "per_n": [
            {"n": int(n), "sup_gap": float(g)} for n, g in zip(conv.n_values, conv.sup_gap)
        ],
        "verdicts": verdicts,
    }
    return header, rows, summary, verdicts


def _cmd_simulate(cfg: ExperimentConfig):
    exp = _build_experiment(cfg)
    mode = cfg.resolved_mode()
    if mode in ("ldp", "mdp"):
        report = run_pointwise(exp, mode)
    else:
        report = run_uniform(exp, bounded=(mode == "uniform_bounded"))
    header = ["n", "speed", "count", "p_hat", "censored", "normalized_log", "rate"]
    rate_val = report.rate.value if report.rate.finite else math.inf
    rows = [
        [r.n, r.speed, r.count, r.p_hat, r.censored, r.normalized_log, rate_val]
        for r in report.rows
    ]
    verdicts = _verdict_dicts(report)
    summary = {
        "subcommand": "simulate",
        "kind": report.kind,
        "delta": report.delta,
        "replications": report.replications,
        "rate": rate_val,
        "sandwich": list(report.sandwich) if report.sandwich is not None else None,
        "per_n": _deviation_rows(report),
        "verdicts": verdicts,
        "policy": {"final_gap_fraction": 0.3, "sandwich_slack_fraction": 0.3},
        "notes": list(report.notes),
    }
    return header, rows, summary, verdicts


def _cmd_bias(cfg: ExperimentConfig):
    exp = _build_experiment(cfg)
    report = run_bias_study(exp, q=cfg.q, m_q=cfg.m_q)
    with_sup = exp.region is not None
    header = ["n", "normalizer", "bias", "ratio"] + (["sup_normalized"] if with_sup else [])
    rows = []
    for r in report.bias_rows:
        row = [r.n, r.normalizer, r.bias, r.ratio]
        if with_sup:
            row.append(r.sup_normalized)
        rows.append(row)
    verdicts = _verdict_dicts(report)
    summary = {
        "subcommand": "bias",
        "q": cfg.q,
        "bound": report.bias_bound,
        "per_n": [
            {
                "n": r.n,
                "normalizer": r.normalizer,
                "bias": r.bias,
                "ratio": r.ratio,
                "sup_normalized": r.sup_normalized,
            }
            for r in report.bias_rows
        ],
        "verdicts": verdicts,
        "policy": {"ratio_change_tolerance": 0.10},
    }
    return header, rows, summary, verdicts


def _cmd_chernoff(cfg: ExperimentConfig):
    exp = _build_experiment(cfg)
    report = chernoff_upper_curve(exp)
    header = ["n", "speed", "count", "p_hat", "censored", "normalized_log", "chernoff_bound"]
    rows = [
        [r.n, r.speed, r.count, r.p_hat, r.censored, r.normalized_log, r.chernoff_bound]
        for r in report.rows
    ]
    verdicts = _verdict_dicts(report)
    per_n = _deviation_rows(report)
    for entry, r in zip(per_n, report.rows):
        entry["chernoff_bound"] = r.chernoff_bound
    summary = {
        "subcommand": "chernoff",
        "delta": report.delta,
        "replications": report.replications,
        "per_n": per_n,
        "verdicts": verdicts,
        "policy": {"monte_carlo_sigmas": 3},
        "notes": list(report.notes),
    }
    return header, rows, summary, verdicts


_COMMANDS = {
    "estimate": _cmd_estimate,
    "rate": _cmd_rate,
    "cgf": _cmd_cgf,
    "simulate": _cmd_simulate,
    "bias": _cmd_bias,
    "chernoff": _cmd_chernoff,
}


def run(cfg: ExperimentConfig, subcommand: str, overrides: Optional[dict] = None) -> int:
    """Validate, dispatch, write <out>/<subcommand>.{csv,json}, return exit code."""
    violations = validate(cfg, subcommand)
    if violations:
        for v in violations:
            print(f"config error: {v}", file=sys.stderr)
        return 2
    header, rows, summary, verdicts = _COMMANDS[subcommand](cfg)
    summary["config"] = config_echo(cfg)
    summary["overrides"] = dict(overrides or {})
    os.makedirs(cfg.out, exist_ok=True)
    csv_path = os.path.join(cfg.out, f"{subcommand}.csv")
    json_path = os.path.join(cfg.out, f"{subcommand}.json")
    _write_csv(csv_path, header, rows)
    _write_json(json_path, summary)
    for v in verdicts:
        status = "PASS" if v["passed"] else "FAIL"
        print(f"verdict {v['name']}: {status} ({v['detail']})")
    print(f"wrote {csv_path}")
    print(f"wrote {json_path}")
    return 0 if all(v["passed"] for v in verdicts) else 1


# ---------------------------------------------------------------------------
# Argument parsing.  Every subcommand takes --config/--seed/--out plus the
# numeric overrides that make sense for it; overrides echo into the JSON.


def _parse_int_list(text: str) -> list:
    return [int(p) for p in str(text).split(",") if p != ""]


def _parse_float_list(text: str) -> list:
    return [float(p) for p in str(text).split(",") if p != ""]


_OVERRIDE_FLAGS = {
    # flag, config field, parser, help
    "c": ("bandwidth_c", float, "bandwidth scale c"),
    "a": ("bandwidth_a", float, "bandwidth exponent a"),
    "b": ("scaling_b", float, "scaling exponent b (power scaling)"),
    "delta": ("delta", float, "deviation threshold"),
    "replications": ("replications", int, "Monte Carlo replications"),
    "n": ("n_list", _parse_int_list, "comma separated sample sizes"),
    "u": ("u_values", _parse_float_list, "comma separated u values"),
    "t-grid": ("t_grid", str, "t grid as start:stop:step"),
    "point": ("point", _parse_float_list, "evaluation point coordinates"),
    "region": ("region", str, "region grid as start:stop:step"),
    "mode": ("mode", str, "ldp | mdp | uniform_bounded | uniform_unbounded"),
    "xi": ("xi", float, "moment exponent for unbounded regions"),
    "q": ("q", int, "bias order"),
    "m-q": ("m_q", float, "derivative sup bound M_q"),
}

_SUB_FLAGS = {
    "estimate": ("c", "a", "n", "point", "region"),
    "rate": ("a", "t-grid"),
    "cgf": ("c", "a", "b", "n", "u"),
    "simulate": ("c", "a", "b", "delta", "replications", "n", "point", "region", "mode", "xi"),
    "bias": ("c", "a", "n", "point", "region", "q", "m-q"),
    "chernoff": ("c", "a", "b", "delta", "replications", "n", "point"),
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="recdev",
        description="recursive kernel density estimation and its deviation rates",
    )
    subparsers = parser.add_subparsers(dest="subcommand", required=True)
    for name, flags in _SUB_FLAGS.items():
        sub = subparsers.add_parser(name, help=f"{name} subcommand")
        sub.add_argument("--config", help="flat JSON config file")
        sub.add_argument("--seed", type=int, help="RNG seed override")
        sub.add_argument("--out", help="output directory (default from config)")
        for flag in flags:
            fieldname, caster, helptext = _OVERRIDE_FLAGS[flag]
            sub.add_argument(f"--{flag}", dest=f"ov_{fieldname}", type=caster,
                             default=None, help=helptext)
    return parser


def _merge_dash_values(argv: list) -> list:
    """Let values like -1:3:0.1 or -0.5 follow their flag unquoted."""
    out = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        if tok.startswith("--") and "=" not in tok and i + 1 < len(argv):
            nxt = argv[i + 1]
            if nxt.startswith("-") and len(nxt) > 1 and (nxt[1].isdigit() or nxt[1] == "."):
                out.append(f"{tok}={nxt}")
                i += 2
                continue
        out.append(tok)
        i += 1
    return out


def main(argv=None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    args = _build_parser().parse_args(_merge_dash_values(list(argv)))
    try:
        cfg = load_config(args.config) if args.config else ExperimentConfig()
    except (OSError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    overrides = {}
    for key, value in vars(args).items():
        if key.startswith("ov_") and value is not None:
            setattr(cfg, key[3:], value)
            overrides[key[3:]] = value
    if args.seed is not None:
        cfg.seed = args.seed
        overrides["seed"] = args.seed
    if args.out is not None:
        cfg.out = args.out
    try:
        return run(cfg, args.subcommand, overrides)
    except (QuadratureError, RootFindError, OverflowGuardError,
            UnderpoweredExperimentError, ValueError) as exc:
        module = type(exc).__module__.rsplit(".", 1)[-1]
        print(f"{args.subcommand}: {module}.{type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
