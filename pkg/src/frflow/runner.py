"""Experiment orchestration: JSON configs in, CSV/JSON artifacts out.

Per-experiment output directory:
  trace.csv             fixed 11-column header, empty cells where a value
                        does not apply
  trace_aux.csv         t,ratio_min_mstar,ratio_max_mstar (lets `check`
                        re-run trajectory-ratio diagnostics from disk)
  mstar.csv             node,x,density
  certificate.json      per-check {check_name, pass, worst_slack,
                        constants_used} plus the rate report and notes
  config_resolved.json  full echo of the effective config plus a "derived"
                        block of measured constants

Exit codes: 0 all requested checks pass, 1 check failure, 2 config parse or
validation error, 3 runtime flow error.  All floats are written with repr,
i.e. shortest round-trip double precision.
"""

from __future__ import annotations

import copy
import itertools
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import diagnostics
from ._backend import BACKEND_NAME
from .compare_flows import (
    dissipation_split,
    run_comparison_flow,
    wasserstein_cfl_limit,
)
from .errors import ConfigError, FrflowError
from .flow import (
    TRACE_COLUMNS,
    FlowConfig,
    FlowState,
    FlowTrace,
    TraceRecord,
    picard_solve,
    run_flow,
)
from .functionals import RegularizedEnergy, eval_V, flat_derivative_defcheck
from .grid_measure import (
    Grid,
    GridMeasure,
    build_grid,
    density_ratio_bounds,
    dragomir_check,
    measure_from_density,
)
from .minimizer import MinimizerResult, optimality_check, solve_mstar
from .presets import (
    battery_rng,
    build_functional,
    build_m0,
    build_reference,
    random_warm_start,
    resolve_preset,
)

__all__ = [
    "ExperimentConfig",
    "Experiment",
    "CheckResult",
    "CHECK_NAMES",
    "load_config_file",
    "build_experiment",
    "execute_run",
    "write_artifacts",
    "run_from_dict",
    "run_sweep",
    "run_compare",
    "run_mstar",
    "run_picard",
    "run_check",
    "resolve_output_dir",
]

_FLOW_KEYS = {"integrator", "dt", "t_end", "record_every"}
_PICARD_KEYS = {"T", "n_time", "iters"}
_TOP_KEYS = {"preset", "grid", "reference_potential", "functional", "sigma",
             "m0_spec", "flow", "picard", "checks", "seed", "output_dir",
             "derived"}

N_GROWTH_SAMPLES = 20
N_DRAGOMIR_PAIRS = 50
N_DEFCHECK_PAIRS = 10
DEFCHECK_N_LAMBDA = 128


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    """Validated, fully resolved experiment parameters."""

    preset: str | None
    grid: dict
    reference_potential: str
    functional: str
    sigma: float
    m0_spec: dict
    flow: dict
    picard: dict
    checks: tuple[str, ...]
    seed: int
    output_dir: str

    @staticmethod
    def from_dict(raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(raw) - _TOP_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        merged = resolve_preset(raw)
        merged.pop("derived", None)

        def need(key):
            if key not in merged:
                raise ConfigError(f"missing config key {key!r}")
            return merged[key]

        grid = dict(need("grid"))
        for gk in ("x_min", "x_max", "n"):
            if gk not in grid:
                raise ConfigError(f"grid block needs {gk!r}")
        sigma = float(need("sigma"))
        if sigma <= 0.0:
            raise ConfigError(f"sigma must be positive, got {sigma}")

        flow = dict(merged.get("flow", {}))
        bad = set(flow) - _FLOW_KEYS
        if bad:
            raise ConfigError(f"unknown flow keys {sorted(bad)}")
        flow.setdefault("integrator", "exponential")
        # default step scales with the linear decay rate sigma^2/2
        flow.setdefault("dt", 1e-3 * 2.0 / sigma**2)
        flow.setdefault("t_end", 4.0)
        flow.setdefault("record_every", 10)
        if flow["integrator"] not in ("exponential", "euler"):
            raise ConfigError(f"unknown integrator {flow['integrator']!r}")
        flow["dt"] = float(flow["dt"])
        flow["t_end"] = float(flow["t_end"])
        flow["record_every"] = int(flow["record_every"])
        if not 0.0 < flow["dt"] <= flow["t_end"]:
            raise ConfigError(f"need 0 < dt <= t_end, got {flow['dt']} "
                              f"and {flow['t_end']}")
        if flow["record_every"] < 1:
            raise ConfigError("record_every must be >= 1")

        picard = dict(merged.get("picard", {}))
        bad = set(picard) - _PICARD_KEYS
        if bad:
            raise ConfigError(f"unknown picard keys {sorted(bad)}")
        picard.setdefault("T", 1.0)
        picard.setdefault("n_time", 64)
        picard.setdefault("iters", 8)
        picard["T"] = float(picard["T"])
        picard["n_time"] = int(picard["n_time"])
        picard["iters"] = int(picard["iters"])

        checks = tuple(merged.get("checks", []))
        bad = set(checks) - set(CHECK_NAMES)
        if bad:
            raise ConfigError(f"unknown checks {sorted(bad)}; "
                              f"known: {sorted(CHECK_NAMES)}")

        m0_spec = dict(need("m0_spec"))
        if "kind" not in m0_spec:
            raise ConfigError("m0_spec needs a 'kind' entry")

        out_dir = merged.get("output_dir")
        if out_dir is None:
            out_dir = os.path.join("out", merged.get("preset") or "experiment")

        try:
            return ExperimentConfig(
                preset=merged.get("preset"),
                grid={"x_min": float(grid["x_min"]),
                      "x_max": float(grid["x_max"]), "n": int(grid["n"])},
                reference_potential=str(need("reference_potential")),
                functional=str(need("functional")),
                sigma=sigma,
                m0_spec=m0_spec,
                flow=flow,
                picard=picard,
                checks=checks,
                seed=int(merged.get("seed", 2024)),
                output_dir=str(out_dir),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad config value: {exc}") from None

    def to_dict(self) -> dict:
        return {
            "preset": self.preset,
            "grid": dict(self.grid),
            "reference_potential": self.reference_potential,
            "functional": self.functional,
            "sigma": self.sigma,
            "m0_spec": dict(self.m0_spec),
            "flow": dict(self.flow),
            "picard": dict(self.picard),
            "checks": list(self.checks),
            "seed": self.seed,
            "output_dir": self.output_dir,
        }


def load_config_file(path: str | Path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None


@dataclass(eq=False)
class Experiment:
    """Built objects for one config: grid, reference, energy, warm start."""

    config: ExperimentConfig
    grid: Grid
    pi: object  # ReferenceMeasure
    V: RegularizedEnergy
    m0: GridMeasure


def build_experiment(config: ExperimentConfig) -> Experiment:
    g = config.grid
    try:
        grid = build_grid(g["x_min"], g["x_max"], g["n"])
    except FrflowError as exc:
        raise ConfigError(f"bad grid block: {exc}") from None
    pi = build_reference(grid, config.reference_potential)
    F = build_functional(grid, config.functional)
    V = RegularizedEnergy(F=F, pi=pi, sigma=config.sigma)
    m0 = build_m0(grid, pi.measure, config.m0_spec, config.seed)
    return Experiment(config=config, grid=grid, pi=pi, V=V, m0=m0)


# ---------------------------------------------------------------------------
# check registry


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    worst_slack: float
    constants: dict

    def to_entry(self) -> dict:
        return {
            "check_name": self.name,
            "pass": bool(self.passed),
            "worst_slack": self.worst_slack,
            "constants_used": dict(self.constants),
        }


def _growth_samples(exp: Experiment) -> list[GridMeasure]:
    return [random_warm_start(exp.grid, exp.pi.measure,
                              battery_rng(exp.config.seed, "growth", i))
            for i in range(N_GROWTH_SAMPLES)]


def _check_dissipation(exp, trace, m_star, mres) -> CheckResult:
    err = diagnostics.dissipation_check(exp.V, trace)
    tol = 1e-2
    return CheckResult("dissipation", err <= tol, tol - err,
                       {"max_rel_err": err, "tolerance": tol,
                        "n_records": trace.n_records})


def _check_pli(exp, trace, m_star, mres) -> CheckResult:
    rep = diagnostics.pli_check(exp.V, trace, m_star)
    return CheckResult("pli", rep.passed, rep.worst_slack,
                       {"constant": rep.constant, "r1_bar": rep.r1_bar,
                        "R1_bar": rep.R1_bar, "tolerance": 1e-8})


def _check_quadratic_growth(exp, trace, m_star, mres) -> CheckResult:
    worst = diagnostics.quadratic_growth_check(exp.V, m_star,
                                               _growth_samples(exp))
    return CheckResult("quadratic_growth", worst >= -1e-8, worst,
                       {"n_samples": N_GROWTH_SAMPLES,
                        "lam": 0.5 * exp.V.sigma**2, "tolerance": 1e-8})


def _check_kl_bound(exp, trace, m_star, mres) -> CheckResult:
    r, big_r = density_ratio_bounds(exp.m0, exp.pi.measure)
    c = exp.V.F.bound_C
    violation = diagnostics.kl_bound_check(trace, big_r, c, exp.V.sigma)
    bound = 2.0 * math.log(big_r) + 4.0 * c / exp.V.sigma**2
    return CheckResult("kl_bound", violation <= 1e-8, -violation,
                       {"R": big_r, "C": c, "bound": bound,
                        "tolerance": 1e-8})


def _check_rate(exp, trace, m_star, mres) -> CheckResult:
    bounds = diagnostics.measure_ratio_bounds(trace, exp.m0, exp.pi.measure,
                                              m_star)
    rep = diagnostics.rate_fit(trace, bounds, exp.V.sigma)
    if rep.immediate_convergence:
        slack = math.inf
    elif math.isfinite(rep.kappa_fit):
        slack = rep.kappa_fit - rep.kappa_theory
    else:
        slack = -math.inf
    return CheckResult("rate", rep.passed(), slack,
                       {"kappa_theory": rep.kappa_theory,
                        "kappa_fit": rep.kappa_fit,
                        "window": list(rep.window),
                        "envelope_holds": rep.envelope_holds,
                        "immediate_convergence": rep.immediate_convergence,
                        "r_bar": bounds.r_bar, "R_bar": bounds.R_bar})


def _check_ratio_envelope(exp, trace, m_star, mres) -> CheckResult:
    r, big_r = density_ratio_bounds(exp.m0, exp.pi.measure)
    rep = diagnostics.ratio_envelope_check(trace, r, big_r, exp.V.F.bound_C,
                                           exp.V.sigma)
    worst = -max(rep.max_upper_violation, rep.max_lower_violation)
    return CheckResult("ratio_envelope", rep.passed, worst,
                       {"R1": rep.R1, "r1": rep.r1, "C_V": rep.C_V,
                        "r": r, "R": big_r, "tolerance": 1e-8})


def _check_dragomir(exp, trace, m_star, mres) -> CheckResult:
    worst = math.inf
    all_ok = True
    for i in range(N_DRAGOMIR_PAIRS):
        rng = battery_rng(exp.config.seed, "dragomir", i)
        m = random_warm_start(exp.grid, exp.pi.measure, rng)
        m_prime = random_warm_start(exp.grid, exp.pi.measure, rng)
        rep = dragomir_check(m, m_prime)
        worst = min(worst, rep.slack)
        all_ok = all_ok and rep.all_hold()
    return CheckResult("dragomir", all_ok, worst,
                       {"n_pairs": N_DRAGOMIR_PAIRS, "tolerance": 1e-10})


def _check_flat_derivative(exp, trace, m_star, mres) -> CheckResult:
    worst = 0.0
    for i in range(N_DEFCHECK_PAIRS):
        rng = battery_rng(exp.config.seed, "defcheck", i)
        m = random_warm_start(exp.grid, exp.pi.measure, rng)
        m_prime = random_warm_start(exp.grid, exp.pi.measure, rng)
        worst = max(worst, flat_derivative_defcheck(exp.V.F, m, m_prime,
                                                    DEFCHECK_N_LAMBDA))
    tol = 1e-6
    return CheckResult("flat_derivative", worst <= tol, tol - worst,
                       {"max_residual": worst, "n_lambda": DEFCHECK_N_LAMBDA,
                        "n_pairs": N_DEFCHECK_PAIRS, "tolerance": tol})


_CHECKS = {
    "dissipation": _check_dissipation,
    "pli": _check_pli,
    "quadratic_growth": _check_quadratic_growth,
    "kl_bound": _check_kl_bound,
    "rate": _check_rate,
    "ratio_envelope": _check_ratio_envelope,
    "dragomir": _check_dragomir,
    "flat_derivative": _check_flat_derivative,
}
CHECK_NAMES = tuple(_CHECKS)


def _minimizer_entry(mres: MinimizerResult) -> CheckResult:
    tol = 1e-8
    return CheckResult("minimizer", mres.converged and mres.residual <= tol,
                       tol - mres.residual,
                       {"residual": mres.residual,
                        "iterations": mres.iterations, "tolerance": tol})


# ---------------------------------------------------------------------------
# artifact writing


def resolve_output_dir(config_output_dir: str) -> Path:
    p = Path(config_output_dir)
    root = os.environ.get("FRFLOW_OUTPUT_ROOT")
    if root and not p.is_absolute():
        p = Path(root) / p
    return p


def _fmt(value: float) -> str:
    v = float(value)
    return "" if math.isnan(v) else repr(v)


def _atomic_write_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _json_ready(obj):
    if isinstance(obj, dict):
        return {str(k): _json_ready(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_ready(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def write_json(path: Path, obj) -> None:
    text = json.dumps(_json_ready(obj), sort_keys=True, indent=2)
    _atomic_write_text(path, text + "\n")


def write_trace_csv(path: Path, trace: FlowTrace) -> None:
    lines = [",".join(TRACE_COLUMNS)]
    for rec in trace.records:
        lines.append(",".join(_fmt(getattr(rec, col))
                              for col in TRACE_COLUMNS))
    _atomic_write_text(path, "\n".join(lines) + "\n")


def write_trace_aux_csv(path: Path, trace: FlowTrace) -> None:
    lines = ["t,ratio_min_mstar,ratio_max_mstar"]
    for rec in trace.records:
        lines.append(f"{_fmt(rec.t)},{_fmt(rec.ratio_min_mstar)},"
                     f"{_fmt(rec.ratio_max_mstar)}")
    _atomic_write_text(path, "\n".join(lines) + "\n")


def write_mstar_csv(path: Path, m_star: GridMeasure) -> None:
    lines = ["node,x,density"]
    for i, (x, d) in enumerate(zip(m_star.grid.x, m_star.density)):
        lines.append(f"{i},{_fmt(x)},{_fmt(d)}")
    _atomic_write_text(path, "\n".join(lines) + "\n")


def _read_csv_columns(path: Path) -> dict[str, np.ndarray]:
    lines = path.read_text().splitlines()
    if not lines:
        raise ConfigError(f"{path} is empty")
    header = lines[0].split(",")
    rows = [line.split(",") for line in lines[1:] if line]
    cols = {}
    for j, name in enumerate(header):
        cols[name] = np.array([float(r[j]) if r[j] else math.nan
                               for r in rows])
    return cols


# ---------------------------------------------------------------------------
# run / check / sweep / compare drivers


@dataclass(eq=False)
class RunResult:
    config: ExperimentConfig
    exp: Experiment
    mres: MinimizerResult
    trace: FlowTrace
    checks: list[CheckResult]

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)


def execute_run(config: ExperimentConfig) -> RunResult:
    exp = build_experiment(config)
    mres = solve_mstar(exp.V)
    fc = FlowConfig(V=exp.V, m0=exp.m0, dt=config.flow["dt"],
                    t_end=config.flow["t_end"],
                    integrator=config.flow["integrator"],
                    record_every=config.flow["record_every"])
    trace = run_flow(fc, m_star=mres.m_star)
    checks = [_minimizer_entry(mres)]
    for name in config.checks:
        checks.append(_CHECKS[name](exp, trace, mres.m_star, mres))
    return RunResult(config=config, exp=exp, mres=mres, trace=trace,
                     checks=checks)


def _derived_block(result: RunResult) -> dict:
    exp, mres = result.exp, result.mres
    r, big_r = density_ratio_bounds(exp.m0, exp.pi.measure)
    r_bar, big_r_bar = density_ratio_bounds(exp.m0, mres.m_star)
    return {
        "backend": BACKEND_NAME,
        "bound_C": exp.V.F.bound_C,
        "bound_C2": exp.V.F.bound_C2,
        "observed_derivative_max": exp.V.F.observed_derivative_max,
        "r": r, "R": big_r, "r_bar": r_bar, "R_bar": big_r_bar,
        "kappa_theory": exp.V.sigma**2 * r_bar / (4.0 * big_r_bar),
        "mstar_residual": mres.residual,
        "mstar_iterations": mres.iterations,
        "n_records": result.trace.n_records,
    }


def _certificate(checks: list[CheckResult], notes: list[str]) -> dict:
    cert = {
        "checks": [c.to_entry() for c in checks],
        "all_pass": all(c.passed for c in checks),
        "notes": list(notes),
    }
    rate = next((c for c in checks if c.name == "rate"), None)
    if rate is not None:
        cert["rate_report"] = dict(rate.constants)
    return cert


_TRACE_NOTES = [
    "trajectory ratio extrema certify recorded times only, not all t >= 0",
    "functional bounds are certified over grid measures only",
]


def write_artifacts(result: RunResult, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    write_trace_csv(out_dir / "trace.csv", result.trace)
    write_trace_aux_csv(out_dir / "trace_aux.csv", result.trace)
    write_mstar_csv(out_dir / "mstar.csv", result.mres.m_star)
    notes = [f"backend={BACKEND_NAME}",
             f"flow_kind={result.trace.flow_kind}"] + _TRACE_NOTES
    write_json(out_dir / "certificate.json",
               _certificate(result.checks, notes))
    resolved = result.config.to_dict()
    resolved["derived"] = _derived_block(result)
    write_json(out_dir / "config_resolved.json", resolved)


def _report_checks(checks: list[CheckResult], out) -> None:
    for c in checks:
        status = "PASS" if c.passed else "FAIL"
        print(f"[{status}] {c.name}: worst_slack={c.worst_slack:.6e}",
              file=out)


def run_from_dict(raw: dict, out=sys.stdout, err=sys.stderr) -> int:
    try:
        config = ExperimentConfig.from_dict(raw)
    except ConfigError as exc:
        print(f"config error: {exc}", file=err)
        return 2
    try:
        result = execute_run(config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=err)
        return 2
    except FrflowError as exc:
        print(f"flow error: {type(exc).__name__}: {exc}", file=err)
        return 3
    write_artifacts(result, resolve_output_dir(config.output_dir))
    _report_checks(result.checks, out)
    return 0 if result.all_passed else 1


# ---------------------------------------------------------------------------
# sweep


def parse_grid_spec(spec: str) -> list[tuple[str, list]]:
    """Parse "sigma=0.5,1,2;flow.dt=1e-3,5e-4" into (path, values) pairs."""
    dims = []
    for part in spec.split(";"):
        part = part.strip()
        if not part:
            continue
        path, sep, values = part.partition("=")
        if not sep or not path.strip():
            raise ConfigError(f"bad sweep dimension {part!r}; "
                              "expected path=v1,v2,...")
        parsed = []
        for tok in values.split(","):
            tok = tok.strip()
            if not tok:
                continue
            try:
                parsed.append(json.loads(tok))
            except json.JSONDecodeError:
                parsed.append(tok)
        dims.append((path.strip(), parsed))
    return dims


def _apply_override(raw: dict, path: str, value) -> None:
    keys = path.split(".")
    node = raw
    for key in keys[:-1]:
        node = node.setdefault(key, {})
        if not isinstance(node, dict):
            raise ConfigError(f"cannot descend into {path!r}")
    node[keys[-1]] = value


def run_sweep(raw_base: dict, grid_spec: str,
              out=sys.stdout, err=sys.stderr) -> int:
    try:
        dims = parse_grid_spec(grid_spec)
        base_config = ExperimentConfig.from_dict(raw_base)
    except ConfigError as exc:
        print(f"config error: {exc}", file=err)
        return 2
    base_dir = resolve_output_dir(base_config.output_dir)
    check_names = ["minimizer"] + list(base_config.checks)
    header = (["point"] + [p for p, _ in dims]
              + ["status", "all_pass", "kappa_theory", "kappa_fit"]
              + [f"slack_{name}" for name in check_names])
    rows = []
    points = list(itertools.product(*[vals for _, vals in dims])) if dims else []
    for idx, combo in enumerate(points):
        raw = copy.deepcopy(raw_base)
        for (path, _), value in zip(dims, combo):
            _apply_override(raw, path, value)
        _apply_override(raw, "output_dir",
                        str(Path(base_config.output_dir) / f"point_{idx:03d}"))
        row = [str(idx)] + [repr(v) if isinstance(v, float) else str(v)
                            for v in combo]
        try:
            config = ExperimentConfig.from_dict(raw)
            result = execute_run(config)
            write_artifacts(result, resolve_output_dir(config.output_dir))
        except ConfigError as exc:
            print(f"point {idx}: config error: {exc}", file=err)
            rows.append(row + ["config_error", "False", "", ""]
                        + [""] * len(check_names))
            continue
        except FrflowError as exc:
            print(f"point {idx}: flow error: {type(exc).__name__}: {exc}",
                  file=err)
            rows.append(row + ["flow_error", "False", "", ""]
                        + [""] * len(check_names))
            continue
        derived = _derived_block(result)
        rate = next((c for c in result.checks if c.name == "rate"), None)
        kappa_fit = rate.constants["kappa_fit"] if rate else math.nan
        slack = {c.name: c.worst_slack for c in result.checks}
        rows.append(row + ["ok" if result.all_passed else "check_failed",
                           str(result.all_passed),
                           _fmt(derived["kappa_theory"]), _fmt(kappa_fit)]
                    + [_fmt(slack.get(name, math.nan))
                       for name in check_names])
        print(f"point {idx}: "
              f"{'ok' if result.all_passed else 'check_failed'}", file=out)
    base_dir.mkdir(parents=True, exist_ok=True)
    text = "\n".join([",".join(header)] + [",".join(r) for r in rows])
    _atomic_write_text(base_dir / "sweep_summary.csv", text + "\n")
    print(f"sweep: {len(rows)} points -> {base_dir / 'sweep_summary.csv'}",
          file=out)
    return 0


# ---------------------------------------------------------------------------
# compare


_COMPARE_ORDER = ("birth_death", "wasserstein", "wfr")


def run_compare(raw: dict, flows: list[str],
                out=sys.stdout, err=sys.stderr) -> int:
    try:
        config = ExperimentConfig.from_dict(raw)
        bad = set(flows) - set(_COMPARE_ORDER)
        if bad or not 2 <= len(set(flows)) <= 3:
            raise ConfigError(f"compare needs two or three of "
                              f"{_COMPARE_ORDER}, got {flows}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=err)
        return 2
    flows = [f for f in _COMPARE_ORDER if f in flows]
    try:
        exp = build_experiment(config)
        mres = solve_mstar(exp.V)
        dt = config.flow["dt"]
        t_end = config.flow["t_end"]
        record_every = config.flow["record_every"]
        delta = dt * record_every
        traces: dict[str, FlowTrace] = {}
        for flow in flows:
            if flow == "birth_death":
                fc = FlowConfig(V=exp.V, m0=exp.m0, dt=dt, t_end=t_end,
                                integrator=config.flow["integrator"],
                                record_every=record_every)
                traces[flow] = run_flow(fc, m_star=mres.m_star)
            else:
                state0 = FlowState.create(exp.V, exp.m0, 0.0)
                limit = wasserstein_cfl_limit(exp.V, state0)
                n_sub = max(1, int(math.ceil(delta / (0.8 * limit))))
                traces[flow] = run_comparison_flow(
                    exp.V, exp.m0, flow, delta / n_sub, t_end,
                    record_every=n_sub, m_star=mres.m_star)
        n_rec = {f: tr.n_records for f, tr in traces.items()}
        if len(set(n_rec.values())) != 1:
            raise FrflowError(f"record counts differ across flows: {n_rec}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=err)
        return 2
    except FrflowError as exc:
        print(f"flow error: {type(exc).__name__}: {exc}", file=err)
        return 3

    t = traces[flows[0]].column("t")
    gaps = {f: traces[f].column("gap") for f in flows}
    out_dir = resolve_output_dir(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = ["t," + ",".join(f"gap_{f}" for f in flows)]
    for i in range(t.size):
        lines.append(",".join([_fmt(t[i])] + [_fmt(gaps[f][i])
                                              for f in flows]))
    _atomic_write_text(out_dir / "compare.csv", "\n".join(lines) + "\n")

    checks: list[CheckResult] = []
    for f in flows:
        g = gaps[f]
        worst_rise = float(np.max(np.diff(g))) if g.size > 1 else 0.0
        # informational for the transport flows: their spatial discretization
        # has its own steady state, so we gate only the birth-death flow
        gate = f == "birth_death"
        ok = worst_rise <= 1e-10 if gate else True
        checks.append(CheckResult(f"monotone_gap_{f}", ok, -worst_rise,
                                  {"gated": gate, "tolerance": 1e-10}))
    if "wfr" in gaps and "birth_death" in gaps:
        worst = float(np.max(gaps["wfr"] - gaps["birth_death"]))
        checks.append(CheckResult("wfr_dominance", worst <= 1e-8, -worst,
                                  {"tolerance": 1e-8}))
    notes = [f"backend={BACKEND_NAME}", f"flows={','.join(flows)}"]
    write_json(out_dir / "compare_certificate.json",
               _certificate(checks, notes))
    _report_checks(checks, out)
    return 0 if all(c.passed for c in checks) else 1


# ---------------------------------------------------------------------------
# mstar / picard / check


def run_mstar(raw: dict, out=sys.stdout, err=sys.stderr) -> int:
    try:
        config = ExperimentConfig.from_dict(raw)
        exp = build_experiment(config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=err)
        return 2
    try:
        mres = solve_mstar(exp.V)
        report = optimality_check(exp.V, mres, _growth_samples(exp))
    except FrflowError as exc:
        print(f"flow error: {type(exc).__name__}: {exc}", file=err)
        return 3
    out_dir = resolve_output_dir(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_mstar_csv(out_dir / "mstar.csv", mres.m_star)
    write_json(out_dir / "mstar_report.json", {
        "residual": mres.residual,
        "iterations": mres.iterations,
        "converged": mres.converged,
        "drift_std": report.drift_std,
        "drift_threshold": report.drift_threshold,
        "growth_min_slack": report.growth_min_slack,
        "pass": mres.converged and report.passed(),
    })
    status = "PASS" if mres.converged and report.passed() else "FAIL"
    print(f"[{status}] mstar: residual={mres.residual:.6e} "
          f"iterations={mres.iterations} drift_std={report.drift_std:.6e}",
          file=out)
    return 0 if mres.converged and report.passed() else 1


def run_picard(raw: dict, iters: int | None,
               out=sys.stdout, err=sys.stderr) -> int:
    try:
        config = ExperimentConfig.from_dict(raw)
        exp = build_experiment(config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=err)
        return 2
    n_iters = iters if iters is not None else config.picard["iters"]
    try:
        res = picard_solve(exp.V, exp.m0, config.picard["T"],
                           config.picard["n_time"], n_iters)
    except (FrflowError, ValueError) as exc:
        print(f"flow error: {type(exc).__name__}: {exc}", file=err)
        return 3
    out_dir = resolve_output_dir(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = ["iterate,tv_T,contraction_ratio"]
    for i, d in enumerate(res.tv_T_distances, start=1):
        ratio = res.contraction_ratios[i - 2] if i >= 2 else math.nan
        lines.append(f"{i},{_fmt(d)},{_fmt(ratio)}")
    _atomic_write_text(out_dir / "picard.csv", "\n".join(lines) + "\n")
    converged = res.tv_T_distances[-1] <= 1e-10
    ok = converged or res.tail_decreasing()
    write_json(out_dir / "picard_report.json", {
        "T": config.picard["T"], "n_time": config.picard["n_time"],
        "iters": n_iters, "tv_T_distances": list(res.tv_T_distances),
        "contraction_ratios": list(res.contraction_ratios),
        "pass": ok,
    })
    status = "PASS" if ok else "FAIL"
    print(f"[{status}] picard: final tv_T={res.tv_T_distances[-1]:.6e}",
          file=out)
    return 0 if ok else 1


def _trace_from_csv(out_dir: Path, sigma: float) -> FlowTrace:
    cols = _read_csv_columns(out_dir / "trace.csv")
    if tuple(cols) != TRACE_COLUMNS:
        raise ConfigError(f"unexpected trace.csv header in {out_dir}")
    aux_path = out_dir / "trace_aux.csv"
    n = cols["t"].size
    if aux_path.exists():
        aux = _read_csv_columns(aux_path)
        if aux["t"].size != n:
            raise ConfigError("trace_aux.csv row count differs from trace.csv")
    else:
        aux = {"ratio_min_mstar": np.full(n, math.nan),
               "ratio_max_mstar": np.full(n, math.nan)}
    trace = FlowTrace(sigma=sigma, flow_kind="birth_death")
    for i in range(n):
        trace.records.append(TraceRecord(
            **{name: float(cols[name][i]) for name in TRACE_COLUMNS},
            ratio_min_mstar=float(aux["ratio_min_mstar"][i]),
            ratio_max_mstar=float(aux["ratio_max_mstar"][i]),
        ))
    trace.validate()
    return trace


def run_check(output_dir: str, out=sys.stdout, err=sys.stderr) -> int:
    out_dir = resolve_output_dir(output_dir)
    try:
        resolved = load_config_file(out_dir / "config_resolved.json")
        config = ExperimentConfig.from_dict(resolved)
        exp = build_experiment(config)
        mcols = _read_csv_columns(out_dir / "mstar.csv")
        if abs(mcols["x"][0] - exp.grid.x[0]) > 1e-12 or \
                mcols["x"].size != exp.grid.n:
            raise ConfigError("mstar.csv grid does not match the config")
        m_star = measure_from_density(exp.grid, mcols["density"])
        trace = _trace_from_csv(out_dir, config.sigma)
    except ConfigError as exc:
        print(f"config error: {exc}", file=err)
        return 2
    except FrflowError as exc:
        print(f"flow error: {type(exc).__name__}: {exc}", file=err)
        return 3
    try:
        from .minimizer import _recentred_log_gap, gibbs_map
        residual = _recentred_log_gap(exp.grid, m_star,
                                      gibbs_map(exp.V, m_star))
        mres = MinimizerResult(m_star=m_star, residual=residual,
                               iterations=0, converged=residual <= 1e-8)
        checks = [_minimizer_entry(mres)]
        for name in config.checks:
            checks.append(_CHECKS[name](exp, trace, m_star, mres))
    except FrflowError as exc:
        print(f"flow error: {type(exc).__name__}: {exc}", file=err)
        return 3
    notes = [f"backend={BACKEND_NAME}", "re-run from persisted artifacts"]
    notes += _TRACE_NOTES
    write_json(out_dir / "certificate.json", _certificate(checks, notes))
    _report_checks(checks, out)
    return 0 if all(c.passed for c in checks) else 1
