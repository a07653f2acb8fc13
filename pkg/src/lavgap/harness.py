"""Config ingestion, experiment orchestration and report serialization."""
from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from . import __version__
from .errors import (ConfigError, ConstructionError, DegenerateProbeError, InfeasiblePlanError,
                     LavgapError, PreconditionError, StructureError, UnknownExampleError)
from .energy import ConvergenceReport, StudyRow, convergence_study
from .examples import PARAMETERS, ProblemSpec, get_example
from .hypotheses import check_all, required_hypotheses
from .lagrangian import DistanceKind
from .probes import HypothesisReport, Verdict
from .reparam import Anchor, reparametrized

FORMAT_VERSION = 1
COLUMNS = ("nu", "mu", "eps_nu", "meas_S_nu", "F_y_nu", "gap", "w1p_dist", "lip_rank",
           "budget", "status")
EXTRA_COLUMNS = ("y_nu_start", "y_nu_end")
SAMPLE_POINTS = 257

EXIT_OK, EXIT_FALSIFIED, EXIT_NUMERIC, EXIT_CONFIG = 0, 2, 3, 4

_TOP_KEYS = {"problem", "anchor", "nu_schedule", "tuning", "quad", "seed", "outputs"}
_REQUIRED = ("problem", "anchor", "nu_schedule")


@dataclass(frozen=True)
class NuSchedule:
    start: float
    factor: float
    steps: int

    def values(self) -> List[float]:
        return [self.start * self.factor**k for k in range(self.steps)]


@dataclass(frozen=True)
class Tuning:
    mu: Optional[float] = None
    lambda_bar: Optional[float] = None
    rho: Optional[float] = None
    dist_kind: str = "u"
    p: float = 1.0


@dataclass(frozen=True)
class QuadSettings:
    tol: float = 1e-12
    max_depth: int = 60


@dataclass(frozen=True)
class Outputs:
    report_path: Optional[str] = None
    samples_path: Optional[str] = None


@dataclass(frozen=True)
class RunConfig:
    problem: str
    anchor: Anchor
    nu_schedule: NuSchedule
    params: Dict[str, float] = field(default_factory=dict)
    tuning: Tuning = Tuning()
    quad: QuadSettings = QuadSettings()
    seed: int = 0
    outputs: Outputs = Outputs()


# --------------------------------------------------------------------------- parsing

def _check_keys(obj, allowed, path):
    if not isinstance(obj, dict):
        raise ConfigError("expected an object", path)
    for key in obj:
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r}", f"{path}.{key}" if path else key)


def _number(obj, key, path, *, integer=False, optional=False, default=None):
    where = f"{path}.{key}" if path else key
    if key not in obj or obj[key] is None:
        if optional:
            return default
        raise ConfigError("missing required key", where)
    val = obj[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError("expected a number", where)
    if integer:
        if isinstance(val, float) and not val.is_integer():
            raise ConfigError("expected an integer", where)
        return int(val)
    val = float(val)
    if not math.isfinite(val):
        raise ConfigError("expected a finite number", where)
    return val


def _problem(raw):
    if isinstance(raw, str):
        name, params = raw, {}
    elif isinstance(raw, dict):
        _check_keys(raw, {"name", "params"}, "problem")
        name = raw.get("name")
        if not isinstance(name, str):
            raise ConfigError("expected a string", "problem.name")
        params = raw.get("params", {})
        _check_keys(params, set(PARAMETERS.get(name, ())), "problem.params")
        params = {k: _number(params, k, "problem.params") for k in sorted(params)}
    else:
        raise ConfigError("expected an example name or {name, params}", "problem")
    if name not in PARAMETERS:
        raise ConfigError(f"unknown example {name!r}; known: {sorted(PARAMETERS)}", "problem")
    return name, params


def config_from_dict(doc: Dict[str, Any]) -> RunConfig:
    """Validate a decoded document and apply defaults."""
    _check_keys(doc, _TOP_KEYS, "")
    for key in _REQUIRED:
        if key not in doc:
            raise ConfigError("missing required key", key)
    name, params = _problem(doc["problem"])

    try:
        anchor = Anchor(doc["anchor"])
    except (ValueError, TypeError):
        raise ConfigError("expected one of initial|final|both", "anchor") from None

    sched = doc["nu_schedule"]
    _check_keys(sched, {"start", "factor", "steps"}, "nu_schedule")
    start = _number(sched, "start", "nu_schedule")
    factor = _number(sched, "factor", "nu_schedule")
    steps = _number(sched, "steps", "nu_schedule", integer=True)
    if start <= 0:
        raise ConfigError("start>0 required", "nu_schedule.start")
    if factor <= 1:
        raise ConfigError("factor>1 required", "nu_schedule.factor")
    if steps < 1:
        raise ConfigError("steps>=1 required", "nu_schedule.steps")

    raw = doc.get("tuning", {})
    _check_keys(raw, {"mu", "lambda_bar", "rho", "dist_kind", "p"}, "tuning")
    mu = _number(raw, "mu", "tuning", optional=True)
    lam = _number(raw, "lambda_bar", "tuning", optional=True)
    rho = _number(raw, "rho", "tuning", optional=True)
    p = _number(raw, "p", "tuning", optional=True, default=1.0)
    if mu is not None and not 0 < mu < 1:
        raise ConfigError("0<mu<1 required", "tuning.mu")
    if lam is not None and lam <= 0:
        raise ConfigError("lambda_bar>0 required", "tuning.lambda_bar")
    if rho is not None and not 0 < rho <= 1:
        raise ConfigError("0<rho<=1 required", "tuning.rho")
    if p < 1:
        raise ConfigError("p>=1 required", "tuning.p")
    try:
        dist = DistanceKind.parse(raw.get("dist_kind", "u"))
    except (ValueError, TypeError, AttributeError):
        raise ConfigError("expected 'u' or 'e'", "tuning.dist_kind") from None
    tuning = Tuning(mu, lam, rho, "u" if dist is DistanceKind.U else "e", p)

    raw = doc.get("quad", {})
    _check_keys(raw, {"tol", "max_depth"}, "quad")
    tol = _number(raw, "tol", "quad", optional=True, default=QuadSettings.tol)
    depth = _number(raw, "max_depth", "quad", integer=True, optional=True,
                    default=QuadSettings.max_depth)
    if tol <= 0:
        raise ConfigError("tol>0 required", "quad.tol")
    if depth < 1:
        raise ConfigError("max_depth>=1 required", "quad.max_depth")

    seed = _number(doc, "seed", "", integer=True, optional=True, default=0)
    if seed < 0:
        raise ConfigError("seed>=0 required", "seed")

    raw = doc.get("outputs", {})
    _check_keys(raw, {"report_path", "samples_path"}, "outputs")
    for key in ("report_path", "samples_path"):
        if raw.get(key) is not None and not isinstance(raw[key], str):
            raise ConfigError("expected a path string", f"outputs.{key}")
    outputs = Outputs(raw.get("report_path"), raw.get("samples_path"))

    try:
        spec = get_example(name, **params)
    except (UnknownExampleError, PreconditionError) as exc:
        raise ConfigError(str(exc), "problem") from None
    if anchor is Anchor.BOTH and lam is None:
        if spec.lambda_bar is None:
            raise ConfigError(f"anchor 'both' needs lambda_bar; {name} does not provide one",
                              "tuning.lambda_bar")
    return RunConfig(name, anchor, NuSchedule(start, factor, steps), params, tuning,
                     QuadSettings(tol, depth), seed, outputs)


def parse_config(text: str) -> RunConfig:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed document: {exc.msg} (line {exc.lineno})", "") from None
    return config_from_dict(doc)


def load_config(path: str) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", path) from None
    return parse_config(text)


def config_to_dict(cfg: RunConfig) -> Dict[str, Any]:
    """Canonical form with every default spelled out."""
    problem: Any = cfg.problem if not cfg.params else {"name": cfg.problem,
                                                        "params": dict(cfg.params)}
    t = cfg.tuning
    tuning = {"dist_kind": t.dist_kind, "p": t.p}
    for key in ("mu", "lambda_bar", "rho"):
        if getattr(t, key) is not None:
            tuning[key] = getattr(t, key)
    outputs = {k: v for k, v in (("report_path", cfg.outputs.report_path),
                                 ("samples_path", cfg.outputs.samples_path)) if v is not None}
    return {
        "problem": problem,
        "anchor": cfg.anchor.value,
        "nu_schedule": {"start": cfg.nu_schedule.start, "factor": cfg.nu_schedule.factor,
                        "steps": cfg.nu_schedule.steps},
        "tuning": tuning,
        "quad": {"tol": cfg.quad.tol, "max_depth": cfg.quad.max_depth},
        "seed": cfg.seed,
        "outputs": outputs,
    }


def dump_config(cfg: RunConfig) -> str:
    return json.dumps(config_to_dict(cfg), sort_keys=True, separators=(",", ":"))


# --------------------------------------------------------------------------- running

@dataclass
class ReportFile:
    config: RunConfig
    verdicts: Dict[str, HypothesisReport]
    required: tuple
    study: Optional[ConvergenceReport] = None
    samples: Optional[Dict[str, np.ndarray]] = None

    @property
    def rows(self) -> List[StudyRow]:
        return self.study.rows if self.study is not None else []

    @property
    def falsified(self) -> List[str]:
        return [n for n in self.required if not self.verdicts[n].passed
                and self.verdicts[n].verdict is Verdict.FALSIFIED]

    @property
    def exit_code(self) -> int:
        return EXIT_FALSIFIED if self.falsified else EXIT_OK


class NumericFailure(LavgapError):
    """The run could not produce a report."""


def _spec(cfg: RunConfig) -> ProblemSpec:
    try:
        return get_example(cfg.problem, **cfg.params)
    except (UnknownExampleError, PreconditionError) as exc:
        raise ConfigError(str(exc), "problem") from None


def _lambda_for_checks(cfg: RunConfig, spec: ProblemSpec) -> float:
    lam = cfg.tuning.lambda_bar or spec.lambda_bar
    if lam is None:
        traj = spec.trajectory
        lam = 2.0 * traj.deriv_l1 / traj.interval.length
    return lam


def _tuning_kwargs(cfg: RunConfig, spec: ProblemSpec) -> Dict[str, Any]:
    out: Dict[str, Any] = {"dist": DistanceKind.parse(cfg.tuning.dist_kind)}
    if cfg.anchor is Anchor.BOTH:
        out["lambda_bar"] = cfg.tuning.lambda_bar or spec.lambda_bar
        mu = cfg.tuning.mu if cfg.tuning.mu is not None else spec.mu
        if mu is not None:
            out["mu"] = mu
        if cfg.tuning.rho is not None:
            out["rho"] = cfg.tuning.rho
    return out


def _quad_kwargs(cfg: RunConfig) -> Dict[str, Any]:
    return {"abs_tol": cfg.quad.tol, "rel_tol": cfg.quad.tol, "max_depth": cfg.quad.max_depth}


def run_checks(cfg: RunConfig, spec: Optional[ProblemSpec] = None) -> ReportFile:
    spec = spec or _spec(cfg)
    lag = spec.lagrangian
    verdicts = check_all(lag, spec.trajectory, spec.consts, _lambda_for_checks(cfg, spec),
                         dist=DistanceKind.parse(cfg.tuning.dist_kind),
                         rho=cfg.tuning.rho or 1e-3, seed=cfg.seed)
    return ReportFile(cfg, verdicts, required_hypotheses(cfg.anchor, lag))


def _samples(cfg: RunConfig, spec: ProblemSpec, study: ConvergenceReport):
    traj = spec.trajectory
    s = np.linspace(traj.t, traj.T, SAMPLE_POINTS)
    cols = {"s": s, "y": np.asarray(traj.value(s), dtype=float).reshape(len(s), -1)[:, 0]}
    for row in study.rows:
        key = f"y_nu_{row.nu:.17g}"
        if row.status == "infeasible":
            cols[key] = np.full(len(s), np.nan)
            continue
        _, _, y_nu = reparametrized(traj, spec.lagrangian, cfg.anchor, row.nu,
                                    **_tuning_kwargs(cfg, spec))
        cols[key] = np.asarray(y_nu.value(s), dtype=float).reshape(len(s), -1)[:, 0]
    return cols


def run(cfg: RunConfig, *, with_samples: Optional[bool] = None) -> ReportFile:
    """Hypothesis checkers, then the convergence study over the nu schedule."""
    spec = _spec(cfg)
    report = run_checks(cfg, spec)
    try:
        with np.errstate(all="ignore"):
            report.study = convergence_study(
                spec.lagrangian, spec.trajectory, cfg.anchor, cfg.nu_schedule.values(),
                p=cfg.tuning.p, consts=spec.consts, analytic=spec.analytic, seed=cfg.seed,
                quad=_quad_kwargs(cfg), **_tuning_kwargs(cfg, spec))
            if with_samples if with_samples is not None else bool(cfg.outputs.samples_path):
                report.samples = _samples(cfg, spec, report.study)
    except (ConstructionError, StructureError, DegenerateProbeError, PreconditionError,
            FloatingPointError, ArithmeticError) as exc:
        raise NumericFailure(str(exc)) from exc
    except InfeasiblePlanError as exc:  # pragma: no cover - the study records these per row
        raise NumericFailure(str(exc)) from exc
    for row in report.rows:
        for name in ("eps_nu", "meas_S_nu", "w1p_dist", "lip_rank"):
            val = getattr(row, name)
            if val is not None and math.isnan(val):
                raise NumericFailure(f"nan {name} at nu={row.nu:.17g}")
    return report


# --------------------------------------------------------------------------- emission

def fmt(x) -> str:
    """17 significant digits; infinities as inf/-inf; missing as empty."""
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return "%.17g" % x


def _json_num(x):
    if x is None:
        return None
    x = float(x)
    if math.isfinite(x):
        return x
    return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")


def row_record(row: StudyRow) -> Dict[str, Any]:
    return {
        "nu": row.nu,
        "mu": row.mu,
        "eps_nu": row.eps_nu,
        "meas_S_nu": row.meas_S_nu,
        "F_y_nu": None if row.F_y_nu is None else row.F_y_nu.value,
        "gap": row.gap,
        "w1p_dist": row.w1p_dist,
        "lip_rank": row.lip_rank,
        "budget": None if row.budget is None else row.budget.bound,
        "status": row.status,
        "y_nu_start": row.y_nu_start,
        "y_nu_end": row.y_nu_end,
    }


def header(report: ReportFile) -> Dict[str, Any]:
    study = report.study
    out: Dict[str, Any] = {
        "format_version": FORMAT_VERSION,
        "lavgap_version": __version__,
        "config": config_to_dict(report.config),
        "required": list(report.required),
        "falsified": report.falsified,
        "verdicts": {k: report.verdicts[k].verdict.value for k in sorted(report.verdicts)},
    }
    if study is not None:
        out["F_y"] = _json_num(study.F_y.value)
        out["F_y_divergent"] = bool(study.F_y.divergent)
    return out


def _canon(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def emit_report(report: ReportFile, fmt_name: str = "csv") -> bytes:
    """Serialize deterministically. CSV gets ``#`` metadata lines then a fixed header row."""
    head = header(report)
    buf = io.StringIO()
    if fmt_name == "csv":
        for key in sorted(head):
            buf.write(f"# {key}: {_canon(head[key])}\n")
        for name in sorted(report.verdicts):
            rep = report.verdicts[name]
            if rep.witness:
                buf.write(f"# witness.{name}: {_canon({k: _json_num(v) for k, v in rep.witness.items()})}\n")
        buf.write(",".join(COLUMNS + EXTRA_COLUMNS) + "\n")
        for row in report.rows:
            rec = row_record(row)
            buf.write(",".join(fmt(rec[c]) for c in COLUMNS + EXTRA_COLUMNS) + "\n")
    elif fmt_name in ("jsonl", "json-lines"):
        buf.write(_canon({"header": head}) + "\n")
        for row in report.rows:
            rec = row_record(row)
            buf.write(_canon({k: (v if isinstance(v, str) else _json_num(v))
                              for k, v in rec.items()}) + "\n")
    else:
        raise ValueError(f"unknown format {fmt_name!r}")
    return buf.getvalue().encode("utf-8")


def emit_samples(samples: Dict[str, np.ndarray]) -> bytes:
    keys = list(samples)
    lines = [",".join(keys)]
    for i in range(len(samples[keys[0]])):
        lines.append(",".join(fmt(samples[k][i]) for k in keys))
    return ("\n".join(lines) + "\n").encode("utf-8")


def write_bytes(path: str, data: bytes) -> None:
    with open(path, "wb") as fh:
        fh.write(data)
