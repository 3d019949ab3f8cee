"""Experiment orchestration: configs, exponent fits, bound verdicts, reports.

Configs are INI files (``key = value`` under ``[section]`` headers).  Rationals
such as ``nu = 1/2`` are parsed exactly so that the nu = 1 regime is selected
by equality, never by floating-point proximity.
"""
from __future__ import annotations

import configparser
import csv
import io
import json
import logging
import math
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy import stats

from . import bounds as B
from .decay import default_window, estimate_decay_character, shell_profile
from .fields import (
    InitialDataSpec,
    VelocityFieldSpec,
    analytic_decay_character,
    as_fraction,
    sample_initial_data,
)
from .solver import SERIES_COLUMNS, NormSeries, RunConfig, log_sample_times, run
from .spectral import Grid

log = logging.getLogger(__name__)

MODES = ("heat", "advection_diffusion", "pure_advection")
MODE_TO_EQUATION = {
    "heat": "pure_diffusion",
    "advection_diffusion": "advection_diffusion",
    "pure_advection": "pure_advection",
}
EQUATION_TO_MODE = {v: k for k, v in MODE_TO_EQUATION.items()}
QUANTITY_COLUMN = {
    "theta_l2": "l2",
    "T_l2": "T_l2",
    "eta_l2": "eta_l2",
    "grad_l2": "grad_l2",
    "invgrad_l2": "invgrad_l2",
    "lambda": "lambda",
}
BOUND_BUILDERS = {
    "heat_lower": B.heat_lower_curve,
    "theta_upper": B.theta_upper_curve,
    "theta_lower": B.theta_lower_curve,
    "eta_upper": B.eta_upper_curve,
    "grad_upper": B.grad_upper_curve,
    "hm1_lower": B.hm1_lower_curve,
    "lambda_lower": B.lambda_lower_curve,
}
POINT_SLACK = 0.02
CLASS_SLOPE = 0.1
CONFIG_DIR = Path(__file__).parent / "configs"


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------- config


@dataclass
class ExperimentConfig:
    name: str
    mode: str
    grid: Grid
    kappa: float
    initial: InitialDataSpec
    velocity: VelocityFieldSpec | None
    t_final: float
    samples: int = 64
    fit_window: tuple[float, float] = (0.5, 1.0)
    exponent_tol: float | None = None
    bounds: tuple[str, ...] = ()
    cfl: float = 0.5
    dealias: bool = True
    output_dir: str | None = None
    r_star: float | None = None
    alpha: Fraction | None = None
    m: Fraction | None = None
    decay_delta_max: float | None = None
    sweep_equations: tuple[str, ...] = ()
    sweep_nus: tuple[Fraction, ...] = ()

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"[experiment] mode: unknown mode {self.mode!r}; expected one of {MODES}")
        w0, w1 = self.fit_window
        if not 0 <= w0 < w1 <= 1:
            raise ConfigError("[experiment] fit_window: need 0 <= w0 < w1 <= 1")
        for b in self.bounds:
            if b not in BOUND_BUILDERS and b != "pure_advection_lambda":
                raise ConfigError(f"[experiment] bounds: unknown bound {b!r}")
        if self.mode == "heat" and not self.kappa > 0:
            raise ConfigError("[physics] kappa: heat mode needs kappa > 0")
        if self.mode == "advection_diffusion" and not self.kappa > 0:
            raise ConfigError("[physics] kappa: advection_diffusion needs kappa > 0")
        if self.mode != "heat" and self.velocity is None:
            raise ConfigError(f"[velocity]: mode {self.mode} needs a velocity section")
        if self.velocity is not None and self.velocity.d != self.grid.d:
            raise ConfigError("[velocity] family: dimension does not match [grid] d")

    @property
    def tolerance(self) -> float:
        if self.exponent_tol is not None:
            return self.exponent_tol
        return 0.05 if (self.grid.d == 2 and self.mode == "heat") else 0.07

    @property
    def effective_kappa(self) -> float:
        return 0.0 if self.mode == "pure_advection" else self.kappa

    @property
    def effective_velocity(self) -> VelocityFieldSpec | None:
        return None if self.mode == "heat" else self.velocity

    @property
    def equation(self) -> str:
        return MODE_TO_EQUATION[self.mode]

    @property
    def nu(self) -> Fraction:
        return self.velocity.nu if self.velocity is not None else Fraction(0)

    def bound_params(self) -> B.BoundParams | None:
        if self.effective_kappa <= 0:
            return None
        r = analytic_decay_character(self.initial) if self.r_star is None else self.r_star
        v = self.effective_velocity
        alpha = self.alpha if self.alpha is not None else (v.nu if v is not None else Fraction(0))
        nu = v.nu if v is not None else Fraction(0)
        return B.BoundParams(self.grid.d, r, self.effective_kappa, alpha, nu, self.m)

    def run_config(self) -> RunConfig:
        times = np.concatenate([[0.0], log_sample_times(self.t_final, self.samples)])
        return RunConfig(
            self.grid,
            self.effective_kappa,
            self.initial,
            self.effective_velocity,
            self.t_final,
            sample_times=times,
            cfl=self.cfl,
            dealias=self.dealias,
        )

    def to_json(self) -> dict:
        out = {
            "name": self.name,
            "mode": self.mode,
            "grid": {"d": self.grid.d, "n": self.grid.n, "half_width": self.grid.half_width},
            "kappa": self.kappa,
            "initial": asdict(self.initial),
            "velocity": None,
            "t_final": self.t_final,
            "samples": self.samples,
            "fit_window": list(self.fit_window),
            "exponent_tol": self.tolerance,
            "bounds": list(self.bounds),
            "cfl": self.cfl,
            "dealias": self.dealias,
            "r_star": self.r_star,
            "alpha": None if self.alpha is None else str(self.alpha),
            "m": None if self.m is None else str(self.m),
        }
        if self.velocity is not None:
            v = asdict(self.velocity)
            v["nu"] = str(self.velocity.nu)
            out["velocity"] = v
        if self.sweep_equations:
            out["sweep"] = {
                "equations": list(self.sweep_equations),
                "nus": [str(n) for n in self.sweep_nus],
            }
        return out


def _line_of(text: str, section: str, key: str) -> int | None:
    current = None
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            current = s[1:-1].strip()
        elif current == section and s.split("=", 1)[0].strip() == key:
            return i
    return None


class _Reader:
    """Typed access to a parsed config with located error messages."""

    KNOWN = {
        "experiment": {
            "name", "mode", "t_final", "samples", "fit_window", "exponent_tol",
            "bounds", "cfl", "dealias", "output_dir",
        },
        "grid": {"d", "n", "half_width"},
        "physics": {"kappa"},
        "initial": {
            "family", "amplitude", "sigma", "center", "exponent", "cutoff",
            "taper_width", "seed",
        },
        "velocity": {"family", "nu", "amplitude", "base", "axis"},
        "bounds": {"r_star", "alpha", "m"},
        "decay": {"delta_max"},
        "sweep": {"equations", "nus"},
    }

    def __init__(self, text: str, source: str):
        self.text = text
        self.source = source
        self.cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        try:
            self.cp.read_string(text, source=source)
        except configparser.Error as exc:
            raise ConfigError(f"{source}: {exc}") from None
        for sec in self.cp.sections():
            if sec not in self.KNOWN:
                raise ConfigError(f"{source}: unknown section [{sec}]")
            for key in self.cp[sec]:
                if key not in self.KNOWN[sec]:
                    raise ConfigError(self._where(sec, key) + f"unknown key {key!r}")

    def _where(self, sec: str, key: str) -> str:
        line = _line_of(self.text, sec, key)
        loc = f"line {line}, " if line else ""
        return f"{self.source}: {loc}[{sec}] {key}: "

    def has(self, sec: str, key: str | None = None) -> bool:
        if key is None:
            return self.cp.has_section(sec)
        return self.cp.has_option(sec, key)

    def get(self, sec: str, key: str, conv=str, default=None, required: bool = False):
        if not self.cp.has_option(sec, key):
            if required:
                raise ConfigError(f"{self.source}: [{sec}] {key}: missing required field")
            return default
        raw = self.cp.get(sec, key)
        try:
            return conv(raw)
        except (ValueError, ZeroDivisionError, TypeError) as exc:
            raise ConfigError(self._where(sec, key) + f"cannot parse {raw!r} ({exc})") from None


def _floats(raw: str) -> tuple[float, ...]:
    return tuple(float(as_fraction(x)) for x in raw.replace(",", " ").split())


def _names(raw: str) -> tuple[str, ...]:
    return tuple(x for x in raw.replace(",", " ").split() if x)


def _bool(raw: str) -> bool:
    v = raw.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected a boolean")


def _real(raw: str) -> float:
    return float(as_fraction(raw))


def parse_config_text(text: str, source: str = "<config>") -> ExperimentConfig:
    r = _Reader(text, source)
    name = r.get("experiment", "name", default=Path(source).stem)
    mode = r.get("experiment", "mode", required=True)
    grid_args = (
        r.get("grid", "d", int, required=True),
        r.get("grid", "n", int, required=True),
        r.get("grid", "half_width", _real, required=True),
    )
    try:
        grid = Grid(*grid_args)
    except ValueError as exc:
        raise ConfigError(f"{source}: [grid]: {exc}") from None

    init_kw = {"family": r.get("initial", "family", required=True)}
    for key, conv in (
        ("amplitude", _real), ("sigma", _real), ("exponent", _real),
        ("cutoff", _real), ("taper_width", _real), ("seed", int), ("center", _floats),
    ):
        val = r.get("initial", key, conv)
        if val is not None:
            init_kw[key] = val
    try:
        initial = InitialDataSpec(**init_kw)
    except ValueError as exc:
        raise ConfigError(f"{source}: [initial]: {exc}") from None

    velocity = None
    if r.has("velocity"):
        vel_kw = {"family": r.get("velocity", "family", required=True)}
        for key, conv in (("nu", as_fraction), ("amplitude", _real), ("base", str), ("axis", _floats)):
            val = r.get("velocity", key, conv)
            if val is not None:
                vel_kw[key] = val
        try:
            velocity = VelocityFieldSpec(**vel_kw)
        except ValueError as exc:
            raise ConfigError(f"{source}: [velocity]: {exc}") from None

    window = r.get("experiment", "fit_window", _floats, default=(0.5, 1.0))
    if len(window) != 2:
        raise ConfigError(r._where("experiment", "fit_window") + "expected two numbers")

    return ExperimentConfig(
        name=name,
        mode=mode,
        grid=grid,
        kappa=r.get("physics", "kappa", _real, default=0.0),
        initial=initial,
        velocity=velocity,
        t_final=r.get("experiment", "t_final", _real, required=True),
        samples=r.get("experiment", "samples", int, default=64),
        fit_window=tuple(window),
        exponent_tol=r.get("experiment", "exponent_tol", _real),
        bounds=r.get("experiment", "bounds", _names, default=()),
        cfl=r.get("experiment", "cfl", _real, default=0.5),
        dealias=r.get("experiment", "dealias", _bool, default=True),
        output_dir=r.get("experiment", "output_dir"),
        r_star=r.get("bounds", "r_star", _real),
        alpha=r.get("bounds", "alpha", as_fraction),
        m=r.get("bounds", "m", as_fraction),
        decay_delta_max=r.get("decay", "delta_max", _real),
        sweep_equations=r.get("sweep", "equations", _names, default=()),
        sweep_nus=tuple(as_fraction(x) for x in r.get("sweep", "nus", _names, default=())),
    )


def resolve_config_path(path: str | os.PathLike) -> Path:
    """Accept a file path or the name of a bundled config."""
    p = Path(path)
    if p.exists():
        return p
    for cand in (CONFIG_DIR / p.name, CONFIG_DIR / f"{p.name}.cfg", CONFIG_DIR / f"{p.stem}.cfg"):
        if cand.exists():
            return cand
    raise ConfigError(f"config not found: {path}")


def load_config(path: str | os.PathLike) -> ExperimentConfig:
    p = resolve_config_path(path)
    return parse_config_text(p.read_text(), str(p))


# ---------------------------------------------------------------- fitting


@dataclass
class FitResult:
    quantity: str
    slope: float
    stderr: float
    window: tuple[float, float]
    C: float
    n_points: int

    def to_json(self) -> dict:
        return {
            "quantity": self.quantity,
            "slope": self.slope,
            "stderr": self.stderr,
            "window": list(self.window),
            "C": self.C,
            "n_points": self.n_points,
        }


def window_mask(t, window: tuple[float, float]) -> np.ndarray:
    """Samples with t > 0 whose log(1+t) lies in the given fraction of the range."""
    t = np.asarray(t, float)
    pos = t > 0
    if not np.any(pos):
        raise ValueError("no positive sample times")
    s = np.log1p(t)
    lo, hi = s[pos].min(), s[pos].max()
    w0, w1 = window
    a, b = lo + w0 * (hi - lo), lo + w1 * (hi - lo)
    eps = 1e-12 * max(1.0, hi)
    return pos & (s >= a - eps) & (s <= b + eps)


def fit_exponent(t, y, window=(0.5, 1.0), quantity: str = "y", min_points: int = 8) -> FitResult:
    """Least-squares fit of y = C (1+t)^slope in log-log coordinates."""
    t = np.asarray(t, float)
    y = np.asarray(y, float)
    w0, w1 = window
    if not 0 <= w0 < w1 <= 1:
        raise ValueError(f"window {window} is not inside [0, 1]")
    m = window_mask(t, window)
    if m.sum() < min_points:
        raise ValueError(f"window {window} holds {int(m.sum())} samples, need {min_points}")
    if np.any(~(y[m] > 0)):
        raise ValueError(f"{quantity}: nonpositive values in the fit window")
    fit = stats.linregress(np.log1p(t[m]), np.log(y[m]))
    se = float(fit.stderr) if np.isfinite(fit.stderr) else 0.0
    return FitResult(
        quantity, float(fit.slope), se, (float(t[m][0]), float(t[m][-1])),
        float(np.exp(fit.intercept)), int(m.sum()),
    )


# ---------------------------------------------------------------- verdicts


@dataclass
class BoundVerdict:
    bound: str
    status: str  # "pass" | "fail" | "not applicable"
    direction: str
    quantity: str
    exponent_theory: float | None = None
    exponent_observed: float | None = None
    exponent_delta: float | None = None
    tolerance: float | None = None
    exponent_ok: bool | None = None
    sharp: bool | None = None
    C: float | None = None
    t_min: float | None = None
    n_checked: int = 0
    violations: int = 0
    vacuous: bool = False
    tail_violations: int | None = None
    gates: list[dict] = field(default_factory=list)
    curve: dict | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def violation_fraction(self) -> float:
        return self.violations / self.n_checked if self.n_checked else 0.0

    def to_json(self) -> dict:
        out = asdict(self)
        out["violation_fraction"] = self.violation_fraction
        return out


def _count_violations(y, fitted, direction: str) -> int:
    if direction == "lower":
        return int(np.sum(y < (1.0 - POINT_SLACK) * fitted))
    return int(np.sum(y > (1.0 + POINT_SLACK) * fitted))


def verify_bound(
    t,
    y,
    curve: B.BoundCurve,
    window=(0.5, 1.0),
    tol: float = 0.05,
    fit_constant: bool = True,
) -> BoundVerdict:
    """Check one inequality against a sampled series.

    The curve's t-shape is fixed; with ``fit_constant`` its constant is fitted
    by least squares in log space over the tail window.  The exponential factor
    exp(+-G) is divided out before the slope is compared with the polynomial
    exponent.  Points count as violations beyond 2% of the fitted curve, and
    only samples with t >= t_min are checked.
    """
    t = np.asarray(t, float)
    y = np.asarray(y, float)
    v = BoundVerdict(
        curve.name, "not applicable", curve.direction, curve.quantity,
        gates=[g.to_json() for g in curve.gates], t_min=curve.t_min,
    )
    if not curve.applicable:
        v.notes.append("gates unmet: " + ", ".join(g.name for g in curve.gates if not g.passed))
        v.curve = curve.to_json()
        return v

    m = window_mask(t, window)
    if np.any(~(y[m] > 0)):
        v.status = "fail"
        v.notes.append("nonpositive observed values in the tail window")
        return v
    reduced = y * np.exp(-curve.exp_sign * B.accumulated_decay(t, curve.nu)) if curve.exp_sign else y
    fit = fit_exponent(t, reduced, window, quantity=curve.quantity)
    p = curve.poly_exponent
    v.exponent_theory = p
    v.exponent_observed = fit.slope
    v.exponent_delta = fit.slope - p
    v.tolerance = tol
    v.sharp = abs(fit.slope - p) <= tol
    v.exponent_ok = fit.slope <= p + tol if curve.direction == "upper" else fit.slope >= p - tol

    if fit_constant:
        log_c = float(np.mean(np.log(y[m]) - curve.log_shape(t[m])))
        C = math.exp(log_c) / curve.kappa**curve.kappa_power
        fitted_curve = curve.with_constant(C)
    else:
        fitted_curve = curve
    v.C = fitted_curve.C
    v.curve = fitted_curve.to_json()
    values = fitted_curve(t)

    checked = m & (t >= curve.t_min) if fit_constant else (t >= curve.t_min)
    v.n_checked = int(checked.sum())
    v.violations = _count_violations(y[checked], values[checked], curve.direction)
    if v.n_checked == 0:
        v.vacuous = True
        v.tail_violations = _count_violations(y[m], values[m], curve.direction)
        v.notes.append(
            f"no samples at t >= t_min = {curve.t_min:.6g}; inequality holds vacuously "
            f"({v.tail_violations} tail points below the fitted curve, informational)"
        )
    v.status = "pass" if (v.exponent_ok and v.violations == 0) else "fail"
    return v


@dataclass
class LambdaClass:
    label: str
    slope: float
    stderr: float
    value: float | None = None
    spread: float | None = None

    def to_json(self) -> dict:
        return asdict(self)

    def __str__(self) -> str:
        if self.label == "finite":
            return f"finite({self.value:.4g} +- {self.spread:.2g})"
        return self.label


def classify_lambda(t, lam, window=(0.5, 1.0), threshold: float = CLASS_SLOPE) -> LambdaClass:
    lam = np.asarray(lam, float)
    if np.any(~(lam[np.asarray(t) > 0] > 0)):
        raise ValueError("lambda column must be positive")
    fit = fit_exponent(t, lam, window, quantity="lambda")
    if fit.slope > threshold:
        return LambdaClass("infinity", fit.slope, fit.stderr)
    if fit.slope < -threshold:
        return LambdaClass("zero", fit.slope, fit.stderr)
    tail = lam[window_mask(t, window)]
    return LambdaClass("finite", fit.slope, fit.stderr, float(tail.mean()), float(tail.std()))


# ---------------------------------------------------------------- experiments


@dataclass
class Report:
    config: dict
    fits: list[FitResult]
    verdicts: list[BoundVerdict]
    classification: dict
    flags: list[str]
    series: NormSeries | None = field(default=None, repr=False)
    curves: dict[str, B.BoundCurve] = field(default_factory=dict, repr=False)
    extras: dict = field(default_factory=dict)

    @property
    def failed(self) -> list[str]:
        return [v.bound for v in self.verdicts if v.status == "fail"]

    @property
    def ok(self) -> bool:
        return not self.failed

    def verdict(self, name: str) -> BoundVerdict:
        for v in self.verdicts:
            if v.bound == name:
                return v
        raise KeyError(name)

    def fit(self, quantity: str) -> FitResult:
        for f in self.fits:
            if f.quantity == quantity:
                return f
        raise KeyError(quantity)

    def to_json(self) -> dict:
        return {
            "config": self.config,
            "fits": [f.to_json() for f in self.fits],
            "verdicts": [v.to_json() for v in self.verdicts],
            "classification": self.classification,
            "flags": list(self.flags),
            **self.extras,
        }


def _build_curves(cfg: ExperimentConfig, series: NormSeries) -> dict[str, B.BoundCurve]:
    params = cfg.bound_params()
    out = {}
    for name in cfg.bounds:
        if name == "pure_advection_lambda":
            out[name] = B.pure_advection_lambda_curve(cfg.nu, float(series.lam[0]))
        elif params is None:
            raise ConfigError(f"bound {name} needs kappa > 0")
        else:
            out[name] = BOUND_BUILDERS[name](params)
    return out


def _fits(cfg: ExperimentConfig, series: NormSeries) -> tuple[list[FitResult], list[str]]:
    fits, notes = [], []
    cols = series.columns()
    for q, col in QUANTITY_COLUMN.items():
        try:
            fits.append(fit_exponent(series.t, cols[col], cfg.fit_window, quantity=q))
        except ValueError as exc:
            notes.append(f"no fit for {q}: {exc}")
    return fits, notes


def _sharpness(report: Report, tol: float) -> dict | None:
    names = {v.bound: v for v in report.verdicts}
    up, lo = names.get("theta_upper"), names.get("theta_lower")
    if up is None or lo is None or up.status == "not applicable" or lo.status == "not applicable":
        return None
    same = abs(up.exponent_theory - lo.exponent_theory) < 1e-12
    observed = report.fit("theta_l2").slope
    ok = same and abs(observed - up.exponent_theory) <= tol and up.status == "pass" and lo.status == "pass"
    return {
        "upper_exponent": up.exponent_theory,
        "lower_exponent": lo.exponent_theory,
        "observed": observed,
        "tolerance": tol,
        "status": "pass" if ok else "fail",
    }


def run_experiment(cfg: ExperimentConfig, out_dir: str | os.PathLike | None = None) -> Report:
    series = run(cfg.run_config())
    fits, notes = _fits(cfg, series)
    curves = _build_curves(cfg, series)
    verdicts = []
    for name, curve in curves.items():
        col = series.columns()[QUANTITY_COLUMN[curve.quantity]]
        verdicts.append(
            verify_bound(
                series.t, col, curve, cfg.fit_window, cfg.tolerance,
                fit_constant=(name != "pure_advection_lambda"),
            )
        )
    lam_class = classify_lambda(series.t, series.lam, cfg.fit_window)
    expected = B.asymptotic_class(cfg.equation, cfg.nu)
    classification = {
        "equation": cfg.equation,
        "nu": str(cfg.nu),
        "observed": lam_class.to_json(),
        "observed_label": lam_class.label,
        "chart": str(expected),
        "chart_label": expected.label,
        "matches_chart": lam_class.label == expected.label,
    }
    report = Report(
        cfg.to_json(), fits, verdicts, classification, list(series.flags) + notes, series, curves,
    )
    report.extras["run"] = {
        "steps": series.steps,
        "max_boundary_mass": float(np.max(series.boundary_mass)),
        "min_pivot_margin": float(np.min(series.pivot_margin)),
        "max_l2_increase": series.max_l2_increase,
        "max_interp_ratio": float(np.max(series.interp_ratio)),
    }
    sharp = _sharpness(report, cfg.tolerance)
    if sharp is not None:
        report.extras["theta_sharpness"] = sharp
        if sharp["status"] == "fail":
            report.verdicts.append(BoundVerdict("theta_sharpness", "fail", "both", "theta_l2"))
    target = out_dir if out_dir is not None else cfg.output_dir
    if target is not None:
        write_artifacts(report, target)
    return report


# ---------------------------------------------------------------- chart sweep


def sweep_configs(cfg: ExperimentConfig) -> list[ExperimentConfig]:
    equations = cfg.sweep_equations or B.EQUATIONS
    nus = cfg.sweep_nus or (Fraction(1, 2), Fraction(1), Fraction(2))
    if cfg.velocity is None:
        raise ConfigError("[velocity]: chart sweep needs a base velocity")
    out = []
    for eq in equations:
        if eq not in EQUATION_TO_MODE:
            raise ConfigError(f"[sweep] equations: unknown equation {eq!r}")
        for nu in nus:
            vel = replace(cfg.velocity, nu=nu)
            out.append(
                replace(
                    cfg,
                    name=f"{eq}_nu{str(nu).replace('/', '_')}",
                    mode=EQUATION_TO_MODE[eq],
                    velocity=vel,
                    bounds=("pure_advection_lambda",) if eq == "pure_advection" else (),
                    output_dir=None,
                    sweep_equations=(),
                    sweep_nus=(),
                )
            )
    return out


def sweep_workers() -> int:
    cap = os.environ.get("MIXBOUND_THREADS")
    default = os.cpu_count() or 1
    if cap is None:
        return default
    try:
        return max(1, int(cap))
    except ValueError:
        raise ConfigError(f"MIXBOUND_THREADS must be an integer, got {cap!r}") from None


def _run_cell(cfg: ExperimentConfig) -> Report:
    return run_experiment(cfg)


@dataclass
class SweepReport:
    cells: list[dict]
    reports: list[Report] = field(repr=False, default_factory=list)
    config: dict = field(default_factory=dict)

    @property
    def matches(self) -> bool:
        return all(c["matches_chart"] for c in self.cells)

    @property
    def ok(self) -> bool:
        return self.matches and all(r.ok for r in self.reports)

    def table(self) -> str:
        nus = sorted({c["nu"] for c in self.cells}, key=Fraction)
        eqs = list(dict.fromkeys(c["equation"] for c in self.cells))
        rows = ["equation            " + "".join(f"{'nu=' + n:>26}" for n in nus)]
        for eq in eqs:
            cells = {c["nu"]: c for c in self.cells if c["equation"] == eq}
            row = f"{eq:<20}"
            for n in nus:
                c = cells[n]
                mark = "ok" if c["matches_chart"] else "MISMATCH"
                row += f"{c['observed_label'] + '/' + c['chart_label'] + ' ' + mark:>26}"
            rows.append(row)
        return "\n".join(rows)

    def to_json(self) -> dict:
        return {"config": self.config, "cells": self.cells, "matches_chart": self.matches}


def chart_sweep(cfg: ExperimentConfig, out_dir=None, workers: int | None = None) -> SweepReport:
    cells_cfg = sweep_configs(cfg)
    workers = sweep_workers() if workers is None else workers
    workers = max(1, min(workers, len(cells_cfg)))
    if workers == 1:
        reports = [_run_cell(c) for c in cells_cfg]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(_run_cell, cells_cfg))
    cells = []
    for c, rep in zip(cells_cfg, reports):
        cell = {"name": c.name, **rep.classification}
        s = rep.series
        cell["lambda0"] = float(s.lam[0])
        cell["lambda_tail_min"] = float(np.min(s.lam[window_mask(s.t, c.fit_window)]))
        if c.mode == "pure_advection" and c.nu > 1:
            floor = cell["lambda0"] * math.exp(-1.0 / (float(c.nu) - 1.0))
            cell["lambda_floor"] = floor
            cell["floor_holds"] = cell["lambda_tail_min"] >= floor
        cell["verdicts"] = [v.status for v in rep.verdicts]
        cells.append(cell)
    sweep = SweepReport(cells, reports, cfg.to_json())
    target = out_dir if out_dir is not None else cfg.output_dir
    if target is not None:
        target = Path(target)
        for c, rep in zip(cells_cfg, reports):
            write_artifacts(rep, target / c.name)
        atomic_write_text(target / "chart.json", json.dumps(sweep.to_json(), indent=2, sort_keys=True))
        atomic_write_text(target / "chart.txt", sweep.table() + "\n")
    return sweep


# ---------------------------------------------------------------- output


def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(columns: dict[str, np.ndarray]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    names = list(columns)
    w.writerow(names)
    for row in zip(*(np.asarray(columns[k], float) for k in names)):
        w.writerow(["%.17g" % x for x in row])
    return buf.getvalue()


def series_csv_text(series: NormSeries) -> str:
    return _csv_text(series.columns())


def plot_data_columns(report: Report) -> dict[str, np.ndarray]:
    s = report.series
    cols = {"t": s.t}
    allc = s.columns()
    for v in report.verdicts:
        if v.curve is None:
            continue
        curve = report.curves.get(v.bound)
        if curve is None:
            continue
        obs = QUANTITY_COLUMN[curve.quantity]
        cols[obs] = allc[obs]
        fitted = curve.with_constant(v.C) if v.C is not None else curve
        cols[f"curve_{v.bound}"] = fitted(s.t)
    if "lambda" not in cols:
        cols["lambda"] = s.lam
    return cols


def write_artifacts(report: Report, out_dir: str | os.PathLike) -> dict[str, Path]:
    out = Path(out_dir)
    paths = {
        "series": out / "series.csv",
        "report": out / "report.json",
        "plot_data": out / "plot_data.csv",
    }
    atomic_write_text(paths["series"], series_csv_text(report.series))
    atomic_write_text(
        paths["report"], json.dumps(report.to_json(), indent=2, sort_keys=True, default=str) + "\n"
    )
    atomic_write_text(paths["plot_data"], _csv_text(plot_data_columns(report)))
    return paths


def read_series_csv(path: str | os.PathLike) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path} is empty")
    header, body = rows[0], rows[1:]
    data = np.array([[float(x) for x in r] for r in body]) if body else np.zeros((0, len(header)))
    return {name: data[:, i] for i, name in enumerate(header)}


# ---------------------------------------------------------------- decay character


@dataclass
class DecayReport:
    family: str
    analytic: float
    estimate: float
    stderr: float
    window: tuple[float, float]
    tolerance: float
    flags: list[str]

    @property
    def ok(self) -> bool:
        return abs(self.estimate - self.analytic) <= self.tolerance

    def to_json(self) -> dict:
        return {**asdict(self), "ok": self.ok}


def decay_window_top(spec: InitialDataSpec) -> float:
    if spec.family == "fourier_power_law":
        return spec.cutoff / 2
    return 0.25 / spec.sigma


def decay_character_report(cfg: ExperimentConfig, tol: float = 0.05) -> DecayReport:
    f = sample_initial_data(cfg.initial, cfg.grid)
    top = cfg.decay_delta_max or decay_window_top(cfg.initial)
    est = estimate_decay_character(shell_profile(f, default_window(f, top)))
    return DecayReport(
        cfg.initial.family, analytic_decay_character(cfg.initial), est.r_star, est.stderr,
        est.window, tol, est.flags,
    )
