"""Evaluable bound curves, validity gates and the long-time regime chart.

Every curve has the shape

    C * kappa^kappa_power * (1+t)^poly_exponent * exp(exp_sign * G(t; nu)),

where G(t; nu) = int_0^t (1+s)^-nu ds.  Unknown constants are folded into C,
which the harness fits on the tail of a run, so verdicts only ever depend on
exponents and shapes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .fields import as_fraction

QUANTITIES = ("theta_l2", "T_l2", "eta_l2", "grad_l2", "invgrad_l2", "lambda")
EQUATIONS = ("pure_advection", "advection_diffusion", "pure_diffusion")

# magnitude thresholds used to read a class off a curve evaluated at large t
LIMIT_PROBE_TIME = 1e8
LIMIT_RATIO = 1e3


def accumulated_decay(t, nu) -> np.ndarray | float:
    """G(t; nu) = int_0^t (1+s)^-nu ds, with nu = 1 dispatched exactly."""
    nu = as_fraction(nu)
    tt = np.asarray(t, float)
    if np.any(tt < 0):
        raise ValueError("t must be nonnegative")
    if nu < 0:
        raise ValueError("nu must be nonnegative")
    if nu == 1:
        out = np.log1p(tt)
    else:
        q = 1.0 - float(nu)
        out = np.expm1(q * np.log1p(tt)) / q
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class BoundParams:
    d: int
    r_star: float
    kappa: float
    alpha: Fraction = Fraction(0)
    nu: Fraction = Fraction(0)
    m: Fraction | None = None
    C: float = 1.0

    def __post_init__(self):
        if self.d not in (2, 3):
            raise ValueError("d must be 2 or 3")
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")
        if not self.C > 0:
            raise ValueError("C must be positive")
        object.__setattr__(self, "alpha", as_fraction(self.alpha))
        object.__setattr__(self, "nu", as_fraction(self.nu))
        m = Fraction(self.d + 2) if self.m is None else as_fraction(self.m)
        object.__setattr__(self, "m", m)

    @property
    def n(self) -> float:
        return max(self.d / 4 + self.r_star / 2, float(self.m))


@dataclass(frozen=True)
class Gate:
    name: str
    value: float
    op: str
    threshold: float

    @property
    def passed(self) -> bool:
        v, th = self.value, self.threshold
        return {">": v > th, ">=": v >= th, "<": v < th, "<=": v <= th}[self.op]

    @property
    def margin(self) -> float:
        """Signed distance to the threshold, positive when the gate passes."""
        return self.value - self.threshold if self.op in (">", ">=") else self.threshold - self.value

    def to_json(self) -> dict:
        return {
            "gate": self.name,
            "value": self.value,
            "op": self.op,
            "threshold": self.threshold,
            "passed": self.passed,
            "margin": self.margin,
        }


@dataclass(frozen=True)
class BoundCurve:
    name: str
    direction: str  # "lower" | "upper"
    quantity: str
    poly_exponent: float
    exp_sign: int = 0
    nu: Fraction = Fraction(0)
    kappa: float = 1.0
    kappa_power: float = 0.0
    C: float = 1.0
    gates: tuple[Gate, ...] = ()
    regime: str = ""
    t_min: float = 0.0
    notes: tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.direction not in ("lower", "upper"):
            raise ValueError(f"bad direction {self.direction!r}")
        if self.quantity not in QUANTITIES:
            raise ValueError(f"bad quantity {self.quantity!r}")

    @property
    def applicable(self) -> bool:
        return all(g.passed for g in self.gates)

    def shape(self, t) -> np.ndarray:
        """(1+t)^p exp(sign G): the t-dependence without constants."""
        return np.exp(self.log_shape(t))

    def log_shape(self, t) -> np.ndarray:
        t = np.asarray(t, float)
        out = self.poly_exponent * np.log1p(t)
        if self.exp_sign:
            out = out + self.exp_sign * accumulated_decay(t, self.nu)
        return out

    def __call__(self, t):
        return self.C * self.kappa**self.kappa_power * self.shape(t)

    def with_constant(self, C: float) -> "BoundCurve":
        return BoundCurve(**{**self.__dict__, "C": float(C)})

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "direction": self.direction,
            "quantity": self.quantity,
            "regime": self.regime,
            "poly_exponent": self.poly_exponent,
            "exp_sign": self.exp_sign,
            "nu": str(self.nu),
            "kappa_power": self.kappa_power,
            "C": self.C,
            "t_min": self.t_min,
            "applicable": self.applicable,
            "gates": [g.to_json() for g in self.gates],
            "notes": list(self.notes),
        }


# ---------------------------------------------------------------- gates


def _gate_admissible(p: BoundParams) -> Gate:
    return Gate("r_star > -d/2", p.r_star, ">", -p.d / 2)


def _gate_alpha_upper(p: BoundParams) -> Gate:
    return Gate("alpha > 1/2 - d/4", float(p.alpha), ">", 0.5 - p.d / 4)


def _gates_theta_lower(p: BoundParams) -> list[Gate]:
    return [
        _gate_admissible(p),
        Gate("r_star < 1", p.r_star, "<", 1.0),
        Gate("alpha > r_star/2 + 1/2", float(p.alpha), ">", p.r_star / 2 + 0.5),
        Gate("m >= d + 2", float(p.m), ">=", p.d + 2.0),
    ]


def _gates_eta(p: BoundParams) -> list[Gate]:
    th = max(0.5 - p.d / 4, 1.0 - p.d / 4 - p.r_star / 2)
    return [_gate_admissible(p), Gate("alpha > max(1/2 - d/4, 1 - d/4 - r_star/2)", float(p.alpha), ">", th)]


def _gates_hm1(p: BoundParams) -> list[Gate]:
    return _gates_theta_lower(p) + [Gate("r_star > 1 - d/2", p.r_star, ">", 1.0 - p.d / 2)]


GATE_SETS = {
    "heat_lower": lambda p: [_gate_admissible(p)],
    "theta_upper": lambda p: [_gate_admissible(p), _gate_alpha_upper(p)],
    "theta_lower": _gates_theta_lower,
    "eta_upper": _gates_eta,
    "grad_upper": lambda p: [_gate_admissible(p), _gate_alpha_upper(p)],
    "hm1_lower": _gates_hm1,
    "lambda_lower": _gates_hm1,
}


@dataclass
class AssumptionVerdict:
    bound: str
    gates: list[Gate]

    @property
    def passed(self) -> bool:
        return all(g.passed for g in self.gates)

    @property
    def violated(self) -> list[str]:
        return [g.name for g in self.gates if not g.passed]

    def to_json(self) -> dict:
        return {"bound": self.bound, "passed": self.passed, "gates": [g.to_json() for g in self.gates]}


def assumption_check(p: BoundParams, bound: str) -> AssumptionVerdict:
    try:
        gates = GATE_SETS[bound](p)
    except KeyError:
        raise ValueError(f"unknown bound {bound!r}; expected one of {sorted(GATE_SETS)}") from None
    return AssumptionVerdict(bound, gates)


# ---------------------------------------------------------------- curves


def heat_lower_curve(p: BoundParams) -> BoundCurve:
    e = p.d / 4 + p.r_star / 2
    return BoundCurve(
        "heat_lower", "lower", "T_l2", -e,
        kappa=p.kappa, kappa_power=-e, C=p.C,
        gates=tuple(GATE_SETS["heat_lower"](p)), regime="heat",
    )


def theta_upper_curve(p: BoundParams) -> BoundCurve:
    e = min(p.d / 4 + p.r_star / 2, p.d / 4 + 0.5)
    return BoundCurve(
        "theta_upper", "upper", "theta_l2", -e,
        kappa=p.kappa, kappa_power=-max(p.d / 4 + p.r_star / 2, float(p.m)), C=p.C,
        gates=tuple(GATE_SETS["theta_upper"](p)),
        regime="capped" if p.r_star > 1 else "decay_character",
    )


def theorem1_time_threshold(p: BoundParams) -> tuple[str, float]:
    """Branch label and the smallest t from which the lower bound on |theta| holds."""
    r = p.r_star
    if r >= 1:
        raise ValueError("no lower bound available for r* >= 1")
    a = float(p.alpha)
    if a <= r / 2 + 0.5:
        raise ValueError(f"alpha = {a} must exceed r*/2 + 1/2 = {r / 2 + 0.5}")
    log_K = (float(p.m) + 0.5 - p.d / 4 - r) * math.log(p.kappa)
    if a >= 1.5 - r / 2:
        branch, e = "A", r - 1.0
    else:
        branch, e = "B", r / 2 - a + 0.5
    log_t = log_K / e
    if log_t > math.log(np.finfo(float).max):
        # exponent near zero: the inequality never switches on in double range
        return branch, math.inf
    return branch, max(math.exp(log_t) - 1.0, 0.0)


def theta_lower_curve(p: BoundParams) -> BoundCurve:
    e = p.d / 4 + p.r_star / 2
    gates = tuple(GATE_SETS["theta_lower"](p))
    branch, t_min = "", math.inf
    if all(g.passed for g in gates):
        branch, t_min = theorem1_time_threshold(p)
    return BoundCurve(
        "theta_lower", "lower", "theta_l2", -e,
        kappa=p.kappa, kappa_power=-e, C=p.C, gates=gates,
        regime=f"branch_{branch}" if branch else "unavailable", t_min=t_min,
    )


def eta_upper_curve(p: BoundParams) -> BoundCurve:
    """Bound on |eta|_2 (the square root of the bound on |eta|_2^2)."""
    d, r, a = p.d, p.r_star, float(p.alpha)
    if r <= 1:
        q = min(d / 2 + 1, d / 2 + r / 2 + a - 0.5)
    else:
        q = min(d / 2 + 1, d / 2 + a)
    return BoundCurve(
        "eta_upper", "upper", "eta_l2", -q / 2,
        kappa=p.kappa, kappa_power=-(float(p.m) + d / 4 + 0.5) / 2, C=p.C,
        gates=tuple(GATE_SETS["eta_upper"](p)),
        regime="r_star<=1" if r <= 1 else "r_star>1",
    )


def _nu_regime(nu: Fraction) -> str:
    if nu > 1:
        return "nu>1"
    if nu == 1:
        return "nu=1"
    return "nu<1"


def grad_upper_curve(p: BoundParams) -> BoundCurve:
    d, r, nu = p.d, p.r_star, p.nu
    regime = _nu_regime(nu)
    if regime == "nu<1":
        e = min(d / 4 + r / 2 + 1.5, d / 4 + 2)
    else:
        e = min(d / 4 + r / 2 + 0.5, d / 4 + 1)
    return BoundCurve(
        "grad_upper", "upper", "grad_l2", -e,
        exp_sign=0 if regime == "nu=1" else 1, nu=nu,
        kappa=p.kappa, kappa_power=-p.n - 0.5, C=p.C,
        gates=tuple(GATE_SETS["grad_upper"](p)), regime=regime,
    )


def hm1_lower_curve(p: BoundParams) -> BoundCurve:
    d, r, nu = p.d, p.r_star, p.nu
    regime = _nu_regime(nu)
    e = -d / 4 - r / 2 + (1.5 if regime == "nu<1" else 0.5)
    return BoundCurve(
        "hm1_lower", "lower", "invgrad_l2", e,
        exp_sign=0 if regime == "nu=1" else -1, nu=nu,
        kappa=p.kappa, kappa_power=-d / 2 - r + float(p.m) + 0.5, C=p.C,
        gates=tuple(GATE_SETS["hm1_lower"](p)), regime=regime,
        notes=("kappa power is reported only; it never enters a verdict",),
    )


def lambda_lower_curve(p: BoundParams) -> BoundCurve:
    """lambda >= |theta| / |grad theta|, combined with the lower bound on |theta|
    and the upper bound on |grad theta|."""
    regime = _nu_regime(p.nu)
    e = 1.5 if regime == "nu<1" else 0.5
    return BoundCurve(
        "lambda_lower", "lower", "lambda", e,
        exp_sign=0 if regime == "nu=1" else -1, nu=p.nu,
        kappa=p.kappa, kappa_power=p.d / 4 + p.r_star / 2 - float(p.m) - 0.5, C=p.C,
        gates=tuple(GATE_SETS["lambda_lower"](p)), regime=regime,
    )


def pure_advection_lambda_curve(nu, C0: float) -> BoundCurve:
    nu = as_fraction(nu)
    if not C0 > 0:
        raise ValueError("C0 must be positive")
    if nu == 1:
        return BoundCurve("pure_advection_lambda", "lower", "lambda", -1.0, C=C0, nu=nu, regime="nu=1")
    return BoundCurve(
        "pure_advection_lambda", "lower", "lambda", 0.0, exp_sign=-1, nu=nu, C=C0,
        regime=_nu_regime(nu),
    )


def pure_diffusion_lambda_curve(C: float) -> BoundCurve:
    return BoundCurve("pure_diffusion_lambda", "lower", "lambda", 0.5, C=C, regime="heat")


def chart_curve(equation: str, nu) -> BoundCurve:
    """Representative lambda lower curve (C = 1) for one chart cell."""
    nu = as_fraction(nu)
    if equation == "pure_advection":
        return pure_advection_lambda_curve(nu, 1.0)
    if equation == "pure_diffusion":
        return pure_diffusion_lambda_curve(1.0)
    if equation == "advection_diffusion":
        # gates are irrelevant here; a generic admissible parameter set
        return lambda_lower_curve(BoundParams(d=2, r_star=0.5, kappa=1.0, alpha=2, nu=nu))
    raise ValueError(f"unknown equation {equation!r}; expected one of {EQUATIONS}")


# ---------------------------------------------------------------- chart


@dataclass(frozen=True)
class AsymptoticClass:
    label: str  # "zero" | "finite" | "infinity"
    value: float | None = None

    def __str__(self) -> str:
        return f"finite({self.value:.6g})" if self.label == "finite" else self.label


def asymptotic_class(equation: str, nu) -> AsymptoticClass:
    nu = as_fraction(nu)
    if nu < 0:
        raise ValueError("nu must be nonnegative")
    if equation == "pure_diffusion":
        return AsymptoticClass("infinity")
    if equation == "advection_diffusion":
        return AsymptoticClass("zero" if nu < 1 else "infinity")
    if equation == "pure_advection":
        if nu <= 1:
            return AsymptoticClass("zero")
        return AsymptoticClass("finite", math.exp(-1.0 / (float(nu) - 1.0)))
    raise ValueError(f"unknown equation {equation!r}; expected one of {EQUATIONS}")


def curve_limit_class(curve: BoundCurve, t: float = LIMIT_PROBE_TIME, ratio: float = LIMIT_RATIO) -> AsymptoticClass:
    """Read a class off the curve's shape at a large time, relative to t = 0."""
    g = float(curve.shape(t) / curve.shape(0.0))
    if g >= ratio:
        return AsymptoticClass("infinity")
    if g <= 1.0 / ratio:
        return AsymptoticClass("zero")
    return AsymptoticClass("finite", g)
