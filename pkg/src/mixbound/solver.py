"""Time integration of the advection-diffusion equation on the periodic box.

Diffusion is applied exactly through the heat multiplier exp(-kappa |xi|^2 dt);
the advective term -div(u theta) is evaluated pseudo-spectrally and advanced
with the integrating-factor (Lawson) form of classical RK4.  Alongside theta
the state carries T, the free heat evolution of the same initial data, so that
eta = theta - T is available by subtraction at any time.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.fft as sfft

from .fields import (
    InitialDataSpec,
    VelocityFieldSpec,
    analytic_decay_character,
    grad_velocity_sup,
    sample_initial_data,
    sample_velocity,
    velocity_gradient,
)
from .spectral import (
    Grid,
    SpectralField,
    TruncationSensitiveWarning,
    boundary_mass_fraction,
    grad_l2_norm,
    inv_grad_l2_norm,
    inverse,
    is_mean_free,
    l2_norm,
)

BOUNDARY_MASS_LIMIT = 1e-8
SERIES_COLUMNS = (
    "t",
    "l2",
    "grad_l2",
    "invgrad_l2",
    "lambda",
    "T_l2",
    "eta_l2",
    "boundary_mass",
    "pivot_margin",
    "energy_residual",
)


class CFLError(ValueError):
    def __init__(self, dt: float, dt_max: float):
        super().__init__(f"dt={dt:.6g} violates the CFL limit; max admissible dt is {dt_max:.6g}")
        self.dt = dt
        self.dt_max = dt_max


def heat_evolve(f: SpectralField, kappa: float, dt: float) -> SpectralField:
    if dt < 0:
        raise ValueError(f"negative time step {dt}")
    if kappa < 0:
        raise ValueError(f"negative diffusivity {kappa}")
    if kappa == 0 or dt == 0:
        return SpectralField(f.grid, f.coeffs.copy())
    return SpectralField(f.grid, f.coeffs * np.exp(-kappa * dt * f.grid.xi_sq))


# ---------------------------------------------------------------- advection


@dataclass(frozen=True)
class _Advection:
    grid: Grid
    spec: VelocityFieldSpec
    dealias: bool
    base: tuple[np.ndarray, ...]  # amplitude * V(x)
    sup: float

    def velocity(self, t: float) -> tuple[np.ndarray, ...]:
        s = (1.0 + t) ** (-float(self.spec.nu))
        return tuple(s * b for b in self.base)

    def sup_speed(self, t: float) -> float:
        return self.sup * (1.0 + t) ** (-float(self.spec.nu))

    def rate(self, coeffs: np.ndarray, t: float) -> np.ndarray:
        """Fourier coefficients of -div(u theta)."""
        g = self.grid
        cv = g.cell_volume
        coeffs = coeffs * (g.phase * g.dealias_mask if self.dealias else g.phase)
        theta = sfft.ifftn(coeffs, workers=-1).real / cv
        out = np.zeros(g.shape, dtype=complex)
        for xi, u in zip(g.frequencies(), self.velocity(t)):
            out -= 1j * xi * sfft.fftn(u * theta, workers=-1)
        out *= cv * (g.phase * g.dealias_mask if self.dealias else g.phase)
        return out


@lru_cache(maxsize=16)
def _advection(spec: VelocityFieldSpec, grid: Grid, dealias: bool) -> _Advection:
    comps = sample_velocity(spec, 0.0, grid).components
    if dealias:
        comps = tuple(
            sfft.ifftn(sfft.fftn(c, workers=-1) * grid.dealias_mask, workers=-1).real for c in comps
        )
    sup = float(np.sqrt(np.max(sum(c**2 for c in comps))))
    return _Advection(grid, spec, dealias, comps, sup)


# ---------------------------------------------------------------- state


@dataclass(frozen=True)
class SolverState:
    t: float
    theta: SpectralField
    T_heat: SpectralField
    kappa: float
    vel: VelocityFieldSpec | None = None

    @property
    def grid(self) -> Grid:
        return self.theta.grid

    @property
    def eta(self) -> SpectralField:
        return self.theta - self.T_heat

    @classmethod
    def initial(cls, theta0: SpectralField, kappa: float, vel=None, t: float = 0.0):
        if vel is not None and vel.d != theta0.grid.d:
            raise ValueError("velocity and grid dimensions differ")
        return cls(t, theta0, theta0, kappa, vel)


def max_stable_dt(s: SolverState, cfl: float = 0.5, dealias: bool = True) -> float:
    if s.vel is None:
        return math.inf
    speed = _advection(s.vel, s.grid, dealias).sup_speed(s.t)
    return cfl * s.grid.dx / max(speed, 1e-300)


def step_ad(s: SolverState, dt: float, *, cfl: float = 1.0, dealias: bool = True) -> SolverState:
    """Advance one integrating-factor RK4 step.

    Raises CFLError when dt exceeds cfl * dx / sup|u(t)|.
    """
    if dt < 0:
        raise ValueError(f"negative time step {dt}")
    T_new = heat_evolve(s.T_heat, s.kappa, dt)
    if s.vel is None:
        return SolverState(s.t + dt, heat_evolve(s.theta, s.kappa, dt), T_new, s.kappa, None)
    limit = max_stable_dt(s, cfl, dealias)
    if dt > limit * (1.0 + 1e-12):
        raise CFLError(dt, limit)

    adv = _advection(s.vel, s.grid, dealias)
    g = s.grid
    t, h = s.t, dt
    y = s.theta.coeffs
    if s.kappa > 0:
        e_half = np.exp(-0.5 * s.kappa * h * g.xi_sq)
        e_full = e_half * e_half
    else:
        e_half = e_full = 1.0
    k1 = adv.rate(y, t)
    k2 = adv.rate(e_half * (y + 0.5 * h * k1), t + 0.5 * h)
    k3 = adv.rate(e_half * y + 0.5 * h * k2, t + 0.5 * h)
    k4 = adv.rate(e_full * y + h * e_half * k3, t + h)
    y_new = e_full * y + (h / 6.0) * (e_full * k1 + 2.0 * e_half * (k2 + k3) + k4)
    return SolverState(t + h, SpectralField(g, y_new), T_new, s.kappa, s.vel)


def integrate(s: SolverState, t_end: float, dt: float, **kw) -> SolverState:
    """Fixed-step integration to t_end (last step shortened)."""
    n = max(1, math.ceil((t_end - s.t) / dt - 1e-9))
    h = (t_end - s.t) / n
    for _ in range(n):
        s = step_ad(s, h, **kw)
    return s


# ---------------------------------------------------------------- diagnostics


def pivot_inequality_margin(s: SolverState) -> float:
    """min over xi != 0 of (RHS - LHS)/RHS for |FT(u.grad theta)| <= |xi| |theta| |u|."""
    if s.vel is None:
        return 1.0
    g = s.grid
    u = sample_velocity(s.vel, s.t, g)
    u_norm = u.l2_norm()
    th_norm = l2_norm(s.theta)
    if u_norm == 0.0 or th_norm == 0.0:
        return 1.0
    theta = inverse(s.theta).values
    lhs = np.zeros(g.shape, dtype=complex)
    for xi, comp in zip(g.frequencies(), u.components):
        lhs += xi * sfft.fftn(comp * theta, workers=-1)
    lhs = np.abs(lhs) * g.cell_volume
    rhs = g.xi_abs * th_norm * u_norm
    nz = rhs > 0
    return float(np.min((rhs[nz] - lhs[nz]) / rhs[nz]))


def hm1_rate(theta: SpectralField, grad_u: np.ndarray) -> float:
    """2 int grad(Lap^-1 theta) . grad u . grad(Lap^-1 theta) dx.

    ``grad_u[..., i, j]`` holds d u_i / d x_j.
    """
    g = theta.grid
    phi_hat = -theta.coeffs * g.inv_xi_sq
    dphi = [inverse(SpectralField(g, 1j * xi * phi_hat)).values for xi in g.frequencies()]
    integrand = np.zeros(g.shape)
    for i in range(g.d):
        for j in range(g.d):
            integrand += grad_u[..., i, j] * dphi[i] * dphi[j]
    return 2.0 * float(np.sum(integrand)) * g.cell_volume


def _hm1_sq(f: SpectralField) -> float:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationSensitiveWarning)
        return inv_grad_l2_norm(f) ** 2


def hm1_advection_identity_residual(s: SolverState, ds: SolverState) -> float:
    """Mismatch between the finite-difference rate of |grad^-1 theta|^2 across two
    consecutive states and the trapezoidal average of its exact rate.

    The mismatch is scaled by 2 sup|grad u| |grad^-1 theta|^2, the largest rate
    the identity allows, so that instants where the rate itself crosses zero do
    not inflate the residual.
    """
    if s.kappa != 0 or ds.kappa != 0:
        raise ValueError("the inverse-gradient identity holds for pure advection only (kappa = 0)")
    if ds.t <= s.t:
        raise ValueError("second state must be later than the first")
    h0, h1 = _hm1_sq(s.theta), _hm1_sq(ds.theta)
    lhs = (h1 - h0) / (ds.t - s.t)
    if s.vel is None:
        return 0.0 if lhs == 0.0 else math.inf
    g = s.grid
    rhs = 0.5 * (
        hm1_rate(s.theta, velocity_gradient(s.vel, s.t, g))
        + hm1_rate(ds.theta, velocity_gradient(ds.vel, ds.t, g))
    )
    scale = 2.0 * grad_velocity_sup(s.vel, 0.5 * (s.t + ds.t)) * 0.5 * (h0 + h1)
    if scale == 0.0:
        return 0.0 if lhs == rhs else math.inf
    return abs(lhs - rhs) / scale


# ---------------------------------------------------------------- runs


def log_sample_times(t_final: float, count: int = 64, t_first: float = 1.0) -> np.ndarray:
    return np.geomspace(t_first, t_final, count)


@dataclass
class RunConfig:
    grid: Grid
    kappa: float
    initial: InitialDataSpec
    velocity: VelocityFieldSpec | None
    t_final: float
    sample_times: np.ndarray | None = None
    cfl: float = 0.5
    dealias: bool = True
    dt_max: float | None = 1.0

    def __post_init__(self):
        if not self.t_final > 0:
            raise ValueError("t_final must be positive")
        if self.kappa < 0:
            raise ValueError("kappa must be nonnegative")
        if not 0 < self.cfl <= 1:
            raise ValueError("cfl must lie in (0, 1]")
        if self.sample_times is None:
            self.sample_times = log_sample_times(self.t_final)
        ts = np.asarray(self.sample_times, float)
        if np.any(np.diff(ts) <= 0) or ts[0] < 0 or ts[-1] > self.t_final * (1 + 1e-12):
            raise ValueError("sample times must be strictly increasing within [0, t_final]")
        self.sample_times = ts


@dataclass
class NormSeries:
    t: np.ndarray
    l2: np.ndarray
    grad_l2: np.ndarray
    invgrad_l2: np.ndarray
    lam: np.ndarray
    T_l2: np.ndarray
    eta_l2: np.ndarray
    boundary_mass: np.ndarray
    pivot_margin: np.ndarray
    energy_residual: np.ndarray
    kappa: float = 0.0
    # l2^2 / (grad_l2 * invgrad_l2) with the zero mode removed; <= 1 exactly
    interp_ratio: np.ndarray | None = None
    flags: list[str] = field(default_factory=list)
    max_l2_increase: float = 0.0
    steps: int = 0

    def columns(self) -> dict[str, np.ndarray]:
        return {
            "t": self.t,
            "l2": self.l2,
            "grad_l2": self.grad_l2,
            "invgrad_l2": self.invgrad_l2,
            "lambda": self.lam,
            "T_l2": self.T_l2,
            "eta_l2": self.eta_l2,
            "boundary_mass": self.boundary_mass,
            "pivot_margin": self.pivot_margin,
            "energy_residual": self.energy_residual,
        }

    def __len__(self) -> int:
        return len(self.t)


def energy_identity_residual(series: NormSeries) -> np.ndarray:
    """Per-sample mismatch in d/dt |theta|^2 = -2 kappa |grad theta|^2.

    Relative to 2 kappa |grad theta|^2 when kappa > 0, absolute otherwise.
    The derivative is a second-order finite difference on the sample grid.
    """
    t = np.asarray(series.t, float)
    if len(t) < 3:
        raise ValueError("need at least 3 samples")
    e = np.asarray(series.l2, float) ** 2
    de = np.gradient(e, t, edge_order=2)
    diss = 2.0 * series.kappa * np.asarray(series.grad_l2, float) ** 2
    if series.kappa == 0:
        return np.abs(de)
    return np.abs(de + diss) / diss


def _record(s: SolverState, rows: dict, flags: set[str]) -> None:
    theta = s.theta
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationSensitiveWarning)
        hm1 = inv_grad_l2_norm(theta)
    if theta.grid.d == 2 and not is_mean_free(theta):
        flags.add("invgrad_truncation_sensitive")
    l2_nz = l2_norm(theta, exclude_zero_mode=True)
    grad = grad_l2_norm(theta)
    bm = boundary_mass_fraction(inverse(theta))
    if bm > BOUNDARY_MASS_LIMIT:
        flags.add("boundary_mass_breach")
    rows["t"].append(s.t)
    rows["l2"].append(l2_norm(theta))
    rows["grad_l2"].append(grad)
    rows["invgrad_l2"].append(hm1)
    rows["lambda"].append(hm1 / l2_nz if l2_nz > 0 else math.nan)
    rows["T_l2"].append(l2_norm(s.T_heat))
    rows["eta_l2"].append(l2_norm(s.eta))
    rows["boundary_mass"].append(bm)
    rows["pivot_margin"].append(pivot_inequality_margin(s))
    denom = grad * hm1
    rows["interp"].append(l2_nz**2 / denom if denom > 0 else 0.0)


def run(config: RunConfig) -> NormSeries:
    g = config.grid
    theta0 = sample_initial_data(config.initial, g)
    state = SolverState.initial(theta0, config.kappa, config.velocity)
    times = [float(t) for t in config.sample_times if t > 0]
    rows = {k: [] for k in SERIES_COLUMNS + ("interp",)}
    flags: set[str] = set()
    _record(state, rows, flags)

    worst_increase = 0.0
    steps = 0
    for target in times:
        if config.velocity is None:
            state = SolverState(
                target,
                heat_evolve(theta0, config.kappa, target),
                heat_evolve(theta0, config.kappa, target),
                config.kappa,
                None,
            )
        else:
            while state.t < target * (1.0 - 1e-13):
                dt = min(max_stable_dt(state, config.cfl, config.dealias), target - state.t)
                if config.dt_max is not None:
                    dt = min(dt, config.dt_max)
                before = l2_norm(state.theta)
                state = step_ad(state, dt, cfl=config.cfl, dealias=config.dealias)
                steps += 1
                if config.kappa > 0 and before > 0:
                    worst_increase = max(worst_increase, l2_norm(state.theta) / before - 1.0)
            state = SolverState(target, state.theta, state.T_heat, state.kappa, state.vel)
        _record(state, rows, flags)

    series = NormSeries(
        t=np.array(rows["t"]),
        l2=np.array(rows["l2"]),
        grad_l2=np.array(rows["grad_l2"]),
        invgrad_l2=np.array(rows["invgrad_l2"]),
        lam=np.array(rows["lambda"]),
        T_l2=np.array(rows["T_l2"]),
        eta_l2=np.array(rows["eta_l2"]),
        boundary_mass=np.array(rows["boundary_mass"]),
        pivot_margin=np.array(rows["pivot_margin"]),
        energy_residual=np.zeros(len(rows["t"])),
        kappa=config.kappa,
        interp_ratio=np.array(rows["interp"]),
        flags=sorted(flags),
        max_l2_increase=worst_increase,
        steps=steps,
    )
    series.energy_residual = energy_identity_residual(series)
    return series


# ---------------------------------------------------------------- heat-only diagnostics


@dataclass
class HeatDiagnostics:
    t: np.ndarray
    radius: np.ndarray
    low_mode: np.ndarray
    grad_sup: np.ndarray
    low_mode_slope: float
    grad_sup_slope: float
    low_mode_bound_exponent: float
    grad_sup_bound_exponent: float


def splitting_radius(kappa: float, t, beta: float):
    """R(t) = sqrt(beta / (2 kappa (1+t))), the Fourier-splitting ball radius."""
    return np.sqrt(beta / (2.0 * kappa * (1.0 + np.asarray(t, float))))


def heat_diagnostics(
    theta0: SpectralField,
    kappa: float,
    t,
    r_star: float = 0.0,
    beta: float | None = None,
) -> HeatDiagnostics:
    """Low-mode heat mass inside the splitting ball and sup |grad T| over time.

    ``beta`` defaults to d/2 + r* + 1, one unit above the smallest admissible
    splitting exponent.  Slopes are least-squares fits against log(1+t).
    """
    g = theta0.grid
    d = g.d
    if beta is None:
        beta = d / 2 + r_star + 1.0
    ts = np.atleast_1d(np.asarray(t, float))
    power = np.abs(theta0.coeffs) ** 2
    radius = splitting_radius(kappa, ts, beta)
    low, gsup = [], []
    for tt, rr in zip(ts, radius):
        inside = g.xi_abs <= rr
        damp = np.exp(-2.0 * kappa * tt * g.xi_sq[inside])
        low.append(float(np.sum(damp * power[inside])) * g.dxi**d)
        T = heat_evolve(theta0, kappa, tt)
        grads = []
        for xi in g.frequencies():
            grads.append(inverse(SpectralField(g, 1j * xi * T.coeffs)).values)
        gsup.append(float(np.sqrt(np.max(sum(c**2 for c in grads)))))
    low = np.array(low)
    gsup = np.array(gsup)
    lt = np.log1p(ts)
    if len(ts) >= 2:
        s_low = float(np.polyfit(lt, np.log(low), 1)[0])
        s_grad = float(np.polyfit(lt, np.log(gsup), 1)[0])
    else:
        s_low = s_grad = math.nan
    return HeatDiagnostics(
        t=ts,
        radius=radius,
        low_mode=low,
        grad_sup=gsup,
        low_mode_slope=s_low,
        grad_sup_slope=s_grad,
        low_mode_bound_exponent=-d / 2 - r_star,
        grad_sup_bound_exponent=-d / 4 - 0.5,
    )


def heat_diagnostics_for(spec: InitialDataSpec, grid: Grid, kappa: float, t) -> HeatDiagnostics:
    return heat_diagnostics(
        sample_initial_data(spec, grid), kappa, t, r_star=analytic_decay_character(spec)
    )
