"""Lumped thermal model of a vanadium redox flow battery stack and its two tanks.

State: stack electrolyte temperature ``t_stack``, positive/negative tank
temperatures ``t_pos``/``t_neg`` (all degC) and state of charge ``soc``.
Heat enters the stack as Joule heat I^2 R plus the reversible entropic term
I T dE/dT, is carried to the tanks by the circulating electrolyte, and the
tanks exchange heat with the ambient through U*A.

Internal units are SI. Volumes are stored in m^3 and flow rates converted from
L/min to m^3/s once, at the boundary.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import NamedTuple

from .datasets import Mode, ScenarioMeta, Source, TimeSeriesDataset
from .errors import CalibrationError, ParameterError, SimulationError

KELVIN = 273.15
LITRE = 1e-3  # m^3
SOC_MIN, SOC_MAX = 0.01, 0.99

# ratings of the 1 kW / 6 kWh reference plant
RATED_CURRENT_A = 60.0
FLOW_RANGE_L_MIN = (1.0, 18.0)


def l_min_to_m3_s(flow_l_min: float) -> float:
    return flow_l_min * LITRE / 60.0


@dataclass(frozen=True)
class VrfbParams:
    """Physical constants and plant parameters (SI storage).

    Use :meth:`from_dict` to build from a config block where volumes are
    given in litres.
    """

    cp: float = 3.2  # J g^-1 K^-1
    rho: float = 1.35e6  # g m^-3
    v_stack: float = 7.0 * LITRE
    v_pos: float = 150.0 * LITRE
    v_neg: float = 150.0 * LITRE
    a_pos: float = 1.8  # m^2
    a_neg: float = 1.8
    u_pos: float = 5.0  # W m^-2 K^-1
    u_neg: float = 5.0
    r_charge: float = 0.25  # ohm
    r_discharge: float = 0.25
    de_dt: float = 0.0  # V K^-1
    n_cells: int = 20
    e0: float = 1.40  # V per cell
    r_sd: float = 0.0  # ohm
    i_diff: float = 0.0  # A
    faraday: float = 96485.33212
    r_gas: float = 8.3144
    t_ambient: float = 30.0  # degC
    capacity_ah: float = 6000.0 / 26.0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        positive = ("cp", "rho", "v_stack", "v_pos", "v_neg", "a_pos", "a_neg",
                    "capacity_ah", "faraday", "r_gas")
        non_negative = ("u_pos", "u_neg", "r_charge", "r_discharge", "r_sd", "i_diff")
        for name in positive + non_negative + ("de_dt", "e0", "t_ambient"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ParameterError(f"{name} must be a finite number, got {value!r}")
        for name in positive:
            if getattr(self, name) <= 0:
                raise ParameterError(f"{name} must be > 0, got {getattr(self, name)}")
        for name in non_negative:
            if getattr(self, name) < 0:
                raise ParameterError(f"{name} must be >= 0, got {getattr(self, name)}")
        if isinstance(self.n_cells, bool) or not isinstance(self.n_cells, int) or self.n_cells < 1:
            raise ParameterError(f"n_cells must be an integer >= 1, got {self.n_cells!r}")

    @property
    def heat_capacity_density(self) -> float:
        """cp * rho in J m^-3 K^-1."""
        return self.cp * self.rho

    def resistance(self, mode: Mode) -> float:
        return self.r_charge if mode is Mode.CHARGING else self.r_discharge

    def with_resistance(self, mode: Mode, value: float) -> VrfbParams:
        if mode is Mode.CHARGING:
            return replace(self, r_charge=value)
        return replace(self, r_discharge=value)

    @classmethod
    def from_dict(cls, block: dict) -> VrfbParams:
        """Build from a config block; ``*_l`` keys are litres."""
        block = dict(block)
        kwargs = {}
        for key in ("v_stack", "v_pos", "v_neg"):
            if f"{key}_l" in block:
                kwargs[key] = float(block.pop(f"{key}_l")) * LITRE
        known = set(cls.__dataclass_fields__)
        unknown = set(block) - known
        if unknown:
            raise ParameterError(f"unknown parameter(s): {sorted(unknown)}")
        kwargs.update(block)
        return cls(**kwargs)

    def to_dict(self) -> dict:
        out = {}
        for name in self.__dataclass_fields__:
            value = getattr(self, name)
            if name in ("v_stack", "v_pos", "v_neg"):
                out[f"{name}_l"] = value / LITRE
            else:
                out[name] = value
        return out


@dataclass(frozen=True)
class OperatingProfile:
    mode: Mode
    current: float  # A, magnitude
    flow_rate: float  # L min^-1
    duration: float  # s
    soc_initial: float = 0.5
    t_initial: float = 30.0  # degC, stack and both tanks

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if not (self.current >= 0 and math.isfinite(self.current)):
            raise ParameterError(f"current must be >= 0, got {self.current}")
        if not (self.flow_rate >= 0 and math.isfinite(self.flow_rate)):
            raise ParameterError(f"flow_rate must be >= 0, got {self.flow_rate}")
        if not (self.duration > 0 and math.isfinite(self.duration)):
            raise ParameterError(f"duration must be > 0, got {self.duration}")
        if not 0 < self.soc_initial < 1:
            raise ParameterError(f"soc_initial must lie in (0, 1), got {self.soc_initial}")
        if not math.isfinite(self.t_initial):
            raise ParameterError("t_initial must be finite")
        if self.current > RATED_CURRENT_A:
            warnings.warn(f"current {self.current} A exceeds the {RATED_CURRENT_A:g} A stack rating",
                          stacklevel=2)
        lo, hi = FLOW_RANGE_L_MIN
        if self.flow_rate and not lo <= self.flow_rate <= hi:
            warnings.warn(f"flow rate {self.flow_rate} L/min outside the rated {lo:g}-{hi:g} L/min",
                          stacklevel=2)

    @property
    def flow_m3_s(self) -> float:
        return l_min_to_m3_s(self.flow_rate)


@dataclass(frozen=True)
class ThermalState:
    t: float
    t_stack: float
    t_pos: float
    t_neg: float
    soc: float

    @classmethod
    def initial(cls, profile: OperatingProfile) -> ThermalState:
        return cls(0.0, profile.t_initial, profile.t_initial, profile.t_initial,
                   _clamp_soc(profile.soc_initial))


class Derivatives(NamedTuple):
    d_stack: float
    d_pos: float
    d_neg: float
    d_soc: float


def _clamp_soc(soc: float) -> float:
    return min(max(soc, SOC_MIN), SOC_MAX)


def nernst_ocv(params: VrfbParams, soc: float, temperature_k: float) -> float:
    """Open-circuit stack voltage, n * (E0 + 2RT/F ln(soc/(1-soc)) - I_d R_sd)."""
    if not 0 < soc < 1:
        raise ValueError(f"soc must lie strictly inside (0, 1), got {soc}")
    if temperature_k <= 0:
        raise ValueError(f"temperature must be positive kelvin, got {temperature_k}")
    log_term = 2.0 * params.r_gas * temperature_k / params.faraday * math.log(soc / (1.0 - soc))
    return params.n_cells * (params.e0 + log_term - params.i_diff * params.r_sd)


class _Coefficients(NamedTuple):
    """Per-run constants folded out of the right-hand side."""

    flow_stack: float  # Q / V_s
    flow_pos: float  # Q / V+
    flow_neg: float
    loss_pos: float  # U+ A+ / (cp rho V+)
    loss_neg: float
    joule: float  # I^2 R / (cp rho V_s)
    entropic: float  # I dE/dT / (cp rho V_s), multiplies T_s in kelvin
    ambient: float
    soc_rate: float  # signed, per second


def _coefficients(params: VrfbParams, profile: OperatingProfile) -> _Coefficients:
    q = profile.flow_m3_s
    c = params.heat_capacity_density
    current = profile.current
    sign = 1.0 if profile.mode is Mode.CHARGING else -1.0
    return _Coefficients(
        flow_stack=q / params.v_stack,
        flow_pos=q / params.v_pos,
        flow_neg=q / params.v_neg,
        loss_pos=params.u_pos * params.a_pos / (c * params.v_pos),
        loss_neg=params.u_neg * params.a_neg / (c * params.v_neg),
        joule=current * current * params.resistance(profile.mode) / (c * params.v_stack),
        entropic=current * params.de_dt / (c * params.v_stack),
        ambient=params.t_ambient,
        soc_rate=sign * current / (params.capacity_ah * 3600.0),
    )


def _rhs(k: _Coefficients, ts: float, tp: float, tn: float) -> tuple[float, float, float]:
    d_s = k.flow_stack * ((tp - ts) + (tn - ts)) + k.joule + k.entropic * (ts + KELVIN)
    d_p = k.flow_pos * (ts - tp) + k.loss_pos * (k.ambient - tp)
    d_n = k.flow_neg * (ts - tn) + k.loss_neg * (k.ambient - tn)
    return d_s, d_p, d_n


def ode_rhs(state: ThermalState, params: VrfbParams, profile: OperatingProfile) -> Derivatives:
    """Time derivatives of (t_stack, t_pos, t_neg, soc) in K/s and 1/s."""
    k = _coefficients(params, profile)
    d_s, d_p, d_n = _rhs(k, state.t_stack, state.t_pos, state.t_neg)
    return Derivatives(d_s, d_p, d_n, k.soc_rate)


@dataclass(frozen=True)
class SimulationResult:
    dataset: TimeSeriesDataset
    final_state: ThermalState
    tank_pos: tuple = field(repr=False, default=())
    tank_neg: tuple = field(repr=False, default=())

    @property
    def mean_stack_temp(self) -> float:
        return float(self.dataset.temperature.mean())

    @property
    def max_stack_temp(self) -> float:
        return float(self.dataset.temperature.max())


def simulate_cycle(params: VrfbParams, profile: OperatingProfile, dt: float = 1.0, *,
                   sample_every: int = 1,
                   initial_state: ThermalState | None = None) -> SimulationResult:
    """Integrate the coupled stack/tank balances with fixed-step classical RK4.

    Emits ``(t, t_stack)`` at t=0 and after every ``sample_every``-th step. The
    final step is shortened so the run ends exactly at ``profile.duration``.
    """
    params.validate()
    if not (dt > 0 and math.isfinite(dt)):
        raise SimulationError(f"dt must be > 0, got {dt}")
    if dt > profile.duration:
        raise SimulationError(f"dt={dt} exceeds duration={profile.duration}")
    if sample_every < 1:
        raise SimulationError("sample_every must be >= 1")

    k = _coefficients(params, profile)
    state = initial_state or ThermalState.initial(profile)
    t, ts, tp, tn, soc = state.t, state.t_stack, state.t_pos, state.t_neg, state.soc

    n_full = int(math.floor(profile.duration / dt + 1e-9))
    remainder = profile.duration - n_full * dt
    steps = [dt] * n_full
    if remainder > 1e-9 * dt:
        steps.append(remainder)

    times = [t]
    temps = [ts]
    pos = [tp]
    neg = [tn]
    for i, h in enumerate(steps, start=1):
        a1 = _rhs(k, ts, tp, tn)
        a2 = _rhs(k, ts + 0.5 * h * a1[0], tp + 0.5 * h * a1[1], tn + 0.5 * h * a1[2])
        a3 = _rhs(k, ts + 0.5 * h * a2[0], tp + 0.5 * h * a2[1], tn + 0.5 * h * a2[2])
        a4 = _rhs(k, ts + h * a3[0], tp + h * a3[1], tn + h * a3[2])
        ts += h / 6.0 * (a1[0] + 2.0 * a2[0] + 2.0 * a3[0] + a4[0])
        tp += h / 6.0 * (a1[1] + 2.0 * a2[1] + 2.0 * a3[1] + a4[1])
        tn += h / 6.0 * (a1[2] + 2.0 * a2[2] + 2.0 * a3[2] + a4[2])
        soc = _clamp_soc(soc + h * k.soc_rate)
        t = state.t + (i * dt if i <= n_full else profile.duration)
        if i % sample_every == 0 or i == len(steps):
            times.append(t)
            temps.append(ts)
            pos.append(tp)
            neg.append(tn)

    if not all(math.isfinite(v) for v in (ts, tp, tn)):
        raise SimulationError("integration produced non-finite temperatures")

    meta = ScenarioMeta(current_a=profile.current, mode=profile.mode,
                        flow_l_min=profile.flow_rate, ambient_c=params.t_ambient,
                        source=Source.SYNTHETIC, seed=None)
    dataset = TimeSeriesDataset.from_arrays(times, temps, meta)
    final = ThermalState(t, ts, tp, tn, soc)
    return SimulationResult(dataset, final, tuple(pos), tuple(neg))


def closed_form_temp(params: VrfbParams, profile: OperatingProfile, tank_temp: float,
                     elapsed: float) -> float:
    """Evaluate the simplified closed-form stack temperature literally as printed.

    T = (Q/V_s * t * T_tank + I^2 R t) / (cp rho (V_s + 2 Q t - I dE/dT / (cp rho)))

    The same expression serves charging and discharging; only (I, R) differ.
    Quantities are taken in the stored SI units (Q in m^3/s, t in s). The
    formula is not dimensionally consistent and is kept for traceability
    only; :func:`simulate_cycle` is the physical model.
    """
    if elapsed < 0:
        raise ValueError("elapsed must be >= 0")
    c = params.heat_capacity_density
    q = profile.flow_m3_s
    current = profile.current
    r = params.resistance(profile.mode)
    denominator = c * (params.v_stack + 2.0 * q * elapsed - current * params.de_dt / c)
    if denominator == 0:
        raise ZeroDivisionError("closed-form denominator evaluates to zero")
    first = (q / params.v_stack) * elapsed * tank_temp / denominator
    second = current * current * r * elapsed / denominator
    return first + second


def calibrate_resistance(params: VrfbParams, profile: OperatingProfile,
                         target_mean_temp: float, dt: float = 1.0, *,
                         r_max: float = 10.0, tol: float = 1e-4,
                         max_iter: int = 200) -> float:
    """Bisect the stack resistance of ``profile.mode`` so the simulated mean
    stack temperature hits ``target_mean_temp``.

    The mean is nondecreasing in R because I^2 R only ever adds heat.
    """

    def mean_at(r: float) -> float:
        return simulate_cycle(params.with_resistance(profile.mode, r), profile, dt).mean_stack_temp

    lo, hi = 0.0, float(r_max)
    m_lo = mean_at(lo)
    if abs(m_lo - target_mean_temp) <= tol:
        return lo
    if m_lo > target_mean_temp:
        raise CalibrationError(
            f"target {target_mean_temp} degC is below the zero-resistance mean {m_lo:.6f} degC",
            achieved_mean=m_lo)
    m_hi = mean_at(hi)
    if m_hi < target_mean_temp - tol:
        raise CalibrationError(
            f"target {target_mean_temp} degC not reached with R={hi} ohm (mean {m_hi:.6f} degC)",
            achieved_mean=m_hi)

    mid = hi
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        m_mid = mean_at(mid)
        if abs(m_mid - target_mean_temp) <= tol:
            return mid
        if m_mid < target_mean_temp:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-14 * max(1.0, hi):
            break
    return mid
