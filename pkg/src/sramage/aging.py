"""Data-directed aging, recovery and stress-time conversion.

A cell that holds 0 drifts toward powering on as 1 and vice versa. The
margin shift follows a power law in absolute stress age,
``amplitude * dir * (t1**n - t0**n)``. ``dir = 2 * (0.5 - B)`` where ``B``
is the fraction of time the software keeps the bit at 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
from scipy import optimize

from .errors import ContractViolation
from .sram_model import (
    DEFAULT_K,
    DeviceModel,
    GenerativeParams,
    _STD_GRID,
    _STD_PDF,
    log_ndtr_pow,
)

HOURS_PER_YEAR = 24 * 365.25
DAYS_PER_YEAR = 365.25

# Change in portion strong 1 / strong 0 after five years holding all zeros.
FULL_BIAS_TARGET = (0.0856, -0.0964)
FULL_BIAS_YEARS = 5.0


@dataclass(frozen=True)
class AccelerationParams:
    alpha: float = 3.5
    n: float = 0.25
    e_aa: float = -0.02
    k_boltzmann: float = 8.62e-5
    v_nom: float = 3.3
    v_str: float = 4.75
    t_nom: float = 293.0
    t_str: float = 353.0

    def __post_init__(self):
        if min(self.v_nom, self.v_str) <= 0:
            raise ContractViolation("voltages must be positive")
        if min(self.t_nom, self.t_str) <= 0:
            raise ContractViolation("temperatures must be positive")
        if self.n == 0:
            raise ContractViolation("time exponent n must be nonzero")
        if self.k_boltzmann <= 0:
            raise ContractViolation("k_boltzmann must be positive")


def acceleration_factor(p: AccelerationParams) -> float:
    voltage = (p.v_str / p.v_nom) ** (p.alpha / p.n)
    thermal = math.exp((p.e_aa / p.k_boltzmann) * (1.0 / p.t_str - 1.0 / p.t_nom) / p.n)
    return voltage * thermal


def effective_age(wall_hours: float, p: AccelerationParams) -> float:
    """Stress hours converted to nominal-condition years."""
    if wall_hours < 0:
        raise ContractViolation("wall_hours must be non-negative")
    return wall_hours * acceleration_factor(p) / HOURS_PER_YEAR


@dataclass(frozen=True)
class AgingConfig:
    amplitude: float = 0.0
    time_exponent: float = 0.25
    permanent_fraction: float = 0.8
    recovery_time_constant: float = 1.0  # days
    recovery_saturation: float = 42.0  # days

    def __post_init__(self):
        if self.amplitude < 0:
            raise ContractViolation("amplitude must be non-negative")
        if not 0 <= self.permanent_fraction <= 1:
            raise ContractViolation("permanent_fraction must lie in [0, 1]")
        if self.time_exponent <= 0:
            raise ContractViolation("time_exponent must be positive")
        if self.recovery_time_constant <= 0 or self.recovery_saturation <= 0:
            raise ContractViolation("recovery constants must be positive")


@dataclass(frozen=True)
class AgingSchedule:
    checkpoints: tuple  # effective years

    def __post_init__(self):
        cp = tuple(float(c) for c in self.checkpoints)
        if any(c < 0 for c in cp):
            raise ContractViolation("checkpoints must be non-negative")
        if any(b <= a for a, b in zip(cp, cp[1:])):
            raise ContractViolation("checkpoints must be strictly increasing")
        object.__setattr__(self, "checkpoints", cp)

    def __len__(self):
        return len(self.checkpoints)


def default_schedule(
    p: Optional[AccelerationParams] = None,
    interval_wall_hours: float = 12.0,
    n_intervals: int = 13,
) -> AgingSchedule:
    """Readouts at 30 min, 1 h, 1 day, 1 week, 1 month, then every stress interval.

    The early points are already effective time; later points are
    ``k * interval_wall_hours`` of stress (12 h at AF 280 is about 4.6 months).
    """
    p = p or AccelerationParams()
    early = [0.5 / HOURS_PER_YEAR, 1.0 / HOURS_PER_YEAR, 1.0 / DAYS_PER_YEAR, 7.0 / DAYS_PER_YEAR, 1.0 / 12.0]
    late = [effective_age(k * interval_wall_hours, p) for k in range(1, n_intervals + 1)]
    return AgingSchedule(tuple(sorted(set(early + late))))


def aging_direction(bias: np.ndarray, written: np.ndarray) -> np.ndarray:
    """Per-cell direction in [-1, 1]; unwritten cells get exactly 0."""
    d = 2.0 * (0.5 - np.asarray(bias, dtype=float))
    return np.where(np.asarray(written, dtype=bool), d, 0.0)


def apply_aging(d: DeviceModel, profile, effective_years: float, cfg: AgingConfig) -> DeviceModel:
    """Age ``d`` for ``effective_years`` more years under ``profile``.

    ``profile`` is anything with ``bias`` and ``written`` arrays covering
    every cell (a :class:`~sramage.swbias.SoftwareBiasProfile`).
    """
    if effective_years < 0:
        raise ContractViolation("effective_years must be non-negative")
    if effective_years == 0:
        return d
    bias = np.asarray(profile.bias)
    if bias.shape != (d.n_cells,):
        raise ContractViolation(f"profile covers {bias.size} bits, device has {d.n_cells} cells")
    direction = aging_direction(bias, profile.written)
    t0 = d.age_years
    t1 = t0 + effective_years
    n = cfg.time_exponent
    shift = cfg.amplitude * direction * (t1**n - t0**n)
    rho = cfg.permanent_fraction
    return replace(
        d,
        permanent=d.permanent + rho * shift,
        reversible=d.reversible + (1.0 - rho) * shift,
        age_years=t1,
    )


def recovery_factor(rest_days: float, cfg: AgingConfig) -> float:
    """Fraction of the reversible shift left after ``rest_days`` unpowered."""
    tau = cfg.recovery_time_constant
    frac = math.log1p(rest_days / tau) / math.log1p(cfg.recovery_saturation / tau)
    return max(0.0, 1.0 - frac)


def apply_recovery(d: DeviceModel, rest_days: float, cfg: AgingConfig) -> DeviceModel:
    if rest_days < 0:
        raise ContractViolation("rest duration must be non-negative")
    if rest_days == 0:
        return d
    return replace(d, reversible=d.reversible * recovery_factor(rest_days, cfg))


def expected_strong_change(
    params: GenerativeParams,
    shift: float,
    k_samples: int = DEFAULT_K,
    one_band_fraction: float = 0.5,
) -> tuple[float, float, float]:
    """Closed-form change in (portion strong 1, portion strong 0, mean bias) for a uniform shift."""
    s = params.noise_sigma
    out = np.zeros(3)
    for sign, weight in ((1.0, one_band_fraction), (-1.0, 1.0 - one_band_fraction)):
        m = sign * params.structural_shift + params.margin_sigma * _STD_GRID
        before = np.array([
            log_ndtr_pow(m / s, k_samples), log_ndtr_pow(-m / s, k_samples), log_ndtr_pow(m / s, 1)
        ])
        after = np.array([
            log_ndtr_pow((m + shift) / s, k_samples),
            log_ndtr_pow(-(m + shift) / s, k_samples),
            log_ndtr_pow((m + shift) / s, 1),
        ])
        out += weight * np.trapezoid((after - before) * _STD_PDF, _STD_GRID, axis=-1)
    return float(out[0]), float(out[1]), float(out[2])


def calibrate_amplitude(
    params: GenerativeParams,
    target: Sequence[float] = FULL_BIAS_TARGET,
    years: float = FULL_BIAS_YEARS,
    time_exponent: float = 0.25,
    k_samples: int = DEFAULT_K,
) -> float:
    """Amplitude whose all-zero aging best matches the strong-1 / strong-0 targets.

    One amplitude cannot in general hit both targets exactly, so this
    minimises the summed squared error of the two portions.
    """
    if params.band_pattern is not None:
        f1 = float(np.mean(params.band_pattern))
    elif params.band_phase is not None:
        f1 = float(np.mean(np.arange(params.n_bands) % 2 == 0)) if params.band_phase == 1 else float(
            np.mean(np.arange(params.n_bands) % 2 == 1)
        )
    else:
        f1 = 0.5
    d1, d0 = target

    def loss(shift):
        c1, c0, _ = expected_strong_change(params, shift, k_samples, f1)
        return (c1 - d1) ** 2 + (c0 - d0) ** 2

    hi = 10.0 * params.noise_sigma + params.margin_sigma
    res = optimize.minimize_scalar(loss, bounds=(0.0, hi), method="bounded", options={"xatol": 1e-10})
    return float(res.x) / years**time_exponent
