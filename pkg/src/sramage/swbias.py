"""Software bit-bias profiling from memory-write traces.

A bit's bias is the fraction of time it holds 1, measured from its first
write to the end of the trace. Time before the first write is startup
noise, not software data, so it is excluded.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable, Optional

import numpy as np
from scipy import optimize, stats

from .errors import ContractViolation, EmptyProfile, MalformedTrace


class Expect(IntEnum):
    EXPECT0 = 0
    EXPECT1 = 1
    UNUSABLE = 2
    UNWRITTEN = 3


@dataclass(frozen=True)
class WriteEvent:
    timestamp: float
    first_bit: int
    width_bits: int
    value: int  # first_bit is the most significant of width_bits


@dataclass
class WriteTrace:
    memory_bits: int
    total_duration: float
    events: list
    initial_image: Optional[np.ndarray] = None  # bool per bit; written at t=0 when present

    def validate(self) -> None:
        last = -np.inf
        for i, ev in enumerate(self.events):
            if ev.timestamp < 0 or ev.timestamp > self.total_duration:
                raise MalformedTrace(i, f"timestamp {ev.timestamp} outside [0, {self.total_duration}]")
            if ev.timestamp < last:
                raise MalformedTrace(i, "timestamps must be nondecreasing")
            if ev.width_bits < 1 or ev.first_bit < 0 or ev.first_bit + ev.width_bits > self.memory_bits:
                raise MalformedTrace(
                    i, f"bits [{ev.first_bit}, {ev.first_bit + ev.width_bits}) outside memory of {self.memory_bits}"
                )
            if ev.value < 0 or ev.value >> ev.width_bits:
                raise MalformedTrace(i, f"value does not fit in {ev.width_bits} bits")
            last = ev.timestamp
        if self.initial_image is not None and len(self.initial_image) != self.memory_bits:
            raise MalformedTrace(-1, "initial image length differs from memory_bits")


def value_bits(value: int, width: int) -> np.ndarray:
    """Bits of ``value`` MSB first, as a length-``width`` uint8 array."""
    raw = value.to_bytes((width + 7) // 8, "big")
    bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8))
    return bits[bits.size - width:]


@dataclass(frozen=True)
class SoftwareBiasProfile:
    bias: np.ndarray
    written: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.bias, dtype=float).copy()
        w = np.asarray(self.written, dtype=bool).copy()
        if b.shape != w.shape or b.ndim != 1:
            raise ContractViolation("bias and written must be equal-length vectors")
        if np.any(w & ((b < 0) | (b > 1))):
            raise ContractViolation("bias must lie in [0, 1]")
        b[~w] = 0.5
        b.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "bias", b)
        object.__setattr__(self, "written", w)

    @property
    def n_bits(self) -> int:
        return self.bias.shape[0]

    @property
    def strength(self) -> np.ndarray:
        return np.where(self.written, 2.0 * np.abs(self.bias - 0.5), 0.0)

    @property
    def summary(self) -> tuple[float, float, float]:
        return profile_summary(self)


def compute_bias_profile(t: WriteTrace) -> SoftwareBiasProfile:
    t.validate()
    n = t.memory_bits
    first = np.full(n, np.nan)
    last = np.zeros(n)
    cur = np.zeros(n, dtype=np.uint8)
    ones_time = np.zeros(n)
    if t.initial_image is not None:
        first[:] = 0.0
        cur[:] = np.asarray(t.initial_image, dtype=np.uint8)
    for ev in t.events:
        sl = slice(ev.first_bit, ev.first_bit + ev.width_bits)
        seen = ~np.isnan(first[sl])
        ones_time[sl] += np.where(seen, (ev.timestamp - last[sl]) * cur[sl], 0.0)
        first[sl] = np.where(seen, first[sl], ev.timestamp)
        last[sl] = ev.timestamp
        cur[sl] = value_bits(ev.value, ev.width_bits)
    written = ~np.isnan(first)
    ones_time += np.where(written, (t.total_duration - last) * cur, 0.0)
    span = np.where(written, t.total_duration - np.nan_to_num(first), 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        # A bit first written at the very end has no dwell; take its held value.
        bias = np.where(span > 0, ones_time / np.where(span > 0, span, 1.0), cur.astype(float))
    return SoftwareBiasProfile(np.clip(bias, 0.0, 1.0), written)


def select_usable_bits(p: SoftwareBiasProfile, strength_threshold: float) -> np.ndarray:
    """Map bits to expected power-on values (inverse of the held value).

    Returns an int8 array of :class:`Expect` codes. A bias of exactly 0.5
    has no direction and is unusable at every threshold.
    """
    strength = p.strength
    out = np.full(p.n_bits, Expect.UNUSABLE, dtype=np.int8)
    usable = p.written & (strength >= strength_threshold) & (p.bias != 0.5)
    out[usable & (p.bias < 0.5)] = Expect.EXPECT1
    out[usable & (p.bias > 0.5)] = Expect.EXPECT0
    out[~p.written] = Expect.UNWRITTEN
    return out


def profile_summary(p: SoftwareBiasProfile) -> tuple[float, float, float]:
    """(mean bias, mean strength, SRAM use) over written bits."""
    n_written = int(np.count_nonzero(p.written))
    if n_written == 0:
        raise EmptyProfile("profile has no written bits")
    b = p.bias[p.written]
    return float(b.mean()), float((2.0 * np.abs(b - 0.5)).mean()), n_written / p.n_bits


# ---------------------------------------------------------------------------
# synthetic profiles

def constant_profile(n_bits: int, bias: float) -> SoftwareBiasProfile:
    """Every bit written and held at the same bias (0 = all zeros, 0.5 = unbiased)."""
    return SoftwareBiasProfile(np.full(n_bits, float(bias)), np.ones(n_bits, dtype=bool))


def _beta_for(mean: float, strength: float) -> tuple[float, float]:
    """Beta(a, b) with the given mean and expected ``2 |B - 0.5|``."""
    def mean_strength(conc):
        a, b = mean * conc, (1 - mean) * conc
        # E|2B - 1| = 2 E[B] - 1 + 4 E[(0.5 - B)+]; the second term via partial moments.
        below = stats.beta.cdf(0.5, a, b)
        partial = mean * stats.beta.cdf(0.5, a + 1, b)
        return 2 * mean - 1 + 4 * (0.5 * below - partial)

    lo_s, hi_s = mean_strength(1e3), mean_strength(1e-3)
    if not lo_s <= strength <= hi_s:
        raise ContractViolation(f"strength {strength} unreachable for mean {mean}")
    conc = optimize.brentq(lambda c: mean_strength(c) - strength, 1e-3, 1e3, xtol=1e-12)
    return mean * conc, (1 - mean) * conc


def synthetic_profile(
    n_bits: int,
    mean_bias: float,
    mean_strength: float,
    const0: float = 0.395,
    const1: float = 0.011,
    seed: int = 0,
    written_fraction: float = 1.0,
) -> SoftwareBiasProfile:
    """Benchmark-like profile with target mean bias and mean strength over written bits.

    ``const0`` / ``const1`` are the fractions of written bits that always
    hold 0 / 1. The remaining written bits draw their bias from a Beta law
    solved to hit the two targets in expectation.
    """
    rest = 1.0 - const0 - const1
    if rest <= 0 or not 0 < written_fraction <= 1:
        raise ContractViolation("const0 + const1 must be below 1 and written_fraction in (0, 1]")
    rest_mean = (mean_bias - const1) / rest
    rest_strength = (mean_strength - const0 - const1) / rest
    if not 0 < rest_mean < 1:
        raise ContractViolation("mean_bias incompatible with constant-bit fractions")
    a, b = _beta_for(rest_mean, rest_strength)
    rng = np.random.default_rng(seed)
    written = np.zeros(n_bits, dtype=bool)
    written[rng.permutation(n_bits)[: int(round(written_fraction * n_bits))]] = True
    kind = rng.random(n_bits)
    bias = rng.beta(a, b, n_bits)
    bias = np.where(kind < const0, 0.0, np.where(kind < const0 + const1, 1.0, bias))
    return SoftwareBiasProfile(bias, written)


def trace_from_profile(p: SoftwareBiasProfile, total_duration: float = 1.0) -> WriteTrace:
    """Two-event-per-bit trace that reproduces ``p`` exactly (1 first, then 0)."""
    events = []
    for i in np.flatnonzero(p.written):
        b = float(p.bias[i])
        events.append(WriteEvent(0.0, int(i), 1, 1 if b > 0 else 0))
    later = []
    for i in np.flatnonzero(p.written):
        b = float(p.bias[i])
        if 0 < b < 1:
            later.append(WriteEvent(b * total_duration, int(i), 1, 0))
    later.sort(key=lambda e: (e.timestamp, e.first_bit))
    return WriteTrace(p.n_bits, total_duration, events + later)


def heatmap_rows(p: SoftwareBiasProfile, grid_width: int) -> Iterable[tuple[int, int, float]]:
    """(row, col, bias) per written bit; unwritten bits are omitted."""
    for i in np.flatnonzero(p.written):
        yield int(i // grid_width), int(i % grid_width), float(p.bias[i])
