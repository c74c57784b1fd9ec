"""Experiment configuration (JSON, keys equal to field names)."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import aging, sram_model, swbias
from .classify import ClassifierKind
from .errors import ConfigError, ContractViolation
from .seeding import STREAM_PROFILE, child_seed

# Average mean bit bias and mean strength of the reference benchmark suite.
BENCHMARK_MEAN_BIAS = 0.2272
BENCHMARK_MEAN_STRENGTH = 0.6701

PROFILE_KINDS = ("zeros", "ones", "unbiased", "constant", "benchmark", "trace", "profile_csv")


@dataclass
class ExperimentConfig:
    seed: int
    n_cells: int = 4096
    band_size: int = sram_model.DEFAULT_BAND_SIZE
    grid_width: int = sram_model.DEFAULT_GRID_WIDTH
    k_samples: int = sram_model.DEFAULT_K
    generative: Optional[dict] = None
    band_composition: list = field(default_factory=lambda: list(sram_model.MSP430_BAND_COMPOSITION))
    target_portion_strong: float = 0.884
    band_phase: Optional[int] = None
    band_pattern: Optional[list] = None
    aging: dict = field(default_factory=dict)
    acceleration: dict = field(default_factory=dict)
    schedule: Optional[list] = None
    interval_wall_hours: float = 12.0
    n_intervals: int = 13
    classifiers: list = field(default_factory=lambda: [k.value for k in ClassifierKind])
    threshold: float = 3.0
    strength_threshold: float = 1.0
    n_devices: int = 18
    n_baseline: int = 18
    n_aged: int = 6
    n_virtual: int = 1000
    profiles: list = field(default_factory=lambda: [{"name": "zeros", "kind": "zeros"}])
    rest_days: float = 0.0
    resample: str = "uniform"
    permutations: int = sram_model.DEFAULT_PERMUTATIONS
    moran_binary: bool = False
    workers: int = 1
    out: str = "out"

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - names)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        if "seed" not in d or d["seed"] is None:
            raise ConfigError("config must set 'seed'")
        try:
            cfg = cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path, overrides: Optional[dict] = None) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be an object")
        data.update({k: v for k, v in (overrides or {}).items() if v is not None})
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def validate(self) -> None:
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an integer in [0, 2**64)")
        if self.k_samples < 1 or self.k_samples % 2 == 0:
            raise ConfigError("k_samples must be odd")
        if self.n_cells % self.band_size or self.n_cells % self.grid_width:
            raise ConfigError("band_size and grid_width must divide n_cells")
        if self.resample not in ("uniform", "gaussian"):
            raise ConfigError("resample must be 'uniform' or 'gaussian'")
        for c in self.classifiers:
            try:
                ClassifierKind.parse(c)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        names = [p.get("name", p.get("kind")) for p in self.profiles]
        if len(set(names)) != len(names):
            raise ConfigError("profile names must be unique")
        for p in self.profiles:
            if p.get("kind") not in PROFILE_KINDS:
                raise ConfigError(f"profile kind must be one of {PROFILE_KINDS}, got {p.get('kind')!r}")
        out = Path(self.out).resolve()
        for p in self.profiles:
            if p.get("path") and Path(p["path"]).resolve() == out:
                raise ConfigError("output directory collides with an input path")

    # -- builders -----------------------------------------------------------

    def classifier_kinds(self) -> list:
        return [ClassifierKind.parse(c) for c in self.classifiers]

    def acceleration_params(self) -> aging.AccelerationParams:
        try:
            return aging.AccelerationParams(**self.acceleration)
        except (TypeError, ContractViolation) as exc:
            raise ConfigError(f"acceleration: {exc}") from None

    def generative_params(self) -> sram_model.GenerativeParams:
        extra = {"band_phase": self.band_phase}
        if self.band_pattern is not None:
            extra["band_pattern"] = tuple(self.band_pattern)
        if self.generative is not None:
            d = {"n_cells": self.n_cells, "band_size": self.band_size, **extra, **self.generative}
            try:
                return sram_model.GenerativeParams.from_dict(d)
            except (TypeError, ContractViolation) as exc:
                raise ConfigError(f"generative: {exc}") from None
        if tuple(self.band_composition) == sram_model.MSP430_BAND_COMPOSITION and self.target_portion_strong == 0.884:
            return sram_model.msp430_params(self.n_cells, self.band_size, **extra)
        target = sram_model.FamilySummary(
            mean_bias=0.5, portion_strong=self.target_portion_strong,
            portion_weak=1 - self.target_portion_strong, weak_bias_mean=0.5,
            portion_strong_1=self.target_portion_strong / 2, portion_strong_0=self.target_portion_strong / 2,
        )
        return sram_model.calibrate_generative_params(
            target, self.band_composition, self.n_cells, self.band_size, self.k_samples, **extra
        )

    def aging_config(self, params: sram_model.GenerativeParams) -> aging.AgingConfig:
        d = dict(self.aging)
        if d.get("amplitude") is None:
            d["amplitude"] = aging.calibrate_amplitude(
                params, time_exponent=d.get("time_exponent", 0.25), k_samples=self.k_samples
            )
        try:
            return aging.AgingConfig(**d)
        except (TypeError, ContractViolation) as exc:
            raise ConfigError(f"aging: {exc}") from None

    def aging_schedule(self) -> aging.AgingSchedule:
        if self.schedule is not None:
            try:
                return aging.AgingSchedule(tuple(self.schedule))
            except ContractViolation as exc:
                raise ConfigError(f"schedule: {exc}") from None
        return aging.default_schedule(self.acceleration_params(), self.interval_wall_hours, self.n_intervals)

    def software_profiles(self) -> dict:
        from .formats import read_profile_csv, read_trace

        out = {}
        for index, spec in enumerate(self.profiles):
            kind = spec["kind"]
            name = spec.get("name", kind)
            if kind == "zeros":
                prof = swbias.constant_profile(self.n_cells, 0.0)
            elif kind == "ones":
                prof = swbias.constant_profile(self.n_cells, 1.0)
            elif kind == "unbiased":
                prof = swbias.constant_profile(self.n_cells, 0.5)
            elif kind == "constant":
                prof = swbias.constant_profile(self.n_cells, float(spec["bias"]))
            elif kind == "benchmark":
                prof = swbias.synthetic_profile(
                    self.n_cells,
                    float(spec.get("mean_bias", BENCHMARK_MEAN_BIAS)),
                    float(spec.get("mean_strength", BENCHMARK_MEAN_STRENGTH)),
                    const0=float(spec.get("const0", 0.395)),
                    const1=float(spec.get("const1", 0.011)),
                    written_fraction=float(spec.get("written_fraction", 1.0)),
                    seed=child_seed(self.seed, STREAM_PROFILE, index),
                )
            elif kind == "trace":
                prof = swbias.compute_bias_profile(read_trace(spec["path"]))
            else:
                prof = read_profile_csv(spec["path"])
            if prof.n_bits != self.n_cells:
                raise ConfigError(f"profile {name!r} has {prof.n_bits} bits, n_cells is {self.n_cells}")
            out[name] = prof
        return out
