"""Monte Carlo virtual-device evaluation and the end-to-end experiment pipeline."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import aging, classify, sram_model, swbias
from .classify import ClassifierKind, NewScoreDistribution
from .errors import ContractViolation
from .seeding import STREAM_DEVICE, STREAM_SAMPLE, STREAM_VIRTUAL, child_seed, rng_for
from .stats import RocCurve, roc

logger = logging.getLogger(__name__)

GROUP_BASELINE = 0
GROUP_AGED = 1


@dataclass(frozen=True)
class EvaluationReport:
    roc: RocCurve
    accuracy_at_best_T: float
    tpr_at_best_T: float
    fpr_at_best_T: float
    best_T: float
    informedness: float
    n_new: int
    n_aged: int
    checkpoint: float  # effective years
    label: str = ""

    def to_dict(self) -> dict:
        return {
            "checkpoint_years": self.checkpoint,
            "label": self.label,
            "auroc": self.roc.auroc,
            "accuracy": self.accuracy_at_best_T,
            "tpr": self.tpr_at_best_T,
            "fpr": self.fpr_at_best_T,
            "best_T": self.best_T,
            "informedness": self.informedness,
            "n_new": self.n_new,
            "n_aged": self.n_aged,
        }


def evaluate_scores(new_scores, aged_scores, dist: NewScoreDistribution, checkpoint: float, label: str = "") -> EvaluationReport:
    curve = roc(new_scores, aged_scores)
    cut, inf = classify.optimal_threshold(new_scores, aged_scores)
    tp, fp, tn, fn = classify.confusion_at(new_scores, aged_scores, cut)
    n_new, n_aged = tn + fp, tp + fn
    return EvaluationReport(
        roc=curve,
        accuracy_at_best_T=(tp + tn) / (n_new + n_aged),
        tpr_at_best_T=tp / n_aged,
        fpr_at_best_T=fp / n_new,
        best_T=(cut - dist.mean) / dist.std_dev,
        informedness=inf,
        n_new=n_new,
        n_aged=n_aged,
        checkpoint=float(checkpoint),
        label=label,
    )


def _virtual_device(dist, deltas, seed, group, index, resample):
    rng = rng_for(seed, STREAM_VIRTUAL, group, index)
    base = dist.mean + dist.std_dev * rng.standard_normal()
    if deltas is None:
        return np.array([base])
    steps = np.empty(len(deltas))
    for c, d in enumerate(deltas):
        if resample == "gaussian":
            sd = float(np.std(d, ddof=1)) if d.size > 1 else 0.0
            steps[c] = float(np.mean(d)) + sd * rng.standard_normal()
        else:
            steps[c] = d[rng.integers(0, d.size)]
    return base + np.cumsum(steps)


def monte_carlo_evaluate(
    dist: NewScoreDistribution,
    delta_samples: Sequence[Sequence[float]],
    n_virtual: int,
    seed: int,
    checkpoints: Optional[Sequence[float]] = None,
    resample: str = "uniform",
    workers: int = 1,
    label: str = "",
) -> list[EvaluationReport]:
    """Age ``n_virtual`` virtual devices by resampled score increments.

    ``delta_samples[c]`` holds the observed score change between checkpoint
    ``c - 1`` and ``c`` (checkpoint 0 relative to new). Each virtual device
    draws its own base score from ``dist`` and one increment per checkpoint.
    Its generator comes from ``(seed, index)``, so the output does not
    depend on ``workers``.
    """
    if n_virtual < 2:
        raise ContractViolation("n_virtual must be at least 2")
    deltas = [np.asarray(d, dtype=float) for d in delta_samples]
    if not deltas or any(d.size == 0 for d in deltas):
        raise ContractViolation("every checkpoint needs at least one delta sample")
    if resample not in ("uniform", "gaussian"):
        raise ContractViolation(f"unknown resample mode {resample!r}")
    if checkpoints is None:
        checkpoints = list(range(len(deltas)))
    if len(checkpoints) != len(deltas):
        raise ContractViolation("checkpoints and delta_samples differ in length")

    def new_one(i):
        return _virtual_device(dist, None, seed, 0, i, resample)[0]

    def aged_one(i):
        return _virtual_device(dist, deltas, seed, 1, i, resample)

    idx = range(n_virtual)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            new = np.array(list(ex.map(new_one, idx)))
            aged = np.stack(list(ex.map(aged_one, idx)))
    else:
        new = np.array([new_one(i) for i in idx])
        aged = np.stack([aged_one(i) for i in idx])
    return [
        evaluate_scores(new, aged[:, c], dist, checkpoints[c], label) for c in range(len(deltas))
    ]


def incremental_deltas(trajectories: np.ndarray) -> list[np.ndarray]:
    """Per-checkpoint score increments from ``(devices, 1 + checkpoints)`` score trajectories.

    Column 0 holds the new-device score; the returned list starts with the
    all-zero increment for checkpoint 0.
    """
    t = np.asarray(trajectories, dtype=float)
    steps = np.diff(t, axis=1)
    return [np.zeros(t.shape[0])] + [steps[:, c] for c in range(steps.shape[1])]


# ---------------------------------------------------------------------------
# pipeline

@dataclass
class ClassifierOutcome:
    kind: ClassifierKind
    profile_name: str
    dist: NewScoreDistribution
    baseline_scores: np.ndarray
    trajectories: np.ndarray  # (n_aged, 1 + n_checkpoints)
    reports: list
    recovered: Optional[EvaluationReport] = None


@dataclass
class PipelineResult:
    params: sram_model.GenerativeParams
    aging_cfg: aging.AgingConfig
    checkpoints: list
    outcomes: list = field(default_factory=list)
    batch: dict = field(default_factory=dict)

    def outcome(self, kind: ClassifierKind, profile_name: Optional[str] = None) -> ClassifierOutcome:
        for o in self.outcomes:
            if o.kind is kind and (profile_name is None or o.profile_name == profile_name):
                return o
        raise KeyError((kind, profile_name))


def measure(device, k, seed, *keys):
    return sram_model.estimate_bias_map(sram_model.sample_power_on(device, k, child_seed(seed, STREAM_SAMPLE, *keys)))


def _map_many(fn, items, workers):
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(fn, items))
    return [fn(i) for i in items]


def _score(m, kind, expected, band_size):
    bands = sram_model.infer_band_map(m, band_size) if kind.uses_bands else None
    return classify.score_device(m, kind, expected, bands)[0]


def run_pipeline(
    params: sram_model.GenerativeParams,
    aging_cfg: aging.AgingConfig,
    profiles: dict,
    schedule: aging.AgingSchedule,
    classifiers: Sequence[ClassifierKind],
    seed: int,
    k_samples: int = sram_model.DEFAULT_K,
    n_baseline: int = 18,
    n_aged: int = 6,
    n_virtual: int = 1000,
    strength_threshold: float = 1.0,
    rest_days: float = 0.0,
    resample: str = "uniform",
    workers: int = 1,
) -> PipelineResult:
    """Synthesize, profile, age, score, fit, then run the Monte Carlo evaluation.

    ``profiles`` maps a name to a :class:`~sramage.swbias.SoftwareBiasProfile`.
    Every profile ages its own ``n_aged`` devices. With more than one
    profile a pooled batch report (one threshold for all) is added.
    """
    checkpoints = [0.0] + list(schedule.checkpoints)
    band_size = params.band_size

    def baseline_map(i):
        d = sram_model.synth_device(params, child_seed(seed, STREAM_DEVICE, GROUP_BASELINE, i))
        return measure(d, k_samples, seed, GROUP_BASELINE, i)

    baseline_maps = _map_many(baseline_map, range(n_baseline), workers)

    result = PipelineResult(params, aging_cfg, checkpoints)
    for p_index, (name, profile) in enumerate(profiles.items()):
        if profile.n_bits != params.n_cells:
            raise ContractViolation(f"profile {name!r} covers {profile.n_bits} bits, devices have {params.n_cells}")
        expected = swbias.select_usable_bits(profile, strength_threshold)

        def aged_maps(j, profile=profile, p_index=p_index):
            d = sram_model.synth_device(params, child_seed(seed, STREAM_DEVICE, GROUP_AGED, p_index, j))
            maps = [measure(d, k_samples, seed, GROUP_AGED, p_index, j, 0)]
            for c, t in enumerate(schedule.checkpoints, start=1):
                d = aging.apply_aging(d, profile, t - d.age_years, aging_cfg)
                maps.append(measure(d, k_samples, seed, GROUP_AGED, p_index, j, c))
            if rest_days > 0:
                d = aging.apply_recovery(d, rest_days, aging_cfg)
                maps.append(measure(d, k_samples, seed, GROUP_AGED, p_index, j, len(checkpoints)))
            return maps

        aged = _map_many(aged_maps, range(n_aged), workers)
        for c_index, kind in enumerate(classifiers):
            base_scores = np.array([_score(m, kind, expected, band_size) for m in baseline_maps], dtype=float)
            dist = classify.fit_new_scores(base_scores)
            traj = np.array([[_score(m, kind, expected, band_size) for m in maps] for maps in aged], dtype=float)
            main = traj[:, : len(checkpoints)]
            mc_seed = child_seed(seed, STREAM_VIRTUAL, p_index, c_index)
            reports = monte_carlo_evaluate(
                dist, incremental_deltas(main), n_virtual, mc_seed, checkpoints, resample, workers, name
            )
            recovered = None
            if rest_days > 0:
                rec = monte_carlo_evaluate(
                    dist, incremental_deltas(traj), n_virtual, mc_seed, checkpoints + [checkpoints[-1]],
                    resample, workers, name,
                )
                recovered = rec[-1]
            result.outcomes.append(ClassifierOutcome(kind, name, dist, base_scores, traj, reports, recovered))

    if len(profiles) > 1:
        for c_index, kind in enumerate(classifiers):
            if kind.uses_software:
                continue
            result.batch[kind] = _batch_reports(result, kind, n_virtual, seed, c_index, resample, workers)
    return result


def _batch_reports(result, kind, n_virtual, seed, c_index, resample, workers):
    """One threshold for every profile: pool the aged virtual populations."""
    outs = [o for o in result.outcomes if o.kind is kind]
    # Software-unaware kinds score every profile against the same baseline.
    dist = outs[0].dist
    new = np.array([
        _virtual_device(dist, None, child_seed(seed, STREAM_VIRTUAL, 999, c_index), 0, i, resample)[0]
        for i in range(n_virtual)
    ])
    aged_cols = []
    for p_index, o in enumerate(outs):
        deltas = incremental_deltas(o.trajectories[:, : len(result.checkpoints)])
        s = child_seed(seed, STREAM_VIRTUAL, 999, c_index, p_index + 1)
        aged_cols.append(np.stack([_virtual_device(o.dist, deltas, s, 1, i, resample) for i in range(n_virtual)]))
    aged = np.concatenate(aged_cols, axis=0)
    return [
        evaluate_scores(new, aged[:, c], dist, result.checkpoints[c], "batch")
        for c in range(len(result.checkpoints))
    ]


# ---------------------------------------------------------------------------
# recovery calibration

RECOVERY_TARGET_DROP = 0.07
RECOVERY_REST_DAYS = 42.0


def recovery_drop(result: PipelineResult) -> float:
    """Mean accuracy lost between the last checkpoint and the post-rest reading."""
    drops = [o.reports[-1].accuracy_at_best_T - o.recovered.accuracy_at_best_T
             for o in result.outcomes if o.recovered is not None]
    if not drops:
        raise ContractViolation("pipeline was run without a rest period")
    return float(np.mean(drops))


def sweep_permanent_fraction(
    params: sram_model.GenerativeParams,
    aging_cfg: aging.AgingConfig,
    profiles: dict,
    schedule: aging.AgingSchedule,
    classifiers: Sequence[ClassifierKind],
    seed: int,
    grid: Sequence[float] = tuple(np.round(np.arange(0.1, 0.95, 0.1), 10)),
    target_drop: float = RECOVERY_TARGET_DROP,
    rest_days: float = RECOVERY_REST_DAYS,
    **pipeline_kw,
) -> tuple[float, dict]:
    """Pick the permanent fraction whose post-rest accuracy drop is closest to ``target_drop``.

    Returns ``(rho, {rho: drop})``. Ties go to the larger ``rho``.
    """
    drops = {}
    for rho in grid:
        cfg = replace(aging_cfg, permanent_fraction=float(rho))
        res = run_pipeline(params, cfg, profiles, schedule, classifiers, seed, rest_days=rest_days, **pipeline_kw)
        drops[float(rho)] = recovery_drop(res)
        logger.info("rho=%.3f recovery drop %.4f", rho, drops[float(rho)])
    best = min(sorted(drops, reverse=True), key=lambda r: abs(drops[r] - target_drop))
    return best, drops
