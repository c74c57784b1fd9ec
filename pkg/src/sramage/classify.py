"""New-versus-recycled scoring and threshold decisions."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .errors import ContractViolation, DegenerateInput
from .sram_model import BandMap, Category, CellBiasMap
from .stats import informedness, shapiro_wilk
from .swbias import Expect


class ClassifierKind(str, Enum):
    ZERO_KNOWLEDGE = "ZeroKnowledge"
    STRUCTURE_AWARE = "StructureAware"
    SOFTWARE_AWARE = "SoftwareAware"
    SOFTWARE_STRUCTURE_AWARE = "SoftwareStructureAware"

    @property
    def uses_bands(self) -> bool:
        return self in (ClassifierKind.STRUCTURE_AWARE, ClassifierKind.SOFTWARE_STRUCTURE_AWARE)

    @property
    def uses_software(self) -> bool:
        return self in (ClassifierKind.SOFTWARE_AWARE, ClassifierKind.SOFTWARE_STRUCTURE_AWARE)

    @classmethod
    def parse(cls, text: str) -> "ClassifierKind":
        key = text.replace("-", "").replace("_", "").lower()
        for kind in cls:
            if kind.value.lower() == key:
                return kind
        raise ValueError(f"unknown classifier kind {text!r}")


NEW = "New"
RECYCLED = "Recycled"


@dataclass(frozen=True)
class ClassificationResult:
    score: int
    classifier_kind: ClassifierKind
    cells_considered: int
    threshold_T: float
    label: str

    def __post_init__(self):
        if abs(self.score) > self.cells_considered:
            raise ContractViolation("|score| exceeds cells_considered")


@dataclass(frozen=True)
class NewScoreDistribution:
    mean: float
    std_dev: float
    n_baseline: int
    normality_w: float = float("nan")
    normality_p: float = float("nan")

    def __post_init__(self):
        if not self.std_dev > 0:
            raise ContractViolation("std_dev must be positive")
        if self.n_baseline < 3:
            raise ContractViolation("need at least three baseline scores")

    @property
    def normality_rejected(self) -> bool:
        return self.normality_p < 0.05

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "std_dev": self.std_dev,
            "n_baseline": self.n_baseline,
            "normality_w": self.normality_w,
            "normality_p": self.normality_p,
        }


def score_zero_knowledge(m: CellBiasMap) -> int:
    """Strong-1 cells minus strong-0 cells."""
    cat = m.category
    return int(np.count_nonzero(cat == Category.STRONG1)) - int(np.count_nonzero(cat == Category.STRONG0))


def cell_marks(category: np.ndarray, expected: np.ndarray, band_majority: Optional[np.ndarray]) -> np.ndarray:
    """Per-cell +1 / -1 / 0 following the scoring chart.

    Strong cells match when their value equals the expectation. A weak
    cell matches only in a band whose majority is the opposite of the
    expectation; with no band information it scores 0.
    """
    category = np.asarray(category)
    expected = np.asarray(expected)
    usable = (expected == Expect.EXPECT0) | (expected == Expect.EXPECT1)
    strong = category != Category.WEAK
    marks = np.zeros(category.shape, dtype=np.int8)
    marks[usable & strong] = np.where(category[usable & strong] == expected[usable & strong], 1, -1)
    if band_majority is not None:
        sel = usable & ~strong
        marks[sel] = np.where(np.asarray(band_majority)[sel] != expected[sel], 1, -1)
    return marks


def score_table(m: CellBiasMap, expected: np.ndarray, bands: Optional[BandMap] = None) -> tuple[int, int]:
    """Matches minus disagreements. Returns ``(score, cells_considered)``."""
    expected = np.asarray(expected)
    if expected.shape != (m.n_cells,):
        raise ContractViolation(f"expectation covers {expected.size} cells, map has {m.n_cells}")
    band_cells = None
    if bands is not None:
        if bands.n_cells != m.n_cells:
            raise ContractViolation(f"band map covers {bands.n_cells} cells, map has {m.n_cells}")
        band_cells = bands.per_cell()
    marks = cell_marks(m.category, expected, band_cells)
    considered = int(np.count_nonzero((expected == Expect.EXPECT0) | (expected == Expect.EXPECT1)))
    return int(marks.sum(dtype=np.int64)), considered


def all_expect_one(n_cells: int) -> np.ndarray:
    return np.full(n_cells, Expect.EXPECT1, dtype=np.int8)


def score_device(
    m: CellBiasMap,
    kind: ClassifierKind,
    expected: Optional[np.ndarray] = None,
    bands: Optional[BandMap] = None,
) -> tuple[int, int]:
    """Score with any classifier kind; returns ``(score, cells_considered)``."""
    if kind is ClassifierKind.ZERO_KNOWLEDGE:
        return score_zero_knowledge(m), m.n_cells
    if kind.uses_software:
        if expected is None:
            raise ContractViolation(f"{kind.value} needs an expected-state map")
    else:
        expected = all_expect_one(m.n_cells)
    if kind.uses_bands and bands is None:
        raise ContractViolation(f"{kind.value} needs a band map")
    return score_table(m, expected, bands if kind.uses_bands else None)


def fit_new_scores(baseline_scores: Sequence[float]) -> NewScoreDistribution:
    x = np.asarray(baseline_scores, dtype=float)
    if x.size < 3:
        raise DegenerateInput("need at least three baseline scores")
    mean = float(x.mean())
    std = float(x.std(ddof=1))
    if not std > 0:
        raise DegenerateInput("baseline scores have zero variance")
    w, p = shapiro_wilk(x) if x.size <= 5000 else (float("nan"), float("nan"))
    return NewScoreDistribution(mean, std, int(x.size), w, p)


def decide(score: float, dist: NewScoreDistribution, T: float) -> str:
    """Recycled when the score sits at least ``T`` standard deviations above the new mean."""
    return RECYCLED if score - dist.mean >= T * dist.std_dev else NEW


def classify(
    m: CellBiasMap,
    kind: ClassifierKind,
    dist: NewScoreDistribution,
    T: float,
    expected: Optional[np.ndarray] = None,
    bands: Optional[BandMap] = None,
) -> ClassificationResult:
    score, considered = score_device(m, kind, expected, bands)
    return ClassificationResult(score, kind, considered, T, decide(score, dist, T))


def optimal_threshold(
    new_scores: Sequence[float],
    aged_scores: Sequence[float],
    dist: Optional[NewScoreDistribution] = None,
) -> tuple[float, float]:
    """Cut point maximising informedness; ties go to the larger cut.

    Candidates are midpoints between adjacent distinct pooled scores plus
    +/- infinity. Returns the cut in score units, or in standard deviations
    from ``dist.mean`` when ``dist`` is given.
    """
    new = np.sort(np.asarray(new_scores, dtype=float))
    aged = np.sort(np.asarray(aged_scores, dtype=float))
    if new.size == 0 or aged.size == 0:
        raise ContractViolation("both score lists must be nonempty")
    pooled = np.unique(np.concatenate([new, aged]))
    cuts = np.concatenate([[-np.inf], (pooled[:-1] + pooled[1:]) / 2.0, [np.inf]])
    # Recycled iff score >= cut.
    tp = aged.size - np.searchsorted(aged, cuts, side="left")
    fp = new.size - np.searchsorted(new, cuts, side="left")
    inf = tp / aged.size + (new.size - fp) / new.size - 1.0
    best = np.flatnonzero(inf >= inf.max() - 1e-12)[-1]
    cut = float(cuts[best])
    if dist is not None:
        cut = (cut - dist.mean) / dist.std_dev
    return cut, float(inf[best])


def confusion_at(new_scores, aged_scores, cut: float) -> tuple[int, int, int, int]:
    """(tp, fp, tn, fn) when scores at or above ``cut`` are labelled recycled."""
    new = np.asarray(new_scores, dtype=float)
    aged = np.asarray(aged_scores, dtype=float)
    tp = int(np.count_nonzero(aged >= cut))
    fp = int(np.count_nonzero(new >= cut))
    return tp, fp, new.size - fp, aged.size - tp


__all__ = [
    "ClassifierKind",
    "ClassificationResult",
    "NewScoreDistribution",
    "score_zero_knowledge",
    "score_table",
    "score_device",
    "cell_marks",
    "fit_new_scores",
    "decide",
    "classify",
    "optimal_threshold",
    "confusion_at",
    "informedness",
    "NEW",
    "RECYCLED",
]
