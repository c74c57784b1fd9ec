"""Statistical primitives: Welch's t-test, Shapiro-Wilk, ROC analysis, informedness."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import ContractViolation, DegenerateInput


def welch_t_test(a, b) -> tuple[float, float, float]:
    """Two-sided Welch test. Returns ``(t, p, df)``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size < 2 or b.size < 2:
        raise DegenerateInput("each sample needs at least two values")
    va, vb = a.var(ddof=1) / a.size, b.var(ddof=1) / b.size
    se2 = va + vb
    if se2 == 0:
        raise DegenerateInput("both samples have zero variance")
    t = (a.mean() - b.mean()) / math.sqrt(se2)
    df = se2**2 / (va**2 / (a.size - 1) + vb**2 / (b.size - 1))
    p = 2.0 * special.stdtr(df, -abs(t))
    return float(t), float(min(1.0, p)), float(df)


# Royston (1995) polynomial coefficients.
_C1 = (0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056)
_C2 = (0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633)
_C3 = (0.544, -0.39978, 0.025054, -6.714e-4)
_C4 = (1.3822, -0.77857, 0.062767, -0.0020322)
_C5 = (-1.5861, -0.31082, -0.083751, 0.0038915)
_C6 = (-0.4803, -0.082676, 0.0030302)
_G = (-2.273, 0.459)


def _poly(c, x):
    return sum(ci * x**i for i, ci in enumerate(c))


def shapiro_coefficients(n: int) -> np.ndarray:
    """Antisymmetric weights for the sorted sample, unit Euclidean norm."""
    if n < 3:
        raise DegenerateInput("Shapiro-Wilk needs at least three values")
    half = n // 2
    if n == 3:
        low = np.array([math.sqrt(0.5)])
    else:
        i = np.arange(1, half + 1)
        m = -special.ndtri((i - 0.375) / (n + 0.25))  # positive, largest first
        summ2 = 2.0 * np.sum(m**2)
        ssumm2 = math.sqrt(summ2)
        rsn = 1.0 / math.sqrt(n)
        a1 = _poly(_C1, rsn) + m[0] / ssumm2
        low = m / ssumm2
        low[0] = a1
        if n > 5:
            a2 = _poly(_C2, rsn) + m[1] / ssumm2
            fac = math.sqrt((summ2 - 2 * m[0] ** 2 - 2 * m[1] ** 2) / (1 - 2 * a1**2 - 2 * a2**2))
            low[1] = a2
            low[2:] = m[2:] / fac
        else:
            fac = math.sqrt((summ2 - 2 * m[0] ** 2) / (1 - 2 * a1**2))
            low[1:] = m[1:] / fac
    a = np.zeros(n)
    a[:half] = -low
    a[n - half:] = low[::-1]
    return a


def shapiro_wilk(sample) -> tuple[float, float]:
    """W statistic and p-value by Royston's approximation, 3 <= n <= 5000."""
    x = np.sort(np.asarray(sample, dtype=float).ravel())
    n = x.size
    if not 3 <= n <= 5000:
        raise DegenerateInput(f"sample size {n} outside [3, 5000]")
    centred = x - x.mean()
    ss = float(np.dot(centred, centred))
    if ss <= 0 or x[-1] - x[0] <= 0:
        raise DegenerateInput("sample has zero variance")
    a = shapiro_coefficients(n)
    w = float(np.dot(a, centred)) ** 2 / ss
    w = min(w, 1.0)
    if n == 3:
        p = (6.0 / math.pi) * (math.asin(math.sqrt(w)) - math.pi / 3.0)
        return w, float(min(1.0, max(0.0, p)))
    y = math.log1p(-w) if w < 1 else -math.inf
    if n <= 11:
        gamma = _poly(_G, n)
        if y >= gamma:
            return w, 1e-99
        y = -math.log(gamma - y)
        mu = _poly(_C3, n)
        sigma = math.exp(_poly(_C4, n))
    else:
        ln = math.log(n)
        mu = _poly(_C5, ln)
        sigma = math.exp(_poly(_C6, ln))
    if y == -math.inf:
        return w, 1.0
    return w, float(special.ndtr(-(y - mu) / sigma))


def informedness(tp: int, fp: int, tn: int, fn: int) -> float:
    if tp + fn < 1 or tn + fp < 1:
        raise ContractViolation("both classes need at least one member")
    return tp / (tp + fn) + tn / (tn + fp) - 1.0


@dataclass(frozen=True)
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    auroc: float

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.fpr.tolist(), self.tpr.tolist()))


def roc(new_scores, aged_scores) -> RocCurve:
    """Sweep the cut from +inf down through every distinct score.

    Tied scores move FPR and TPR together, giving a diagonal segment.
    """
    new = np.asarray(new_scores, dtype=float)
    aged = np.asarray(aged_scores, dtype=float)
    if new.size == 0 or aged.size == 0:
        raise ContractViolation("both score lists must be nonempty")
    cuts = np.unique(np.concatenate([new, aged]))[::-1]
    new_s = np.sort(new)
    aged_s = np.sort(aged)
    tp = aged.size - np.searchsorted(aged_s, cuts, side="left")
    fp = new.size - np.searchsorted(new_s, cuts, side="left")
    fpr = np.concatenate([[0.0], fp / new.size])
    tpr = np.concatenate([[0.0], tp / aged.size])
    auroc = float(np.trapezoid(tpr, fpr))
    return RocCurve(fpr, tpr, auroc)


def auroc_pairwise(new_scores, aged_scores) -> float:
    """P(aged > new) + P(aged == new) / 2, counted over every pair."""
    new = np.sort(np.asarray(new_scores, dtype=float))
    aged = np.asarray(aged_scores, dtype=float)
    below = np.searchsorted(new, aged, side="left")
    upto = np.searchsorted(new, aged, side="right")
    wins = below.sum(dtype=np.float64) + 0.5 * (upto - below).sum(dtype=np.float64)
    return float(wins / (new.size * aged.size))
