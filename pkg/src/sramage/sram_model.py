"""SRAM power-on population model.

Each cell carries a latent margin ``m`` (positive favours powering on as 1).
A power-on is a race between the margin and Gaussian supply-ramp noise, so
a single read returns 1 with probability ``Phi(m / noise_sigma)``.

Margins are drawn per structural band: cells in a 1-majority band come from
``N(+structural_shift, margin_sigma)`` and cells in a 0-majority band from
``N(-structural_shift, margin_sigma)``.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, replace
from enum import IntEnum
from typing import Optional, Sequence

import numpy as np
from scipy import special

from .errors import AmbiguousBand, CalibrationInfeasible, ContractViolation, DegenerateInput
from .seeding import STREAM_MORAN, rng_for

logger = logging.getLogger(__name__)

DEFAULT_K = 51
DEFAULT_BAND_SIZE = 512
DEFAULT_GRID_WIDTH = 64
DEFAULT_PERMUTATIONS = 999

# Band composition of the MSP430-like family: strong-majority / strong-minority / weak.
MSP430_BAND_COMPOSITION = (0.68, 0.20, 0.12)


class Category(IntEnum):
    STRONG0 = 0
    STRONG1 = 1
    WEAK = 2


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


def log_ndtr_pow(x: np.ndarray, k: int) -> np.ndarray:
    """``Phi(x) ** k`` computed in log space."""
    return np.exp(k * special.log_ndtr(x))


@dataclass(frozen=True)
class GenerativeParams:
    n_cells: int
    band_size: int
    structural_shift: float
    margin_sigma: float
    noise_sigma: float = 1.0
    band_majority_fraction_strong: float = MSP430_BAND_COMPOSITION[0]
    band_minority_fraction_strong: float = MSP430_BAND_COMPOSITION[1]
    band_fraction_weak: float = MSP430_BAND_COMPOSITION[2]
    # Majority value of band 0; None lets each device's seed choose it.
    band_phase: Optional[int] = None
    # Explicit per-band majorities; overrides alternation when given.
    band_pattern: Optional[tuple] = None

    def __post_init__(self):
        if self.n_cells < 1 or self.band_size < 1 or self.n_cells % self.band_size:
            raise ContractViolation(
                f"band_size {self.band_size} must divide n_cells {self.n_cells}"
            )
        if not (self.margin_sigma > 0 and self.noise_sigma > 0):
            raise ContractViolation("margin_sigma and noise_sigma must be positive")
        total = (
            self.band_majority_fraction_strong
            + self.band_minority_fraction_strong
            + self.band_fraction_weak
        )
        if abs(total - 1.0) > 1e-9:
            raise ContractViolation(f"band fractions sum to {total}, expected 1")
        if self.band_phase not in (None, 0, 1):
            raise ContractViolation("band_phase must be 0, 1 or None")
        if self.band_pattern is not None:
            pattern = tuple(int(v) for v in self.band_pattern)
            if len(pattern) != self.n_bands or any(v not in (0, 1) for v in pattern):
                raise ContractViolation(
                    f"band_pattern must list {self.n_bands} values in {{0, 1}}"
                )
            object.__setattr__(self, "band_pattern", pattern)

    @property
    def n_bands(self) -> int:
        return self.n_cells // self.band_size

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        if d["band_pattern"] is not None:
            d["band_pattern"] = list(d["band_pattern"])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "GenerativeParams":
        d = dict(d)
        if d.get("band_pattern") is not None:
            d["band_pattern"] = tuple(d["band_pattern"])
        return cls(**d)


@dataclass(frozen=True)
class DeviceModel:
    """Simulated ground truth for one chip.

    ``margins`` are the as-manufactured margins. Aging adds to ``permanent``
    and ``reversible``; the power-on behaviour always uses
    :attr:`effective_margins`.
    """

    margins: np.ndarray
    band_map: np.ndarray
    band_size: int
    noise_sigma: float
    permanent: np.ndarray
    reversible: np.ndarray
    age_years: float = 0.0

    def __post_init__(self):
        n = self.margins.shape[0]
        if n % self.band_size or self.band_map.shape[0] != n // self.band_size:
            raise ContractViolation("band_map length must equal n_cells / band_size")
        if self.permanent.shape != (n,) or self.reversible.shape != (n,):
            raise ContractViolation("age_state arrays must have n_cells entries")
        for name in ("margins", "band_map", "permanent", "reversible"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    @classmethod
    def fresh(cls, margins, band_map=None, band_size=None, noise_sigma: float = 1.0) -> "DeviceModel":
        """Unaged device from explicit margins (one band of majority 1 by default)."""
        margins = np.asarray(margins, dtype=float)
        if band_map is None:
            band_map, band_size = np.ones(1, dtype=np.int8), margins.shape[0]
        zeros = np.zeros(margins.shape[0])
        return cls(margins, np.asarray(band_map, dtype=np.int8), int(band_size), float(noise_sigma), zeros, zeros.copy())

    @property
    def n_cells(self) -> int:
        return self.margins.shape[0]

    @property
    def effective_margins(self) -> np.ndarray:
        return self.margins + self.permanent + self.reversible

    @property
    def total_shift(self) -> np.ndarray:
        return self.permanent + self.reversible

    def power_on_probability(self) -> np.ndarray:
        return special.ndtr(self.effective_margins / self.noise_sigma)

    def cell_band_majority(self) -> np.ndarray:
        return np.repeat(self.band_map, self.band_size)

    def negated(self) -> "DeviceModel":
        """Mirror image: every margin and shift negated, every band majority flipped."""
        return replace(
            self,
            margins=-self.margins,
            band_map=1 - self.band_map,
            permanent=-self.permanent,
            reversible=-self.reversible,
        )


@dataclass(frozen=True)
class SnapshotSet:
    bitmaps: np.ndarray  # (k_samples, n_cells) bool
    device_id: str = ""
    label: str = "20C"

    def __post_init__(self):
        b = np.asarray(self.bitmaps, dtype=bool)
        if b.ndim != 2:
            raise ContractViolation("bitmaps must be a (k_samples, n_cells) array")
        if b.shape[0] % 2 == 0:
            raise ContractViolation(f"k_samples must be odd, got {b.shape[0]}")
        object.__setattr__(self, "bitmaps", _frozen(b))

    @property
    def k_samples(self) -> int:
        return self.bitmaps.shape[0]

    @property
    def n_cells(self) -> int:
        return self.bitmaps.shape[1]


@dataclass(frozen=True)
class CellBiasMap:
    ones_count: np.ndarray
    k_samples: int

    def __post_init__(self):
        c = np.asarray(self.ones_count, dtype=np.int64)
        if c.ndim != 1:
            raise ContractViolation("ones_count must be one-dimensional")
        if self.k_samples < 1 or self.k_samples % 2 == 0:
            raise ContractViolation(f"k_samples must be odd, got {self.k_samples}")
        if c.size and (c.min() < 0 or c.max() > self.k_samples):
            raise ContractViolation("ones_count outside [0, k_samples]")
        object.__setattr__(self, "ones_count", _frozen(c))

    @property
    def n_cells(self) -> int:
        return self.ones_count.shape[0]

    @property
    def category(self) -> np.ndarray:
        cat = np.full(self.n_cells, Category.WEAK, dtype=np.int8)
        cat[self.ones_count == self.k_samples] = Category.STRONG1
        cat[self.ones_count == 0] = Category.STRONG0
        return cat

    @property
    def bias(self) -> np.ndarray:
        return self.ones_count / self.k_samples

    @property
    def majority(self) -> np.ndarray:
        return (2 * self.ones_count > self.k_samples).astype(np.int8)

    @property
    def mean_bias(self) -> float:
        return float(self.ones_count.sum()) / (self.n_cells * self.k_samples)


@dataclass(frozen=True)
class BandMap:
    band_size: int
    majority: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "majority", _frozen(np.asarray(self.majority, dtype=np.int8)))

    @property
    def n_cells(self) -> int:
        return self.band_size * self.majority.shape[0]

    def per_cell(self) -> np.ndarray:
        return np.repeat(self.majority, self.band_size)


@dataclass(frozen=True)
class FamilySummary:
    mean_bias: float
    portion_strong: float
    portion_weak: float
    weak_bias_mean: float
    portion_strong_1: float
    portion_strong_0: float
    morans_i: float = float("nan")
    morans_p: float = float("nan")
    weak_defined: bool = True

    def to_dict(self) -> dict:
        return dict(self.__dict__)


# ---------------------------------------------------------------------------
# closed-form strong-cell probabilities

_STD_GRID = np.linspace(-9.0, 9.0, 3601)
_STD_PDF = np.exp(-0.5 * _STD_GRID**2)
_STD_PDF /= np.trapezoid(_STD_PDF, _STD_GRID)


def strong_probabilities(shift, margin_sigma, noise_sigma=1.0, k_samples=DEFAULT_K):
    """Probability that a cell with margin ``N(shift, margin_sigma)`` is Strong1 / Strong0.

    Accepts broadcastable arrays for ``shift`` and ``margin_sigma``.
    """
    shift = np.asarray(shift, dtype=float)[..., None]
    sig = np.asarray(margin_sigma, dtype=float)[..., None]
    z = (shift + sig * _STD_GRID) / noise_sigma
    p1 = np.trapezoid(log_ndtr_pow(z, k_samples) * _STD_PDF, _STD_GRID, axis=-1)
    p0 = np.trapezoid(log_ndtr_pow(-z, k_samples) * _STD_PDF, _STD_GRID, axis=-1)
    return p1, p0


def band_composition(shift, margin_sigma, noise_sigma=1.0, k_samples=DEFAULT_K):
    """Expected (strong-majority, strong-minority, weak) fractions within a band."""
    p_maj, p_min = strong_probabilities(shift, margin_sigma, noise_sigma, k_samples)
    return p_maj, p_min, 1.0 - p_maj - p_min


def calibrate_generative_params(
    target: Optional[FamilySummary],
    band_comp: Sequence[float],
    n_cells: int,
    band_size: int,
    k_samples: int = DEFAULT_K,
    resolution: float = 0.01,
    tolerance: float = 0.02,
    **extra,
) -> GenerativeParams:
    """Grid-search (structural_shift, margin_sigma) so band composition hits ``band_comp``.

    ``noise_sigma`` is fixed at 1; only the ratios matter. The search runs
    coarse-to-fine and ends on a lattice of spacing ``resolution``. It is
    fully deterministic.
    """
    f_maj, f_min, f_weak = (float(v) for v in band_comp)
    if min(f_maj, f_min, f_weak) < 0 or max(f_maj, f_min, f_weak) > 1:
        raise CalibrationInfeasible(f"band fractions outside [0, 1]: {band_comp}")
    if abs(f_maj + f_min + f_weak - 1) > 1e-9:
        raise CalibrationInfeasible(f"band fractions do not sum to 1: {band_comp}")
    if f_min > f_maj:
        raise CalibrationInfeasible("minority strong fraction exceeds majority strong fraction")
    if not n_cells >= band_size >= 1:
        raise ContractViolation("need n_cells >= band_size >= 1")
    if target is not None:
        for name in ("portion_strong", "portion_weak", "portion_strong_1", "portion_strong_0"):
            v = getattr(target, name)
            if not 0 <= v <= 1:
                raise CalibrationInfeasible(f"target {name}={v} outside [0, 1]")
        if abs((f_maj + f_min) - target.portion_strong) > tolerance:
            raise CalibrationInfeasible(
                f"band composition implies portion_strong {f_maj + f_min:.4f}, "
                f"target is {target.portion_strong:.4f}"
            )

    def loss(shift, sig):
        p_maj, p_min = strong_probabilities(shift, sig, 1.0, k_samples)
        return (p_maj - f_maj) ** 2 + (p_min - f_min) ** 2

    symmetric = abs(f_maj - f_min) < 1e-12
    shifts = np.array([0.0]) if symmetric else np.arange(0.0, 40.0 + 1e-9, 0.5)
    sigmas = np.arange(0.5, 60.0 + 1e-9, 0.5)
    best = None
    for step in (0.5, 0.1, resolution):
        S, G = np.meshgrid(shifts, sigmas, indexing="ij")
        L = loss(S, G)
        i, j = np.unravel_index(np.argmin(L), L.shape)
        best = (float(S[i, j]), float(G[i, j]), float(L[i, j]))
        if step == resolution:
            break
        nxt = resolution if step == 0.1 else 0.1
        if not symmetric:
            shifts = np.round(np.arange(max(0.0, best[0] - step), best[0] + step + 1e-9, nxt), 10)
        sigmas = np.round(np.arange(max(nxt, best[1] - step), best[1] + step + 1e-9, nxt), 10)

    shift, sig, _ = best
    p_maj, p_min, p_weak = band_composition(shift, sig, 1.0, k_samples)
    worst = max(abs(p_maj - f_maj), abs(p_min - f_min), abs(p_weak - f_weak))
    if worst > tolerance:
        raise CalibrationInfeasible(
            f"closest model composition ({p_maj:.3f}, {p_min:.3f}, {p_weak:.3f}) "
            f"misses target {tuple(band_comp)} by {worst:.3f}"
        )
    logger.debug("calibrated shift=%.2f sigma=%.2f", shift, sig)
    return GenerativeParams(
        n_cells=n_cells,
        band_size=band_size,
        structural_shift=shift,
        margin_sigma=sig,
        noise_sigma=1.0,
        band_majority_fraction_strong=f_maj,
        band_minority_fraction_strong=f_min,
        band_fraction_weak=1.0 - f_maj - f_min,
        **extra,
    )


def msp430_params(n_cells: int = 4096, band_size: int = DEFAULT_BAND_SIZE, **extra) -> GenerativeParams:
    """Calibrated parameters for the MSP430-like family (cached per layout)."""
    key = (n_cells, band_size, tuple(sorted(extra.items())))
    if key not in _PARAM_CACHE:
        target = FamilySummary(
            mean_bias=0.519, portion_strong=0.884, portion_weak=0.116, weak_bias_mean=0.499,
            portion_strong_1=0.461, portion_strong_0=0.423,
        )
        _PARAM_CACHE[key] = calibrate_generative_params(
            target, MSP430_BAND_COMPOSITION, n_cells, band_size, **extra
        )
    return _PARAM_CACHE[key]


_PARAM_CACHE: dict = {}


# ---------------------------------------------------------------------------
# devices and sampling

def band_majorities(params: GenerativeParams, rng: np.random.Generator) -> np.ndarray:
    if params.band_pattern is not None:
        return np.array(params.band_pattern, dtype=np.int8)
    # Always consume one draw so the margin stream does not depend on the phase setting.
    drawn = int(rng.integers(0, 2))
    phase = drawn if params.band_phase is None else params.band_phase
    return np.where(np.arange(params.n_bands) % 2 == 0, phase, 1 - phase).astype(np.int8)


def synth_device(params: GenerativeParams, seed: int) -> DeviceModel:
    rng = np.random.default_rng(seed)
    bands = band_majorities(params, rng)
    sign = np.repeat(2.0 * bands - 1.0, params.band_size)
    margins = sign * params.structural_shift + params.margin_sigma * rng.standard_normal(params.n_cells)
    zeros = np.zeros(params.n_cells)
    return DeviceModel(
        margins=margins,
        band_map=bands,
        band_size=params.band_size,
        noise_sigma=params.noise_sigma,
        permanent=zeros,
        reversible=zeros.copy(),
    )


def sample_power_on(
    device: DeviceModel,
    k_samples: int = DEFAULT_K,
    seed: int = 0,
    device_id: str = "",
    label: str = "20C",
    antithetic: bool = False,
) -> SnapshotSet:
    """Read ``k_samples`` independent power-on states.

    A read is 1 when ``margin / noise_sigma + z > 0`` for standard normal
    ``z``. ``antithetic=True`` negates the noise stream, so sampling the
    :meth:`DeviceModel.negated` device antithetically yields the exact
    complement of the original reads.
    """
    if k_samples < 1 or k_samples % 2 == 0:
        raise ContractViolation(f"k_samples must be odd and >= 1, got {k_samples}")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((k_samples, device.n_cells))
    if antithetic:
        z = -z
    bits = (device.effective_margins / device.noise_sigma + z) > 0
    return SnapshotSet(bits, device_id=device_id, label=label)


def estimate_bias_map(s: SnapshotSet) -> CellBiasMap:
    return CellBiasMap(s.bitmaps.sum(axis=0, dtype=np.int64), s.k_samples)


# ---------------------------------------------------------------------------
# spatial autocorrelation

def _rook_pairs(n: int, grid_width: int):
    idx = np.arange(n).reshape(-1, grid_width)
    left = idx[:, :-1].ravel()
    right = idx[:, 1:].ravel()
    up = idx[:-1, :].ravel()
    down = idx[1:, :].ravel()
    return np.concatenate([left, up]), np.concatenate([right, down])


def _moran_batch(z: np.ndarray, a: np.ndarray, b: np.ndarray, n: int, w_total: float) -> np.ndarray:
    # Each unordered neighbour pair appears twice in the full weight matrix.
    num = 2.0 * np.sum(z[..., a] * z[..., b], axis=-1)
    den = np.sum(z * z, axis=-1)
    return (n / w_total) * num / den


def morans_i(
    values,
    grid_width: int = DEFAULT_GRID_WIDTH,
    permutations: int = DEFAULT_PERMUTATIONS,
    seed: int = 0,
) -> tuple[float, float]:
    """Global Moran's I with binary rook weights on a row-major grid.

    The p-value is two-sided around the null expectation ``-1/(N-1)``.
    Grids of at most 10 cells are tested against every permutation;
    larger grids use ``permutations`` random shuffles.
    """
    x = np.asarray(values, dtype=float).ravel()
    n = x.size
    if grid_width < 1 or n % grid_width:
        raise ContractViolation(f"grid_width {grid_width} must divide {n}")
    if n < 2:
        raise DegenerateInput("need at least two values")
    z = x - x.mean()
    if not np.any(np.abs(z) > 1e-15 * max(1.0, np.abs(x).max())):
        raise DegenerateInput("values have zero variance")
    a, b = _rook_pairs(n, grid_width)
    if a.size == 0:
        raise DegenerateInput("grid has no neighbouring cells")
    w_total = 2.0 * a.size
    i_obs = float(_moran_batch(z, a, b, n, w_total))
    expected = -1.0 / (n - 1)
    eps = 1e-12
    if n <= 10:
        hits = total = 0
        perms = itertools.permutations(range(n))
        while True:
            chunk = np.array(list(itertools.islice(perms, 50000)))
            if chunk.size == 0:
                break
            sims = _moran_batch(z[chunk], a, b, n, w_total)
            hits += int(np.sum(np.abs(sims - expected) >= abs(i_obs - expected) - eps))
            total += chunk.shape[0]
        return i_obs, hits / total
    if permutations < 1:
        return i_obs, float("nan")
    rng = rng_for(seed, STREAM_MORAN)
    hits = 0
    done = 0
    while done < permutations:
        m = min(256, permutations - done)
        order = np.argsort(rng.random((m, n)), axis=1)
        sims = _moran_batch(z[order], a, b, n, w_total)
        hits += int(np.sum(np.abs(sims - expected) >= abs(i_obs - expected) - eps))
        done += m
    return i_obs, (hits + 1) / (permutations + 1)


def summarize(
    m: CellBiasMap,
    grid_width: int = DEFAULT_GRID_WIDTH,
    permutations: int = DEFAULT_PERMUTATIONS,
    seed: int = 0,
    binary: bool = False,
    spatial: bool = True,
) -> FamilySummary:
    """Whole-SRAM statistics in the layout of the new-device table.

    ``binary`` runs Moran's I on majority values instead of fractional
    biases. ``spatial=False`` skips Moran's I entirely (reported as NaN).
    """
    if m.n_cells % grid_width:
        raise ContractViolation(f"grid_width {grid_width} must divide {m.n_cells}")
    n = m.n_cells
    cat = m.category
    n1 = int(np.count_nonzero(cat == Category.STRONG1))
    n0 = int(np.count_nonzero(cat == Category.STRONG0))
    weak = cat == Category.WEAK
    nw = n - n1 - n0
    weak_defined = nw > 0
    weak_mean = float(m.ones_count[weak].mean() / m.k_samples) if weak_defined else 0.5
    mi, mp = float("nan"), float("nan")
    if spatial:
        vals = m.majority if binary else m.bias
        try:
            mi, mp = morans_i(vals, grid_width, permutations, seed)
        except DegenerateInput:
            logger.info("Moran's I undefined for a constant map")
    return FamilySummary(
        mean_bias=m.mean_bias,
        portion_strong=(n1 + n0) / n,
        portion_weak=nw / n,
        weak_bias_mean=weak_mean,
        portion_strong_1=n1 / n,
        portion_strong_0=n0 / n,
        morans_i=mi,
        morans_p=mp,
        weak_defined=weak_defined,
    )


def infer_band_map(m: CellBiasMap, band_size: int) -> BandMap:
    """Majority vote of strongly-biased cells per band; ties go to 1."""
    if band_size < 1 or m.n_cells % band_size:
        raise ContractViolation(f"band_size {band_size} must divide {m.n_cells}")
    cat = m.category.reshape(-1, band_size)
    s1 = np.count_nonzero(cat == Category.STRONG1, axis=1)
    s0 = np.count_nonzero(cat == Category.STRONG0, axis=1)
    empty = np.flatnonzero(s1 + s0 == 0)
    if empty.size:
        raise AmbiguousBand(empty.tolist())
    return BandMap(band_size, (s1 >= s0).astype(np.int8))


def band_composition_observed(m: CellBiasMap, band_map: np.ndarray, band_size: int):
    """Measured (strong-majority, strong-minority, weak) fractions against a known band map."""
    cat = m.category
    maj = np.repeat(np.asarray(band_map), band_size)
    strong = cat != Category.WEAK
    agree = strong & (cat == maj)
    n = m.n_cells
    return (
        np.count_nonzero(agree) / n,
        np.count_nonzero(strong & ~agree) / n,
        np.count_nonzero(~strong) / n,
    )
