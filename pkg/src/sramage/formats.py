"""On-disk formats.

Snapshot set (``.snap``)
    Line 1 is a JSON header ``{"device_id", "n_cells", "k_samples", "label"}``.
    Then ``k_samples`` lines, each one power-on read as lowercase hex. Bit 0
    is the MSB of the first digit, zero-padded to ``ceil(n_cells / 4)`` digits.

Write trace
    Line 1 is a JSON header ``{"memory_bits", "total_duration",
    "initial_image_hex"?}``. Then CSV lines ``timestamp,first_bit,width_bits,value_hex``.
    The most significant bit of ``value_hex`` lands on ``first_bit``.

CSV exports use 0-based indices throughout.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import FormatError, MalformedTrace
from .sram_model import Category, CellBiasMap, DeviceModel, SnapshotSet
from .swbias import SoftwareBiasProfile, WriteEvent, WriteTrace, heatmap_rows

_CATEGORY_NAMES = {Category.STRONG0: "Strong0", Category.STRONG1: "Strong1", Category.WEAK: "Weak"}
_CATEGORY_CODES = {v: k for k, v in _CATEGORY_NAMES.items()}


def bits_to_hex(bits: np.ndarray) -> str:
    bits = np.asarray(bits, dtype=bool)
    n_digits = math.ceil(bits.size / 4)
    return np.packbits(bits).tobytes().hex()[:n_digits]


def hex_to_bits(text: str, n_bits: int) -> np.ndarray:
    text = text.strip()
    if len(text) != math.ceil(n_bits / 4):
        raise FormatError(f"expected {math.ceil(n_bits / 4)} hex digits, got {len(text)}")
    try:
        raw = bytes.fromhex(text + ("0" if len(text) % 2 else ""))
    except ValueError as exc:
        raise FormatError(f"invalid hex: {exc}") from None
    bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8)).astype(bool)
    if bits[n_bits:].any():
        raise FormatError("nonzero padding bits")
    return bits[:n_bits]


# ---------------------------------------------------------------------------
# snapshots

def dumps_snapshot(s: SnapshotSet) -> str:
    header = {"device_id": s.device_id, "n_cells": s.n_cells, "k_samples": s.k_samples, "label": s.label}
    lines = [json.dumps(header, sort_keys=True)]
    lines.extend(bits_to_hex(row) for row in s.bitmaps)
    return "\n".join(lines) + "\n"


def loads_snapshot(text: str) -> SnapshotSet:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise FormatError("empty snapshot file")
    try:
        header = json.loads(lines[0])
        n, k = int(header["n_cells"]), int(header["k_samples"])
    except (ValueError, KeyError, TypeError) as exc:
        raise FormatError(f"bad snapshot header: {exc}") from None
    if len(lines) - 1 != k:
        raise FormatError(f"header says {k} samples, file has {len(lines) - 1}")
    bitmaps = np.stack([hex_to_bits(ln, n) for ln in lines[1:]]) if k else np.zeros((0, n), bool)
    return SnapshotSet(bitmaps, device_id=str(header.get("device_id", "")), label=str(header.get("label", "")))


def write_snapshot(path, s: SnapshotSet) -> None:
    Path(path).write_text(dumps_snapshot(s))


def read_snapshot(path) -> SnapshotSet:
    return loads_snapshot(Path(path).read_text())


# ---------------------------------------------------------------------------
# bias maps

def write_bias_map_csv(path, m: CellBiasMap) -> None:
    cat = m.category
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cell_index", "ones_count", "category"])
        for i, (c, k) in enumerate(zip(m.ones_count.tolist(), cat.tolist())):
            w.writerow([i, c, _CATEGORY_NAMES[Category(k)]])


def read_bias_map_csv(path, k_samples: int) -> CellBiasMap:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    counts = np.array([int(r["ones_count"]) for r in rows], dtype=np.int64)
    if [int(r["cell_index"]) for r in rows] != list(range(len(rows))):
        raise FormatError("cell_index must run 0..n-1 in order")
    m = CellBiasMap(counts, k_samples)
    stored = np.array([_CATEGORY_CODES[r["category"]] for r in rows], dtype=np.int8)
    if not np.array_equal(stored, m.category):
        raise FormatError("category column disagrees with ones_count")
    return m


# ---------------------------------------------------------------------------
# devices

def save_device(path, d: DeviceModel) -> None:
    with open(path, "wb") as fh:
        np.savez(
            fh,
            margins=d.margins,
            band_map=d.band_map,
            band_size=d.band_size,
            noise_sigma=d.noise_sigma,
            permanent=d.permanent,
            reversible=d.reversible,
            age_years=d.age_years,
        )


def load_device(path) -> DeviceModel:
    with np.load(path) as z:
        return DeviceModel(
            margins=z["margins"].copy(),
            band_map=z["band_map"].copy(),
            band_size=int(z["band_size"]),
            noise_sigma=float(z["noise_sigma"]),
            permanent=z["permanent"].copy(),
            reversible=z["reversible"].copy(),
            age_years=float(z["age_years"]),
        )


# ---------------------------------------------------------------------------
# traces and profiles

def loads_trace(text: str) -> WriteTrace:
    lines = text.splitlines()
    if not lines:
        raise FormatError("empty trace file")
    try:
        header = json.loads(lines[0])
        memory_bits = int(header["memory_bits"])
        duration = float(header["total_duration"])
    except (ValueError, KeyError, TypeError) as exc:
        raise FormatError(f"bad trace header: {exc}") from None
    image = None
    if header.get("initial_image_hex"):
        image = hex_to_bits(header["initial_image_hex"], memory_bits)
    events = []
    for idx, row in enumerate(csv.reader(ln for ln in lines[1:] if ln.strip())):
        if len(row) != 4:
            raise MalformedTrace(idx, f"expected 4 fields, got {len(row)}")
        try:
            events.append(WriteEvent(float(row[0]), int(row[1]), int(row[2]), int(row[3], 16)))
        except ValueError as exc:
            raise MalformedTrace(idx, str(exc)) from None
    trace = WriteTrace(memory_bits, duration, events, image)
    trace.validate()
    return trace


def dumps_trace(t: WriteTrace) -> str:
    header = {"memory_bits": t.memory_bits, "total_duration": t.total_duration}
    if t.initial_image is not None:
        header["initial_image_hex"] = bits_to_hex(t.initial_image)
    out = io.StringIO()
    out.write(json.dumps(header, sort_keys=True) + "\n")
    for ev in t.events:
        digits = max(1, math.ceil(ev.width_bits / 4))
        out.write(f"{ev.timestamp!r},{ev.first_bit},{ev.width_bits},{ev.value:0{digits}x}\n")
    return out.getvalue()


def read_trace(path) -> WriteTrace:
    return loads_trace(Path(path).read_text())


def write_trace(path, t: WriteTrace) -> None:
    Path(path).write_text(dumps_trace(t))


def write_profile_csv(path, p: SoftwareBiasProfile) -> None:
    strength = p.strength
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bit_index", "bias", "strength", "written"])
        for i in range(p.n_bits):
            w.writerow([i, repr(float(p.bias[i])), repr(float(strength[i])), int(p.written[i])])


def read_profile_csv(path) -> SoftwareBiasProfile:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if [int(r["bit_index"]) for r in rows] != list(range(len(rows))):
        raise FormatError("bit_index must run 0..n-1 in order")
    bias = np.array([float(r["bias"]) for r in rows])
    written = np.array([r["written"].strip().lower() in ("1", "true") for r in rows])
    return SoftwareBiasProfile(bias, written)


def write_heatmap_csv(path, p: SoftwareBiasProfile, grid_width: int) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["row", "col", "bias"])
        for r, c, b in heatmap_rows(p, grid_width):
            w.writerow([r, c, repr(b)])


# ---------------------------------------------------------------------------
# evaluation outputs

def write_schedule_csv(path, checkpoints: Sequence[float]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["checkpoint_index", "effective_years"])
        for i, c in enumerate(checkpoints):
            w.writerow([i, repr(float(c))])


def write_roc_csv(path, fpr: Iterable[float], tpr: Iterable[float]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["fpr", "tpr"])
        for f, t in zip(fpr, tpr):
            w.writerow([repr(float(f)), repr(float(t))])


def _finite(obj):
    """Replace NaN and infinities by None so the output is strict JSON."""
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _finite(obj.tolist())
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def write_json(path, obj) -> None:
    text = json.dumps(_finite(obj), indent=2, sort_keys=True, default=_json_default, allow_nan=False)
    Path(path).write_text(text + "\n")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")
