import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sramage import formats, sram_model as sm, swbias
from sramage.errors import FormatError, MalformedTrace


@settings(max_examples=80, deadline=None)
@given(st.lists(st.booleans(), min_size=1, max_size=70))
def test_hex_round_trip(bits):
    b = np.array(bits)
    text = formats.bits_to_hex(b)
    assert len(text) == math.ceil(b.size / 4)
    assert np.array_equal(formats.hex_to_bits(text, b.size), b)


def test_bit_zero_is_msb():
    bits = np.zeros(8, bool)
    bits[0] = True
    assert formats.bits_to_hex(bits) == "80"
    assert formats.bits_to_hex(np.array([0, 0, 0, 1, 1], bool)) == "18"


def test_hex_rejects_bad_input():
    with pytest.raises(FormatError):
        formats.hex_to_bits("ff", 4)
    with pytest.raises(FormatError):
        formats.hex_to_bits("zz", 8)
    with pytest.raises(FormatError):
        formats.hex_to_bits("1", 3)  # padding bit set


def test_snapshot_round_trip(tmp_path, msp430):
    s = sm.sample_power_on(sm.synth_device(msp430, 1), 5, 2, device_id="dev_001", label="20C")
    path = tmp_path / "a.snap"
    formats.write_snapshot(path, s)
    header = json.loads(path.read_text().splitlines()[0])
    assert header == {"device_id": "dev_001", "k_samples": 5, "label": "20C", "n_cells": 4096}
    back = formats.read_snapshot(path)
    assert np.array_equal(back.bitmaps, s.bitmaps) and back.device_id == "dev_001"


def test_snapshot_count_mismatch():
    with pytest.raises(FormatError):
        formats.loads_snapshot('{"device_id": "x", "n_cells": 4, "k_samples": 3, "label": ""}\nf\nf\n')


def test_bias_map_round_trip(tmp_path):
    m = sm.CellBiasMap(np.array([0, 51, 7, 51]), 51)
    formats.write_bias_map_csv(tmp_path / "m.csv", m)
    lines = (tmp_path / "m.csv").read_text().splitlines()
    assert lines[0] == "cell_index,ones_count,category"
    assert lines[1:3] == ["0,0,Strong0", "1,51,Strong1"]
    assert np.array_equal(formats.read_bias_map_csv(tmp_path / "m.csv", 51).ones_count, m.ones_count)


def test_device_round_trip(tmp_path, msp430):
    d = sm.synth_device(msp430, 3)
    formats.save_device(tmp_path / "d.npz", d)
    e = formats.load_device(tmp_path / "d.npz")
    assert np.array_equal(d.margins, e.margins) and np.array_equal(d.band_map, e.band_map)


def test_trace_round_trip(tmp_path):
    t = swbias.WriteTrace(16, 10.0, [swbias.WriteEvent(0.0, 0, 8, 0xA5), swbias.WriteEvent(2.5, 4, 4, 0x3)],
                          initial_image=np.arange(16) % 3 == 0)
    formats.write_trace(tmp_path / "t.trace", t)
    back = formats.read_trace(tmp_path / "t.trace")
    assert back.events == t.events and np.array_equal(back.initial_image, t.initial_image)
    assert np.array_equal(swbias.compute_bias_profile(back).bias, swbias.compute_bias_profile(t).bias)


def test_trace_bad_row():
    with pytest.raises(MalformedTrace) as err:
        formats.loads_trace('{"memory_bits": 8, "total_duration": 1}\n0,0,1,1\n0.5,0,1\n')
    assert err.value.event_index == 1


def test_profile_round_trip(tmp_path):
    p = swbias.SoftwareBiasProfile(np.array([0.0, 0.25, 1.0, 0.3]), np.array([True, True, True, False]))
    formats.write_profile_csv(tmp_path / "p.csv", p)
    assert (tmp_path / "p.csv").read_text().splitlines()[0] == "bit_index,bias,strength,written"
    q = formats.read_profile_csv(tmp_path / "p.csv")
    assert np.array_equal(q.bias, p.bias) and np.array_equal(q.written, p.written)


def test_heatmap_and_schedule(tmp_path):
    p = swbias.constant_profile(4, 0.25)
    formats.write_heatmap_csv(tmp_path / "h.csv", p, 2)
    assert (tmp_path / "h.csv").read_text().splitlines() == ["row,col,bias", "0,0,0.25", "0,1,0.25", "1,0,0.25", "1,1,0.25"]
    formats.write_schedule_csv(tmp_path / "s.csv", [0.0, 0.5])
    assert (tmp_path / "s.csv").read_text().splitlines() == ["checkpoint_index,effective_years", "0,0.0", "1,0.5"]


def test_json_is_strict(tmp_path):
    formats.write_json(tmp_path / "x.json", {"a": float("nan"), "b": np.float64(1.5), "c": np.arange(2)})
    text = (tmp_path / "x.json").read_text()
    assert json.loads(text) == {"a": None, "b": 1.5, "c": [0, 1]}
    assert "NaN" not in text
