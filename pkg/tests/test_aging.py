import math

import numpy as np
import pytest

from sramage import aging, sram_model as sm, swbias
from sramage.aging import AccelerationParams, AgingConfig
from sramage.errors import ContractViolation


def test_acceleration_factor_reference_params():
    assert aging.acceleration_factor(AccelerationParams()) == pytest.approx(280, rel=0.01)


def test_acceleration_identity():
    p = AccelerationParams(v_str=3.3, t_str=293.0)
    assert aging.acceleration_factor(p) == 1.0


def test_temperature_only():
    p = AccelerationParams(v_str=3.3, t_str=358.0)
    assert aging.acceleration_factor(p) == pytest.approx(1.8, rel=0.03)


def test_acceleration_formula_by_hand():
    p = AccelerationParams(alpha=2.0, n=0.5, e_aa=-0.1, v_nom=1.0, v_str=2.0, t_nom=300.0, t_str=400.0)
    expected = 2.0**4 * math.exp((-0.1 / 8.62e-5) * (1 / 400 - 1 / 300) * 2)
    assert aging.acceleration_factor(p) == pytest.approx(expected, rel=1e-12)


def test_af_monotone():
    afs_v = [aging.acceleration_factor(AccelerationParams(v_str=v)) for v in (3.5, 4.0, 4.75, 5.0)]
    afs_t = [aging.acceleration_factor(AccelerationParams(t_str=t)) for t in (300.0, 330.0, 353.0, 380.0)]
    assert all(b > a for a, b in zip(afs_v, afs_v[1:]))
    assert all(b > a for a, b in zip(afs_t, afs_t[1:]))


@pytest.mark.parametrize("kw", [{"v_nom": 0.0}, {"t_str": -1.0}, {"n": 0.0}])
def test_acceleration_params_validated(kw):
    with pytest.raises(ContractViolation):
        AccelerationParams(**kw)


def test_effective_age():
    assert aging.effective_age(156, AccelerationParams()) == pytest.approx(4.99, abs=0.02)
    assert aging.effective_age(0, AccelerationParams()) == 0.0
    assert aging.effective_age(8766, AccelerationParams(v_str=3.3, t_str=293.0)) == pytest.approx(1.0, rel=1e-3)
    with pytest.raises(ContractViolation):
        aging.effective_age(-1, AccelerationParams())


def test_default_schedule():
    s = aging.default_schedule()
    cp = s.checkpoints
    assert cp[0] == pytest.approx(0.5 / 8766)
    assert cp[4] == pytest.approx(1 / 12)
    # First stress interval is about 4.6 months, the last about five years.
    assert cp[5] * 12 == pytest.approx(4.6, abs=0.05)
    assert cp[-1] == pytest.approx(4.99, abs=0.02)
    assert len(cp) == 18


def test_schedule_must_increase():
    with pytest.raises(ContractViolation):
        aging.AgingSchedule((1.0, 1.0))
    with pytest.raises(ContractViolation):
        aging.AgingSchedule((-1.0,))
    assert len(aging.AgingSchedule(())) == 0


def test_aging_config_validated():
    with pytest.raises(ContractViolation):
        AgingConfig(amplitude=-1)
    with pytest.raises(ContractViolation):
        AgingConfig(permanent_fraction=1.5)


@pytest.fixture
def device(msp430):
    return sm.synth_device(msp430, 77)


def test_zero_duration_is_identity(device):
    prof = swbias.constant_profile(device.n_cells, 0.0)
    assert aging.apply_aging(device, prof, 0.0, AgingConfig(amplitude=2.0)) is device


def test_negative_duration_rejected(device):
    with pytest.raises(ContractViolation):
        aging.apply_aging(device, swbias.constant_profile(device.n_cells, 0.0), -1.0, AgingConfig())


def test_direction_convention(device):
    cfg = AgingConfig(amplitude=2.0)
    aged = aging.apply_aging(device, swbias.constant_profile(device.n_cells, 0.0), 1.0, cfg)
    # Holding 0 pushes toward powering on as 1.
    assert np.all(aged.total_shift == pytest.approx(2.0))


def test_composition(device, rng):
    prof = swbias.SoftwareBiasProfile(rng.random(device.n_cells), rng.random(device.n_cells) < 0.8)
    cfg = AgingConfig(amplitude=1.7)
    two_step = aging.apply_aging(aging.apply_aging(device, prof, 0.4, cfg), prof, 2.1, cfg)
    direct = aging.apply_aging(device, prof, 2.5, cfg)
    assert np.max(np.abs(two_step.effective_margins - direct.effective_margins)) < 1e-12


def test_antisymmetry(device, rng):
    b = rng.random(device.n_cells)
    cfg = AgingConfig(amplitude=1.3)
    w = np.ones(device.n_cells, bool)
    a1 = aging.apply_aging(device, swbias.SoftwareBiasProfile(b, w), 3.0, cfg)
    a2 = aging.apply_aging(device, swbias.SoftwareBiasProfile(1 - b, w), 3.0, cfg)
    assert np.allclose(a1.total_shift, -a2.total_shift, atol=1e-14)


def test_unwritten_cells_unchanged(device):
    written = np.zeros(device.n_cells, bool)
    written[::2] = True
    prof = swbias.SoftwareBiasProfile(np.zeros(device.n_cells), written)
    aged = aging.apply_aging(device, prof, 5.0, AgingConfig(amplitude=3.0))
    assert np.all(aged.effective_margins[1::2] == device.margins[1::2])


def test_monotone_in_time(device):
    prof = swbias.constant_profile(device.n_cells, 0.2)
    cfg = AgingConfig(amplitude=1.0)
    shifts = [aging.apply_aging(device, prof, t, cfg).total_shift[0] for t in (0.1, 0.5, 1, 2, 5)]
    assert all(b > a for a, b in zip(shifts, shifts[1:]))


def test_permanent_split(device):
    prof = swbias.constant_profile(device.n_cells, 0.0)
    aged = aging.apply_aging(device, prof, 2.0, AgingConfig(amplitude=1.0, permanent_fraction=0.8))
    assert np.allclose(aged.permanent, 0.8 * aged.total_shift)


# -- recovery ------------------------------------------------------------------

def test_recovery_identity_and_saturation(device):
    cfg = AgingConfig(amplitude=2.0, permanent_fraction=0.7)
    aged = aging.apply_aging(device, swbias.constant_profile(device.n_cells, 0.0), 5.0, cfg)
    assert aging.apply_recovery(aged, 0.0, cfg) is aged
    rested = aging.apply_recovery(aged, 42.0, cfg)
    assert np.allclose(rested.total_shift, 0.7 * aged.total_shift, atol=1e-12)
    assert np.array_equal(rested.permanent, aged.permanent)
    longer = aging.apply_recovery(aged, 400.0, cfg)
    assert np.array_equal(longer.total_shift, rested.total_shift)


def test_recovery_bounds(device, rng):
    prof = swbias.SoftwareBiasProfile(rng.random(device.n_cells), np.ones(device.n_cells, bool))
    for rho in (0.0, 0.3, 0.8, 1.0):
        cfg = AgingConfig(amplitude=2.0, permanent_fraction=rho)
        aged = aging.apply_aging(device, prof, 3.0, cfg)
        pre = np.abs(aged.total_shift)
        for rest in (0.5, 3.0, 10.0, 42.0, 100.0):
            post = np.abs(aging.apply_recovery(aged, rest, cfg).total_shift)
            assert np.all(post >= rho * pre - 1e-12)
            assert np.all(post <= pre + 1e-12)


def test_recovery_factor_logarithmic():
    cfg = AgingConfig()
    assert aging.recovery_factor(0.0, cfg) == 1.0
    assert aging.recovery_factor(42.0, cfg) == pytest.approx(0.0, abs=1e-15)
    assert aging.recovery_factor(1.0, cfg) == pytest.approx(1 - math.log(2) / math.log(43))
    with pytest.raises(ContractViolation):
        aging.apply_recovery(sm.DeviceModel.fresh(np.zeros(4)), -1.0, cfg)


# -- calibration ---------------------------------------------------------------

def test_amplitude_calibration_is_least_squares(msp430):
    a = aging.calibrate_amplitude(msp430)
    shift = a * 5.0**0.25

    def loss(s):
        c1, c0, _ = aging.expected_strong_change(msp430, s)
        return (c1 - 0.0856) ** 2 + (c0 + 0.0964) ** 2

    assert loss(shift) <= min(loss(shift * 0.99), loss(shift * 1.01))


def test_expected_change_matches_simulation(msp430):
    shift = 2.5
    c1, c0, cm = aging.expected_strong_change(msp430, shift)
    prof = swbias.constant_profile(msp430.n_cells, 0.0)
    cfg = AgingConfig(amplitude=shift)
    d1 = d0 = 0.0
    n = 200
    for s in range(n):
        d = sm.synth_device(msp430, s)
        before = sm.estimate_bias_map(sm.sample_power_on(d, 51, 10 * s))
        after = sm.estimate_bias_map(sm.sample_power_on(aging.apply_aging(d, prof, 1.0, cfg), 51, 10 * s + 1))
        d1 += np.mean(after.category == 1) - np.mean(before.category == 1)
        d0 += np.mean(after.category == 0) - np.mean(before.category == 0)
    assert d1 / n == pytest.approx(c1, abs=0.005)
    assert d0 / n == pytest.approx(c0, abs=0.005)


def test_unbiased_software_changes_nothing(msp430):
    a = aging.calibrate_amplitude(msp430)
    prof = swbias.constant_profile(msp430.n_cells, 0.5)
    d = sm.synth_device(msp430, 5)
    aged = aging.apply_aging(d, prof, 5.0, AgingConfig(amplitude=a))
    assert np.array_equal(aged.effective_margins, d.margins)
