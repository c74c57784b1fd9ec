import json

import pytest

from sramage.config import ExperimentConfig
from sramage.errors import ConfigError


def test_seed_is_mandatory():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"seed": None})


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError, match="unknown"):
        ExperimentConfig.from_dict({"seed": 1, "nCells": 10})


@pytest.mark.parametrize("kw", [
    {"k_samples": 50},
    {"band_size": 300},
    {"resample": "bootstrap"},
    {"classifiers": ["Telepathic"]},
    {"profiles": [{"kind": "zeros"}, {"kind": "zeros"}]},
    {"profiles": [{"name": "x", "kind": "sideways"}]},
    {"seed": -4},
])
def test_invalid_values(kw):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"seed": 1, **kw})


def test_output_cannot_overwrite_input(tmp_path):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"seed": 1, "out": str(tmp_path),
                                    "profiles": [{"name": "t", "kind": "trace", "path": str(tmp_path)}]})


def test_load_with_overrides(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"seed": 3, "threshold": 2.5}))
    cfg = ExperimentConfig.load(path, {"seed": 9, "out": None})
    assert cfg.seed == 9 and cfg.threshold == 2.5 and cfg.out == "out"
    assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg


def test_explicit_generative_params():
    cfg = ExperimentConfig.from_dict({"seed": 1, "generative": {"structural_shift": 5.0, "margin_sigma": 10.0}})
    p = cfg.generative_params()
    assert (p.structural_shift, p.margin_sigma, p.n_cells) == (5.0, 10.0, 4096)


def test_explicit_amplitude_and_schedule():
    cfg = ExperimentConfig.from_dict({"seed": 1, "aging": {"amplitude": 2.0, "permanent_fraction": 0.5},
                                      "schedule": [0.1, 1.0]})
    assert cfg.aging_config(None).permanent_fraction == 0.5
    assert cfg.aging_schedule().checkpoints == (0.1, 1.0)
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"seed": 1, "schedule": [1.0, 0.5]}).aging_schedule()


def test_profile_size_must_match(tmp_path):
    cfg = ExperimentConfig.from_dict({"seed": 1, "n_cells": 1024, "band_size": 256,
                                      "profiles": [{"name": "c", "kind": "constant", "bias": 0.1}]})
    assert cfg.software_profiles()["c"].n_bits == 1024
