"""Run configuration loading and validation."""

import json

import pytest

from midastouch.config import ConfigError, RunConfig


def test_defaults_validate():
    cfg = RunConfig()
    cfg.validate()
    assert cfg.epsilon == 6
    assert cfg.committee_size == 4
    assert cfg.fee_rate == 0.05


@pytest.mark.parametrize("changes", [
    {"epsilon": 0},
    {"fee_rate": 1.0},
    {"fee_rate": -0.1},
    {"committee_size": -1},
    {"deposit": -5},
    {"finality_depth": 0},
    {"blocks": -1},
    {"penalty_rate": 1.5},
    {"workload": "chaos"},
])
def test_bad_values_rejected(changes):
    with pytest.raises(ConfigError):
        RunConfig(**changes).validate()


def test_replace_validates():
    cfg = RunConfig().replace(epsilon=2, seed=42)
    assert cfg.epsilon == 2 and cfg.seed == 42
    with pytest.raises(ConfigError):
        RunConfig().replace(epsilon=0)


def test_from_dict_rejects_unknown_keys():
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"seed": 1, "turbo": True})


def test_from_file_round_trip(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"seed": 5, "epsilon": 3, "blocks": 12}))
    cfg = RunConfig.from_file(path)
    assert (cfg.seed, cfg.epsilon, cfg.blocks) == (5, 3, 12)


def test_digest_tracks_content():
    a = RunConfig(seed=1)
    b = RunConfig(seed=1)
    c = RunConfig(seed=2)
    assert a.digest() == b.digest()
    assert a.digest() != c.digest()
    assert len(a.digest()) == 16
