import json

import pytest

from framepath.config import Config, ConfigError, config_from_dict, load_config


def test_desk_defaults_valid():
    Config().validate()


def test_full_preset_valid():
    cfg = config_from_dict({"preset": "full"})
    assert cfg.token_dim == 768
    assert 2 * cfg.lstm_hidden == cfg.token_dim + cfg.pos_dim


def test_residual_rule_enforced():
    with pytest.raises(ConfigError, match="lstm_hidden"):
        Config(lstm_hidden=33).validate()


def test_unknown_key_is_hard_error():
    with pytest.raises(ConfigError, match="unknown config keys"):
        config_from_dict({"learning_rate": 1e-3})


def test_unknown_preset_rejected():
    with pytest.raises(ConfigError, match="preset"):
        config_from_dict({"preset": "huge"})


def test_override_beats_preset():
    cfg = config_from_dict({"preset": "full", "dropout": 0.0})
    assert cfg.dropout == 0.0
    assert cfg.lr == 2e-5


@pytest.mark.parametrize("bad", [
    {"task": "parse"},
    {"dropout": 1.0},
    {"dropout": -0.1},
    {"lr": -1.0},
    {"batch_size": 0},
    {"scheduler_factor": 0.0},
    {"beta1": 1.0},
    {"weight_decay": -1.0},
])
def test_invalid_values_rejected(bad):
    with pytest.raises(ConfigError):
        config_from_dict(bad)


def test_load_config_file_and_overrides(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"seed": 5, "task": "ti"}))
    cfg = load_config(str(p), overrides={"task": "fi"})
    assert cfg.seed == 5
    assert cfg.task == "fi"


def test_load_config_rejects_non_object(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("[1, 2]")
    with pytest.raises(ConfigError, match="JSON object"):
        load_config(str(p))


def test_load_config_rejects_bad_json(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("{nope")
    with pytest.raises(ConfigError, match="invalid JSON"):
        load_config(str(p))


def test_round_trip_through_dict():
    cfg = Config(seed=9, task="srl", use_gcn=False)
    again = config_from_dict(cfg.to_dict())
    assert again == cfg
