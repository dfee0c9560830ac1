from __future__ import annotations

import pytest

from cherryrec.config import ENV_VAR, EngineConfig, example_config_text, load_config
from cherryrec.errors import ConfigError


def test_defaults():
    cfg = EngineConfig()
    assert cfg.knrs.weights == [0.2] * 5 and cfg.knrs.keep_fraction == 0.05 and cfg.knrs.top_k == 20
    assert (cfg.vans.learning_rate, cfg.vans.l2, cfg.vans.epochs, cfg.vans.patience) == (0.001, 0.01, 500, 20)
    assert (cfg.eval.k, cfg.history_cap, cfg.title_token_cap) == (5, 20, 32)
    assert cfg.cnle.evaluator == "mock"


def test_shipped_example_matches_defaults(tmp_path):
    path = tmp_path / "engine.toml"
    path.write_text(example_config_text())
    assert load_config(path) == EngineConfig()


def test_overrides_and_int_to_float(tmp_path):
    path = tmp_path / "c.toml"
    path.write_text("seed = 7\n[vans]\nl2 = 0\nepochs = 50\n[knrs]\nweights = [1, 0, 0, 0, 0]\n")
    cfg = load_config(path)
    assert cfg.seed == 7 and cfg.vans.l2 == 0.0 and isinstance(cfg.vans.l2, float)
    assert cfg.vans.epochs == 50 and cfg.knrs.weights == [1.0, 0.0, 0.0, 0.0, 0.0]


@pytest.mark.parametrize("text", [
    "bogus = 1\n",
    "[vans]\nmomentum = 0.9\n",
    "[cnle]\nretries = 'three'\n",
    "[cnle]\nfallback_to_mock = 1\n",
    "[eval]\nk = 0\n",
    "[knrs]\nkeep_fraction = 1.5\n",
    "[knrs]\ntop_k = 21\n",
    "[knrs]\nweights = [0.5, 0.5]\n",
    "[knrs]\nweights = [-1, 0, 0, 0, 0]\n",
    "[cnle]\nevaluator = 'gpt'\n",
    "config_version = 2\n",
    "vans = 3\n",
    "this is not toml",
])
def test_invalid_files_rejected(tmp_path, text):
    path = tmp_path / "bad.toml"
    path.write_text(text)
    with pytest.raises(ConfigError):
        load_config(path)


def test_missing_file_is_config_error(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.toml")


def test_environment_variable(tmp_path, monkeypatch):
    path = tmp_path / "env.toml"
    path.write_text("seed = 99\n")
    monkeypatch.setenv(ENV_VAR, str(path))
    assert load_config().seed == 99
    monkeypatch.delenv(ENV_VAR)
    assert load_config() == EngineConfig()


def test_dict_round_trip():
    cfg = load_config(None)
    assert EngineConfig.from_dict(cfg.to_dict()) == cfg
    settings = cfg.knrs_settings()
    assert settings.top_k == 20 and settings.history_cap == 20
