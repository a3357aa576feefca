import json
from pathlib import Path

import pytest

from clusterchain.config import get_settings, load_experiment_config, parse_experiment_config
from clusterchain.errors import ConfigError
from clusterchain.experiments import build_initial_state, build_model


def test_defaults_fill_missing_sections() -> None:
    cfg = parse_experiment_config({"experiment": "gap_scan"})
    assert cfg.model.n == 8
    assert cfg.model.jumps == "ZIZ"
    assert len(cfg.kappa_grid()) == 20
    assert cfg.sample_times()[0] == 0.0
    assert cfg.sample_times()[-1] == pytest.approx(cfg.schedule.t_max)


def test_unknown_keys_are_rejected() -> None:
    with pytest.raises(ConfigError, match="kapa"):
        parse_experiment_config({"experiment": "gap_scan", "model": {"n": 6, "kapa": 1.0}})


def test_odd_chain_is_rejected() -> None:
    with pytest.raises(ConfigError, match="even"):
        parse_experiment_config({"experiment": "autocorr", "model": {"n": 7}})


def test_custom_jumps_need_operators() -> None:
    with pytest.raises(ConfigError):
        parse_experiment_config({"experiment": "autocorr", "model": {"jumps": "custom"}})


def test_unknown_experiment() -> None:
    with pytest.raises(ConfigError):
        parse_experiment_config({"experiment": "teleport"})


def test_couplings_are_measured_in_units_of_j() -> None:
    cfg = parse_experiment_config(
        {"experiment": "autocorr", "model": {"n": 6, "j": 2.0, "kappa": 5.0, "v_xx": 0.2}}
    )
    m = build_model(cfg)
    assert m.kappa == pytest.approx(2.5)
    assert m.v_xx == pytest.approx(0.1)
    assert m.j == 1.0


def test_signs_must_match_chain_length() -> None:
    cfg = parse_experiment_config(
        {"experiment": "trajectories", "model": {"n": 6}, "initial_state": {"signs": [1, 1, 1, 1]}}
    )
    with pytest.raises(ConfigError):
        build_initial_state(cfg)


def test_load_toml_and_json(tmp_path: Path) -> None:
    toml = tmp_path / "run.toml"
    toml.write_text('experiment = "steady_space"\n\n[model]\nn = 6\nkappa = 2.5\n')
    cfg = load_experiment_config(toml)
    assert cfg.model.kappa == 2.5
    sidecar = tmp_path / "run.config.json"
    sidecar.write_text(json.dumps(cfg.model_dump(mode="json")))
    assert load_experiment_config(sidecar) == cfg


def test_broken_files(tmp_path: Path) -> None:
    with pytest.raises(ConfigError):
        load_experiment_config(tmp_path / "missing.toml")
    bad = tmp_path / "bad.toml"
    bad.write_text("experiment = \n")
    with pytest.raises(ConfigError):
        load_experiment_config(bad)


def test_settings_read_environment(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setenv("CLUSTERCHAIN_THREADS", "4")
    monkeypatch.setenv("CLUSTERCHAIN_FRAGMENT_CAP", "8")
    settings = get_settings()
    assert settings.threads == 4
    assert settings.fragment_cap == 8
    assert settings.pure_cap == 20
    assert not hasattr(settings, "dense_cap")
