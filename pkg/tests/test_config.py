"""Configuration loading tests"""
import json

import pytest

from config import CONFIG_FILE_NAME, ConfigManager, default_config_dir


def test_missing_file_gives_defaults(tmp_path):
    manager = ConfigManager(str(tmp_path / "absent.json"))
    assert manager.get("output.digits") == 17
    assert manager.get("integrator.rtol") == 1e-10
    assert manager.get("no.such.key", "fallback") == "fallback"


def test_partial_file_merges_over_defaults(tmp_path):
    path = tmp_path / CONFIG_FILE_NAME
    path.write_text(json.dumps({"integrator": {"rtol": 1e-12}, "checks": {"workers": 4}}), encoding="utf-8")
    manager = ConfigManager(str(path))
    assert manager.get("integrator.rtol") == 1e-12
    # siblings of an overridden key keep their defaults
    assert manager.get("integrator.atol") == 1e-12
    assert manager.get_integrator_config()["max_steps"] == 1_000_000
    assert manager.get("checks.workers") == 4
    assert manager.get("checks.samples") == 100
    assert manager.get_sampling_config()["q_box"] == [-2.0, 2.0]


def test_unreadable_file_falls_back(tmp_path, caplog):
    path = tmp_path / CONFIG_FILE_NAME
    path.write_text("{not json", encoding="utf-8")
    with caplog.at_level("WARNING", logger="config"):
        manager = ConfigManager(str(path))
    assert manager.get_tolerances()["excluded_eps"] == 1e-10
    assert "loading failed" in caplog.text


def test_directory_comes_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("NOETHERKIT_CONFIG_DIR", str(tmp_path))
    (tmp_path / CONFIG_FILE_NAME).write_text(json.dumps({"output": {"digits": 12}}), encoding="utf-8")
    assert default_config_dir() == tmp_path
    assert ConfigManager().get("output.digits") == 12


def test_defaults_are_not_shared(tmp_path):
    first = ConfigManager(str(tmp_path / "absent.json"))
    first.get_sampling_config()["q_box"].append(9.0)
    second = ConfigManager(str(tmp_path / "absent.json"))
    assert second.get("sampling.q_box") == pytest.approx([-2.0, 2.0])
