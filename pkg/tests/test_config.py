"""Config loading, dotted overrides, hashing, and manifest writing."""
from __future__ import annotations

import json

import pytest

from hoprag.config import BackendConfig, RunConfig, config_hash, load_config, write_manifest


def test_defaults():
    cfg = load_config(None, {})
    assert cfg.env_kind == "kg"
    assert cfg.backend.kind == "scripted"
    assert cfg.limits.max_iterations == 6
    assert cfg.limits.top_k == 5
    assert cfg.limits.max_searches_per_turn == 4
    assert cfg.sampler.m == 3
    assert cfg.sampler.max_attempts == 16


def test_load_toml_with_overrides(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text(
        """
[run]
env = "text"
seed = 5

[backend]
kind = "http"
base_url = "http://localhost:9"
model = "base"

[sampler]
k_init = 0.2
""",
        encoding="utf-8",
    )
    cfg = load_config(path, {"run.seed": 9, "sampler.k_init": 0.4})
    assert cfg.env_kind == "text"
    assert cfg.seed == 9
    assert cfg.backend.base_url == "http://localhost:9"
    assert cfg.sampler.k_init == 0.4


def test_unknown_override_rejected():
    with pytest.raises(KeyError):
        load_config(None, {"nonsense.key": 1})


def test_invalid_kinds_rejected():
    with pytest.raises(ValueError):
        RunConfig(env_kind="graph")
    with pytest.raises(ValueError):
        BackendConfig(kind="carrier-pigeon")


def test_validate_paths(tmp_path):
    cfg = load_config(None, {"run.dataset": str(tmp_path / "missing.json")})
    with pytest.raises(FileNotFoundError):
        cfg.validate_paths()
    present = tmp_path / "present.json"
    present.write_text("[]", encoding="utf-8")
    load_config(None, {"run.dataset": str(present)}).validate_paths()


def test_config_hash_stable_and_sensitive():
    a = load_config(None, {"run.seed": 1})
    b = load_config(None, {"run.seed": 1})
    c = load_config(None, {"run.seed": 2})
    assert config_hash(a) == config_hash(b)
    assert config_hash(a) != config_hash(c)


def test_manifest_contents(tmp_path):
    cfg = load_config(None, {"run.seed": 3})
    path = tmp_path / "manifest.json"
    write_manifest(path, "qa", cfg, {"questions": 2})
    payload = json.loads(path.read_text())
    assert payload["command"] == "qa"
    assert payload["seed"] == 3
    assert payload["counts"] == {"questions": 2}
    assert payload["config_hash"] == config_hash(cfg)
