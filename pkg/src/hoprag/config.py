"""Run configuration: TOML file with flag overrides, hashed for manifests.

Secrets never live in the config; the API key is read from the environment
variable named by backend.api_key_env at request time.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from .episode import EpisodeLimits
from .pipeline import SamplerConfig
from .tags import ENV_KINDS


@dataclass
class BackendConfig:
    kind: str = "scripted"  # "scripted" | "http"
    script: str | None = None
    base_url: str | None = None
    model: str = "default"
    api_key_env: str = "HOPRAG_API_KEY"
    temperature: float = 0.7
    max_tokens: int = 1024
    concurrency: int = 8

    def __post_init__(self) -> None:
        if self.kind not in ("scripted", "http"):
            raise ValueError(f"backend kind must be scripted or http, got {self.kind!r}")


@dataclass
class RunConfig:
    env_kind: str = "kg"
    dataset: str | None = None
    corpus: str | None = None
    kg: str | None = None
    labels: str | None = None
    out_dir: str = "out"
    seed: int = 0
    few_shot: bool = True
    backend: BackendConfig = field(default_factory=BackendConfig)
    limits: EpisodeLimits = field(default_factory=EpisodeLimits)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)

    def __post_init__(self) -> None:
        if self.env_kind not in ENV_KINDS:
            raise ValueError(f"env must be one of {ENV_KINDS}, got {self.env_kind!r}")

    def validate_paths(self) -> None:
        for name in ("dataset", "corpus", "kg", "labels"):
            value = getattr(self, name)
            if value is not None and not Path(value).exists():
                raise FileNotFoundError(f"config path {name} = {value!r} does not exist")
        if self.backend.script is not None and not Path(self.backend.script).exists():
            raise FileNotFoundError(f"backend script {self.backend.script!r} does not exist")

    def as_dict(self) -> dict:
        return asdict(self)


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> RunConfig:
    """Build a RunConfig from an optional TOML file plus flat overrides.

    Override keys use dotted paths into the TOML layout, e.g.
    "run.seed", "backend.script", "sampler.k_init".
    """
    data: dict = {}
    if path is not None:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    run = dict(data.get("run", {}))
    backend = dict(data.get("backend", {}))
    limits = dict(data.get("limits", {}))
    sampler = dict(data.get("sampler", {}))
    sections = {"run": run, "backend": backend, "limits": limits, "sampler": sampler}
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        section, _, name = key.partition(".")
        if section not in sections or not name:
            raise KeyError(f"unknown config override: {key!r}")
        sections[section][name] = value
    env_kind = run.pop("env", "kg")
    return RunConfig(
        env_kind=env_kind,
        dataset=run.get("dataset"),
        corpus=run.get("corpus"),
        kg=run.get("kg"),
        labels=run.get("labels"),
        out_dir=run.get("out_dir", "out"),
        seed=int(run.get("seed", 0)),
        few_shot=bool(run.get("few_shot", True)),
        backend=BackendConfig(**backend),
        limits=EpisodeLimits(**limits),
        sampler=SamplerConfig(**sampler),
    )


def config_hash(cfg: RunConfig) -> str:
    canonical = json.dumps(cfg.as_dict(), sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def write_manifest(path: str | Path, command: str, cfg: RunConfig, counts: dict) -> None:
    """Audit record written next to every command's outputs."""
    payload = {
        "command": command,
        "config_hash": config_hash(cfg),
        "seed": cfg.seed,
        "counts": counts,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, ensure_ascii=False, indent=2)
        fh.write("\n")
