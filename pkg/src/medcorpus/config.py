"""Pipeline configuration: defaults, config file, environment, flags.

Precedence, lowest to highest: built-in defaults, INI config file
([pipeline] section), MEDCORPUS_* environment variables, explicit CLI flags.
Every run writes a run-record (effective config plus input digests) beside
its outputs so it can be reproduced bit-exactly.
"""

from __future__ import annotations

import configparser
import hashlib
import json
import os
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .errors import ConfigError
from .store import DEFAULT_HASH, DEFAULT_SHARD_SIZE, digest_file
from .tokens import DEFAULT_COUNTER, get_counter

ENV_PREFIX = "MEDCORPUS_"
CONFIG_SECTION = "pipeline"

_INT_FIELDS = {"min_tokens", "edu_threshold", "replication_factor", "context_budget", "seed", "shard_size", "jobs"}
_PATH_FIELDS = {"input", "corpus", "annotations", "output"}


@dataclass
class PipelineConfig:
    input: str | None = None
    corpus: str | None = None
    annotations: str | None = None
    output: str | None = None
    min_tokens: int = 64
    edu_threshold: int = 3
    replication_factor: int = 10
    language_target: str = "fr"
    context_budget: int = 8192
    seed: int = 0
    shard_size: int = DEFAULT_SHARD_SIZE
    token_counter: str = DEFAULT_COUNTER
    hash_algorithm: str = DEFAULT_HASH
    jobs: int = 1

    def apply(self, values: dict) -> None:
        names = {f.name for f in fields(self)}
        for key, value in values.items():
            if key not in names or value is None:
                continue
            if key in _INT_FIELDS and not isinstance(value, int):
                try:
                    value = int(value)
                except ValueError:
                    raise ConfigError(f"{key} must be an integer, got {value!r}") from None
            setattr(self, key, value)

    def apply_file(self, path: str | Path) -> None:
        parser = configparser.ConfigParser()
        read = parser.read(path)
        if not read:
            raise ConfigError(f"config file not found: {path}")
        if not parser.has_section(CONFIG_SECTION):
            raise ConfigError(f"config file {path} has no [{CONFIG_SECTION}] section")
        self.apply(dict(parser.items(CONFIG_SECTION)))

    def apply_env(self, environ=os.environ) -> None:
        values = {}
        for f in fields(self):
            raw = environ.get(ENV_PREFIX + f.name.upper())
            if raw is not None:
                values[f.name] = raw
        self.apply(values)

    def validate(self) -> None:
        if self.min_tokens < 0:
            raise ConfigError(f"min_tokens {self.min_tokens} must be >= 0")
        if not 1 <= self.edu_threshold <= 5:
            raise ConfigError(f"edu_threshold {self.edu_threshold} outside [1, 5]")
        if self.replication_factor < 1:
            raise ConfigError(f"replication_factor {self.replication_factor} must be >= 1")
        if self.context_budget < 1:
            raise ConfigError(f"context_budget {self.context_budget} must be >= 1")
        if self.seed < 0:
            raise ConfigError(f"seed {self.seed} must be >= 0")
        if self.shard_size < 1:
            raise ConfigError(f"shard_size {self.shard_size} must be >= 1")
        if self.jobs < 1:
            raise ConfigError(f"jobs {self.jobs} must be >= 1")
        try:
            get_counter(self.token_counter)
        except KeyError as exc:
            raise ConfigError(str(exc)) from None
        if self.hash_algorithm not in hashlib.algorithms_available:
            raise ConfigError(f"unknown hash algorithm {self.hash_algorithm!r}")

    def to_record(self) -> dict:
        return asdict(self)


def load_config(config_file: str | None, flag_values: dict) -> PipelineConfig:
    config = PipelineConfig()
    if config_file:
        config.apply_file(config_file)
    config.apply_env()
    config.apply(flag_values)
    config.validate()
    return config


def digest_path(path: str | Path, algorithm: str = DEFAULT_HASH) -> str:
    """Digest of a file, or of a directory's sorted relpath:digest lines."""
    p = Path(path)
    if p.is_file():
        return digest_file(p, algorithm)
    lines = []
    for file in sorted(p.rglob("*")):
        if file.is_file():
            lines.append(f"{file.relative_to(p)}:{digest_file(file, algorithm)}")
    h = hashlib.new(algorithm)
    h.update("\n".join(lines).encode("utf-8"))
    return h.hexdigest()


def write_run_record(
    command: str,
    config: PipelineConfig,
    inputs: list[str | Path],
    output: str | Path,
    version: str,
) -> Path:
    """Write the reproduction record beside the command's outputs."""
    out = Path(output)
    if out.suffix:  # single-file output
        record_path = out.with_name(out.name + ".run.json")
        record_path.parent.mkdir(parents=True, exist_ok=True)
    else:
        out.mkdir(parents=True, exist_ok=True)
        record_path = out / "run_record.json"
    record = {
        "command": command,
        "version": version,
        "config": config.to_record(),
        "inputs": [
            {"path": str(p), "digest": digest_path(p, config.hash_algorithm)}
            for p in inputs
            if p is not None and Path(p).exists()
        ],
    }
    record_path.write_text(json.dumps(record, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")
    return record_path
