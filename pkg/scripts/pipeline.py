#!/usr/bin/env python3
"""
Run configuration for the tdict command line.

Provides:
- Configuration loading from pipeline.yaml
- Per-command parameter resolution (defaults < YAML < flags)
- Range checks on the resolved parameters
"""

import os
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

# Add repo root to path for library imports
REPO_ROOT = Path(__file__).parent.parent
sys.path.insert(0, str(REPO_ROOT))

from tdict.errors import ConfigError  # noqa: E402

# Path to pipeline configuration
CONFIG_PATH = REPO_ROOT / "pipeline.yaml"

COMMANDS = ("synth", "corrupt", "train", "complete", "denoise", "eval", "import", "export", "sweep")

# Commands that draw random numbers and therefore need --seed
STOCHASTIC = {"synth", "corrupt", "train", "sweep"}


@dataclass
class RunConfig:
    """All parameters a command may read. None means "derive from the data"."""

    # Patches
    p: int = 8
    q: int = 8
    stride: int | None = None
    depth: int | None = None
    count: int | None = None
    # Frames [frame_start, frame_stop) of the volume; unset for all
    frame_start: int | None = None
    frame_stop: int | None = None
    # Dictionary learning and coding
    K: int = 256
    lam: float | None = None
    rho: float = 1.0
    tol: float = 1e-4
    max_iters: int = 200
    sweeps: int = 10
    min_improvement: float | None = 1e-4
    full_svd: bool = False
    center: bool = True
    scale: float = 255.0
    observed_only: bool = False
    # Reconstruction
    beta: float | None = None
    # Corruption
    corruption: str = "dead"
    sigma: float | None = None
    sparsity: float | None = None
    missing_fraction: float | None = None
    fractions: list[float] = field(
        default_factory=lambda: [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8]
    )
    # Synthetic data
    kind: str = "tensor"
    pattern: str = "blocks"
    d: int = 16
    n3: int = 4
    n_columns: int = 512
    atoms_per_column: int = 3
    height: int = 64
    width: int = 64
    bands: int = 8
    # Execution
    seed: int | None = None
    workers: int | None = None
    chunk: int = 512
    verbose: bool = False
    # Paths
    input: str | None = None
    output: str | None = None
    mask: str | None = None
    truth: str | None = None
    dictionary: str | None = None

    def validate(self, command: str) -> "RunConfig":
        """Check documented ranges for `command`; returns self."""
        if command not in COMMANDS:
            raise ConfigError(f"Unknown command: {command}")

        for name in ("p", "q", "K", "sweeps", "max_iters", "chunk", "d", "n3", "n_columns",
                     "height", "width", "bands"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        for name in ("stride", "depth", "count", "workers"):
            value = getattr(self, name)
            if value is not None and value < 1:
                raise ConfigError(f"{name} must be >= 1, got {value}")
        for name in ("rho", "tol", "scale"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.lam is not None and not self.lam > 0:
            raise ConfigError(f"lam must be positive, got {self.lam}")
        if self.beta is not None and self.beta < 0:
            raise ConfigError(f"beta must be non-negative, got {self.beta}")
        if self.sigma is not None and self.sigma < 0:
            raise ConfigError(f"sigma must be non-negative, got {self.sigma}")
        if self.min_improvement is not None and self.min_improvement < 0:
            raise ConfigError(f"min_improvement must be non-negative, got {self.min_improvement}")
        if self.atoms_per_column < 0 or self.atoms_per_column > self.K:
            raise ConfigError(f"atoms_per_column must lie in [0, K], got {self.atoms_per_column}")
        for name in ("sparsity", "missing_fraction"):
            value = getattr(self, name)
            if value is not None and not 0 <= value <= 1:
                raise ConfigError(f"{name} must lie in [0, 1], got {value}")
        if not self.fractions or any(not 0 <= f <= 1 for f in self.fractions):
            raise ConfigError(f"fractions must be a non-empty list in [0, 1], got {self.fractions}")
        if self.kind not in ("tensor", "volume"):
            raise ConfigError(f"kind must be 'tensor' or 'volume', got {self.kind}")
        if self.corruption not in ("dead", "noise"):
            raise ConfigError(f"corruption must be 'dead' or 'noise', got {self.corruption}")
        if self.pattern not in ("blocks", "waves"):
            raise ConfigError(f"pattern must be 'blocks' or 'waves', got {self.pattern}")
        if self.frame_start is not None and self.frame_start < 0:
            raise ConfigError(f"frame_start must be >= 0, got {self.frame_start}")
        if self.frame_stop is not None and self.frame_stop <= (self.frame_start or 0):
            raise ConfigError(f"frame_stop must exceed frame_start, got {self.frame_stop}")

        if command in STOCHASTIC and self.seed is None:
            raise ConfigError(f"'{command}' is stochastic and needs --seed")
        self._require(command)
        return self

    def _require(self, command: str) -> None:
        required = {
            "synth": ["output"],
            "corrupt": ["input", "output"],
            "train": ["input", "output"],
            "complete": ["input", "mask", "dictionary", "output"],
            "denoise": ["input", "dictionary", "output"],
            "eval": ["input", "truth"],
            "import": ["input", "output"],
            "export": ["input", "output"],
            "sweep": ["input", "dictionary", "output"],
        }[command]
        missing = [name for name in required if getattr(self, name) is None]
        if missing:
            flags = ", ".join(f"--{name.replace('_', '-')}" for name in missing)
            raise ConfigError(f"'{command}' needs {flags}")
        if command == "corrupt":
            if self.corruption == "dead" and self.missing_fraction is None:
                raise ConfigError("Dead-pixel corruption needs --missing-fraction")
            if self.corruption == "noise" and (self.sparsity is None or self.sigma is None):
                raise ConfigError("Noise corruption needs --sparsity and --sigma")
        if command == "train" and self.observed_only and self.mask is None:
            raise ConfigError("--observed-only needs --mask")


def config_path(explicit: str | Path | None = None) -> Path | None:
    """Resolve the config file: explicit path, then TDICT_CONFIG, then the repo default."""
    if explicit:
        path = Path(explicit)
    elif os.environ.get("TDICT_CONFIG"):
        path = Path(os.environ["TDICT_CONFIG"])
    else:
        return CONFIG_PATH if CONFIG_PATH.exists() else None
    if not path.exists():
        raise ConfigError(f"Config file not found: {path}")
    return path


def load_config(config_path: Path | None = None) -> dict:
    """Load pipeline configuration from YAML file; no file means an empty config."""
    if config_path is None:
        return {}
    with open(config_path) as f:
        config = yaml.safe_load(f) or {}
    if not isinstance(config, dict):
        raise ConfigError(f"{config_path}: top level must be a mapping")
    return config


def _apply(cfg: RunConfig, values: dict, origin: str) -> None:
    known = {f.name for f in fields(RunConfig)}
    for key, value in values.items():
        if key not in known:
            raise ConfigError(f"Unknown key '{key}' in {origin}")
        setattr(cfg, key, value)


def resolve_run_config(command: str, config: dict, overrides: dict | None = None) -> RunConfig:
    """Merge dataclass defaults, the YAML `defaults` and `<command>` sections, then flags.

    Flags set to None are treated as absent.
    """
    if command not in COMMANDS:
        raise ConfigError(f"Unknown command: {command}")
    unknown_sections = set(config) - set(COMMANDS) - {"defaults", "version"}
    if unknown_sections:
        raise ConfigError(f"Unknown config sections: {', '.join(sorted(unknown_sections))}")

    cfg = RunConfig()
    _apply(cfg, config.get("defaults") or {}, "defaults")
    _apply(cfg, config.get(command) or {}, command)
    _apply(cfg, {k: v for k, v in (overrides or {}).items() if v is not None}, "flags")
    if cfg.workers is None:
        cfg.workers = int(os.environ.get("TDICT_WORKERS", 1))
    return cfg
