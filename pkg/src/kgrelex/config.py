"""Pipeline configuration: a flat key = value text file, CLI flag overrides,
and the KGRELEX_SEED environment variable for seed sweeps."""

from __future__ import annotations

import os
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ConfigError
from .linkpred import TrainConfig
from .reasoning import ScorerConfig

SEED_ENV_VAR = "KGRELEX_SEED"


@dataclass
class PipelineConfig:
    # input files
    documents_train: str | None = None
    documents_dev: str | None = None
    documents_test: str | None = None
    external_triples: str | None = None
    entity_context: str | None = None
    context_paths: str | None = None
    output_dir: str = "out"
    seed: int = 0
    # link prediction
    lr: float = 0.01
    epochs: int = 100
    dropout_self: float = 0.2
    dropout_other: float = 0.4
    l2_decoder: float = 0.01
    dim: int = 200
    neg_per_pos: int = 10
    rgcn_layers: int = 1
    num_blocks: int = 1
    encoder: str = "rgcn"
    # reasoning scorer
    reasoning_lr: float = 0.5
    reasoning_epochs: int = 300
    reasoning_hidden: int = 0
    # fusion and decision rule
    fusion_lambda: float = 0.5
    aggregator: str = "convex"
    threshold: float = 0.5
    # context conversion
    max_context_hops: int = 4
    # explanation search
    beam: int = 128
    max_len: int = 4
    top_n: int = 10

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            lr=self.lr, epochs=self.epochs, dropout_self=self.dropout_self,
            dropout_other=self.dropout_other, l2_decoder=self.l2_decoder,
            dim=self.dim, neg_per_pos=self.neg_per_pos, seed=self.seed,
            rgcn_layers=self.rgcn_layers, num_blocks=self.num_blocks,
            encoder=self.encoder,
        )

    def scorer_config(self) -> ScorerConfig:
        return ScorerConfig(lr=self.reasoning_lr, epochs=self.reasoning_epochs,
                            seed=self.seed, hidden=self.reasoning_hidden)

    def validate_inputs(self, required: tuple[str, ...]) -> None:
        for name in required:
            value = getattr(self, name)
            if value is None:
                raise ConfigError(f"config field {name!r} is required for this command")
        for name in ("documents_train", "documents_dev", "documents_test",
                     "external_triples", "entity_context", "context_paths"):
            value = getattr(self, name)
            if value is not None and not Path(value).is_file():
                raise ConfigError(f"input file for {name!r} does not exist: {value}")
        if not 0.0 <= self.fusion_lambda <= 1.0:
            raise ConfigError(f"fusion_lambda must be in [0, 1], got {self.fusion_lambda}")
        if not 0.0 < self.threshold <= 1.0:
            raise ConfigError(f"threshold must be in (0, 1], got {self.threshold}")
        if not 1 <= self.max_context_hops <= 4:
            raise ConfigError(f"max_context_hops must be in 1..4, got {self.max_context_hops}")
        self.train_config().validate()
        self.scorer_config().validate()


_FIELD_TYPES = {f.name: f.type for f in fields(PipelineConfig)}
_STR_FIELDS = {name for name, t in _FIELD_TYPES.items() if "str" in str(t)}
_INT_FIELDS = {name for name, t in _FIELD_TYPES.items() if str(t) == "int"}
_FLOAT_FIELDS = {name for name, t in _FIELD_TYPES.items() if str(t) == "float"}


def _coerce(name: str, raw: str):
    if name in _INT_FIELDS:
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"config field {name!r} must be an integer, got {raw!r}") from None
    if name in _FLOAT_FIELDS:
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"config field {name!r} must be a number, got {raw!r}") from None
    if raw.lower() in ("none", "null", ""):
        return None
    return raw


def load_config(path: str | os.PathLike) -> PipelineConfig:
    """Read a config file of '# comments' and 'key = value' lines."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    cfg = PipelineConfig()
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {stripped!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key not in _FIELD_TYPES:
            raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
        setattr(cfg, key, _coerce(key, raw))
    return cfg


def apply_env_overrides(cfg: PipelineConfig, env: dict | None = None) -> PipelineConfig:
    env = os.environ if env is None else env
    raw = env.get(SEED_ENV_VAR)
    if raw is not None:
        try:
            cfg.seed = int(raw)
        except ValueError:
            raise ConfigError(f"{SEED_ENV_VAR} must be an integer, got {raw!r}") from None
    return cfg
