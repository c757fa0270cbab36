"""Pipeline configuration and its ``key = value`` file format.

A config file holds one ``key = value`` pair per line; ``#`` starts a
comment.  List values are comma-separated, booleans are ``true``/``false``.
Unknown keys are an error so typos in experiment files do not go unnoticed.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path

DATA_ROOT_ENV = "DIALCOREF_DATA_ROOT"


@dataclass
class PipelineConfig:
    # corpora
    uad_train: list[str] = field(default_factory=list)
    od_train: list[str] = field(default_factory=list)
    dev: list[str] = field(default_factory=list)
    test: list[str] = field(default_factory=list)
    include_dev_in_train: bool = False
    transfer_mode: str = "uad"  # uad | mix | pretrain
    seed: int = 0

    # model variant
    speaker_augment: bool = True
    singleton_recognition: bool = True
    sentence_context: bool = True

    # span enumeration and scoring
    top_span_ratio: float = 0.5
    max_span_width: int = 30
    max_antecedents: int = 50
    mention_loss_weight: float = 0.1
    mention_loss_scope: str = "all_spans"  # all_spans | candidates

    # encoder stand-in
    embedding: str = "learned"  # hash | learned
    embedding_dim: int = 64
    hidden_size: int = 150
    feature_size: int = 20

    # document splitting
    max_segment_tokens: int = 512
    max_segments: int = 3

    # optimization
    epochs: int = 20
    task_lr: float = 3e-4
    embedding_lr: float = 1e-5
    weight_decay: float = 1e-2
    clip_norm: float = 1.0

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, values: dict) -> "PipelineConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(values) - names
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**values)

    def replace(self, **changes) -> "PipelineConfig":
        return dataclasses.replace(self, **changes)

    def dumps(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if isinstance(value, bool):
                text = "true" if value else "false"
            elif isinstance(value, list):
                text = ", ".join(value)
            else:
                text = repr(value) if isinstance(value, float) else str(value)
            lines.append(f"{f.name} = {text}")
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str, base: "PipelineConfig | None" = None) -> "PipelineConfig":
        values = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"config line {lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            values[key] = value
        return (base or cls()).with_overrides(values)

    def with_overrides(self, raw: dict) -> "PipelineConfig":
        """Apply string-valued overrides, converting each to the field's type."""
        fields = {f.name: f for f in dataclasses.fields(self)}
        converted = {}
        for key, value in raw.items():
            if key not in fields:
                raise ValueError(f"unknown config key {key!r}")
            current = getattr(self, key)
            converted[key] = _convert(key, value, current)
        return dataclasses.replace(self, **converted)


def _convert(key, value, current):
    if not isinstance(value, str):
        return value
    if isinstance(current, bool):
        low = value.lower()
        if low in ("true", "yes", "1", "on"):
            return True
        if low in ("false", "no", "0", "off"):
            return False
        raise ValueError(f"config key {key!r}: {value!r} is not a boolean")
    if isinstance(current, list):
        return [v.strip() for v in value.split(",") if v.strip()]
    if isinstance(current, int):
        return int(value)
    if isinstance(current, float):
        return float(value)
    return value


def load_config(path) -> PipelineConfig:
    return PipelineConfig.loads(Path(path).read_text(encoding="utf-8"))


def resolve_path(path) -> Path:
    """Resolve relative corpus paths against ``$DIALCOREF_DATA_ROOT`` when set."""
    p = Path(path)
    root = os.environ.get(DATA_ROOT_ENV)
    if root and not p.is_absolute():
        return Path(root) / p
    return p
