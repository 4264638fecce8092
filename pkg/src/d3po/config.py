"""Run configuration: one JSON-serializable object covering every stage.

A RunConfig nests the model, schedule, pretraining, and fine-tuning configs
plus experiment-level settings.  It round-trips through JSON exactly, and
CLI flag overrides are applied with dotted paths ("finetune.beta=0.05").
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from .diffusion.model import ModelConfig
from .diffusion.schedule import ScheduleConfig
from .diffusion.pretrain import PretrainConfig
from .finetune import FinetuneConfig
from .nd.optim import AdamConfig


@dataclass
class ExperimentConfig:
    master_seed: int = 1234
    objective: str = "compressibility"
    n_epochs: int = 50
    pairs_per_epoch: int = 64
    eval_samples: int = 32
    fixed_reference: bool = False   # True: never rotate the reference policy
    min_labels_per_epoch: int = 8   # service refuses to advance below this


@dataclass
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    pretrain: PretrainConfig = field(default_factory=PretrainConfig)
    finetune: FinetuneConfig = field(default_factory=FinetuneConfig)
    experiment: ExperimentConfig = field(default_factory=ExperimentConfig)

    def to_dict(self) -> dict:
        return {
            "model": self.model.to_dict(),
            "schedule": self.schedule.to_dict(),
            "pretrain": dict(self.pretrain.__dict__),
            "finetune": {
                "beta": self.finetune.beta,
                "guidance_w": self.finetune.guidance_w,
                "per_step": self.finetune.per_step,
                "kl_probe_pairs": self.finetune.kl_probe_pairs,
                "adam": dict(self.finetune.adam.__dict__),
            },
            "experiment": dict(self.experiment.__dict__),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        ft = dict(d.get("finetune", {}))
        adam = AdamConfig(**ft.pop("adam", {}))
        return cls(
            model=ModelConfig.from_dict(d["model"]) if "model" in d else ModelConfig(),
            schedule=ScheduleConfig.from_dict(d["schedule"]) if "schedule" in d else ScheduleConfig(),
            pretrain=PretrainConfig(**d.get("pretrain", {})),
            finetune=FinetuneConfig(adam=adam, **ft),
            experiment=ExperimentConfig(**d.get("experiment", {})),
        )

    def save_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load_json(cls, path: str | Path) -> "RunConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _coerce(current, raw: str):
    if isinstance(current, bool):
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    if isinstance(current, int):
        return int(raw)
    if isinstance(current, float):
        return float(raw)
    if isinstance(current, str):
        return raw
    if isinstance(current, (list, tuple)):
        parsed = json.loads(raw)
        return type(current)(parsed)
    raise ValueError(f"cannot override a value of type {type(current).__name__}")


def apply_overrides(cfg: RunConfig, overrides: list[str]) -> RunConfig:
    """Apply "section.key=value" (or "finetune.adam.lr=1e-4") overrides."""
    d = cfg.to_dict()
    for item in overrides:
        if "=" not in item:
            raise ValueError(f"override {item!r} is not of the form path=value")
        path, raw = item.split("=", 1)
        keys = path.split(".")
        node = d
        for key in keys[:-1]:
            if key not in node:
                raise KeyError(f"unknown config section {key!r} in {item!r}")
            node = node[key]
        leaf = keys[-1]
        if leaf not in node:
            raise KeyError(f"unknown config key {path!r}")
        node[leaf] = _coerce(node[leaf], raw)
    return RunConfig.from_dict(d)
