from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any

import yaml
from pydantic import BaseModel, Field, field_validator, model_validator

from core.errors import ConfigurationError
from schema.models import (
    LORA_TARGET_ORDER,
    LoRAPlacement,
    LoRATarget,
    ObjectClass,
    PadMode,
    PromptKind,
    Schedule,
    TaskPreset,
)

ALLOWED_OVERLAP_TARGETS = (100, 90, 70, 50)

# Per-task optimiser settings.
TASK_PRESETS: dict[TaskPreset, dict[str, Any]] = {
    TaskPreset.WATER: {
        "lr": 0.001,
        "schedule": Schedule.NONE,
        "warmup_epochs": 0,
        "epochs": 15,
        "augment": False,
    },
    TaskPreset.ROAD: {
        "lr": 0.005,
        "schedule": Schedule.WARMUP_EXP,
        "warmup_epochs": 5,
        "epochs": 200,
        "augment": True,
    },
    TaskPreset.BUILDING: {
        "lr": 0.005,
        "schedule": Schedule.WARMUP_EXP,
        "warmup_epochs": 5,
        "epochs": 200,
        "augment": True,
    },
}


def _is_power_of_two(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


class TrunkConfig(BaseModel):
    """Frozen vision-transformer trunk dimensions."""

    image_size: int = Field(default=64, ge=1, description="Square input size in pixels")
    patch_size: int = Field(default=16, ge=1, description="Patch size in pixels")
    embed_dim: int = Field(default=64, ge=1)
    num_stages: int = Field(default=4, ge=1)
    blocks_per_stage: int = Field(default=1, ge=1)
    num_heads: int = Field(default=4, ge=1)
    mlp_ratio: float = Field(default=4.0, gt=0)

    @model_validator(mode="after")
    def _check_dims(self) -> TrunkConfig:
        if self.image_size % self.patch_size:
            raise ValueError(
                f"image_size {self.image_size} is not divisible by patch_size {self.patch_size}"
            )
        if self.embed_dim % self.num_heads:
            raise ValueError(
                f"embed_dim {self.embed_dim} is not divisible by num_heads {self.num_heads}"
            )
        # The decoder climbs from the token grid to 1/4 resolution in x2 steps.
        if not _is_power_of_two(self.patch_size) or self.patch_size < 4:
            raise ValueError(f"patch_size must be a power of two >= 4, got {self.patch_size}")
        return self

    @property
    def grid_size(self) -> int:
        return self.image_size // self.patch_size

    @property
    def num_blocks(self) -> int:
        return self.num_stages * self.blocks_per_stage


class UScalingConfig(BaseModel):
    """Cascaded U-Scaling adapter settings."""

    num_modules: int = Field(default=4, ge=1)
    num_scales: int = Field(default=4, ge=2)
    phi: float = Field(default=2.0, gt=0, description="Mapping coefficient of each scale term")
    channels: int = Field(default=16, ge=1)
    downsample_factor: int = Field(default=2, ge=2)
    stem_stride: int = Field(default=1, ge=1)

    def divisor(self, num_scales: int | None = None) -> int:
        """Spatial divisor a module input must satisfy."""
        scales = self.num_scales if num_scales is None else num_scales
        return self.downsample_factor ** (scales - 1)


class DecoderConfig(BaseModel):
    width: int = Field(default=32, ge=1)
    mlp_hidden: int = Field(default=64, ge=1)
    groups: int = Field(default=4, ge=1, description="GroupNorm groups in fusion blocks")

    @model_validator(mode="after")
    def _check_groups(self) -> DecoderConfig:
        if self.width % self.groups:
            raise ValueError(f"width {self.width} is not divisible by groups {self.groups}")
        return self


class ComponentToggles(BaseModel):
    """Switches for the component ablation; all on is the full model."""

    lora: bool = True
    multiscale: bool = True
    interaction: bool = True
    decoder: bool = True


class ModelConfig(BaseModel):
    trunk: TrunkConfig = Field(default_factory=TrunkConfig)
    adapter: UScalingConfig = Field(default_factory=UScalingConfig)
    decoder: DecoderConfig = Field(default_factory=DecoderConfig)
    components: ComponentToggles = Field(default_factory=ComponentToggles)
    attn_dim: int | None = Field(default=None, ge=1, description="d_c; defaults to embed_dim")
    trunk_seed: int = Field(default=0, description="Seed standing in for pre-trained weights")

    @model_validator(mode="after")
    def _check_pairing(self) -> ModelConfig:
        if self.adapter.num_modules != self.trunk.num_stages:
            raise ValueError(
                f"adapter num_modules {self.adapter.num_modules} must equal trunk num_stages "
                f"{self.trunk.num_stages}"
            )
        required = self.adapter.stem_stride * self.adapter.divisor()
        if self.trunk.image_size % required:
            raise ValueError(
                f"image_size {self.trunk.image_size} must be divisible by {required} "
                f"(stem stride x downsample factor^(num_scales-1))"
            )
        return self

    @property
    def cross_dim(self) -> int:
        return self.attn_dim or self.trunk.embed_dim

    @property
    def adapter_size(self) -> int:
        return self.trunk.image_size // self.adapter.stem_stride


class LoRAConfig(BaseModel):
    rank: int = Field(default=4, ge=1)
    alpha: float | None = Field(default=None, gt=0, description="Defaults to 2 x rank")
    targets: list[LoRATarget] = Field(default_factory=lambda: [LoRATarget.Q, LoRATarget.V])
    placement: LoRAPlacement = LoRAPlacement.ENCODER_ONLY

    @model_validator(mode="after")
    def _default_alpha(self) -> LoRAConfig:
        if self.alpha is None:
            self.alpha = 2.0 * self.rank
        return self

    @property
    def scaling(self) -> float:
        return self.alpha / self.rank


class LossWeights(BaseModel):
    lambda_bce: float = Field(default=0.2, ge=0)
    lambda_dice: float = Field(default=0.8, ge=0)
    n_masks: int = Field(default=5, ge=1)
    dice_smooth: float = Field(default=1.0, gt=0)
    bce_eps: float = Field(default=1e-7, gt=0, lt=0.5)


class TilingSpec(BaseModel):
    patch_size: int = Field(default=512, ge=32)
    overlap_fraction: float = Field(default=0.0, ge=0.0, lt=1.0)
    pad_mode: PadMode = PadMode.REFLECT

    @property
    def stride(self) -> int:
        # round half up
        return int(math.floor(self.patch_size * (1.0 - self.overlap_fraction) + 0.5))

    @model_validator(mode="after")
    def _check_stride(self) -> TilingSpec:
        if self.stride < 1:
            raise ValueError(
                f"overlap {self.overlap_fraction} leaves no stride for patch {self.patch_size}"
            )
        return self


class SyntheticSceneSpec(BaseModel):
    """One synthetic urban scene; scales are in pixels and default per class."""

    size: int = Field(default=64, ge=16)
    object_class: ObjectClass = ObjectClass.BUILDING
    density: float | None = Field(default=None, ge=0.0, le=1.0)
    min_scale: float | None = Field(default=None, gt=0)
    max_scale: float | None = Field(default=None, gt=0)
    seed: int = 0

    @model_validator(mode="after")
    def _fill_class_defaults(self) -> SyntheticSceneSpec:
        defaults = {
            ObjectClass.BUILDING: (0.2, 0.1 * self.size, 0.3 * self.size),
            ObjectClass.ROAD: (0.15, 3.0, 8.0),
            ObjectClass.WATER: (0.25, 0.06 * self.size, 0.15 * self.size),
        }[self.object_class]
        if self.density is None:
            self.density = defaults[0]
        if self.min_scale is None:
            self.min_scale = defaults[1]
        if self.max_scale is None:
            self.max_scale = defaults[2]
        if self.min_scale > self.max_scale:
            raise ValueError(f"min_scale {self.min_scale} exceeds max_scale {self.max_scale}")
        return self


class PromptSimSpec(BaseModel):
    kind: PromptKind = PromptKind.MASK
    target_overlap: int = 100
    num_points: int = Field(default=20, ge=1)
    seed: int = 0
    tolerance: float = Field(default=2.0, gt=0, description="Allowed deviation in points")
    max_iterations: int = Field(default=200, ge=1)

    @field_validator("target_overlap")
    @classmethod
    def _check_target(cls, v: int) -> int:
        if v not in ALLOWED_OVERLAP_TARGETS:
            raise ValueError(f"target_overlap must be one of {ALLOWED_OVERLAP_TARGETS}, got {v}")
        return v


class SyntheticDatasetConfig(BaseModel):
    object_class: ObjectClass = ObjectClass.BUILDING
    size: int = Field(default=64, ge=16)
    train_count: int = Field(default=512, ge=0)
    val_count: int = Field(default=0, ge=0)
    test_count: int = Field(default=128, ge=0)
    seed: int = 0


class DataConfig(BaseModel):
    """Either a JSON-lines manifest or an in-memory synthetic dataset."""

    manifest: Path | None = None
    synthetic: SyntheticDatasetConfig = Field(default_factory=SyntheticDatasetConfig)


class TrainConfig(BaseModel):
    """Training run configuration; JSON field names mirror these attributes."""

    lr: float = Field(default=0.01, gt=0)
    momentum: float = Field(default=0.9, ge=0)
    weight_decay: float = Field(default=0.0001, ge=0)
    epochs: int = Field(default=50, ge=1)
    warmup_epochs: int = Field(default=2, ge=0)
    schedule: Schedule = Schedule.WARMUP_EXP
    decay_gamma: float = Field(default=0.97, gt=0, le=1)
    batch_size: int = Field(default=8, ge=1)
    seed: int = 0
    lora_rank: int = Field(default=4, ge=1)
    lora_alpha: float | None = Field(default=None, gt=0, description="Defaults to 2 x rank")
    lora_targets: list[LoRATarget] = Field(default_factory=lambda: [LoRATarget.Q, LoRATarget.V])
    lora_placement: LoRAPlacement = LoRAPlacement.ENCODER_ONLY
    loss: LossWeights = Field(default_factory=LossWeights)

    model: ModelConfig = Field(default_factory=ModelConfig)
    data: DataConfig = Field(default_factory=DataConfig)
    augment: bool = True
    output_dir: Path | None = None
    eval_every: int = Field(default=1, ge=0, description="Evaluate every N epochs; 0 disables")
    num_workers: int = Field(default=0, ge=0)
    preset: TaskPreset | None = None

    @model_validator(mode="before")
    @classmethod
    def _apply_preset(cls, data: Any) -> Any:
        if isinstance(data, dict) and data.get("preset"):
            preset = TaskPreset(data["preset"])
            for key, value in TASK_PRESETS[preset].items():
                data.setdefault(key, value)
        return data

    @field_validator("lora_targets")
    @classmethod
    def _canonical_targets(cls, v: list[LoRATarget]) -> list[LoRATarget]:
        if not v:
            raise ValueError("lora_targets must name at least one projection")
        present = set(v)
        return [t for t in LORA_TARGET_ORDER if t in present]

    @model_validator(mode="after")
    def _check_schedule(self) -> TrainConfig:
        if self.warmup_epochs > self.epochs:
            raise ValueError(
                f"warmup_epochs {self.warmup_epochs} exceeds epochs {self.epochs}"
            )
        if self.lora_alpha is None:
            self.lora_alpha = 2.0 * self.lora_rank
        return self

    def lora_config(self) -> LoRAConfig:
        return LoRAConfig(
            rank=self.lora_rank,
            alpha=self.lora_alpha,
            targets=self.lora_targets,
            placement=self.lora_placement,
        )

    def with_preset(self, preset: TaskPreset) -> TrainConfig:
        """Switch to ``preset``, keeping every field that was set explicitly.

        Same rule as ``preset`` in a config file: the preset only fills fields left unset.
        """
        data = self.model_dump(exclude_unset=True)
        if self.preset is not None:
            # values equal to the old preset's entry were filled by it, not chosen
            for key, value in TASK_PRESETS[self.preset].items():
                if key in data and data[key] == value:
                    del data[key]
        return self.model_validate({**data, "preset": preset})


def load_train_config(path: str | Path) -> TrainConfig:
    """Load a TrainConfig from JSON; ``.yaml``/``.yml`` files are read with PyYAML."""
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"Train config not found: {p}")
    text = p.read_text(encoding="utf-8")
    try:
        if p.suffix.lower() in (".yaml", ".yml"):
            data = yaml.safe_load(text) or {}
        else:
            data = json.loads(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigurationError(f"Cannot parse train config {p}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigurationError(f"Train config {p} must hold a mapping, got {type(data).__name__}")
    return TrainConfig.model_validate(data)
