"""Ablation sweeps; each returns a table and writes it as ``ablation_<kind>.csv``.

Metric columns are percentages with two decimals; ``learnable_m`` is millions of
trainable parameters.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from core.errors import ConfigurationError, InvalidInputError, PromptSimulationError
from data.prompt_sim import mask_iou, simulate_prompt
from data.raster import RasterSample
from harness.evaluate import ModelPredictor, evaluate_samples
from harness.sources import load_samples
from harness.trainer import Trainer
from model.checkpoint import load_model
from model.params import parameter_report
from model.urbansam import UrbanSAM
from schema.config import ALLOWED_OVERLAP_TARGETS, PromptSimSpec, TrainConfig
from schema.models import AblationKind, LoRAPlacement, LoRATarget, PromptKind, Split
from schema.records import DERIVED_KEYS, MetricsReport

logger = logging.getLogger(__name__)

PLACEMENT_ORDER = (
    LoRAPlacement.ENCODER_ONLY,
    LoRAPlacement.DECODER_ONLY,
    LoRAPlacement.BOTH,
    LoRAPlacement.FROZEN,
)
RANK_SWEEP = (1, 4, 8, 16)
TARGET_SWEEP: tuple[tuple[LoRATarget, ...], ...] = (
    (LoRATarget.Q,),
    (LoRATarget.Q, LoRATarget.V),
    (LoRATarget.Q, LoRATarget.K, LoRATarget.V, LoRATarget.O),
)
# (row label, toggle switched off); ``None`` is the full model
COMPONENT_ROWS: tuple[tuple[str, str | None], ...] = (
    ("w/o LoRA", "lora"),
    ("w/o MultiScale", "multiscale"),
    ("w/o Interaction", "interaction"),
    ("w/o Decoder", "decoder"),
    ("full", None),
)
PROMPT_KINDS = (PromptKind.MASK, PromptKind.POINT, PromptKind.BOX)


def metric_columns(report: MetricsReport) -> dict[str, float]:
    return {key: round(getattr(report, key) * 100, 2) for key in DERIVED_KEYS}


def variant(cfg: TrainConfig, **changes: Any) -> TrainConfig:
    """Re-validated copy, so derived defaults such as ``lora_alpha`` follow the change."""
    return TrainConfig.model_validate({**cfg.model_dump(), **changes})


def _toggle_off(cfg: TrainConfig, toggle: str | None) -> TrainConfig:
    if toggle is None:
        return cfg
    model = cfg.model.model_dump()
    model["components"] = {**model["components"], toggle: False}
    return variant(cfg, model=model)


class AblationRunner:
    """Trains variants of one base config on shared train/test samples."""

    def __init__(
        self,
        cfg: TrainConfig,
        out_dir: str | Path,
        train_samples: Sequence[RasterSample],
        test_samples: Sequence[RasterSample],
    ) -> None:
        if not test_samples:
            raise ConfigurationError("ablations need a non-empty test split")
        self.cfg = cfg
        self.out_dir = Path(out_dir)
        self.train_samples = list(train_samples)
        self.test_samples = list(test_samples)

    @classmethod
    def from_config(cls, cfg: TrainConfig, out_dir: str | Path) -> AblationRunner:
        return cls(
            cfg,
            out_dir,
            load_samples(cfg.data, Split.TRAIN, workers=cfg.num_workers),
            load_samples(cfg.data, Split.TEST, workers=cfg.num_workers),
        )

    def train_variant(self, cfg: TrainConfig, name: str) -> UrbanSAM:
        trainer = Trainer(cfg, self.train_samples, (), self.out_dir / "runs" / name)
        trainer.fit()
        return trainer.model

    def score(self, model: UrbanSAM) -> MetricsReport:
        return evaluate_samples(ModelPredictor(model), self.test_samples).report()

    def _row(self, cfg: TrainConfig, name: str, **labels: Any) -> dict[str, Any]:
        model = self.train_variant(cfg, name)
        report = self.score(model)
        learnable = parameter_report(model).learnable
        logger.info("Ablation variant %s: IoU %.4f", name, report.iou)
        return {**labels, "learnable_m": round(learnable / 1e6, 4), **metric_columns(report)}

    def lora_placement(self) -> pd.DataFrame:
        rows = [
            self._row(variant(self.cfg, lora_placement=p), f"placement-{p.value}", strategy=p)
            for p in PLACEMENT_ORDER
        ]
        return pd.DataFrame(rows)

    def lora_rank(self) -> pd.DataFrame:
        rows = [
            self._row(variant(self.cfg, lora_rank=r, lora_alpha=None), f"rank-{r}", rank=r)
            for r in RANK_SWEEP
        ]
        return pd.DataFrame(rows)

    def lora_targets(self) -> pd.DataFrame:
        rows = []
        for targets in TARGET_SWEEP:
            label = "".join(t.value.upper() for t in targets)
            cfg = variant(self.cfg, lora_targets=list(targets))
            rows.append(self._row(cfg, f"targets-{label}", projections=label))
        return pd.DataFrame(rows)

    def components(self) -> pd.DataFrame:
        rows = []
        for label, toggle in COMPONENT_ROWS:
            cfg = _toggle_off(self.cfg, toggle)
            flags = cfg.model.components
            rows.append(
                self._row(
                    cfg,
                    label.replace("/", "").replace(" ", "-").lower(),
                    variant=label,
                    lora=flags.lora,
                    multiscale=flags.multiscale,
                    interaction=flags.interaction,
                    decoder=flags.decoder,
                )
            )
        return pd.DataFrame(rows)

    def overlap(self, model: UrbanSAM | None = None) -> pd.DataFrame:
        if model is None:
            model = self.train_variant(self.cfg, "overlap-base")
        return overlap_table(model, self.test_samples, seed=self.cfg.seed)

    def run(self, kind: AblationKind, checkpoint: str | Path | None = None) -> pd.DataFrame:
        if kind == AblationKind.OVERLAP:
            model = load_model(checkpoint)[0] if checkpoint is not None else None
            table = self.overlap(model)
        elif kind == AblationKind.LORA_PLACEMENT:
            table = self.lora_placement()
        elif kind == AblationKind.LORA_RANK:
            table = self.lora_rank()
        elif kind == AblationKind.LORA_TARGETS:
            table = self.lora_targets()
        else:
            table = self.components()
        self.out_dir.mkdir(parents=True, exist_ok=True)
        path = self.out_dir / f"ablation_{kind.value}.csv"
        table.to_csv(path, index=False)
        logger.info("Wrote %d ablation rows to %s", len(table), path)
        return table


def _prompt_seed(seed: int, kind: PromptKind, target: int, index: int) -> int:
    kind_no = PROMPT_KINDS.index(kind)
    return int(np.random.SeedSequence([seed, kind_no, target, index]).generate_state(1)[0])


def overlap_table(
    model: UrbanSAM, samples: Sequence[RasterSample], *, seed: int = 0
) -> pd.DataFrame:
    """Simulated prompts at every target overlap, plus the model's own prompt as "learned".

    ``prompt_iou`` is the mean achieved overlap as a fraction: mask IoU for masks, box
    IoU for boxes and the agreeing share of cues for points.
    """
    predictor = ModelPredictor(model)
    rows: list[dict[str, Any]] = []
    for kind in PROMPT_KINDS:
        for target in ALLOWED_OVERLAP_TARGETS:
            used: list[RasterSample] = []
            prompts: list[np.ndarray | None] = []
            overlaps: list[float] = []
            for i, sample in enumerate(samples):
                spec = PromptSimSpec(
                    kind=kind, target_overlap=target, seed=_prompt_seed(seed, kind, target, i)
                )
                try:
                    simulated = simulate_prompt(sample.mask, spec)  # type: ignore[arg-type]
                except (InvalidInputError, PromptSimulationError) as exc:
                    logger.warning("Skipping %s for %s@%d: %s", sample.source_id, kind, target, exc)
                    continue
                used.append(sample)
                prompts.append(simulated.mask)
                overlaps.append(simulated.overlap)
            report = evaluate_samples(predictor, used, prompts=prompts).report()
            rows.append(
                {
                    "prompt": kind.value,
                    "overlap": target,
                    "prompt_iou": round(float(np.mean(overlaps)) / 100, 4) if overlaps else 0.0,
                    "samples": len(used),
                    **metric_columns(report),
                }
            )

    learned = [mask_iou(predictor.prompt(s), s.mask) for s in samples]  # type: ignore[arg-type]
    rows.append(
        {
            "prompt": "learned",
            "overlap": None,
            "prompt_iou": round(float(np.mean(learned)), 4),
            "samples": len(samples),
            **metric_columns(evaluate_samples(predictor, samples).report()),
        }
    )
    return pd.DataFrame(rows)


def ablate(
    kind: AblationKind | str,
    cfg: TrainConfig,
    out_dir: str | Path,
    *,
    checkpoint: str | Path | None = None,
) -> pd.DataFrame:
    try:
        kind = AblationKind(kind)
    except ValueError as exc:
        valid = ", ".join(k.value for k in AblationKind)
        raise ConfigurationError(
            f"unknown ablation kind {kind!r}; expected one of {valid}"
        ) from exc
    return AblationRunner.from_config(cfg, out_dir).run(kind, checkpoint)
