from __future__ import annotations

import csv
import io
from pathlib import Path

from pydantic import BaseModel, Field, computed_field, model_validator

from schema.models import Split

METRIC_KEYS = ("tp", "fp", "fn", "tn", "oa", "precision", "recall", "f1", "iou")
DERIVED_KEYS = ("oa", "precision", "recall", "f1", "iou")


def _ratio(num: int, den: int) -> float | None:
    return None if den == 0 else num / den


class MetricsReport(BaseModel):
    """Pooled confusion counts; every derived metric is recomputed from them.

    A metric whose denominator is zero reports 0.0 and is listed in ``undefined``.
    """

    tp: int = Field(default=0, ge=0)
    fp: int = Field(default=0, ge=0)
    fn: int = Field(default=0, ge=0)
    tn: int = Field(default=0, ge=0)

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def _derived(self) -> dict[str, float | None]:
        precision = _ratio(self.tp, self.tp + self.fp)
        recall = _ratio(self.tp, self.tp + self.fn)
        if precision is None or recall is None or precision + recall == 0:
            f1 = None if precision is None or recall is None else 0.0
        else:
            f1 = 2 * precision * recall / (precision + recall)
        return {
            "oa": _ratio(self.tp + self.tn, self.total),
            "precision": precision,
            "recall": recall,
            "f1": f1,
            "iou": _ratio(self.tp, self.tp + self.fp + self.fn),
        }

    @computed_field  # type: ignore[prop-decorator]
    @property
    def oa(self) -> float:
        return self._derived()["oa"] or 0.0

    @computed_field  # type: ignore[prop-decorator]
    @property
    def precision(self) -> float:
        return self._derived()["precision"] or 0.0

    @computed_field  # type: ignore[prop-decorator]
    @property
    def recall(self) -> float:
        return self._derived()["recall"] or 0.0

    @computed_field  # type: ignore[prop-decorator]
    @property
    def f1(self) -> float:
        return self._derived()["f1"] or 0.0

    @computed_field  # type: ignore[prop-decorator]
    @property
    def iou(self) -> float:
        return self._derived()["iou"] or 0.0

    @computed_field  # type: ignore[prop-decorator]
    @property
    def undefined(self) -> list[str]:
        return [k for k, v in self._derived().items() if v is None]

    def merge(self, other: MetricsReport) -> MetricsReport:
        return MetricsReport(
            tp=self.tp + other.tp,
            fp=self.fp + other.fp,
            fn=self.fn + other.fn,
            tn=self.tn + other.tn,
        )

    def __add__(self, other: MetricsReport) -> MetricsReport:
        return self.merge(other)

    def as_row(self) -> dict[str, float | int]:
        return {key: getattr(self, key) for key in METRIC_KEYS}

    def to_json(self) -> str:
        return self.model_dump_json(include=set(METRIC_KEYS), indent=2)

    def to_csv_row(self, header: bool = False) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=list(METRIC_KEYS), lineterminator="\n")
        if header:
            writer.writeheader()
        writer.writerow(self.as_row())
        return buf.getvalue()

    def percentages(self) -> dict[str, str]:
        """Derived metrics as percentage strings with two decimals, e.g. ``"86.01"``."""
        return {key: f"{getattr(self, key) * 100:.2f}" for key in DERIVED_KEYS}


class MacroReport(BaseModel):
    """Per-image averaged derived metrics alongside the pooled counts."""

    pooled: MetricsReport
    images: int = Field(ge=0)
    oa: float = 0.0
    precision: float = 0.0
    recall: float = 0.0
    f1: float = 0.0
    iou: float = 0.0

    @classmethod
    def from_reports(cls, reports: list[MetricsReport]) -> MacroReport:
        pooled = MetricsReport()
        for report in reports:
            pooled = pooled.merge(report)
        if not reports:
            return cls(pooled=pooled, images=0)
        means = {
            key: sum(getattr(r, key) for r in reports) / len(reports) for key in DERIVED_KEYS
        }
        return cls(pooled=pooled, images=len(reports), **means)

    def percentages(self) -> dict[str, str]:
        return {key: f"{getattr(self, key) * 100:.2f}" for key in DERIVED_KEYS}


class LossBreakdown(BaseModel):
    final: float
    quarter: float
    masks: float
    total: float


class EpochRecord(BaseModel):
    epoch: int = Field(ge=1)
    lr: float
    loss: LossBreakdown
    wall_time: float = Field(ge=0, description="Seconds spent on the epoch")
    checkpoint: Path | None = None
    metrics: MetricsReport | None = None


class RunRecord(BaseModel):
    """Append-only history of a training run."""

    run_dir: Path
    seed: int
    epochs: list[EpochRecord] = Field(default_factory=list)
    trunk_checksum: str = ""
    trainable_params: int = 0

    @model_validator(mode="after")
    def _check_order(self) -> RunRecord:
        numbers = [e.epoch for e in self.epochs]
        if numbers != sorted(set(numbers)):
            raise ValueError(f"epoch records must be strictly increasing, got {numbers}")
        return self

    def append(self, record: EpochRecord) -> None:
        if self.epochs and record.epoch <= self.epochs[-1].epoch:
            raise ValueError(
                f"epoch {record.epoch} does not follow recorded epoch {self.epochs[-1].epoch}"
            )
        self.epochs.append(record)

    @property
    def last_epoch(self) -> int:
        return self.epochs[-1].epoch if self.epochs else 0

    @property
    def last_checkpoint(self) -> Path | None:
        for record in reversed(self.epochs):
            if record.checkpoint is not None:
                return record.checkpoint
        return None

    def save(self, path: Path) -> None:
        path.write_text(self.model_dump_json(indent=2), encoding="utf-8")


class ManifestRecord(BaseModel):
    """One line of a JSON-lines dataset manifest."""

    image: str
    mask: str | None = None
    split: Split = Split.TRAIN

    def resolve(self, root: Path) -> tuple[Path, Path | None]:
        image = root / self.image
        mask = root / self.mask if self.mask is not None else None
        return image, mask

    @classmethod
    def from_line(cls, line: str) -> ManifestRecord:
        return cls.model_validate_json(line)

    def to_line(self) -> str:
        return self.model_dump_json()
