"""SGD training of everything but the trunk, with per-epoch checkpoints and resume.

Determinism: the batch order and augmentations of epoch ``e`` depend only on
``(seed, e)``, and checkpoints carry the momentum buffers, so a run resumed from
epoch ``k`` continues exactly as the uninterrupted run would have.
"""

from __future__ import annotations

import logging
import time
from collections.abc import Sequence
from pathlib import Path

import numpy as np
import torch
from torch.utils.data import DataLoader
from tqdm import tqdm

from core.errors import ConfigurationError, NumericalError, UrbanSAMError
from core.settings import settings
from data.dataset import SegmentationDataset
from data.raster import RasterSample
from harness.evaluate import ModelPredictor, evaluate_samples
from harness.schedule import config_lr, set_lr
from harness.sources import load_samples
from metrics.losses import loss_breakdown
from model.checkpoint import load_tensors, restore_optimizer, save_model, split_model_tensors
from model.trunk import trunk_checksum
from model.urbansam import UrbanSAM
from schema.config import TrainConfig
from schema.models import Split
from schema.records import EpochRecord, LossBreakdown, RunRecord

logger = logging.getLogger(__name__)

RUN_RECORD_NAME = "run.json"
CHECKPOINT_DIR = "checkpoints"


def epoch_order(seed: int, epoch: int, n: int) -> list[int]:
    """Shuffled sample order for one epoch."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, epoch]))
    return [int(i) for i in rng.permutation(n)]


def build_model(cfg: TrainConfig, seed: int) -> UrbanSAM:
    if cfg.loss.n_masks != cfg.model.trunk.num_stages + 1:
        raise ConfigurationError(
            f"loss.n_masks is {cfg.loss.n_masks} but the model emits "
            f"{cfg.model.trunk.num_stages} stage masks plus the prompt"
        )
    return UrbanSAM(cfg.model, cfg.lora_config(), seed=seed)


def build_optimizer(model: UrbanSAM, cfg: TrainConfig) -> torch.optim.SGD:
    params = [p for _, p in model.trainable_parameters()]
    return torch.optim.SGD(
        params, lr=cfg.lr, momentum=cfg.momentum, weight_decay=cfg.weight_decay
    )


def _collate(
    batch: list[tuple[torch.Tensor, torch.Tensor]],
) -> tuple[torch.Tensor, torch.Tensor]:
    images, masks = zip(*batch, strict=True)
    return torch.stack(images), torch.stack(masks)


class Trainer:
    """Owns one model, its optimizer and the run record of a training run."""

    def __init__(
        self,
        cfg: TrainConfig,
        train_samples: Sequence[RasterSample],
        eval_samples: Sequence[RasterSample] = (),
        run_dir: str | Path | None = None,
        *,
        progress: bool = False,
    ) -> None:
        self.cfg = cfg
        self.seed = settings.resolve_seed(cfg.seed)
        self.device = torch.device(settings.DEVICE)
        self.progress = progress
        if not train_samples:
            raise ConfigurationError("training needs at least one sample")
        self.eval_samples = list(eval_samples)
        trunk = cfg.model.trunk
        self.dataset = SegmentationDataset(
            train_samples,
            trunk.image_size,
            trunk.patch_size,
            augment=cfg.augment,
            seed=self.seed,
        )
        self.run_dir = Path(run_dir or cfg.output_dir or settings.OUTPUT_DIR / f"run-{self.seed}")
        self.run_dir.mkdir(parents=True, exist_ok=True)

        torch.manual_seed(self.seed)
        self.model = build_model(cfg, self.seed).to(self.device)
        self.optimizer = build_optimizer(self.model, cfg)
        self.trunk_checksum = trunk_checksum(self.model.trunk)
        self.record = RunRecord(
            run_dir=self.run_dir,
            seed=self.seed,
            trunk_checksum=self.trunk_checksum,
            trainable_params=sum(p.numel() for _, p in self.model.trainable_parameters()),
        )

    def resume(self, checkpoint: str | Path) -> None:
        """Load weights, momentum buffers and the run record saved at ``checkpoint``."""
        tensors, metadata = load_tensors(checkpoint)
        self.model.load_state_dict(split_model_tensors(tensors), strict=True)
        params = dict(self.model.trainable_parameters())
        restored = restore_optimizer(self.optimizer, tensors, params)
        if "run_record" in metadata:
            self.record = RunRecord.model_validate(metadata["run_record"])
            self.record.run_dir = self.run_dir
        if trunk_checksum(self.model.trunk) != self.record.trunk_checksum:
            raise ConfigurationError(f"checkpoint {checkpoint} was written for a different trunk")
        logger.info(
            "Resumed from %s at epoch %d (%d momentum buffers)",
            checkpoint,
            self.record.last_epoch,
            restored,
        )

    def _loader(self, epoch: int) -> DataLoader[tuple[torch.Tensor, torch.Tensor]]:
        self.dataset.set_epoch(epoch)
        return DataLoader(
            self.dataset,
            batch_size=self.cfg.batch_size,
            sampler=epoch_order(self.seed, epoch, len(self.dataset)),
            num_workers=self.cfg.num_workers,
            collate_fn=_collate,
        )

    def train_epoch(self, epoch: int) -> tuple[float, LossBreakdown]:
        lr = config_lr(self.cfg, epoch)
        set_lr(self.optimizer, lr)
        self.model.train()
        sums = {"final": 0.0, "quarter": 0.0, "masks": 0.0, "total": 0.0}
        seen = 0
        batches = tqdm(
            self._loader(epoch), desc=f"epoch {epoch}", leave=False, disable=not self.progress
        )
        for step, (images, masks) in enumerate(batches):
            images, masks = images.to(self.device), masks.to(self.device)
            out = self.model(images)
            total, parts = loss_breakdown(
                out.probability,
                torch.sigmoid(out.quarter_logits),
                out.mask_probabilities(),
                masks,
                self.cfg.loss,
            )
            if not torch.isfinite(total):
                raise NumericalError(
                    f"non-finite loss at epoch {epoch} batch {step}; "
                    f"last good checkpoint: {self.record.last_checkpoint}"
                )
            self.optimizer.zero_grad()
            total.backward()
            self.optimizer.step()
            n = images.shape[0]
            seen += n
            for key, value in parts.items():
                sums[key] += float(value.detach()) * n
            batches.set_postfix(loss=f"{float(total.detach()):.4f}")
        return lr, LossBreakdown(**{k: v / seen for k, v in sums.items()})

    def checkpoint_path(self, epoch: int) -> Path:
        return self.run_dir / CHECKPOINT_DIR / f"epoch_{epoch:04d}"

    def _checkpoint(self, epoch: int) -> Path:
        path = self.checkpoint_path(epoch)
        metadata = {
            "epoch": epoch,
            "train_config": self.cfg.model_dump(mode="json"),
            "run_record": self.record.model_dump(mode="json"),
        }
        return save_model(path, self.model, metadata, self.optimizer)

    def fit(self, epochs: int | None = None) -> RunRecord:
        """Train up to epoch ``epochs`` (default ``cfg.epochs``) from the last recorded one."""
        final_epoch = epochs or self.cfg.epochs
        try:
            for epoch in range(self.record.last_epoch + 1, final_epoch + 1):
                started = time.perf_counter()
                lr, losses = self.train_epoch(epoch)
                metrics = None
                every = self.cfg.eval_every
                if self.eval_samples and every and epoch % every == 0:
                    predictor = ModelPredictor(self.model, self.device)
                    metrics = evaluate_samples(predictor, self.eval_samples).report()
                entry = EpochRecord(
                    epoch=epoch,
                    lr=lr,
                    loss=losses,
                    wall_time=time.perf_counter() - started,
                    checkpoint=self.checkpoint_path(epoch),
                    metrics=metrics,
                )
                self.record.append(entry)
                self._checkpoint(epoch)
                logger.info(
                    "epoch %d lr %.6f loss %.4f (final %.4f quarter %.4f masks %.4f) %.1fs%s",
                    epoch,
                    lr,
                    losses.total,
                    losses.final,
                    losses.quarter,
                    losses.masks,
                    entry.wall_time,
                    "" if metrics is None else f" IoU {metrics.iou:.4f}",
                )
        finally:
            self.record.save(self.run_dir / RUN_RECORD_NAME)

        if trunk_checksum(self.model.trunk) != self.trunk_checksum:
            raise UrbanSAMError("trunk weights changed during training")
        return self.record


def train(
    cfg: TrainConfig,
    manifest: str | Path | None = None,
    *,
    run_dir: str | Path | None = None,
    resume: str | Path | None = None,
    progress: bool = False,
) -> tuple[RunRecord, UrbanSAM]:
    """Train on the manifest's train split (synthetic scenes when none is given)."""
    data = cfg.data.model_copy(update={"manifest": Path(manifest)}) if manifest else cfg.data
    workers = cfg.num_workers or settings.NUM_WORKERS
    train_samples = load_samples(data, Split.TRAIN, workers=workers)
    eval_samples = load_samples(data, Split.VAL, workers=workers)
    trainer = Trainer(cfg, train_samples, eval_samples, run_dir, progress=progress)
    if resume is not None:
        trainer.resume(resume)
    return trainer.fit(), trainer.model
