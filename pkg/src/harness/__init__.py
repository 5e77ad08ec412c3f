from harness.ablate import AblationRunner, ablate, overlap_table
from harness.evaluate import ModelPredictor, evaluate, evaluate_samples, write_report
from harness.predict import PredictionFiles, predict, predict_raster
from harness.schedule import config_lr, lr_at
from harness.trainer import Trainer, epoch_order, train

__all__ = [
    "AblationRunner",
    "ModelPredictor",
    "PredictionFiles",
    "Trainer",
    "ablate",
    "config_lr",
    "epoch_order",
    "evaluate",
    "evaluate_samples",
    "lr_at",
    "overlap_table",
    "predict",
    "predict_raster",
    "train",
    "write_report",
]
