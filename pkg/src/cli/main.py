"""``urbansam`` console entry point.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections.abc import Callable, Sequence
from pathlib import Path

from pydantic import ValidationError

from core.errors import UrbanSAMError
from core.settings import settings
from data.synthetic import write_synthetic_dataset
from harness.ablate import ablate
from harness.evaluate import evaluate
from harness.predict import predict
from harness.trainer import train
from model.params import parameter_report
from model.urbansam import UrbanSAM
from schema.config import SyntheticDatasetConfig, TilingSpec, TrainConfig, load_train_config
from schema.models import AblationKind, ObjectClass, PadMode, Split, TaskPreset

logger = logging.getLogger(__name__)

Handler = Callable[[argparse.Namespace], None]


def _load_config(args: argparse.Namespace) -> TrainConfig:
    cfg = load_train_config(args.config) if args.config else TrainConfig()
    if getattr(args, "preset", None):
        cfg = cfg.with_preset(TaskPreset(args.preset))
    if getattr(args, "manifest", None):
        data = cfg.data.model_copy(update={"manifest": args.manifest})
        cfg = cfg.model_copy(update={"data": data})
    return cfg


def _emit(payload: object) -> None:
    print(json.dumps(payload, indent=2, default=str))


def cmd_train(args: argparse.Namespace) -> None:
    cfg = _load_config(args)
    if args.epochs is not None:
        cfg = TrainConfig.model_validate({**cfg.model_dump(), "epochs": args.epochs})
    record, _ = train(cfg, run_dir=args.out, resume=args.resume, progress=not args.quiet)
    _emit(
        {
            "run_dir": record.run_dir,
            "epochs": record.last_epoch,
            "checkpoint": record.last_checkpoint,
            "final_loss": record.epochs[-1].loss.total if record.epochs else None,
        }
    )


def cmd_eval(args: argparse.Namespace) -> None:
    report = evaluate(
        args.checkpoint,
        args.manifest,
        Split(args.split),
        out_dir=args.out,
        macro=args.macro,
        device=settings.DEVICE,
    )
    _emit(json.loads(report.model_dump_json()))


def cmd_predict(args: argparse.Namespace) -> None:
    tiling = TilingSpec(
        patch_size=args.patch_size, overlap_fraction=args.overlap, pad_mode=PadMode(args.pad_mode)
    )
    files = predict(
        args.checkpoint,
        args.input,
        tiling,
        args.out,
        export_prompt=args.export_prompt,
        device=settings.DEVICE,
    )
    _emit({"probability": files.probability, "binary": files.binary, "prompt": files.prompt})


def cmd_ablate(args: argparse.Namespace) -> None:
    cfg = _load_config(args)
    table = ablate(args.kind, cfg, args.out, checkpoint=args.checkpoint)
    print(table.to_string(index=False))


def cmd_synth(args: argparse.Namespace) -> None:
    test = int(round(args.count * args.test_fraction))
    val = int(round(args.count * args.val_fraction))
    cfg = SyntheticDatasetConfig(
        object_class=ObjectClass(args.object_class),
        size=args.size,
        train_count=args.count - test - val,
        val_count=val,
        test_count=test,
        seed=args.seed,
    )
    manifest = write_synthetic_dataset(args.out, cfg, workers=settings.NUM_WORKERS)
    _emit({"manifest": manifest, "train": cfg.train_count, "val": val, "test": test})


def cmd_params(args: argparse.Namespace) -> None:
    cfg = _load_config(args)
    report = parameter_report(UrbanSAM(cfg.model, cfg.lora_config()))
    _emit(
        {
            **report.millions(),
            "learnable_count": report.learnable,
            "analytic_learnable_count": report.analytic_learnable,
        }
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="urbansam", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model")
    p.add_argument("--config", type=Path)
    p.add_argument("--manifest", type=Path, help="dataset manifest; synthetic scenes if omitted")
    p.add_argument("--preset", choices=[t.value for t in TaskPreset])
    p.add_argument("--resume", type=Path, help="checkpoint directory to continue from")
    p.add_argument("--epochs", type=int)
    p.add_argument("--out", type=Path)
    p.add_argument("--quiet", action="store_true", help="no progress bars")
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("eval", help="score a checkpoint on one split")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--split", choices=[s.value for s in Split], default=Split.TEST.value)
    p.add_argument("--macro", action="store_true", help="average derived metrics per image")
    p.add_argument("--out", type=Path)
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("predict", help="segment a raster of any size")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--patch-size", type=int, default=512)
    p.add_argument("--overlap", type=float, default=0.0)
    p.add_argument("--pad-mode", choices=[m.value for m in PadMode], default=PadMode.REFLECT.value)
    p.add_argument("--export-prompt", action="store_true")
    p.add_argument("--out", type=Path, default=Path("predictions"))
    p.set_defaults(handler=cmd_predict)

    p = sub.add_parser("ablate", help="run an ablation sweep")
    p.add_argument("--kind", choices=[k.value for k in AblationKind], required=True)
    p.add_argument("--config", type=Path)
    p.add_argument("--manifest", type=Path)
    p.add_argument("--preset", choices=[t.value for t in TaskPreset])
    p.add_argument("--checkpoint", type=Path, help="trained model for the overlap sweep")
    p.add_argument("--out", type=Path, default=Path("ablations"))
    p.set_defaults(handler=cmd_ablate)

    p = sub.add_parser("synth", help="write a synthetic dataset")
    p.add_argument(
        "--class",
        dest="object_class",
        choices=[c.value for c in ObjectClass],
        default=ObjectClass.BUILDING.value,
    )
    p.add_argument("--count", type=int, default=640)
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.add_argument("--val-fraction", type=float, default=0.0)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(handler=cmd_synth)

    p = sub.add_parser("params", help="report parameter counts")
    p.add_argument("--config", type=Path)
    p.set_defaults(handler=cmd_params)
    return parser


def configure_logging() -> None:
    root_logger = logging.getLogger()
    if root_logger.handlers:
        print(
            f"Warning: Root logger already has {len(root_logger.handlers)} handler(s) configured. "
            f"basicConfig() will be ignored. "
            f"Current level: {logging.getLevelName(root_logger.level)}",
            file=sys.stderr,
        )
    logging.basicConfig(level=settings.LOG_LEVEL.to_logging_level())


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging()
    handler: Handler = args.handler
    try:
        handler(args)
    except UrbanSAMError as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return exc.exit_code
    except ValidationError as exc:
        logger.error("Invalid configuration: %s", exc)
        return 2
    except OSError as exc:
        logger.error("I/O error: %s", exc)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
