"""Directory checkpoints: ``manifest.json`` plus one little-endian ``tensors.bin``.

Tensors are written in sorted-name order and the manifest is dumped with sorted keys,
so loading a checkpoint and saving it again reproduces both files byte for byte.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any

import numpy as np
import torch

from core.errors import DataError
from model.urbansam import UrbanSAM
from schema.config import LoRAConfig, ModelConfig

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
BLOB_NAME = "tensors.bin"
FORMAT_VERSION = 1
OPTIMIZER_PREFIX = "optimizer."

_DTYPES: dict[torch.dtype, str] = {
    torch.float32: "<f4",
    torch.float64: "<f8",
    torch.float16: "<f2",
    torch.int64: "<i8",
    torch.int32: "<i4",
    torch.uint8: "|u1",
    torch.bool: "|b1",
}
_DTYPE_NAMES: dict[torch.dtype, str] = {
    torch.float32: "float32",
    torch.float64: "float64",
    torch.float16: "float16",
    torch.int64: "int64",
    torch.int32: "int32",
    torch.uint8: "uint8",
    torch.bool: "bool",
}
_BY_NAME = {name: dtype for dtype, name in _DTYPE_NAMES.items()}


def save_tensors(
    directory: str | Path, tensors: dict[str, torch.Tensor], metadata: dict[str, Any] | None = None
) -> Path:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    entries: dict[str, dict[str, Any]] = {}
    offset = 0
    with open(out / BLOB_NAME, "wb") as blob:
        for name in sorted(tensors):
            tensor = tensors[name].detach().cpu().contiguous()
            if tensor.dtype not in _DTYPES:
                raise DataError(f"cannot checkpoint tensor {name!r} of dtype {tensor.dtype}")
            raw = tensor.numpy().astype(np.dtype(_DTYPES[tensor.dtype]), copy=False).tobytes()
            blob.write(raw)
            entries[name] = {
                "shape": list(tensor.shape),
                "dtype": _DTYPE_NAMES[tensor.dtype],
                "offset": offset,
                "nbytes": len(raw),
                "file": BLOB_NAME,
            }
            offset += len(raw)
    manifest = {"version": FORMAT_VERSION, "tensors": entries, "metadata": metadata or {}}
    (out / MANIFEST_NAME).write_text(
        json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    logger.debug("Wrote %d tensors (%d bytes) to %s", len(entries), offset, out)
    return out


def load_tensors(directory: str | Path) -> tuple[dict[str, torch.Tensor], dict[str, Any]]:
    root = Path(directory)
    manifest_path = root / MANIFEST_NAME
    if not manifest_path.exists():
        raise DataError(f"checkpoint manifest not found: {manifest_path}")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"corrupt checkpoint manifest {manifest_path}: {exc}") from exc
    if manifest.get("version") != FORMAT_VERSION:
        raise DataError(f"unsupported checkpoint version {manifest.get('version')!r}")

    blobs: dict[str, bytes] = {}
    tensors: dict[str, torch.Tensor] = {}
    for name, entry in manifest["tensors"].items():
        file = entry["file"]
        if file not in blobs:
            try:
                blobs[file] = (root / file).read_bytes()
            except OSError as exc:
                raise DataError(f"cannot read checkpoint blob {root / file}: {exc}") from exc
        dtype = _BY_NAME[entry["dtype"]]
        start, size = entry["offset"], entry["nbytes"]
        chunk = blobs[file][start : start + size]
        if len(chunk) != size:
            raise DataError(f"checkpoint blob {file} is truncated at tensor {name!r}")
        array = np.frombuffer(chunk, dtype=np.dtype(_DTYPES[dtype])).reshape(entry["shape"])
        tensors[name] = torch.from_numpy(array.copy())
    return tensors, manifest.get("metadata", {})


def optimizer_tensors(
    optimizer: torch.optim.Optimizer, names: dict[int, str]
) -> dict[str, torch.Tensor]:
    """Momentum buffers keyed ``optimizer.{param name}.momentum_buffer``."""
    out = {}
    for group in optimizer.param_groups:
        for param in group["params"]:
            buf = optimizer.state.get(param, {}).get("momentum_buffer")
            if buf is not None:
                out[f"{OPTIMIZER_PREFIX}{names[id(param)]}.momentum_buffer"] = buf
    return out


def restore_optimizer(
    optimizer: torch.optim.Optimizer,
    tensors: dict[str, torch.Tensor],
    params: dict[str, torch.nn.Parameter],
) -> int:
    restored = 0
    for key, value in tensors.items():
        if not key.startswith(OPTIMIZER_PREFIX):
            continue
        name = key[len(OPTIMIZER_PREFIX) : -len(".momentum_buffer")]
        if name not in params:
            raise DataError(f"optimizer state for unknown parameter {name!r}")
        param = params[name]
        optimizer.state[param]["momentum_buffer"] = value.to(param.device, param.dtype)
        restored += 1
    return restored


def model_tensors(model: torch.nn.Module) -> dict[str, torch.Tensor]:
    return dict(model.state_dict())


def split_model_tensors(tensors: dict[str, torch.Tensor]) -> dict[str, torch.Tensor]:
    return {k: v for k, v in tensors.items() if not k.startswith(OPTIMIZER_PREFIX)}


def save_model(
    directory: str | Path,
    model: UrbanSAM,
    metadata: dict[str, Any] | None = None,
    optimizer: torch.optim.Optimizer | None = None,
) -> Path:
    """Model tensors (trunk included), optional momentum buffers, and the configs."""
    tensors = model_tensors(model)
    if optimizer is not None:
        names = {id(p): n for n, p in model.named_parameters()}
        tensors.update(optimizer_tensors(optimizer, names))
    meta = {
        "model_config": model.cfg.model_dump(mode="json"),
        "lora_config": model.lora_cfg.model_dump(mode="json"),
        **(metadata or {}),
    }
    return save_tensors(directory, tensors, meta)


def load_model(directory: str | Path) -> tuple[UrbanSAM, dict[str, torch.Tensor], dict[str, Any]]:
    """Rebuild the model from the stored configs and load its weights.

    Returns the model, the full tensor map (optimizer buffers included) and the metadata.
    """
    tensors, metadata = load_tensors(directory)
    try:
        cfg = ModelConfig.model_validate(metadata["model_config"])
        lora = LoRAConfig.model_validate(metadata["lora_config"])
    except KeyError as exc:
        raise DataError(f"checkpoint {directory} lacks {exc.args[0]} metadata") from exc
    model = UrbanSAM(cfg, lora)
    missing, unexpected = model.load_state_dict(split_model_tensors(tensors), strict=False)
    if missing or unexpected:
        raise DataError(
            f"checkpoint {directory} does not match its config: missing {missing}, "
            f"unexpected {unexpected}"
        )
    return model, tensors, metadata
