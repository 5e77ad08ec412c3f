from model.alignment import CrossAttnParams, CrossMaskedAttention, cross_masked_attention
from model.checkpoint import load_model, load_tensors, save_model, save_tensors
from model.decoder import ConsistencyDecoder, DecoderState, PlainDecoder, TokenMLP, decode
from model.features import FeatureMap, ScalePyramid, StageBundle
from model.lora import LoRAPair, LoRASet, attach_lora, lora_linear
from model.params import ParamReport, analytic_learnable, parameter_report
from model.prompt import PromptHead, PromptMask, binarize, fuse_stage_masks
from model.trunk import Trunk, TrunkBlock, trunk_checksum
from model.urbansam import ModelOutput, UrbanSAM
from model.uscaling import UScalingAdapter, UScalingModule, uscale_forward

__all__ = [
    "ConsistencyDecoder",
    "CrossAttnParams",
    "CrossMaskedAttention",
    "DecoderState",
    "FeatureMap",
    "LoRAPair",
    "LoRASet",
    "ModelOutput",
    "ParamReport",
    "PlainDecoder",
    "PromptHead",
    "PromptMask",
    "ScalePyramid",
    "StageBundle",
    "TokenMLP",
    "Trunk",
    "TrunkBlock",
    "UScalingAdapter",
    "UScalingModule",
    "UrbanSAM",
    "analytic_learnable",
    "attach_lora",
    "binarize",
    "cross_masked_attention",
    "decode",
    "fuse_stage_masks",
    "load_model",
    "load_tensors",
    "lora_linear",
    "parameter_report",
    "save_model",
    "save_tensors",
    "trunk_checksum",
    "uscale_forward",
]
