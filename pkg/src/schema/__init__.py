from schema.config import (
    TASK_PRESETS,
    ComponentToggles,
    DataConfig,
    DecoderConfig,
    LoRAConfig,
    LossWeights,
    ModelConfig,
    PromptSimSpec,
    SyntheticDatasetConfig,
    SyntheticSceneSpec,
    TilingSpec,
    TrainConfig,
    TrunkConfig,
    UScalingConfig,
    load_train_config,
)
from schema.models import (
    AblationKind,
    LoRAPlacement,
    LoRATarget,
    ObjectClass,
    PadMode,
    PromptKind,
    Schedule,
    Split,
    TaskPreset,
)
from schema.records import (
    EpochRecord,
    LossBreakdown,
    MacroReport,
    ManifestRecord,
    MetricsReport,
    RunRecord,
)

__all__ = [
    "AblationKind",
    "ComponentToggles",
    "DataConfig",
    "DecoderConfig",
    "EpochRecord",
    "LoRAConfig",
    "LoRAPlacement",
    "LoRATarget",
    "LossBreakdown",
    "LossWeights",
    "MacroReport",
    "ManifestRecord",
    "MetricsReport",
    "ModelConfig",
    "ObjectClass",
    "PadMode",
    "PromptKind",
    "PromptSimSpec",
    "RunRecord",
    "Schedule",
    "Split",
    "SyntheticDatasetConfig",
    "SyntheticSceneSpec",
    "TASK_PRESETS",
    "TaskPreset",
    "TilingSpec",
    "TrainConfig",
    "TrunkConfig",
    "UScalingConfig",
    "load_train_config",
]
