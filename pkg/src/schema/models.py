from enum import StrEnum


class ObjectClass(StrEnum):
    BUILDING = "building"
    ROAD = "road"
    WATER = "water"


class PadMode(StrEnum):
    REFLECT = "reflect"
    ZERO = "zero"


class PromptKind(StrEnum):
    MASK = "mask"
    POINT = "point"
    BOX = "box"


class LoRATarget(StrEnum):
    """Attention projections that can carry a LoRA pair."""

    Q = "q"
    K = "k"
    V = "v"
    O = "o"  # noqa: E741

    @classmethod
    def _missing_(cls, value: object) -> "LoRATarget | None":
        if isinstance(value, str):
            lowered = value.lower()
            for member in cls:
                if member.value == lowered:
                    return member
        return None


LORA_TARGET_ORDER: tuple[LoRATarget, ...] = (LoRATarget.Q, LoRATarget.K, LoRATarget.V, LoRATarget.O)


class Schedule(StrEnum):
    NONE = "none"
    WARMUP_EXP = "warmup_exp"


class LoRAPlacement(StrEnum):
    """Where LoRA pairs live."""

    FROZEN = "frozen"
    DECODER_ONLY = "decoder-only"
    ENCODER_ONLY = "encoder-only"
    BOTH = "both"

    @property
    def encoder(self) -> bool:
        return self in (LoRAPlacement.ENCODER_ONLY, LoRAPlacement.BOTH)

    @property
    def decoder(self) -> bool:
        return self in (LoRAPlacement.DECODER_ONLY, LoRAPlacement.BOTH)


class AblationKind(StrEnum):
    OVERLAP = "overlap"
    LORA_PLACEMENT = "lora_placement"
    LORA_RANK = "lora_rank"
    LORA_TARGETS = "lora_targets"
    COMPONENTS = "components"


class Split(StrEnum):
    TRAIN = "train"
    VAL = "val"
    TEST = "test"


class TaskPreset(StrEnum):
    WATER = "water"
    ROAD = "road"
    BUILDING = "building"
