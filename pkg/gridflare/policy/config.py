# coding:utf-8

from dataclasses import dataclass
from typing import Dict

from gridflare.config import ConfigMixin
from gridflare.errors import ConfigError
from gridflare.house.actions import ACTION_COUNT
from gridflare.house.tokens import CELL_VOCAB
from gridflare.house.tokens import INSTRUCTION_VOCAB
from gridflare.house.tokens import OBSERVATION_TOKENS
from gridflare.house.tokens import PROPRIO_VOCAB


@dataclass(frozen=True)
class PolicyConfig(ConfigMixin):
    cell_vocab: int = CELL_VOCAB
    proprio_vocab: int = PROPRIO_VOCAB
    instruction_vocab: int = INSTRUCTION_VOCAB
    action_count: int = ACTION_COUNT
    d_model: int = 128
    encoder_layers: int = 2
    encoder_heads: int = 4
    decoder_layers: int = 2
    decoder_heads: int = 4
    mlp_ratio: int = 2
    # longest decoder context; the longest task runs 300 steps
    context_limit: int = 300
    seed: int = 0

    def __post_init__(self):
        for name in ("d_model", "encoder_layers", "encoder_heads", "decoder_layers",  # noqa:E501
                     "decoder_heads", "mlp_ratio", "context_limit"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")  # noqa:E501
        for heads in (self.encoder_heads, self.decoder_heads):
            if self.d_model % heads:
                raise ConfigError(f"d_model {self.d_model} is not divisible by {heads} heads")  # noqa:E501
        if self.d_model % 2:
            raise ConfigError("d_model must be even for sinusoidal encodings")
        if (self.cell_vocab, self.proprio_vocab, self.instruction_vocab, self.action_count) != (CELL_VOCAB, PROPRIO_VOCAB, INSTRUCTION_VOCAB, ACTION_COUNT):  # noqa:E501
            raise ConfigError("vocabulary sizes do not match the simulator token tables")  # noqa:E501

    @property
    def tokens(self) -> int:
        """Encoder sequence length: observation tokens plus the STATE token."""
        return OBSERVATION_TOKENS + 1


PRESETS: Dict[str, Dict[str, int]] = {
    "desk": {"d_model": 128, "encoder_layers": 2, "encoder_heads": 4, "decoder_layers": 2, "decoder_heads": 4, "mlp_ratio": 2},  # noqa:E501
    "paper": {"d_model": 512, "encoder_layers": 3, "encoder_heads": 8, "decoder_layers": 3, "decoder_heads": 8, "mlp_ratio": 4},  # noqa:E501
}


def preset(name: str, **overrides) -> PolicyConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}, expected one of {', '.join(PRESETS)}")  # noqa:E501
    values = dict(PRESETS[name])
    values.update(overrides)
    return PolicyConfig.from_dict(values)
