"""Model and training configuration dataclasses."""
from __future__ import annotations

from dataclasses import dataclass, replace


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    """Which objective terms are active, and a few structural switches.

    The fused reconstruction term is always on.
    """
    use_self: bool = False
    use_cross: bool = False
    use_corr: bool = False
    use_dw: bool = False
    beta: float = 1.0
    lam: float = 0.1
    eps_corr: float = 1e-8
    # "fused": modality states interpolate against the fused previous state
    # (as the update equations are written); "per_modality": against their own.
    modality_state_recurrence: str = "fused"
    decode_order: str = "reverse"

    def __post_init__(self):
        if self.beta <= 0:
            raise ConfigError("beta must be positive")
        if self.lam < 0:
            raise ConfigError("lambda must be non-negative")
        if self.modality_state_recurrence not in ("fused", "per_modality"):
            raise ConfigError(f"bad modality_state_recurrence {self.modality_state_recurrence!r}")
        if self.decode_order not in ("reverse", "forward"):
            raise ConfigError(f"bad decode_order {self.decode_order!r}")

    def with_(self, **kw) -> "ModelConfig":
        return replace(self, **kw)


# (use_self, use_cross, use_corr, use_dw)
PRESET_FLAGS = {
    "fused": (False, False, False, False),
    "self": (True, False, False, False),
    "cross": (False, True, False, False),
    "all": (True, True, False, False),
    "corr": (True, True, True, False),
    "corr-dw": (True, True, True, True),
}
CONFIG_NAMES = tuple(PRESET_FLAGS) + ("baseline",)


def preset(name: str, **overrides) -> ModelConfig:
    """Named ablation configuration (``baseline`` lives in evalkit)."""
    try:
        s, c, r, w = PRESET_FLAGS[name]
    except KeyError:
        raise ConfigError(f"unknown config {name!r}; choose from {sorted(PRESET_FLAGS)}") from None
    return ModelConfig(use_self=s, use_cross=c, use_corr=r, use_dw=w, **overrides)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 32
    base_lr: float = 0.05
    eps_adapt: float = 1e-8
    grad_clip: float | None = None
    seed: int = 0
    hidden: int = 32

    def __post_init__(self):
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.base_lr <= 0 or self.eps_adapt <= 0:
            raise ConfigError("base_lr and eps_adapt must be positive")
        if self.grad_clip is not None and self.grad_clip <= 0:
            raise ConfigError("grad_clip must be positive or None")
        if self.hidden < 1:
            raise ConfigError("hidden must be >= 1")
