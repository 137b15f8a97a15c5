"""Model hyperparameters and structural switches."""
from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, model_validator


class ModelConfig(BaseModel):
    """Shape and variant configuration for the two-pipeline model.

    ``m = 0`` disables the style extractor (and with it the whole adapter);
    it exists for the ablation harness. ``use_cko = False`` keeps the style
    extractor but bypasses the common-unit attention and the sequential
    state update.
    """

    model_config = ConfigDict(extra="forbid")

    n: int = 8                  # tokens per item after pad/truncate
    d_in: int = 16              # input feature dim (per-modality overrides below)
    d_in_visual: Optional[int] = None
    d_in_textual: Optional[int] = None
    d_e: int = 1024             # common-space dim
    m: int = 4                  # style-extractor layers
    k: int = 16                 # number of common feature units
    L: int = 2                  # transformer layers per pipeline
    attention_normalizer: Literal["literal-eq1", "softmax"] = "literal-eq1"
    gate_normalizer: Literal["paper-sigmoid", "softmax-rows"] = "paper-sigmoid"
    gate_clamp: bool = True
    see_input: Literal["transformer", "extractor"] = "transformer"
    use_cko: bool = True
    tau: float = 0.07           # contrastive temperature (stored, not optimized)

    @model_validator(mode="after")
    def _check(self) -> "ModelConfig":
        for name in ("n", "d_in", "d_e", "k", "L"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.m < 0:
            raise ValueError("m must be >= 0")
        if self.m >= 1 and self.d_e % self.m != 0:
            raise ValueError(f"m={self.m} must divide d_e={self.d_e}")
        if self.d_e % 4 != 0:
            raise ValueError("d_e must be divisible by 4 (feed-forward bottleneck)")
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        return self

    @property
    def dv(self) -> int:
        return self.d_in_visual if self.d_in_visual is not None else self.d_in

    @property
    def dt(self) -> int:
        return self.d_in_textual if self.d_in_textual is not None else self.d_in

    @property
    def d_m(self) -> int:
        if self.m < 1:
            raise ValueError("d_m undefined for m=0")
        return self.d_e // self.m

    @property
    def d_f(self) -> int:
        return self.d_e // 4

    @property
    def has_adapter(self) -> bool:
        return self.m >= 1


def toy_config(**overrides) -> ModelConfig:
    """Small configuration used throughout the test suite."""
    base = dict(n=8, d_in=16, d_e=32, m=4, k=4, L=2)
    base.update(overrides)
    return ModelConfig(**base)
