"""Request/response models for the HTTP service.

One configuration schema (RunConfig) is shared by every endpoint and by the
command-line client. Unknown keys are rejected everywhere so a typo in an
override fails loudly instead of silently training the wrong variant.
"""
from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field

from ..ablation import ABLATION_VARIANTS
from ..data_io import SynthSpec
from ..gradsuite import DEFAULT_SEEDS
from ..model.config import ModelConfig
from ..trainer import TrainConfig


class PathsConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    train_features: str | None = None   # CKFT1 directory
    heldout_features: str | None = None
    checkpoint: str | None = None       # CKPT1 directory
    out_dir: str | None = None          # default: runs/<command>


class GradSuiteConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    seeds: list[int] = Field(default_factory=lambda: list(DEFAULT_SEEDS))
    tol: float = 1e-4
    max_coords: int | None = 4          # probed coordinates per tensor
    pairs: int = 4                      # batch size of the probe corpus
    both_normalizers: bool = True


class AblationConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    variants: list[str] = Field(default_factory=lambda: list(ABLATION_VARIANTS))
    seeds: list[int] = Field(default_factory=lambda: [7, 8, 9])


class RunConfig(BaseModel):
    """The one knob surface: every endpoint reads the sections it needs."""

    model_config = ConfigDict(extra="forbid", protected_namespaces=())

    model: ModelConfig = Field(default_factory=ModelConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    synth: SynthSpec = Field(default_factory=SynthSpec)
    holdout: int = 0                    # tail pairs held out of training
    paths: PathsConfig = Field(default_factory=PathsConfig)
    gradcheck: GradSuiteConfig = Field(default_factory=GradSuiteConfig)
    ablation: AblationConfig = Field(default_factory=AblationConfig)
    seed: int | None = None             # overrides train.seed and synth.seed

    def effective(self) -> "RunConfig":
        if self.seed is None:
            return self
        data = self.model_dump()
        data["train"]["seed"] = self.seed
        data["synth"]["seed"] = self.seed
        return RunConfig(**data)


class ErrorBody(BaseModel):
    kind: str
    message: str


class ErrorEnvelope(BaseModel):
    error: ErrorBody


class HealthResponse(BaseModel):
    status: str
    version: str


class GenDataResponse(BaseModel):
    out_dir: str
    train_path: str
    heldout_path: str | None
    train_pairs: int
    heldout_pairs: int
    dim_visual: int
    dim_textual: int


class EpochRow(BaseModel):
    epoch: int
    lr: float
    l_con: float
    l_kl: float
    l_all: float
    r1_i2t: float
    r1_t2i: float
    rsum: float


class TrainResponse(BaseModel):
    out_dir: str
    final_checkpoint: str
    best_checkpoint: str
    metrics_csv: str
    epochs: int
    initial_l_all: float
    final_l_all: float
    best_rsum: float
    last_epoch: EpochRow | None


class DirectionRecalls(BaseModel):
    r1: float
    r5: float
    r10: float


class EvalResponse(BaseModel):
    n: int
    sentence_retrieval: DirectionRecalls
    image_retrieval: DirectionRecalls
    rsum: float


class GradCellRow(BaseModel):
    seed: int
    attention_normalizer: str
    max_rel_err: float
    passed: bool
    tensors: int


class GradCheckResponse(BaseModel):
    tol: float
    max_rel_err: float
    passed: bool
    cells: list[GradCellRow]


class AblateResponse(BaseModel):
    out_dir: str
    csv_path: str
    summary_path: str
    rows: int
    rsum_ordering: list[str]
    summary: dict


class ExportMatchingResponse(BaseModel):
    path: str
    rows: int
    pairs: int


class ParamCountResponse(BaseModel):
    total: int
    by_group: dict[str, int]
    by_path: dict[str, int]
