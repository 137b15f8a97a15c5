"""Ablation harness: trains model variants over a shared seed set and
summarizes retrieval quality per variant.

Variants switch off one ingredient at a time (common-knowledge attention,
the contrastive term) or sweep the style-extractor depth m. Each
(variant, seed) cell is one full training run on the same synthetic corpus
split; the CSV has exactly one row per cell.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from statistics import mean, stdev

from .data_io import SynthSpec, split_pairs, synth_generate
from .errors import ConfigError
from .evaluator import evaluate_retrieval
from .model.config import ModelConfig
from .trainer import TrainConfig, train

ABLATION_VARIANTS = ("standard", "no_cko", "see_0", "see_2", "see_4",
                     "see_8", "see_16", "no_lcon")

CSV_HEADER = ("variant,seed,m,params,"
              "r1_i2t,r5_i2t,r10_i2t,r1_t2i,r5_t2i,r10_t2i,rsum")


def variant_configs(name: str, model_cfg: ModelConfig,
                    train_cfg: TrainConfig) -> tuple[ModelConfig, TrainConfig]:
    """Derive the (model, train) config pair for one named variant."""
    m_cfg = model_cfg.model_dump()
    t_cfg = train_cfg.model_dump()
    if name == "standard":
        pass
    elif name == "no_cko":
        m_cfg["use_cko"] = False
    elif name == "no_lcon":
        t_cfg["contrastive_weight"] = 0.0
    elif name.startswith("see_"):
        try:
            m_cfg["m"] = int(name.split("_", 1)[1])
        except ValueError:
            raise ConfigError(f"unknown ablation variant {name!r}")
    else:
        raise ConfigError(f"unknown ablation variant {name!r}")
    try:
        return ModelConfig(**m_cfg), TrainConfig(**t_cfg)
    except ValueError as exc:
        raise ConfigError(f"variant {name!r} produced an invalid config: {exc}")


@dataclass
class AblationRow:
    variant: str
    seed: int
    m: int
    params: int
    r1_i2t: float
    r5_i2t: float
    r10_i2t: float
    r1_t2i: float
    r5_t2i: float
    r10_t2i: float
    rsum: float

    def csv_row(self) -> str:
        head = f"{self.variant},{self.seed},{self.m},{self.params}"
        vals = [self.r1_i2t, self.r5_i2t, self.r10_i2t,
                self.r1_t2i, self.r5_t2i, self.r10_t2i, self.rsum]
        return head + "," + ",".join(f"{v:.6g}" for v in vals)


@dataclass
class AblationResult:
    rows: list[AblationRow]
    csv_path: Path
    summary: dict
    summary_path: Path


def _summarize(rows: list[AblationRow], variants: list[str]) -> dict:
    per_variant: dict[str, dict] = {}
    for v in variants:
        cells = [r for r in rows if r.variant == v]
        rsums = [r.rsum for r in cells]
        r1s = [r.r1_i2t for r in cells]
        sd = stdev(rsums) if len(rsums) > 1 else 0.0
        per_variant[v] = {
            "runs": len(cells),
            "mean_rsum": mean(rsums),
            "sd_rsum": sd,
            "mean_r1_i2t": mean(r1s),
            "params": cells[0].params,
            "m": cells[0].m,
        }
    ordering = sorted(variants, key=lambda v: -per_variant[v]["mean_rsum"])
    summary = {"per_variant": per_variant, "rsum_ordering": ordering}
    if "standard" in per_variant and "no_cko" in per_variant:
        std = [r.rsum for r in rows if r.variant == "standard"]
        base = [r.rsum for r in rows if r.variant == "no_cko"]
        gaps = [a - b for a, b in zip(std, base)]
        gsd = stdev(gaps) if len(gaps) > 1 else 0.0
        half = 1.96 * gsd / (len(gaps) ** 0.5) if gaps else 0.0
        g = mean(gaps)
        summary["cko_gap_rsum"] = {
            "mean": g, "sd": gsd,
            "ci95": [g - half, g + half],
            "seeds": len(gaps),
        }
    return summary


def run_ablation(variants: list[str], seeds: list[int], synth: SynthSpec,
                 holdout: int, model_cfg: ModelConfig, train_cfg: TrainConfig,
                 out_dir: str | Path) -> AblationResult:
    """Train every (variant, seed) cell on one shared corpus split.

    The corpus is generated once from ``synth``; each cell retrains from its
    own seed. Emits ablation.csv (one row per cell) and ablation-summary.json
    with per-variant mean and sd plus the standard-vs-no_cko gap.
    """
    if not variants:
        raise ConfigError("ablation needs at least one variant")
    if not seeds:
        raise ConfigError("ablation needs at least one seed")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fs = synth_generate(synth)
    if holdout > 0:
        train_fs, eval_fs = split_pairs(fs, holdout)
    else:
        train_fs, eval_fs = fs, None

    rows: list[AblationRow] = []
    for name in variants:
        for seed in seeds:
            m_cfg, t_cfg = variant_configs(name, model_cfg, train_cfg)
            t_cfg = TrainConfig(**{**t_cfg.model_dump(), "seed": seed})
            cell_dir = out / f"{name}-seed{seed}"
            result = train(train_fs, eval_fs, m_cfg, t_cfg, cell_dir)
            _, total = result.params.param_count()
            rep = evaluate_retrieval(eval_fs if eval_fs is not None else train_fs,
                                     result.params, result.units, m_cfg)
            rows.append(AblationRow(
                variant=name, seed=seed, m=m_cfg.m, params=total,
                r1_i2t=rep.r1_i2t, r5_i2t=rep.r5_i2t, r10_i2t=rep.r10_i2t,
                r1_t2i=rep.r1_t2i, r5_t2i=rep.r5_t2i, r10_t2i=rep.r10_t2i,
                rsum=rep.rsum))

    csv_path = out / "ablation.csv"
    csv_path.write_text(
        "\n".join([CSV_HEADER] + [r.csv_row() for r in rows]) + "\n")
    summary = _summarize(rows, list(variants))
    summary_path = out / "ablation-summary.json"
    summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return AblationResult(rows=rows, csv_path=csv_path, summary=summary,
                          summary_path=summary_path)
