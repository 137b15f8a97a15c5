"""Feature corpora: the CKFT1 on-disk format, a synthetic paired generator,
and the deterministic batcher.

CKFT1 layout: ``manifest.json`` (ids, modality, shapes, byte offsets,
endianness, format version) next to ``features.bin``, a raw little-endian
float32 row-major blob. Features are float32 on disk and float64 in memory.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from .errors import IoError, ValidationError

FORMAT_VERSION = "CKFT1"


@dataclass
class FeatureItem:
    """One item's token-feature matrix plus the optional geometry sidecar."""

    id: str
    modality: str               # "visual" | "textual"
    features: np.ndarray        # tokens x dim, float64
    boxes: np.ndarray | None = None  # tokens x 5 for visual items

    @property
    def tokens(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]


@dataclass
class FeatureSet:
    """A corpus of items and the (visual id, textual id) pairing list."""

    items: list[FeatureItem] = field(default_factory=list)
    pairings: list[tuple[str, str]] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        by_id = {it.id: it for it in self.items}
        if len(by_id) != len(self.items):
            raise ValidationError("duplicate item ids")
        dims: dict[str, int] = {}
        for it in self.items:
            if it.modality not in ("visual", "textual"):
                raise ValidationError(f"unknown modality {it.modality!r}")
            if it.modality in dims and dims[it.modality] != it.dim:
                raise ValidationError(
                    f"{it.modality} dims differ: {dims[it.modality]} vs {it.dim}")
            dims[it.modality] = it.dim
            if it.boxes is not None and it.boxes.shape != (it.tokens, 5):
                raise ValidationError(
                    f"item {it.id}: boxes {it.boxes.shape} vs tokens {it.tokens}")
        for vid, tid in self.pairings:
            for ident, want in ((vid, "visual"), (tid, "textual")):
                got = by_id.get(ident)
                if got is None:
                    raise ValidationError(f"pairing references unknown id {ident!r}")
                if got.modality != want:
                    raise ValidationError(f"pairing id {ident!r} is not {want}")

    def get(self, item_id: str) -> FeatureItem:
        for it in self.items:
            if it.id == item_id:
                return it
        raise ValidationError(f"no item {item_id!r}")

    def dim(self, modality: str) -> int:
        for it in self.items:
            if it.modality == modality:
                return it.dim
        raise ValidationError(f"no {modality} items in corpus")

    def subset(self, pairings: list[tuple[str, str]]) -> "FeatureSet":
        keep = {i for pair in pairings for i in pair}
        return FeatureSet(items=[it for it in self.items if it.id in keep],
                          pairings=list(pairings))


# -- on-disk format -----------------------------------------------------------

def write_features(fs: FeatureSet, path: str | Path) -> Path:
    """Write manifest.json + features.bin under ``path`` (a directory)."""
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    blobs: list[bytes] = []
    offset = 0

    def push(arr: np.ndarray) -> int:
        nonlocal offset
        raw = np.ascontiguousarray(arr, dtype="<f4").tobytes()
        blobs.append(raw)
        start = offset
        offset += len(raw)
        return start

    for it in fs.items:
        entry = {
            "id": it.id,
            "modality": it.modality,
            "tokens": it.tokens,
            "dim": it.dim,
            "offset": push(it.features),
        }
        if it.boxes is not None:
            entry["box_offset"] = push(it.boxes)
        entries.append(entry)
    manifest = {
        "format": FORMAT_VERSION,
        "endianness": "little",
        "dtype": "f4",
        "items": entries,
        "pairings": [list(p) for p in fs.pairings],
        "blob_bytes": offset,
    }
    try:
        (out / "manifest.json").write_text(
            json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        (out / "features.bin").write_bytes(b"".join(blobs))
    except OSError as e:
        raise IoError(f"cannot write feature set to {out}: {e}") from e
    return out


def read_features(path: str | Path) -> FeatureSet:
    src = Path(path)
    try:
        manifest = json.loads((src / "manifest.json").read_text())
        blob = (src / "features.bin").read_bytes()
    except (OSError, json.JSONDecodeError) as e:
        raise IoError(f"cannot read feature set at {src}: {e}") from e
    version = manifest.get("format")
    if version != FORMAT_VERSION:
        raise IoError(f"unsupported feature format {version!r}")
    if manifest.get("blob_bytes") != len(blob):
        raise IoError(
            f"features.bin is {len(blob)} bytes, manifest says {manifest.get('blob_bytes')}")

    def pull(off: int, rows: int, cols: int) -> np.ndarray:
        nbytes = rows * cols * 4
        seg = blob[off:off + nbytes]
        if len(seg) != nbytes:
            raise IoError(f"blob segment at {off} truncated")
        return np.frombuffer(seg, dtype="<f4").reshape(rows, cols).astype(np.float64)

    items = []
    for e in manifest["items"]:
        boxes = None
        if "box_offset" in e:
            boxes = pull(e["box_offset"], e["tokens"], 5)
        items.append(FeatureItem(
            id=e["id"], modality=e["modality"],
            features=pull(e["offset"], e["tokens"], e["dim"]), boxes=boxes))
    pairings = [tuple(p) for p in manifest["pairings"]]
    return FeatureSet(items=items, pairings=pairings)


# -- synthetic corpus ----------------------------------------------------------

class SynthSpec(BaseModel):
    """Recipe for a reproducible paired corpus.

    Matched pairs share a latent draw, so cross-modal retrieval is learnable;
    noise_sigma controls how much per-token noise blurs the pairing.
    """

    model_config = ConfigDict(extra="forbid")

    pairs: int = 200
    latent_dim: int = 8
    noise_sigma: float = 0.1
    tokens: int = 8
    dim_visual: int = 16
    dim_textual: int = 16
    seed: int = 7
    with_boxes: bool = True

    @model_validator(mode="after")
    def _check(self) -> "SynthSpec":
        if self.pairs < 1 or self.latent_dim < 1 or self.tokens < 1:
            raise ValueError("pairs, latent_dim and tokens must be >= 1")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        return self


def _random_boxes(rng: np.random.Generator, tokens: int) -> np.ndarray:
    x1 = rng.uniform(0.0, 0.6, size=(tokens, 1))
    y1 = rng.uniform(0.0, 0.6, size=(tokens, 1))
    w = rng.uniform(0.0, 0.4, size=(tokens, 1))
    h = rng.uniform(0.0, 0.4, size=(tokens, 1))
    x2, y2 = x1 + w, y1 + h
    return np.hstack([x1, y1, x2, y2, w * h])


def modality_maps(spec: SynthSpec) -> tuple[np.ndarray, np.ndarray]:
    """The fixed latent -> feature maps a SynthSpec's seed determines."""
    rng = np.random.default_rng(spec.seed)
    a_v = rng.standard_normal((spec.latent_dim, spec.dim_visual)) / np.sqrt(spec.latent_dim)
    a_t = rng.standard_normal((spec.latent_dim, spec.dim_textual)) / np.sqrt(spec.latent_dim)
    return a_v, a_t


def synth_generate(spec: SynthSpec,
                   maps: tuple[np.ndarray, np.ndarray] | None = None) -> FeatureSet:
    """Draw the corpus: per pair one latent z; visual tokens A_v z + noise,
    textual tokens A_t z + noise, with fixed seeded modality maps."""
    rng = np.random.default_rng(spec.seed)
    a_v = rng.standard_normal((spec.latent_dim, spec.dim_visual)) / np.sqrt(spec.latent_dim)
    a_t = rng.standard_normal((spec.latent_dim, spec.dim_textual)) / np.sqrt(spec.latent_dim)
    if maps is not None:
        a_v, a_t = maps
    items: list[FeatureItem] = []
    pairings: list[tuple[str, str]] = []
    width = max(4, len(str(spec.pairs)))
    for p in range(spec.pairs):
        z = rng.standard_normal(spec.latent_dim)
        vis = np.tile(z @ a_v, (spec.tokens, 1)) + \
            spec.noise_sigma * rng.standard_normal((spec.tokens, spec.dim_visual))
        tex = np.tile(z @ a_t, (spec.tokens, 1)) + \
            spec.noise_sigma * rng.standard_normal((spec.tokens, spec.dim_textual))
        vid, tid = f"img{p:0{width}d}", f"txt{p:0{width}d}"
        boxes = _random_boxes(rng, spec.tokens) if spec.with_boxes else None
        items.append(FeatureItem(id=vid, modality="visual", features=vis, boxes=boxes))
        items.append(FeatureItem(id=tid, modality="textual", features=tex))
        pairings.append((vid, tid))
    return FeatureSet(items=items, pairings=pairings)


def split_pairs(fs: FeatureSet, holdout: int) -> tuple[FeatureSet, FeatureSet]:
    """Deterministic tail split: last ``holdout`` pairings become evaluation data."""
    if holdout < 0 or holdout >= len(fs.pairings):
        raise ValidationError(
            f"holdout {holdout} out of range for {len(fs.pairings)} pairs")
    train = fs.subset(fs.pairings[:len(fs.pairings) - holdout])
    held = fs.subset(fs.pairings[len(fs.pairings) - holdout:])
    return train, held


def make_batches(fs: FeatureSet, batch_size: int, seed: int,
                 epoch: int) -> list[list[tuple[str, str]]]:
    """Seeded shuffle of the pairing list, deterministic per (seed, epoch);
    the final short batch is kept."""
    if batch_size < 1:
        raise ValidationError(f"batch_size must be >= 1, got {batch_size}")
    rng = np.random.default_rng([seed, epoch])
    order = rng.permutation(len(fs.pairings))
    shuffled = [fs.pairings[i] for i in order]
    return [shuffled[i:i + batch_size] for i in range(0, len(shuffled), batch_size)]
