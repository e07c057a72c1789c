"""Synthetic fixtures with known ground truth.

The standard fixture is five well-separated Gaussian blobs in a 16-d feature
space (1000 items each). Every item also carries an 8x8 image built from a
blob-specific base pattern plus pixel noise, so rotation experts trained on
one blob recognize that blob's orientations and not the others'. Labels are
binary per blob (sign of a projection onto a blob-specific direction, with
label noise), which makes extra same-blob data genuinely useful to a target
classifier while far-blob data is mostly irrelevant.

The target is drawn from one designated blob; that blob is the ground-truth
answer every lab experiment is checked against.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..core import DatasetManifest, Item, load_manifest, save_manifest

FEATURE_DIM = 16
IMAGE_SIDE = 8
N_BLOBS = 5
ITEMS_PER_BLOB = 1000
TARGET_SIZE = 100
TARGET_VAL_SIZE = 1000
BLOB_SEPARATION = 10.0  # in units of the within-blob sigma (1.0)
IMAGE_NOISE = 0.08
LABEL_NOISE = 0.15
MATCHING_BLOB = 2


@dataclass(frozen=True)
class Fixture:
    source: DatasetManifest
    target: DatasetManifest
    target_val: DatasetManifest
    blob_of_item: dict[str, int]  # source item id -> true blob
    matching_blob: int
    seed: int


def _blob_directions(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    # orthonormal directions so blob means are mutually distant
    q, _ = np.linalg.qr(rng.normal(size=(d, d)))
    return q[:, :n].T


def _make_items(
    prefix: str,
    count: int,
    blob: int,
    means: np.ndarray,
    patterns: np.ndarray,
    label_dirs: np.ndarray,
    rng: np.random.Generator,
) -> tuple[list[Item], dict[str, int]]:
    items: list[Item] = []
    blob_of: dict[str, int] = {}
    for n in range(count):
        item_id = f"{prefix}-{n:05d}"
        feats = means[blob] + rng.normal(size=FEATURE_DIM)
        raw = patterns[blob] + IMAGE_NOISE * rng.normal(size=(IMAGE_SIDE, IMAGE_SIDE))
        image = np.clip(raw, 0.0, 1.0)[:, :, None]
        # 8-bit quantization now, so the in-memory value equals the stored one
        image = np.rint(image * 255.0) / 255.0
        side = float((feats - means[blob]) @ label_dirs[blob])
        label = "pos" if side > 0 else "neg"
        if rng.random() < LABEL_NOISE:
            label = "neg" if label == "pos" else "pos"
        items.append(
            Item(
                id=item_id,
                url=f"https://data.example/{item_id}",
                features=feats,
                label=label,
                image=image,
            )
        )
        blob_of[item_id] = blob
    return items, blob_of


def standard_fixture(
    seed: int = 0,
    items_per_blob: int = ITEMS_PER_BLOB,
    target_size: int = TARGET_SIZE,
    target_val_size: int = TARGET_VAL_SIZE,
) -> Fixture:
    """The five-blob fixture with the target drawn from MATCHING_BLOB.

    Defaults give the standard fixture; smaller sizes keep the same structure
    for quick experiments.
    """
    rng = np.random.default_rng(seed)
    dirs = _blob_directions(rng, N_BLOBS, FEATURE_DIM)
    means = BLOB_SEPARATION * dirs
    patterns = rng.random((N_BLOBS, IMAGE_SIDE, IMAGE_SIDE))
    label_dirs = _blob_directions(rng, N_BLOBS, FEATURE_DIM)

    source_items: list[Item] = []
    blob_of: dict[str, int] = {}
    for blob in range(N_BLOBS):
        items, bmap = _make_items(
            f"s{blob}", items_per_blob, blob, means, patterns, label_dirs, rng
        )
        source_items.extend(items)
        blob_of.update(bmap)

    target_items, _ = _make_items(
        "t", target_size, MATCHING_BLOB, means, patterns, label_dirs, rng
    )
    val_items, _ = _make_items(
        "v", target_val_size, MATCHING_BLOB, means, patterns, label_dirs, rng
    )

    common = dict(
        feature_dim=FEATURE_DIM,
        image_shape=(IMAGE_SIDE, 1),
        label_set=("neg", "pos"),
    )
    return Fixture(
        source=DatasetManifest(
            name="lab-source", items=tuple(source_items), role="source", **common
        ),
        target=DatasetManifest(
            name="lab-target", items=tuple(target_items), role="target", **common
        ),
        target_val=DatasetManifest(
            name="lab-target-val", items=tuple(val_items), role="target", **common
        ),
        blob_of_item=blob_of,
        matching_blob=MATCHING_BLOB,
        seed=seed,
    )


def small_source(name: str, n_items: int, n_blobs: int = 2, seed: int = 0) -> DatasetManifest:
    """A lighter source manifest for timing and isolation experiments."""
    rng = np.random.default_rng(seed)
    dirs = _blob_directions(rng, n_blobs, FEATURE_DIM)
    means = BLOB_SEPARATION * dirs
    patterns = rng.random((n_blobs, IMAGE_SIDE, IMAGE_SIDE))
    label_dirs = _blob_directions(rng, n_blobs, FEATURE_DIM)
    items: list[Item] = []
    per_blob = n_items // n_blobs
    for blob in range(n_blobs):
        count = per_blob if blob < n_blobs - 1 else n_items - per_blob * (n_blobs - 1)
        blob_items, _ = _make_items(
            f"{name}-b{blob}", count, blob, means, patterns, label_dirs, rng
        )
        items.extend(blob_items)
    return DatasetManifest(
        name=name,
        feature_dim=FEATURE_DIM,
        image_shape=(IMAGE_SIDE, 1),
        label_set=("neg", "pos"),
        items=tuple(items),
        role="source",
    )


def write_fixture(fixture: Fixture, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_manifest(fixture.source, out / "source.jsonl")
    save_manifest(fixture.target, out / "target.jsonl")
    save_manifest(fixture.target_val, out / "target_val.jsonl")
    (out / "fixture.json").write_text(
        json.dumps(
            {
                "seed": fixture.seed,
                "matching_blob": fixture.matching_blob,
                "blob_of_item": fixture.blob_of_item,
            },
            sort_keys=True,
        )
    )


def read_fixture(fixture_dir) -> Fixture:
    d = Path(fixture_dir)
    meta = json.loads((d / "fixture.json").read_text())
    return Fixture(
        source=load_manifest(d / "source.jsonl"),
        target=load_manifest(d / "target.jsonl"),
        target_val=load_manifest(d / "target_val.jsonl"),
        blob_of_item={str(k): int(v) for k, v in meta["blob_of_item"].items()},
        matching_blob=int(meta["matching_blob"]),
        seed=int(meta["seed"]),
    )
