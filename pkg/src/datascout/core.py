"""Domain types, manifest ingestion and deterministic train/validation splits.

A dataset lives in a JSON-lines manifest: the first line is a header object
under the key ``meta`` declaring ``name``, ``feature_dim``, optional
``image_shape`` ``[H, C]``, optional ``label_set`` and ``role``; every further
line is one item with required ``id``, ``url``, ``features`` and optional
``label`` and ``image`` (base64 of H*H*C row-major 8-bit values).

All types are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import base64
import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatchError,
    DuplicateIdError,
    ManifestParseError,
    TooFewItemsError,
)

ROLES = ("source", "target")


@dataclass(frozen=True, eq=False)
class Item:
    """One datum: opaque locator plus a feature vector and optional extras.

    ``url`` is never dereferenced by this package; it is carried through to
    recommendations verbatim. ``image`` (when present) is an H x H x C float
    array with values in [0, 1].
    """

    id: str
    url: str
    features: np.ndarray
    label: str | None = None
    image: np.ndarray | None = None

    def equals(self, other: "Item") -> bool:
        if self.id != other.id or self.url != other.url or self.label != other.label:
            return False
        if not np.array_equal(self.features, other.features):
            return False
        if (self.image is None) != (other.image is None):
            return False
        if self.image is not None and not np.array_equal(self.image, other.image):
            return False
        return True


@dataclass(frozen=True, eq=False)
class DatasetManifest:
    """A validated, immutable collection of items with declared shapes."""

    name: str
    feature_dim: int
    items: tuple[Item, ...]
    role: str = "source"
    image_shape: tuple[int, int] | None = None  # (H, C)
    label_set: tuple[str, ...] | None = None

    def __len__(self) -> int:
        return len(self.items)

    def item_ids(self) -> list[str]:
        return [it.id for it in self.items]

    def by_id(self) -> dict[str, Item]:
        return {it.id: it for it in self.items}

    def label_indices(self) -> dict[str, int]:
        """Map label string -> dense integer index, in manifest order."""
        if self.label_set is not None:
            return {lab: i for i, lab in enumerate(self.label_set)}
        seen: dict[str, int] = {}
        for it in self.items:
            if it.label is not None and it.label not in seen:
                seen[it.label] = len(seen)
        return seen

    def feature_matrix(self) -> np.ndarray:
        return np.stack([it.features for it in self.items])

    def equals(self, other: "DatasetManifest") -> bool:
        return (
            self.name == other.name
            and self.feature_dim == other.feature_dim
            and self.role == other.role
            and self.image_shape == other.image_shape
            and self.label_set == other.label_set
            and len(self.items) == len(other.items)
            and all(a.equals(b) for a, b in zip(self.items, other.items))
        )


@dataclass(frozen=True)
class SplitSpec:
    """Deterministic train/validation split parameters."""

    train_fraction: float = 0.8
    seed: int = 0

    def __post_init__(self) -> None:
        if not (0.0 < self.train_fraction < 1.0):
            raise ValueError(f"train_fraction must be in (0,1), got {self.train_fraction}")


def _decode_image(b64: str, image_shape: tuple[int, int], item_id: str) -> np.ndarray:
    h, c = image_shape
    try:
        raw = base64.b64decode(b64, validate=True)
    except Exception as exc:
        raise ManifestParseError(f"item {item_id!r}: image is not valid base64") from exc
    if len(raw) != h * h * c:
        raise DimensionMismatchError(
            f"item {item_id!r}: image has {len(raw)} bytes, expected {h}*{h}*{c}={h * h * c}"
        )
    arr = np.frombuffer(raw, dtype=np.uint8).astype(np.float64) / 255.0
    return arr.reshape(h, h, c)


def _encode_image(image: np.ndarray) -> str:
    raw = np.rint(np.asarray(image, dtype=np.float64) * 255.0).astype(np.uint8).tobytes()
    return base64.b64encode(raw).decode("ascii")


def parse_manifest(text: str) -> DatasetManifest:
    """Parse and validate a JSON-lines manifest from a string.

    Raises ManifestParseError for malformed records, DimensionMismatchError
    (naming the offending item id) for shape violations and DuplicateIdError
    for repeated ids.
    """
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ManifestParseError("empty manifest")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise ManifestParseError(f"header line is not valid JSON: {exc}") from exc
    if not isinstance(header, dict) or "meta" not in header:
        raise ManifestParseError("first line must be an object with key 'meta'")
    meta = header["meta"]
    try:
        name = str(meta["name"])
        feature_dim = int(meta["feature_dim"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ManifestParseError(f"meta must declare name and feature_dim: {exc}") from exc
    role = str(meta.get("role", "source"))
    if role not in ROLES:
        raise ManifestParseError(f"role must be one of {ROLES}, got {role!r}")
    image_shape = None
    if meta.get("image_shape") is not None:
        try:
            h, c = meta["image_shape"]
            image_shape = (int(h), int(c))
        except (TypeError, ValueError) as exc:
            raise ManifestParseError("image_shape must be [H, C]") from exc
    label_set = None
    if meta.get("label_set") is not None:
        label_set = tuple(str(x) for x in meta["label_set"])
        if len(set(label_set)) != len(label_set):
            raise ManifestParseError("label_set contains duplicates")

    items: list[Item] = []
    seen_ids: set[str] = set()
    for lineno, line in enumerate(lines[1:], start=2):
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ManifestParseError(f"line {lineno}: not valid JSON: {exc}") from exc
        if not isinstance(rec, dict):
            raise ManifestParseError(f"line {lineno}: expected an object")
        try:
            item_id = str(rec["id"])
            url = str(rec["url"])
            features = rec["features"]
        except KeyError as exc:
            raise ManifestParseError(f"line {lineno}: missing required key {exc}") from exc
        if item_id in seen_ids:
            raise DuplicateIdError(f"duplicate item id {item_id!r}")
        seen_ids.add(item_id)
        feats = np.asarray(features, dtype=np.float64)
        if feats.ndim != 1 or feats.shape[0] != feature_dim:
            raise DimensionMismatchError(
                f"item {item_id!r}: {feats.size} features, expected {feature_dim}"
            )
        if not np.all(np.isfinite(feats)):
            raise ManifestParseError(f"item {item_id!r}: non-finite feature value")
        label = rec.get("label")
        if label is not None:
            label = str(label)
            if label_set is not None and label not in label_set:
                raise ManifestParseError(
                    f"item {item_id!r}: label {label!r} not in declared label_set"
                )
        image = None
        if rec.get("image") is not None:
            if image_shape is None:
                raise ManifestParseError(
                    f"item {item_id!r}: has an image but meta declares no image_shape"
                )
            image = _decode_image(rec["image"], image_shape, item_id)
        items.append(Item(id=item_id, url=url, features=feats, label=label, image=image))

    if not items:
        raise ManifestParseError("manifest declares no items")
    return DatasetManifest(
        name=name,
        feature_dim=feature_dim,
        items=tuple(items),
        role=role,
        image_shape=image_shape,
        label_set=label_set,
    )


def load_manifest(path) -> DatasetManifest:
    """Load and validate a JSON-lines manifest file."""
    with open(path, "r", encoding="utf-8") as fh:
        return parse_manifest(fh.read())


def dumps_manifest(manifest: DatasetManifest) -> str:
    """Serialize a manifest to canonical JSON-lines text.

    The output is deterministic (sorted keys, repr-exact floats), so the
    checksum of the text identifies the manifest content.
    """
    meta: dict = {"name": manifest.name, "feature_dim": manifest.feature_dim, "role": manifest.role}
    if manifest.image_shape is not None:
        meta["image_shape"] = list(manifest.image_shape)
    if manifest.label_set is not None:
        meta["label_set"] = list(manifest.label_set)
    out = [json.dumps({"meta": meta}, sort_keys=True)]
    for it in manifest.items:
        rec: dict = {"id": it.id, "url": it.url, "features": [float(x) for x in it.features]}
        if it.label is not None:
            rec["label"] = it.label
        if it.image is not None:
            rec["image"] = _encode_image(it.image)
        out.append(json.dumps(rec, sort_keys=True))
    return "\n".join(out) + "\n"


def save_manifest(manifest: DatasetManifest, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_manifest(manifest))


def manifest_checksum(manifest: DatasetManifest) -> str:
    return hashlib.sha256(dumps_manifest(manifest).encode("utf-8")).hexdigest()


def _id_rank(item_id: str, seed: int) -> bytes:
    key = seed.to_bytes(8, "little", signed=True)
    return hashlib.blake2b(item_id.encode("utf-8"), key=key, digest_size=16).digest()


def split(manifest: DatasetManifest, spec: SplitSpec) -> tuple[list[str], list[str]]:
    """Deterministic disjoint train/validation split of item ids.

    Items are ranked by a seeded hash of their id, so the assignment is a pure
    function of the id multiset and the spec: permuting the manifest does not
    move any item across the split. |train| = round(train_fraction * N),
    clamped so both sides keep at least one item.
    """
    n = len(manifest.items)
    if n < 2:
        raise TooFewItemsError(f"need at least 2 items to split, have {n}")
    n_train = int(math.floor(spec.train_fraction * n + 0.5))
    n_train = max(1, min(n - 1, n_train))
    ranked = sorted(manifest.item_ids(), key=lambda i: (_id_rank(i, spec.seed), i))
    return ranked[:n_train], ranked[n_train:]
