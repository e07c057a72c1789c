"""Dataset registry: directory-backed persistence, offline index builds and
the online recommendation path.

Each dataset gets one subdirectory holding a canonical manifest copy, the
partition JSON, one binary blob per expert and a small record file; the
registry recovers after a crash by rescanning the store. Earlier datasets'
expert blobs are never rewritten when new datasets are added: indexing a new
dataset trains only its own experts.

The registry never dereferences item URLs; it indexes data, it does not host
it.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import threading
import time
from dataclasses import dataclass, replace
from pathlib import Path

from ..core import DatasetManifest, dumps_manifest, parse_manifest
from ..errors import (
    CorruptStoreError,
    DatascoutError,
    DuplicateNameError,
    LengthMismatchError,
    NotReadyError,
    UnknownDatasetError,
)
from ..experts import (
    KIND_ROTATION,
    KIND_TASK,
    ExpertModel,
    TrainConfig,
    deserialize_expert,
    serialize_expert,
    train_expert_ss,
    train_expert_ts,
)
from ..fastadapt import AccuracyReport
from ..gating import GatingConfig, Partition, build_partition
from ..selection import (
    DEFAULT_TEMPERATURE,
    Recommendation,
    item_probabilities,
    sample_budget,
    weights_from_scores,
)

RECORD_FORMAT_VERSION = 1

STATUS_REGISTERED = "registered"
STATUS_BUILDING = "building"
STATUS_READY = "ready"
STATUS_FAILED = "failed"


@dataclass(frozen=True)
class DatasetRecord:
    dataset_id: str
    name: str
    checksum: str
    status: str
    num_items: int
    feature_dim: int
    registered_at: float
    built_at: float | None = None
    K: int | None = None
    sizes: tuple[int, ...] | None = None
    scheme: str | None = None
    expert_kind: str | None = None
    expert_files: tuple[str, ...] = ()
    error: str | None = None

    def to_json(self) -> str:
        obj = {
            "version": RECORD_FORMAT_VERSION,
            "dataset_id": self.dataset_id,
            "name": self.name,
            "checksum": self.checksum,
            "status": self.status,
            "num_items": self.num_items,
            "feature_dim": self.feature_dim,
            "registered_at": self.registered_at,
            "built_at": self.built_at,
            "K": self.K,
            "sizes": list(self.sizes) if self.sizes is not None else None,
            "scheme": self.scheme,
            "expert_kind": self.expert_kind,
            "expert_files": list(self.expert_files),
            "error": self.error,
        }
        return json.dumps(obj, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "DatasetRecord":
        obj = json.loads(text)
        if obj.get("version") != RECORD_FORMAT_VERSION:
            raise CorruptStoreError(f"unsupported record version {obj.get('version')}")
        return DatasetRecord(
            dataset_id=str(obj["dataset_id"]),
            name=str(obj["name"]),
            checksum=str(obj["checksum"]),
            status=str(obj["status"]),
            num_items=int(obj["num_items"]),
            feature_dim=int(obj["feature_dim"]),
            registered_at=float(obj["registered_at"]),
            built_at=obj["built_at"],
            K=obj["K"],
            sizes=tuple(obj["sizes"]) if obj["sizes"] is not None else None,
            scheme=obj["scheme"],
            expert_kind=obj["expert_kind"],
            expert_files=tuple(obj["expert_files"]),
            error=obj["error"],
        )


@dataclass(frozen=True)
class BundleEntry:
    dataset_id: str
    subset_index: int
    global_index: int
    size: int
    scheme: str
    kind: str
    sha256: str


@dataclass(frozen=True)
class ExpertBundle:
    """Ordered experts across one or more ready datasets, with the subset
    sizes the selection formula divides by."""

    dataset_ref: str
    entries: tuple[BundleEntry, ...]
    blobs: tuple[bytes, ...]

    @property
    def total_k(self) -> int:
        return len(self.entries)

    def models(self) -> list[ExpertModel]:
        return [deserialize_expert(b) for b in self.blobs]

    def manifest_obj(self) -> dict:
        return {
            "dataset_ref": self.dataset_ref,
            "total_K": self.total_k,
            "experts": [
                {
                    "dataset_id": e.dataset_id,
                    "subset_index": e.subset_index,
                    "global_index": e.global_index,
                    "size": e.size,
                    "scheme": e.scheme,
                    "kind": e.kind,
                    "sha256": e.sha256,
                }
                for e in self.entries
            ],
        }


def _slug(name: str) -> str:
    s = re.sub(r"[^a-z0-9_-]+", "-", name.lower()).strip("-")
    if not s:
        raise ValueError(f"cannot derive a dataset id from name {name!r}")
    return s


def _write_atomic(path: Path, data: bytes) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


class Registry:
    """Directory-store registry; one instance owns one store root.

    Reads over ready records are lock-free on immutable snapshots; record
    mutations are serialized through a single writer lock; each dataset has an
    exclusive build lock so at most one build runs per record.
    """

    def __init__(self, root) -> None:
        self.root = Path(root)
        (self.root / "datasets").mkdir(parents=True, exist_ok=True)
        self._mutex = threading.Lock()
        self._build_locks: dict[str, threading.Lock] = {}
        self._records: dict[str, DatasetRecord] = {}
        self._quarantined: dict[str, str] = {}
        self.recover()

    # -- persistence ------------------------------------------------------

    def _dataset_dir(self, dataset_id: str) -> Path:
        return self.root / "datasets" / dataset_id

    def _persist_record(self, rec: DatasetRecord) -> None:
        _write_atomic(self._dataset_dir(rec.dataset_id) / "record.json", rec.to_json().encode())

    def recover(self) -> dict[str, str]:
        """Rescan the store; quarantine records that fail integrity checks.

        Returns {dataset_id: reason} for everything quarantined.
        """
        records: dict[str, DatasetRecord] = {}
        quarantined: dict[str, str] = {}
        for entry in sorted((self.root / "datasets").iterdir()):
            if not entry.is_dir():
                continue
            dataset_id = entry.name
            try:
                rec = DatasetRecord.from_json((entry / "record.json").read_text())
                manifest_bytes = (entry / "manifest.jsonl").read_bytes()
                digest = hashlib.sha256(manifest_bytes).hexdigest()
                if digest != rec.checksum:
                    raise CorruptStoreError(
                        f"manifest checksum {digest[:12]} != recorded {rec.checksum[:12]}"
                    )
                if rec.status == STATUS_READY:
                    if rec.K is None or len(rec.expert_files) != rec.K:
                        raise CorruptStoreError("ready record without a full expert set")
                    for fname in rec.expert_files:
                        if not (entry / fname).is_file():
                            raise CorruptStoreError(f"missing expert blob {fname}")
                    Partition.from_json((entry / "partition.json").read_text())
                if rec.status == STATUS_BUILDING:
                    # interrupted build: the index is unusable, the manifest is fine
                    rec = replace(rec, status=STATUS_FAILED, error="interrupted by restart")
                    _write_atomic(entry / "record.json", rec.to_json().encode())
                records[dataset_id] = rec
            except (OSError, ValueError, KeyError, json.JSONDecodeError, CorruptStoreError) as exc:
                quarantined[dataset_id] = str(exc)
        with self._mutex:
            self._records = records
            self._quarantined = quarantined
        return dict(quarantined)

    # -- registration -----------------------------------------------------

    def register_dataset(self, manifest: DatasetManifest) -> str:
        """Persist a source manifest; idempotent for an identical checksum."""
        if manifest.role != "source":
            raise ValueError(f"only source manifests can be registered, got role {manifest.role!r}")
        dataset_id = _slug(manifest.name)
        text = dumps_manifest(manifest)
        checksum = hashlib.sha256(text.encode("utf-8")).hexdigest()
        with self._mutex:
            if dataset_id in self._quarantined:
                raise CorruptStoreError(
                    f"dataset {dataset_id!r} is quarantined: {self._quarantined[dataset_id]}"
                )
            existing = self._records.get(dataset_id)
            if existing is not None:
                if existing.checksum == checksum:
                    return dataset_id
                raise DuplicateNameError(
                    f"dataset {dataset_id!r} already registered with different content"
                )
            ddir = self._dataset_dir(dataset_id)
            ddir.mkdir(parents=True, exist_ok=True)
            _write_atomic(ddir / "manifest.jsonl", text.encode("utf-8"))
            rec = DatasetRecord(
                dataset_id=dataset_id,
                name=manifest.name,
                checksum=checksum,
                status=STATUS_REGISTERED,
                num_items=len(manifest.items),
                feature_dim=manifest.feature_dim,
                registered_at=time.time(),
            )
            self._persist_record(rec)
            self._records[dataset_id] = rec
        return dataset_id

    # -- lookup -----------------------------------------------------------

    def list_records(self) -> list[DatasetRecord]:
        with self._mutex:
            return sorted(self._records.values(), key=lambda r: r.dataset_id)

    def get_record(self, dataset_id: str) -> DatasetRecord:
        with self._mutex:
            if dataset_id in self._quarantined:
                raise CorruptStoreError(
                    f"dataset {dataset_id!r} is quarantined: {self._quarantined[dataset_id]}"
                )
            rec = self._records.get(dataset_id)
        if rec is None:
            raise UnknownDatasetError(f"no dataset {dataset_id!r}")
        return rec

    def load_manifest(self, dataset_id: str) -> DatasetManifest:
        """Load the stored manifest copy, verifying its checksum first."""
        rec = self.get_record(dataset_id)
        raw = (self._dataset_dir(dataset_id) / "manifest.jsonl").read_bytes()
        digest = hashlib.sha256(raw).hexdigest()
        if digest != rec.checksum:
            raise CorruptStoreError(
                f"dataset {dataset_id!r}: manifest on disk no longer matches its checksum"
            )
        return parse_manifest(raw.decode("utf-8"))

    def load_partition(self, dataset_id: str) -> Partition:
        rec = self.get_record(dataset_id)
        if rec.status != STATUS_READY:
            raise NotReadyError(f"dataset {dataset_id!r} has status {rec.status!r}")
        return Partition.from_json((self._dataset_dir(dataset_id) / "partition.json").read_text())

    # -- index building ---------------------------------------------------

    def _build_lock(self, dataset_id: str) -> threading.Lock:
        with self._mutex:
            return self._build_locks.setdefault(dataset_id, threading.Lock())

    def build_index(
        self,
        dataset_id: str,
        gating_cfg: GatingConfig,
        train_cfg: TrainConfig | None = None,
        expert_kind: str = KIND_ROTATION,
    ) -> DatasetRecord:
        """Partition the dataset and train one expert per subset.

        No-op when the record is already ready. Never touches any other
        dataset's files. On failure the record is marked failed (with the
        reason) and may be rebuilt.
        """
        rec = self.get_record(dataset_id)
        if rec.status == STATUS_READY:
            return rec
        train_cfg = train_cfg or TrainConfig()
        lock = self._build_lock(dataset_id)
        if not lock.acquire(blocking=False):
            raise DatascoutError(f"a build is already running for {dataset_id!r}")
        try:
            self._set_status(dataset_id, STATUS_BUILDING, error=None)
            manifest = self.load_manifest(dataset_id)
            partition = build_partition(manifest, gating_cfg)
            by_id = manifest.by_id()
            ddir = self._dataset_dir(dataset_id)
            expert_files = []
            for i in range(partition.K):
                subset = [by_id[item_id] for item_id in partition.members(i)]
                cfg_i = replace(train_cfg, seed=train_cfg.seed + i)
                if expert_kind == KIND_ROTATION:
                    model = train_expert_ss(subset, cfg_i, subset_index=i)
                elif expert_kind == KIND_TASK:
                    model = train_expert_ts(subset, cfg_i, subset_index=i)
                else:
                    raise ValueError(f"unknown expert kind {expert_kind!r}")
                fname = f"expert_{i:05d}.bin"
                _write_atomic(ddir / fname, serialize_expert(model))
                expert_files.append(fname)
            _write_atomic(ddir / "partition.json", partition.to_json().encode())
            with self._mutex:
                rec = replace(
                    self._records[dataset_id],
                    status=STATUS_READY,
                    built_at=time.time(),
                    K=partition.K,
                    sizes=partition.sizes,
                    scheme=partition.scheme,
                    expert_kind=expert_kind,
                    expert_files=tuple(expert_files),
                    error=None,
                )
                self._persist_record(rec)
                self._records[dataset_id] = rec
            return rec
        except Exception as exc:
            self._set_status(dataset_id, STATUS_FAILED, error=str(exc))
            raise
        finally:
            lock.release()

    def build_async(self, dataset_id: str, gating_cfg, train_cfg=None, expert_kind=KIND_ROTATION):
        """Run build_index on a background thread; poll status to observe it."""
        thread = threading.Thread(
            target=self._swallow_build_errors,
            args=(dataset_id, gating_cfg, train_cfg, expert_kind),
            daemon=True,
        )
        thread.start()
        return thread

    def _swallow_build_errors(self, dataset_id, gating_cfg, train_cfg, expert_kind) -> None:
        try:
            self.build_index(dataset_id, gating_cfg, train_cfg, expert_kind)
        except Exception:
            pass  # failure is recorded on the dataset record

    def _set_status(self, dataset_id: str, status: str, error: str | None) -> None:
        with self._mutex:
            rec = replace(self._records[dataset_id], status=status, error=error)
            self._persist_record(rec)
            self._records[dataset_id] = rec

    # -- online serving ---------------------------------------------------

    def get_experts(self, dataset_ids: list[str]) -> ExpertBundle:
        """Bundle the experts of the requested ready datasets, in request
        order, with globally consistent indices."""
        if not dataset_ids:
            raise UnknownDatasetError("no dataset ids given")
        entries: list[BundleEntry] = []
        blobs: list[bytes] = []
        g = 0
        for dataset_id in dataset_ids:
            rec = self.get_record(dataset_id)
            if rec.status != STATUS_READY:
                raise NotReadyError(f"dataset {dataset_id!r} has status {rec.status!r}")
            ddir = self._dataset_dir(dataset_id)
            for i, fname in enumerate(rec.expert_files):
                blob = (ddir / fname).read_bytes()
                entries.append(
                    BundleEntry(
                        dataset_id=dataset_id,
                        subset_index=i,
                        global_index=g,
                        size=rec.sizes[i],
                        scheme=rec.scheme,
                        kind=rec.expert_kind,
                        sha256=hashlib.sha256(blob).hexdigest(),
                    )
                )
                blobs.append(blob)
                g += 1
        return ExpertBundle(
            dataset_ref=",".join(dataset_ids), entries=tuple(entries), blobs=tuple(blobs)
        )

    def expert_blob(self, dataset_id: str, subset_index: int) -> bytes:
        rec = self.get_record(dataset_id)
        if rec.status != STATUS_READY:
            raise NotReadyError(f"dataset {dataset_id!r} has status {rec.status!r}")
        if not (0 <= subset_index < len(rec.expert_files)):
            raise UnknownDatasetError(f"dataset {dataset_id!r} has no expert {subset_index}")
        return (self._dataset_dir(dataset_id) / rec.expert_files[subset_index]).read_bytes()

    def recommend(
        self,
        report: AccuracyReport,
        budget: int,
        temperature: float = DEFAULT_TEMPERATURE,
        seed: int = 0,
    ) -> Recommendation:
        """Full selection pipeline over the datasets named in the report.

        Stateless: writes nothing; identical (report, budget, temperature,
        seed) yield identical recommendations. The response carries item ids
        and URLs only, never features.
        """
        dataset_ids = [d for d in report.dataset_ref.split(",") if d]
        if not dataset_ids:
            raise UnknownDatasetError(f"report has no usable dataset_ref {report.dataset_ref!r}")
        partitions = [self.load_partition(d) for d in dataset_ids]
        total_k = sum(p.K for p in partitions)
        if len(report.z) != total_k:
            raise LengthMismatchError(
                f"report has {len(report.z)} accuracies, bundle has K={total_k}"
            )
        weights = weights_from_scores(report.z, temperature)
        multi = len(dataset_ids) > 1
        pi: dict[str, float] = {}
        url_map: dict[str, str] = {}
        summary: list[dict] = []
        offset = 0
        for dataset_id, partition in zip(dataset_ids, partitions):
            manifest = self.load_manifest(dataset_id)
            urls = {it.id: it.url for it in manifest.items}
            for item_id, g_local in partition.assignment.items():
                g = offset + g_local
                key = f"{dataset_id}/{item_id}" if multi else item_id
                pi[key] = weights.w[g] / partition.sizes[g_local]
                url_map[key] = urls[item_id]
            for i in range(partition.K):
                summary.append(
                    {
                        "expert": offset + i,
                        "dataset_id": dataset_id,
                        "w": float(weights.w[offset + i]),
                        "size": int(partition.sizes[i]),
                    }
                )
            offset += partition.K
        return sample_budget(
            pi,
            budget,
            seed,
            dataset_ref=report.dataset_ref,
            url_map=url_map,
            pi_summary=tuple(summary),
        )
