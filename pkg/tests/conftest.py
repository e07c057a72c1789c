import numpy as np
import pytest

from datascout.core import DatasetManifest, Item


def make_items(n, d=4, seed=0, labels=None, prefix="it", image_side=None):
    rng = np.random.default_rng(seed)
    items = []
    for i in range(n):
        image = None
        if image_side is not None:
            image = np.rint(rng.random((image_side, image_side, 1)) * 255.0) / 255.0
        items.append(
            Item(
                id=f"{prefix}{i:04d}",
                url=f"https://data.example/{prefix}{i:04d}",
                features=rng.normal(size=d),
                label=None if labels is None else labels[i % len(labels)],
                image=image,
            )
        )
    return items


def make_manifest(n=10, d=4, seed=0, labels=None, role="source", name="test", image_side=None):
    items = make_items(n, d=d, seed=seed, labels=labels, image_side=image_side)
    return DatasetManifest(
        name=name,
        feature_dim=d,
        items=tuple(items),
        role=role,
        image_shape=(image_side, 1) if image_side is not None else None,
        label_set=tuple(sorted(set(labels))) if labels else None,
    )


def blob_manifest(
    n_blobs=2, per_blob=20, d=4, separation=100.0, seed=0, name="blobs", role="source"
):
    """Well-separated Gaussian blobs; returns (manifest, true blob per id)."""
    rng = np.random.default_rng(seed)
    means = separation * np.eye(n_blobs, d)
    items = []
    truth = {}
    for b in range(n_blobs):
        for i in range(per_blob):
            item_id = f"b{b}-{i:04d}"
            items.append(
                Item(
                    id=item_id,
                    url=f"https://data.example/{item_id}",
                    features=means[b] + rng.normal(size=d),
                )
            )
            truth[item_id] = b
    manifest = DatasetManifest(name=name, feature_dim=d, items=tuple(items), role=role)
    return manifest, truth


@pytest.fixture
def tiny_manifest():
    return make_manifest(n=10, d=4, seed=3)
