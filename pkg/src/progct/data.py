"""Dataset ingestion: 16-bit PNG slices, paired patch extraction, splits.

Slices are stored as 16-bit grayscale PNG with raw = HU + 1024. Patches
are cut at identical coordinates of the registered LDCT/NDCT slices and
windowed to [0,1]. Splits operate on source groups (one phantom or
patient per group), never on individual slices.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .ctsim import hu_window

MANIFEST_VERSION = 1
MANIFEST_NAME = "manifest.json"
HU_OFFSET = 1024


class DataError(ValueError):
    pass


class MissingFileError(DataError):
    pass


class DimensionMismatchError(DataError):
    pass


class BitDepthError(DataError):
    pass


class ManifestError(DataError):
    pass


@dataclass
class SliceRecord:
    ldct: str
    ndct: str
    region: str
    seed: int


@dataclass
class DatasetManifest:
    slices: list[SliceRecord]
    version: int = MANIFEST_VERSION
    params: dict = field(default_factory=dict)

    def groups(self) -> list[int]:
        seen = dict.fromkeys(r.seed for r in self.slices)
        return list(seen)


@dataclass
class PatchSet:
    ldct: np.ndarray       # [N, size, size] float32 in [0,1]
    ndct: np.ndarray
    slice_index: np.ndarray
    offsets: np.ndarray    # [N, 2] top-left (row, col)

    def __len__(self) -> int:
        return self.ldct.shape[0]


def write_hu_png(path, img_hu: np.ndarray):
    raw = np.clip(np.rint(np.asarray(img_hu, dtype=np.float64) + HU_OFFSET), 0, 65535)
    Image.fromarray(raw.astype(np.uint16)).save(path)


def read_hu_png(path) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise MissingFileError(f"slice file not found: {path}")
    img = Image.open(path)
    if img.mode not in ("I;16", "I;16B", "I"):
        raise BitDepthError(f"{path}: expected 16-bit grayscale PNG, got mode {img.mode!r}")
    arr = np.asarray(img)
    return arr.astype(np.float64) - HU_OFFSET


def save_manifest(manifest: DatasetManifest, directory):
    doc = {
        "version": manifest.version,
        "params": manifest.params,
        "slices": [vars(r) for r in manifest.slices],
    }
    with open(Path(directory) / MANIFEST_NAME, "w") as f:
        json.dump(doc, f, indent=2)


def load_manifest(directory) -> DatasetManifest:
    path = Path(directory) / MANIFEST_NAME
    if not path.exists():
        raise MissingFileError(f"manifest not found: {path}")
    with open(path) as f:
        doc = json.load(f)
    if doc.get("version") != MANIFEST_VERSION:
        raise ManifestError(f"unsupported manifest version {doc.get('version')}")
    slices = [SliceRecord(**r) for r in doc["slices"]]
    return DatasetManifest(slices=slices, version=doc["version"], params=doc.get("params", {}))


def load_slice_pair(record: SliceRecord, root) -> tuple[np.ndarray, np.ndarray]:
    """Decode one registered (LDCT, NDCT) pair as HU arrays."""
    root = Path(root)
    ld = read_hu_png(root / record.ldct)
    nd = read_hu_png(root / record.ndct)
    if ld.shape != nd.shape:
        raise DimensionMismatchError(
            f"pair dimensions differ: {record.ldct} {ld.shape} vs {record.ndct} {nd.shape}")
    return ld, nd


def load_pairs(manifest: DatasetManifest, root) -> list[tuple[np.ndarray, np.ndarray]]:
    return [load_slice_pair(r, root) for r in manifest.slices]


def extract_patches(pairs, window: str, count: int, size: int = 64, seed: int = 0) -> PatchSet:
    """Random paired patches, windowed to [0,1]; deterministic per seed.

    Slices are chosen uniformly, offsets uniformly within bounds, with
    replacement.
    """
    if not pairs:
        raise DataError("no slice pairs to sample from")
    windowed = []
    for ld, nd in pairs:
        if min(ld.shape) < size:
            raise DataError(f"slice {ld.shape} smaller than patch size {size}")
        windowed.append((hu_window(ld, window).astype(np.float32),
                         hu_window(nd, window).astype(np.float32)))
    rng = np.random.default_rng(seed)
    out_ld = np.empty((count, size, size), dtype=np.float32)
    out_nd = np.empty((count, size, size), dtype=np.float32)
    idx = rng.integers(0, len(windowed), size=count)
    offsets = np.empty((count, 2), dtype=np.int64)
    for k in range(count):
        ld, nd = windowed[idx[k]]
        r = rng.integers(0, ld.shape[0] - size + 1)
        c = rng.integers(0, ld.shape[1] - size + 1)
        offsets[k] = (r, c)
        out_ld[k] = ld[r:r + size, c:c + size]
        out_nd[k] = nd[r:r + size, c:c + size]
    return PatchSet(ldct=out_ld, ndct=out_nd, slice_index=idx, offsets=offsets)


def split(manifest: DatasetManifest, train_fraction: float, seed: int = 0):
    """Partition at the source-group level; deterministic per seed."""
    groups = manifest.groups()
    if len(groups) < 2:
        raise DataError(f"need at least 2 source groups to split, got {len(groups)}")
    rng = np.random.default_rng(seed)
    order = [groups[i] for i in rng.permutation(len(groups))]
    n_train = int(round(train_fraction * len(groups)))
    n_train = min(max(n_train, 1), len(groups) - 1)
    train_groups = set(order[:n_train])
    tr = [r for r in manifest.slices if r.seed in train_groups]
    va = [r for r in manifest.slices if r.seed not in train_groups]
    mk = lambda s: DatasetManifest(slices=s, version=manifest.version, params=dict(manifest.params))
    return mk(tr), mk(va)
