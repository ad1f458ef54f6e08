"""Full-slice progressive inference.

The generator was trained on 64x64 patches, so slices are processed as
overlapping 64x64 tiles blended with linear ramps in the 8-pixel
overlaps (whole-image forward when the slice is smaller than a tile).
Each depth is computed once from the previous depth's full slice, so
cost is linear in depth.
"""
from __future__ import annotations

import uuid
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import nets
from .checkpoint import Checkpoint
from .ctsim import hu_window
from .perf import tune_malloc

TILE = 64
OVERLAP = 8
DEPTH_CAP = 8


class DepthCapError(ValueError):
    pass


@dataclass
class DenoiseSequence:
    sequence_id: str
    source_id: str
    images: list[np.ndarray]        # depth-indexed, values in [0,1]
    checkpoint_id: str
    window: str
    max_depth: int
    trained_depth: int
    extrapolated_depths: list[int] = field(default_factory=list)


def _tile_offsets(extent: int, tile: int, stride: int) -> list[int]:
    offs = list(range(0, max(extent - tile, 0) + 1, stride))
    if offs[-1] != extent - tile:
        offs.append(extent - tile)
    return offs


def _ramp_weight(tile: int, overlap: int) -> np.ndarray:
    w = np.ones(tile, dtype=np.float32)
    edge = (np.arange(overlap, dtype=np.float32) + 1.0) / (overlap + 1.0)
    w[:overlap] = edge
    w[-overlap:] = edge[::-1]
    return np.outer(w, w)


def tiled_apply(gen_params: ad.ParamStore, img: np.ndarray, tile: int = TILE,
                overlap: int = OVERLAP) -> np.ndarray:
    """One denoising stage over a full [0,1] slice via blended tiling."""
    img = np.asarray(img, dtype=np.float32)
    h, w = img.shape
    with ad.no_grad():
        if h < tile or w < tile:
            out = nets.denoise_once(gen_params, ad.constant(img[None, None]))
            return out.value[0, 0].copy()
        stride = tile - overlap
        weight = _ramp_weight(tile, overlap)
        acc = np.zeros((h, w), dtype=np.float64)
        norm = np.zeros((h, w), dtype=np.float64)
        offs_r = _tile_offsets(h, tile, stride)
        offs_c = _tile_offsets(w, tile, stride)
        tiles = np.empty((len(offs_r) * len(offs_c), 1, tile, tile), dtype=np.float32)
        k = 0
        for r in offs_r:
            for c in offs_c:
                tiles[k, 0] = img[r:r + tile, c:c + tile]
                k += 1
        outs = nets.denoise_once(gen_params, ad.constant(tiles)).value
        k = 0
        for r in offs_r:
            for c in offs_c:
                acc[r:r + tile, c:c + tile] += outs[k, 0].astype(np.float64) * weight
                norm[r:r + tile, c:c + tile] += weight
                k += 1
    return (acc / norm).astype(np.float32)


def whole_slice_apply(gen_params: ad.ParamStore, img: np.ndarray) -> np.ndarray:
    """One denoising stage on the whole slice (memory permitting)."""
    img = np.asarray(img, dtype=np.float32)
    with ad.no_grad():
        out = nets.denoise_once(gen_params, ad.constant(img[None, None]))
    return out.value[0, 0].copy()


def load_generator(ckpt: Checkpoint) -> ad.ParamStore:
    store = nets.init_generator(0)
    store.load_arrays(ckpt.generator)
    return store


def progressive_infer(gen_params: ad.ParamStore, img_hu: np.ndarray, max_depth: int,
                      window: str, trained_depth: int = 1, checkpoint_id: str = "",
                      source_id: str = "", cap: int = DEPTH_CAP) -> DenoiseSequence:
    """All depths 1..max_depth for one HU slice; each depth feeds the next."""
    if max_depth < 1:
        raise ValueError(f"max_depth must be >= 1, got {max_depth}")
    if max_depth > cap:
        raise DepthCapError(f"requested depth {max_depth} exceeds the cap of {cap}")
    tune_malloc()
    cur = hu_window(img_hu, window).astype(np.float32)
    images = []
    for _ in range(max_depth):
        cur = tiled_apply(gen_params, cur)
        images.append(cur)
    return DenoiseSequence(
        sequence_id=uuid.uuid4().hex,
        source_id=source_id,
        images=images,
        checkpoint_id=checkpoint_id,
        window=window,
        max_depth=max_depth,
        trained_depth=trained_depth,
        extrapolated_depths=[d for d in range(1, max_depth + 1) if d > trained_depth],
    )


def to_display_png_bytes(img01: np.ndarray) -> bytes:
    """8-bit grayscale PNG of a [0,1] image; shared by CLI and service."""
    import io

    from PIL import Image

    arr = np.clip(np.rint(np.asarray(img01, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(arr).save(buf, format="PNG")
    return buf.getvalue()
