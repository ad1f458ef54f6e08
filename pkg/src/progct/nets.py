"""Generator and critic networks for progressive denoising.

The generator is a convolutional encoder-decoder that predicts a signed
noise residual. Three early feature maps are carried forward and
concatenated into the decoder at matching sizes, each followed by a 1x1
channel reducer. One denoising stage adds the residual to its input and
clips to [0,1]; deeper denoising repeats the stage with the same weights.
"""
from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import ParamStore, Tensor

GEN_PARAM_COUNT = 62_337
DEFAULT_PATCH = 64
MIN_INPUT_SIZE = 9  # four valid 3x3 shrinks must leave a positive size

# (name, shape, init) with init "relu" -> std sqrt(2/fan_in), "linear" -> sqrt(1/fan_in)
_GEN_LAYOUT = [
    ("g.enc1.w", (32, 1, 3, 3), "relu"),
    ("g.enc1.b", (32,), "zero"),
    ("g.enc2.w", (32, 32, 3, 3), "relu"),
    ("g.enc2.b", (32,), "zero"),
    ("g.enc3.w", (32, 32, 3, 3), "relu"),
    ("g.enc3.b", (32,), "zero"),
    ("g.enc4.w", (32, 32, 3, 3), "relu"),
    ("g.enc4.b", (32,), "zero"),
    ("g.dec1.w", (32, 32, 3, 3), "relu"),
    ("g.dec1.b", (32,), "zero"),
    ("g.red1.w", (32, 64, 1, 1), "relu"),
    ("g.red1.b", (32,), "zero"),
    ("g.dec2.w", (32, 32, 3, 3), "relu"),
    ("g.dec2.b", (32,), "zero"),
    ("g.red2.w", (32, 64, 1, 1), "relu"),
    ("g.red2.b", (32,), "zero"),
    ("g.dec3.w", (32, 32, 3, 3), "relu"),
    ("g.dec3.b", (32,), "zero"),
    ("g.red3.w", (32, 64, 1, 1), "relu"),
    ("g.red3.b", (32,), "zero"),
    ("g.out.w", (32, 1, 3, 3), "linear"),
    ("g.out.b", (1,), "zero"),
]


def _critic_layout(patch: int):
    if patch % 8 != 0 or patch < 8:
        raise ad.ShapeError(f"critic patch size must be a positive multiple of 8, got {patch}")
    feat = 256 * (patch // 8) ** 2
    return [
        ("d.conv1.w", (64, 1, 3, 3), "relu"),
        ("d.conv1.b", (64,), "zero"),
        ("d.conv2.w", (64, 64, 3, 3), "relu"),
        ("d.conv2.b", (64,), "zero"),
        ("d.conv3.w", (128, 64, 3, 3), "relu"),
        ("d.conv3.b", (128,), "zero"),
        ("d.conv4.w", (128, 128, 3, 3), "relu"),
        ("d.conv4.b", (128,), "zero"),
        ("d.conv5.w", (256, 128, 3, 3), "relu"),
        ("d.conv5.b", (256,), "zero"),
        ("d.conv6.w", (256, 256, 3, 3), "relu"),
        ("d.conv6.b", (256,), "zero"),
        ("d.fc1.w", (feat, 1024), "relu"),
        ("d.fc1.b", (1024,), "zero"),
        ("d.fc2.w", (1024, 1), "linear"),
        ("d.fc2.b", (1,), "zero"),
    ]


def _init_store(layout, seed, dtype, tconv_names=()):
    # conv weights are [Cout,Cin,kh,kw]; tconv weights are [Cin,Cout,kh,kw];
    # fan_in is Cin*kh*kw either way.
    rng = np.random.default_rng(seed)
    store = ParamStore()
    for name, shape, kind in layout:
        if kind == "zero":
            store.register(name, np.zeros(shape, dtype=dtype))
            continue
        if len(shape) == 4:
            fan_in = (shape[0] if name in tconv_names else shape[1]) * shape[2] * shape[3]
        else:
            fan_in = shape[0]
        std = np.sqrt((2.0 if kind == "relu" else 1.0) / fan_in)
        store.register(name, (rng.normal(size=shape) * std).astype(dtype))
    return store


_GEN_TCONV = {"g.dec1.w", "g.dec2.w", "g.dec3.w", "g.out.w"}


def init_generator(seed: int, dtype=np.float32) -> ParamStore:
    store = _init_store(_GEN_LAYOUT, seed, dtype, tconv_names=_GEN_TCONV)
    assert store.size() == GEN_PARAM_COUNT, store.size()
    return store


def init_critic(seed: int, patch: int = DEFAULT_PATCH, dtype=np.float32) -> ParamStore:
    return _init_store(_critic_layout(patch), seed, dtype)


def init_params(seed: int, patch: int = DEFAULT_PATCH, dtype=np.float32):
    """Fresh (generator, critic) parameter stores, deterministic per seed."""
    return init_generator(seed, dtype=dtype), init_critic(seed + 1, patch=patch, dtype=dtype)


def critic_param_count(patch: int = DEFAULT_PATCH) -> int:
    return sum(int(np.prod(shape)) for _, shape, _ in _critic_layout(patch))


def residual_forward(p: ParamStore, x: Tensor) -> Tensor:
    """Signed noise residual, same spatial size as the input; NOT clipped.

    Valid 3x3 convolutions shrink 64->62->60->58->56; the transposed
    decoder grows back 56->58->60->62->64. Encoder maps at 58/60/62 are
    concatenated after the matching decoder layer and reduced 64->32
    channels by a 1x1 convolution.
    """
    x = ad.as_tensor(x)
    if x.value.ndim != 4 or x.value.shape[1] != 1:
        raise ad.ShapeError(f"generator expects [B,1,H,W], got {x.value.shape}")
    if min(x.value.shape[2], x.value.shape[3]) < MIN_INPUT_SIZE:
        raise ad.ShapeError(
            f"generator input spatial size {x.value.shape[2:]} below minimum {MIN_INPUT_SIZE}x{MIN_INPUT_SIZE}")
    e1 = ad.relu(ad.conv2d(x, p["g.enc1.w"], p["g.enc1.b"]))
    e2 = ad.relu(ad.conv2d(e1, p["g.enc2.w"], p["g.enc2.b"]))
    e3 = ad.relu(ad.conv2d(e2, p["g.enc3.w"], p["g.enc3.b"]))
    h = ad.relu(ad.conv2d(e3, p["g.enc4.w"], p["g.enc4.b"]))
    h = ad.relu(ad.tconv2d(h, p["g.dec1.w"], p["g.dec1.b"]))
    h = ad.relu(ad.conv2d(ad.concat_ch(h, e3), p["g.red1.w"], p["g.red1.b"]))
    h = ad.relu(ad.tconv2d(h, p["g.dec2.w"], p["g.dec2.b"]))
    h = ad.relu(ad.conv2d(ad.concat_ch(h, e2), p["g.red2.w"], p["g.red2.b"]))
    h = ad.relu(ad.tconv2d(h, p["g.dec3.w"], p["g.dec3.b"]))
    h = ad.relu(ad.conv2d(ad.concat_ch(h, e1), p["g.red3.w"], p["g.red3.b"]))
    return ad.tconv2d(h, p["g.out.w"], p["g.out.b"])


def denoise_once(p: ParamStore, x: Tensor) -> Tensor:
    """One denoising stage: clip01(x + residual). Output bounded in [0,1]."""
    x = ad.as_tensor(x)
    return ad.clip01(ad.add(x, residual_forward(p, x)))


def denoise_progressive(p: ParamStore, x: Tensor, depth: int) -> list[Tensor]:
    """Depth-indexed outputs of repeatedly applying the shared-weight stage."""
    if depth < 1:
        raise ValueError(f"depth must be >= 1, got {depth}")
    outs: list[Tensor] = []
    cur = ad.as_tensor(x)
    for _ in range(depth):
        cur = denoise_once(p, cur)
        outs.append(cur)
    return outs


def critic_forward(d: ParamStore, x: Tensor) -> Tensor:
    """Wasserstein critic: one unbounded scalar per sample, shape [B,1].

    Six same-padded 3x3 convolutions (stride 2 on the even ones, realized
    as stride-1 + subsampling), each followed by leaky ReLU, then dense
    1024 with leaky ReLU and a linear head.
    """
    x = ad.as_tensor(x)
    if x.value.ndim != 4 or x.value.shape[1] != 1:
        raise ad.ShapeError(f"critic expects [B,1,H,W], got {x.value.shape}")
    feat = d["d.fc1.w"].value.shape[0]
    side = x.value.shape[2]
    if x.value.shape[3] != side or 256 * (side // 8) ** 2 != feat or side % 8 != 0:
        raise ad.ShapeError(
            f"critic configured for {int(np.sqrt(feat // 256)) * 8}x"
            f"{int(np.sqrt(feat // 256)) * 8} inputs, got {x.value.shape[2:]}")
    h = ad.leaky_relu(ad.conv2d(ad.pad2d(x, 1), d["d.conv1.w"], d["d.conv1.b"]))
    h = ad.leaky_relu(ad.conv2d(ad.pad2d(h, 1), d["d.conv2.w"], d["d.conv2.b"], stride=2))
    h = ad.leaky_relu(ad.conv2d(ad.pad2d(h, 1), d["d.conv3.w"], d["d.conv3.b"]))
    h = ad.leaky_relu(ad.conv2d(ad.pad2d(h, 1), d["d.conv4.w"], d["d.conv4.b"], stride=2))
    h = ad.leaky_relu(ad.conv2d(ad.pad2d(h, 1), d["d.conv5.w"], d["d.conv5.b"]))
    h = ad.leaky_relu(ad.conv2d(ad.pad2d(h, 1), d["d.conv6.w"], d["d.conv6.b"], stride=2))
    h = ad.reshape(h, (h.value.shape[0], feat))
    h = ad.leaky_relu(ad.dense(h, d["d.fc1.w"], d["d.fc1.b"]))
    return ad.dense(h, d["d.fc2.w"], d["d.fc2.b"])
