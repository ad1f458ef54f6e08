"""Reverse-mode automatic differentiation over dense numpy tensors.

Every gradient is built out of the same primitive operations it
differentiates, so the backward pass is itself a differentiable graph.
That is what makes the critic's gradient-norm penalty twice
differentiable without any special casing.

Conventions: images are [batch, channels, height, width]; dense inputs
are [batch, features]; convolutions are valid (no padding), stride 1.
Strided/padded variants are composed from pad2d/subsample2.
"""
from __future__ import annotations

import threading
from typing import Callable, Iterable

import numpy as np

try:  # optional fast convolution kernels; the numpy path is the reference
    import torch as _torch
    import torch.nn.functional as _F
except ImportError:  # pragma: no cover
    _torch = None
    _F = None


class ShapeError(ValueError):
    """Operand shapes are inconsistent; the message names the offending dimension."""


_grad_enabled = True


class no_grad:
    """Context manager that turns off graph recording (pure inference)."""

    def __enter__(self):
        global _grad_enabled
        self._saved = _grad_enabled
        _grad_enabled = False
        return self

    def __exit__(self, *exc):
        global _grad_enabled
        _grad_enabled = self._saved
        return False


class Tensor:
    """A graph node: numpy value plus parent links and their vjp closures."""

    __slots__ = ("value", "parents", "vjps", "requires_grad", "op")

    def __init__(self, value, parents=(), vjps=(), requires_grad=False, op="leaf"):
        self.value = np.asarray(value)
        self.parents = parents
        self.vjps = vjps
        self.requires_grad = requires_grad
        self.op = op

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    @property
    def dtype(self):
        return self.value.dtype

    def __repr__(self):
        return f"Tensor(op={self.op!r}, shape={self.value.shape}, grad={self.requires_grad})"


def constant(value, dtype=None) -> Tensor:
    return Tensor(np.asarray(value, dtype=dtype))


def variable(value, dtype=None) -> Tensor:
    """Leaf that participates in differentiation (input or parameter)."""
    return Tensor(np.asarray(value, dtype=dtype), requires_grad=True, op="var")


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x))


def _node(value, parents, vjps, op) -> Tensor:
    """Create an op node, dropping parents that do not need gradients."""
    if _grad_enabled:
        kept = [(p, v) for p, v in zip(parents, vjps) if p.requires_grad]
        if kept:
            ps, vs = zip(*kept)
            return Tensor(value, ps, vs, True, op)
    return Tensor(value, op=op)


def _same_shape(a: Tensor, b: Tensor, op: str):
    if a.value.shape != b.value.shape:
        raise ShapeError(f"{op}: operand shapes differ: {a.value.shape} vs {b.value.shape}")


# ---------------------------------------------------------------------------
# elementwise and reduction primitives


def add(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b, "add")
    return _node(a.value + b.value, (a, b), (lambda g: g, lambda g: g), "add")


def neg(a: Tensor) -> Tensor:
    return _node(-a.value, (a,), (neg,), "neg")


def sub(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b, "sub")
    return _node(a.value - b.value, (a, b), (lambda g: g, lambda g: neg(g)), "sub")


def mul(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b, "mul")
    return _node(a.value * b.value, (a, b), (lambda g: mul(g, b), lambda g: mul(g, a)), "mul")


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)
    return _node(a.value * c, (a,), (lambda g: scale(g, c),), "scale")


def add_scalar(a: Tensor, c: float) -> Tensor:
    return _node(a.value + float(c), (a,), (lambda g: g,), "add_scalar")


def powc(a: Tensor, p: float) -> Tensor:
    """Elementwise constant power. Fractional p requires positive inputs."""
    p = float(p)
    return _node(a.value ** p, (a,), (lambda g: mul(g, scale(powc(a, p - 1.0), p)),), "powc")


def square(a: Tensor) -> Tensor:
    return mul(a, a)


def sqrt(a: Tensor) -> Tensor:
    return powc(a, 0.5)


def sum_all(a: Tensor) -> Tensor:
    shape = a.value.shape
    return _node(a.value.sum(), (a,), (lambda g: _bcast_full(g, shape),), "sum_all")


def _bcast_full(a: Tensor, shape) -> Tensor:
    return _node(np.broadcast_to(a.value, shape).copy(), (a,), (sum_all,), "bcast_full")


def mean_all(a: Tensor) -> Tensor:
    return scale(sum_all(a), 1.0 / a.value.size)


def sum_samples(a: Tensor) -> Tensor:
    """Reduce every axis except the leading batch axis: [B, ...] -> [B]."""
    shape = a.value.shape
    axes = tuple(range(1, a.value.ndim))
    return _node(a.value.sum(axis=axes), (a,), (lambda g: _bcast_samples(g, shape),), "sum_samples")


def _bcast_samples(a: Tensor, shape) -> Tensor:
    v = np.broadcast_to(a.value.reshape((shape[0],) + (1,) * (len(shape) - 1)), shape).copy()
    return _node(v, (a,), (sum_samples,), "bcast_samples")


# ---------------------------------------------------------------------------
# shuffling primitives


def reshape(a: Tensor, shape) -> Tensor:
    old = a.value.shape
    return _node(a.value.reshape(shape), (a,), (lambda g: reshape(g, old),), "reshape")


def transpose2(a: Tensor) -> Tensor:
    # views are fine: values are never mutated in place
    return _node(a.value.T, (a,), (transpose2,), "transpose2")


def transpose01(a: Tensor) -> Tensor:
    """Swap the first two axes of a 4-d tensor (batch/channel shuffle)."""
    return _node(a.value.transpose(1, 0, 2, 3), (a,), (transpose01,), "transpose01")


def concat_ch(a: Tensor, b: Tensor) -> Tensor:
    if a.value.shape[0] != b.value.shape[0] or a.value.shape[2:] != b.value.shape[2:]:
        raise ShapeError(f"concat_ch: non-channel dims differ: {a.value.shape} vs {b.value.shape}")
    ca, cb = a.value.shape[1], b.value.shape[1]
    return _node(
        np.concatenate([a.value, b.value], axis=1),
        (a, b),
        (lambda g: slice_ch(g, 0, ca), lambda g: slice_ch(g, ca, ca + cb)),
        "concat_ch",
    )


def slice_ch(a: Tensor, lo: int, hi: int) -> Tensor:
    total = a.value.shape[1]
    return _node(a.value[:, lo:hi].copy(), (a,), (lambda g: _embed_ch(g, lo, total),), "slice_ch")


def _embed_ch(a: Tensor, lo: int, total: int) -> Tensor:
    v = a.value
    out = np.zeros(v.shape[:1] + (total,) + v.shape[2:], dtype=v.dtype)
    out[:, lo:lo + v.shape[1]] = v
    width = v.shape[1]
    return _node(out, (a,), (lambda g: slice_ch(g, lo, lo + width),), "embed_ch")


def pad2d(a: Tensor, p: int) -> Tensor:
    v = np.pad(a.value, ((0, 0), (0, 0), (p, p), (p, p)))
    return _node(v, (a,), (lambda g: crop2d(g, p),), "pad2d")


def crop2d(a: Tensor, p: int) -> Tensor:
    v = a.value[:, :, p:-p or None, p:-p or None].copy()
    return _node(v, (a,), (lambda g: pad2d(g, p),), "crop2d")


def subsample2(a: Tensor) -> Tensor:
    """Keep every other row/column (stride-2 selection starting at 0)."""
    h, w = a.value.shape[2:]
    return _node(a.value[:, :, ::2, ::2].copy(), (a,), (lambda g: _dilate2(g, h, w),), "subsample2")


def _dilate2(a: Tensor, h: int, w: int) -> Tensor:
    v = a.value
    out = np.zeros(v.shape[:2] + (h, w), dtype=v.dtype)
    out[:, :, ::2, ::2] = v
    return _node(out, (a,), (subsample2,), "dilate2")


# ---------------------------------------------------------------------------
# bias broadcast pairs (the only broadcasting in the engine)


def bcast_ch(b: Tensor, shape) -> Tensor:
    """[C] -> [B,C,H,W]."""
    v = np.broadcast_to(b.value.reshape(1, -1, 1, 1), shape).copy()
    return _node(v, (b,), (sum_ch,), "bcast_ch")


def sum_ch(a: Tensor) -> Tensor:
    shape = a.value.shape
    return _node(a.value.sum(axis=(0, 2, 3)), (a,), (lambda g: bcast_ch(g, shape),), "sum_ch")


def bcast_row(b: Tensor, shape) -> Tensor:
    """[M] -> [B,M]."""
    v = np.broadcast_to(b.value.reshape(1, -1), shape).copy()
    return _node(v, (b,), (sum_rows,), "bcast_row")


def sum_rows(a: Tensor) -> Tensor:
    shape = a.value.shape
    return _node(a.value.sum(axis=0), (a,), (lambda g: bcast_row(g, shape),), "sum_rows")


# ---------------------------------------------------------------------------
# activations (masks are constants: correct a.e. for piecewise-linear maps;
# they are built lazily so no-grad passes never materialize them)


def _masked_vjp(a: Tensor, mask_fn):
    cache: list[Tensor] = []

    def vjp(g: Tensor) -> Tensor:
        if not cache:
            cache.append(Tensor(mask_fn(a.value)))
        return mul(g, cache[0])

    return vjp


def relu(a: Tensor) -> Tensor:
    return _node(np.maximum(a.value, 0), (a,),
                 (_masked_vjp(a, lambda v: (v > 0).astype(v.dtype)),), "relu")


def leaky_relu(a: Tensor, slope: float = 0.2) -> Tensor:
    return _node(np.where(a.value > 0, a.value, a.value * slope), (a,),
                 (_masked_vjp(a, lambda v: np.where(v > 0, 1.0, slope).astype(v.dtype)),),
                 "leaky_relu")


def clip01(a: Tensor) -> Tensor:
    # pass-through on the closed interval [0,1], zero outside
    return _node(np.clip(a.value, 0.0, 1.0), (a,),
                 (_masked_vjp(a, lambda v: ((v >= 0.0) & (v <= 1.0)).astype(v.dtype)),),
                 "clip01")


def activation(a: Tensor, kind: str) -> Tensor:
    if kind == "relu":
        return relu(a)
    if kind == "leaky_relu":
        return leaky_relu(a)
    if kind == "clip01":
        return clip01(a)
    raise ValueError(f"unknown activation kind: {kind!r}")


# ---------------------------------------------------------------------------
# convolution core


_scratch = threading.local()


def _buf(tag: str, shape, dtype) -> np.ndarray:
    """Reusable per-thread scratch (transients only, never graph-owned)."""
    cache = getattr(_scratch, "bufs", None)
    if cache is None:
        cache = _scratch.bufs = {}
    key = (tag, shape, np.dtype(dtype).str)
    buf = cache.get(key)
    if buf is None:
        buf = cache[key] = np.empty(shape, dtype=dtype)
    return buf


def _corr2d(x: np.ndarray, w: np.ndarray, stride: int = 1,
            bias: np.ndarray | None = None) -> np.ndarray:
    """Valid cross-correlation: [B,Ci,H,W] * [Co,Ci,kh,kw] -> [B,Co,Ho,Wo].

    Small kernels go through a channels-last im2col built from kh*kw
    contiguous block copies and one GEMM. Large kernels over few output
    positions (the weight-gradient case) instead loop over the Ho*Wo
    output positions with one GEMM each. Scratch buffers are reused so
    steady-state training allocates only graph-owned outputs.
    """
    B, Ci, H, W = x.shape
    Co, _, kh, kw = w.shape
    Ho = (H - kh) // stride + 1
    Wo = (W - kw) // stride + 1

    if _torch is not None:
        y = _F.conv2d(_torch.from_numpy(x), _torch.from_numpy(w),
                      bias=None if bias is None else _torch.from_numpy(bias),
                      stride=stride)
        return y.numpy()

    if kh * kw > Ho * Wo and stride == 1:
        # few output positions, big kernel: GEMM per output position
        y = np.empty((B, Co, Ho, Wo), dtype=x.dtype)
        wm = w.reshape(Co, Ci * kh * kw)
        cols = _buf("pos", (B, Ci, kh, kw), x.dtype)
        for i in range(Ho):
            for j in range(Wo):
                np.copyto(cols, x[:, :, i:i + kh, j:j + kw])
                y[:, :, i, j] = cols.reshape(B, Ci * kh * kw) @ wm.T
        if bias is not None:
            y += bias.reshape(1, Co, 1, 1)
        return y

    xt = _buf("nhwc", (B, H, W, Ci), x.dtype)
    np.copyto(xt, x.transpose(0, 2, 3, 1))
    if kh == kw == 1 and stride == 1:
        cols = xt.reshape(B * Ho * Wo, Ci)
    else:
        buf = _buf("cols", (B, Ho, Wo, kh, kw, Ci), x.dtype)
        for u in range(kh):
            for v in range(kw):
                buf[:, :, :, u, v, :] = xt[:, u:u + (Ho - 1) * stride + 1:stride,
                                           v:v + (Wo - 1) * stride + 1:stride, :]
        cols = buf.reshape(B * Ho * Wo, kh * kw * Ci)
    wm = np.ascontiguousarray(w.transpose(2, 3, 1, 0)).reshape(kh * kw * Ci, Co)
    y = _buf("gemm", (cols.shape[0], Co), x.dtype)
    np.matmul(cols, wm, out=y)
    if bias is not None:
        y += bias[None, :]
    return np.ascontiguousarray(y.reshape(B, Ho, Wo, Co).transpose(0, 3, 1, 2))


def _tcorr2d(x: np.ndarray, w: np.ndarray, bias: np.ndarray | None = None) -> np.ndarray:
    """Transposed convolution values: full correlation with the flipped,
    channel-swapped kernel. Weight layout [Cin,Cout,kh,kw]."""
    if _torch is not None:
        y = _F.conv_transpose2d(_torch.from_numpy(x), _torch.from_numpy(w),
                                bias=None if bias is None else _torch.from_numpy(bias))
        return y.numpy()
    kh, kw = w.shape[2:]
    xp = np.pad(x, ((0, 0), (0, 0), (kh - 1, kh - 1), (kw - 1, kw - 1)))
    wf = np.ascontiguousarray(w[:, :, ::-1, ::-1].transpose(1, 0, 2, 3))
    return _corr2d(xp, wf, bias=bias)


def _check_conv_shapes(xv, wv, op, cin_axis):
    if xv.ndim != 4 or wv.ndim != 4:
        raise ShapeError(f"{op}: expected 4-d input and weight, got {xv.ndim}-d and {wv.ndim}-d")
    if xv.shape[1] != wv.shape[cin_axis]:
        raise ShapeError(f"{op}: input channels {xv.shape[1]} != weight channels "
                         f"{wv.shape[cin_axis]}")


def conv2d_nb(x: Tensor, w: Tensor, stride: int = 1) -> Tensor:
    """Bias-free valid convolution (cross-correlation), stride 1 or 2.

    Adjoints: d/dx is the transposed convolution of the (zero-dilated,
    for stride 2) output gradient with the same weights; d/dw is a
    correlation of x with that gradient, realized by treating channels
    as batch on both operands.
    """
    xv, wv = x.value, w.value
    _check_conv_shapes(xv, wv, "conv2d", 1)
    if xv.shape[2] < wv.shape[2] or xv.shape[3] < wv.shape[3]:
        raise ShapeError(f"conv2d: spatial size {xv.shape[2:]} smaller than kernel {wv.shape[2:]}")
    if stride not in (1, 2):
        raise ShapeError(f"conv2d: stride must be 1 or 2, got {stride}")
    hs = xv.shape[2] - wv.shape[2] + 1  # stride-1 output extents
    ws = xv.shape[3] - wv.shape[3] + 1

    def up(g: Tensor) -> Tensor:
        return g if stride == 1 else _dilate2(g, hs, ws)

    return _node(
        _corr2d(xv, wv, stride=stride),
        (x, w),
        (lambda g: tconv2d_nb(up(g), w),
         lambda g: transpose01(conv2d_nb(transpose01(x), transpose01(up(g))))),
        "conv2d",
    )


def tconv2d_nb(x: Tensor, w: Tensor) -> Tensor:
    """Bias-free transposed convolution, the exact adjoint of stride-1
    conv2d_nb. Weight layout [Cin,Cout,kh,kw]; spatial size grows by
    kernel-1."""
    xv, wv = x.value, w.value
    _check_conv_shapes(xv, wv, "tconv2d", 0)
    return _node(
        _tcorr2d(xv, wv),
        (x, w),
        (lambda g: conv2d_nb(g, w),
         lambda g: transpose01(conv2d_nb(transpose01(g), transpose01(x)))),
        "tconv2d",
    )


# ---------------------------------------------------------------------------
# layer-level operations (bias fused into the value computation; the bias
# adjoint is the channel/row sum, so fusing changes no gradient)


def conv2d(x: Tensor, w: Tensor, bias: Tensor, stride: int = 1) -> Tensor:
    xv, wv = x.value, w.value
    _check_conv_shapes(xv, wv, "conv2d", 1)
    if xv.shape[2] < wv.shape[2] or xv.shape[3] < wv.shape[3]:
        raise ShapeError(f"conv2d: spatial size {xv.shape[2:]} smaller than kernel {wv.shape[2:]}")
    if bias.value.shape != (wv.shape[0],):
        raise ShapeError(f"conv2d: bias shape {bias.value.shape} != ({wv.shape[0]},)")
    if stride not in (1, 2):
        raise ShapeError(f"conv2d: stride must be 1 or 2, got {stride}")
    hs = xv.shape[2] - wv.shape[2] + 1
    ws = xv.shape[3] - wv.shape[3] + 1

    def up(g: Tensor) -> Tensor:
        return g if stride == 1 else _dilate2(g, hs, ws)

    return _node(
        _corr2d(xv, wv, stride=stride, bias=bias.value),
        (x, w, bias),
        (lambda g: tconv2d_nb(up(g), w),
         lambda g: transpose01(conv2d_nb(transpose01(x), transpose01(up(g)))),
         lambda g: sum_ch(g)),
        "conv2d",
    )


def tconv2d(x: Tensor, w: Tensor, bias: Tensor) -> Tensor:
    xv, wv = x.value, w.value
    _check_conv_shapes(xv, wv, "tconv2d", 0)
    if bias.value.shape != (wv.shape[1],):
        raise ShapeError(f"tconv2d: bias shape {bias.value.shape} != ({wv.shape[1]},)")
    return _node(
        _tcorr2d(xv, wv, bias=bias.value),
        (x, w, bias),
        (lambda g: conv2d_nb(g, w),
         lambda g: transpose01(conv2d_nb(transpose01(g), transpose01(x))),
         lambda g: sum_ch(g)),
        "tconv2d",
    )


def dense(x: Tensor, w: Tensor, bias: Tensor) -> Tensor:
    xv, wv = x.value, w.value
    if xv.ndim != 2 or wv.ndim != 2:
        raise ShapeError(f"dense: expected 2-d input and weight, got {xv.ndim}-d and {wv.ndim}-d")
    if xv.shape[1] != wv.shape[0]:
        raise ShapeError(f"dense: inner dimensions disagree: input {xv.shape[1]} vs weight {wv.shape[0]}")
    if bias.value.shape != (wv.shape[1],):
        raise ShapeError(f"dense: bias shape {bias.value.shape} != ({wv.shape[1]},)")
    return _node(
        xv @ wv + bias.value[None, :],
        (x, w, bias),
        (lambda g: matmul(g, transpose2(w)), lambda g: matmul(transpose2(x), g),
         lambda g: sum_rows(g)),
        "dense",
    )


def matmul(a: Tensor, w: Tensor) -> Tensor:
    if a.value.shape[1] != w.value.shape[0]:
        raise ShapeError(f"matmul: inner dimensions disagree: {a.value.shape[1]} vs {w.value.shape[0]}")
    return _node(
        a.value @ w.value,
        (a, w),
        (lambda g: matmul(g, transpose2(w)), lambda g: matmul(transpose2(a), g)),
        "matmul",
    )


# ---------------------------------------------------------------------------
# parameter store


class ParamStore:
    """Named parameter leaves. Names bind exactly once; lookups never create."""

    def __init__(self):
        self._params: dict[str, Tensor] = {}

    def register(self, name: str, value: np.ndarray) -> Tensor:
        if name in self._params:
            raise KeyError(f"parameter {name!r} already registered")
        t = Tensor(np.asarray(value), requires_grad=True, op="param")
        self._params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def items(self):
        return self._params.items()

    def arrays(self) -> dict[str, np.ndarray]:
        return {k: v.value for k, v in self._params.items()}

    def load_arrays(self, arrays: dict[str, np.ndarray]):
        """Replace parameter values in place; shapes must match."""
        for name, arr in arrays.items():
            if name not in self._params:
                raise KeyError(f"unknown parameter {name!r}")
            cur = self._params[name].value
            arr = np.asarray(arr)
            if arr.shape != cur.shape:
                raise ShapeError(f"parameter {name!r}: shape {arr.shape} != {cur.shape}")
            self._params[name].value = arr.astype(cur.dtype, copy=True)

    def size(self) -> int:
        return sum(v.value.size for v in self._params.values())


# ---------------------------------------------------------------------------
# differentiation


def _toposort(root: Tensor) -> list[Tensor]:
    """Deterministic post-order over the grad-requiring subgraph."""
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def grad(output: Tensor, wrt: Iterable[Tensor], grad_output: Tensor | None = None) -> list[Tensor | None]:
    """Adjoints of `output` w.r.t. each tensor in `wrt`, as graph nodes.

    Returns None for tensors the output does not depend on. The returned
    nodes are differentiable again (the accumulation uses `add`).
    """
    wrt = list(wrt)
    if grad_output is None:
        if output.value.size != 1:
            raise ValueError(f"grad: output must be scalar, got shape {output.value.shape}")
        grad_output = Tensor(np.ones_like(output.value))
    order = _toposort(output)
    keep = {id(w) for w in wrt}
    adjoints: dict[int, Tensor] = {id(output): grad_output}
    results: dict[int, Tensor] = {}
    if id(output) in keep:
        results[id(output)] = grad_output
    for node in reversed(order):
        # pop: an interior adjoint is complete here and never needed again
        g = adjoints.pop(id(node), None)
        if g is None:
            continue
        for parent, vjp in zip(node.parents, node.vjps):
            contrib = vjp(g)
            prev = adjoints.get(id(parent))
            total = contrib if prev is None else add(prev, contrib)
            adjoints[id(parent)] = total
            if id(parent) in keep:
                results[id(parent)] = total
    return [results.get(id(w)) for w in wrt]


def backward(root: Tensor, params: ParamStore) -> dict[str, np.ndarray]:
    """Gradients of a scalar root for every parameter; zeros if unreachable."""
    if root.value.size != 1:
        raise ValueError(f"backward: root must be scalar, got shape {root.value.shape}")
    names = params.names()
    leaves = [params[n] for n in names]
    gs = grad(root, leaves)
    out: dict[str, np.ndarray] = {}
    for name, leaf, g in zip(names, leaves, gs):
        if g is None:
            out[name] = np.zeros_like(leaf.value)
        else:
            out[name] = g.value.astype(leaf.value.dtype, copy=False)
    return out


def input_gradient_node(net_output: Tensor, wrt_input: Tensor) -> Tensor:
    """Gradient of a per-sample scalar output w.r.t. an input, as a graph node.

    `net_output` must be [B] or [B,1]; batch elements are independent, so
    the per-sample gradients come from one reverse pass over the sum. The
    returned node supports further differentiation (mixed second order).
    """
    v = net_output.value
    if not (v.ndim == 1 or (v.ndim == 2 and v.shape[1] == 1)):
        raise ValueError(f"input_gradient_node: output must be scalar per sample, got shape {v.shape}")
    g = grad(sum_all(net_output), [wrt_input])[0]
    if g is None:
        raise ValueError("input_gradient_node: wrt_input is not an ancestor of net_output")
    return g
