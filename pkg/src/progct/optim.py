"""Adam optimizer with bias correction and the per-epoch 1/sqrt decay."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import ParamStore, ShapeError


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0
    lr0: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8


def init_adam(params: ParamStore, lr0: float = 1e-4, beta1: float = 0.9, beta2: float = 0.999,
              epsilon: float = 1e-8) -> AdamState:
    zeros = lambda: {k: np.zeros_like(v) for k, v in params.arrays().items()}
    return AdamState(m=zeros(), v=zeros(), step=0, lr0=lr0, beta1=beta1, beta2=beta2,
                     epsilon=epsilon)


def adam_step(state: AdamState, params: ParamStore, grads: dict[str, np.ndarray], lr: float):
    """One bias-corrected Adam update, in place. Missing grads mean zero."""
    unknown = set(grads) - set(params.names())
    if unknown:
        raise KeyError(f"gradients for unknown parameters: {sorted(unknown)}")
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for name in params.names():
        p = params[name].value
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p)
        elif g.shape != p.shape:
            raise ShapeError(f"adam_step: gradient for {name!r} has shape {g.shape}, "
                             f"parameter has {p.shape}")
        m, v = state.m[name], state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        update = lr * (m / c1) / (np.sqrt(v / c2) + state.epsilon)
        params[name].value = (p - update).astype(p.dtype, copy=False)


def lr_schedule(lr0: float, epoch: int) -> float:
    """1/sqrt(epoch) decay; epoch 1 maps to lr0."""
    if epoch < 1:
        raise ValueError(f"epoch must be >= 1, got {epoch}")
    return lr0 / np.sqrt(float(epoch))
