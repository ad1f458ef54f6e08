"""Training objectives: Wasserstein critic loss with gradient penalty,
adversarial generator loss, MSE, and Sobel edge incoherence.

All expectations are batch means and all squared norms are means over
elements, keeping the loss weights scale-free across patch sizes. The
critic argument is any callable building a per-sample scalar graph, so
the same losses drive both the full conv critic and the tiny analytic
critics used in tests.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

# differentiability guard for the gradient norm at zero
NORM_GUARD = 1e-12

SOBEL_H = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])


@dataclass
class LossWeights:
    lambda_gp: float = 10.0
    lambda_mse: float = 50.0
    lambda_edge: float = 50.0

    def __post_init__(self):
        if min(self.lambda_gp, self.lambda_mse, self.lambda_edge) < 0:
            raise ValueError("loss weights must be >= 0")


@dataclass
class GpSample:
    """Per-sample interpolation between generator output and real image."""

    epsilon: np.ndarray  # [B], uniform in [0,1]
    image: np.ndarray    # eps*gen + (1-eps)*real, elementwise between the endpoints


def gp_interpolate(gen_out: np.ndarray, real: np.ndarray, rng: np.random.Generator) -> GpSample:
    if gen_out.shape != real.shape:
        raise ad.ShapeError(f"gp_interpolate: shapes differ: {gen_out.shape} vs {real.shape}")
    b = gen_out.shape[0]
    eps = rng.uniform(size=b).astype(gen_out.dtype)
    e = eps.reshape((b,) + (1,) * (gen_out.ndim - 1))
    return GpSample(epsilon=eps, image=e * gen_out + (1.0 - e) * real)


def gradient_penalty(critic: Callable[[Tensor], Tensor], interp: np.ndarray) -> Tensor:
    """mean[(||grad_x D(x)||_2 - 1)^2] at the interpolate, as a graph node.

    The norm is over each sample's full pixel vector. Differentiable
    w.r.t. the critic parameters (second order through the input
    gradient).
    """
    x = ad.variable(interp)
    out = critic(x)
    g = ad.input_gradient_node(out, x)
    norm = ad.sqrt(ad.add_scalar(ad.sum_samples(ad.square(g)), NORM_GUARD))
    return ad.mean_all(ad.square(ad.add_scalar(norm, -1.0)))


def _detach(x) -> np.ndarray:
    return x.value if isinstance(x, Tensor) else np.asarray(x)


def critic_loss(critic: Callable[[Tensor], Tensor], gen_out, real, weights: LossWeights,
                rng: np.random.Generator) -> Tensor:
    """Critic objective: mean[D(gen)] - mean[D(real)] + lambda_gp * penalty.

    The generator output is treated as a constant (no gradient flows back
    into the generator); a fresh epsilon is drawn per sample.
    """
    gen_v = _detach(gen_out)
    real_v = _detach(real)
    if gen_v.shape != real_v.shape:
        raise ad.ShapeError(f"critic_loss: shapes differ: {gen_v.shape} vs {real_v.shape}")
    sample = gp_interpolate(gen_v, real_v, rng)
    pen = gradient_penalty(critic, sample.image)
    # one forward for both expectations: mean over the first half minus
    # mean over the second is a signed-weight sum
    b = gen_v.shape[0]
    out = critic(ad.constant(np.concatenate([gen_v, real_v], axis=0)))
    sel = np.concatenate([np.full(b, 1.0 / b), np.full(b, -1.0 / b)]).astype(gen_v.dtype)
    wass = ad.sum_all(ad.mul(ad.reshape(out, (2 * b,)), ad.constant(sel)))
    return ad.add(wass, ad.scale(pen, weights.lambda_gp))


def adversarial_gen_loss(critic: Callable[[Tensor], Tensor], gen_out: Tensor) -> Tensor:
    """mean[D(G(x))] with the generator's graph history intact."""
    return ad.mean_all(critic(gen_out))


def mse_loss(gen_out: Tensor, real: Tensor) -> Tensor:
    gen_out, real = ad.as_tensor(gen_out), ad.as_tensor(real)
    if gen_out.value.shape != real.value.shape:
        raise ad.ShapeError(f"mse_loss: shapes differ: {gen_out.value.shape} vs {real.value.shape}")
    return ad.mean_all(ad.square(ad.sub(gen_out, real)))


def sobel_maps(img: Tensor) -> Tensor:
    """Horizontal and vertical Sobel filtrations: [B,1,H,W] -> [B,2,H-2,W-2]."""
    img = ad.as_tensor(img)
    v = img.value
    if v.ndim != 4 or v.shape[1] != 1:
        raise ad.ShapeError(f"sobel_maps: expected [B,1,H,W], got {v.shape}")
    if v.shape[2] < 3 or v.shape[3] < 3:
        raise ad.ShapeError(f"sobel_maps: spatial size {v.shape[2:]} below 3x3")
    k = np.stack([SOBEL_H, SOBEL_H.T])[:, None].astype(v.dtype)  # [2,1,3,3]
    return ad.conv2d_nb(img, ad.constant(k))


def edge_incoherence(gen_out: Tensor, real: Tensor) -> Tensor:
    """Mean squared difference of the two directional Sobel maps."""
    gen_out, real = ad.as_tensor(gen_out), ad.as_tensor(real)
    if gen_out.value.shape != real.value.shape:
        raise ad.ShapeError(
            f"edge_incoherence: shapes differ: {gen_out.value.shape} vs {real.value.shape}")
    return ad.mean_all(ad.square(ad.sub(sobel_maps(gen_out), sobel_maps(real))))


def composite_gen_loss(critic: Callable[[Tensor], Tensor], gen_out: Tensor, real: Tensor,
                       weights: LossWeights) -> Tensor:
    """Adversarial + lambda_mse * MSE + lambda_edge * edge incoherence."""
    loss = adversarial_gen_loss(critic, gen_out)
    loss = ad.add(loss, ad.scale(mse_loss(gen_out, real), weights.lambda_mse))
    return ad.add(loss, ad.scale(edge_incoherence(gen_out, real), weights.lambda_edge))
