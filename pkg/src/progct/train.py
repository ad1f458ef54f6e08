"""Alternating adversarial training loop with checkpointing.

Each cycle runs `critic_steps` critic updates (generator outputs of a
fresh batch, treated as constants, fresh epsilon per sample) followed by
one generator update on the composite loss applied to the deepest
output. Runs are deterministic given the seeds; checkpoints capture
parameters, optimizer moments, and RNG states so a resumed run
reproduces the original trajectory bitwise.
"""
from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field, asdict
from functools import partial
from pathlib import Path

import numpy as np

from . import autodiff as ad
from . import nets
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .data import PatchSet
from .losses import LossWeights, adversarial_gen_loss, composite_gen_loss, critic_loss, \
    edge_incoherence, mse_loss
from .optim import AdamState, adam_step, init_adam, lr_schedule
from .perf import tune_malloc


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainConfig:
    train_depth: int = 5
    batch_size: int = 128
    epochs: int = 80
    critic_steps: int = 4
    weights: LossWeights = field(default_factory=LossWeights)
    lr0: float = 1e-4
    seed: int = 0
    patch: int = 64
    iters_per_epoch: int | None = None  # default: len(train)//batch_size, min 1
    checkpoint_interval: int = 1        # epochs between checkpoints
    window: str = "abdomen"
    flip_adversarial_sign: bool = False

    def __post_init__(self):
        if self.train_depth < 1:
            raise ValueError("train_depth must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.critic_steps < 1:
            raise ValueError("critic:generator ratio must be >= 1")


@dataclass
class TrainReport:
    critic_losses: list = field(default_factory=list)
    gen_losses: list = field(default_factory=list)
    val_mse: list = field(default_factory=list)       # [{"epoch": e, "mse": {depth: v}}]
    epoch_seconds: list = field(default_factory=list)
    checkpoints: list = field(default_factory=list)
    counters: dict = field(default_factory=lambda: {"critic_steps": 0, "generator_steps": 0})
    step_trace: list = field(default_factory=list)

    def to_json(self) -> dict:
        return asdict(self)


def _batch(ps: PatchSet, idx: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    ld = ps.ldct[idx][:, None].astype(np.float32, copy=False)
    nd = ps.ndct[idx][:, None].astype(np.float32, copy=False)
    return ld, nd


def validate(gen_params: ad.ParamStore, val: PatchSet, depths: list[int],
             batch: int = 64) -> list[float]:
    """Mean squared error of each requested depth's output against NDCT.

    Accumulated in float64 over all elements, so the result is
    independent of the chunking. No parameters are mutated.
    """
    max_depth = max(depths)
    n = len(val)
    sse = {d: 0.0 for d in set(depths)}
    count = val.ldct.size
    with ad.no_grad():
        for lo in range(0, n, batch):
            ld, nd = _batch(val, np.arange(lo, min(lo + batch, n)))
            seq = nets.denoise_progressive(gen_params, ad.constant(ld), max_depth)
            for d in sse:
                diff = seq[d - 1].value.astype(np.float64) - nd.astype(np.float64)
                sse[d] += float(np.sum(diff * diff))
    return [sse[d] / count for d in depths]


def identity_mse(val: PatchSet) -> float:
    diff = val.ldct.astype(np.float64) - val.ndct.astype(np.float64)
    return float(np.mean(diff * diff))


def _gen_loss(critic_fn, gen_out, real, weights, flip):
    if not flip:
        return composite_gen_loss(critic_fn, gen_out, real, weights)
    adv = ad.neg(adversarial_gen_loss(critic_fn, gen_out))
    adv = ad.add(adv, ad.scale(mse_loss(gen_out, real), weights.lambda_mse))
    return ad.add(adv, ad.scale(edge_incoherence(gen_out, real), weights.lambda_edge))


def _critic_loss(critic_fn, gen_out, real, weights, rng, flip):
    if not flip:
        return critic_loss(critic_fn, gen_out, real, weights, rng)
    return critic_loss(critic_fn, real, gen_out, weights, rng)


def train(cfg: TrainConfig, train_set: PatchSet, val_set: PatchSet, out_dir,
          resume_from=None) -> TrainReport:
    """Run the full loop; returns the report and writes artifacts to out_dir.

    Artifacts: report.json, losses.csv, validation.csv, ckpt_epoch_NNN.json
    and ckpt_final.json. With resume_from, training continues after the
    checkpoint's epoch and the report covers only the resumed portion.
    """
    if len(train_set) == 0 or len(val_set) == 0:
        raise ValueError("training and validation sets must be non-empty")
    tune_malloc()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    iters = cfg.iters_per_epoch or max(1, len(train_set) // cfg.batch_size)
    depths = list(range(1, cfg.train_depth + 1))

    if resume_from is not None:
        ck = load_checkpoint(resume_from)
        gen = nets.init_generator(cfg.seed + 2)
        gen.load_arrays(ck.generator)
        critic_store = nets.init_critic(cfg.seed + 3, patch=cfg.patch)
        critic_store.load_arrays(ck.critic)
        adam_g, adam_c = ck.adam_gen, ck.adam_critic
        rng_batch = np.random.default_rng()
        rng_batch.bit_generator.state = ck.rng_states["batch"]
        rng_gp = np.random.default_rng()
        rng_gp.bit_generator.state = ck.rng_states["gp"]
        start_epoch = ck.epoch + 1
    else:
        gen = nets.init_generator(cfg.seed + 2)
        critic_store = nets.init_critic(cfg.seed + 3, patch=cfg.patch)
        adam_g = init_adam(gen, lr0=cfg.lr0)
        adam_c = init_adam(critic_store, lr0=cfg.lr0)
        rng_batch = np.random.default_rng(cfg.seed)
        rng_gp = np.random.default_rng(cfg.seed + 1)
        start_epoch = 1

    critic_fn = partial(nets.critic_forward, critic_store)
    report = TrainReport()

    def snapshot(tag, epoch):
        path = out_dir / f"{tag}.json"
        save_checkpoint(path, Checkpoint(
            generator=gen.arrays(), critic=critic_store.arrays(),
            train_depth=cfg.train_depth, seed=cfg.seed,
            meta={"window": cfg.window, "patch": cfg.patch, "lr0": cfg.lr0,
                  "batch_size": cfg.batch_size, "epochs": cfg.epochs},
            adam_gen=adam_g, adam_critic=adam_c,
            rng_states={"batch": rng_batch.bit_generator.state,
                        "gp": rng_gp.bit_generator.state},
            epoch=epoch))
        report.checkpoints.append(str(path))
        return path

    def check_finite(kind, value):
        if not np.isfinite(value):
            snapshot("ckpt_diverged", epoch)
            _write_report(out_dir, report)
            raise TrainingDiverged(f"{kind} loss became {value!r}; diagnostic snapshot written")

    for epoch in range(start_epoch, cfg.epochs + 1):
        t0 = time.perf_counter()
        lr = lr_schedule(cfg.lr0, epoch)
        for _ in range(iters):
            for _ in range(cfg.critic_steps):
                idx = rng_batch.integers(0, len(train_set), size=cfg.batch_size)
                ld, nd = _batch(train_set, idx)
                with ad.no_grad():
                    gen_out = nets.denoise_progressive(gen, ad.constant(ld),
                                                       cfg.train_depth)[-1].value
                loss = _critic_loss(critic_fn, gen_out, nd, cfg.weights, rng_gp,
                                    cfg.flip_adversarial_sign)
                adam_step(adam_c, critic_store, ad.backward(loss, critic_store), lr)
                report.critic_losses.append(float(loss.value))
                report.counters["critic_steps"] += 1
                report.step_trace.append("critic")
                check_finite("critic", loss.value)
            idx = rng_batch.integers(0, len(train_set), size=cfg.batch_size)
            ld, nd = _batch(train_set, idx)
            gen_out = nets.denoise_progressive(gen, ad.constant(ld), cfg.train_depth)[-1]
            loss = _gen_loss(critic_fn, gen_out, ad.constant(nd), cfg.weights,
                             cfg.flip_adversarial_sign)
            adam_step(adam_g, gen, ad.backward(loss, gen), lr)
            report.gen_losses.append(float(loss.value))
            report.counters["generator_steps"] += 1
            report.step_trace.append("generator")
            check_finite("generator", loss.value)
        mses = validate(gen, val_set, depths)
        report.val_mse.append({"epoch": epoch, "mse": {str(d): m for d, m in zip(depths, mses)}})
        report.epoch_seconds.append(time.perf_counter() - t0)
        if epoch % cfg.checkpoint_interval == 0 or epoch == cfg.epochs:
            snapshot(f"ckpt_epoch_{epoch:03d}", epoch)

    snapshot("ckpt_final", cfg.epochs)
    _write_report(out_dir, report)
    return report


def _write_report(out_dir, report: TrainReport):
    out_dir = Path(out_dir)
    with open(out_dir / "report.json", "w") as f:
        json.dump(report.to_json(), f, indent=2)
    with open(out_dir / "losses.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["step", "kind", "loss"])
        ci = gi = 0
        for kind in report.step_trace:
            if kind == "critic":
                w.writerow([ci + gi, kind, report.critic_losses[ci]])
                ci += 1
            else:
                w.writerow([ci + gi, kind, report.gen_losses[gi]])
                gi += 1
    with open(out_dir / "validation.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["epoch", "depth", "mse"])
        for entry in report.val_mse:
            for d, m in entry["mse"].items():
                w.writerow([entry["epoch"], d, m])
