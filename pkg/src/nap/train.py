"""Losses, mini-batch training loop, and run logs."""

from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass, field, fields

import numpy as np

from .errors import ConfigError, DataError, NumericError, ShapeError
from .dataio.samples import normalize, rotate_augment
from .model import prepare_batch
from .numeric.params import adam_step, clip_global_norm
from .numeric.rng import substream
from .numeric.tensor import Tensor, concat


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.001
    batch_size: int = 128
    epochs: int = 10
    seed: int = 0
    k_variety: int = 20
    kl_weight: float = 0.0
    clip_norm: float = 10.0
    augment: bool = False

    def __post_init__(self):
        if self.lr < 0:
            raise ConfigError("lr must be >= 0")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.k_variety < 1:
            raise ConfigError("k_variety must be >= 1")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")

    def hash(self):
        text = ",".join(f"{f.name}={getattr(self, f.name)}" for f in fields(self))
        return hashlib.sha256(text.encode()).hexdigest()[:12]


@dataclass
class TrainLogEntry:
    epoch: int
    loss: float
    grad_norm: float
    seconds: float


@dataclass
class TrainLog:
    config_hash: str
    seed: int
    entries: list = field(default_factory=list)

    def to_text(self):
        lines = [f"# run config_hash={self.config_hash} seed={self.seed}",
                 "# epoch loss grad_norm seconds"]
        for e in self.entries:
            lines.append(f"{e.epoch} {e.loss:.6f} {e.grad_norm:.6f} {e.seconds:.3f}")
        return "\n".join(lines) + "\n"


def mse_loss(pred, gt):
    """Mean over steps of the squared Euclidean error."""
    if not isinstance(pred, Tensor):
        pred = Tensor(pred)
    gt_arr = gt.data if isinstance(gt, Tensor) else np.asarray(gt, dtype=pred.dtype)
    if pred.shape != gt_arr.shape:
        raise ShapeError(f"mse_loss shapes {pred.shape} vs {gt_arr.shape}")
    t_pred = pred.shape[0]
    diff = pred - Tensor(gt_arr)
    return diff.square().sum() / t_pred


def variety_loss(preds, gt):
    """Min over K of mse_loss; gradient flows only through the argmin sample."""
    if len(preds) == 0:
        raise ShapeError("variety_loss needs at least one sample")
    losses = [mse_loss(p, gt) for p in preds]
    best = int(np.argmin([l.item() for l in losses]))
    return losses[best]


def kl_divergence(mu, logvar):
    """KL(N(mu, sigma^2) || N(0, I)) summed over dims, averaged over the batch."""
    B = mu.shape[0] if mu.ndim == 2 else 1
    term = 1.0 + logvar - mu.square() - logvar.exp()
    return term.sum() * (-0.5 / B)


def _batch_loss(model, batch, gt, cfg, eps_draws):
    """Batched training loss: MSE in single mode, best-of-K variety otherwise.

    gt: (B, t_pred, 2). eps_draws: (K, B, d_z) or None. Returns (loss, latent).
    """
    mcfg = model.config
    B, t_pred = gt.shape[0], gt.shape[1]
    if not (mcfg.multimodal and mcfg.uses_latent):
        preds, latent = model.forward(batch)
        total = None
        for t in range(t_pred):
            sq = (preds[t] - Tensor(gt[:, t, :].astype(model.dtype))).square().sum()
            total = sq if total is None else total + sq
        loss = total / (B * t_pred)
        return loss, latent

    # multimodal: decode K draws off one shared encoding
    state = model.encode_batch(batch)
    contexts = model.contexts_batch(state)
    per_k = []
    latent0 = None
    for k in range(eps_draws.shape[0]):
        latent = model.latent_batch(state, eps_draws[k])
        if latent0 is None:
            latent0 = latent
        per_sample = None
        for t in range(t_pred):
            pred = model.decode_batch(contexts, latent, t)
            sq = (pred - Tensor(gt[:, t, :].astype(model.dtype))).square().sum_axis(1)
            per_sample = sq if per_sample is None else per_sample + sq
        per_k.append((per_sample / t_pred).reshape(-1, 1))
    stacked = concat(per_k, axis=1)                      # (B, K)
    pick = np.argmin(stacked.data, axis=1)
    mask = np.zeros_like(stacked.data)
    mask[np.arange(B), pick] = 1.0
    loss = (stacked * Tensor(mask)).sum() / B
    return loss, latent0


def _make_batches(n, batch_size, seed, epoch):
    perm = substream(seed, "shuffle", epoch).permutation(n)
    return [perm[i:i + batch_size] for i in range(0, n, batch_size)]


def _prepare_training_samples(raw_samples, grids_by_scene, cfg, epoch, index):
    """Normalize (and optionally rotate) one batch; returns samples + per-sample grids."""
    out_samples, out_grids = [], []
    for idx in index:
        s = normalize(raw_samples[idx])
        grid = grids_by_scene[s.scene_id]
        if cfg.augment:
            k = int(substream(cfg.seed, "aug", epoch, int(idx)).integers(0, 24))
            angle = np.deg2rad(15.0 * k)
            s, grid = rotate_augment(s, grid, angle)
        out_samples.append(s)
        out_grids.append(grid)
    return out_samples, out_grids


def train_epoch(model, dataset, cfg, epoch=0, split=None):
    """One pass over the training split: shuffle, forward, clip, Adam.

    Returns (model, TrainLogEntry). All stochastic pieces are keyed by
    (cfg.seed, epoch, batch, sample) so the run is reproducible.
    """
    t0 = time.perf_counter()
    if split is not None:
        samples = dataset.train_samples(split)
    else:
        samples = dataset.samples_for(dataset.scene_ids())
    if not samples:
        raise DataError("no training samples")
    grids_by_scene = {sid: dataset.scenes[sid].grid for sid in dataset.scenes}

    mcfg = model.config
    k_var = cfg.k_variety if (mcfg.multimodal and mcfg.uses_latent) else 1
    losses, norms, counts = [], [], []
    for b_idx, index in enumerate(_make_batches(len(samples), cfg.batch_size,
                                                cfg.seed, epoch)):
        if split is not None:
            for idx in index:
                if samples[idx].scene_id == split.test_scene:
                    raise DataError("test-scene sample leaked into a training batch")
        batch_samples, batch_grids = _prepare_training_samples(
            samples, grids_by_scene, cfg, epoch, index)
        batch = prepare_batch(batch_samples, batch_grids, mcfg, dtype=model.dtype)
        gt = np.stack([s.fut for s in batch_samples]).astype(model.dtype)

        eps_draws = None
        if mcfg.multimodal and mcfg.uses_latent:
            eps_draws = np.zeros((k_var, len(index), mcfg.d_z), dtype=model.dtype)
            for pos, idx in enumerate(index):
                stream = substream(cfg.seed, "eps", epoch, b_idx, int(idx))
                eps_draws[:, pos, :] = stream.standard_normal(
                    (k_var, mcfg.d_z)).astype(model.dtype)

        model.store.zero_grad()
        loss, latent = _batch_loss(model, batch, gt, cfg, eps_draws)
        if cfg.kl_weight > 0 and latent is not None:
            loss = loss + kl_divergence(latent.mu, latent.logvar) * cfg.kl_weight
        if not np.isfinite(loss.item()):
            raise NumericError(f"non-finite loss in epoch {epoch} batch {b_idx}")
        loss.backward()
        norm = clip_global_norm(model.store, cfg.clip_norm)
        adam_step(model.store, lr=cfg.lr)
        losses.append(loss.item() * len(index))
        norms.append(norm)
        counts.append(len(index))

    entry = TrainLogEntry(
        epoch=epoch,
        loss=sum(losses) / sum(counts),
        grad_norm=float(np.mean(norms)),
        seconds=time.perf_counter() - t0,
    )
    return model, entry


def fit(model, dataset, cfg, split=None):
    """Train for cfg.epochs epochs; returns (model, TrainLog)."""
    log = TrainLog(config_hash=cfg.hash(), seed=cfg.seed)
    for epoch in range(1, cfg.epochs + 1):
        model, entry = train_epoch(model, dataset, cfg, epoch=epoch, split=split)
        log.entries.append(entry)
    return model, log
