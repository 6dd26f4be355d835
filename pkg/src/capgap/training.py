"""Text-only training loop with optional gap-bridging hooks.

The decoder learns to reconstruct each caption from its own text embedding;
audio embeddings never enter here. That weak-supervision contract is
enforced structurally: `train` accepts a TextCorpus, a type that simply has
no audio side.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .decoder import PrefixDecoder, ce_loss_and_grad, lm_backward, lm_forward
from .embeddings import EmbeddingSet, GapVector
from .gap import NoiseConfig
from .vocab import BOS, PAD, Vocabulary

__all__ = ["TrainConfig", "TrainReport", "TextCorpus", "TrainingDiverged", "lr_at", "train"]


class TrainingDiverged(RuntimeError):
    """Raised when a batch produced a non-finite loss."""

    def __init__(self, epoch: int, batch_index: int, loss: float):
        self.epoch = epoch
        self.batch_index = batch_index
        self.loss = loss
        super().__init__(f"non-finite loss {loss!r} at epoch {epoch}, batch {batch_index}")


@dataclass(eq=False)
class TextCorpus:
    """Captions plus their text embeddings; the only corpus `train` accepts."""

    ids: list[str]
    group_ids: list[str]
    captions: list[str]
    embeddings: EmbeddingSet

    def __post_init__(self):
        n = len(self.ids)
        if not (len(self.group_ids) == len(self.captions) == len(self.embeddings) == n):
            raise ValueError("ids, group_ids, captions and embeddings must align")
        if n == 0:
            raise ValueError("corpus is empty")
        if self.embeddings.ids != self.ids:
            raise ValueError("embedding ids do not match caption ids")

    def __len__(self) -> int:
        return len(self.ids)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 300
    batch_size: int = 64
    peak_lr: float = 1e-3
    warmup_epochs: int = 5
    lr_decay_factor: float = 0.2
    lr_decay_every: int = 10
    strategy: str = "none"          # none | noise_inject | embedding_shift
    noise: NoiseConfig | None = None
    gap: GapVector | None = None
    seed: int = 0
    weight_decay: float = 0.0       # optional; plain Adam by default
    max_grad_norm: float | None = None
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if self.peak_lr <= 0:
            raise ValueError("peak_lr must be > 0")
        if self.warmup_epochs < 0 or self.lr_decay_every < 1 or self.lr_decay_factor <= 0:
            raise ValueError("invalid learning-rate schedule")
        if self.strategy not in ("none", "noise_inject", "embedding_shift"):
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.strategy == "noise_inject" and self.noise is None:
            raise ValueError("strategy noise_inject requires a NoiseConfig")
        if self.strategy == "embedding_shift" and self.gap is None:
            raise ValueError("strategy embedding_shift requires a gap vector")


@dataclass
class TrainReport:
    epoch_losses: list[float]
    lr_trace: list[float]
    wall_time_s: float
    checkpoint_path: str | None = None
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "format_version": 1,
            "kind": "train_report",
            "epoch_losses": self.epoch_losses,
            "lr_trace": self.lr_trace,
            "wall_time_s": self.wall_time_s,
            "checkpoint_path": self.checkpoint_path,
            "config": self.config,
        }


def lr_at(epoch: int, cfg: TrainConfig) -> float:
    """Learning rate for a 1-indexed epoch.

    Linear ramp to peak_lr over the warmup epochs, then one multiplication by
    lr_decay_factor each time lr_decay_every further epochs have elapsed
    (i.e. at epochs warmup+every, warmup+2*every, ...).
    """
    if not 1 <= epoch <= cfg.epochs:
        raise ValueError(f"epoch {epoch} out of range 1..{cfg.epochs}")
    if epoch <= cfg.warmup_epochs:
        return cfg.peak_lr * epoch / cfg.warmup_epochs
    decays = (epoch - cfg.warmup_epochs) // cfg.lr_decay_every
    return cfg.peak_lr * cfg.lr_decay_factor ** decays


def _pad_batch(encoded: list[tuple[int, ...]], idx: np.ndarray):
    """(input_ids, labels, mask) padded to the longest sequence in the batch."""
    seqs = [encoded[i] for i in idx]
    width = max(len(s) for s in seqs)
    labels = np.full((len(seqs), width), PAD, dtype=np.int64)
    inputs = np.full((len(seqs), width), PAD, dtype=np.int64)
    for r, s in enumerate(seqs):
        labels[r, : len(s)] = s
        inputs[r, 0] = BOS
        inputs[r, 1 : len(s)] = s[:-1]
    mask = (labels != PAD).astype(np.float64)
    return inputs, labels, mask


class AdamState:
    """Classic Adam with bias correction; weight decay off unless asked for."""

    def __init__(self, params: dict[str, np.ndarray], cfg: TrainConfig):
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0
        self.cfg = cfg

    def update(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray], lr: float):
        cfg = self.cfg
        if cfg.max_grad_norm is not None:
            total = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
            if total > cfg.max_grad_norm:
                scale = cfg.max_grad_norm / total
                for g in grads.values():
                    g *= scale
        self.t += 1
        c1 = 1.0 - cfg.adam_beta1 ** self.t
        c2 = 1.0 - cfg.adam_beta2 ** self.t
        for name, p in params.items():
            g = grads[name]
            if cfg.weight_decay:
                g = g + cfg.weight_decay * p
            m = self.m[name]
            v = self.v[name]
            m *= cfg.adam_beta1
            m += (1.0 - cfg.adam_beta1) * g
            v *= cfg.adam_beta2
            v += (1.0 - cfg.adam_beta2) * (g * g)
            p -= lr * (m / c1) / (np.sqrt(v / c2) + cfg.adam_eps)


def train(corpus: TextCorpus, dec: PrefixDecoder, cfg: TrainConfig) -> TrainReport:
    """Fit the decoder to reconstruct captions from (possibly perturbed) text
    embeddings. Deterministic given cfg.seed; mutates dec.params in place.
    """
    t0 = time.perf_counter()
    vocab: Vocabulary = dec.vocab
    encoded = [vocab.encode(c, max_len=dec.cfg.max_len).ids for c in corpus.captions]
    Z = corpus.embeddings.matrix
    n = Z.shape[0]

    if cfg.strategy == "embedding_shift" and np.any(cfg.gap.values != 0.0):
        Z = Z + cfg.gap.values    # zero gap degenerates to strategy "none" bitwise
    sigma = cfg.noise.sigma if (cfg.strategy == "noise_inject" and cfg.noise) else 0.0

    perm_rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, 1)))
    optim = AdamState(dec.params, cfg)
    epoch_losses: list[float] = []
    lr_trace: list[float] = []

    for epoch in range(1, cfg.epochs + 1):
        lr = lr_at(epoch, cfg)
        lr_trace.append(lr)
        perm = perm_rng.permutation(n)
        if sigma > 0.0:
            # one fresh draw per example per epoch (draw counter = epoch)
            epoch_noise = np.random.default_rng(
                np.random.SeedSequence((cfg.noise.seed, epoch))
            ).normal(0.0, sigma, size=Z.shape)
        loss_sum = 0.0
        token_sum = 0
        for b, start in enumerate(range(0, n, cfg.batch_size)):
            idx = perm[start : start + cfg.batch_size]
            Zb = Z[idx]
            if sigma > 0.0:
                Zb = Zb + epoch_noise[idx]
            inputs, labels, mask = _pad_batch(encoded, idx)
            mapper = dec.mapper
            prefix, mcache = mapper.forward(Zb, want_cache=True)
            logits, cache = lm_forward(dec.params, dec.cfg, prefix, inputs, want_cache=True)
            loss, n_tok, dlogits = ce_loss_and_grad(logits, labels, mask)
            if not np.isfinite(loss):
                raise TrainingDiverged(epoch, b, loss)
            grads = {k: np.zeros_like(v) for k, v in dec.params.items()}
            dprefix = lm_backward(dec.params, dec.cfg, cache, dlogits, grads)
            mgrads, _ = mapper.backward(dprefix, mcache)
            for k, g in mgrads.items():
                grads[k] += g
            optim.update(dec.params, grads, lr)
            loss_sum += loss
            token_sum += n_tok
        epoch_losses.append(loss_sum / token_sum)

    report = TrainReport(
        epoch_losses=epoch_losses,
        lr_trace=lr_trace,
        wall_time_s=time.perf_counter() - t0,
        config={
            "epochs": cfg.epochs,
            "batch_size": cfg.batch_size,
            "peak_lr": cfg.peak_lr,
            "warmup_epochs": cfg.warmup_epochs,
            "lr_decay_factor": cfg.lr_decay_factor,
            "lr_decay_every": cfg.lr_decay_every,
            "strategy": cfg.strategy,
            "sigma": sigma if cfg.strategy == "noise_inject" else None,
            "noise_seed": cfg.noise.seed if cfg.noise else None,
            "seed": cfg.seed,
            "weight_decay": cfg.weight_decay,
            "max_grad_norm": cfg.max_grad_norm,
            "adam": [cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps],
        },
    )
    return report
