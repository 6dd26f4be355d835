"""Training-time modality-gap bridging: noise-width estimation, Gaussian
noise injection, and constant embedding shift.

The noise width sigma is read off caption groups (several captions that
describe the same audio): it is the mean L-infinity norm of the pairwise
differences between the group's caption embeddings, pooled over all
unordered pairs of all groups.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .embeddings import Embedding, GapVector, linf_norm

__all__ = [
    "NoiseConfig",
    "CaptionGroup",
    "estimate_sigma",
    "inject_noise",
    "noise_rng",
    "shift_embedding",
]


@dataclass(frozen=True)
class NoiseConfig:
    """Per-coordinate std of the injected Gaussian noise, plus its seed.

    `sigma` is a standard deviation; callers holding a variance should pass
    `NoiseConfig.from_variance`.
    """

    sigma: float
    seed: int = 0

    def __post_init__(self):
        if not np.isfinite(self.sigma) or self.sigma < 0:
            raise ValueError(f"sigma must be finite and >= 0, got {self.sigma}")

    @classmethod
    def from_variance(cls, sigma_sq: float, seed: int = 0) -> "NoiseConfig":
        if not np.isfinite(sigma_sq) or sigma_sq < 0:
            raise ValueError(f"sigma^2 must be finite and >= 0, got {sigma_sq}")
        return cls(sigma=float(np.sqrt(sigma_sq)), seed=seed)


@dataclass(frozen=True, eq=False)
class CaptionGroup:
    """Embeddings of captions that all describe the same audio clip."""

    group_id: str
    embeddings: list[Embedding]


def estimate_sigma(groups: list[CaptionGroup]) -> float:
    """Mean L-inf norm of embedding differences within caption groups.

    Every unordered pair inside a group contributes one difference; the mean
    pools the pairs of all groups. Groups with fewer than two members are
    skipped with a warning; if nothing is left, that is an error.
    """
    if not groups:
        raise ValueError("sigma estimation needs at least one caption group")
    pair_norms: list[float] = []
    for group in groups:
        if len(group.embeddings) < 2:
            warnings.warn(
                f"caption group {group.group_id!r} has fewer than 2 embeddings; skipped",
                stacklevel=2,
            )
            continue
        dims = {e.dim for e in group.embeddings}
        if len(dims) != 1:
            raise ValueError(f"caption group {group.group_id!r} mixes embedding dimensions {dims}")
        embs = group.embeddings
        for i in range(len(embs)):
            for j in range(i + 1, len(embs)):
                pair_norms.append(linf_norm(Embedding(embs[i].values - embs[j].values)))
    if not pair_norms:
        raise ValueError("all caption groups were skipped; cannot estimate sigma")
    return float(np.mean(pair_norms))


def noise_rng(cfg: NoiseConfig, counter: int) -> np.random.Generator:
    """Deterministic generator for draw number `counter` of a noise stream.

    Concurrent consumers must each own their own counter range (e.g. stream
    id = worker index) so draws never interleave nondeterministically.
    """
    return np.random.default_rng(np.random.SeedSequence((cfg.seed, counter)))


def inject_noise(z_t: Embedding, cfg: NoiseConfig, counter: int = 0) -> Embedding:
    """Add i.i.d. zero-mean Gaussian noise with per-coordinate std cfg.sigma.

    Deterministic given (cfg.seed, counter). sigma == 0 returns the input
    bit-for-bit.
    """
    if cfg.sigma == 0.0:
        return z_t
    noise = noise_rng(cfg, counter).normal(0.0, cfg.sigma, size=z_t.dim)
    return Embedding(z_t.values + noise, id=z_t.id)


def shift_embedding(z_t: Embedding, gap: GapVector) -> Embedding:
    """Translate a text embedding by the gap vector (coordinate-wise add)."""
    if z_t.dim != gap.dim:
        raise ValueError(f"dimension mismatch: embedding {z_t.dim} vs gap {gap.dim}")
    return Embedding(z_t.values + gap.values, id=z_t.id)
