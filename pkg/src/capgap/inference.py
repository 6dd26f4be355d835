"""Decoding an audio embedding: directly, via its nearest text neighbor, or
via a softmax-weighted projection onto a memory of text embeddings.

The memory is an exact linear scan — at the corpus sizes this toolkit
targets (<= ~1e5 captions) brute force is both fastest to verify and fast
enough, and the argmax ties are resolved deterministically (lowest index).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .decoder import PrefixDecoder, greedy_decode
from .embeddings import Embedding, EmbeddingSet, l2_normalize

__all__ = [
    "Memory",
    "ProjectionConfig",
    "decode_direct",
    "nearest_neighbor",
    "decode_nn",
    "projection_weights",
    "project",
    "decode_projection",
]

_NORM_EPS = 1e-12


@dataclass(eq=False)
class Memory:
    """Bank of text embeddings from the target training set, with captions."""

    embeddings: EmbeddingSet
    captions: list[str]

    def __post_init__(self):
        if len(self.embeddings) == 0:
            raise ValueError("memory must hold at least one embedding")
        if len(self.embeddings) != len(self.captions):
            raise ValueError(
                f"memory embeddings ({len(self.embeddings)}) and captions "
                f"({len(self.captions)}) must align"
            )
        if self.embeddings.modality != "text":
            raise ValueError("memory must hold text-modality embeddings")

    def __len__(self) -> int:
        return len(self.captions)

    @cached_property
    def _unit_rows(self) -> np.ndarray:
        mat = self.embeddings.matrix
        norms = np.linalg.norm(mat, axis=1, keepdims=True)
        if np.any(norms <= _NORM_EPS):
            raise ValueError("memory contains a zero-norm embedding")
        return mat / norms


@dataclass(frozen=True)
class ProjectionConfig:
    """Softmax temperature and the optional re-normalization of the result.

    renormalize=None resolves from the memory's `normalized` flag, keeping
    the projected prefix on the manifold the decoder trained on.
    """

    tau: float = 0.01
    renormalize: bool | None = None

    def __post_init__(self):
        if not np.isfinite(self.tau) or self.tau <= 0:
            raise ValueError(f"tau must be finite and > 0, got {self.tau}")


def _query_vector(z_a) -> np.ndarray:
    vec = z_a.values if isinstance(z_a, Embedding) else np.asarray(z_a, dtype=np.float64)
    norm = float(np.linalg.norm(vec))
    if norm <= _NORM_EPS:
        raise ValueError("query embedding has zero norm")
    return vec / norm


def _similarities(z_a, mem: Memory) -> np.ndarray:
    """Cosine similarity of the query against every memory entry (length N)."""
    q = _query_vector(z_a)
    if q.shape[0] != mem.embeddings.dim:
        raise ValueError(
            f"query dimension {q.shape[0]} does not match memory dimension {mem.embeddings.dim}"
        )
    return mem._unit_rows @ q


def decode_direct(dec: PrefixDecoder, z_a) -> str:
    """Greedy-decode straight from the audio embedding."""
    vec = z_a.values if isinstance(z_a, Embedding) else np.asarray(z_a, dtype=np.float64)
    return greedy_decode(dec, dec.encode_prefix(vec)).raw


def nearest_neighbor(z_a, mem: Memory) -> tuple[int, float]:
    """Exact argmax of cosine similarity over the memory; ties -> lowest index."""
    sims = _similarities(z_a, mem)
    idx = int(np.argmax(sims))
    return idx, float(sims[idx])


def decode_nn(dec: PrefixDecoder, z_a, mem: Memory) -> str:
    """Greedy-decode from the most cosine-similar memory text embedding."""
    idx, _ = nearest_neighbor(z_a, mem)
    return greedy_decode(dec, dec.encode_prefix(mem.embeddings.matrix[idx])).raw


def projection_weights(z_a, mem: Memory, cfg: ProjectionConfig) -> np.ndarray:
    """Softmax over similarity/tau; positive, sums to 1, overflow-safe."""
    sims = _similarities(z_a, mem)
    logits = sims / cfg.tau
    e = np.exp(logits - logits.max())
    return e / e.sum()


def project(z_a, mem: Memory, cfg: ProjectionConfig) -> Embedding:
    """Weighted combination of memory embeddings; a point in their convex hull."""
    w = projection_weights(z_a, mem, cfg)
    combined = Embedding(w @ mem.embeddings.matrix, id="projection")
    renorm = mem.embeddings.normalized if cfg.renormalize is None else cfg.renormalize
    return l2_normalize(combined) if renorm else combined


def decode_projection(dec: PrefixDecoder, z_a, mem: Memory, cfg: ProjectionConfig) -> str:
    """Greedy-decode from the projection of the audio embedding onto the memory."""
    return greedy_decode(dec, dec.encode_prefix(project(z_a, mem, cfg).values)).raw
