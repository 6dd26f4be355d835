"""Vector primitives shared by every other module.

All math runs in float64 regardless of the precision of the source file,
and every reduction walks the items in their stored order with compensated
(Kahan) summation, so results are bit-reproducible for a given input.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

__all__ = [
    "Embedding",
    "EmbeddingSet",
    "GapVector",
    "cosine_similarity",
    "l2_normalize",
    "centroid",
    "gap_vector",
    "linf_norm",
    "kahan_mean",
]

_NORM_EPS = 1e-12


def _as_vector(values) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"embedding must be a nonempty 1-D vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("embedding contains non-finite entries")
    return arr


@dataclass(frozen=True, eq=False)
class Embedding:
    """A single vector in the shared audio/text space, keyed by an opaque id."""

    values: np.ndarray
    id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "values", _as_vector(self.values))

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])


@dataclass(eq=False)
class EmbeddingSet:
    """Ordered, id-unique collection of same-dimension embeddings.

    `normalized` is carried as file metadata (it is asserted by the writer,
    trusted by readers) and drives the default renormalization behaviour of
    projection decoding.
    """

    dim: int
    items: list[Embedding] = field(default_factory=list)
    modality: str = "text"
    normalized: bool = False

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError(f"embedding dimension must be >= 2, got {self.dim}")
        if self.modality not in ("audio", "text"):
            raise ValueError(f"modality must be 'audio' or 'text', got {self.modality!r}")
        seen: set[str] = set()
        for item in self.items:
            if item.dim != self.dim:
                raise ValueError(
                    f"embedding {item.id!r} has dimension {item.dim}, set expects {self.dim}"
                )
            if item.id in seen:
                raise ValueError(f"duplicate embedding id {item.id!r}")
            seen.add(item.id)
        if self.normalized:
            for item in self.items:
                norm = float(np.linalg.norm(item.values))
                if abs(norm - 1.0) > 1e-6:
                    raise ValueError(
                        f"embedding {item.id!r} flagged normalized but has L2 norm {norm!r}"
                    )

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    @cached_property
    def matrix(self) -> np.ndarray:
        """(N, dim) float64 matrix in item order. Cached; treat the set as frozen."""
        if not self.items:
            return np.zeros((0, self.dim))
        return np.stack([item.values for item in self.items])

    @cached_property
    def ids(self) -> list[str]:
        return [item.id for item in self.items]

    @classmethod
    def from_matrix(cls, matrix, ids=None, modality="text", normalized=False) -> "EmbeddingSet":
        matrix = np.asarray(matrix, dtype=np.float64)
        if ids is None:
            ids = [f"{modality[0]}{i:06d}" for i in range(matrix.shape[0])]
        items = [Embedding(row, id=i) for row, i in zip(matrix, ids)]
        return cls(dim=int(matrix.shape[1]), items=items, modality=modality, normalized=normalized)


@dataclass(frozen=True, eq=False)
class GapVector:
    """Difference between the audio-centroid and text-centroid, plus provenance."""

    values: np.ndarray
    n_pairs: int = 0

    def __post_init__(self):
        object.__setattr__(self, "values", _as_vector(self.values))

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])


def _check_same_dim(a: Embedding, b: Embedding) -> None:
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")


def cosine_similarity(a: Embedding, b: Embedding) -> float:
    """Cosine of the angle between two embeddings, in [-1, 1].

    Zero-norm inputs are an error rather than a silent NaN.
    """
    _check_same_dim(a, b)
    na = float(np.linalg.norm(a.values))
    nb = float(np.linalg.norm(b.values))
    if na <= _NORM_EPS or nb <= _NORM_EPS:
        raise ValueError("cosine similarity is undefined for zero-norm embeddings")
    sim = float(np.dot(a.values, b.values) / (na * nb))
    return float(np.clip(sim, -1.0, 1.0))


def l2_normalize(a: Embedding) -> Embedding:
    """Rescale to unit L2 norm, preserving direction. Zero vectors are an error."""
    norm = float(np.linalg.norm(a.values))
    if norm <= _NORM_EPS:
        raise ValueError("cannot normalize a zero-norm embedding")
    return Embedding(a.values / norm, id=a.id)


def kahan_mean(matrix: np.ndarray) -> np.ndarray:
    """Coordinate-wise mean of the rows via compensated summation in row order.

    Fixed sequential order: parallel or pairwise reduction must not replace
    this path (determinism contract).
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    total = np.zeros(matrix.shape[1])
    comp = np.zeros(matrix.shape[1])
    for row in matrix:
        y = row - comp
        t = total + y
        comp = (t - total) - y
        total = t
    return total / matrix.shape[0]


def centroid(s: EmbeddingSet) -> Embedding:
    """Coordinate-wise arithmetic mean of a nonempty set, in stored item order."""
    if len(s) == 0:
        raise ValueError("centroid of an empty embedding set is undefined")
    return Embedding(kahan_mean(s.matrix), id=f"centroid[{s.modality}]")


def gap_vector(audio: EmbeddingSet, text: EmbeddingSet) -> GapVector:
    """Difference between the centroids of an audio set and a text set.

    Pairing is not required: only the two centroids enter. `n_pairs` records
    min(|audio|, |text|) for provenance.
    """
    if len(audio) == 0 or len(text) == 0:
        raise ValueError("gap vector requires two nonempty embedding sets")
    if audio.dim != text.dim:
        raise ValueError(f"dimension mismatch: audio {audio.dim} vs text {text.dim}")
    delta = centroid(audio).values - centroid(text).values
    return GapVector(delta, n_pairs=min(len(audio), len(text)))


def linf_norm(a: Embedding) -> float:
    """Largest absolute coordinate."""
    return float(np.max(np.abs(a.values)))
