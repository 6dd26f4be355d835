"""Word-level tokenizer and vocabulary.

One tokenization truth for the whole toolkit: training, decoding and metric
computation all run on the same lowercased, punctuation-stripped,
whitespace-split tokens.
"""

from __future__ import annotations

import string
from collections import Counter
from dataclasses import dataclass, field

__all__ = ["BOS", "EOS", "PAD", "UNK", "SPECIALS", "tokenize", "Vocabulary", "TokenSeq", "build_vocab"]

BOS, EOS, PAD, UNK = 0, 1, 2, 3
SPECIALS = ["<bos>", "<eos>", "<pad>", "<unk>"]

_PUNCT_TABLE = str.maketrans("", "", string.punctuation)


def tokenize(text: str) -> list[str]:
    """Lowercase, strip punctuation, split on whitespace."""
    return text.lower().translate(_PUNCT_TABLE).split()


@dataclass(frozen=True)
class TokenSeq:
    """Encoded token ids for one caption, plus the source string.

    Sequences produced by `Vocabulary.encode` end with EOS; sequences coming
    out of greedy decoding may instead be truncated at the length cap.
    """

    ids: tuple[int, ...]
    raw: str = ""

    def __len__(self) -> int:
        return len(self.ids)


@dataclass(frozen=True)
class Vocabulary:
    """Token table with the four specials pinned at indices 0-3."""

    tokens: tuple[str, ...]
    index: dict[str, int] = field(repr=False, compare=False, default_factory=dict)

    def __post_init__(self):
        if tuple(self.tokens[:4]) != tuple(SPECIALS):
            raise ValueError(f"vocabulary must start with the specials {SPECIALS}")
        if len(set(self.tokens)) != len(self.tokens):
            raise ValueError("vocabulary tokens must be unique")
        object.__setattr__(self, "index", {t: i for i, t in enumerate(self.tokens)})

    @property
    def size(self) -> int:
        return len(self.tokens)

    def encode(self, text: str, max_len: int | None = None) -> TokenSeq:
        """Token ids for a caption, unknown words mapped to UNK, EOS appended."""
        ids = [self.index.get(tok, UNK) for tok in tokenize(text)]
        ids.append(EOS)
        if max_len is not None and len(ids) > max_len:
            raise ValueError(f"caption encodes to {len(ids)} tokens, max_len is {max_len}")
        return TokenSeq(ids=tuple(ids), raw=text)

    def decode(self, ids) -> str:
        """Space-joined surface tokens; specials are dropped."""
        return " ".join(self.tokens[i] for i in ids if i >= len(SPECIALS))


def build_vocab(captions: list[str], min_count: int = 1) -> Vocabulary:
    """Vocabulary over a caption corpus.

    Words below min_count fall through to UNK. Ordering is deterministic:
    count descending, then lexicographic.
    """
    if not captions:
        raise ValueError("cannot build a vocabulary from an empty corpus")
    counts = Counter()
    for caption in captions:
        counts.update(tokenize(caption))
    kept = sorted(
        (tok for tok, c in counts.items() if c >= min_count),
        key=lambda tok: (-counts[tok], tok),
    )
    return Vocabulary(tokens=tuple(SPECIALS) + tuple(kept))
