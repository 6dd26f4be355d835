"""Synthetic paired text/audio embedding corpus with a planted, controllable
modality gap.

Captions come from a tiny template grammar ("a <adj> <noun> <verb> <adverb>")
so the decoder can memorize them in seconds; the text encoder is the
L2-normalized mean of fixed per-word Gaussian code vectors, and the audio
encoder is the group centroid plus a constant gap direction plus isotropic
noise. Realism is deliberately traded for verifiability: the gap is exactly
recoverable, captions sharing words get similar embeddings, and everything
is a pure function of the seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .embeddings import Embedding, EmbeddingSet, kahan_mean
from .gap import CaptionGroup
from .inference import Memory
from .training import TextCorpus
from .vocab import tokenize

__all__ = ["SynthConfig", "PairedCorpus", "synth_text_encoder", "synth_audio_encoder", "synth_corpus"]

_DETERMINER = "a"
_ADJECTIVES = [
    "quiet", "loud", "gentle", "rapid", "steady", "faint", "deep", "bright",
    "hollow", "sharp", "soft", "rough", "distant", "noisy", "calm", "heavy",
    "thin", "warm", "cold", "slow", "busy", "wild", "clear", "dull",
]
_NOUNS = [
    "dog", "engine", "bird", "river", "crowd", "train", "bell", "wind",
    "clock", "horse", "siren", "drum", "door", "storm", "child", "machine",
    "guitar", "owl", "truck", "kettle", "frog", "fountain", "saw", "fire",
]
_VERBS = [
    "barks", "hums", "sings", "flows", "murmurs", "rattles", "rings", "howls",
    "ticks", "gallops", "wails", "beats", "creaks", "rumbles", "laughs", "whirs",
    "strums", "hoots", "roars", "whistles", "croaks", "splashes", "buzzes", "crackles",
]
_ADVERBS = [
    "softly", "loudly", "slowly", "quickly", "steadily", "faintly", "nearby", "repeatedly",
    "gently", "sharply", "evenly", "wildly", "briefly", "constantly", "outside", "rhythmically",
    "upstairs", "overhead", "somewhere", "intermittently", "twice", "endlessly", "early", "late",
]

# rng stream tags (second entry of the seed sequence)
_CODES, _AUDIO, _GAPDIR, _CAPTION, _GROUP = 2, 3, 4, 5, 6


@dataclass(frozen=True)
class SynthConfig:
    d: int = 32
    vocab_size: int = 60
    n_captions: int = 500
    captions_per_group: int = 5
    caption_len: tuple[int, int] = (3, 5)   # surface words incl. the determiner
    gap_norm: float = 0.5                   # L2 of the planted gap direction
    audio_noise_std: float = 0.05
    seed: int = 0
    paraphrase_diversity: float = 1.0       # P(resample adj/adverb within a group)
    normalize_audio: bool = True            # False = pre-normalization variant

    def __post_init__(self):
        if self.d < 2:
            raise ValueError("embedding dimension must be >= 2")
        if self.n_captions < 10:
            raise ValueError("n_captions must be >= 10")
        if self.captions_per_group < 1:
            raise ValueError("captions_per_group must be >= 1")
        if self.vocab_size < 9:
            raise ValueError("vocab_size must be >= 9 (determiner + two words per class)")
        lo, hi = self.caption_len
        if not (3 <= lo <= hi <= 5):
            raise ValueError("caption_len range must lie within [3, 5]")
        for name in ("gap_norm", "audio_noise_std", "paraphrase_diversity"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and >= 0")


def _extend(bank: list[str], n: int, stem: str) -> list[str]:
    words = list(bank[:n])
    words += [f"{stem}{i}" for i in range(len(words), n)]
    return words


@lru_cache(maxsize=32)
def _lexicon(vocab_size: int) -> dict[str, list[str]]:
    """Word banks sized to the requested vocabulary (determiner + 4 classes)."""
    usable = vocab_size - 1
    base, rem = divmod(usable, 4)
    sizes = [base + (1 if i < rem else 0) for i in range(4)]
    return {
        "adj": _extend(_ADJECTIVES, sizes[0], "adj"),
        "noun": _extend(_NOUNS, sizes[1], "noun"),
        "verb": _extend(_VERBS, sizes[2], "verb"),
        "adv": _extend(_ADVERBS, sizes[3], "adv"),
    }


@lru_cache(maxsize=32)
def _word_codes(seed: int, d: int, vocab_size: int) -> dict[str, np.ndarray]:
    """Fixed Gaussian code vector per word, seeded by the word's table index."""
    lex = _lexicon(vocab_size)
    words = [_DETERMINER] + lex["adj"] + lex["noun"] + lex["verb"] + lex["adv"]
    rng = np.random.default_rng(np.random.SeedSequence((seed, _CODES)))
    codes = rng.normal(size=(len(words), d))
    return {w: codes[i] for i, w in enumerate(words)}


def _gap_direction(cfg: SynthConfig) -> np.ndarray:
    """Unit direction of the planted gap, drawn once per corpus seed."""
    rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, _GAPDIR)))
    v = rng.normal(size=cfg.d)
    return v / np.linalg.norm(v)


def synth_text_encoder(caption: str, cfg: SynthConfig) -> Embedding:
    """Normalized mean of the caption's word codes.

    Captions with overlapping words land near each other, mimicking a
    semantic text encoder.
    """
    tokens = tokenize(caption)
    if not tokens:
        raise ValueError("cannot encode an empty caption")
    codes = _word_codes(cfg.seed, cfg.d, cfg.vocab_size)
    try:
        stacked = np.stack([codes[t] for t in tokens])
    except KeyError as exc:
        raise ValueError(f"word {exc.args[0]!r} is not in the synthetic vocabulary") from None
    mean = kahan_mean(stacked)
    return Embedding(mean / np.linalg.norm(mean))


def synth_audio_encoder(group_captions: list[str], cfg: SynthConfig,
                        group_index: int = 0) -> Embedding:
    """Audio stand-in for one caption group: text centroid + planted gap + noise.

    L2-normalized unless cfg.normalize_audio is False (the pre-normalization
    variant keeps the planted offset exactly recoverable).
    """
    if not group_captions:
        raise ValueError("audio encoder needs a nonempty caption group")
    texts = np.stack([synth_text_encoder(c, cfg).values for c in group_captions])
    center = kahan_mean(texts)
    vec = center + cfg.gap_norm * _gap_direction(cfg)
    if cfg.audio_noise_std > 0:
        rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, _AUDIO, group_index)))
        vec = vec + rng.normal(0.0, cfg.audio_noise_std, size=cfg.d)
    if cfg.normalize_audio:
        vec = vec / np.linalg.norm(vec)
    return Embedding(vec)


@dataclass(eq=False)
class PairedCorpus:
    """Aligned captions, text embeddings, per-group audio embeddings, and the
    planted gap (ground truth, for tests only)."""

    ids: list[str]
    group_ids: list[str]
    captions: list[str]
    text_embeddings: EmbeddingSet
    audio_embeddings: EmbeddingSet
    planted_gap: np.ndarray

    def __post_init__(self):
        n = len(self.ids)
        if not (len(self.group_ids) == len(self.captions) == len(self.text_embeddings) == n):
            raise ValueError("caption-side fields must align")
        if self.text_embeddings.dim != self.audio_embeddings.dim:
            raise ValueError("text and audio dimensions must match")
        audio_ids = set(self.audio_embeddings.ids)
        if audio_ids != set(self.group_ids):
            raise ValueError("audio embeddings must cover exactly the caption groups")

    def text_side(self) -> TextCorpus:
        """The only view training is allowed to see."""
        return TextCorpus(ids=list(self.ids), group_ids=list(self.group_ids),
                          captions=list(self.captions), embeddings=self.text_embeddings)

    def caption_groups(self) -> list[CaptionGroup]:
        by_group: dict[str, list[Embedding]] = {}
        for gid, emb in zip(self.group_ids, self.text_embeddings):
            by_group.setdefault(gid, []).append(emb)
        return [CaptionGroup(group_id=g, embeddings=e) for g, e in by_group.items()]

    def references_by_group(self) -> dict[str, list[str]]:
        refs: dict[str, list[str]] = {}
        for gid, cap in zip(self.group_ids, self.captions):
            refs.setdefault(gid, []).append(cap)
        return refs

    def memory(self) -> Memory:
        return Memory(embeddings=self.text_embeddings, captions=list(self.captions))


def _make_caption(length: int, base: dict[str, str], lex: dict[str, list[str]],
                  rng: np.random.Generator, diversity: float) -> str:
    # draws are consumed identically for every diversity value, so corpora at
    # different diversities differ only in which slots keep the base words
    fresh_adj = lex["adj"][rng.integers(len(lex["adj"]))]
    fresh_adv = lex["adv"][rng.integers(len(lex["adv"]))]
    coin_adj, coin_adv = rng.random(), rng.random()
    adj = fresh_adj if coin_adj < diversity else base["adj"]
    adv = fresh_adv if coin_adv < diversity else base["adv"]
    use_adj_first = rng.random() < 0.5
    words = [_DETERMINER]
    if length >= 4 and use_adj_first:
        words.append(adj)
    words += [base["noun"], base["verb"]]
    if length == 5 or (length == 4 and not use_adj_first):
        words.append(adv)
    if length == 5 and not use_adj_first:
        words.insert(1, adj)
    return " ".join(words)


def synth_corpus(cfg: SynthConfig) -> PairedCorpus:
    """Deterministic corpus of grouped paraphrase captions and their embeddings."""
    lex = _lexicon(cfg.vocab_size)
    lo, hi = cfg.caption_len
    n_groups = (cfg.n_captions + cfg.captions_per_group - 1) // cfg.captions_per_group

    ids: list[str] = []
    group_ids: list[str] = []
    captions: list[str] = []
    ci = 0
    group_caption_lists: list[list[str]] = []
    for gi in range(n_groups):
        grng = np.random.default_rng(np.random.SeedSequence((cfg.seed, _GROUP, gi)))
        base = {
            "adj": lex["adj"][grng.integers(len(lex["adj"]))],
            "noun": lex["noun"][grng.integers(len(lex["noun"]))],
            "verb": lex["verb"][grng.integers(len(lex["verb"]))],
            "adv": lex["adv"][grng.integers(len(lex["adv"]))],
        }
        gid = f"g{gi:05d}"
        group_caps: list[str] = []
        for _ in range(min(cfg.captions_per_group, cfg.n_captions - ci)):
            crng = np.random.default_rng(np.random.SeedSequence((cfg.seed, _CAPTION, ci)))
            length = int(crng.integers(lo, hi + 1))
            caption = _make_caption(length, base, lex, crng, cfg.paraphrase_diversity)
            ids.append(f"c{ci:06d}")
            group_ids.append(gid)
            captions.append(caption)
            group_caps.append(caption)
            ci += 1
        group_caption_lists.append(group_caps)

    text_set = EmbeddingSet(
        dim=cfg.d,
        items=[Embedding(synth_text_encoder(c, cfg).values, id=i) for i, c in zip(ids, captions)],
        modality="text",
        normalized=True,
    )
    audio_set = EmbeddingSet(
        dim=cfg.d,
        items=[
            Embedding(synth_audio_encoder(caps, cfg, group_index=gi).values, id=f"g{gi:05d}")
            for gi, caps in enumerate(group_caption_lists)
        ],
        modality="audio",
        normalized=cfg.normalize_audio,
    )
    return PairedCorpus(
        ids=ids,
        group_ids=group_ids,
        captions=captions,
        text_embeddings=text_set,
        audio_embeddings=audio_set,
        planted_gap=cfg.gap_norm * _gap_direction(cfg),
    )
