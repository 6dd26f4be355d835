"""Corpus caption metrics: BLEU-1..4, ROUGE-L, CIDEr-D.

Definitions pinned here so numbers are comparable:
  * BLEU is corpus-level with NO smoothing: geometric mean of clipped
    modified n-gram precisions, brevity penalty exp(1 - r/c) when c < r,
    reference length = closest to the candidate (ties -> shorter).
  * ROUGE-L is the mean over pairs of the max-over-references LCS F-measure
    with beta = 1.2.
  * CIDEr is CIDEr-D: TF-IDF n-gram vectors (n = 1..4), clipped cosine per
    n, length-difference Gaussian penalty (sigma = 6), x10 scale, document
    frequencies taken from the reference corpus under evaluation.

METEOR / SPICE / SPIDEr need external linguistic resources and are not
computed; report fields carry None so table output can print "n/a".
"""

from __future__ import annotations

import math
import warnings
from collections import Counter
from dataclasses import dataclass

__all__ = ["EvalPair", "MetricReport", "bleu", "rouge_l", "cider", "evaluate"]

_ROUGE_BETA = 1.2
_CIDER_SIGMA = 6.0
_CIDER_MAX_N = 4


@dataclass(frozen=True)
class EvalPair:
    """One candidate token list against >= 1 reference token lists."""

    candidate: tuple[str, ...]
    references: tuple[tuple[str, ...], ...]

    def __post_init__(self):
        if len(self.references) == 0:
            raise ValueError("an evaluation pair needs at least one reference")

    @classmethod
    def from_strings(cls, candidate: list[str], references: list[list[str]]) -> "EvalPair":
        return cls(tuple(candidate), tuple(tuple(r) for r in references))


@dataclass
class MetricReport:
    bleu1: float
    bleu2: float
    bleu3: float
    bleu4: float
    rougeL: float
    cider: float
    n_pairs: int

    def to_dict(self) -> dict:
        return {
            "format_version": 1,
            "kind": "metric_report",
            "n_pairs": self.n_pairs,
            "bleu1": self.bleu1,
            "bleu2": self.bleu2,
            "bleu3": self.bleu3,
            "bleu4": self.bleu4,
            "meteor": None,
            "rougeL": self.rougeL,
            "cider": self.cider,
            "spice": None,
            "spider": None,
        }


def _ngrams(tokens, n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu(pairs: list[EvalPair], n: int) -> float:
    """Corpus-level BLEU-n in [0, 1]; any empty clipped count zeroes the score."""
    if not 1 <= n <= 4:
        raise ValueError(f"bleu order must be 1..4, got {n}")
    if not pairs:
        raise ValueError("bleu needs at least one pair")
    correct = [0] * n
    guess = [0] * n
    cand_len = 0
    ref_len = 0
    for pair in pairs:
        c = len(pair.candidate)
        cand_len += c
        # closest reference length; ties prefer the shorter reference
        ref_len += min((abs(len(r) - c), len(r)) for r in pair.references)[1]
        for k in range(1, n + 1):
            counts = _ngrams(pair.candidate, k)
            if not counts:
                continue
            max_ref = Counter()
            for ref in pair.references:
                for gram, cnt in _ngrams(ref, k).items():
                    if cnt > max_ref[gram]:
                        max_ref[gram] = cnt
            guess[k - 1] += max(0, c - k + 1)
            correct[k - 1] += sum(min(cnt, max_ref[gram]) for gram, cnt in counts.items())
    if any(g == 0 or c == 0 for g, c in zip(guess, correct)):
        return 0.0
    log_precision = sum(math.log(c / g) for c, g in zip(correct, guess)) / n
    bp = 1.0 if cand_len > ref_len else math.exp(1.0 - ref_len / max(cand_len, 1))
    return bp * math.exp(log_precision)


def _lcs_len(a, b) -> int:
    # standard O(|a|*|b|) dynamic program
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(pairs: list[EvalPair]) -> float:
    """Mean over pairs of the best F-measure (beta = 1.2) across references."""
    if not pairs:
        raise ValueError("rouge_l needs at least one pair")
    beta2 = _ROUGE_BETA ** 2
    scores = []
    for pair in pairs:
        best = 0.0
        for ref in pair.references:
            lcs = _lcs_len(pair.candidate, ref)
            if lcs == 0:
                continue
            p = lcs / len(pair.candidate)
            r = lcs / len(ref)
            f = (1 + beta2) * p * r / (r + beta2 * p)
            if f > best:
                best = f
        scores.append(best)
    return sum(scores) / len(scores)


def cider(pairs: list[EvalPair]) -> float:
    """Corpus mean CIDEr-D score (>= 0, 10 is the per-pair maximum)."""
    if not pairs:
        raise ValueError("cider needs at least one pair")
    if len(pairs) < 2:
        warnings.warn("cider over a single pair: document frequencies are degenerate",
                      stacklevel=2)
    # document frequency: number of pairs whose reference set contains the n-gram
    doc_freq: Counter = Counter()
    for pair in pairs:
        seen = set()
        for ref in pair.references:
            for k in range(1, _CIDER_MAX_N + 1):
                seen.update(_ngrams(ref, k).keys())
        doc_freq.update(seen)
    log_n = math.log(len(pairs))

    def tfidf(tokens):
        vecs = []
        norms = []
        for k in range(1, _CIDER_MAX_N + 1):
            vec = {}
            sq = 0.0
            for gram, cnt in _ngrams(tokens, k).items():
                idf = log_n - math.log(max(1.0, doc_freq[gram]))
                w = cnt * idf
                vec[gram] = w
                sq += w * w
            vecs.append(vec)
            norms.append(math.sqrt(sq))
        return vecs, norms

    scores = []
    for pair in pairs:
        hyp_vecs, hyp_norms = tfidf(pair.candidate)
        total = 0.0
        for ref in pair.references:
            ref_vecs, ref_norms = tfidf(ref)
            delta = float(len(pair.candidate) - len(ref))
            penalty = math.exp(-(delta ** 2) / (2 * _CIDER_SIGMA ** 2))
            for k in range(_CIDER_MAX_N):
                if hyp_norms[k] == 0.0 or ref_norms[k] == 0.0:
                    continue
                dot = sum(
                    min(w, ref_vecs[k].get(gram, 0.0)) * ref_vecs[k].get(gram, 0.0)
                    for gram, w in hyp_vecs[k].items()
                )
                total += penalty * dot / (hyp_norms[k] * ref_norms[k])
        scores.append(10.0 * total / (len(pair.references) * _CIDER_MAX_N))
    return sum(scores) / len(scores)


def evaluate(pairs: list[EvalPair]) -> MetricReport:
    """All implemented metrics over one evaluation corpus."""
    return MetricReport(
        bleu1=bleu(pairs, 1),
        bleu2=bleu(pairs, 2),
        bleu3=bleu(pairs, 3),
        bleu4=bleu(pairs, 4),
        rougeL=rouge_l(pairs),
        cider=cider(pairs),
        n_pairs=len(pairs),
    )
