import pytest

from capgap.decoder import DecoderConfig, PrefixDecoder
from capgap.synth import SynthConfig, synth_corpus
from capgap.vocab import SPECIALS, Vocabulary


@pytest.fixture(scope="session")
def small_corpus():
    """50 grouped captions with a planted gap; shared across fast tests."""
    return synth_corpus(SynthConfig(d=16, vocab_size=40, n_captions=50,
                                    captions_per_group=5, gap_norm=0.4,
                                    audio_noise_std=0.03, seed=5))


@pytest.fixture()
def tiny_vocab():
    return Vocabulary(tokens=tuple(SPECIALS) + ("a", "dog", "barks", "runs"))


@pytest.fixture()
def tiny_decoder(tiny_vocab):
    cfg = DecoderConfig(d=4, m=8, heads=2, layers=1, k=2, max_len=6)
    return PrefixDecoder.build(cfg, tiny_vocab, seed=3)


def make_decoder(vocab, d=16, m=16, seed=0, **kw):
    cfg = DecoderConfig(d=d, m=m, heads=kw.pop("heads", 2), layers=kw.pop("layers", 1),
                        k=kw.pop("k", 2), max_len=kw.pop("max_len", 8), **kw)
    return PrefixDecoder.build(cfg, vocab, seed=seed)
