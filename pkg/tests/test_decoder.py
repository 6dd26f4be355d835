import numpy as np
import pytest

from capgap.decoder import (DecoderConfig, MappingNetwork, PrefixDecoder, encode_prefix,
                            forward_logits, greedy_decode, nll_loss)
from capgap.embeddings import Embedding
from capgap.vocab import EOS, TokenSeq

from oracles import oracle_nll


def _identity_mapper(d, k, m):
    assert k * m == d
    return MappingNetwork(w1=np.eye(d), b1=np.zeros(d), w2=np.eye(d), b2=np.zeros(d),
                          k=k, m=m, activation="identity")


class TestEncodePrefix:
    def test_zero_mapper_gives_zero_prefix(self):
        mapper = MappingNetwork(w1=np.zeros((4, 4)), b1=np.zeros(4),
                                w2=np.zeros((4, 6)), b2=np.zeros(6), k=2, m=3)
        out = encode_prefix(Embedding(np.array([1.0, -2.0, 3.0, 4.0])), mapper)
        np.testing.assert_array_equal(out, np.zeros((2, 3)))

    def test_identity_mapper_reshapes(self):
        z = np.arange(6, dtype=float)
        out = encode_prefix(z, _identity_mapper(6, 2, 3))
        np.testing.assert_array_equal(out, z.reshape(2, 3))

    def test_dimension_mismatch(self):
        mapper = _identity_mapper(6, 2, 3)
        with pytest.raises(ValueError, match="dimension"):
            encode_prefix(np.ones(5), mapper)

    def test_jacobian_matches_finite_differences(self):
        rng = np.random.default_rng(0)
        d, h, k, m = 5, 4, 2, 3
        mapper = MappingNetwork(w1=rng.normal(size=(d, h)), b1=rng.normal(size=h),
                                w2=rng.normal(size=(h, k * m)), b2=rng.normal(size=k * m),
                                k=k, m=m)
        z = rng.normal(size=d)
        step = 1e-6
        jac_num = np.zeros((k * m, d))
        for j in range(d):
            zp, zm = z.copy(), z.copy()
            zp[j] += step
            zm[j] -= step
            jac_num[:, j] = (mapper(zp).ravel() - mapper(zm).ravel()) / (2 * step)
        # analytic jacobian row by row through the backward pass
        for row in range(k * m):
            dprefix = np.zeros(k * m)
            dprefix[row] = 1.0
            prefix, cache = mapper.forward(z, want_cache=True)
            _, dz = mapper.backward(dprefix.reshape(k, m), cache)
            rel = np.abs(dz - jac_num[row]) / np.maximum(np.abs(dz) + np.abs(jac_num[row]), 1e-4)
            assert rel.max() < 1e-4


class TestForwardLogits:
    def test_zero_output_projection_is_uniform(self, tiny_decoder, tiny_vocab):
        dec = tiny_decoder
        dec.params["out.w"][:] = 0.0
        dec.params["out.b"][:] = 0.0
        ids = tiny_vocab.encode("a dog barks")
        logits = forward_logits(dec, np.zeros((2, 8)), ids)
        probs = np.exp(logits) / np.exp(logits).sum(axis=1, keepdims=True)
        np.testing.assert_allclose(probs, 1.0 / tiny_vocab.size, atol=1e-12)

    def test_causality_flip_last_token(self, tiny_decoder, tiny_vocab):
        dec = tiny_decoder
        prefix = dec.encode_prefix(np.array([0.1, 0.2, -0.3, 0.4]))
        ids = tiny_vocab.encode("a dog barks")
        flipped = TokenSeq(ids=ids.ids[:-1] + (4,), raw="")
        a = forward_logits(dec, prefix, ids)
        b = forward_logits(dec, prefix, flipped)
        np.testing.assert_array_equal(a[:-1], b[:-1])

    def test_causality_every_position(self, tiny_decoder, tiny_vocab):
        dec = tiny_decoder
        prefix = dec.encode_prefix(np.array([0.1, 0.2, -0.3, 0.4]))
        base_ids = tiny_vocab.encode("a dog barks a")
        base = forward_logits(dec, prefix, base_ids)
        for j in range(len(base_ids)):
            mutated = list(base_ids.ids)
            mutated[j] = (mutated[j] + 1) % 4 + 4
            out = forward_logits(dec, prefix, TokenSeq(ids=tuple(mutated), raw=""))
            np.testing.assert_array_equal(out[: j + 1], base[: j + 1])

    def test_sequence_too_long(self, tiny_decoder, tiny_vocab):
        with pytest.raises(ValueError, match="max_len"):
            forward_logits(tiny_decoder, np.zeros((2, 8)),
                           TokenSeq(ids=tuple([4] * 7), raw=""))


class TestNllLoss:
    def test_uniform_logits_give_T_log_V(self, tiny_decoder, tiny_vocab):
        dec = tiny_decoder
        dec.params["out.w"][:] = 0.0
        dec.params["out.b"][:] = 0.0
        ids = tiny_vocab.encode("a dog barks")   # T = 4 with EOS
        loss = nll_loss(dec, np.zeros((2, 8)), ids)
        assert loss == pytest.approx(len(ids) * np.log(tiny_vocab.size), rel=1e-12)

    def test_probability_one_gives_zero(self, tiny_decoder, tiny_vocab):
        # force a near-one-hot distribution on every true token
        from capgap.decoder import ce_loss_and_grad
        ids = np.array([[4, 5, 1]])
        logits = np.full((1, 3, 8), -1e4)
        for t, tok in enumerate(ids[0]):
            logits[0, t, tok] = 1e4
        loss, n, _ = ce_loss_and_grad(logits, ids, np.ones((1, 3)))
        assert loss == pytest.approx(0.0, abs=1e-12)
        assert n == 3

    def test_matches_independent_oracle(self, tiny_decoder, tiny_vocab):
        dec = tiny_decoder
        prefix = dec.encode_prefix(np.array([0.4, -0.1, 0.2, 0.3]))
        ids = tiny_vocab.encode("dog barks a")
        ours = nll_loss(dec, prefix, ids)
        logits = forward_logits(dec, prefix, ids)
        theirs = oracle_nll([row.tolist() for row in logits], list(ids.ids))
        assert ours == pytest.approx(theirs, abs=1e-10)

    def test_nonnegative(self, tiny_decoder, tiny_vocab):
        prefix = tiny_decoder.encode_prefix(np.array([1.0, 1.0, -1.0, 0.5]))
        for text in ("a", "dog runs", "barks barks barks"):
            assert nll_loss(tiny_decoder, prefix, tiny_vocab.encode(text)) >= 0.0


class TestGreedyDecode:
    def test_eos_rigged_gives_empty_caption(self, tiny_decoder):
        dec = tiny_decoder
        dec.params["out.w"][:] = 0.0
        dec.params["out.b"][:] = 0.0
        dec.params["out.b"][EOS] = 10.0
        out = greedy_decode(dec, np.zeros((2, 8)))
        assert out.ids == (EOS,)
        assert out.raw == ""

    def test_deterministic(self, tiny_decoder):
        prefix = tiny_decoder.encode_prefix(np.array([0.3, 0.1, -0.2, 0.5]))
        a = greedy_decode(tiny_decoder, prefix)
        b = greedy_decode(tiny_decoder, prefix)
        assert a.ids == b.ids and a.raw == b.raw

    def test_untrained_decoder_never_crashes_and_respects_cap(self, tiny_decoder):
        out = greedy_decode(tiny_decoder, np.zeros((2, 8)))
        assert len(out.ids) <= tiny_decoder.cfg.max_len

    def test_tie_breaks_to_lowest_index(self, tiny_decoder):
        dec = tiny_decoder
        dec.params["out.w"][:] = 0.0
        dec.params["out.b"][:] = 0.0   # all logits equal -> argmax picks index 0 = BOS
        out = greedy_decode(dec, np.zeros((2, 8)))
        assert all(i == 0 for i in out.ids)


class TestDecoderConfig:
    def test_heads_must_divide_model_dim(self):
        with pytest.raises(ValueError, match="heads"):
            DecoderConfig(d=4, m=10, heads=3)

    def test_overfit_one_caption(self, tiny_vocab):
        # after fitting a single caption the argmax at each position is the truth
        from capgap.embeddings import EmbeddingSet
        from capgap.training import TextCorpus, TrainConfig, train
        cfg = DecoderConfig(d=4, m=16, heads=2, layers=1, k=2, max_len=6)
        dec = PrefixDecoder.build(cfg, tiny_vocab, seed=0)
        z = np.array([[0.5, -0.5, 0.25, 1.0]])
        corpus = TextCorpus(ids=["c0"], group_ids=["g0"], captions=["a dog barks"],
                            embeddings=EmbeddingSet.from_matrix(z, ids=["c0"]))
        train(corpus, dec, TrainConfig(epochs=150, batch_size=1, peak_lr=5e-3,
                                       warmup_epochs=5, lr_decay_every=60,
                                       lr_decay_factor=0.5, seed=0))
        ids = tiny_vocab.encode("a dog barks")
        logits = forward_logits(dec, dec.encode_prefix(z[0]), ids)
        assert tuple(np.argmax(logits, axis=1)) == ids.ids
