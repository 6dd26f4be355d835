"""Prefix-conditioned textual decoder.

A mapping network turns one embedding into k prefix slots; a small causal
transformer consumes [prefix, BOS, tokens...] and predicts the next token at
each position. Everything is float64 numpy with hand-written backward passes
so gradients can be audited against finite differences and training is
bit-reproducible.

Layout of the parameter dict (all float64):
    map.w1 (d,h)  map.b1 (h,)  map.w2 (h,k*m)  map.b2 (k*m,)
    tok_emb (V,m)  pos_emb (k+max_len, m)
    blk{i}.ln1.{g,b}  blk{i}.attn.{wqkv,bqkv,wo,bo}
    blk{i}.ln2.{g,b}  blk{i}.mlp.{w1,b1,w2,b2}
    lnf.{g,b}  out.{w,b}
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .embeddings import Embedding
from .vocab import BOS, EOS, PAD, TokenSeq, Vocabulary

__all__ = [
    "DecoderConfig",
    "MappingNetwork",
    "PrefixDecoder",
    "encode_prefix",
    "forward_logits",
    "nll_loss",
    "greedy_decode",
]

_LN_EPS = 1e-5
_GELU_C = float(np.sqrt(2.0 / np.pi))


@dataclass(frozen=True)
class DecoderConfig:
    """Shape hyperparameters for the mapper and the next-token model."""

    d: int                    # input embedding dimension
    m: int = 64               # model width
    heads: int = 2
    layers: int = 2
    k: int = 8                # prefix slots
    max_len: int = 12         # caption tokens incl. EOS
    mapper_hidden: int | None = None   # defaults to d
    mapper_activation: str = "tanh"    # "tanh" | "identity" (test mode)

    def __post_init__(self):
        if self.d < 1 or self.m < 1 or self.layers < 1 or self.k < 1:
            raise ValueError("decoder dimensions must be positive")
        if self.m % self.heads != 0:
            raise ValueError(f"heads ({self.heads}) must divide model dim ({self.m})")
        if self.max_len < 2:
            raise ValueError("max_len must allow at least one token plus EOS")
        if self.mapper_activation not in ("tanh", "identity"):
            raise ValueError(f"unknown mapper activation {self.mapper_activation!r}")

    @property
    def h(self) -> int:
        return self.d if self.mapper_hidden is None else self.mapper_hidden


# ---------------------------------------------------------------------------
# mapping network

@dataclass(eq=False)
class MappingNetwork:
    """Two affine layers with an elementwise nonlinearity, reshaped to k slots."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    k: int
    m: int
    activation: str = "tanh"

    def forward(self, z: np.ndarray, want_cache: bool = False):
        z = np.asarray(z, dtype=np.float64)
        if z.shape[-1] != self.w1.shape[0]:
            raise ValueError(
                f"embedding dimension {z.shape[-1]} does not match mapper input {self.w1.shape[0]}"
            )
        a1 = z @ self.w1 + self.b1
        h1 = np.tanh(a1) if self.activation == "tanh" else a1
        flat = h1 @ self.w2 + self.b2
        prefix = flat.reshape(z.shape[:-1] + (self.k, self.m))
        if want_cache:
            return prefix, (z, a1, h1)
        return prefix

    def backward(self, dprefix: np.ndarray, cache) -> tuple[dict[str, np.ndarray], np.ndarray]:
        """Gradients of the mapper parameters and of the input embedding."""
        z, a1, h1 = cache
        dflat = dprefix.reshape(z.shape[:-1] + (self.k * self.m,))
        z2 = z.reshape(-1, z.shape[-1])
        h2 = h1.reshape(-1, h1.shape[-1])
        df2 = dflat.reshape(-1, dflat.shape[-1])
        grads = {
            "map.w2": h2.T @ df2,
            "map.b2": df2.sum(axis=0),
        }
        dh1 = df2 @ self.w2.T
        if self.activation == "tanh":
            t = np.tanh(a1).reshape(-1, a1.shape[-1])
            da1 = dh1 * (1.0 - t * t)
        else:
            da1 = dh1
        grads["map.w1"] = z2.T @ da1
        grads["map.b1"] = da1.sum(axis=0)
        dz = (da1 @ self.w1.T).reshape(z.shape)
        return grads, dz

    def __call__(self, z: np.ndarray) -> np.ndarray:
        return self.forward(z)


def encode_prefix(z, mapper: MappingNetwork) -> np.ndarray:
    """Prefix slots (k, m) for one embedding (deterministic, differentiable)."""
    values = z.values if isinstance(z, Embedding) else np.asarray(z, dtype=np.float64)
    return mapper.forward(values)


# ---------------------------------------------------------------------------
# layers

def _layernorm_fwd(x, g, b):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = np.mean(xc * xc, axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + _LN_EPS)
    xhat = xc * inv
    return xhat * g + b, (xhat, inv, g)


def _layernorm_bwd(dy, cache):
    xhat, inv, g = cache
    axes = tuple(range(dy.ndim - 1))
    dg = np.sum(dy * xhat, axis=axes)
    db = np.sum(dy, axis=axes)
    dxhat = dy * g
    m1 = dxhat.mean(axis=-1, keepdims=True)
    m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
    dx = inv * (dxhat - m1 - xhat * m2)
    return dx, dg, db


def _gelu_fwd(x):
    u = _GELU_C * (x + 0.044715 * (x * x * x))
    t = np.tanh(u)
    return 0.5 * x * (1.0 + t), (x, t)


def _gelu_bwd(dy, cache):
    x, t = cache
    du = _GELU_C * (1.0 + 3.0 * 0.044715 * x * x)
    return dy * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du)


def _attn_fwd(x, p, pre, heads):
    B, S, m = x.shape
    dh = m // heads
    scale = 1.0 / np.sqrt(dh)
    qkv = x @ p[f"{pre}.wqkv"] + p[f"{pre}.bqkv"]
    q, k, v = (
        a.reshape(B, S, heads, dh).transpose(0, 2, 1, 3)
        for a in np.split(qkv, 3, axis=-1)
    )
    scores = (q @ k.transpose(0, 1, 3, 2)) * scale
    causal = np.tril(np.ones((S, S), dtype=bool))
    scores = np.where(causal, scores, -np.inf)
    smax = scores.max(axis=-1, keepdims=True)
    e = np.exp(scores - smax)
    probs = e / e.sum(axis=-1, keepdims=True)
    ctx = probs @ v
    merged = ctx.transpose(0, 2, 1, 3).reshape(B, S, m)
    out = merged @ p[f"{pre}.wo"] + p[f"{pre}.bo"]
    return out, (x, q, k, v, probs, merged, scale)


def _attn_bwd(dout, cache, p, pre, grads):
    x, q, k, v, probs, merged, scale = cache
    B, S, m = x.shape
    heads, dh = q.shape[1], q.shape[3]
    grads[f"{pre}.wo"] += merged.reshape(-1, m).T @ dout.reshape(-1, m)
    grads[f"{pre}.bo"] += dout.sum(axis=(0, 1))
    dctx = (dout @ p[f"{pre}.wo"].T).reshape(B, S, heads, dh).transpose(0, 2, 1, 3)
    dprobs = dctx @ v.transpose(0, 1, 3, 2)
    dv = probs.transpose(0, 1, 3, 2) @ dctx
    dscores = probs * (dprobs - np.sum(dprobs * probs, axis=-1, keepdims=True))
    dscores *= scale
    dq = dscores @ k
    dk = dscores.transpose(0, 1, 3, 2) @ q
    dqkv = np.concatenate(
        [a.transpose(0, 2, 1, 3).reshape(B, S, m) for a in (dq, dk, dv)], axis=-1
    )
    grads[f"{pre}.wqkv"] += x.reshape(-1, m).T @ dqkv.reshape(-1, 3 * m)
    grads[f"{pre}.bqkv"] += dqkv.sum(axis=(0, 1))
    return dqkv @ p[f"{pre}.wqkv"].T


def _mlp_fwd(x, p, pre):
    h1 = x @ p[f"{pre}.w1"] + p[f"{pre}.b1"]
    a, gcache = _gelu_fwd(h1)
    out = a @ p[f"{pre}.w2"] + p[f"{pre}.b2"]
    return out, (x, a, gcache)


def _mlp_bwd(dout, cache, p, pre, grads):
    x, a, gcache = cache
    m_in = x.shape[-1]
    m_hidden = a.shape[-1]
    grads[f"{pre}.w2"] += a.reshape(-1, m_hidden).T @ dout.reshape(-1, dout.shape[-1])
    grads[f"{pre}.b2"] += dout.sum(axis=(0, 1))
    da = dout @ p[f"{pre}.w2"].T
    dh1 = _gelu_bwd(da, gcache)
    grads[f"{pre}.w1"] += x.reshape(-1, m_in).T @ dh1.reshape(-1, m_hidden)
    grads[f"{pre}.b1"] += dh1.sum(axis=(0, 1))
    return dh1 @ p[f"{pre}.w1"].T


# ---------------------------------------------------------------------------
# language model forward / backward (batched)

def lm_forward(params, cfg: DecoderConfig, prefix: np.ndarray, input_ids: np.ndarray,
               want_cache: bool = False):
    """Logits (B, T, V) for positions that predict each of the T target tokens.

    `prefix` is (B, k, m); `input_ids` is (B, T) and already starts with BOS.
    """
    B, k, m = prefix.shape
    T = input_ids.shape[1]
    S = k + T
    if S > params["pos_emb"].shape[0]:
        raise ValueError(
            f"sequence of {T} tokens exceeds max_len {cfg.max_len} (positions available: "
            f"{params['pos_emb'].shape[0] - k})"
        )
    tok = params["tok_emb"][input_ids]
    x = np.concatenate([prefix, tok], axis=1) + params["pos_emb"][:S]
    block_caches = []
    for i in range(cfg.layers):
        h, c1 = _layernorm_fwd(x, params[f"blk{i}.ln1.g"], params[f"blk{i}.ln1.b"])
        a, ca = _attn_fwd(h, params, f"blk{i}.attn", cfg.heads)
        x = x + a
        h2, c2 = _layernorm_fwd(x, params[f"blk{i}.ln2.g"], params[f"blk{i}.ln2.b"])
        f, cm = _mlp_fwd(h2, params, f"blk{i}.mlp")
        x = x + f
        if want_cache:
            block_caches.append((c1, ca, c2, cm))
    xf, clnf = _layernorm_fwd(x, params["lnf.g"], params["lnf.b"])
    xt = xf[:, k:, :]
    logits = xt @ params["out.w"] + params["out.b"]
    if not want_cache:
        return logits
    return logits, (input_ids, S, block_caches, clnf, xt)


def lm_backward(params, cfg: DecoderConfig, cache, dlogits: np.ndarray, grads) -> np.ndarray:
    """Accumulate parameter gradients into `grads`; return dprefix (B, k, m)."""
    input_ids, S, block_caches, clnf, xt = cache
    B, T, V = dlogits.shape
    k = S - T
    m = cfg.m
    grads["out.w"] += xt.reshape(-1, m).T @ dlogits.reshape(-1, V)
    grads["out.b"] += dlogits.sum(axis=(0, 1))
    dxf = np.zeros((B, S, m))
    dxf[:, k:, :] = dlogits @ params["out.w"].T
    dx, dg, db = _layernorm_bwd(dxf, clnf)
    grads["lnf.g"] += dg
    grads["lnf.b"] += db
    for i in reversed(range(cfg.layers)):
        c1, ca, c2, cm = block_caches[i]
        dh2 = _mlp_bwd(dx, cm, params, f"blk{i}.mlp", grads)
        dx2, dg, db = _layernorm_bwd(dh2, c2)
        grads[f"blk{i}.ln2.g"] += dg
        grads[f"blk{i}.ln2.b"] += db
        dx = dx + dx2
        dh = _attn_bwd(dx, ca, params, f"blk{i}.attn", grads)
        dx1, dg, db = _layernorm_bwd(dh, c1)
        grads[f"blk{i}.ln1.g"] += dg
        grads[f"blk{i}.ln1.b"] += db
        dx = dx + dx1
    grads["pos_emb"][:S] += dx.sum(axis=0)
    np.add.at(grads["tok_emb"], input_ids, dx[:, k:, :])
    return dx[:, :k, :]


def ce_loss_and_grad(logits: np.ndarray, labels: np.ndarray, score_mask: np.ndarray):
    """Summed negative log-likelihood over masked positions, plus dlogits.

    Returns (loss_sum, n_scored_tokens, dlogits).
    """
    z = logits - logits.max(axis=-1, keepdims=True)
    lse = np.log(np.sum(np.exp(z), axis=-1, keepdims=True))
    logp = z - lse
    picked = np.take_along_axis(logp, labels[..., None], axis=-1)[..., 0]
    loss = -float(np.sum(picked * score_mask))
    dlogits = np.exp(logp)
    np.subtract.at(dlogits.reshape(-1, dlogits.shape[-1]),
                   (np.arange(labels.size), labels.reshape(-1)), 1.0)
    dlogits *= score_mask[..., None]
    return loss, int(score_mask.sum()), dlogits


# ---------------------------------------------------------------------------
# decoder object

def init_params(cfg: DecoderConfig, vocab_size: int, seed: int = 0) -> dict[str, np.ndarray]:
    """Fixed-seed scaled-uniform initialization; biases zero, layernorm identity."""
    rng = np.random.default_rng(seed)

    def uniform(fan_in, shape):
        s = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-s, s, size=shape)

    d, m, k, h = cfg.d, cfg.m, cfg.k, cfg.h
    p: dict[str, np.ndarray] = {}
    p["map.w1"] = uniform(d, (d, h))
    p["map.b1"] = np.zeros(h)
    p["map.w2"] = uniform(h, (h, k * m))
    p["map.b2"] = np.zeros(k * m)
    p["tok_emb"] = uniform(m, (vocab_size, m))
    p["pos_emb"] = uniform(m, (k + cfg.max_len, m))
    for i in range(cfg.layers):
        p[f"blk{i}.ln1.g"] = np.ones(m)
        p[f"blk{i}.ln1.b"] = np.zeros(m)
        p[f"blk{i}.attn.wqkv"] = uniform(m, (m, 3 * m))
        p[f"blk{i}.attn.bqkv"] = np.zeros(3 * m)
        p[f"blk{i}.attn.wo"] = uniform(m, (m, m))
        p[f"blk{i}.attn.bo"] = np.zeros(m)
        p[f"blk{i}.ln2.g"] = np.ones(m)
        p[f"blk{i}.ln2.b"] = np.zeros(m)
        p[f"blk{i}.mlp.w1"] = uniform(m, (m, 4 * m))
        p[f"blk{i}.mlp.b1"] = np.zeros(4 * m)
        p[f"blk{i}.mlp.w2"] = uniform(4 * m, (4 * m, m))
        p[f"blk{i}.mlp.b2"] = np.zeros(m)
    p["lnf.g"] = np.ones(m)
    p["lnf.b"] = np.zeros(m)
    p["out.w"] = uniform(m, (m, vocab_size))
    p["out.b"] = np.zeros(vocab_size)
    return p


@dataclass(eq=False)
class PrefixDecoder:
    """Mapping network + autoregressive next-token model over one vocabulary."""

    cfg: DecoderConfig
    vocab: Vocabulary
    params: dict[str, np.ndarray] = field(repr=False)

    @classmethod
    def build(cls, cfg: DecoderConfig, vocab: Vocabulary, seed: int = 0) -> "PrefixDecoder":
        return cls(cfg=cfg, vocab=vocab, params=init_params(cfg, vocab.size, seed))

    @property
    def mapper(self) -> MappingNetwork:
        return MappingNetwork(
            w1=self.params["map.w1"], b1=self.params["map.b1"],
            w2=self.params["map.w2"], b2=self.params["map.b2"],
            k=self.cfg.k, m=self.cfg.m, activation=self.cfg.mapper_activation,
        )

    def encode_prefix(self, z) -> np.ndarray:
        return encode_prefix(z, self.mapper)


def _input_ids(ids: tuple[int, ...]) -> np.ndarray:
    return np.array([[BOS, *ids[:-1]]], dtype=np.int64)


def forward_logits(dec: PrefixDecoder, prefix: np.ndarray, ids: TokenSeq) -> np.ndarray:
    """(T, V) next-token scores; row i conditions on the prefix and ids[<i]."""
    if len(ids) == 0:
        raise ValueError("token sequence is empty")
    if len(ids) > dec.cfg.max_len:
        raise ValueError(f"sequence length {len(ids)} exceeds max_len {dec.cfg.max_len}")
    prefix = np.asarray(prefix, dtype=np.float64)
    return lm_forward(dec.params, dec.cfg, prefix[None], _input_ids(ids.ids))[0]


def nll_loss(dec: PrefixDecoder, prefix: np.ndarray, ids: TokenSeq) -> float:
    """Summed cross-entropy of the true tokens (EOS scored, PAD excluded)."""
    logits = forward_logits(dec, prefix, ids)
    labels = np.array(ids.ids, dtype=np.int64)
    mask = (labels != PAD).astype(np.float64)
    loss, _, _ = ce_loss_and_grad(logits[None], labels[None], mask[None])
    return loss


def greedy_decode(dec: PrefixDecoder, prefix: np.ndarray) -> TokenSeq:
    """Deterministic argmax generation from BOS; ties go to the lowest index.

    Stops after EOS or once max_len ids have been emitted.
    """
    prefix = np.asarray(prefix, dtype=np.float64)[None]
    ids: list[int] = []
    while len(ids) < dec.cfg.max_len:
        inputs = np.array([[BOS, *ids]], dtype=np.int64)
        logits = lm_forward(dec.params, dec.cfg, prefix, inputs)
        nxt = int(np.argmax(logits[0, -1]))
        ids.append(nxt)
        if nxt == EOS:
            break
    return TokenSeq(ids=tuple(ids), raw=dec.vocab.decode(ids))
