"""Shared causal Transformer encoder over item-id sequences.

Batches are right-aligned (left-padded with PAD=0). Position indices count
real tokens only, and attention gives PAD keys exactly zero weight, so the
hidden states of real positions do not depend on how much padding a batch
adds (up to BLAS kernel rounding at the last ulp). Attention is causal:
position t sees positions <= t.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .data import PAD_ID
from .errors import ShapeError
from .seeding import SeedStream, rng_for

NEG_INF = -1e30  # additive mask value; finite so all-masked rows stay NaN-free


@dataclass
class ModelDims:
    """Shapes shared by every model component."""

    n_items: int
    embed_dim: int = 64
    n_layers: int = 1
    n_heads: int = 1
    dropout: float = 0.5
    ffn_mult: int = 4
    max_len: int = 50       # raw sequence cap (most recent kept)
    max_aug_len: int = 60   # augmented/corrupted sequence cap
    max_insert: int = 5     # longest generated insertion run

    def __post_init__(self):
        if self.embed_dim % self.n_heads != 0:
            raise ValueError(
                f"embed_dim {self.embed_dim} not divisible by n_heads {self.n_heads}"
            )

    @property
    def vocab_size(self) -> int:
        return self.n_items + 2  # PAD + items + MASK

    @property
    def mask_id(self) -> int:
        return self.n_items + 1

    @property
    def head_dim(self) -> int:
        return self.embed_dim // self.n_heads


class BlockParams:
    """One Transformer block: self-attention + FFN, post-norm with affine."""

    def __init__(self, dims: ModelDims, seed_parts: tuple):
        e = dims.embed_dim
        inner = dims.ffn_mult * e

        def xav(name, shape):
            return ag.xavier_init(shape, rng_for(*seed_parts, name))

        self.Wq = xav("Wq", (e, e))
        self.Wk = xav("Wk", (e, e))
        self.Wv = xav("Wv", (e, e))
        self.Wo = xav("Wo", (e, e))
        self.ln1_g = ag.param(np.ones(e))
        self.ln1_b = ag.param(np.zeros(e))
        self.W1 = xav("W1", (e, inner))
        self.b1 = ag.param(np.zeros(inner))
        self.W2 = xav("W2", (inner, e))
        self.b2 = ag.param(np.zeros(e))
        self.ln2_g = ag.param(np.ones(e))
        self.ln2_b = ag.param(np.zeros(e))

    def named_params(self, prefix: str) -> dict[str, Tensor]:
        names = ["Wq", "Wk", "Wv", "Wo", "ln1_g", "ln1_b",
                 "W1", "b1", "W2", "b2", "ln2_g", "ln2_b"]
        return {f"{prefix}.{n}": getattr(self, n) for n in names}


class EncoderParams:
    """Item/position embeddings plus the encoder's block stack."""

    def __init__(self, dims: ModelDims, seed: int):
        self.dims = dims
        self.item_emb = ag.xavier_init(
            (dims.vocab_size, dims.embed_dim), rng_for(seed, "enc", "item_emb")
        )
        self.pos_emb = ag.xavier_init(
            (dims.max_aug_len, dims.embed_dim), rng_for(seed, "enc", "pos_emb")
        )
        self.blocks = [
            BlockParams(dims, (seed, "enc", "block", i)) for i in range(dims.n_layers)
        ]

    def named_params(self, prefix: str = "enc") -> dict[str, Tensor]:
        out = {f"{prefix}.item_emb": self.item_emb, f"{prefix}.pos_emb": self.pos_emb}
        for i, blk in enumerate(self.blocks):
            out.update(blk.named_params(f"{prefix}.blocks.{i}"))
        return out


def position_indices(ids: np.ndarray) -> np.ndarray:
    """Per-slot position ids counting real (non-PAD) tokens from the left."""
    real = ids != PAD_ID
    pos = np.cumsum(real, axis=-1) - 1
    return np.maximum(pos, 0)


def attention_mask(ids: np.ndarray, causal: bool) -> np.ndarray:
    """(N, 1, T, T) additive mask: 0 allowed, NEG_INF blocked."""
    n, t = ids.shape
    allowed = np.ones((n, 1, t, t), dtype=bool)
    key_real = (ids != PAD_ID)[:, None, None, :]
    allowed &= key_real
    if causal:
        allowed &= np.tril(np.ones((t, t), dtype=bool))[None, None]
    return np.where(allowed, 0.0, NEG_INF)


def embed_sequence(
    ids: np.ndarray,
    enc: EncoderParams,
    train: bool = False,
    stream: SeedStream | None = None,
) -> Tensor:
    """Initial hidden states: item embedding + position embedding (+ dropout)."""
    ids = np.asarray(ids, dtype=np.int64)
    if ids.ndim == 1:
        ids = ids[None, :]
    dims = enc.dims
    if ids.shape[1] > dims.max_aug_len:
        raise ShapeError(
            f"sequence length {ids.shape[1]} exceeds the {dims.max_aug_len} cap"
        )
    if ids.size and (ids.min() < 0 or ids.max() >= dims.vocab_size):
        raise ShapeError(
            f"id out of range [0, {dims.vocab_size}): min={ids.min()}, max={ids.max()}"
        )
    h = ag.embedding_lookup(enc.item_emb, ids)
    h = h + ag.embedding_lookup(enc.pos_emb, position_indices(ids))
    if train and dims.dropout > 0:
        if stream is None:
            raise ValueError("training forward needs a SeedStream for dropout")
        h = ag.dropout(h, dims.dropout, train=True, rng=stream.next_rng())
    return h


def transformer_stack(
    h: Tensor,
    blocks: list[BlockParams],
    dims: ModelDims,
    ids: np.ndarray,
    causal: bool = True,
    train: bool = False,
    stream: SeedStream | None = None,
) -> Tensor:
    """Run the block stack over (N, T, e) hidden states."""
    ids = np.asarray(ids, dtype=np.int64)
    if ids.ndim == 1:
        ids = ids[None, :]
    n, t = ids.shape
    e, heads, dh = dims.embed_dim, dims.n_heads, dims.head_dim
    mask = ag.constant(attention_mask(ids, causal))
    scale = 1.0 / np.sqrt(dh)
    if train and dims.dropout > 0 and stream is None:
        raise ValueError("training forward needs a SeedStream for dropout")

    def drop(x):
        if train and dims.dropout > 0:
            return ag.dropout(x, dims.dropout, train=True, rng=stream.next_rng())
        return x

    def split_heads(x):
        return ag.transpose(x.reshape(n, t, heads, dh), (0, 2, 1, 3))

    for blk in blocks:
        q = split_heads(ag.matmul(h, blk.Wq))
        k = split_heads(ag.matmul(h, blk.Wk))
        v = split_heads(ag.matmul(h, blk.Wv))
        scores = ag.matmul(q, ag.transpose_last(k)) * scale + mask
        attn = drop(ag.softmax(scores))
        ctx = ag.transpose(ag.matmul(attn, v), (0, 2, 1, 3)).reshape(n, t, e)
        h = h + drop(ag.matmul(ctx, blk.Wo))
        h = ag.layer_norm(h) * blk.ln1_g + blk.ln1_b
        f = ag.relu(ag.matmul(h, blk.W1) + blk.b1)
        f = drop(ag.matmul(f, blk.W2) + blk.b2)
        h = ag.layer_norm(h + f) * blk.ln2_g + blk.ln2_b
    return h


def encode_batch(
    ids: np.ndarray,
    enc: EncoderParams,
    train: bool = False,
    stream: SeedStream | None = None,
    causal: bool = True,
) -> Tensor:
    """Full encoder forward: embeddings then the block stack."""
    ids = np.asarray(ids, dtype=np.int64)
    if ids.ndim == 1:
        ids = ids[None, :]
    h = embed_sequence(ids, enc, train=train, stream=stream)
    return transformer_stack(h, enc.blocks, enc.dims, ids, causal=causal,
                             train=train, stream=stream)


def take_last_position(h: Tensor) -> Tensor:
    """(N, T, e) -> (N, e) rows at the final (right-aligned) position."""
    n, t, e = h.shape
    flat = h.reshape(n * t, e)
    idx = np.arange(n, dtype=np.int64) * t + (t - 1)
    return ag.embedding_lookup(flat, idx)
