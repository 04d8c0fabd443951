"""
Encoder Module

This module defines the Transformer-style encoder that turns a tokenized
function into one hidden vector per token. Token and positional embeddings are
summed, then passed through a stack of post-norm blocks, each made of
multi-head self-attention and a two-layer ReLU feed-forward network, with a
residual connection and layer norm after each.

date: 10/18/2026
"""

import logging
import math
from dataclasses import asdict, dataclass

import numpy as np

import tensor_autodiff as ad
from errors import ConfigError, NumericError, ShapeError, VocabError
from statement_segmenter import TokenizedFunction
from tensor_autodiff import ModelParams, Tensor

logger = logging.getLogger(__name__)

MODES = ('train', 'eval')


@dataclass
class EncoderConfig:
    """
    Shape and regularization of the encoder.

    Desk-scale defaults train in minutes on one CPU core; the full-size
    model is layers=12, heads=12, hidden=768.

    Attributes:
        layers (int): Number of stacked blocks L.
        heads (int): Attention heads h; must divide hidden.
        hidden (int): Hidden width d.
        ffn_dim (int): Inner width of the feed-forward network.
        max_len (int): Longest token sequence (positional table rows).
        vocab_size (int): Token embedding table rows.
        dropout_rate (float): Dropout probability in train mode.
        norm (str): Norm placement; 'post' (norm after each residual).
        init_std (float): Standard deviation of the embedding initialization.
    """
    layers: int = 2
    heads: int = 2
    hidden: int = 64
    ffn_dim: int = 256
    max_len: int = 512
    vocab_size: int = 4096
    dropout_rate: float = 0.1
    norm: str = 'post'
    init_std: float = 0.02

    def __post_init__(self):
        if self.layers < 0:
            raise ConfigError(f'layers must be non-negative, got {self.layers}')
        if self.heads < 1 or self.hidden < 1 or self.hidden % self.heads:
            raise ConfigError(f'hidden ({self.hidden}) must be divisible by heads ({self.heads})')
        if self.max_len < 1:
            raise ConfigError(f'max_len must be at least 1, got {self.max_len}')
        if self.vocab_size < 1 or self.ffn_dim < 1:
            raise ConfigError('vocab_size and ffn_dim must be positive')
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError(f'dropout_rate must lie in [0, 1), got {self.dropout_rate}')
        if self.norm != 'post':
            raise ConfigError(f"only post-norm blocks are supported, got norm={self.norm!r}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class LayerParams:
    """
    Trainable tensors of one encoder block.

    The per-head projections W^Q_i, W^K_i, W^V_i are the column blocks of
    w_q, w_k, w_v; w_o is the output projection W^O.
    """
    w_q: Tensor
    w_k: Tensor
    w_v: Tensor
    w_o: Tensor
    ffn_w1: Tensor
    ffn_b1: Tensor
    ffn_w2: Tensor
    ffn_b2: Tensor
    ln1_gamma: Tensor
    ln1_beta: Tensor
    ln2_gamma: Tensor
    ln2_beta: Tensor


class EncoderParams:
    """
    All trainable tensors of the encoder.

    Attributes:
        token_table (Tensor): vocab_size x d token embeddings.
        pos_table (Tensor): max_len x d positional embeddings.
        layers (list[LayerParams]): One entry per block.
    """

    def __init__(self, token_table: Tensor, pos_table: Tensor, layers: list[LayerParams]):
        self.token_table = token_table
        self.pos_table = pos_table
        self.layers = layers

    @classmethod
    def initialize(cls, config: EncoderConfig, rng: np.random.Generator) -> 'EncoderParams':
        """
        Draw fresh parameters: normal embeddings, Glorot-uniform projections,
        zero biases, unit norm scales.

        Args:
            config (EncoderConfig): Model shape.
            rng (np.random.Generator): Seeded generator.

        Returns:
            EncoderParams: New parameters.
        """
        d = config.hidden

        def glorot(fan_in, fan_out):
            limit = math.sqrt(6.0 / (fan_in + fan_out))
            return Tensor(rng.uniform(-limit, limit, (fan_in, fan_out)), requires_grad=True)

        def const(value, width):
            return Tensor(np.full(width, value), requires_grad=True)

        token_table = Tensor(rng.normal(0.0, config.init_std, (config.vocab_size, d)), requires_grad=True)
        pos_table = Tensor(rng.normal(0.0, config.init_std, (config.max_len, d)), requires_grad=True)
        layers = []
        for _ in range(config.layers):
            layers.append(LayerParams(
                w_q=glorot(d, d), w_k=glorot(d, d), w_v=glorot(d, d), w_o=glorot(d, d),
                ffn_w1=glorot(d, config.ffn_dim), ffn_b1=const(0.0, config.ffn_dim),
                ffn_w2=glorot(config.ffn_dim, d), ffn_b2=const(0.0, d),
                ln1_gamma=const(1.0, d), ln1_beta=const(0.0, d),
                ln2_gamma=const(1.0, d), ln2_beta=const(0.0, d),
            ))
        return cls(token_table, pos_table, layers)

    def named(self, prefix: str = 'encoder') -> ModelParams:
        """
        Flatten into a name -> tensor mapping.

        Args:
            prefix (str): Name prefix.

        Returns:
            ModelParams: Parameters in a fixed order.
        """
        params = {f'{prefix}.token_table': self.token_table, f'{prefix}.pos_table': self.pos_table}
        for index, layer in enumerate(self.layers):
            for name, tensor in vars(layer).items():
                params[f'{prefix}.layer{index}.{name}'] = tensor
        return params


def embed(tokens: TokenizedFunction, params: EncoderParams) -> Tensor:
    """
    Sum token and positional embeddings.

    Args:
        tokens (TokenizedFunction): Input tokens.
        params (EncoderParams): Embedding tables.

    Returns:
        Tensor: n x d input vectors.
    """
    vocab_size, max_len = params.token_table.shape[0], params.pos_table.shape[0]
    if tokens.n > max_len:
        raise ShapeError(f'{tokens.n} tokens exceed max_len {max_len}')
    if tokens.token_ids.min() < 0 or tokens.token_ids.max() >= vocab_size:
        raise VocabError(f'token id out of vocabulary range [0, {vocab_size})')
    return ad.add(ad.embedding_lookup(params.token_table, tokens.token_ids),
                  ad.gather_rows(params.pos_table, tokens.positions))


def scaled_dot_attention(q: Tensor, k: Tensor, v: Tensor, d_k: int) -> Tensor:
    """
    softmax(Q K^T / sqrt(d_k)) V.

    Args:
        q (Tensor): n x d_k queries.
        k (Tensor): n x d_k keys.
        v (Tensor): n x d_v values.
        d_k (int): Key width used for scaling.

    Returns:
        Tensor: n x d_v attended values.
    """
    scores = ad.scale(ad.matmul(q, ad.transpose(k)), 1.0 / math.sqrt(d_k))
    return ad.matmul(ad.softmax(scores, axis=1), v)


def multi_head_attention(x: Tensor, layer: LayerParams, heads: int) -> Tensor:
    """
    Concat(head_1..head_h) W^O with head_i = Attention(X W^Q_i, X W^K_i, X W^V_i).

    Args:
        x (Tensor): n x d input.
        layer (LayerParams): Block parameters.
        heads (int): Number of heads; must divide d.

    Returns:
        Tensor: n x d output.
    """
    d = x.shape[1]
    if d % heads:
        raise ShapeError(f'hidden width {d} is not divisible by {heads} heads')
    width = d // heads
    q = ad.matmul(x, layer.w_q)
    k = ad.matmul(x, layer.w_k)
    v = ad.matmul(x, layer.w_v)
    outputs = []
    for head in range(heads):
        lo, hi = head * width, (head + 1) * width
        outputs.append(scaled_dot_attention(ad.columns(q, lo, hi), ad.columns(k, lo, hi),
                                            ad.columns(v, lo, hi), width))
    joined = outputs[0] if heads == 1 else ad.concat(outputs, axis=1)
    return ad.matmul(joined, layer.w_o)


def feed_forward(x: Tensor, layer: LayerParams) -> Tensor:
    hidden = ad.relu(ad.add(ad.matmul(x, layer.ffn_w1), layer.ffn_b1))
    return ad.add(ad.matmul(hidden, layer.ffn_w2), layer.ffn_b2)


def encode(tokens: TokenizedFunction, params: EncoderParams, config: EncoderConfig,
           mode: str = 'eval', rng: np.random.Generator | None = None) -> Tensor:
    """
    Run the encoder and return the final hidden states h_1..h_n.

    Dropout is applied only in train mode, drawing masks from `rng`.

    Args:
        tokens (TokenizedFunction): Input tokens.
        params (EncoderParams): Encoder parameters.
        config (EncoderConfig): Model shape.
        mode (str): 'train' or 'eval'.
        rng (np.random.Generator | None): Dropout generator, used in train mode.

    Returns:
        Tensor: n x d hidden states.
    """
    if mode not in MODES:
        raise ConfigError(f'mode must be one of {MODES}, got {mode!r}')
    rate = config.dropout_rate if mode == 'train' else 0.0
    rng = rng if mode == 'train' else None
    x = ad.dropout(embed(tokens, params), rate, rng)
    for index, layer in enumerate(params.layers):
        try:
            attended = ad.dropout(multi_head_attention(x, layer, config.heads), rate, rng)
            x = ad.layer_norm(ad.add(x, attended), layer.ln1_gamma, layer.ln1_beta)
            transformed = ad.dropout(feed_forward(x, layer), rate, rng)
            x = ad.layer_norm(ad.add(x, transformed), layer.ln2_gamma, layer.ln2_beta)
        except NumericError as e:
            raise NumericError(f'encoder layer {index}: {e}') from e
    return x
