"""
MIL Head Module

This module fuses the encoder's token vectors into statement vectors and
scores every statement. Each statement gets two representations, a masked
max pool over its tokens (local cues) and a mean pool (line-wide cues); each
channel has its own linear + softmax classifier, and the two vulnerable-class
probabilities are fused into one score per statement.

date: 10/18/2026
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

import tensor_autodiff as ad
from errors import ConfigError, ShapeError
from statement_segmenter import TokenizedFunction
from tensor_autodiff import ModelParams, Tensor

logger = logging.getLogger(__name__)

FUSIONS = ('weighted', 'select')
VULNERABLE = 1


@dataclass
class HeadConfig:
    """
    How channel scores are fused.

    Attributes:
        fusion (str): 'weighted' (p = w_max p_max + w_mean p_mean) or
            'select' (p = max(p_max, p_mean)).
        fusion_weights (tuple[float, float]): (w_max, w_mean), non-negative, summing
            to 1; (1, 0) keeps only the max channel, (0, 1) only the mean channel.
        learnable_fusion (bool): Train the weights as softmax of two logits.
    """
    fusion: str = 'weighted'
    fusion_weights: tuple[float, float] = (0.5, 0.5)
    learnable_fusion: bool = False

    def __post_init__(self):
        self.fusion_weights = tuple(float(w) for w in self.fusion_weights)
        if self.fusion not in FUSIONS:
            raise ConfigError(f'fusion must be one of {FUSIONS}, got {self.fusion!r}')
        if len(self.fusion_weights) != 2 or min(self.fusion_weights) < 0.0 \
                or not math.isclose(sum(self.fusion_weights), 1.0, abs_tol=1e-9):
            raise ConfigError(f'fusion_weights must be two non-negative numbers summing to 1, '
                              f'got {self.fusion_weights}')
        if self.learnable_fusion:
            if self.fusion != 'weighted':
                raise ConfigError('learnable_fusion needs fusion="weighted"')
            if min(self.fusion_weights) == 0.0:
                raise ConfigError('learnable_fusion needs both initial fusion weights above 0')

    def to_dict(self) -> dict:
        return {'fusion': self.fusion, 'fusion_weights': list(self.fusion_weights),
                'learnable_fusion': self.learnable_fusion}


class HeadParams:
    """
    Trainable tensors of the two channel classifiers and the fusion weights.

    Attributes:
        max_w (Tensor): d x 2 max-channel weights.
        max_b (Tensor): 2 max-channel biases.
        mean_w (Tensor): d x 2 mean-channel weights.
        mean_b (Tensor): 2 mean-channel biases.
        fusion_logits (Tensor | None): Two logits when fusion is learnable.
        config (HeadConfig): Fusion settings.
    """

    def __init__(self, max_w: Tensor, max_b: Tensor, mean_w: Tensor, mean_b: Tensor,
                 config: HeadConfig, fusion_logits: Tensor | None = None):
        self.max_w = max_w
        self.max_b = max_b
        self.mean_w = mean_w
        self.mean_b = mean_b
        self.config = config
        self.fusion_logits = fusion_logits

    @classmethod
    def initialize(cls, hidden: int, config: HeadConfig, rng: np.random.Generator) -> 'HeadParams':
        """
        Draw Glorot-uniform classifier weights with zero biases.

        Args:
            hidden (int): Width d of the statement vectors.
            config (HeadConfig): Fusion settings.
            rng (np.random.Generator): Seeded generator.

        Returns:
            HeadParams: New parameters.
        """
        limit = math.sqrt(6.0 / (hidden + 2))
        logits = None
        if config.learnable_fusion:
            logits = Tensor(np.log(config.fusion_weights), requires_grad=True)
        return cls(
            max_w=Tensor(rng.uniform(-limit, limit, (hidden, 2)), requires_grad=True),
            max_b=Tensor(np.zeros(2), requires_grad=True),
            mean_w=Tensor(rng.uniform(-limit, limit, (hidden, 2)), requires_grad=True),
            mean_b=Tensor(np.zeros(2), requires_grad=True),
            config=config,
            fusion_logits=logits,
        )

    def named(self, prefix: str = 'head') -> ModelParams:
        params = {f'{prefix}.max_w': self.max_w, f'{prefix}.max_b': self.max_b,
                  f'{prefix}.mean_w': self.mean_w, f'{prefix}.mean_b': self.mean_b}
        if self.fusion_logits is not None:
            params[f'{prefix}.fusion_logits'] = self.fusion_logits
        return params

    def fusion_pair(self) -> tuple[float, float]:
        """Current (w_max, w_mean) as plain numbers."""
        if self.fusion_logits is None:
            return self.config.fusion_weights
        exp = np.exp(self.fusion_logits.data - self.fusion_logits.data.max())
        w_max, w_mean = exp / exp.sum()
        return float(w_max), float(w_mean)


@dataclass
class StatementScores:
    """
    Vulnerable-class probabilities for the scored statements of one function.

    Statements in `truncated_statements` carry no score; the arrays below are
    aligned with `statement_indices`.

    Attributes:
        statement_indices (np.ndarray): Scored statement indices, ascending.
        p_max (np.ndarray): Max-channel probabilities.
        p_mean (np.ndarray): Mean-channel probabilities.
        p (np.ndarray): Fused probabilities.
        m_eff (int): Number of scored statements.
        p_tensor (Tensor | None): Fused probabilities inside the autodiff graph.
    """
    statement_indices: np.ndarray
    p_max: np.ndarray
    p_mean: np.ndarray
    p: np.ndarray
    m_eff: int
    p_tensor: Tensor | None = field(default=None, repr=False, compare=False)


def _members(membership, j: int) -> np.ndarray:
    members = np.flatnonzero(np.asarray(membership) == j)
    if members.size == 0:
        raise ShapeError(f'statement {j} has no surviving tokens')
    return members


def _as_vector(row: Tensor) -> Tensor:
    return ad.select_column(ad.transpose(row), 0)


def max_pool_statement(h: Tensor, membership, j: int) -> Tensor:
    """
    Coordinate-wise maximum over the hidden vectors of statement j's tokens.

    Non-member tokens are excluded, never zeroed, so an all-negative
    statement keeps its negative maximum.

    Args:
        h (Tensor): n x d hidden states.
        membership (array-like of int): Statement index of every token.
        j (int): Statement to pool.

    Returns:
        Tensor: d-vector.
    """
    rows = ad.gather_rows(h, _members(membership, j))
    return _as_vector(ad.segment_max(rows, np.zeros(rows.shape[0], dtype=np.int64), 1))


def mean_pool_statement(h: Tensor, membership, j: int) -> Tensor:
    """
    Mean of the hidden vectors of statement j's tokens.

    Args:
        h (Tensor): n x d hidden states.
        membership (array-like of int): Statement index of every token.
        j (int): Statement to pool.

    Returns:
        Tensor: d-vector.
    """
    rows = ad.gather_rows(h, _members(membership, j))
    return _as_vector(ad.segment_mean(rows, np.zeros(rows.shape[0], dtype=np.int64), 1))


def _channel_probability(pooled: Tensor, weights: Tensor, bias: Tensor) -> Tensor:
    logits = ad.add(ad.matmul(pooled, weights), bias)
    return ad.select_column(ad.softmax(logits, axis=1), VULNERABLE)


def classify_statements(h: Tensor, tokens: TokenizedFunction, head: HeadParams) -> StatementScores:
    """
    Score every statement that kept at least one token.

    Args:
        h (Tensor): n x d encoder output for this function.
        tokens (TokenizedFunction): The function's tokens and statement membership.
        head (HeadParams): Classifier and fusion parameters.

    Returns:
        StatementScores: Per-channel and fused probabilities.
    """
    if h.shape[0] != tokens.n:
        raise ShapeError(f'encoder output has {h.shape[0]} rows for {tokens.n} tokens')
    scored = tokens.scored_statements
    segments = np.searchsorted(scored, tokens.statement_of_token)
    count = int(scored.size)
    p_max = _channel_probability(ad.segment_max(h, segments, count), head.max_w, head.max_b)
    p_mean = _channel_probability(ad.segment_mean(h, segments, count), head.mean_w, head.mean_b)

    config = head.config
    if config.fusion == 'select':
        fused = ad.maximum(p_max, p_mean)
    elif head.fusion_logits is not None:
        weights = ad.softmax(head.fusion_logits, axis=0)
        fused = ad.add(ad.mul(p_max, ad.gather_rows(weights, [0])),
                       ad.mul(p_mean, ad.gather_rows(weights, [1])))
    else:
        w_max, w_mean = config.fusion_weights
        fused = ad.add(ad.scale(p_max, w_max), ad.scale(p_mean, w_mean))

    return StatementScores(
        statement_indices=scored,
        p_max=p_max.numpy(),
        p_mean=p_mean.numpy(),
        p=fused.numpy(),
        m_eff=count,
        p_tensor=fused,
    )


def score_record(function_id: str, tokens: TokenizedFunction, scores: StatementScores) -> dict:
    """
    Per-function score dump entry.

    Args:
        function_id (str): Function id.
        tokens (TokenizedFunction): Supplies the line of every statement.
        scores (StatementScores): The scores.

    Returns:
        dict: {id, lines, p, p_max, p_mean} with one list entry per scored statement.
    """
    return {
        'id': function_id,
        'lines': [tokens.statement_lines[j] for j in scores.statement_indices.tolist()],
        'p': scores.p.tolist(),
        'p_max': scores.p_max.tolist(),
        'p_mean': scores.p_mean.tolist(),
    }
