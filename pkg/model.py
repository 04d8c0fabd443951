"""
Model Module

This module defines the VulnModel class, which bundles the encoder and the
statement classification head into one object: it runs the full forward pass
from tokens to statement scores, exposes every trainable tensor under a stable
name, and saves or restores itself through the tensor checkpoint container.

date: 10/18/2026
"""

import logging
from pathlib import Path

import numpy as np

import encoder
import mil_head
from encoder import EncoderConfig, EncoderParams
from errors import CheckpointError
from mil_head import HeadConfig, HeadParams, StatementScores
from statement_segmenter import TokenizedFunction
from tensor_autodiff import ModelParams, load_tensors, save_tensors

logger = logging.getLogger(__name__)


class VulnModel:
    """
    Encoder plus max/mean pooling classifiers.

    Attributes:
        encoder_config (EncoderConfig): Encoder shape.
        head_config (HeadConfig): Fusion settings.
        encoder_params (EncoderParams): Encoder tensors.
        head_params (HeadParams): Classifier and fusion tensors.
    """

    def __init__(self, encoder_config: EncoderConfig, head_config: HeadConfig,
                 encoder_params: EncoderParams, head_params: HeadParams):
        self.encoder_config = encoder_config
        self.head_config = head_config
        self.encoder_params = encoder_params
        self.head_params = head_params

    @classmethod
    def initialize(cls, encoder_config: EncoderConfig, head_config: HeadConfig, seed: int) -> 'VulnModel':
        """
        Build a model with freshly drawn parameters.

        Args:
            encoder_config (EncoderConfig): Encoder shape.
            head_config (HeadConfig): Fusion settings.
            seed (int): Initialization seed.

        Returns:
            VulnModel: The new model.
        """
        rng = np.random.default_rng(seed)
        encoder_params = EncoderParams.initialize(encoder_config, rng)
        head_params = HeadParams.initialize(encoder_config.hidden, head_config, rng)
        return cls(encoder_config, head_config, encoder_params, head_params)

    def parameters(self) -> ModelParams:
        params = self.encoder_params.named()
        params.update(self.head_params.named())
        return params

    def forward(self, tokens: TokenizedFunction, mode: str = 'eval',
                rng: np.random.Generator | None = None) -> StatementScores:
        """
        Score the statements of one function.

        Args:
            tokens (TokenizedFunction): Input tokens.
            mode (str): 'train' (dropout on) or 'eval'.
            rng (np.random.Generator | None): Dropout generator for train mode.

        Returns:
            StatementScores: Per-statement probabilities.
        """
        hidden = encoder.encode(tokens, self.encoder_params, self.encoder_config, mode, rng)
        return mil_head.classify_statements(hidden, tokens, self.head_params)

    def save(self, path: Path):
        """
        Write every parameter and both configs to a checkpoint file.

        Args:
            path (Path): Destination file.

        Returns:
            None
        """
        meta = {'encoder': self.encoder_config.to_dict(), 'head': self.head_config.to_dict()}
        save_tensors(path, self.parameters(), meta)
        logger.info('saved checkpoint to %s', path)

    @classmethod
    def load(cls, path: Path) -> 'VulnModel':
        """
        Restore a model written by `save`.

        Args:
            path (Path): Checkpoint file.

        Returns:
            VulnModel: The restored model.
        """
        arrays, meta = load_tensors(path)
        try:
            encoder_config = EncoderConfig(**meta['encoder'])
            head_config = HeadConfig(**meta['head'])
        except (KeyError, TypeError) as e:
            raise CheckpointError(f'{path}: checkpoint metadata is incomplete: {e}') from e
        model = cls.initialize(encoder_config, head_config, seed=0)
        params = model.parameters()
        if set(arrays) != set(params):
            missing = sorted(set(params) - set(arrays))
            extra = sorted(set(arrays) - set(params))
            raise CheckpointError(f'{path}: tensors do not match the model (missing {missing}, extra {extra})')
        for name, tensor in params.items():
            if arrays[name].shape != tensor.shape:
                raise CheckpointError(f'{path}: {name} has shape {arrays[name].shape}, expected {tensor.shape}')
            tensor.assign(arrays[name])
        return model

    def copy(self) -> 'VulnModel':
        """Deep copy of the parameters, used to keep the best checkpoint in memory."""
        clone = VulnModel.initialize(self.encoder_config, self.head_config, seed=0)
        source = self.parameters()
        for name, tensor in clone.parameters().items():
            tensor.assign(source[name].data)
        return clone
