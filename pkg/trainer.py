"""
Trainer Module

This module trains the model from function-level labels only. After every
forward pass the top-k statements of each function (by fused score) receive
the function's label as pseudo-labels, and the cross-entropy over exactly
those statements is minimized with AdamW. Validation F1 after each epoch
drives best-checkpoint selection and early stopping.

date: 10/18/2026
"""

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

import tensor_autodiff as ad
from errors import ConfigError, NumericError, TrainingError
from inference_metrics import confusion_and_prf, predict_function
from mil_head import StatementScores
from model import VulnModel
from statement_segmenter import TokenizedSample
from tensor_autodiff import AdamW, Tensor, no_grad
from training_stats import EpochRecord, TrainingStats

logger = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    """
    Optimization settings.

    Attributes:
        k (int): Statements per function that receive pseudo-labels.
        batch_size (int): Functions per update.
        lr (float): AdamW learning rate (2e-5 at full scale).
        max_epochs (int): Epoch limit.
        patience (int): Epochs without improvement before stopping.
        seed (int): Seed for subsetting, shuffling and dropout.
        betas (tuple[float, float]): AdamW moment decay rates.
        eps (float): AdamW denominator floor.
        weight_decay (float): Decoupled weight decay on matrices.
        train_fraction (float): Share of the training split used, drawn with the seed.
        min_delta (float): Smallest validation change that counts as improvement.
    """
    k: int = 3
    batch_size: int = 16
    lr: float = 1e-3
    max_epochs: int = 50
    patience: int = 10
    seed: int = 0
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    weight_decay: float = 0.01
    train_fraction: float = 1.0
    min_delta: float = 0.0

    def __post_init__(self):
        self.betas = tuple(float(b) for b in self.betas)
        if self.k < 1:
            raise ConfigError(f'k must be at least 1, got {self.k}')
        if self.patience < 1:
            raise ConfigError(f'patience must be at least 1, got {self.patience}')
        if self.batch_size < 1 or self.max_epochs < 1:
            raise ConfigError('batch_size and max_epochs must be positive')
        if self.lr < 0.0 or self.weight_decay < 0.0 or self.min_delta < 0.0:
            raise ConfigError('lr, weight_decay and min_delta must be non-negative')
        if len(self.betas) != 2 or not all(0.0 <= b < 1.0 for b in self.betas):
            raise ConfigError(f'betas must be two numbers in [0, 1), got {self.betas}')
        if not 0.0 < self.train_fraction <= 1.0:
            raise ConfigError(f'train_fraction must lie in (0, 1], got {self.train_fraction}')

    def to_dict(self) -> dict:
        return {'k': self.k, 'batch_size': self.batch_size, 'lr': self.lr, 'max_epochs': self.max_epochs,
                'patience': self.patience, 'seed': self.seed, 'betas': list(self.betas), 'eps': self.eps,
                'weight_decay': self.weight_decay, 'train_fraction': self.train_fraction,
                'min_delta': self.min_delta}


@dataclass
class PseudoLabelAssignment:
    """
    Pseudo-labels of one function.

    Attributes:
        selected (np.ndarray): Selected statement indices, best score first.
        positions (np.ndarray): Positions of those statements in the score arrays.
        label (int): Label given to every selected statement (the function label).
    """
    selected: np.ndarray
    positions: np.ndarray
    label: int


def select_topk_pseudo_labels(scores: StatementScores | Sequence[float], label: int, k: int) -> PseudoLabelAssignment:
    """
    Pick the top-min(k, m_eff) statements by fused score and give them the function label.

    Non-vulnerable functions are treated the same way, so every function
    contributes the same number of pseudo-labeled statements whatever its label.

    Args:
        scores (StatementScores | Sequence[float]): Fused scores; a plain
            sequence is indexed 0..m-1.
        label (int): Function label Y.
        k (int): Requested selection size.

    Returns:
        PseudoLabelAssignment: Selected statements, ties resolved to the lower index.
    """
    if isinstance(scores, StatementScores):
        values, indices = scores.p, scores.statement_indices
    else:
        values = np.asarray(scores, dtype=np.float64)
        indices = np.arange(values.size)
    if values.size == 0:
        raise TrainingError('cannot select pseudo-labels from a function without scored statements')
    positions = np.argsort(-values, kind='stable')[:min(k, values.size)]
    return PseudoLabelAssignment(selected=indices[positions], positions=positions, label=int(label))


def mil_loss(batch: Sequence[tuple[StatementScores, PseudoLabelAssignment]]) -> Tensor:
    """
    Cross-entropy over the pseudo-labeled statements, averaged per function then over the batch.

    Args:
        batch (Sequence[tuple[StatementScores, PseudoLabelAssignment]]): Scores from
            the current forward pass and the selection made from them.

    Returns:
        Tensor: Scalar loss.
    """
    if not batch:
        raise TrainingError('mil_loss needs at least one function')
    total = None
    for scores, assignment in batch:
        if scores.p_tensor is None:
            raise TrainingError('scores carry no autodiff tensor; run the model forward first')
        selected = ad.gather_rows(scores.p_tensor, assignment.positions)
        loss = ad.cross_entropy(selected, np.full(selected.shape, assignment.label))
        total = loss if total is None else ad.add(total, loss)
    return ad.scale(total, 1.0 / len(batch))


def batch_loss(model: VulnModel, batch: Sequence[TokenizedSample], k: int, mode: str = 'train',
               rng: np.random.Generator | None = None) -> Tensor:
    """
    Forward a batch, select pseudo-labels from the same pass and return the MIL loss.

    Args:
        model (VulnModel): Model being trained.
        batch (Sequence[TokenizedSample]): Functions with their labels.
        k (int): Pseudo-labels per function.
        mode (str): 'train' or 'eval'.
        rng (np.random.Generator | None): Dropout generator.

    Returns:
        Tensor: Scalar loss.
    """
    pairs = []
    for item in batch:
        scores = model.forward(item.tokens, mode, rng)
        pairs.append((scores, select_topk_pseudo_labels(scores, item.sample.label, k)))
    return mil_loss(pairs)


def validate(model: VulnModel, valid: Sequence[TokenizedSample], k: int,
             threshold: float = 0.5) -> tuple[float, float, float]:
    """
    Function-level F1 and accuracy plus the MIL loss on the validation split.

    Args:
        model (VulnModel): Model to score.
        valid (Sequence[TokenizedSample]): Validation functions.
        k (int): Pseudo-labels per function for the loss.
        threshold (float): Statement threshold.

    Returns:
        tuple[float, float, float]: (f1, accuracy, loss).
    """
    predicted, losses = [], []
    with no_grad():
        for item in valid:
            scores = model.forward(item.tokens, 'eval')
            predicted.append(predict_function(scores, threshold).label)
            assignment = select_topk_pseudo_labels(scores, item.sample.label, k)
            losses.append(mil_loss([(scores, assignment)]).item())
    confusion = confusion_and_prf(predicted, [item.sample.label for item in valid])
    return confusion.f1, confusion.acc, float(np.mean(losses))


def _subset(items: list[TokenizedSample], fraction: float, rng: np.random.Generator) -> list[TokenizedSample]:
    if fraction >= 1.0:
        return items
    count = max(1, int(round(len(items) * fraction)))
    keep = np.sort(rng.choice(len(items), size=count, replace=False))
    logger.info('training on %d of %d functions (fraction %.3f)', count, len(items), fraction)
    return [items[i] for i in keep]


def train(dataset: Sequence[TokenizedSample], model: VulnModel, config: TrainConfig,
          valid: Sequence[TokenizedSample] | None = None,
          threshold: float = 0.5) -> tuple[VulnModel, TrainingStats]:
    """
    Train with top-k pseudo-labels and early stopping.

    Every epoch shuffles the training functions with the seeded generator,
    then for each batch runs the forward pass in train mode, re-selects the
    pseudo-labels from that pass, backpropagates and takes one AdamW step.

    Args:
        dataset (Sequence[TokenizedSample]): Training functions, already
            filtered for truncation conflicts.
        model (VulnModel): Initialized model; updated in place.
        config (TrainConfig): Optimization settings.
        valid (Sequence[TokenizedSample] | None): Validation functions.
        threshold (float): Statement threshold for validation predictions.

    Returns:
        tuple[VulnModel, TrainingStats]: Copy of the best model and the run history.
    """
    items = list(dataset)
    if not items:
        raise TrainingError('training split is empty')
    valid = list(valid or [])
    subset_rng, shuffle_rng, dropout_rng = (np.random.default_rng(s)
                                            for s in np.random.SeedSequence(config.seed).spawn(3))
    items = _subset(items, config.train_fraction, subset_rng)

    if valid:
        stats = TrainingStats('val_f1', config.min_delta)
    else:
        logger.warning('validation split is empty; early stopping monitors the training loss')
        stats = TrainingStats('train_loss', config.min_delta)

    optimizer = AdamW(model.parameters(), lr=config.lr, betas=config.betas, eps=config.eps,
                      weight_decay=config.weight_decay)
    best = model.copy()
    for epoch in range(1, config.max_epochs + 1):
        order = shuffle_rng.permutation(len(items))
        weighted_loss = 0.0
        for step, start in enumerate(range(0, len(items), config.batch_size), start=1):
            batch = [items[i] for i in order[start:start + config.batch_size]]
            try:
                optimizer.zero_grad()
                loss = batch_loss(model, batch, config.k, 'train', dropout_rng)
                loss.backward()
                optimizer.step()
            except NumericError as e:
                raise TrainingError(f'training diverged at epoch {epoch}, step {step}: {e}') from e
            weighted_loss += loss.item() * len(batch)

        val_f1 = val_acc = val_loss = None
        if valid:
            val_f1, val_acc, val_loss = validate(model, valid, config.k, threshold)
        record = EpochRecord(epoch, weighted_loss / len(items), val_f1, val_acc, val_loss)
        if stats.update(record):
            best = model.copy()
        logger.info(record.log_line())

        if stats.epochs_without_improvement >= config.patience:
            logger.info('early stopping after epoch %d; best epoch %d', epoch, stats.best_epoch)
            break
    return best, stats
