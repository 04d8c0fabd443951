"""
TrainingStats Module

This module defines the TrainingStats class, which tracks the statistics of
one training run: the per-epoch history of losses and validation metrics, the
best monitored score and the epoch it was reached, and the number of epochs
since the last improvement that drives early stopping. The history can be
saved to a JSON file and drawn as loss and F1 curves.

date: 10/18/2026
"""

import json
import logging
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import matplotlib

matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402

from errors import ConfigError  # noqa: E402

logger = logging.getLogger(__name__)

MONITORS = ('val_f1', 'train_loss')


@dataclass
class EpochRecord:
    """
    Statistics of one finished epoch.

    Attributes:
        epoch (int): 1-based epoch number.
        train_loss (float): Mean MIL loss over the training functions.
        val_f1 (float | None): Validation function-level F1, None without a validation split.
        val_acc (float | None): Validation function-level accuracy.
        val_loss (float | None): Validation MIL loss.
        best_so_far (float): Best monitored value after this epoch.
        improved (bool): Whether this epoch set a new best.
    """
    epoch: int
    train_loss: float
    val_f1: float | None
    val_acc: float | None
    val_loss: float | None
    best_so_far: float = 0.0
    improved: bool = False

    def log_line(self) -> str:
        fields = {'epoch': self.epoch, 'train_loss': self.train_loss, 'val_f1': self.val_f1,
                  'val_acc': self.val_acc, 'best_so_far': self.best_so_far}
        return json.dumps(fields, sort_keys=True)


class TrainingStats:
    """
    Tracks statistics for a training run.

    With a validation split the monitored quantity is validation F1 (higher
    is better) and ties are broken by a lower validation MIL loss; without
    one it is the training loss (lower is better).

    Attributes:
        monitor (str): 'val_f1' or 'train_loss'.
        min_delta (float): Smallest change that counts as an improvement.
        history (list[EpochRecord]): One record per finished epoch.
        best_f1 (float): Best validation F1 so far.
        best_loss (float): Monitored loss at the best epoch (validation loss,
            or training loss when monitoring it).
        best_epoch (int): Epoch of the best record, 0 before any epoch.
        epochs_without_improvement (int): Epochs since the best record.
    """

    def __init__(self, monitor: str = 'val_f1', min_delta: float = 0.0):
        """
        Initialize an empty history.

        Args:
            monitor (str): Monitored quantity.
            min_delta (float): Improvement margin.

        Returns:
            None
        """
        if monitor not in MONITORS:
            raise ConfigError(f'monitor must be one of {MONITORS}, got {monitor!r}')
        self.monitor = monitor
        self.min_delta = min_delta
        self.reset_stats()

    def reset_stats(self):
        """
        Forget every epoch, as at the start of a new run.

        Returns:
            None
        """
        self.history: list[EpochRecord] = []
        self.best_f1 = -math.inf
        self.best_loss = math.inf
        self.best_epoch = 0
        self.epochs_without_improvement = 0

    @property
    def best_value(self) -> float:
        return self.best_f1 if self.monitor == 'val_f1' else self.best_loss

    def update(self, record: EpochRecord) -> bool:
        """
        Add a finished epoch and update the best score.

        Args:
            record (EpochRecord): The epoch; `best_so_far` and `improved` are filled in.

        Returns:
            bool: True when the epoch is the new best.
        """
        improved = self._is_improvement(record)
        if improved:
            self._update_best(record)
            self.epochs_without_improvement = 0
        else:
            self.epochs_without_improvement += 1
        record.improved = improved
        record.best_so_far = self.best_value
        self.history.append(record)
        return improved

    def _is_improvement(self, record: EpochRecord) -> bool:
        if self.monitor == 'train_loss':
            return record.train_loss < self.best_loss - self.min_delta
        if record.val_f1 > self.best_f1 + self.min_delta:
            return True
        return record.val_f1 == self.best_f1 and record.val_loss < self.best_loss - self.min_delta

    def _update_best(self, record: EpochRecord):
        self.best_epoch = record.epoch
        if self.monitor == 'train_loss':
            self.best_loss = record.train_loss
        else:
            self.best_f1 = record.val_f1
            self.best_loss = record.val_loss

    def to_dict(self) -> dict:
        return {
            'monitor': self.monitor,
            'best_epoch': self.best_epoch,
            'best_value': self.best_value if self.best_epoch else None,
            'history': [asdict(record) for record in self.history],
        }

    def save(self, path: Path):
        """
        Write the history to a JSON file.

        Args:
            path (Path): Destination file; parent directories are created.

        Returns:
            None
        """
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=4, sort_keys=True) + '\n')
        logger.info('saved training history to %s', path)

    def plot(self, path: Path):
        """
        Draw training loss, validation loss and validation F1 per epoch.

        Args:
            path (Path): Destination image (format from the suffix, e.g. .png).

        Returns:
            None
        """
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        epochs = [r.epoch for r in self.history]
        fig, (loss_ax, f1_ax) = plt.subplots(1, 2, figsize=(10, 4))
        loss_ax.plot(epochs, [r.train_loss for r in self.history], marker='o', label='train')
        if self.monitor == 'val_f1':
            loss_ax.plot(epochs, [r.val_loss for r in self.history], marker='o', label='valid')
            f1_ax.plot(epochs, [r.val_f1 for r in self.history], marker='o', color='tab:green')
        if self.best_epoch:
            for ax in (loss_ax, f1_ax):
                ax.axvline(self.best_epoch, color='grey', linestyle='--', linewidth=1)
        loss_ax.set_title('MIL loss')
        loss_ax.set_xlabel('epoch')
        loss_ax.legend()
        f1_ax.set_title('validation F1')
        f1_ax.set_xlabel('epoch')
        f1_ax.set_ylim(0.0, 1.05)
        fig.tight_layout()
        fig.savefig(path, dpi=100)
        plt.close(fig)
        logger.info('saved training plot to %s', path)
