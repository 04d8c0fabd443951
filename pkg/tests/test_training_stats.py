import json

import pytest

from errors import ConfigError
from training_stats import EpochRecord, TrainingStats


def record(epoch, val_f1=None, val_loss=None, train_loss=1.0) -> EpochRecord:
    return EpochRecord(epoch, train_loss, val_f1, 0.5 if val_f1 is not None else None, val_loss)


class TestImprovement:

    def test_higher_f1_wins(self):
        stats = TrainingStats()
        assert stats.update(record(1, 0.4, 0.9))
        assert stats.update(record(2, 0.6, 1.2))
        assert not stats.update(record(3, 0.5, 0.1))
        assert stats.best_epoch == 2
        assert stats.epochs_without_improvement == 1

    def test_equal_f1_breaks_ties_on_validation_loss(self):
        stats = TrainingStats()
        stats.update(record(1, 0.5, 0.8))
        assert stats.update(record(2, 0.5, 0.7))
        assert not stats.update(record(3, 0.5, 0.7))
        assert stats.best_epoch == 2

    def test_min_delta(self):
        stats = TrainingStats(min_delta=0.05)
        stats.update(record(1, 0.50, 0.8))
        assert not stats.update(record(2, 0.52, 0.8))
        assert stats.update(record(3, 0.60, 0.8))

    def test_training_loss_monitor(self):
        stats = TrainingStats('train_loss')
        assert stats.update(record(1, train_loss=0.7))
        assert not stats.update(record(2, train_loss=0.8))
        assert stats.update(record(3, train_loss=0.6))
        assert stats.best_value == 0.6

    def test_records_carry_best_so_far(self):
        stats = TrainingStats()
        first, second = record(1, 0.7, 0.5), record(2, 0.3, 0.4)
        stats.update(first)
        stats.update(second)
        assert first.improved and not second.improved
        assert second.best_so_far == 0.7
        assert json.loads(second.log_line()) == {
            'epoch': 2, 'train_loss': 1.0, 'val_f1': 0.3, 'val_acc': 0.5, 'best_so_far': 0.7}

    def test_unknown_monitor(self):
        with pytest.raises(ConfigError):
            TrainingStats('val_acc')

    def test_reset(self):
        stats = TrainingStats()
        stats.update(record(1, 0.7, 0.5))
        stats.reset_stats()
        assert stats.history == []
        assert stats.best_epoch == 0


def test_save_history(tmp_path):
    stats = TrainingStats()
    stats.update(record(1, 0.7, 0.5))
    stats.save(tmp_path / 'run' / 'history.json')
    saved = json.loads((tmp_path / 'run' / 'history.json').read_text())
    assert saved['best_epoch'] == 1
    assert saved['best_value'] == 0.7
    assert saved['history'][0]['improved'] is True


def test_plot_writes_an_image(tmp_path):
    stats = TrainingStats()
    for epoch, f1 in enumerate([0.2, 0.5, 0.4], start=1):
        stats.update(record(epoch, f1, 1.0 / epoch))
    stats.plot(tmp_path / 'history.png')
    assert (tmp_path / 'history.png').read_bytes()[:8] == b'\x89PNG\r\n\x1a\n'
