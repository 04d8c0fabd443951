"""Desk-scale learning runs on the synthetic corpus. Minutes each; run with `pytest -m slow`."""

import pytest

from corpus import SyntheticSpec, generate_synthetic, split_dataset
from encoder import EncoderConfig
from inference_metrics import EvalConfig, evaluate
from mil_head import HeadConfig
from model import VulnModel
from statement_segmenter import filter_truncation_conflicts, statement_texts, tokenize_dataset, train_bpe
from trainer import TrainConfig, train

pytestmark = pytest.mark.slow

DESK_ENCODER = EncoderConfig(layers=2, heads=2, hidden=64, ffn_dim=256, max_len=512, vocab_size=1024)


def prepare(spec: SyntheticSpec):
    splits = split_dataset(generate_synthetic(spec))
    vocab = train_bpe([t for s in splits['train'] for t in statement_texts(s)], DESK_ENCODER.vocab_size)
    train_items = filter_truncation_conflicts(tokenize_dataset(splits['train'], vocab, DESK_ENCODER.max_len))
    valid_items = tokenize_dataset(splits['valid'], vocab, DESK_ENCODER.max_len)
    test_items = tokenize_dataset(splits['test'], vocab, DESK_ENCODER.max_len)
    return train_items, valid_items, test_items


def fit(items, valid, k: int, max_epochs: int = 30):
    model = VulnModel.initialize(DESK_ENCODER, HeadConfig(), seed=0)
    return train(items, model, TrainConfig(k=k, max_epochs=max_epochs, lr=1e-3, seed=0), valid)


@pytest.fixture(scope='module')
def planted_corpus():
    return prepare(SyntheticSpec(seed=0))


def test_function_labels_alone_localize_planted_lines(planted_corpus):
    train_items, valid_items, test_items = planted_corpus
    assert len(valid_items) == len(test_items) == 50
    best, stats = fit(train_items, valid_items, k=3)
    report = evaluate(best, test_items, EvalConfig())
    assert report.function_level.f1 >= 0.95
    assert report.ranking.top_k[1] >= 0.90
    assert report.ranking.mfr <= 1.5
    assert report.ranking.ifa == report.ranking.mfr - 1.0
    if len(stats.history) >= 10:
        assert stats.history[9].train_loss < stats.history[0].train_loss


def test_larger_k_trades_precision_for_recall():
    train_items, valid_items, test_items = prepare(SyntheticSpec(seed=1, vulnerable_lines_range=(1, 1)))
    narrow = evaluate(fit(train_items, valid_items, k=1)[0], test_items).statement_level
    wide = evaluate(fit(train_items, valid_items, k=5)[0], test_items).statement_level
    assert narrow.precision > wide.precision
    assert wide.recall >= narrow.recall
