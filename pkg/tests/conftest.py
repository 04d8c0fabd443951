"""Shared fixtures: a small vocabulary, tiny models and hand-written functions."""

from pathlib import Path

import numpy as np
import pytest

from encoder import EncoderConfig
from mil_head import HeadConfig
from model import VulnModel
from statement_segmenter import FunctionSample, TokenizedSample, tokenize_function, train_bpe

FIXTURES = Path(__file__).parent / 'fixtures'

SOURCES = [
    'int f(char *src) {\n    char buf[8];\n    strcpy(buf, src);\n    return 0;\n}\n',
    'int g(int n) {\n    int total = 0;\n    total += n;\n    return total;\n}\n',
    'void h(char *msg) {\n    log_value(msg);\n    if (!msg) return;\n}\n',
]


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope='session')
def vocab():
    return train_bpe(SOURCES * 2, vocab_size=300)


@pytest.fixture
def samples() -> list[FunctionSample]:
    return [
        FunctionSample('f', SOURCES[0], 1, frozenset({2})),
        FunctionSample('g', SOURCES[1], 0, frozenset()),
        FunctionSample('h', SOURCES[2], 0),
    ]


@pytest.fixture
def tokenized(samples, vocab) -> list[TokenizedSample]:
    return [TokenizedSample(s, tokenize_function(s, vocab, max_len=64)) for s in samples]


@pytest.fixture
def tiny_config() -> EncoderConfig:
    return EncoderConfig(layers=1, heads=1, hidden=4, ffn_dim=8, max_len=64, vocab_size=300, dropout_rate=0.0)


@pytest.fixture
def tiny_model(tiny_config) -> VulnModel:
    return VulnModel.initialize(tiny_config, HeadConfig(), seed=7)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
