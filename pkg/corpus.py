"""
Corpus Module

This module reads and writes datasets and builds new ones. Datasets are JSON
Lines files of function records. Statement labels can be derived from
before/after fix pairs with a line-level longest-common-subsequence diff, and
a seeded generator builds a synthetic corpus of pseudo-C functions with
planted vulnerable lines for desk-scale experiments.

date: 10/18/2026
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

from errors import ConfigError, DatasetError, SegmentationError
from statement_segmenter import SPLITS, FunctionSample, Statement, segment_statements, strip_comments

logger = logging.getLogger(__name__)

RECORD_KEYS = ('id', 'code', 'label', 'vulnerable_lines', 'cwe', 'split')
FIX_PAIR_KEYS = ('id', 'code_before', 'code_after')

PLANTED_PATTERNS = (
    'strcpy({buf}, {src});',
    'memcpy({buf}, {src}, {n} * sizeof(int));',
    'gets({buf});',
    'sprintf({buf}, "%s", {src});',
)
BENIGN_TEMPLATES = (
    'int {var} = {other} + {n};',
    '{var} = {var} * {n};',
    'if ({var} > {n}) {var} = {other};',
    '{var} = check_bounds({other}, {n});',
    'log_value({var});',
    'while ({var} < {n}) {var}++;',
    'size_t {var} = strlen({src});',
    '{var} -= {other};',
    'total += {var};',
    'if (!{src}) return -1;',
)
VARIABLES = ('count', 'len', 'idx', 'total', 'size', 'offset', 'value', 'flag', 'tmp', 'result')
BUFFERS = ('buf', 'dst', 'name', 'path', 'line')
SOURCES = ('input', 'src', 'data', 'msg')
TRAILING_COMMENTS = ('// update', '/* keep */', '// loop guard', '// note: value is cached')


@dataclass(frozen=True)
class FixPair:
    """
    A function before and after its fixing commit.

    Attributes:
        id (str): Function id.
        before (str): Source before the fix.
        after (str): Source after the fix.
        cwe (str | None): Optional CWE tag, passed through.
    """
    id: str
    before: str
    after: str
    cwe: str | None = None


def _lcs_table(a: Sequence[str], b: Sequence[str]) -> np.ndarray:
    table = np.zeros((len(a) + 1, len(b) + 1), dtype=np.int64)
    for i in range(len(a) - 1, -1, -1):
        for j in range(len(b) - 1, -1, -1):
            if a[i] == b[j]:
                table[i, j] = table[i + 1, j + 1] + 1
            else:
                table[i, j] = max(table[i + 1, j], table[i, j + 1])
    return table


def line_opcodes(a: Sequence[str], b: Sequence[str]) -> list[tuple[str, int, int, int, int]]:
    """
    Edit script between two line lists from a longest common subsequence.

    When two alignments are equally long, lines of `a` are dropped before
    lines of `b` are inserted.

    Args:
        a (Sequence[str]): Old lines.
        b (Sequence[str]): New lines.

    Returns:
        list[tuple[str, int, int, int, int]]: (tag, i1, i2, j1, j2) runs with tag
            'equal', 'delete', 'insert' or 'replace', covering both inputs in order.
    """
    table = _lcs_table(a, b)
    steps = []
    i = j = 0
    while i < len(a) or j < len(b):
        if i < len(a) and j < len(b) and a[i] == b[j]:
            steps.append(('equal', i, j))
            i += 1
            j += 1
        elif j == len(b) or (i < len(a) and table[i + 1, j] >= table[i, j + 1]):
            steps.append(('delete', i, j))
            i += 1
        else:
            steps.append(('insert', i, j))
            j += 1

    opcodes = []
    for tag, i, j in steps:
        di, dj = (1, 1) if tag == 'equal' else (1, 0) if tag == 'delete' else (0, 1)
        if opcodes and (opcodes[-1][0] == tag or (tag != 'equal' and opcodes[-1][0] != 'equal')):
            last, i1, i2, j1, j2 = opcodes[-1]
            merged = last if last == tag else 'replace'
            opcodes[-1] = (merged, i1, i2 + di, j1, j2 + dj)
        else:
            opcodes.append((tag, i, i + di, j, j + dj))
    return opcodes


def _statements_or_empty(source: str) -> list[Statement]:
    try:
        return segment_statements(strip_comments(source))
    except SegmentationError:
        return []


def label_statements_from_fix(pair: FixPair, split: str = 'train') -> FunctionSample:
    """
    Label the pre-fix statements that the fix deleted or modified.

    Lines are compared after comment stripping, ignoring surrounding
    whitespace. A fix that only inserts lines is anchored to the pre-fix
    line preceding each insertion (the first line when the insertion comes
    first).

    Args:
        pair (FixPair): Before/after sources.
        split (str): Split given to the resulting sample.

    Returns:
        FunctionSample: The pre-fix function, labeled 1 iff some line was labeled.
    """
    before = _statements_or_empty(pair.before)
    after = _statements_or_empty(pair.after)
    if not before:
        raise DatasetError(f'{pair.id}: pre-fix source has no statements')
    opcodes = line_opcodes([s.text for s in before], [s.text for s in after])

    labeled = set()
    for tag, i1, i2, _, _ in opcodes:
        if tag in ('delete', 'replace'):
            labeled.update(range(i1, i2))
    if not labeled:
        for tag, i1, _, _, _ in opcodes:
            if tag == 'insert':
                if i1 == 0:
                    logger.warning('%s: insertion before the first statement anchored to line %d; label may be noisy',
                                   pair.id, before[0].line)
                labeled.add(max(i1 - 1, 0))

    if not labeled:
        logger.warning('%s: fix pair has identical statements; labeled non-vulnerable', pair.id)
        return FunctionSample(pair.id, pair.before, 0, frozenset(), pair.cwe, split)
    return FunctionSample(pair.id, pair.before, 1, frozenset(before[i].line for i in labeled), pair.cwe, split)


def label_fix_pairs(pairs: Iterable[FixPair], split: str = 'train') -> list[FunctionSample]:
    return [label_statements_from_fix(pair, split) for pair in pairs]


def _read_json_lines(path: Path) -> Iterable[tuple[int, dict]]:
    path = Path(path)
    with path.open(encoding='utf-8') as f:
        for line_number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise DatasetError(f'{path}: malformed JSON: {e.msg}', line_number) from e
            if not isinstance(record, dict):
                raise DatasetError(f'{path}: record must be a JSON object', line_number)
            yield line_number, record


def load_fix_pairs(path: Path) -> list[FixPair]:
    """
    Read fix pairs from JSON Lines records {id, code_before, code_after[, cwe]}.

    Args:
        path (Path): Input file.

    Returns:
        list[FixPair]: Pairs in file order.
    """
    pairs = []
    seen = set()
    for line_number, record in _read_json_lines(path):
        missing = [key for key in FIX_PAIR_KEYS if key not in record]
        if missing:
            raise DatasetError(f'{path}: missing field(s) {", ".join(missing)}', line_number)
        if not all(isinstance(record[key], str) for key in FIX_PAIR_KEYS):
            raise DatasetError(f'{path}: id, code_before and code_after must be strings', line_number)
        if record['id'] in seen:
            raise DatasetError(f'{path}: duplicate id {record["id"]!r}', line_number)
        seen.add(record['id'])
        pairs.append(FixPair(record['id'], record['code_before'], record['code_after'], record.get('cwe')))
    if not pairs:
        raise DatasetError(f'{path}: no fix pairs')
    return pairs


def _sample_from_record(record: dict) -> FunctionSample:
    unknown = sorted(set(record) - set(RECORD_KEYS))
    if unknown:
        raise DatasetError(f'unknown field(s) {", ".join(unknown)}')
    missing = [key for key in ('id', 'code', 'label') if key not in record]
    if missing:
        raise DatasetError(f'missing field(s) {", ".join(missing)}')
    if not isinstance(record['id'], str) or not isinstance(record['code'], str):
        raise DatasetError('id and code must be strings')
    label = record['label']
    if isinstance(label, bool) or not isinstance(label, int):
        raise DatasetError(f'{record["id"]}: label must be 0 or 1, got {label!r}')
    lines = record.get('vulnerable_lines')
    if lines is not None and (not isinstance(lines, list)
                              or not all(isinstance(i, int) and not isinstance(i, bool) for i in lines)):
        raise DatasetError(f'{record["id"]}: vulnerable_lines must be a list of integers')
    return FunctionSample(
        id=record['id'],
        source=record['code'],
        label=label,
        vulnerable_lines=frozenset(lines) if lines is not None else None,
        cwe=record.get('cwe'),
        split=record.get('split', 'train'),
    )


def load_dataset(path: Path) -> list[FunctionSample]:
    """
    Read and validate a JSON Lines dataset.

    Every vulnerable line index must name a non-blank line of the
    comment-stripped source.

    Args:
        path (Path): Input file.

    Returns:
        list[FunctionSample]: Samples in file order.
    """
    samples = []
    seen = set()
    for line_number, record in _read_json_lines(path):
        try:
            sample = _sample_from_record(record)
            statement_lines = {s.line for s in segment_statements(strip_comments(sample.source))}
        except (DatasetError, SegmentationError) as e:
            raise DatasetError(f'{path}: {e}', line_number) from e
        if sample.id in seen:
            raise DatasetError(f'{path}: duplicate id {sample.id!r}', line_number)
        stray = sorted((sample.vulnerable_lines or frozenset()) - statement_lines)
        if stray:
            raise DatasetError(f'{path}: {sample.id}: vulnerable_lines {stray} are not statement lines', line_number)
        seen.add(sample.id)
        samples.append(sample)
    if not samples:
        raise DatasetError(f'{path}: dataset is empty')
    logger.info('loaded %d functions from %s', len(samples), path)
    return samples


def sample_record(sample: FunctionSample) -> dict:
    lines = sorted(sample.vulnerable_lines) if sample.vulnerable_lines is not None else None
    values = (sample.id, sample.source, sample.label, lines, sample.cwe, sample.split)
    return dict(zip(RECORD_KEYS, values))


def save_dataset(path: Path, samples: Iterable[FunctionSample]):
    """
    Write samples as JSON Lines with a fixed key order.

    Args:
        path (Path): Destination file; parent directories are created.
        samples (Iterable[FunctionSample]): Samples to write.

    Returns:
        None
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open('w', encoding='utf-8', newline='\n') as f:
        for sample in samples:
            f.write(json.dumps(sample_record(sample), ensure_ascii=False) + '\n')


def split_dataset(samples: Iterable[FunctionSample]) -> dict[str, list[FunctionSample]]:
    """Group samples by split, keeping file order inside each split."""
    groups = {split: [] for split in SPLITS}
    for sample in samples:
        groups[sample.split].append(sample)
    return groups


@dataclass
class SyntheticSpec:
    """
    Parameters of the synthetic planted-vulnerability corpus.

    Attributes:
        function_count (int): Number of functions.
        vulnerable_fraction (float): Probability that a function is vulnerable.
        statement_range (tuple[int, int]): Inclusive range of statements per function.
        patterns (tuple[str, ...]): Planted line templates; fields {buf}, {src}, {n}.
        vulnerable_lines_range (tuple[int, int]): Inclusive range of planted lines
            per vulnerable function.
        seed (int): Generator seed.
        split_fractions (tuple[float, float, float]): Train/valid/test shares.
    """
    function_count: int = 300
    vulnerable_fraction: float = 0.3
    statement_range: tuple[int, int] = (8, 20)
    patterns: tuple[str, ...] = PLANTED_PATTERNS
    vulnerable_lines_range: tuple[int, int] = (1, 3)
    seed: int = 0
    split_fractions: tuple[float, float, float] = (4 / 6, 1 / 6, 1 / 6)

    def __post_init__(self):
        self.statement_range = tuple(self.statement_range)
        self.vulnerable_lines_range = tuple(self.vulnerable_lines_range)
        self.patterns = tuple(self.patterns)
        self.split_fractions = tuple(float(f) for f in self.split_fractions)
        low, high = self.statement_range
        lines_low, lines_high = self.vulnerable_lines_range
        if self.function_count < 1:
            raise ConfigError(f'function_count must be positive, got {self.function_count}')
        if not 0.0 <= self.vulnerable_fraction <= 1.0:
            raise ConfigError(f'vulnerable_fraction must lie in [0, 1], got {self.vulnerable_fraction}')
        if low < 3 or high < low:
            raise ConfigError(f'statement_range must be an increasing pair starting at 3 or more, '
                              f'got {self.statement_range}')
        if lines_low < 1 or lines_high < lines_low or lines_high > low - 2:
            raise ConfigError(f'vulnerable_lines_range must lie in [1, {low - 2}], got {self.vulnerable_lines_range}')
        if not self.patterns:
            raise ConfigError('at least one planted pattern is needed')
        if len(self.split_fractions) != 3 or min(self.split_fractions) < 0.0 \
                or abs(sum(self.split_fractions) - 1.0) > 1e-9:
            raise ConfigError(f'split_fractions must be three non-negative shares summing to 1, '
                              f'got {self.split_fractions}')


def _fill(template: str, rng: np.random.Generator) -> str:
    variable, other = rng.choice(len(VARIABLES), size=2, replace=False)
    return template.format(
        var=VARIABLES[variable],
        other=VARIABLES[other],
        buf=BUFFERS[rng.integers(len(BUFFERS))],
        src=SOURCES[rng.integers(len(SOURCES))],
        n=int(rng.integers(1, 100)),
    )


def _synthetic_function(index: int, vulnerable: bool, spec: SyntheticSpec,
                        rng: np.random.Generator) -> tuple[str, frozenset[int]]:
    low, high = spec.statement_range
    count = int(rng.integers(low, high + 1))
    planted = frozenset()
    if vulnerable:
        lines_low, lines_high = spec.vulnerable_lines_range
        planted_count = int(rng.integers(lines_low, lines_high + 1))
        planted = frozenset(int(i) + 1 for i in rng.choice(count - 2, size=planted_count, replace=False))

    lines = [f'void handler_{index}(char *{SOURCES[index % len(SOURCES)]}, int limit) {{']
    for line in range(1, count - 1):
        if line in planted:
            text = _fill(spec.patterns[rng.integers(len(spec.patterns))], rng)
        else:
            text = _fill(BENIGN_TEMPLATES[rng.integers(len(BENIGN_TEMPLATES))], rng)
            if rng.random() < 0.1:
                text = f'{text} {TRAILING_COMMENTS[rng.integers(len(TRAILING_COMMENTS))]}'
        lines.append(f'    {text}')
    lines.append('}')
    return '\n'.join(lines) + '\n', planted


def _split_names(count: int, fractions: tuple[float, float, float], rng: np.random.Generator) -> list[str]:
    train = int(round(count * fractions[0]))
    valid = min(int(round(count * fractions[1])), count - train)
    names = ['train'] * train + ['valid'] * valid + ['test'] * (count - train - valid)
    order = rng.permutation(count)
    return [names[i] for i in order]


def generate_synthetic(spec: SyntheticSpec | None = None) -> list[FunctionSample]:
    """
    Build a seeded corpus of benign pseudo-C functions, some with planted lines.

    Lines are recorded in the source as written; planted lines never carry a
    comment, and every function keeps one statement per line, so the recorded
    indices are also comment-stripped line indices.

    Args:
        spec (SyntheticSpec | None): Generator parameters.

    Returns:
        list[FunctionSample]: Samples with train/valid/test splits.
    """
    spec = spec or SyntheticSpec()
    rng = np.random.default_rng(spec.seed)
    splits = _split_names(spec.function_count, spec.split_fractions, rng)
    samples = []
    for index in range(spec.function_count):
        vulnerable = bool(rng.random() < spec.vulnerable_fraction)
        source, planted = _synthetic_function(index, vulnerable, spec, rng)
        samples.append(FunctionSample(
            id=f'syn-{index:05d}',
            source=source,
            label=int(vulnerable),
            vulnerable_lines=planted,
            cwe='CWE-120' if vulnerable else None,
            split=splits[index],
        ))
    logger.info('generated %d synthetic functions (%d vulnerable)', len(samples),
                sum(s.label for s in samples))
    return samples


def dataset_stats(samples: Sequence[FunctionSample]) -> pd.DataFrame:
    """
    Per-split corpus statistics.

    Args:
        samples (Sequence[FunctionSample]): The dataset.

    Returns:
        pd.DataFrame: One row per non-empty split plus "all", with columns
            vul_functions, non_vul_functions, avg_stat_num and avg_vul_stat_num
            (NaN when no vulnerable function has line labels).
    """
    if not samples:
        raise DatasetError('cannot describe an empty dataset')
    rows = []
    for split, group in [*split_dataset(samples).items(), ('all', list(samples))]:
        if not group:
            continue
        statement_counts = [len(segment_statements(strip_comments(s.source))) for s in group]
        labeled = [len(s.vulnerable_lines) for s in group if s.label == 1 and s.vulnerable_lines]
        rows.append({
            'split': split,
            'vul_functions': sum(s.label for s in group),
            'non_vul_functions': sum(1 - s.label for s in group),
            'avg_stat_num': float(np.mean(statement_counts)),
            'avg_vul_stat_num': float(np.mean(labeled)) if labeled else np.nan,
        })
    return pd.DataFrame(rows).set_index('split')
