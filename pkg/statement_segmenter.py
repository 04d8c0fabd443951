"""
Statement Segmenter Module

This module turns raw function source into the model's input: comments are
stripped with a small literal-aware lexer, every remaining non-blank physical
line becomes one statement, and each statement is split into byte-level BPE
subword tokens. The per-token statement index it records is the sparse form
of the binary statement indicative matrix S (token i belongs to statement j).

date: 10/18/2026
"""

import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple

import numpy as np

from errors import DatasetError, SegmentationError, VocabError

logger = logging.getLogger(__name__)

SPLITS = ('train', 'valid', 'test')
BYTE_ALPHABET = 256
DEFAULT_VOCAB_SIZE = 4096
DEFAULT_MAX_LEN = 512
VOCAB_HEADER = '#vulnloc-bpe v1'

_CHUNK = re.compile(r'[A-Za-z_][A-Za-z0-9_]*|[0-9]+|\s+|.', re.DOTALL)


@dataclass(frozen=True)
class FunctionSample:
    """
    One source function with its function-level label.

    Attributes:
        id (str): Unique function identifier.
        source (str): Raw function text, comments included.
        label (int): 1 if the function as a whole is vulnerable, else 0.
        vulnerable_lines (frozenset[int] | None): 0-based line indices of vulnerable
            statements in the comment-stripped source; None when unknown.
        cwe (str | None): Optional CWE tag, passed through untouched.
        split (str): One of 'train', 'valid', 'test'.
    """
    id: str
    source: str
    label: int
    vulnerable_lines: frozenset[int] | None = None
    cwe: str | None = None
    split: str = 'train'

    def __post_init__(self):
        if self.label not in (0, 1):
            raise DatasetError(f'{self.id}: label must be 0 or 1, got {self.label!r}')
        if self.split not in SPLITS:
            raise DatasetError(f'{self.id}: split must be one of {SPLITS}, got {self.split!r}')
        if self.vulnerable_lines is not None:
            object.__setattr__(self, 'vulnerable_lines', frozenset(int(i) for i in self.vulnerable_lines))
            if self.label == 1 and not self.vulnerable_lines:
                raise DatasetError(f'{self.id}: vulnerable function with an empty vulnerable_lines set')
            if self.label == 0 and self.vulnerable_lines:
                raise DatasetError(f'{self.id}: non-vulnerable function lists vulnerable lines')
            if any(i < 0 for i in self.vulnerable_lines):
                raise DatasetError(f'{self.id}: vulnerable line indices must be non-negative')

    @property
    def has_line_labels(self) -> bool:
        """True when statement-level ground truth is known for this function."""
        return self.label == 0 or self.vulnerable_lines is not None


@dataclass(frozen=True)
class Statement:
    """
    One statement: a non-blank physical line of comment-stripped source.

    Attributes:
        index (int): Position in the function's statement list.
        line (int): 0-based line number in the comment-stripped source.
        text (str): The line with surrounding whitespace removed.
    """
    index: int
    line: int
    text: str


@dataclass(frozen=True)
class TokenizedFunction:
    """
    Model input for one function.

    Attributes:
        function_id (str): Id of the source sample.
        token_ids (np.ndarray): Subword ids, length n <= max_len.
        positions (np.ndarray): 0..n-1.
        statement_of_token (np.ndarray): Statement index of every token (sparse S).
        m (int): Statement count after segmentation, truncated statements included.
        truncated_statements (frozenset[int]): Statements with no surviving token.
        statement_lines (tuple[int, ...]): Source line of every statement.
    """
    function_id: str
    token_ids: np.ndarray
    positions: np.ndarray
    statement_of_token: np.ndarray
    m: int
    truncated_statements: frozenset[int]
    statement_lines: tuple[int, ...]

    @property
    def n(self) -> int:
        return int(self.token_ids.shape[0])

    @property
    def m_eff(self) -> int:
        """Number of statements with at least one surviving token."""
        return self.m - len(self.truncated_statements)

    @property
    def scored_statements(self) -> np.ndarray:
        """Indices of the statements that keep at least one token, ascending."""
        return np.unique(self.statement_of_token)


class TokenizedSample(NamedTuple):
    sample: FunctionSample
    tokens: TokenizedFunction


def strip_comments(source: str) -> str:
    """
    Remove `//` and `/* ... */` comments while respecting string and char literals.

    Line comments are cut up to (not including) the newline. A block comment
    is replaced by the newlines it contained, or by one space when it sat
    inside a single line, so the remaining code keeps its line numbers.

    Args:
        source (str): C/C++-like source text.

    Returns:
        str: The source without comments.
    """
    out = []
    i = 0
    size = len(source)
    while i < size:
        ch = source[i]
        nxt = source[i + 1] if i + 1 < size else ''
        if ch == '/' and nxt == '/':
            end = source.find('\n', i)
            i = size if end == -1 else end
        elif ch == '/' and nxt == '*':
            end = source.find('*/', i + 2)
            if end == -1:
                logger.warning('unterminated block comment; stripping to end of input')
                body = source[i + 2:]
                i = size
            else:
                body = source[i + 2:end]
                i = end + 2
            newlines = body.count('\n')
            out.append('\n' * newlines if newlines else ' ')
        elif ch in '"\'':
            j = i + 1
            while j < size and source[j] != ch and source[j] != '\n':
                j += 2 if source[j] == '\\' else 1
            j = min(j, size)
            if j < size and source[j] == ch:
                j += 1
            out.append(source[i:j])
            i = j
        else:
            out.append(ch)
            i += 1
    return ''.join(out)


def segment_statements(source: str) -> list[Statement]:
    """
    Split comment-stripped source into statements, one per non-blank line.

    Args:
        source (str): Comment-stripped function text.

    Returns:
        list[Statement]: Statements in source order.
    """
    statements = []
    for line_number, line in enumerate(source.split('\n')):
        text = line.strip()
        if text:
            statements.append(Statement(len(statements), line_number, text))
    if not statements:
        raise SegmentationError('no statements')
    return statements


def _chunks(text: str) -> list[bytes]:
    return [match.group(0).encode('utf-8') for match in _CHUNK.finditer(text)]


@dataclass
class BpeVocab:
    """
    Byte-level BPE vocabulary.

    Ids 0..255 are the raw bytes; id 256 + r is the token produced by merge r.

    Attributes:
        merges (list[tuple[bytes, bytes]]): Merge rules in learned order.
    """
    merges: list[tuple[bytes, bytes]] = field(default_factory=list)

    def __post_init__(self):
        self._ranks = {pair: rank for rank, pair in enumerate(self.merges)}
        self._tokens = [bytes([b]) for b in range(BYTE_ALPHABET)] + [a + b for a, b in self.merges]
        self._ids = {token: index for index, token in enumerate(self._tokens)}
        self._cache: dict[bytes, list[int]] = {}

    @property
    def vocab_size(self) -> int:
        return len(self._tokens)

    def token_bytes(self, token_id: int) -> bytes:
        return self._tokens[token_id]

    def _encode_chunk(self, chunk: bytes) -> list[int]:
        cached = self._cache.get(chunk)
        if cached is not None:
            return cached
        parts = [bytes([b]) for b in chunk]
        while len(parts) > 1:
            ranked = [(self._ranks.get(pair, len(self._ranks)), k)
                      for k, pair in enumerate(zip(parts, parts[1:]))]
            rank, k = min(ranked)
            if rank == len(self._ranks):
                break
            merged = parts[k] + parts[k + 1]
            first, second = self.merges[rank]
            rebuilt = []
            j = 0
            while j < len(parts):
                if j < len(parts) - 1 and parts[j] == first and parts[j + 1] == second:
                    rebuilt.append(merged)
                    j += 2
                else:
                    rebuilt.append(parts[j])
                    j += 1
            parts = rebuilt
        ids = [self._ids[part] for part in parts]
        self._cache[chunk] = ids
        return ids

    def encode(self, text: str) -> list[int]:
        """
        Tokenize text into subword ids.

        Args:
            text (str): Any text; unseen characters fall back to their bytes.

        Returns:
            list[int]: Token ids.
        """
        ids = []
        for chunk in _chunks(text):
            ids.extend(self._encode_chunk(chunk))
        return ids

    def decode(self, ids: Iterable[int]) -> str:
        return b''.join(self._tokens[i] for i in ids).decode('utf-8', errors='replace')


def train_bpe(corpus: Iterable[str], vocab_size: int = DEFAULT_VOCAB_SIZE) -> BpeVocab:
    """
    Learn BPE merges greedily from a corpus.

    Each step merges the most frequent adjacent pair; equal counts go to the
    lexicographically smallest pair. Merges never cross chunk boundaries
    (identifiers, numbers, whitespace runs, single symbols).

    Args:
        corpus (Iterable[str]): Training texts.
        vocab_size (int): Target size, byte alphabet included.

    Returns:
        BpeVocab: The learned vocabulary.
    """
    if vocab_size <= BYTE_ALPHABET:
        raise VocabError(f'vocab_size must exceed the byte alphabet ({BYTE_ALPHABET}), got {vocab_size}')
    words: Counter[tuple[bytes, ...]] = Counter()
    for text in corpus:
        for chunk in _chunks(text):
            words[tuple(bytes([b]) for b in chunk)] += 1
    if not words:
        raise VocabError('cannot train a vocabulary on an empty corpus')

    merges = []
    while BYTE_ALPHABET + len(merges) < vocab_size:
        pair_counts: Counter[tuple[bytes, bytes]] = Counter()
        for word, freq in words.items():
            for pair in zip(word, word[1:]):
                pair_counts[pair] += freq
        if not pair_counts:
            logger.warning('corpus exhausted after %d merges; vocabulary has %d of %d entries',
                           len(merges), BYTE_ALPHABET + len(merges), vocab_size)
            break
        best = min(pair_counts, key=lambda pair: (-pair_counts[pair], pair))
        merges.append(best)
        merged = best[0] + best[1]
        rewritten: Counter[tuple[bytes, ...]] = Counter()
        for word, freq in words.items():
            if len(word) > 1:
                word = _merge_word(word, best, merged)
            rewritten[word] += freq
        words = rewritten
    logger.info('trained BPE vocabulary with %d merges', len(merges))
    return BpeVocab(merges)


def _merge_word(word: tuple[bytes, ...], pair: tuple[bytes, bytes], merged: bytes) -> tuple[bytes, ...]:
    out = []
    j = 0
    while j < len(word):
        if j < len(word) - 1 and word[j] == pair[0] and word[j + 1] == pair[1]:
            out.append(merged)
            j += 2
        else:
            out.append(word[j])
            j += 1
    return tuple(out)


def save_vocab(vocab: BpeVocab, path: Path):
    """
    Write the merge list: a header line, then one merge per line as two hex byte strings.

    Args:
        vocab (BpeVocab): Vocabulary to store.
        path (Path): Destination file.

    Returns:
        None
    """
    lines = [VOCAB_HEADER] + [f'{a.hex()} {b.hex()}' for a, b in vocab.merges]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text('\n'.join(lines) + '\n', encoding='utf-8')


def load_vocab(path: Path) -> BpeVocab:
    """
    Read a merge list written by `save_vocab`.

    Args:
        path (Path): Vocabulary file.

    Returns:
        BpeVocab: The vocabulary.
    """
    lines = Path(path).read_text(encoding='utf-8').splitlines()
    if not lines or lines[0].strip() != VOCAB_HEADER:
        raise VocabError(f'{path}: missing header {VOCAB_HEADER!r}')
    merges = []
    for number, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            left, right = line.split()
            merges.append((bytes.fromhex(left), bytes.fromhex(right)))
        except ValueError as e:
            raise VocabError(f'{path}:{number}: malformed merge {line!r}') from e
    return BpeVocab(merges)


def statement_texts(sample: FunctionSample) -> list[str]:
    """Statement texts of a sample, as seen by the tokenizer."""
    return [s.text for s in segment_statements(strip_comments(sample.source))]


def tokenize_function(sample: FunctionSample, vocab: BpeVocab,
                      max_len: int = DEFAULT_MAX_LEN) -> TokenizedFunction:
    """
    Tokenize a function statement by statement and cut the sequence at max_len.

    Args:
        sample (FunctionSample): The function.
        vocab (BpeVocab): Trained vocabulary.
        max_len (int): Maximum number of tokens kept.

    Returns:
        TokenizedFunction: Token ids with statement membership and truncation record.
    """
    if max_len < 1:
        raise SegmentationError(f'max_len must be at least 1, got {max_len}')
    statements = segment_statements(strip_comments(sample.source))
    token_ids: list[int] = []
    owners: list[int] = []
    for statement in statements:
        ids = vocab.encode(statement.text)
        token_ids.extend(ids)
        owners.extend([statement.index] * len(ids))
        if len(token_ids) >= max_len:
            break
    token_ids = token_ids[:max_len]
    owners = owners[:max_len]
    if not token_ids:
        raise SegmentationError(f'{sample.id}: no tokens survive tokenization')
    surviving = set(owners)
    return TokenizedFunction(
        function_id=sample.id,
        token_ids=np.asarray(token_ids, dtype=np.int64),
        positions=np.arange(len(token_ids), dtype=np.int64),
        statement_of_token=np.asarray(owners, dtype=np.int64),
        m=len(statements),
        truncated_statements=frozenset(s.index for s in statements if s.index not in surviving),
        statement_lines=tuple(s.line for s in statements),
    )


def tokenize_dataset(samples: Iterable[FunctionSample], vocab: BpeVocab,
                     max_len: int = DEFAULT_MAX_LEN) -> list[TokenizedSample]:
    return [TokenizedSample(sample, tokenize_function(sample, vocab, max_len)) for sample in samples]


def dense_membership(tokens: TokenizedFunction) -> np.ndarray:
    """
    Rebuild the dense n x m statement indicative matrix.

    Args:
        tokens (TokenizedFunction): Tokenized function.

    Returns:
        np.ndarray: 0/1 matrix with S[i, j] = 1 iff token i belongs to statement j.
    """
    matrix = np.zeros((tokens.n, tokens.m))
    matrix[np.arange(tokens.n), tokens.statement_of_token] = 1.0
    return matrix


def surviving_vulnerable_lines(item: TokenizedSample) -> frozenset[int]:
    """Labeled vulnerable lines whose statement kept at least one token."""
    sample, tokens = item
    if not sample.vulnerable_lines:
        return frozenset()
    kept = {tokens.statement_lines[j] for j in tokens.scored_statements}
    return frozenset(line for line in sample.vulnerable_lines if line in kept)


def filter_truncation_conflicts(dataset: Iterable[TokenizedSample]) -> list[TokenizedSample]:
    """
    Drop vulnerable samples whose every labeled vulnerable line was truncated away.

    Samples without line labels and non-vulnerable samples are always kept.

    Args:
        dataset (Iterable[TokenizedSample]): Tokenized samples.

    Returns:
        list[TokenizedSample]: The kept samples, order preserved.
    """
    kept = []
    removed = []
    for item in dataset:
        sample = item.sample
        if sample.label == 1 and sample.vulnerable_lines and not surviving_vulnerable_lines(item):
            removed.append(sample.id)
            continue
        kept.append(item)
    if removed:
        logger.warning('removed %d truncation-conflict sample(s): %s', len(removed), ', '.join(removed[:10]))
    else:
        logger.info('no truncation conflicts found')
    return kept
