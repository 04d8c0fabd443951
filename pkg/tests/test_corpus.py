import json
import logging
import math
import re

import pytest

import corpus
from corpus import FixPair, SyntheticSpec, generate_synthetic, label_statements_from_fix, line_opcodes
from errors import ConfigError, DatasetError
from statement_segmenter import FunctionSample, segment_statements, strip_comments

PLANTED_CALL = re.compile(r'\b(strcpy|memcpy|gets|sprintf)\(')


@pytest.fixture
def fix_cases(fixtures_dir) -> list[dict]:
    return json.loads((fixtures_dir / 'fix_pairs.json').read_text())


def write_lines(path, records):
    path.write_text(''.join((r if isinstance(r, str) else json.dumps(r)) + '\n' for r in records))
    return path


class TestLineOpcodes:

    def test_replace(self):
        assert line_opcodes(['a', 'b', 'c'], ['a', 'x', 'c']) == [
            ('equal', 0, 1, 0, 1), ('replace', 1, 2, 1, 2), ('equal', 2, 3, 2, 3)]

    def test_insert_and_delete(self):
        assert line_opcodes(['a', 'c'], ['a', 'b', 'c']) == [
            ('equal', 0, 1, 0, 1), ('insert', 1, 1, 1, 2), ('equal', 1, 2, 2, 3)]
        assert line_opcodes(['a', 'b'], ['a']) == [('equal', 0, 1, 0, 1), ('delete', 1, 2, 1, 1)]

    def test_keeps_a_longest_common_subsequence(self):
        a, b = ['p', 'q', 'r', 's', 't'], ['q', 'x', 's', 't', 'p']
        kept = sum(i2 - i1 for tag, i1, i2, _, _ in line_opcodes(a, b) if tag == 'equal')
        assert kept == 3

    def test_empty_inputs(self):
        assert line_opcodes([], []) == []
        assert line_opcodes([], ['a']) == [('insert', 0, 0, 0, 1)]


class TestLabelFromFix:

    def test_fixture_cases(self, fix_cases):
        for case in fix_cases:
            pair = FixPair(case['id'], case['code_before'], case['code_after'])
            sample = label_statements_from_fix(pair)
            assert sample.label == case['label'], case['id']
            assert sorted(sample.vulnerable_lines) == case['vulnerable_lines'], case['id']
            assert sample.source == case['code_before']

    def test_identical_pair_warns(self, caplog):
        with caplog.at_level(logging.WARNING):
            sample = label_statements_from_fix(FixPair('same', 'a;\n', 'a;\n'))
        assert sample.label == 0
        assert 'identical' in caplog.text

    def test_insertion_before_first_statement_warns(self, caplog):
        with caplog.at_level(logging.WARNING):
            sample = label_statements_from_fix(FixPair('first', 'x = 1;\ny = 2;\n', 'init();\nx = 1;\ny = 2;\n'))
        assert sample.vulnerable_lines == frozenset({0})
        assert 'label may be noisy' in caplog.text

    def test_later_insertion_is_quiet(self, caplog):
        with caplog.at_level(logging.WARNING):
            sample = label_statements_from_fix(FixPair('later', 'x = 1;\ny = 2;\n', 'x = 1;\ncheck();\ny = 2;\n'))
        assert sample.vulnerable_lines == frozenset({0})
        assert caplog.text == ''

    def test_empty_pre_fix_source(self):
        with pytest.raises(DatasetError, match='no statements'):
            label_statements_from_fix(FixPair('empty', '// gone\n', 'a;\n'))

    def test_deleted_function_body(self):
        sample = label_statements_from_fix(FixPair('gone', 'a;\nb;\n', '// removed\n', cwe='CWE-787'))
        assert sample.vulnerable_lines == frozenset({0, 1})
        assert sample.cwe == 'CWE-787'

    def test_load_fix_pairs(self, tmp_path, fix_cases):
        path = write_lines(tmp_path / 'pairs.jsonl',
                           [{k: c[k] for k in ('id', 'code_before', 'code_after')} for c in fix_cases])
        pairs = corpus.load_fix_pairs(path)
        assert [p.id for p in pairs] == [c['id'] for c in fix_cases]
        samples = corpus.label_fix_pairs(pairs, split='test')
        assert {s.split for s in samples} == {'test'}

    def test_fix_pair_missing_field(self, tmp_path):
        path = write_lines(tmp_path / 'pairs.jsonl', [{'id': 'x', 'code_before': 'a;'}])
        with pytest.raises(DatasetError, match='line 1: .*code_after'):
            corpus.load_fix_pairs(path)


class TestLoadDataset:

    def test_save_and_load(self, tmp_path, samples):
        corpus.save_dataset(tmp_path / 'data.jsonl', samples)
        assert corpus.load_dataset(tmp_path / 'data.jsonl') == samples
        first = json.loads((tmp_path / 'data.jsonl').read_text().splitlines()[0])
        assert list(first) == ['id', 'code', 'label', 'vulnerable_lines', 'cwe', 'split']

    def test_code_record(self, tmp_path):
        path = write_lines(tmp_path / 'data.jsonl', [
            {'id': 'a', 'code': 'int x;\nreturn x;\n', 'label': 1, 'vulnerable_lines': [0], 'split': 'test'},
        ])
        [sample] = corpus.load_dataset(path)
        assert sample.source == 'int x;\nreturn x;\n'
        assert sample.vulnerable_lines == frozenset({0})
        assert sample.split == 'test'

    @pytest.mark.parametrize('records, message', [
        (['{"id": "a", "code": "x;", "label": 0}', '{"id": '], 'line 2: .*malformed JSON'),
        ([{'id': 'a', 'code': 'x;', 'label': 0, 'extra': 1}], 'line 1: .*unknown field'),
        ([{'id': 'a', 'code': 'x;', 'label': 0}, {'id': 'a', 'code': 'y;', 'label': 0}], 'line 2: .*duplicate id'),
        ([{'id': 'a', 'code': 'x;', 'label': True}], 'label must be 0 or 1'),
        ([{'id': 'a', 'code': 'x;\n\ny;', 'label': 1, 'vulnerable_lines': [1]}], r'vulnerable_lines \[1\]'),
        ([{'id': 'a', 'code': 'x;', 'label': 1, 'vulnerable_lines': []}], 'empty vulnerable_lines'),
        ([{'id': 'a', 'code': 'x;', 'label': 0, 'split': 'dev'}], 'split must be one of'),
        (['[1, 2]'], 'JSON object'),
    ])
    def test_rejects(self, tmp_path, records, message):
        path = write_lines(tmp_path / 'data.jsonl', records)
        with pytest.raises(DatasetError, match=message):
            corpus.load_dataset(path)

    def test_empty_file(self, tmp_path):
        (tmp_path / 'data.jsonl').write_text('\n')
        with pytest.raises(DatasetError, match='empty'):
            corpus.load_dataset(tmp_path / 'data.jsonl')

    def test_error_carries_line_number(self, tmp_path):
        path = write_lines(tmp_path / 'data.jsonl', [{'id': 'a', 'code': 'x;', 'label': 0}, '{'])
        with pytest.raises(DatasetError) as info:
            corpus.load_dataset(path)
        assert info.value.line_number == 2

    def test_split_dataset(self, samples):
        groups = corpus.split_dataset([*samples, FunctionSample('t', 'x;\n', 0, split='test')])
        assert [s.id for s in groups['train']] == ['f', 'g', 'h']
        assert [s.id for s in groups['test']] == ['t']
        assert groups['valid'] == []


class TestSynthetic:

    def test_seeded(self):
        spec = SyntheticSpec(function_count=20, seed=4)
        assert generate_synthetic(spec) == generate_synthetic(spec)
        assert generate_synthetic(spec) != generate_synthetic(SyntheticSpec(function_count=20, seed=5))

    def test_no_vulnerable_functions(self):
        samples = generate_synthetic(SyntheticSpec(function_count=30, vulnerable_fraction=0.0))
        assert all(s.label == 0 and s.vulnerable_lines == frozenset() for s in samples)

    def test_default_splits(self):
        samples = generate_synthetic()
        sizes = {split: len(group) for split, group in corpus.split_dataset(samples).items()}
        assert sizes == {'train': 200, 'valid': 50, 'test': 50}
        assert math.isclose(sum(s.label for s in samples) / len(samples), 0.3, abs_tol=0.08)

    def test_planted_lines_are_the_vulnerable_lines(self):
        for sample in generate_synthetic(SyntheticSpec(function_count=60, seed=2)):
            statements = segment_statements(strip_comments(sample.source))
            planted = {s.line for s in statements if PLANTED_CALL.search(s.text)}
            assert planted == set(sample.vulnerable_lines)
            if sample.label:
                assert 1 <= len(planted) <= 3
            assert [s.line for s in statements] == list(range(len(statements)))

    def test_one_planted_line(self):
        samples = generate_synthetic(SyntheticSpec(function_count=40, vulnerable_lines_range=(1, 1)))
        assert all(len(s.vulnerable_lines) == 1 for s in samples if s.label)

    @pytest.mark.parametrize('kwargs', [
        {'function_count': 0},
        {'vulnerable_fraction': 1.5},
        {'statement_range': (2, 5)},
        {'vulnerable_lines_range': (1, 9)},
        {'patterns': ()},
        {'split_fractions': (0.5, 0.5, 0.5)},
    ])
    def test_rejects(self, kwargs):
        with pytest.raises(ConfigError):
            SyntheticSpec(**kwargs)


class TestStats:

    def test_hand_built_corpus(self):
        source = 'int f() {\n    a();\n    b();\n}\n'
        samples = [FunctionSample('v', source, 1, frozenset({1, 2})), FunctionSample('n', source, 0)]
        stats = corpus.dataset_stats(samples)
        assert list(stats.index) == ['train', 'all']
        assert stats.loc['all', 'avg_stat_num'] == 4.0
        assert stats.loc['all', 'avg_vul_stat_num'] == 2.0
        assert stats.loc['train', 'vul_functions'] == 1
        assert stats.loc['train', 'non_vul_functions'] == 1

    def test_without_line_labels(self):
        stats = corpus.dataset_stats([FunctionSample('v', 'a;\n', 1)])
        assert math.isnan(stats.loc['all', 'avg_vul_stat_num'])

    def test_empty(self):
        with pytest.raises(DatasetError):
            corpus.dataset_stats([])
