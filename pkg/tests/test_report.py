import numpy as np
from colorama import Fore

from inference_metrics import Confusion, EvalReport, RankingMetrics, predict_function
from mil_head import StatementScores
from report import ReportRenderer, annotate_function, format_report
from statement_segmenter import FunctionSample, tokenize_function


def prediction_for(p, indices=None):
    p = np.asarray(p, dtype=np.float64)
    indices = np.arange(p.size) if indices is None else np.asarray(indices)
    return predict_function(StatementScores(indices, p, p, p, p.size))


def full_report(degenerate=False) -> EvalReport:
    function_level = Confusion(0.9, 0.8, 1.0, 0.888889, 4, 1, 0, 5)
    statement_level = Confusion(0.95, 0.0, 0.0, 0.0, 0, 0, 3, 57, degenerate=degenerate)
    ranking = RankingMetrics({1: 0.5, 3: 1.0}, mfr=1.5, mar=1.75, ifa=0.5, functions=4)
    return EvalReport(function_level, statement_level, ranking, functions=10, threshold=0.5)


class TestFormatReport:

    def test_tables(self):
        text = format_report(full_report())
        assert 'functions evaluated: 10' in text
        assert 'function' in text and 'statement' in text
        assert 'Top-1' in text and 'Top-3' in text and 'IFA' in text
        assert '0.889' in text
        assert 'unavailable' not in text

    def test_precision(self):
        assert '0.88889' in format_report(full_report(), precision=5)

    def test_without_statement_labels(self):
        report = full_report()
        report.statement_level = None
        report.ranking = None
        text = format_report(report)
        assert 'statement-level metrics: unavailable' in text
        assert 'ranking metrics: unavailable' in text

    def test_degenerate_note(self):
        assert 'undefined at level(s) statement' in format_report(full_report(degenerate=True))

    def test_metric_tables(self):
        classification, ranking = ReportRenderer().metric_tables(full_report())
        assert list(classification.index) == ['function', 'statement']
        assert classification.loc['function', 'TP'] == 4
        assert ranking.loc['ranking', 'MFR'] == 1.5


class TestAnnotate:

    def test_ranked_lines_are_marked(self, samples, vocab):
        tokens = tokenize_function(samples[0], vocab, max_len=64)
        prediction = prediction_for([0.1, 0.2, 0.9, 0.3, 0.05])
        text = annotate_function(samples[0], tokens, prediction, top_k=3)
        rows = text.splitlines()
        assert rows[0] == '== f  label 1  predicted 1 =='
        assert rows[3] == '   2 0.900  #1 V |     strcpy(buf, src);'
        assert ' #2 ' in rows[4] and ' #3 ' in rows[2]
        assert '#' not in rows[1] and '#' not in rows[5]

    def test_color_highlights_top_k_only(self, samples, vocab):
        tokens = tokenize_function(samples[0], vocab, max_len=64)
        prediction = prediction_for([0.1, 0.2, 0.9, 0.3, 0.05])
        rows = annotate_function(samples[0], tokens, prediction, top_k=1, color=True).splitlines()
        assert rows[3].startswith(Fore.RED)
        assert not any(row.startswith(Fore.RED) for row in rows[:3] + rows[4:])

    def test_truncated_and_blank_lines(self, vocab):
        sample = FunctionSample('b', 'first();\n\nsecond_call_with_a_long_name();\n', 0)
        tokens = tokenize_function(sample, vocab, max_len=3)
        rows = annotate_function(sample, tokens, prediction_for([0.2], indices=[0])).splitlines()
        assert rows[2].split()[:2] == ['1', '-']
        assert rows[3].split()[:2] == ['2', 'cut']
