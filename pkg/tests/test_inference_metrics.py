import json

import numpy as np
import pytest

from errors import ConfigError, MetricError
from inference_metrics import (
    EvalConfig,
    confusion_and_prf,
    evaluate,
    evaluate_predictions,
    f1_score,
    predict_dataset,
    predict_function,
    rank_statements,
    ranking_metrics,
    score_records,
)
from mil_head import StatementScores
from statement_segmenter import FunctionSample, TokenizedFunction, TokenizedSample, tokenize_function


def scores_of(p, indices=None) -> StatementScores:
    p = np.asarray(p, dtype=np.float64)
    indices = np.arange(p.size) if indices is None else np.asarray(indices)
    return StatementScores(indices, p, p, p, p.size)


def oracle_confusion(predicted, truth):
    tp = fp = fn = tn = 0
    for y_hat, y in zip(predicted, truth):
        if y_hat == 1 and y == 1:
            tp += 1
        elif y_hat == 1:
            fp += 1
        elif y == 1:
            fn += 1
        else:
            tn += 1
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2.0 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return (tp + tn) / len(truth), precision, recall, f1


def oracle_ranking(score_sets, truth_sets):
    first, average = [], []
    for p, truth in zip(score_sets, truth_sets):
        order = sorted(range(len(p)), key=lambda j: (-p[j], j))
        ranks = [order.index(j) + 1 for j in sorted(truth, key=order.index)]
        first.append(ranks[0])
        average.append(sum(ranks) / len(ranks))
    mfr = sum(first) / len(first)
    top = {k: sum(1 for r in first if r <= k) / len(first) for k in (1, 3, 5)}
    return top, mfr, sum(average) / len(average)


class TestRanking:

    def test_descending_scores(self):
        assert rank_statements([0.2, 0.9, 0.5]) == [1, 2, 0]

    def test_ties_keep_line_order(self):
        assert rank_statements([0.4, 0.4, 0.4, 0.4]) == [0, 1, 2, 3]

    def test_matches_sort_oracle(self, rng):
        for _ in range(20):
            p = rng.integers(0, 5, 20) / 4.0
            assert rank_statements(p) == sorted(range(20), key=lambda j: (-p[j], j))

    def test_reports_statement_indices(self):
        assert rank_statements(scores_of([0.1, 0.7, 0.3], indices=[0, 3, 4])) == [3, 4, 0]

    def test_empty(self):
        with pytest.raises(MetricError):
            rank_statements([])


class TestPredictFunction:

    def test_all_low_scores(self):
        assert predict_function(scores_of([0.1, 0.49, 0.3])).label == 0

    def test_one_high_score(self):
        prediction = predict_function(scores_of([0.1, 0.9, 0.3]))
        assert prediction.label == 1
        assert prediction.ranking[0] == 1
        assert prediction.statement_labels.tolist() == [0, 1, 0]

    def test_threshold_is_strict(self):
        assert predict_function(scores_of([0.5, 0.5])).label == 0

    def test_function_label_is_max_of_statement_labels(self, rng):
        for _ in range(1000):
            p = rng.uniform(size=int(rng.integers(1, 12)))
            prediction = predict_function(scores_of(p), threshold=0.8)
            assert prediction.label == max(prediction.statement_labels.tolist())
        assert predict_function(scores_of(np.zeros(4))).label == 0


class TestConfusion:

    @pytest.mark.parametrize('precision, recall, expected', [(0.724, 0.522, 0.607), (0.471, 0.394, 0.429)])
    def test_published_f1(self, precision, recall, expected):
        assert f1_score(precision, recall) == pytest.approx(expected, abs=5e-4)

    def test_all_correct(self):
        confusion = confusion_and_prf([1, 0, 1], [1, 0, 1])
        assert confusion.acc == confusion.f1 == 1.0
        assert not confusion.degenerate

    def test_counts(self):
        confusion = confusion_and_prf([1, 1, 0, 0, 1], [1, 0, 1, 0, 1])
        assert (confusion.tp, confusion.fp, confusion.fn, confusion.tn) == (2, 1, 1, 1)
        assert confusion.precision == pytest.approx(2 / 3)

    def test_no_positive_predictions_is_degenerate(self):
        confusion = confusion_and_prf([0, 0], [1, 0])
        assert confusion.precision == confusion.f1 == 0.0
        assert confusion.degenerate

    def test_no_positives_anywhere(self):
        confusion = confusion_and_prf([0, 0, 0], [0, 0, 0])
        assert confusion.acc == 1.0
        assert confusion.precision == confusion.recall == confusion.f1 == 0.0
        assert (confusion.tp, confusion.fp, confusion.fn, confusion.tn) == (0, 0, 0, 3)
        assert confusion.degenerate

    def test_empty(self):
        with pytest.raises(MetricError):
            confusion_and_prf([], [])

    def test_length_mismatch(self):
        with pytest.raises(MetricError):
            confusion_and_prf([1], [1, 0])


class TestRankingMetrics:

    def test_two_functions(self):
        ranked = [list(range(10)), list(range(10))]
        metrics = ranking_metrics(ranked, [{0}, {5}])
        assert metrics.top_k[5] == 0.5
        assert metrics.mfr == 3.5
        assert metrics.ifa == 2.5

    def test_average_rank(self):
        assert ranking_metrics([[7, 3, 9, 4]], [{3, 4}]).mar == 3.0

    def test_functions_without_ranked_truth_are_skipped(self):
        metrics = ranking_metrics([[0, 1], [0, 1]], [{1}, {8}])
        assert metrics.functions == 1
        assert metrics.mfr == 2.0

    def test_no_vulnerable_function(self):
        with pytest.raises(MetricError):
            ranking_metrics([[0, 1]], [set()])

    def test_matches_brute_force_on_random_instances(self, rng):
        for _ in range(500):
            count = int(rng.integers(1, 11))
            score_sets = [rng.integers(0, 8, int(rng.integers(1, 16))) / 7.0 for _ in range(count)]
            labels = rng.integers(0, 2, count).tolist()
            labels[0] = 1
            truth_sets = []
            for p, y in zip(score_sets, labels):
                size = int(rng.integers(1, len(p) + 1)) if y else 0
                truth_sets.append(set(rng.choice(len(p), size=size, replace=False).tolist()))

            predictions = [predict_function(scores_of(p)) for p in score_sets]
            statement_pred = [v for pr in predictions for v in pr.statement_labels.tolist()]
            statement_true = [int(j in t) for p, t in zip(score_sets, truth_sets) for j in range(len(p))]
            function_pred = [pr.label for pr in predictions]
            function_true = [max((p > 0.5).tolist()) for p in score_sets]

            for got, expected in ((confusion_and_prf(statement_pred, statement_true),
                                   oracle_confusion(statement_pred, statement_true)),
                                  (confusion_and_prf(function_pred, labels), oracle_confusion(function_pred, labels))):
                assert (got.acc, got.precision, got.recall, got.f1) == pytest.approx(expected, abs=1e-12)
            assert function_pred == function_true

            vulnerable = [(pr.ranking, t) for pr, t in zip(predictions, truth_sets) if t]
            metrics = ranking_metrics([r for r, _ in vulnerable], [t for _, t in vulnerable])
            top, mfr, mar = oracle_ranking([p for p, t in zip(score_sets, truth_sets) if t],
                                           [t for t in truth_sets if t])
            assert metrics.top_k == top
            assert metrics.mfr == mfr
            assert metrics.mar == mar
            assert metrics.ifa == metrics.mfr - 1.0
            assert metrics.top_k[1] <= metrics.top_k[3] <= metrics.top_k[5]

    def test_increasing_transform_keeps_rankings(self, rng):
        for _ in range(50):
            p = rng.uniform(size=12)
            assert rank_statements(p) == rank_statements(p ** 3)


class TestEvalConfig:

    def test_cutoffs_sorted(self):
        assert EvalConfig(top_k=(5, 1, 3, 1)).top_k == (1, 3, 5)

    @pytest.mark.parametrize('kwargs', [{'threshold': 1.5}, {'top_k': (0, 1)}, {'top_k': ()}])
    def test_rejects(self, kwargs):
        with pytest.raises(ConfigError):
            EvalConfig(**kwargs)


def oracle_predictions(items, good=0.9, bad=0.1):
    predictions = []
    for item in items:
        lines = item.tokens.statement_lines
        truth = item.sample.vulnerable_lines or frozenset()
        p = [good if lines[j] in truth else bad for j in range(item.tokens.m)]
        predictions.append(predict_function(scores_of(p), function_id=item.sample.id))
    return predictions


class TestEvaluate:

    def test_perfect_predictions(self, tokenized):
        report = evaluate_predictions(tokenized, oracle_predictions(tokenized))
        assert report.function_level.f1 == 1.0
        assert report.statement_level.f1 == 1.0
        assert report.ranking.top_k[1] == 1.0
        assert report.ranking.ifa == 0.0
        assert report.ranking.functions == 1

    def test_without_line_labels(self, samples, vocab, tiny_model):
        samples = [FunctionSample(s.id, s.source, s.label) for s in samples[:2]]
        items = [TokenizedSample(s, tokenize_function(s, vocab, 64)) for s in samples]
        report = evaluate(tiny_model, items)
        assert report.statement_level is None
        assert report.ranking is None
        record = json.loads(report.to_json())
        assert record['ranking'] == 'unavailable'
        assert record['statement_level'] == 'unavailable'
        assert set(record['function_level']) >= {'acc', 'precision', 'recall', 'f1', 'tp', 'fp', 'fn', 'tn'}

    def test_truncated_vulnerable_line_is_a_false_negative(self):
        sample = FunctionSample('cut', 'a;\nb;\nc;\n', 1, frozenset({0, 2}))
        tokens = TokenizedFunction(
            function_id='cut',
            token_ids=np.array([5, 6, 7, 8]),
            positions=np.arange(4),
            statement_of_token=np.array([0, 0, 1, 1]),
            m=3,
            truncated_statements=frozenset({2}),
            statement_lines=(0, 1, 2),
        )
        prediction = predict_function(scores_of([0.9, 0.1], [0, 1]), function_id='cut')
        report = evaluate_predictions([TokenizedSample(sample, tokens)], [prediction])
        statement_level = report.statement_level
        assert (statement_level.tp, statement_level.fp, statement_level.fn, statement_level.tn) == (1, 0, 1, 1)
        assert statement_level.recall == 0.5
        assert report.ranking.mfr == 1.0

    def test_model_report_is_consistent(self, tiny_model, tokenized):
        report = evaluate(tiny_model, tokenized, EvalConfig(top_k=(1, 2)))
        assert report.functions == 3
        assert report.ranking.ifa == report.ranking.mfr - 1.0
        assert json.loads(report.to_json())['ranking']['top_k'].keys() == {'1', '2'}

    def test_empty_split(self, tiny_model):
        with pytest.raises(MetricError):
            evaluate(tiny_model, [])

    def test_score_records(self, tiny_model, tokenized):
        predictions = predict_dataset(tiny_model, tokenized)
        records = score_records(tokenized, predictions)
        assert [r['id'] for r in records] == ['f', 'g', 'h']
        assert records[0]['lines'] == [0, 1, 2, 3, 4]
        assert sorted(records[0]['ranked_lines']) == records[0]['lines']
        assert records[0]['truncated_lines'] == []
        assert records[0]['predicted_label'] in (0, 1)
