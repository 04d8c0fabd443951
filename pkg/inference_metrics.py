"""
Inference Metrics Module

This module turns statement scores into predictions and measures them. A
function is predicted vulnerable when at least one of its statements is;
statements are also ranked by score for relative localization. The metric
suite covers function-level Acc/P/R/F1, statement-level Acc/P/R/F1 in
absolute mode, and Top-k, MFR, MAR and IFA in ranking mode.

date: 10/18/2026
"""

import json
import logging
from dataclasses import asdict, dataclass, field
from typing import Hashable, Iterable, Sequence

import numpy as np
from sklearn.metrics import accuracy_score, confusion_matrix, precision_recall_fscore_support

from errors import ConfigError, MetricError
from mil_head import StatementScores, score_record
from statement_segmenter import TokenizedSample, surviving_vulnerable_lines
from tensor_autodiff import no_grad

logger = logging.getLogger(__name__)


@dataclass
class EvalConfig:
    """
    Prediction and ranking settings.

    Attributes:
        threshold (float): A statement is vulnerable when p > threshold.
        top_k (tuple[int, ...]): Cutoffs reported as Top-k accuracy.
    """
    threshold: float = 0.5
    top_k: tuple[int, ...] = (1, 3, 5)

    def __post_init__(self):
        self.top_k = tuple(sorted(set(int(k) for k in self.top_k)))
        if not 0.0 <= self.threshold <= 1.0:
            raise ConfigError(f'threshold must lie in [0, 1], got {self.threshold}')
        if not self.top_k or self.top_k[0] < 1:
            raise ConfigError(f'top_k cutoffs must be positive integers, got {self.top_k}')

    def to_dict(self) -> dict:
        return {'threshold': self.threshold, 'top_k': list(self.top_k)}


@dataclass
class FunctionPrediction:
    """
    Prediction for one function.

    Attributes:
        function_id (str): Function id.
        label (int): Predicted function label; 1 iff some statement label is 1.
        statement_indices (np.ndarray): Scored statements, ascending.
        statement_labels (np.ndarray): Predicted 0/1 label per scored statement.
        scores (StatementScores): The scores the prediction was made from.
        ranking (list[int]): Statement indices by descending score.
    """
    function_id: str
    label: int
    statement_indices: np.ndarray
    statement_labels: np.ndarray
    scores: StatementScores = field(repr=False)
    ranking: list[int]


@dataclass
class Confusion:
    """
    Binary classification counts and rates.

    Attributes:
        acc (float): Accuracy.
        precision (float): TP / (TP + FP), 0 when undefined.
        recall (float): TP / (TP + FN), 0 when undefined.
        f1 (float): Harmonic mean of precision and recall, 0 when undefined.
        tp, fp, fn, tn (int): Counts.
        degenerate (bool): Set when a precision or recall denominator was 0.
    """
    acc: float
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int
    tn: int
    degenerate: bool = False


@dataclass
class RankingMetrics:
    """
    Ranking-mode localization metrics over the vulnerable functions S_v.

    Attributes:
        top_k (dict[int, float]): Fraction of S_v whose first hit ranks <= k.
        mfr (float): Mean first rank.
        mar (float): Mean over functions of the mean rank of all vulnerable statements.
        ifa (float): Mean false alarms before the first hit, always mfr - 1.
        functions (int): |S_v|.
    """
    top_k: dict[int, float]
    mfr: float
    mar: float
    ifa: float
    functions: int


@dataclass
class EvalReport:
    """
    Full evaluation result.

    Attributes:
        function_level (Confusion): Function-level detection.
        statement_level (Confusion | None): Absolute-mode localization, None when
            the data has no statement labels.
        ranking (RankingMetrics | None): Ranking-mode localization, None when
            no vulnerable function keeps a labeled statement.
        functions (int): Number of evaluated functions.
        threshold (float): Statement threshold used.
    """
    function_level: Confusion
    statement_level: Confusion | None
    ranking: RankingMetrics | None
    functions: int
    threshold: float

    def to_dict(self) -> dict:
        ranking = None
        if self.ranking is not None:
            ranking = asdict(self.ranking)
            ranking['top_k'] = {str(k): v for k, v in self.ranking.top_k.items()}
        return {
            'functions': self.functions,
            'threshold': self.threshold,
            'function_level': asdict(self.function_level),
            'statement_level': asdict(self.statement_level) if self.statement_level else 'unavailable',
            'ranking': ranking if ranking is not None else 'unavailable',
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def rank_statements(scores: StatementScores | Sequence[float]) -> list[int]:
    """
    Order statements by descending score; ties keep the lower index first.

    Args:
        scores (StatementScores | Sequence[float]): Statement scores; a plain
            sequence is indexed 0..m-1.

    Returns:
        list[int]: Statement indices, best first (rank 1 is position 0).
    """
    if isinstance(scores, StatementScores):
        values, indices = scores.p, scores.statement_indices
    else:
        values = np.asarray(scores, dtype=np.float64)
        indices = np.arange(values.size)
    if values.size == 0:
        raise MetricError('cannot rank a function without scored statements')
    order = np.argsort(-values, kind='stable')
    return [int(i) for i in indices[order]]


def predict_function(scores: StatementScores, threshold: float = 0.5,
                     function_id: str = '') -> FunctionPrediction:
    """
    Threshold statement scores and aggregate them into a function label.

    Args:
        scores (StatementScores): Scores of one function.
        threshold (float): A statement is vulnerable when p > threshold.
        function_id (str): Id carried into the prediction.

    Returns:
        FunctionPrediction: Statement labels, function label and ranking.
    """
    labels = (scores.p > threshold).astype(np.int64)
    return FunctionPrediction(
        function_id=function_id,
        label=int(labels.max()) if labels.size else 0,
        statement_indices=scores.statement_indices,
        statement_labels=labels,
        scores=scores,
        ranking=rank_statements(scores),
    )


def f1_score(precision: float, recall: float) -> float:
    return 2.0 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0


def confusion_and_prf(predictions: Sequence[int], labels: Sequence[int]) -> Confusion:
    """
    Accuracy, precision, recall and F1 of paired 0/1 sequences.

    Args:
        predictions (Sequence[int]): Predicted labels.
        labels (Sequence[int]): True labels.

    Returns:
        Confusion: Counts and rates; undefined rates are 0 and flagged.
    """
    predictions = np.asarray(predictions, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    if predictions.size == 0:
        raise MetricError('cannot compute metrics over an empty set')
    if predictions.shape != labels.shape:
        raise MetricError(f'{predictions.size} predictions for {labels.size} labels')
    tn, fp, fn, tp = (int(count) for count in confusion_matrix(labels, predictions, labels=[0, 1]).ravel())
    precision, recall, f1, _ = precision_recall_fscore_support(labels, predictions, average='binary',
                                                               pos_label=1, zero_division=0)
    return Confusion(
        acc=float(accuracy_score(labels, predictions)),
        precision=float(precision),
        recall=float(recall),
        f1=float(f1),
        tp=tp, fp=fp, fn=fn, tn=tn,
        degenerate=tp + fp == 0 or tp + fn == 0,
    )


def ranking_metrics(ranked_lists: Sequence[Sequence[Hashable]], vulnerable: Sequence[Iterable[Hashable]],
                    top_k: Sequence[int] = (1, 3, 5)) -> RankingMetrics:
    """
    Top-k, MFR, MAR and IFA over functions with at least one ranked vulnerable statement.

    Functions whose labeled statements are all absent from their ranked list
    (for example, truncated away) are not part of S_v.

    Args:
        ranked_lists (Sequence[Sequence[Hashable]]): Per function, statements best first.
        vulnerable (Sequence[Iterable[Hashable]]): Per function, its truly vulnerable statements.
        top_k (Sequence[int]): Cutoffs.

    Returns:
        RankingMetrics: The metrics.
    """
    if len(ranked_lists) != len(vulnerable):
        raise MetricError(f'{len(ranked_lists)} ranked lists for {len(vulnerable)} label sets')
    first_ranks = []
    average_ranks = []
    for ranked, truth in zip(ranked_lists, vulnerable):
        truth = set(truth)
        ranks = [position + 1 for position, item in enumerate(ranked) if item in truth]
        if not ranks:
            continue
        first_ranks.append(ranks[0])
        average_ranks.append(sum(ranks) / len(ranks))
    if not first_ranks:
        raise MetricError('no vulnerable function has a ranked vulnerable statement')
    count = len(first_ranks)
    mfr = sum(first_ranks) / count
    return RankingMetrics(
        top_k={k: sum(1 for r in first_ranks if r <= k) / count for k in sorted(top_k)},
        mfr=mfr,
        mar=sum(average_ranks) / count,
        ifa=mfr - 1.0,
        functions=count,
    )


def statement_outcomes(item: TokenizedSample, prediction: FunctionPrediction) -> tuple[list[int], list[int]]:
    """
    Predicted and true 0/1 labels over every statement of a function.

    Truncated statements were never scored; they count as predicted 0 so a
    truncated vulnerable line is a false negative.

    Args:
        item (TokenizedSample): The function with its line labels.
        prediction (FunctionPrediction): Its prediction.

    Returns:
        tuple[list[int], list[int]]: Predicted labels and ground truth, same order.
    """
    sample, tokens = item
    lines = sample.vulnerable_lines or frozenset()
    scored = prediction.statement_indices.tolist()
    predicted = prediction.statement_labels.tolist()
    truth = [int(tokens.statement_lines[j] in lines) for j in scored]
    for j in sorted(tokens.truncated_statements - set(scored)):
        predicted.append(0)
        truth.append(int(tokens.statement_lines[j] in lines))
    return predicted, truth


def predict_dataset(model, items: Sequence[TokenizedSample], threshold: float = 0.5) -> list[FunctionPrediction]:
    """
    Score and predict every function in eval mode.

    Args:
        model (VulnModel): Trained model.
        items (Sequence[TokenizedSample]): Tokenized functions.
        threshold (float): Statement threshold.

    Returns:
        list[FunctionPrediction]: One prediction per item, same order.
    """
    predictions = []
    with no_grad():
        for item in items:
            scores = model.forward(item.tokens, mode='eval')
            predictions.append(predict_function(scores, threshold, item.sample.id))
    return predictions


def score_records(items: Sequence[TokenizedSample], predictions: Sequence[FunctionPrediction]) -> list[dict]:
    """
    Score dump entries, one per function.

    Args:
        items (Sequence[TokenizedSample]): Tokenized functions.
        predictions (Sequence[FunctionPrediction]): One per item.

    Returns:
        list[dict]: {id, lines, p, p_max, p_mean, predicted_label, ranked_lines, truncated_lines}.
    """
    records = []
    for item, prediction in zip(items, predictions):
        lines = item.tokens.statement_lines
        record = score_record(item.sample.id, item.tokens, prediction.scores)
        record['predicted_label'] = prediction.label
        record['ranked_lines'] = [lines[j] for j in prediction.ranking]
        record['truncated_lines'] = sorted(lines[j] for j in item.tokens.truncated_statements)
        records.append(record)
    return records


def evaluate_predictions(items: Sequence[TokenizedSample], predictions: Sequence[FunctionPrediction],
                         config: EvalConfig | None = None) -> EvalReport:
    """
    Build the full report from predictions that were already made.

    Args:
        items (Sequence[TokenizedSample]): Tokenized functions with labels.
        predictions (Sequence[FunctionPrediction]): One per item.
        config (EvalConfig | None): Threshold and cutoffs.

    Returns:
        EvalReport: All metrics available for this data.
    """
    config = config or EvalConfig()
    if len(items) != len(predictions):
        raise MetricError(f'{len(predictions)} predictions for {len(items)} functions')
    function_level = confusion_and_prf([p.label for p in predictions], [i.sample.label for i in items])

    statement_level = None
    has_line_labels = any(i.sample.label == 1 and i.sample.vulnerable_lines for i in items)
    if has_line_labels:
        predicted, truth = [], []
        for item, prediction in zip(items, predictions):
            if item.sample.has_line_labels:
                item_predicted, item_truth = statement_outcomes(item, prediction)
                predicted.extend(item_predicted)
                truth.extend(item_truth)
        statement_level = confusion_and_prf(predicted, truth)

    ranking = None
    ranked_lists, vulnerable = [], []
    for item, prediction in zip(items, predictions):
        if item.sample.label != 1:
            continue
        surviving = surviving_vulnerable_lines(item)
        if surviving:
            ranked_lists.append([item.tokens.statement_lines[j] for j in prediction.ranking])
            vulnerable.append(surviving)
    if ranked_lists:
        ranking = ranking_metrics(ranked_lists, vulnerable, config.top_k)
    else:
        logger.info('no statement-level ground truth; ranking metrics unavailable')

    return EvalReport(function_level, statement_level, ranking, len(items), config.threshold)


def evaluate(model, items: Sequence[TokenizedSample], config: EvalConfig | None = None) -> EvalReport:
    """
    Predict the test split with the model and report every metric.

    Args:
        model (VulnModel): Trained model.
        items (Sequence[TokenizedSample]): Tokenized test functions.
        config (EvalConfig | None): Threshold and cutoffs.

    Returns:
        EvalReport: The report.
    """
    config = config or EvalConfig()
    if not items:
        raise MetricError('cannot evaluate an empty split')
    return evaluate_predictions(items, predict_dataset(model, items, config.threshold), config)
