"""
Report Module

This module defines the ReportRenderer class, responsible for turning results
into text for the terminal or a file: the metric tables of an evaluation
report, and annotated source listings that show every line's score with the
top-k ranked statements highlighted.

date: 10/18/2026
"""

import logging

import pandas as pd
from colorama import Fore, Style

from inference_metrics import EvalReport, FunctionPrediction
from statement_segmenter import FunctionSample, TokenizedFunction

logger = logging.getLogger(__name__)

UNAVAILABLE = 'unavailable (no statement-level ground truth)'


class ReportRenderer:
    """
    Renders metric tables and annotated functions.

    Attributes:
        color (bool): Highlight top-k lines with ANSI colors.
        top_k (int): Number of ranked statements marked in annotated listings.
        precision (int): Decimals printed for metrics and scores.
    """

    def __init__(self, color: bool = True, top_k: int = 3, precision: int = 3):
        self.color = color
        self.top_k = top_k
        self.precision = precision

    def metric_tables(self, report: EvalReport) -> tuple[pd.DataFrame, pd.DataFrame | None]:
        """
        Build the classification and ranking tables of a report.

        Args:
            report (EvalReport): Evaluation result.

        Returns:
            tuple[pd.DataFrame, pd.DataFrame | None]: Acc/P/R/F1 per level, and the
                ranking metrics (None when unavailable).
        """
        levels = {'function': report.function_level}
        if report.statement_level is not None:
            levels['statement'] = report.statement_level
        classification = pd.DataFrame(
            [{'Acc': c.acc, 'P': c.precision, 'R': c.recall, 'F1': c.f1,
              'TP': c.tp, 'FP': c.fp, 'FN': c.fn, 'TN': c.tn} for c in levels.values()],
            index=pd.Index(list(levels), name='level'),
        )
        ranking = None
        if report.ranking is not None:
            row = {f'Top-{k}': value for k, value in report.ranking.top_k.items()}
            row.update({'MFR': report.ranking.mfr, 'MAR': report.ranking.mar, 'IFA': report.ranking.ifa,
                        'functions': report.ranking.functions})
            ranking = pd.DataFrame([row], index=pd.Index(['ranking'], name='mode'))
        return classification, ranking

    def format_report(self, report: EvalReport) -> str:
        """
        Render a report as plain-text tables.

        Args:
            report (EvalReport): Evaluation result.

        Returns:
            str: The rendered report, ending with a newline.
        """
        classification, ranking = self.metric_tables(report)
        float_format = f'{{:.{self.precision}f}}'.format
        parts = [f'functions evaluated: {report.functions}  threshold: {report.threshold}', '',
                 classification.to_string(float_format=float_format)]
        if report.statement_level is None:
            parts.append(f'statement-level metrics: {UNAVAILABLE}')
        parts.append('')
        if ranking is None:
            parts.append(f'ranking metrics: {UNAVAILABLE}')
        else:
            parts.append(ranking.to_string(float_format=float_format))
        degenerate = [level for level, c in (('function', report.function_level),
                                             ('statement', report.statement_level)) if c and c.degenerate]
        if degenerate:
            parts.append(f'note: precision or recall undefined at level(s) {", ".join(degenerate)}; reported as 0')
        return '\n'.join(parts) + '\n'

    def _highlight(self, text: str) -> str:
        if not self.color:
            return text
        return f'{Fore.RED}{Style.BRIGHT}{text}{Style.RESET_ALL}'

    def annotate_function(self, sample: FunctionSample, tokens: TokenizedFunction,
                          prediction: FunctionPrediction) -> str:
        """
        List a function's source with line numbers, scores and top-k markers.

        Each line shows its 0-based line number, its fused score ('-' for
        lines that are no statement, 'cut' for truncated statements), the rank
        for the top-k statements, and 'V' for labeled vulnerable lines.

        Args:
            sample (FunctionSample): The function.
            tokens (TokenizedFunction): Its tokenization.
            prediction (FunctionPrediction): Its prediction.

        Returns:
            str: The listing, ending with a newline.
        """
        score_of_line = {tokens.statement_lines[j]: p for j, p in
                         zip(prediction.statement_indices.tolist(), prediction.scores.p.tolist())}
        truncated = {tokens.statement_lines[j] for j in tokens.truncated_statements}
        rank_of_line = {tokens.statement_lines[j]: rank for rank, j in
                        enumerate(prediction.ranking[:self.top_k], start=1)}
        truth = sample.vulnerable_lines or frozenset()

        rows = [f'== {sample.id}  label {sample.label}  predicted {prediction.label} ==']
        for line, text in enumerate(sample.source.rstrip('\n').split('\n')):
            if line in score_of_line:
                score = f'{score_of_line[line]:.{self.precision}f}'
            else:
                score = 'cut' if line in truncated else '-'
            rank = f'#{rank_of_line[line]}' if line in rank_of_line else ''
            marker = 'V' if line in truth else ''
            row = f'{line:4d} {score:>{self.precision + 2}} {rank:>3} {marker:1} | {text}'
            rows.append(self._highlight(row) if line in rank_of_line else row)
        return '\n'.join(rows) + '\n'


def format_report(report: EvalReport, precision: int = 3) -> str:
    return ReportRenderer(color=False, precision=precision).format_report(report)


def annotate_function(sample: FunctionSample, tokens: TokenizedFunction, prediction: FunctionPrediction,
                      top_k: int = 3, color: bool = False) -> str:
    return ReportRenderer(color=color, top_k=top_k).annotate_function(sample, tokens, prediction)
