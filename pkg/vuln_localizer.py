"""
Vulnerability Localizer

This is the main module of the weakly supervised vulnerability localizer. It
parses the command line, loads the settings, and runs one pipeline stage per
subcommand: synthetic corpus generation, fix-pair labeling, BPE vocabulary
training, model training, prediction, evaluation, annotated reports and
dataset statistics. Every stage reads and writes plain files, so stages can
be chained from scripts.

date: 10/18/2026
"""

import os

_threads = os.environ.get('VULNLOC_NUM_THREADS')
if _threads:
    for _name in ('OMP_NUM_THREADS', 'OPENBLAS_NUM_THREADS', 'MKL_NUM_THREADS'):
        os.environ.setdefault(_name, _threads)

import argparse  # noqa: E402
import json  # noqa: E402
import logging  # noqa: E402
import sys  # noqa: E402
from pathlib import Path  # noqa: E402

import colorama  # noqa: E402

import corpus  # noqa: E402
import inference_metrics  # noqa: E402
import statement_segmenter as segmenter  # noqa: E402
import trainer  # noqa: E402
from errors import ConfigError, VulnLocalizerError  # noqa: E402
from model import VulnModel  # noqa: E402
from report import ReportRenderer  # noqa: E402
from settings import Settings  # noqa: E402

logger = logging.getLogger('vuln_localizer')

LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'
COMMANDS = ('gen-corpus', 'label-fixes', 'train-vocab', 'train', 'predict', 'evaluate', 'report', 'stats')


class VulnLocalizer:
    """
    Runs the pipeline stages with one set of settings.

    Attributes:
        settings (Settings): Run configuration.
        split (str): Dataset split read by predict, evaluate and report ('all' for every split).
        color (bool): Highlight annotated reports on the terminal.
    """

    def __init__(self, settings: Settings, split: str = 'test', color: bool = True):
        """
        Initialize the runner.

        Args:
            settings (Settings): Run configuration.
            split (str): Split for predict, evaluate and report.
            color (bool): Use ANSI colors for terminal reports.

        Returns:
            None
        """
        self.settings = settings
        self.split = split
        self.color = color

    @property
    def out_dir(self) -> Path:
        return self.settings.paths['out']

    def _require(self, key: str) -> Path:
        path = self.settings.paths[key]
        if not path.exists():
            raise ConfigError(f'{key} not found: {path}')
        return path

    def _load_split(self, split: str) -> list[segmenter.FunctionSample]:
        samples = corpus.load_dataset(self._require('dataset'))
        if split == 'all':
            return samples
        selected = corpus.split_dataset(samples)[split]
        if not selected:
            raise ConfigError(f'split {split!r} of {self.settings.paths["dataset"]} is empty')
        return selected

    def _load_model(self) -> tuple[VulnModel, segmenter.BpeVocab, int]:
        model = VulnModel.load(self._require('checkpoint'))
        vocab = segmenter.load_vocab(self._require('vocab'))
        max_len = min(self.settings.encoder.max_len, model.encoder_config.max_len)
        return model, vocab, max_len

    def _predict_split(self):
        model, vocab, max_len = self._load_model()
        items = segmenter.tokenize_dataset(self._load_split(self.split), vocab, max_len)
        predictions = inference_metrics.predict_dataset(model, items, self.settings.eval.threshold)
        return items, predictions

    def cmd_gen_corpus(self):
        """
        Generate the synthetic corpus and write it to the dataset path.

        Returns:
            None
        """
        samples = corpus.generate_synthetic(self.settings.corpus)
        corpus.save_dataset(self.settings.paths['dataset'], samples)
        logger.info('wrote %d functions to %s', len(samples), self.settings.paths['dataset'])

    def cmd_label_fixes(self):
        """
        Label fix pairs by diffing and write them as a dataset.

        Returns:
            None
        """
        pairs = corpus.load_fix_pairs(self._require('fix_pairs'))
        samples = corpus.label_fix_pairs(pairs)
        corpus.save_dataset(self.settings.paths['dataset'], samples)
        logger.info('labeled %d fix pairs (%d vulnerable) into %s', len(samples),
                    sum(s.label for s in samples), self.settings.paths['dataset'])

    def cmd_train_vocab(self):
        """
        Train the BPE vocabulary on the statements of the training split.

        Returns:
            None
        """
        samples = corpus.split_dataset(corpus.load_dataset(self._require('dataset')))['train']
        if not samples:
            raise ConfigError('training split is empty; cannot train a vocabulary')
        texts = [text for sample in samples for text in segmenter.statement_texts(sample)]
        vocab = segmenter.train_bpe(texts, self.settings.encoder.vocab_size)
        segmenter.save_vocab(vocab, self.settings.paths['vocab'])
        logger.info('wrote vocabulary of %d tokens to %s', vocab.vocab_size, self.settings.paths['vocab'])

    def cmd_train(self):
        """
        Train a model from function labels and write the checkpoint, history and plot.

        Returns:
            None
        """
        settings = self.settings
        vocab = segmenter.load_vocab(self._require('vocab'))
        if vocab.vocab_size > settings.encoder.vocab_size:
            raise ConfigError(f'vocabulary has {vocab.vocab_size} tokens but encoder.vocab_size '
                              f'is {settings.encoder.vocab_size}')
        splits = corpus.split_dataset(corpus.load_dataset(self._require('dataset')))
        max_len = settings.encoder.max_len
        train_items = segmenter.filter_truncation_conflicts(
            segmenter.tokenize_dataset(splits['train'], vocab, max_len))
        valid_items = segmenter.tokenize_dataset(splits['valid'], vocab, max_len)

        model = VulnModel.initialize(settings.encoder, settings.head, settings.seed)
        best, stats = trainer.train(train_items, model, settings.train, valid_items, settings.eval.threshold)

        checkpoint = settings.paths['checkpoint']
        checkpoint.parent.mkdir(parents=True, exist_ok=True)
        best.save(checkpoint)
        stats.save(checkpoint.with_suffix('.history.json'))
        stats.plot(checkpoint.with_suffix('.history.png'))

    def cmd_predict(self):
        """
        Write per-statement scores and ranked lines of the selected split as JSON Lines.

        Returns:
            None
        """
        items, predictions = self._predict_split()
        path = self.out_dir / 'scores.jsonl'
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open('w', encoding='utf-8', newline='\n') as f:
            for record in inference_metrics.score_records(items, predictions):
                f.write(json.dumps(record) + '\n')
        logger.info('wrote scores of %d functions to %s', len(items), path)

    def cmd_evaluate(self):
        """
        Evaluate the selected split, print the tables and write the report JSON.

        Returns:
            None
        """
        items, predictions = self._predict_split()
        report = inference_metrics.evaluate_predictions(items, predictions, self.settings.eval)
        path = self.out_dir / 'report.json'
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(report.to_json() + '\n', encoding='utf-8')
        sys.stdout.write(ReportRenderer(color=False).format_report(report))
        logger.info('wrote evaluation report to %s', path)

    def cmd_report(self):
        """
        Render annotated sources with the top-k statements highlighted.

        The file copy never carries color codes.

        Returns:
            None
        """
        items, predictions = self._predict_split()
        plain = ReportRenderer(color=False, top_k=self.settings.train.k)
        terminal = ReportRenderer(color=self.color, top_k=self.settings.train.k)
        path = self.out_dir / 'annotated.txt'
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open('w', encoding='utf-8', newline='\n') as f:
            for (sample, tokens), prediction in zip(items, predictions):
                f.write(plain.annotate_function(sample, tokens, prediction) + '\n')
                sys.stdout.write(terminal.annotate_function(sample, tokens, prediction) + '\n')
        logger.info('wrote annotated report to %s', path)

    def cmd_stats(self):
        """
        Print dataset statistics per split and write them as CSV.

        Returns:
            None
        """
        table = corpus.dataset_stats(corpus.load_dataset(self._require('dataset')))
        path = self.out_dir / 'stats.csv'
        path.parent.mkdir(parents=True, exist_ok=True)
        table.to_csv(path, float_format='%.4f')
        sys.stdout.write(table.to_string(float_format='{:.2f}'.format, na_rep='N/A') + '\n')

    def run(self, command: str):
        """
        Dispatch one subcommand.

        Args:
            command (str): One of COMMANDS.

        Returns:
            None
        """
        handler = getattr(self, 'cmd_' + command.replace('-', '_'))
        handler()


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', type=Path, help='JSON settings file')
    common.add_argument('--full-scale', action='store_true', help='start from the full-size model settings')
    common.add_argument('--seed', type=int)
    common.add_argument('--log-level', default='INFO', choices=('DEBUG', 'INFO', 'WARNING', 'ERROR'))
    common.add_argument('--dataset', type=Path)
    common.add_argument('--vocab', type=Path)
    common.add_argument('--checkpoint', type=Path)
    common.add_argument('--out', type=Path, help='output directory')
    common.add_argument('--fix-pairs', type=Path)
    common.add_argument('--split', default='test', choices=(*segmenter.SPLITS, 'all'))
    common.add_argument('--k', type=int, help='pseudo-labeled statements per function')
    common.add_argument('--max-len', type=int)
    common.add_argument('--vocab-size', type=int)
    common.add_argument('--threshold', type=float)
    common.add_argument('--fusion', choices=('weighted', 'select'))
    common.add_argument('--fusion-weights', type=float, nargs=2, metavar=('W_MAX', 'W_MEAN'))
    common.add_argument('--learnable-fusion', action='store_true', default=None)
    common.add_argument('--epochs', type=int)
    common.add_argument('--lr', type=float)
    common.add_argument('--batch-size', type=int)
    common.add_argument('--patience', type=int)
    common.add_argument('--train-fraction', type=float)
    common.add_argument('--top-k-cutoffs', type=int, nargs='+')
    common.add_argument('--function-count', type=int)
    common.add_argument('--vulnerable-fraction', type=float)
    common.add_argument('--no-color', action='store_true')

    parser = argparse.ArgumentParser(prog='vuln_localizer',
                                     description='Weakly supervised vulnerability detection and localization.')
    commands = parser.add_subparsers(dest='command', required=True)
    for command in COMMANDS:
        commands.add_parser(command, parents=[common])
    return parser


def load_settings(args: argparse.Namespace) -> Settings:
    settings = Settings.full_scale() if args.full_scale else Settings()
    if args.config is not None:
        settings = Settings.from_file(args.config, base=settings)
    settings.apply_overrides({
        'seed': args.seed, 'dataset': args.dataset, 'vocab': args.vocab, 'checkpoint': args.checkpoint,
        'out': args.out, 'fix_pairs': args.fix_pairs, 'k': args.k, 'max_len': args.max_len,
        'vocab_size': args.vocab_size, 'threshold': args.threshold, 'fusion': args.fusion,
        'fusion_weights': args.fusion_weights, 'learnable_fusion': args.learnable_fusion,
        'epochs': args.epochs, 'lr': args.lr, 'batch_size': args.batch_size, 'patience': args.patience,
        'train_fraction': args.train_fraction, 'top_k_cutoffs': args.top_k_cutoffs,
        'function_count': args.function_count, 'vulnerable_fraction': args.vulnerable_fraction,
    })
    return settings


def main(argv: list[str] | None = None) -> int:
    """
    Run the command line.

    Args:
        argv (list[str] | None): Arguments without the program name.

    Returns:
        int: Exit status; 0 on success, 1 on any pipeline error.
    """
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level, format=LOG_FORMAT, stream=sys.stderr, force=True)
    color = not args.no_color and sys.stdout.isatty()
    if color:
        colorama.just_fix_windows_console()
    try:
        localizer = VulnLocalizer(load_settings(args), split=args.split, color=color)
        localizer.run(args.command)
    except (VulnLocalizerError, OSError) as e:
        print(f'error: {e}', file=sys.stderr)
        return 1
    return 0


if __name__ == '__main__':
    sys.exit(main())
