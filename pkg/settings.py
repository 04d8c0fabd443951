"""
Settings Module

This module defines the Settings class, which holds every tunable value of a
run: encoder shape, fusion settings, optimization and evaluation settings,
synthetic corpus parameters, file paths and the single seed all randomness
flows from. Settings load from a structured JSON file, and command line flags
override them.

date: 10/18/2026
"""

import dataclasses
import json
import logging
from pathlib import Path

from corpus import SyntheticSpec
from encoder import EncoderConfig
from errors import ConfigError
from inference_metrics import EvalConfig
from mil_head import HeadConfig
from trainer import TrainConfig

logger = logging.getLogger(__name__)

SECTIONS = ('encoder', 'head', 'train', 'eval', 'corpus', 'paths', 'seed')
PATH_KEYS = ('dataset', 'vocab', 'checkpoint', 'out', 'fix_pairs')

# flag name -> (section, field)
OVERRIDES = {
    'k': ('train', 'k'),
    'epochs': ('train', 'max_epochs'),
    'lr': ('train', 'lr'),
    'batch_size': ('train', 'batch_size'),
    'patience': ('train', 'patience'),
    'train_fraction': ('train', 'train_fraction'),
    'max_len': ('encoder', 'max_len'),
    'vocab_size': ('encoder', 'vocab_size'),
    'fusion': ('head', 'fusion'),
    'fusion_weights': ('head', 'fusion_weights'),
    'learnable_fusion': ('head', 'learnable_fusion'),
    'threshold': ('eval', 'threshold'),
    'top_k_cutoffs': ('eval', 'top_k'),
    'function_count': ('corpus', 'function_count'),
    'vulnerable_fraction': ('corpus', 'vulnerable_fraction'),
}


class Settings:
    """
    Stores all settings of one run.

    Attributes:
        encoder (EncoderConfig): Encoder shape; max_len is also the tokenization limit.
        head (HeadConfig): Channel fusion.
        train (TrainConfig): Optimization; its seed always equals `seed`.
        eval (EvalConfig): Threshold and Top-k cutoffs.
        corpus (SyntheticSpec): Synthetic corpus parameters; its seed always equals `seed`.
        paths (dict[str, Path]): dataset, vocab, checkpoint, out and fix_pairs locations.
        seed (int): The one seed of the run.
    """

    def __init__(self):
        """
        Initialize desk-scale defaults with paths under Assets/.

        Returns:
            None
        """
        self.seed = 0
        self.encoder = EncoderConfig()
        self.head = HeadConfig()
        self.train = TrainConfig(seed=self.seed)
        self.eval = EvalConfig()
        self.corpus = SyntheticSpec(seed=self.seed)
        self.paths = {
            'dataset': Path.cwd() / 'Assets' / 'data' / 'dataset.jsonl',
            'vocab': Path.cwd() / 'Assets' / 'models' / 'vocab.bpe',
            'checkpoint': Path.cwd() / 'Assets' / 'models' / 'model.ckpt',
            'out': Path.cwd() / 'Assets' / 'out',
            'fix_pairs': Path.cwd() / 'Assets' / 'data' / 'fix_pairs.jsonl',
        }

    @classmethod
    def full_scale(cls) -> 'Settings':
        """
        Settings matching the full-size experiments: 12 layers, 12 heads, width 768.

        Returns:
            Settings: The preset.
        """
        settings = cls()
        settings.encoder = EncoderConfig(layers=12, heads=12, hidden=768, ffn_dim=3072,
                                         max_len=512, vocab_size=settings.encoder.vocab_size)
        settings.train = dataclasses.replace(settings.train, batch_size=16, lr=2e-5, max_epochs=50, patience=10)
        return settings

    @classmethod
    def from_file(cls, path: Path, base: 'Settings | None' = None) -> 'Settings':
        """
        Load settings from a JSON file; missing values keep those of `base`.

        Args:
            path (Path): Config file.
            base (Settings | None): Starting values, desk-scale defaults when None.

        Returns:
            Settings: The loaded settings.
        """
        path = Path(path)
        try:
            contents = json.loads(path.read_text(encoding='utf-8'))
        except json.JSONDecodeError as e:
            raise ConfigError(f'{path}: not valid JSON: {e.msg} (line {e.lineno})') from e
        if not isinstance(contents, dict):
            raise ConfigError(f'{path}: config must be a JSON object')
        unknown = sorted(set(contents) - set(SECTIONS))
        if unknown:
            raise ConfigError(f'{path}: unknown config key(s): {", ".join(unknown)}')

        settings = base or cls()
        if 'seed' in contents:
            settings._set_seed(contents['seed'])
        for section in ('encoder', 'head', 'train', 'eval', 'corpus'):
            values = contents.get(section, {})
            if not isinstance(values, dict):
                raise ConfigError(f'{path}: section {section!r} must be an object')
            if section in ('train', 'corpus') and 'seed' in values:
                raise ConfigError(f'{path}: {section}.seed is not configurable; set the top-level seed')
            settings._update_section(section, values)
        paths = contents.get('paths', {})
        unknown = sorted(set(paths) - set(PATH_KEYS))
        if unknown:
            raise ConfigError(f'{path}: unknown config key(s): {", ".join("paths." + k for k in unknown)}')
        for key, value in paths.items():
            settings.paths[key] = Path(value)
        logger.info('loaded settings from %s', path)
        return settings

    def _set_seed(self, seed):
        if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
            raise ConfigError(f'seed must be a non-negative integer, got {seed!r}')
        self.seed = seed
        self.train = dataclasses.replace(self.train, seed=seed)
        self.corpus = dataclasses.replace(self.corpus, seed=seed)

    def _update_section(self, section: str, values: dict):
        current = getattr(self, section)
        known = {f.name for f in dataclasses.fields(current)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ConfigError(f'unknown config key(s): {", ".join(f"{section}.{k}" for k in unknown)}')
        try:
            setattr(self, section, dataclasses.replace(current, **values))
        except TypeError as e:
            raise ConfigError(f'invalid value in section {section!r}: {e}') from e

    def apply_overrides(self, overrides: dict):
        """
        Apply command line values; None means the flag was not given.

        Args:
            overrides (dict): Flag name -> value. Path flags are 'dataset',
                'vocab', 'checkpoint', 'out' and 'fix_pairs'; 'seed' sets the seed.

        Returns:
            None
        """
        for name, value in overrides.items():
            if value is None:
                continue
            if name == 'seed':
                self._set_seed(value)
            elif name in PATH_KEYS:
                self.paths[name] = Path(value)
            elif name in OVERRIDES:
                section, field = OVERRIDES[name]
                self._update_section(section, {field: value})
            else:
                raise ConfigError(f'unknown setting {name!r}')

    def to_dict(self) -> dict:
        train = self.train.to_dict()
        del train['seed']
        corpus = dataclasses.asdict(self.corpus)
        del corpus['seed']
        return {
            'seed': self.seed,
            'encoder': self.encoder.to_dict(),
            'head': self.head.to_dict(),
            'train': train,
            'eval': self.eval.to_dict(),
            'corpus': {key: list(value) if isinstance(value, tuple) else value for key, value in corpus.items()},
            'paths': {key: str(value) for key, value in self.paths.items()},
        }

    def to_file(self, path: Path):
        """
        Write the settings as JSON with sorted keys.

        Args:
            path (Path): Destination file.

        Returns:
            None
        """
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=4, sort_keys=True) + '\n', encoding='utf-8')
