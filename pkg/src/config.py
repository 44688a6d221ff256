from __future__ import annotations

import dataclasses as dc
import json
import os
import pathlib as pl
from typing import Any, Dict, Mapping, Optional, Type, TypeVar, Union

import read_env as re

from src.errors import UsageError

"""Configuration for the irgraph tools: process-wide settings read from the environment (optionally seeded from a
.env file) and per-run training settings read from JSON files and overridden by command line flags."""

ENV_FILE = pl.Path('.env')
DEFAULT_MAX_INPUT_BYTES = 64 * 1024 * 1024
VERBOSITIES = ('debug', 'info', 'warning', 'error')

C = TypeVar('C')


def load_env_file(env_path: Union[str, pl.Path] = ENV_FILE, required: bool = False) -> bool:
    """Loads the variables of a .env file into the process environment
    :param env_path: path to the environmental variables file
    :param required: raise when the file does not exist
    :return: whether a file was loaded
    """
    if not pl.Path(env_path).exists():
        if required:
            raise UsageError(f'path to config file {env_path} doesn\'t exist')
        return False
    re.read_env(str(env_path), recurse=False)
    return True


def _env_int(env: Mapping[str, str], name: str, default: Optional[int]) -> Optional[int]:
    raw = env.get(name)
    if raw is None or raw == '':
        return default
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f'environment variable {name} must be an integer, got {raw!r}')


@dc.dataclass(frozen=True)
class GlobalConfig:
    """Process-wide settings"""
    threads: int = 1  # parallelism cap for corpus graph building
    seed: Optional[int] = None  # default seed of training commands
    verbosity: str = 'warning'  # log level of the stderr handler
    feature_spec: Optional[str] = None  # path to a FeatureSpec JSON document
    max_input_bytes: int = DEFAULT_MAX_INPUT_BYTES  # parser size limit

    def __post_init__(self):
        if self.threads < 1:
            raise UsageError(f'threads must be at least 1, got {self.threads}')
        if self.verbosity not in VERBOSITIES:
            raise UsageError(f'verbosity must be one of {", ".join(VERBOSITIES)}, got {self.verbosity!r}')
        if self.max_input_bytes < 1:
            raise UsageError('max input bytes must be positive')

    @classmethod
    def from_env(cls, environ: Optional[Mapping[str, str]] = None) -> GlobalConfig:
        """Returns a GlobalConfig with the IRGRAPH_* variables of the environment
        :param environ: mapping to read instead of os.environ
        :return: GlobalConfig of environmental variables
        """
        env = os.environ if environ is None else environ
        return cls(threads=_env_int(env, 'IRGRAPH_THREADS', 1), seed=_env_int(env, 'IRGRAPH_SEED', None),
                   verbosity=env.get('IRGRAPH_VERBOSITY', 'warning').lower(),
                   feature_spec=env.get('IRGRAPH_FEATURE_SPEC') or None,
                   max_input_bytes=_env_int(env, 'IRGRAPH_MAX_INPUT_BYTES', DEFAULT_MAX_INPUT_BYTES))


@dc.dataclass(frozen=True)
class TrainConfig:
    """Settings of every training command; recorded in each checkpoint and report"""
    seed: Optional[int] = None
    learning_rate: float = 1e-4  # pretraining and soft prompt fine-tuning
    classify_learning_rate: float = 1e-3  # classification head training, GNN included
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.01
    epochs: int = 1
    batch_size: int = 8
    max_steps: Optional[int] = None  # exact optimizer step count, epochs repeat until it is reached
    mask_rate: float = 0.15
    hidden1: int = 64
    hidden2: int = 64
    embed: int = 256
    holdout_fraction: float = 0.2  # classifier training
    max_nodes: Optional[int] = None  # prompt node-row cap
    supervise_eos: bool = True  # soft prompt loss also covers the EOS position

    def __post_init__(self):
        if min(self.learning_rate, self.classify_learning_rate) <= 0:
            raise UsageError(f'learning rates must be positive, got {self.learning_rate} and '
                             f'{self.classify_learning_rate}')
        if not 0 < self.mask_rate <= 1:
            raise UsageError(f'mask_rate must lie in (0, 1], got {self.mask_rate}')
        if self.epochs < 1 or self.batch_size < 1:
            raise UsageError('epochs and batch_size must be at least 1')
        if self.max_steps is not None and self.max_steps < 1:
            raise UsageError('max_steps must be at least 1')
        if not 0 < self.holdout_fraction < 1:
            raise UsageError(f'holdout_fraction must lie in (0, 1), got {self.holdout_fraction}')
        if min(self.hidden1, self.hidden2, self.embed) < 1:
            raise UsageError('model dimensions must be positive')

    def require_seed(self) -> int:
        if self.seed is None:
            raise UsageError('a seed is required: pass --seed, set "seed" in the config file or IRGRAPH_SEED')
        return self.seed

    def to_json(self) -> Dict[str, Any]:
        return dc.asdict(self)


def config_from_mapping(cls: Type[C], doc: Mapping[str, Any], source: str = 'config') -> C:
    names = {field.name for field in dc.fields(cls)}
    unknown = sorted(set(doc) - names)
    if unknown:
        raise UsageError(f'unknown keys in {source}: {", ".join(unknown)}')
    try:
        return cls(**doc)
    except TypeError as exc:
        raise UsageError(f'invalid {source}: {exc}') from exc


def load_config(cls: Type[C], path: Optional[Union[str, pl.Path]] = None,
                overrides: Optional[Mapping[str, Any]] = None) -> C:
    """Builds a config dataclass from an optional JSON file, then applies non-None overrides
    :param cls: config dataclass type
    :param path: JSON file holding a subset of the dataclass fields
    :param overrides: values taking precedence over the file, typically command line flags
    :return: resolved config
    """
    doc: Dict[str, Any] = {}
    if path is not None:
        try:
            doc = json.loads(pl.Path(path).read_text(encoding='utf-8'))
        except OSError as exc:
            raise UsageError(f'cannot read config {path}: {exc.strerror}') from exc
        except json.JSONDecodeError as exc:
            raise UsageError(f'config {path} is not valid JSON: {exc}') from exc
        if not isinstance(doc, dict):
            raise UsageError(f'config {path} must hold a JSON object')
    doc.update({key: value for key, value in (overrides or {}).items() if value is not None})
    return config_from_mapping(cls, doc, str(path) if path else 'config')
