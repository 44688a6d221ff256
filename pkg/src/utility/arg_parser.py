from __future__ import annotations

import argparse as ap
import dataclasses as dc
from typing import Any, Dict, List, Optional

import src.util as u
from src.config import GlobalConfig, TrainConfig, load_config
from src.errors import UsageError

"""Argument parsing shared by every irgraph command: a parser that raises instead of exiting, the flags common to
all commands and the training flags that override a JSON config file."""


class RaisingArgumentParser(ap.ArgumentParser):
    """Custom ArgumentParser class that raises exceptions instead of exiting the system."""

    def error(self, message: str):
        """Raise a UsageError with the given error message
        :param message: error message to raise
        :return: None
        """
        raise UsageError(f'{self.prog}: {message}')


def command_parser(name: str, description: str) -> RaisingArgumentParser:
    """Returns a parser for one command carrying the flags every command accepts
    :param name: command name, shown in usage lines
    :param description: what the command does
    :return: custom ArgumentParser
    """
    parser = RaisingArgumentParser(prog=f'irgraph {name}', description=description, prefix_chars='-')
    parser.add_argument('--json', action='store_true', help='print machine-readable JSON')
    parser.add_argument('--verbosity', choices=('debug', 'info', 'warning', 'error'), help='stderr log level')
    parser.add_argument('--threads', type=int, help='parallelism cap for graph building (IRGRAPH_THREADS)')
    parser.add_argument('--feature-spec', help='FeatureSpec JSON document (IRGRAPH_FEATURE_SPEC)')
    parser.add_argument('--max-input-bytes', type=int, help='parser size limit (IRGRAPH_MAX_INPUT_BYTES)')
    return parser


def add_train_flags(parser: RaisingArgumentParser) -> None:
    parser.add_argument('--config', help='TrainConfig JSON file; flags take precedence over it')
    parser.add_argument('--seed', type=int, help='random seed (required by every training command)')
    parser.add_argument('--learning-rate', type=float, help='AdamW rate of pretraining and soft prompt tuning')
    parser.add_argument('--classify-learning-rate', type=float, help='AdamW rate of classifier training')
    parser.add_argument('--weight-decay', type=float)
    parser.add_argument('--epochs', type=int)
    parser.add_argument('--batch-size', type=int)
    parser.add_argument('--max-steps', type=int, help='optimizer steps to run, repeating epochs as needed')
    parser.add_argument('--mask-rate', type=float)
    parser.add_argument('--hidden1', type=int)
    parser.add_argument('--hidden2', type=int)
    parser.add_argument('--embed', type=int, help='embedding width E, equal to the language model width')
    parser.add_argument('--holdout-fraction', type=float)
    parser.add_argument('--max-nodes', type=int, help='node-row cap of soft prompts')


def parse(parser: RaisingArgumentParser, params: List[str], config: GlobalConfig) -> ap.Namespace:
    """Parses command parameters; `args.global_config` is the GlobalConfig with flag overrides applied"""
    args = parser.parse_args(params)
    overrides = {'verbosity': args.verbosity, 'threads': args.threads, 'feature_spec': args.feature_spec,
                 'max_input_bytes': args.max_input_bytes}
    args.global_config = dc.replace(config, **{key: value for key, value in overrides.items() if value is not None})
    u.configure_logging(args.global_config.verbosity)
    return args


def train_config(args: ap.Namespace) -> TrainConfig:
    """TrainConfig from --config, overridden by flags, with the environment seed as the last fallback"""
    names = {field.name for field in dc.fields(TrainConfig)} - {'supervise_eos'}
    overrides: Dict[str, Any] = {name: getattr(args, name) for name in names if hasattr(args, name)}
    cfg = load_config(TrainConfig, args.config, overrides)
    seed: Optional[int] = cfg.seed if cfg.seed is not None else args.global_config.seed
    return dc.replace(cfg, seed=seed)
