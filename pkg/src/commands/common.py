from __future__ import annotations

import argparse as ap
import logging
import pathlib as pl
from typing import Any, Dict, List, Optional

import src.bench.corpus as bc
import src.graph.features as gf
import src.graph.hetero as hg
import src.graph.store as gs
import src.prompt.lm as lmm
import src.util as u
import src.utility.cmd_enum as ce
from src.errors import EmptyInput, IoError

"""Helpers shared by the command implementations: resolving inputs, loading models and shaping outcomes."""

log = logging.getLogger(__name__)

IR_SUFFIX = '.ll'
STUB_LM_SEED = 0


def outcome(args: ap.Namespace, doc: Dict[str, Any], text: str) -> ce.Outcome:
    return ce.Outcome(doc, text, args.json)


def feature_spec(args: ap.Namespace) -> gf.FeatureSpec:
    return gf.load_feature_spec(args.global_config.feature_spec)


def corpus_paths(corpus: str) -> List[pl.Path]:
    """Inputs of an unlabeled corpus: the manifest entries when the directory has a manifest, otherwise every .ll
    and .irg file of the directory in name order"""
    path = pl.Path(corpus)
    if not path.exists():
        raise IoError(f'corpus {path} does not exist')
    if path.is_file() or (path / bc.MANIFEST).exists():
        return [item.path for item in bc.read_manifest(path).items]
    paths = sorted(p for p in path.iterdir() if p.suffix in (IR_SUFFIX, bc.GRAPH_SUFFIX))
    if not paths:
        raise EmptyInput(f'{path} holds no .ll or .irg files')
    return paths


def load_inputs(paths: List[pl.Path], args: ap.Namespace) -> List[hg.HeteroGraph]:
    missing = [str(path) for path in paths if not pl.Path(path).exists()]
    if missing:
        raise IoError(f'no such file: {", ".join(missing[:5])}')
    return bc.load_graph_paths(paths, feature_spec(args), args.global_config.threads,
                               getattr(args, 'lenient', False), args.global_config.max_input_bytes)


def load_lm(path: Optional[str], embed: int) -> lmm.FrozenLm:
    """Language model from a stub checkpoint, or the seeded stub of the requested width"""
    if path is not None:
        return lmm.load_lm(path)
    log.info('no language model given; using the seeded stub of width %d', embed)
    return lmm.init_lm(lmm.LmDims(embed=embed), STUB_LM_SEED)


def write_report(path: Optional[str], doc: Dict[str, Any]) -> None:
    if path is not None:
        gs.atomic_write(path, (u.dump_json(doc) + '\n').encode('utf-8'))
