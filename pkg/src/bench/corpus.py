from __future__ import annotations

import collections
import dataclasses as dc
import hashlib
import json
import logging
import pathlib as pl
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

import src.graph.builder as gb
import src.graph.features as gf
import src.graph.hetero as hg
import src.graph.store as gs
import src.ir.parser as ip
from src.errors import EmptyInput, FormatError

"""Labeled corpora: a `manifest.jsonl` of {path, label, pair_id?} records whose paths are relative to the manifest
directory and point at .ll sources or stored .irg graphs."""

log = logging.getLogger(__name__)

MANIFEST = 'manifest.jsonl'
GRAPH_SUFFIX = '.irg'


@dc.dataclass(frozen=True)
class CorpusItem:
    path: pl.Path  # absolute, or relative to the working directory
    label: int
    pair_id: Optional[str] = None


@dc.dataclass(frozen=True)
class LabeledCorpus:
    items: Tuple[CorpusItem, ...]
    classes: int

    def __post_init__(self):
        bad = [item.label for item in self.items if not 0 <= item.label < self.classes]
        if bad:
            raise FormatError(f'labels {sorted(set(bad))} outside [0, {self.classes})')
        counts = collections.Counter(item.pair_id for item in self.items if item.pair_id is not None)
        lonely = sorted(pair_id for pair_id, count in counts.items() if count != 2)
        if lonely:
            raise FormatError(f'pair ids not occurring exactly twice: {", ".join(lonely[:5])}')

    def __len__(self) -> int:
        return len(self.items)

    @property
    def labels(self) -> List[int]:
        return [item.label for item in self.items]

    @property
    def pair_ids(self) -> List[Optional[str]]:
        return [item.pair_id for item in self.items]

    @property
    def paired(self) -> bool:
        return bool(self.items) and all(item.pair_id is not None for item in self.items)

    def subset(self, indices: Sequence[int]) -> LabeledCorpus:
        return LabeledCorpus(tuple(self.items[i] for i in indices), self.classes)

    def digest(self) -> str:
        """sha256 over the manifest records and the bytes of every referenced file"""
        digest = hashlib.sha256()
        for item in self.items:
            digest.update(json.dumps([item.path.name, item.label, item.pair_id]).encode('utf-8'))
            digest.update(hashlib.sha256(gs.read_bytes(item.path)).digest())
        return digest.hexdigest()


def manifest_path(corpus: Union[str, pl.Path]) -> pl.Path:
    corpus = pl.Path(corpus)
    return corpus / MANIFEST if corpus.is_dir() else corpus


def read_manifest(corpus: Union[str, pl.Path]) -> LabeledCorpus:
    """Reads a corpus manifest
    :param corpus: manifest file, or the directory holding manifest.jsonl
    :return: corpus with paths resolved against the manifest directory
    """
    path = manifest_path(corpus)
    text = gs.read_bytes(path).decode('utf-8')
    items = []
    for number, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            pair_id = record.get('pair_id')
            items.append(CorpusItem(path.parent / record['path'], int(record['label']),
                                    None if pair_id is None else str(pair_id)))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError, AttributeError) as exc:
            raise FormatError(f'{path}:{number}: bad manifest record ({exc})') from exc
    if not items:
        raise EmptyInput(f'{path} lists no samples')
    return LabeledCorpus(tuple(items), max(item.label for item in items) + 1)


def write_manifest(corpus: LabeledCorpus, path: Union[str, pl.Path]) -> None:
    path = manifest_path(path)
    lines = []
    for item in corpus.items:
        record: Dict[str, object] = {'path': _relative(item.path, path.parent), 'label': item.label}
        if item.pair_id is not None:
            record['pair_id'] = item.pair_id
        lines.append(json.dumps(record, sort_keys=True))
    gs.atomic_write(path, ('\n'.join(lines) + '\n').encode('utf-8'))


def _relative(path: pl.Path, root: pl.Path) -> str:
    try:
        return path.resolve().relative_to(root.resolve()).as_posix()
    except ValueError:
        return str(path.resolve())


def load_graph_paths(paths: Sequence[pl.Path], spec: Optional[gf.FeatureSpec] = None, threads: int = 1,
                     lenient: bool = False, max_bytes: int = ip.DEFAULT_MAX_BYTES) -> List[hg.HeteroGraph]:
    """Graphs of many files in input order: stored .irg graphs are loaded, IR sources are built"""
    sources = [i for i, path in enumerate(paths) if pl.Path(path).suffix != GRAPH_SUFFIX]
    built = gb.build_corpus([paths[i] for i in sources], spec, threads, lenient, max_bytes)
    graphs: List[Optional[hg.HeteroGraph]] = [None] * len(paths)
    for i, g in zip(sources, built):
        graphs[i] = g
    for i, path in enumerate(paths):
        if graphs[i] is None:
            graphs[i] = gs.load_graph(path)
    log.info('loaded %d graphs (%d built from IR)', len(graphs), len(sources))
    return graphs


def split_corpus(corpus: LabeledCorpus, holdout_fraction: float, seed: int) -> Tuple[List[int], List[int]]:
    """Seeded train/held-out split over pair groups, so both members of a pair land on the same side
    :param corpus: labeled corpus
    :param holdout_fraction: share of groups held out, in (0, 1)
    :param seed: shuffle seed
    :return: sorted train indices and sorted held-out indices
    """
    groups: Dict[object, List[int]] = {}
    for i, item in enumerate(corpus.items):
        groups.setdefault(item.pair_id if item.pair_id is not None else ('single', i), []).append(i)
    if len(groups) < 2:
        raise EmptyInput('splitting needs at least two samples or pairs')
    keys = list(groups)
    order = np.random.default_rng(seed).permutation(len(keys))
    held = min(len(keys) - 1, max(1, int(round(holdout_fraction * len(keys)))))
    test = sorted(i for k in order[:held] for i in groups[keys[k]])
    train = sorted(i for k in order[held:] for i in groups[keys[k]])
    return train, test
