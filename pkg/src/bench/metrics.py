from __future__ import annotations

import collections
from typing import Dict, Hashable, Sequence

import numpy as np

from src.errors import EmptyInput, UnpairedSample, UsageError

"""Classification metrics: accuracy, error rate and pair-wise accuracy, where a pair only counts when both of its
members are classified correctly."""

METRICS = ('accuracy', 'error_rate', 'pairwise')


def _hits(preds: Sequence[int], labels: Sequence[int]) -> np.ndarray:
    if len(preds) != len(labels):
        raise EmptyInput(f'{len(preds)} predictions for {len(labels)} labels')
    if not len(labels):
        raise EmptyInput('no predictions to score')
    return np.asarray(preds, dtype=np.int64) == np.asarray(labels, dtype=np.int64)


def accuracy(preds: Sequence[int], labels: Sequence[int]) -> float:
    hits = _hits(preds, labels)
    return int(hits.sum()) / len(hits)


def error_rate(preds: Sequence[int], labels: Sequence[int]) -> float:
    return 1.0 - accuracy(preds, labels)


def pairwise_accuracy(preds: Sequence[int], labels: Sequence[int], pair_ids: Sequence[Hashable]) -> float:
    """Fraction of pairs whose two members are both correct
    :param preds: predicted classes
    :param labels: true classes
    :param pair_ids: pair key of every sample; each key must occur exactly twice
    :return: correct pairs / pairs
    """
    hits = _hits(preds, labels)
    if len(pair_ids) != len(hits):
        raise UnpairedSample(f'{len(pair_ids)} pair ids for {len(hits)} samples')
    members = collections.defaultdict(list)
    for hit, pair_id in zip(hits, pair_ids):
        if pair_id is None:
            raise UnpairedSample('sample without a pair id')
        members[pair_id].append(bool(hit))
    lonely = sorted(str(pair_id) for pair_id, hit_list in members.items() if len(hit_list) != 2)
    if lonely:
        raise UnpairedSample(f'pair ids not occurring exactly twice: {", ".join(lonely[:5])}')
    return sum(all(hit_list) for hit_list in members.values()) / len(members)


def per_class(preds: Sequence[int], labels: Sequence[int], classes: int) -> Dict[int, Dict[str, int]]:
    """Per true class: sample count and correct predictions"""
    hits = _hits(preds, labels)
    labels = np.asarray(labels, dtype=np.int64)
    return {c: {'count': int((labels == c).sum()), 'correct': int(hits[labels == c].sum())} for c in range(classes)}


def score(metric: str, preds: Sequence[int], labels: Sequence[int], pair_ids: Sequence[Hashable] = ()) -> float:
    if metric == 'accuracy':
        return accuracy(preds, labels)
    if metric == 'error_rate':
        return error_rate(preds, labels)
    if metric == 'pairwise':
        return pairwise_accuracy(preds, labels, pair_ids)
    raise UsageError(f'unknown metric {metric!r}, expected one of {", ".join(METRICS)}')
