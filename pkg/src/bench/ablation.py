from __future__ import annotations

import dataclasses as dc
import logging
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple, Union

import numpy as np

import src.bench.classifier as cl
import src.bench.corpus as bc
import src.graph.hetero as hg
import src.graph.kinds as gk
import src.model.gnn as gnn
from src.config import TrainConfig
from src.errors import CannotAblateModule, UsageError

"""Schema ablations: drop one node kind or edge kind from every graph, mirror the surviving edges of kinds the
removal leaves without input from other kinds, retrain from scratch and compare against the full schema."""

log = logging.getLogger(__name__)

Target = Union[gk.NodeKind, gk.EdgeKind]

ABLATION_TARGETS: Tuple[Target, ...] = tuple(kind for kind in gk.NodeKind if kind is not gk.NodeKind.MODULE) + \
    tuple(gk.EdgeKind)


def target_name(target: Optional[Target]) -> str:
    if target is None:
        return 'full'
    return f'node:{target.value}' if isinstance(target, gk.NodeKind) else f'edge:{target.value}'


def parse_target(name: str) -> Target:
    prefix, _, value = name.partition(':')
    try:
        if prefix == 'node':
            target = gk.NodeKind(value)
        elif prefix == 'edge':
            return gk.EdgeKind(value)
        else:
            raise ValueError(name)
    except ValueError:
        raise UsageError(f'unknown ablation target {name!r}, expected node:<kind> or edge:<kind>')
    if target is gk.NodeKind.MODULE:
        raise CannotAblateModule('the Module node cannot be ablated')
    return target


def _survives(edge_type: gk.EdgeType, target: Target) -> bool:
    if isinstance(target, gk.NodeKind):
        return target not in (edge_type.src, edge_type.dst)
    return edge_type.kind is not target


def _cross_kind_inputs(edge_types: Sequence[gk.EdgeType]) -> FrozenSet[gk.NodeKind]:
    return frozenset(edge_type.dst for edge_type in edge_types if edge_type.src is not edge_type.dst)


@dc.dataclass(frozen=True)
class AblationSpec:
    target: Target
    bidirectionalize: FrozenSet[gk.EdgeKind]  # edge kinds whose surviving edges get mirrored copies
    feature_only: FrozenSet[gk.NodeKind]  # kinds left with no cross-kind input even after mirroring

    @classmethod
    def of(cls, target: Target) -> AblationSpec:
        """Derives the mirror set from the signature table: a surviving node kind that no surviving natural edge
        type reaches from another kind is stranded, and every surviving one-way edge kind touching it is mirrored"""
        if target is gk.NodeKind.MODULE:
            raise CannotAblateModule('the Module node cannot be ablated')
        remaining = [t for t in gk.NATURAL_EDGE_TYPES if _survives(t, target)]
        reached = _cross_kind_inputs(remaining)
        stranded = [kind for kind in gk.NodeKind if kind is not target and kind not in reached]
        mirrored = frozenset(t.kind for t in remaining if t.kind not in gk.TWO_WAY_KINDS
                             and (t.src in stranded or t.dst in stranded))
        fixed = remaining + [t.mirrored() for t in remaining if t.kind in mirrored]
        feature_only = frozenset(kind for kind in stranded if kind not in _cross_kind_inputs(fixed))
        return cls(target, mirrored, feature_only)

    @property
    def name(self) -> str:
        return target_name(self.target)


def mirror_table() -> Dict[str, Dict[str, List[str]]]:
    """Mirrored edge kinds and feature-only node kinds of every ablation target"""
    table = {}
    for target in ABLATION_TARGETS:
        spec = AblationSpec.of(target)
        table[spec.name] = {
            'mirrored': [kind.value for kind in gk.EdgeKind if kind in spec.bidirectionalize],
            'feature_only': [kind.value for kind in gk.NodeKind if kind in spec.feature_only]}
    return table


def ablate(g: hg.HeteroGraph, spec: Union[AblationSpec, Target]) -> hg.HeteroGraph:
    """Copy of a graph without the target kind, plus the mirrored edges the AblationSpec asks for
    :param g: graph, left untouched
    :param spec: ablation spec or bare target
    :return: reduced graph; node ids of untargeted kinds are unchanged
    """
    spec = spec if isinstance(spec, AblationSpec) else AblationSpec.of(spec)
    features = dict(g.features)
    if isinstance(spec.target, gk.NodeKind):
        features[spec.target] = np.zeros((0, g.feature_spec.width(spec.target)), dtype=np.float32)
    edges = {t: index for t, index in g.edges.items() if not t.reverse and _survives(t, spec.target)}
    for edge_type, index in list(edges.items()):
        if edge_type.kind in spec.bidirectionalize:
            edges[edge_type.mirrored()] = index[::-1]
    return hg.HeteroGraph.create(features, edges, g.feature_spec, g.provenance, g.ablated + (spec.target.value,))


@dc.dataclass(frozen=True)
class AblationRow:
    report: cl.EvalReport
    delta: float  # metric value minus the full-schema value


@dc.dataclass(frozen=True)
class AblationReport:
    rows: List[AblationRow]
    mirror_table: Dict[str, Dict[str, List[str]]]
    config: Dict[str, object]
    train_size: int
    test_size: int

    def to_json(self) -> Dict[str, object]:
        return {'rows': [dict(row.report.to_json(), delta=row.delta) for row in self.rows],
                'mirror_table': self.mirror_table, 'config': self.config,
                'train_size': self.train_size, 'test_size': self.test_size}


def run_ablation(corpus: bc.LabeledCorpus, graphs: Sequence[hg.HeteroGraph], cfg: TrainConfig,
                 metric: str = 'accuracy', init: Optional[gnn.GnnParams] = None,
                 targets: Sequence[Target] = ABLATION_TARGETS) -> AblationReport:
    """Trains and scores the full schema and every ablation with one seed, config and train/held-out split
    :param corpus: labeled corpus
    :param graphs: corpus graphs in corpus order
    :param cfg: training config; cfg.seed must be set
    :param metric: accuracy, error_rate or pairwise
    :param init: pretrained starting point shared by every variant
    :param targets: ablation targets, all of them by default
    :return: one row per variant, the full schema first
    """
    seed = cfg.require_seed()
    train, test = bc.split_corpus(corpus, cfg.holdout_fraction, seed)
    labels = corpus.labels
    rows, baseline = [], None
    for target in (None, *targets):
        spec = AblationSpec.of(target) if target is not None else None
        variant = [ablate(g, spec) for g in graphs] if spec is not None else list(graphs)
        result = cl.train_classifier([variant[i] for i in train], [labels[i] for i in train], cfg, init,
                                     corpus.classes)
        report = cl.evaluate(result.params, [variant[i] for i in test], corpus.subset(test), metric,
                             target_name(target))
        baseline = report.value if baseline is None else baseline
        rows.append(AblationRow(report, report.value - baseline))
        log.info('%s: %s %.4f (delta %+.4f)', report.variant, metric, report.value, rows[-1].delta)
    return AblationReport(rows, mirror_table(), {'command': 'ablate', 'metric': metric, **cfg.to_json()},
                          len(train), len(test))
