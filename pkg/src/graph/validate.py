from __future__ import annotations

import dataclasses as dc
from typing import List, Tuple

import numpy as np

import src.graph.hetero as hg
import src.graph.kinds as gk

"""Structural checks of a HeteroGraph. Violations are collected, never raised, so a report shows every problem at
once."""


@dc.dataclass(frozen=True)
class Violation:
    rule: str  # e.g. "missing TypeOf", "Cfg endpoint kind"
    detail: str
    ids: Tuple[int, ...] = ()  # offending node ids or edge positions

    def __str__(self) -> str:
        return f'{self.rule}: {self.detail}'


@dc.dataclass(frozen=True)
class ValidationReport:
    violations: Tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def rules(self) -> List[str]:
        return [violation.rule for violation in self.violations]

    def to_json(self):
        return [{'rule': v.rule, 'detail': v.detail, 'ids': list(v.ids)} for v in self.violations]


def _ids(array: np.ndarray, limit: int = 16) -> Tuple[int, ...]:
    return tuple(int(i) for i in array[:limit])


def validate_graph(g: hg.HeteroGraph) -> ValidationReport:
    """Checks every HeteroGraph invariant
    :param g: graph to check
    :return: report listing each violated rule with the offending ids; empty when the graph is valid
    """
    violations: List[Violation] = []
    modules = g.num_nodes(gk.NodeKind.MODULE)
    if modules != 1:
        violations.append(Violation('module count', f'expected exactly 1 Module node, found {modules}'))

    for kind in gk.NodeKind:
        matrix = g.features[kind]
        width = g.feature_spec.width(kind)
        if matrix.ndim != 2 or matrix.shape[1] != width:
            violations.append(Violation('feature width', f'{kind.value} features have shape {matrix.shape}, '
                                                         f'expected width {width}'))
        elif not np.all(np.isfinite(matrix)):
            rows = np.nonzero(~np.all(np.isfinite(matrix), axis=1))[0]
            violations.append(Violation('feature width', f'{kind.value} features are not finite', _ids(rows)))

    for edge_type, index in g.edges.items():
        if not gk.is_admissible(edge_type):
            violations.append(Violation(f'{edge_type.kind.value} endpoint kind',
                                        f'{edge_type.name} does not match the edge signature table'))
            continue
        if index.shape[1] == 0:
            continue
        bad = np.nonzero((index[0] < 0) | (index[0] >= g.num_nodes(edge_type.src)) |
                         (index[1] < 0) | (index[1] >= g.num_nodes(edge_type.dst)))[0]
        if bad.size:
            violations.append(Violation('dangling endpoint', f'{bad.size} {edge_type.name} edges point outside '
                                                             f'the node tables', _ids(bad)))

    type_of = g.edges.get(gk.TYPE_OF)
    if type_of is not None and 'TypeOf' not in g.ablated and 'Type' not in g.ablated:
        values = g.num_nodes(gk.NodeKind.VALUE)
        sources = type_of[0][(type_of[0] >= 0) & (type_of[0] < values)]
        counts = np.bincount(sources, minlength=values)
        missing = np.nonzero(counts == 0)[0]
        if missing.size:
            violations.append(Violation('missing TypeOf', f'{missing.size} Value nodes have no TypeOf edge',
                                        _ids(missing)))
        duplicated = np.nonzero(counts > 1)[0]
        if duplicated.size:
            violations.append(Violation('duplicate TypeOf', f'{duplicated.size} Value nodes have several TypeOf '
                                                            f'edges', _ids(duplicated)))

    outgoing = g.edges.get(gk.SYMBOL_OUT, hg.empty_edges())
    incoming = g.edges.get(gk.SYMBOL_IN, hg.empty_edges())
    forward = sorted(zip(outgoing[0].tolist(), outgoing[1].tolist()))
    backward = sorted(zip(incoming[1].tolist(), incoming[0].tolist()))
    if forward != backward:
        violations.append(Violation('Symbol reciprocity', 'Module->Value and Value->Module Symbol edges differ'))
    return ValidationReport(tuple(violations))
