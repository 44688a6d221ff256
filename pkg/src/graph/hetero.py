from __future__ import annotations

import dataclasses as dc
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np

import src.graph.features as gf
import src.graph.kinds as gk
from src.errors import InternalInconsistency

"""The heterogeneous program graph. Node ids are dense per kind; features and edge lists are read-only numpy arrays so
graphs can be shared between threads and processes without copying."""


@dc.dataclass(frozen=True)
class Provenance:
    source: str  # file name the graph was built from
    digest: str  # sha256 hex of the source bytes


EMPTY_PROVENANCE = Provenance('', '0' * 64)


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


def empty_edges() -> np.ndarray:
    return _frozen(np.zeros((2, 0), dtype=np.int64))


@dc.dataclass(frozen=True, eq=False)
class HeteroGraph:
    """Per-kind feature matrices plus per-edge-type (2, m) edge index arrays.

    Every node kind has a feature matrix (possibly with zero rows). Edge arrays are keyed by edge type in
    ALL_EDGE_TYPES order; every natural edge type is present, mirrored types only after an ablation fix-up.
    """
    features: Mapping[gk.NodeKind, np.ndarray]
    edges: Mapping[gk.EdgeType, np.ndarray]
    feature_spec: gf.FeatureSpec
    provenance: Provenance = EMPTY_PROVENANCE
    ablated: Tuple[str, ...] = ()  # ablation targets applied, by kind value

    @classmethod
    def create(cls, features: Dict[gk.NodeKind, np.ndarray], edges: Dict[gk.EdgeType, np.ndarray],
               feature_spec: gf.FeatureSpec, provenance: Provenance = EMPTY_PROVENANCE,
               ablated: Tuple[str, ...] = ()) -> HeteroGraph:
        """Normalizes dtypes, orders keys canonically and freezes every array"""
        frozen_features = {}
        for kind in gk.NodeKind:
            matrix = features.get(kind)
            if matrix is None:
                matrix = np.zeros((0, feature_spec.width(kind)), dtype=np.float32)
            frozen_features[kind] = _frozen(np.ascontiguousarray(matrix, dtype=np.float32))
        frozen_edges = {}
        for edge_type in gk.ALL_EDGE_TYPES:
            if edge_type in edges:
                index = np.ascontiguousarray(edges[edge_type], dtype=np.int64).reshape(2, -1)
                frozen_edges[edge_type] = _frozen(index)
            elif not edge_type.reverse:
                frozen_edges[edge_type] = empty_edges()
        unknown = set(edges) - set(gk.ALL_EDGE_TYPES)
        if unknown:
            raise InternalInconsistency(f'edge types outside the schema: {sorted(str(t) for t in unknown)}')
        return cls(frozen_features, frozen_edges, feature_spec, provenance, tuple(ablated))

    def num_nodes(self, kind: Optional[gk.NodeKind] = None) -> int:
        if kind is not None:
            return int(self.features[kind].shape[0])
        return sum(int(matrix.shape[0]) for matrix in self.features.values())

    def num_edges(self, edge_type: Optional[gk.EdgeType] = None) -> int:
        if edge_type is not None:
            return int(self.edges[edge_type].shape[1]) if edge_type in self.edges else 0
        return sum(int(index.shape[1]) for index in self.edges.values())

    def canonical_order(self) -> List[Tuple[gk.NodeKind, int]]:
        """(kind, id) pairs in canonical node order: kind declaration order, then id"""
        return [(kind, node) for kind in gk.NodeKind for node in range(self.num_nodes(kind))]

    def structurally_equal(self, other: HeteroGraph) -> bool:
        if self.feature_spec != other.feature_spec or self.provenance != other.provenance:
            return False
        if self.ablated != other.ablated or list(self.edges) != list(other.edges):
            return False
        return all(np.array_equal(self.features[kind], other.features[kind]) for kind in gk.NodeKind) and all(
            np.array_equal(self.edges[t], other.edges[t]) for t in self.edges)


@dc.dataclass(frozen=True)
class Census:
    nodes: Dict[str, int]  # node kind value -> count
    edges: Dict[str, int]  # edge type name -> count

    def by_edge_kind(self) -> Dict[str, int]:
        totals = {kind.value: 0 for kind in gk.EdgeKind}
        for name, count in self.edges.items():
            totals[gk.EdgeType.from_name(name).kind.value] += count
        return totals

    def to_json(self) -> Dict[str, object]:
        return {'nodes': dict(self.nodes), 'edges': dict(self.edges), 'edge_kinds': self.by_edge_kind()}


def census(g: HeteroGraph) -> Census:
    return Census({kind.value: g.num_nodes(kind) for kind in gk.NodeKind},
                  {edge_type.name: g.num_edges(edge_type) for edge_type in g.edges})


def relabel_nodes(g: HeteroGraph, perms: Mapping[gk.NodeKind, np.ndarray]) -> HeteroGraph:
    """Permutes node ids consistently: node `i` of kind k becomes node `perms[k][i]`
    :param g: graph to relabel
    :param perms: permutation per kind; kinds without an entry keep their ids
    :return: isomorphic graph with edge endpoints rewritten and edges kept in their original list order
    """
    perm = {}
    for kind in gk.NodeKind:
        count = g.num_nodes(kind)
        p = np.asarray(perms.get(kind, np.arange(count)), dtype=np.int64)
        if p.shape != (count,) or not np.array_equal(np.sort(p), np.arange(count)):
            raise ValueError(f'relabeling of {kind.value} is not a permutation of {count} ids')
        perm[kind] = p
    features = {}
    for kind, matrix in g.features.items():
        permuted = np.empty_like(matrix)
        permuted[perm[kind]] = matrix
        features[kind] = permuted
    edges = {edge_type: np.stack([perm[edge_type.src][index[0]], perm[edge_type.dst][index[1]]])
             for edge_type, index in g.edges.items()}
    return HeteroGraph.create(features, edges, g.feature_spec, g.provenance, g.ablated)
