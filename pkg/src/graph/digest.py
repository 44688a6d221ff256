from __future__ import annotations

import hashlib
from typing import Dict, List, Tuple

import src.graph.hetero as hg
import src.graph.kinds as gk

"""Relabeling-invariant graph digest by Weisfeiler-Leman colour refinement over typed nodes and typed edges."""

Node = Tuple[gk.NodeKind, int]

DIGEST_SIZE = 16
MAX_ROUNDS = 64


def _hash_label(label: bytes) -> bytes:
    return hashlib.blake2b(label, digest_size=DIGEST_SIZE).digest()


def _neighbourhoods(g: hg.HeteroGraph) -> Dict[Node, List[Tuple[bytes, Node]]]:
    """Per node, (relation tag, neighbour) pairs covering both edge directions of every edge type"""
    adjacency: Dict[Node, List[Tuple[bytes, Node]]] = {node: [] for node in g.canonical_order()}
    for edge_type, index in g.edges.items():
        out_tag, in_tag = f'>{edge_type.name}'.encode(), f'<{edge_type.name}'.encode()
        for src, dst in zip(index[0].tolist(), index[1].tolist()):
            adjacency[(edge_type.src, src)].append((out_tag, (edge_type.dst, dst)))
            adjacency[(edge_type.dst, dst)].append((in_tag, (edge_type.src, src)))
    return adjacency


def refine_colours(g: hg.HeteroGraph, rounds: int = MAX_ROUNDS) -> List[Dict[Node, bytes]]:
    """Colourings of every refinement round, starting from (kind, feature vector)"""
    colours = {(kind, node): _hash_label(kind.value.encode() + b'|' + g.features[kind][node].tobytes())
               for kind, node in g.canonical_order()}
    history = [colours]
    adjacency = _neighbourhoods(g)
    for _ in range(rounds):
        refined = {}
        for node, neighbours in adjacency.items():
            signature = sorted(tag + b'|' + colours[other] for tag, other in neighbours)
            refined[node] = _hash_label(colours[node] + b'#' + b';'.join(signature))
        if len(set(refined.values())) <= len(set(colours.values())):
            break
        colours = refined
        history.append(colours)
    return history


def canonical_digest(g: hg.HeteroGraph) -> str:
    """Digest of a graph that ignores node ids, edge list order and provenance
    :param g: valid graph
    :return: 64-character sha256 hex digest
    """
    digest = hashlib.sha256()
    digest.update(g.feature_spec.digest().encode())
    digest.update(','.join(sorted(edge_type.name for edge_type in g.edges)).encode())
    for round_colours in refine_colours(g):
        digest.update(b'round')
        for colour in sorted(round_colours.values()):
            digest.update(colour)
    return digest.hexdigest()
