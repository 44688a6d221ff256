from __future__ import annotations

import dataclasses as dc
import enum as e
from typing import Dict, FrozenSet, Tuple

"""Node and edge taxonomy of the program graph: six node kinds, eight edge kinds and the fixed endpoint signature of
every edge kind."""


class NodeKind(e.Enum):
    """Declaration order is the canonical node order used by prompts and serialization"""
    VALUE = 'Value'
    TYPE = 'Type'
    SIZE = 'Size'
    MODULE = 'Module'
    ATTRIBUTES = 'Attributes'
    INSTRUCTION = 'Instruction'


class EdgeKind(e.Enum):
    TYPE_OF = 'TypeOf'
    DATAFLOW = 'Dataflow'
    ATTRIBUTE = 'Attribute'
    CFG = 'Cfg'
    SIZE_OF = 'SizeOf'
    SYMBOL = 'Symbol'
    INCLUDES = 'Includes'
    CONTAINS = 'Contains'


@dc.dataclass(frozen=True)
class EdgeType:
    """A typed, directed relation. `reverse` marks a mirrored copy of a natural edge type."""
    src: NodeKind
    kind: EdgeKind
    dst: NodeKind
    reverse: bool = False

    @property
    def name(self) -> str:
        base = f'{self.src.value}-{self.kind.value}-{self.dst.value}'
        return base + '~rev' if self.reverse else base

    def mirrored(self) -> EdgeType:
        return EdgeType(self.dst, self.kind, self.src, not self.reverse)

    @classmethod
    def from_name(cls, name: str) -> EdgeType:
        reverse = name.endswith('~rev')
        src, kind, dst = name[:-4].split('-') if reverse else name.split('-')
        return cls(NodeKind(src), EdgeKind(kind), NodeKind(dst), reverse)

    def __str__(self) -> str:
        return self.name


V, T, S, M, A, I = (NodeKind.VALUE, NodeKind.TYPE, NodeKind.SIZE, NodeKind.MODULE, NodeKind.ATTRIBUTES,
                    NodeKind.INSTRUCTION)

TYPE_OF = EdgeType(V, EdgeKind.TYPE_OF, T)
DEFINES = EdgeType(I, EdgeKind.DATAFLOW, V)
USES = EdgeType(V, EdgeKind.DATAFLOW, I)
ATTRIBUTE = EdgeType(V, EdgeKind.ATTRIBUTE, A)
CFG = EdgeType(I, EdgeKind.CFG, I)
SIZE_OF = EdgeType(T, EdgeKind.SIZE_OF, S)
SYMBOL_OUT = EdgeType(M, EdgeKind.SYMBOL, V)
SYMBOL_IN = EdgeType(V, EdgeKind.SYMBOL, M)
INCLUDES = EdgeType(T, EdgeKind.INCLUDES, T)
CONTAINS = EdgeType(V, EdgeKind.CONTAINS, V)

# natural edge types in emission order; Dataflow and Symbol carry both orientations
NATURAL_EDGE_TYPES: Tuple[EdgeType, ...] = (TYPE_OF, DEFINES, USES, ATTRIBUTE, SIZE_OF, SYMBOL_OUT, SYMBOL_IN, CFG,
                                            INCLUDES, CONTAINS)

# kinds already carrying both orientations are never mirrored
TWO_WAY_KINDS: FrozenSet[EdgeKind] = frozenset({EdgeKind.DATAFLOW, EdgeKind.SYMBOL})

MIRRORED_EDGE_TYPES: Tuple[EdgeType, ...] = tuple(
    edge_type.mirrored() for edge_type in NATURAL_EDGE_TYPES if edge_type.kind not in TWO_WAY_KINDS)

ALL_EDGE_TYPES: Tuple[EdgeType, ...] = NATURAL_EDGE_TYPES + MIRRORED_EDGE_TYPES

SIGNATURES: Dict[EdgeKind, FrozenSet[Tuple[NodeKind, NodeKind]]] = {
    kind: frozenset((edge_type.src, edge_type.dst) for edge_type in NATURAL_EDGE_TYPES if edge_type.kind is kind)
    for kind in EdgeKind}


def is_admissible(edge_type: EdgeType) -> bool:
    """True when the edge type matches the signature table, directly or as the mirror of a natural type"""
    natural = edge_type.mirrored() if edge_type.reverse else edge_type
    return (natural.src, natural.dst) in SIGNATURES[natural.kind] and not (
        edge_type.reverse and natural.kind in TWO_WAY_KINDS)
