from __future__ import annotations

import concurrent.futures as cf
import hashlib
import logging
import math
import pathlib as pl
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple, Union

import numpy as np

import src.graph.features as gf
import src.graph.hetero as hg
import src.graph.kinds as gk
import src.ir.module as im
import src.ir.parser as ip
import src.ir.printer as pr
from src.errors import InternalInconsistency

"""Builds the whole-module program graph. Node ids follow creation order, which is a pure function of the module,
so equal inputs always produce identical graphs down to id assignment."""

log = logging.getLogger(__name__)

_FLOAT_SIZES = {16: 2, 32: 4, 64: 8, 80: 16, 128: 16}


def _next_pow2(n: int) -> int:
    return 1 << max(0, (n - 1).bit_length())


def type_layout(desc: im.TypeDesc) -> Optional[Tuple[int, int]]:
    """(byte size, alignment) of a sized type, None for void, function and opaque types"""
    if desc.kind is im.TypeKind.INTEGER:
        size = math.ceil(desc.bit_width / 8)
        align = min(_next_pow2(size), 16)
        return -(-size // align) * align, align
    if desc.kind is im.TypeKind.FLOAT:
        size = _FLOAT_SIZES[desc.bit_width]
        return size, size
    if desc.kind is im.TypeKind.POINTER:
        return 8, 8
    if desc.kind in (im.TypeKind.ARRAY, im.TypeKind.VECTOR):
        element = type_layout(desc.element)
        if element is None:
            return None
        if desc.kind is im.TypeKind.ARRAY:
            return desc.count * element[0], element[1]
        size = _next_pow2(desc.count * element[0]) if desc.count else 0
        return size, max(size, 1)
    if desc.kind is im.TypeKind.STRUCTURE:
        offset, struct_align = 0, 1
        for member in desc.members:
            layout = type_layout(member)
            if layout is None:
                return None
            size, align = layout
            if desc.packed:
                align = 1
            offset = -(-offset // align) * align + size
            struct_align = max(struct_align, align)
        return -(-offset // struct_align) * struct_align, struct_align
    return None


def type_size(desc: im.TypeDesc) -> Optional[int]:
    layout = type_layout(desc)
    return None if layout is None else layout[0]


class _GraphBuilder:
    def __init__(self, spec: gf.FeatureSpec, lenient: bool):
        self.spec = spec
        self.lenient = lenient
        self.rows: Dict[gk.NodeKind, List[np.ndarray]] = {kind: [] for kind in gk.NodeKind}
        self.edges: Dict[gk.EdgeType, List[Tuple[int, int]]] = {t: [] for t in gk.NATURAL_EDGE_TYPES}
        self.type_ids: Dict[im.TypeDesc, int] = {}
        self.type_order: List[im.TypeDesc] = []
        self.attribute_ids: Dict[FrozenSet[str], int] = {}
        self.symbol_ids: Dict[str, int] = {}  # @name -> Value node
        self.constant_ids: Dict[str, int] = {}  # constant literal -> Value node
        self.aggregates: List[Tuple[int, im.ValueInfo]] = []
        self.bodies: List[Tuple[im.Function, List[int]]] = []

    def add_node(self, kind: gk.NodeKind, payload: gf.Payload) -> int:
        self.rows[kind].append(gf.encode_node_features(kind, payload, self.spec, self.lenient))
        return len(self.rows[kind]) - 1

    def add_edge(self, edge_type: gk.EdgeType, src: int, dst: int) -> None:
        self.edges[edge_type].append((src, dst))

    def type_node(self, desc: im.TypeDesc) -> int:
        if desc in self.type_ids:
            return self.type_ids[desc]
        node = self.add_node(gk.NodeKind.TYPE, desc)
        self.type_ids[desc] = node
        self.type_order.append(desc)
        for child in desc.children():
            self.type_node(child)
        return node

    def attribute_node(self, entries: FrozenSet[str]) -> int:
        if entries not in self.attribute_ids:
            self.attribute_ids[entries] = self.add_node(gk.NodeKind.ATTRIBUTES, entries)
        return self.attribute_ids[entries]

    def value_node(self, value: im.ValueInfo) -> int:
        """Creates a Value node with its TypeOf edge"""
        node = self.add_node(gk.NodeKind.VALUE, value)
        self.add_edge(gk.TYPE_OF, node, self.type_node(value.type))
        return node

    def attach_attributes(self, node: int, entries: FrozenSet[str]) -> None:
        if entries:
            self.add_edge(gk.ATTRIBUTE, node, self.attribute_node(entries))

    def operand_node(self, value: im.ValueInfo, locals_: Dict[str, int]) -> int:
        if value.is_constant:
            return self.constant_node(value, locals_)
        table = locals_ if value.id.startswith('%') else self.symbol_ids
        if value.kind is None or value.id not in table:
            raise InternalInconsistency(f'operand {value.id} does not name a defined value')
        return table[value.id]

    def constant_node(self, value: im.ValueInfo, locals_: Dict[str, int]) -> int:
        if value.id in self.constant_ids:
            return self.constant_ids[value.id]
        node = self.value_node(value)
        self.constant_ids[value.id] = node
        if value.operands:
            self.aggregates.append((node, value))
            for operand in value.operands:
                self.operand_node(operand, locals_)
        return node

    def function_body(self, function: im.Function) -> None:
        locals_: Dict[str, int] = {}
        for arg, attrs in zip(function.args, function.arg_attributes):
            node = self.value_node(arg)
            locals_[arg.id] = node
            self.attach_attributes(node, attrs.entries)
        instruction_ids: List[int] = []
        for inst in function.instructions():
            node = self.add_node(gk.NodeKind.INSTRUCTION, inst)
            instruction_ids.append(node)
            if inst.result is not None:
                result = self.value_node(inst.result)
                locals_[inst.result.id] = result
                self.add_edge(gk.DEFINES, node, result)
        for node, inst in zip(instruction_ids, function.instructions()):
            for operand in inst.operands:
                self.add_edge(gk.USES, self.operand_node(operand, locals_), node)
        self.bodies.append((function, instruction_ids))

    def build(self, module: im.IrModule) -> None:
        module_node = self.add_node(gk.NodeKind.MODULE, None)
        global_nodes = []
        for value in module.globals:
            node = self.value_node(value.ref)
            self.symbol_ids[value.ref.id] = node
            global_nodes.append(node)
        function_nodes = []
        for function in module.functions:
            node = self.value_node(function.ref)
            self.symbol_ids[function.ref.id] = node
            self.attach_attributes(node, function.attribute_entries())
            function_nodes.append(node)
        for function in module.functions:
            self.function_body(function)
        initializers = [(node, self.constant_node(value.initializer, {}))
                        for node, value in zip(global_nodes, module.globals) if value.initializer is not None]

        size_ids: Dict[int, int] = {}
        for desc in self.type_order:
            size = type_size(desc)
            if size is None:
                continue
            if size not in size_ids:
                size_ids[size] = self.add_node(gk.NodeKind.SIZE, size)
            self.add_edge(gk.SIZE_OF, self.type_ids[desc], size_ids[size])

        for node in global_nodes + function_nodes:
            self.add_edge(gk.SYMBOL_OUT, module_node, node)
            self.add_edge(gk.SYMBOL_IN, node, module_node)

        for function, instruction_ids in self.bodies:
            first: Dict[str, int] = {}
            spans = []
            cursor = 0
            for block in function.blocks:
                first[block.label] = instruction_ids[cursor]
                spans.append((block, instruction_ids[cursor:cursor + len(block.instructions)]))
                cursor += len(block.instructions)
            for block, ids in spans:
                for src, dst in zip(ids, ids[1:]):
                    self.add_edge(gk.CFG, src, dst)
                for label in block.terminator.successors:
                    self.add_edge(gk.CFG, ids[-1], first[label])

        for desc in self.type_order:
            for child in desc.children():
                self.add_edge(gk.INCLUDES, self.type_ids[desc], self.type_ids[child])

        for node, initializer in initializers:
            self.add_edge(gk.CONTAINS, node, initializer)
        for node, value in self.aggregates:
            for operand in value.operands:
                self.add_edge(gk.CONTAINS, node, self.operand_node(operand, {}))

    def features(self) -> Dict[gk.NodeKind, np.ndarray]:
        return {kind: np.stack(rows) if rows else np.zeros((0, self.spec.width(kind)), dtype=np.float32)
                for kind, rows in self.rows.items()}

    def edge_arrays(self) -> Dict[gk.EdgeType, np.ndarray]:
        return {edge_type: np.asarray(pairs, dtype=np.int64).T.reshape(2, -1)
                for edge_type, pairs in self.edges.items()}


def build_graph(module: im.IrModule, spec: Optional[gf.FeatureSpec] = None, lenient: bool = False,
                provenance: Optional[hg.Provenance] = None) -> hg.HeteroGraph:
    """Builds the program graph of a whole compilation unit
    :param module: parsed module
    :param spec: feature spec, the default spec when omitted
    :param lenient: clamp out-of-bucket payloads with a warning instead of raising FeatureOverflow
    :param provenance: source name and digest; derived from the printed module when omitted
    :return: graph with one Module node and every value, type, size, attribute set and instruction of the module
    """
    spec = spec or gf.FeatureSpec()
    if provenance is None:
        text = pr.print_module(module)
        provenance = hg.Provenance(module.name, hashlib.sha256(text.encode('utf-8')).hexdigest())
    builder = _GraphBuilder(spec, lenient)
    builder.build(module)
    graph = hg.HeteroGraph.create(builder.features(), builder.edge_arrays(), spec, provenance)
    log.debug('built graph for %s: %d nodes, %d edges', module.name, graph.num_nodes(), graph.num_edges())
    return graph


def graph_file(path: Union[str, pl.Path], spec: Optional[gf.FeatureSpec] = None, lenient: bool = False,
               max_bytes: int = ip.DEFAULT_MAX_BYTES) -> hg.HeteroGraph:
    """Parses one .ll file and builds its graph; provenance records the file name and the digest of its bytes"""
    path = pl.Path(path)
    text = ip.read_ir_text(path, max_bytes)
    module = ip.parse_module(text, lenient, max_bytes, name=path.name)
    provenance = hg.Provenance(path.name, hashlib.sha256(text.encode('utf-8')).hexdigest())
    return build_graph(module, spec, lenient, provenance)


def build_corpus(paths: Sequence[Union[str, pl.Path]], spec: Optional[gf.FeatureSpec] = None, threads: int = 1,
                 lenient: bool = False, max_bytes: int = ip.DEFAULT_MAX_BYTES) -> List[hg.HeteroGraph]:
    """Builds the graphs of many files, in input order, on up to `threads` worker processes"""
    spec = spec or gf.FeatureSpec()
    if threads <= 1 or len(paths) <= 1:
        return [graph_file(path, spec, lenient, max_bytes) for path in paths]
    with cf.ProcessPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(graph_file, path, spec, lenient, max_bytes) for path in paths]
        return [future.result() for future in futures]
