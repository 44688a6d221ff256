from __future__ import annotations

import json
import os
import pathlib as pl
import struct
import tempfile
from typing import Dict, Union

import numpy as np

import src.graph.features as gf
import src.graph.hetero as hg
import src.graph.kinds as gk
from src.errors import FormatError, IoError, SerializationOverflow

"""The .irg container. Layout, all little endian:

    magic        8 bytes  b'IRGRAPH\\0'
    version      u32
    header       u32 length + UTF-8 JSON {feature_spec, source, ablated, edge_types}
    provenance   32 bytes, sha256 of the source
    node counts  u32 per node kind, NodeKind order
    features     float32 row-major matrix per node kind, NodeKind order
    edges        per edge type listed in the header: u32 count + count (src u32, dst u32) pairs

Bytes are a pure function of the graph."""

MAGIC = b'IRGRAPH\0'
VERSION = 1
_U32_MAX = 2 ** 32 - 1

PathLike = Union[str, pl.Path]


def _u32(value: int, what: str) -> bytes:
    if value > _U32_MAX:
        raise SerializationOverflow(f'{what} of {value} does not fit the u32 fields of the graph format')
    return struct.pack('<I', value)


def encode_graph(g: hg.HeteroGraph) -> bytes:
    header = {
        'feature_spec': g.feature_spec.to_json(),
        'source': g.provenance.source,
        'ablated': list(g.ablated),
        'edge_types': [edge_type.name for edge_type in g.edges],
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(',', ':')).encode('utf-8')
    parts = [MAGIC, struct.pack('<I', VERSION), _u32(len(header_bytes), 'header length'), header_bytes,
             bytes.fromhex(g.provenance.digest)]
    parts += [_u32(g.num_nodes(kind), f'{kind.value} node count') for kind in gk.NodeKind]
    parts += [np.ascontiguousarray(g.features[kind], dtype='<f4').tobytes() for kind in gk.NodeKind]
    for edge_type, index in g.edges.items():
        parts.append(_u32(index.shape[1], f'{edge_type.name} edge count'))
        parts.append(np.ascontiguousarray(index.T, dtype='<u4').tobytes())
    return b''.join(parts)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, size: int) -> bytes:
        if size < 0 or self.pos + size > len(self.data):
            raise FormatError('length mismatch: graph file is truncated')
        chunk = self.data[self.pos:self.pos + size]
        self.pos += size
        return chunk

    def u32(self) -> int:
        return struct.unpack('<I', self.take(4))[0]


def decode_graph(data: bytes) -> hg.HeteroGraph:
    reader = _Reader(data)
    if len(data) < len(MAGIC) or reader.take(len(MAGIC)) != MAGIC:
        raise FormatError('bad magic: not an irgraph graph file')
    version = reader.u32()
    if version != VERSION:
        raise FormatError(f'unsupported version {version}, this build reads version {VERSION}')
    try:
        header = json.loads(reader.take(reader.u32()).decode('utf-8'))
        spec = gf.FeatureSpec.from_json(header['feature_spec'])
        edge_types = [gk.EdgeType.from_name(name) for name in header['edge_types']]
        source, ablated = str(header['source']), tuple(header['ablated'])
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise FormatError(f'corrupt graph header: {exc}') from exc
    provenance = hg.Provenance(source, reader.take(32).hex())
    counts = {kind: reader.u32() for kind in gk.NodeKind}
    features = {}
    for kind in gk.NodeKind:
        width = spec.width(kind)
        raw = reader.take(counts[kind] * width * 4)
        features[kind] = np.frombuffer(raw, dtype='<f4').astype(np.float32).reshape(counts[kind], width)
    edges: Dict[gk.EdgeType, np.ndarray] = {}
    for edge_type in edge_types:
        count = reader.u32()
        pairs = np.frombuffer(reader.take(count * 8), dtype='<u4').reshape(count, 2)
        edges[edge_type] = pairs.T.astype(np.int64)
    if reader.pos != len(data):
        raise FormatError(f'length mismatch: {len(data) - reader.pos} trailing bytes after the edge section')
    return hg.HeteroGraph.create(features, edges, spec, provenance, ablated)


def atomic_write(path: PathLike, data: bytes) -> None:
    """Writes through a temporary file in the target directory and renames it into place"""
    path = pl.Path(path)
    try:
        fd, tmp = tempfile.mkstemp(prefix=f'.{path.name}.', dir=path.parent if str(path.parent) else '.')
        try:
            with os.fdopen(fd, 'wb') as handle:
                handle.write(data)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise IoError(f'cannot write {path}: {exc.strerror}') from exc


def read_bytes(path: PathLike) -> bytes:
    try:
        return pl.Path(path).read_bytes()
    except OSError as exc:
        raise IoError(f'cannot read {path}: {exc.strerror}') from exc


def save_graph(g: hg.HeteroGraph, path: PathLike) -> None:
    atomic_write(path, encode_graph(g))


def load_graph(path: PathLike) -> hg.HeteroGraph:
    return decode_graph(read_bytes(path))

