from __future__ import annotations

import hashlib
import json
import struct
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np
import torch

import src.graph.features as gf
import src.graph.store as gs
import src.model.gnn as gnn
from src.errors import FormatError

"""Versioned tensor containers for model parameters. Layout, all little endian:

    magic     8 bytes
    version   u32
    header    u32 length + UTF-8 JSON, always holding `tensors`: [[name, shape], ...] in sorted name order
    tensors   float64 row-major data, in header order

Bytes are a pure function of the header and the tensors."""

PARAMS_MAGIC = b'IRGPARM\0'
VERSION = 1


def encode_tensors(magic: bytes, header: Mapping[str, object], tensors: List[Tuple[str, torch.Tensor]]) -> bytes:
    tensors = sorted(tensors, key=lambda item: item[0])
    doc = dict(header)
    doc['tensors'] = [[name, list(tensor.shape)] for name, tensor in tensors]
    header_bytes = json.dumps(doc, sort_keys=True, separators=(',', ':')).encode('utf-8')
    parts = [magic, struct.pack('<I', VERSION), struct.pack('<I', len(header_bytes)), header_bytes]
    parts += [np.ascontiguousarray(tensor.detach().cpu().numpy(), dtype='<f8').tobytes() for _, tensor in tensors]
    return b''.join(parts)


def decode_tensors(data: bytes, magic: bytes, what: str) -> Tuple[Dict[str, object], Dict[str, torch.Tensor]]:
    if data[:len(magic)] != magic:
        raise FormatError(f'bad magic: not an irgraph {what} file')
    pos = len(magic)
    if len(data) < pos + 8:
        raise FormatError(f'length mismatch: {what} file is truncated')
    version, length = struct.unpack_from('<II', data, pos)
    if version != VERSION:
        raise FormatError(f'unsupported version {version}, this build reads version {VERSION}')
    pos += 8
    try:
        header = json.loads(data[pos:pos + length].decode('utf-8'))
        layout = [(str(name), tuple(int(d) for d in shape)) for name, shape in header['tensors']]
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise FormatError(f'corrupt {what} header: {exc}') from exc
    pos += length
    tensors = {}
    for name, shape in layout:
        size = int(np.prod(shape, dtype=np.int64)) * 8
        if pos + size > len(data):
            raise FormatError(f'length mismatch: {what} file is truncated')
        array = np.frombuffer(data[pos:pos + size], dtype='<f8').astype(np.float64).reshape(shape)
        tensors[name] = torch.from_numpy(array)
        pos += size
    if pos != len(data):
        raise FormatError(f'length mismatch: {len(data) - pos} trailing bytes in {what} file')
    return header, tensors


def tensor_digest(tensors: List[Tuple[str, torch.Tensor]]) -> str:
    """sha256 over names, shapes and float64 bytes in sorted name order"""
    digest = hashlib.sha256()
    for name, tensor in sorted(tensors, key=lambda item: item[0]):
        digest.update(f'{name}:{list(tensor.shape)};'.encode())
        digest.update(np.ascontiguousarray(tensor.detach().cpu().numpy(), dtype='<f8').tobytes())
    return digest.hexdigest()


def encode_params(p: gnn.GnnParams, config: Optional[Mapping[str, object]] = None) -> bytes:
    header = {
        'dims': {'hidden1': p.dims.hidden1, 'hidden2': p.dims.hidden2, 'embed': p.dims.embed},
        'classes': p.classes,
        'feature_spec': p.spec.to_json(),
        'feature_spec_digest': p.spec.digest(),
        'config': dict(config or {}),
    }
    return encode_tensors(PARAMS_MAGIC, header, p.named_tensors())


def save_params(p: gnn.GnnParams, path, config: Optional[Mapping[str, object]] = None) -> None:
    """Writes a parameter checkpoint; `config` is the fully resolved configuration that produced it"""
    gs.atomic_write(path, encode_params(p, config))


def load_params_with_config(path) -> Tuple[gnn.GnnParams, Dict[str, object]]:
    header, tensors = decode_tensors(gs.read_bytes(path), PARAMS_MAGIC, 'parameter')
    try:
        spec = gf.FeatureSpec.from_json(header['feature_spec'])
        dims = gnn.GnnDims(**header['dims'])
        classes = header['classes']
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f'corrupt parameter header: {exc}') from exc
    if spec.digest() != header.get('feature_spec_digest'):
        raise FormatError('feature spec digest does not match the embedded feature spec')
    params = gnn.GnnParams(spec, dims, classes)
    expected = params.shapes()
    if {name: tuple(t.shape) for name, t in tensors.items()} != expected:
        raise FormatError('parameter tensors do not match the recorded dimensions')
    with torch.no_grad():
        for name, tensor in params.named_tensors():
            tensor.copy_(tensors[name])
    return params, dict(header.get('config') or {})


def load_params(path) -> gnn.GnnParams:
    return load_params_with_config(path)[0]
