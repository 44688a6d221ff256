from __future__ import annotations

import bisect
import dataclasses as dc
import hashlib
import json
import logging
import math
import pathlib as pl
from typing import Dict, FrozenSet, Optional, Tuple, Union

import numpy as np

import src.ir.module as im
import src.ir.vocab as vo
from src.errors import FeatureOverflow, FormatError, UsageError
from src.graph.kinds import NodeKind

"""Feature layouts of the six node kinds. Payloads are one-hot/bucket encoded, never embedded raw, so every width is
fixed by the FeatureSpec alone."""

log = logging.getLogger(__name__)

FEATURE_SPEC_VERSION = 2

Payload = Union[None, int, FrozenSet[str], im.ValueInfo, im.TypeDesc, im.Instruction]


@dc.dataclass(frozen=True)
class FeatureSpec:
    """Vocabularies and bucket boundaries. Serialized as versioned JSON next to every graph."""
    opcodes: Tuple[str, ...] = tuple(op.value for op in vo.Opcode)
    value_kinds: Tuple[str, ...] = tuple(kind.value for kind in im.ValueKind)
    type_kinds: Tuple[str, ...] = tuple(kind.value for kind in im.TypeKind)
    attributes: Tuple[str, ...] = vo.ATTRIBUTE_VOCABULARY
    magnitude_bounds: Tuple[int, ...] = (1, 2, 4, 16, 256, 65536, 2 ** 32)  # lower bounds of the |v| classes
    alignment_values: Tuple[int, ...] = (1, 2, 4, 8, 16, 32, 64)  # anything else lands in `other`
    bit_width_bounds: Tuple[int, ...] = (1, 2, 8, 9, 16, 17, 32, 33, 64, 65, 129)
    size_limit: int = 65536  # exclusive, in bytes

    def __post_init__(self):
        for name in ('opcodes', 'attributes'):
            vocabulary = getattr(self, name)
            if not vocabulary or vocabulary[-1] != 'other':
                raise UsageError(f'feature spec vocabulary {name} must end with an "other" slot')
        for name in ('value_kinds', 'type_kinds', 'opcodes', 'attributes'):
            vocabulary = getattr(self, name)
            if len(set(vocabulary)) != len(vocabulary):
                raise UsageError(f'feature spec vocabulary {name} has duplicate entries')
        for name in ('magnitude_bounds', 'alignment_values', 'bit_width_bounds'):
            bounds = getattr(self, name)
            if not bounds or any(lo >= hi for lo, hi in zip(bounds, bounds[1:])) or bounds[0] <= 0:
                raise UsageError(f'feature spec {name} must be positive and strictly increasing')
        if self.size_limit < 2:
            raise UsageError(f'feature spec size limit must be at least 2, got {self.size_limit}')

    @property
    def magnitude_buckets(self) -> int:
        # none, zero, fraction, one class per bound and sign, then NaN
        return 4 + 2 * len(self.magnitude_bounds)

    @property
    def size_buckets(self) -> int:
        return int(math.ceil(math.log2(self.size_limit))) + 1

    def layout(self, kind: NodeKind) -> Tuple[Tuple[str, int], ...]:
        """Ordered (field name, width) pairs of a node kind"""
        if kind is NodeKind.VALUE:
            return ('value_kind', len(self.value_kinds)), ('is_constant', 1), ('magnitude', self.magnitude_buckets)
        if kind is NodeKind.INSTRUCTION:
            return ('opcode', len(self.opcodes)), ('alignment', len(self.alignment_values) + 2)
        if kind is NodeKind.TYPE:
            return ('type_kind', len(self.type_kinds)), ('bit_width', len(self.bit_width_bounds) + 1)
        if kind is NodeKind.SIZE:
            return ('size', self.size_buckets),
        if kind is NodeKind.ATTRIBUTES:
            return ('attributes', len(self.attributes)),
        return ('bias', 1),

    def width(self, kind: NodeKind) -> int:
        return sum(width for _, width in self.layout(kind))

    def label_width(self, kind: NodeKind) -> int:
        """Width of the primary categorical field, the prediction target of masked pretraining"""
        return self.layout(kind)[0][1]

    def to_json(self) -> Dict[str, object]:
        doc: Dict[str, object] = {'version': FEATURE_SPEC_VERSION}
        doc.update({field.name: list(getattr(self, field.name)) if isinstance(getattr(self, field.name), tuple)
                    else getattr(self, field.name) for field in dc.fields(self)})
        doc['layouts'] = {kind.value: [list(entry) for entry in self.layout(kind)] for kind in NodeKind}
        return doc

    @classmethod
    def from_json(cls, doc: Dict[str, object]) -> FeatureSpec:
        if doc.get('version') != FEATURE_SPEC_VERSION:
            raise FormatError(f'unsupported feature spec version {doc.get("version")!r}')
        names = {field.name for field in dc.fields(cls)}
        unknown = set(doc) - names - {'version', 'layouts'}
        if unknown:
            raise FormatError(f'unknown feature spec keys {sorted(unknown)}')
        kwargs = {name: tuple(value) if isinstance(value, list) else value
                  for name, value in doc.items() if name in names}
        spec = cls(**kwargs)
        if 'layouts' in doc and doc['layouts'] != spec.to_json()['layouts']:
            raise FormatError('feature spec layouts disagree with its vocabularies')
        return spec

    def canonical_json(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, separators=(',', ':'))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical_json().encode('utf-8')).hexdigest()


def load_feature_spec(path: Optional[Union[str, pl.Path]]) -> FeatureSpec:
    """Reads a FeatureSpec JSON document, the default spec when no path is given"""
    if path is None:
        return FeatureSpec()
    try:
        doc = json.loads(pl.Path(path).read_text(encoding='utf-8'))
    except OSError as exc:
        raise UsageError(f'cannot read feature spec {path}: {exc.strerror}') from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f'feature spec {path} is not valid JSON: {exc}') from exc
    return FeatureSpec.from_json(doc)


def _slot(vocabulary: Tuple[str, ...], token: str) -> int:
    try:
        return vocabulary.index(token)
    except ValueError:
        return len(vocabulary) - 1


def _overflow(message: str, lenient: bool) -> None:
    if not lenient:
        raise FeatureOverflow(message)
    log.warning('%s, clamped to the last bucket', message)


def magnitude_bucket(value: Optional[Union[int, float]], spec: FeatureSpec) -> int:
    """Signed log-magnitude bucket: 0 none, 1 zero, 2 fraction, then positive classes, then negative classes, and NaN
    last. The top class of each sign has no upper bound and takes the infinities."""
    if value is None:
        return 0
    if isinstance(value, float) and math.isnan(value):
        return spec.magnitude_buckets - 1
    if value == 0:
        return 1
    size = abs(value)
    if size < spec.magnitude_bounds[0]:
        return 2
    cls = bisect.bisect_right(spec.magnitude_bounds, size) - 1
    return 3 + cls if value > 0 else 3 + len(spec.magnitude_bounds) + cls


def alignment_bucket(alignment: Optional[int], spec: FeatureSpec) -> int:
    if alignment is None:
        return 0
    if alignment in spec.alignment_values:
        return 1 + spec.alignment_values.index(alignment)
    return len(spec.alignment_values) + 1


def bit_width_bucket(bits: Optional[int], spec: FeatureSpec) -> int:
    if bits is None:
        return 0
    return bisect.bisect_right(spec.bit_width_bounds, bits)


def size_bucket(size: int, spec: FeatureSpec, lenient: bool = False) -> int:
    if size >= spec.size_limit:
        _overflow(f'size {size} is outside every size bucket', lenient)
        return spec.size_buckets - 1
    return 0 if size == 0 else size.bit_length()


def encode_node_features(kind: NodeKind, info: Payload, spec: FeatureSpec, lenient: bool = False) -> np.ndarray:
    """Encodes one node payload as a float32 feature vector
    :param kind: node kind
    :param info: ValueInfo, Instruction, TypeDesc, byte size, attribute entry set or None for the Module node
    :param spec: feature spec fixing vocabularies and buckets
    :param lenient: clamp out-of-range payloads to the last bucket instead of raising FeatureOverflow
    :return: vector of length spec.width(kind)
    """
    vector = np.zeros(spec.width(kind), dtype=np.float32)
    if kind is NodeKind.VALUE:
        vector[_slot(spec.value_kinds, info.kind.value)] = 1
        offset = len(spec.value_kinds)
        vector[offset] = float(info.is_constant)
        vector[offset + 1 + magnitude_bucket(info.numeric(), spec)] = 1
    elif kind is NodeKind.INSTRUCTION:
        vector[_slot(spec.opcodes, info.opcode.value)] = 1
        vector[len(spec.opcodes) + alignment_bucket(info.alignment, spec)] = 1
    elif kind is NodeKind.TYPE:
        vector[_slot(spec.type_kinds, info.kind.value)] = 1
        vector[len(spec.type_kinds) + bit_width_bucket(info.bit_width, spec)] = 1
    elif kind is NodeKind.SIZE:
        vector[size_bucket(info, spec, lenient)] = 1
    elif kind is NodeKind.ATTRIBUTES:
        for entry in info:
            vector[_slot(spec.attributes, entry)] = 1
    else:
        vector[0] = 1
    return vector
