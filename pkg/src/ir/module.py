from __future__ import annotations

import dataclasses as dc
import enum as e
import re
import struct
from typing import Dict, FrozenSet, Iterator, List, Optional, Tuple, Union

import numpy as np

import src.ir.vocab as vo

"""Abstract form of one LLVM IR compilation unit. Everything here is frozen once the parser hands it out, so modules
can be shared freely between threads and processes."""


_SIMPLE_NAME = re.compile(r'[-a-zA-Z$._][-a-zA-Z$._0-9]*|\d+')


def spell(sigil: str, name: str) -> str:
    """Prints an identifier with its sigil, quoting names that are not plain LLVM identifiers"""
    return f'{sigil}{name}' if _SIMPLE_NAME.fullmatch(name) else f'{sigil}"{name}"'


class TypeKind(e.Enum):
    VOID = 'void'
    INTEGER = 'integer'
    FLOAT = 'float'
    POINTER = 'pointer'
    VECTOR = 'vector'
    ARRAY = 'array'
    STRUCTURE = 'structure'
    FUNCTION = 'function'
    OPAQUE = 'opaque'


@dc.dataclass(frozen=True)
class TypeDesc:
    """A structural LLVM type. Function types keep the return type in `element` and parameters in `members`."""
    kind: TypeKind
    bit_width: Optional[int] = None  # integer and float kinds only
    element: Optional[TypeDesc] = None  # array/vector element, function return
    count: Optional[int] = None  # array/vector length
    members: Tuple[TypeDesc, ...] = ()  # struct members, function parameters
    name: Optional[str] = None  # identified struct or opaque type name, without the leading %
    spelling: Optional[str] = None  # float keyword (half, double, ...)
    packed: bool = False
    vararg: bool = False
    address_space: int = 0

    def __post_init__(self):
        has_width = self.kind in (TypeKind.INTEGER, TypeKind.FLOAT)
        if has_width != (self.bit_width is not None):
            raise ValueError(f'bit_width must be given exactly for integer and float types, got {self}')
        has_count = self.kind in (TypeKind.ARRAY, TypeKind.VECTOR)
        if has_count != (self.count is not None):
            raise ValueError(f'count must be given exactly for array and vector types, got {self}')

    def children(self) -> Tuple[TypeDesc, ...]:
        """Directly contained types, in declaration order and without duplicates"""
        nested = ((self.element,) if self.element is not None else ()) + self.members
        seen: List[TypeDesc] = []
        for child in nested:
            if child not in seen:
                seen.append(child)
        return tuple(seen)

    def __str__(self) -> str:
        if self.name is not None:
            return spell('%', self.name)
        if self.kind is TypeKind.VOID:
            return 'void'
        if self.kind is TypeKind.INTEGER:
            return f'i{self.bit_width}'
        if self.kind is TypeKind.FLOAT:
            return self.spelling
        if self.kind is TypeKind.POINTER:
            return f'ptr addrspace({self.address_space})' if self.address_space else 'ptr'
        if self.kind is TypeKind.VECTOR:
            return f'<{self.count} x {self.element}>'
        if self.kind is TypeKind.ARRAY:
            return f'[{self.count} x {self.element}]'
        if self.kind is TypeKind.STRUCTURE:
            return struct_body(self)
        if self.kind is TypeKind.FUNCTION:
            params = [str(member) for member in self.members] + (['...'] if self.vararg else [])
            return f'{self.element} ({", ".join(params)})'
        return 'opaque'


def struct_body(desc: TypeDesc) -> str:
    inner = ', '.join(str(member) for member in desc.members)
    body = f'{{ {inner} }}' if inner else '{}'
    return f'<{body}>' if desc.packed else body


VOID = TypeDesc(TypeKind.VOID)
I1 = TypeDesc(TypeKind.INTEGER, bit_width=1)
I32 = TypeDesc(TypeKind.INTEGER, bit_width=32)
I64 = TypeDesc(TypeKind.INTEGER, bit_width=64)
PTR = TypeDesc(TypeKind.POINTER)


def int_type(bits: int) -> TypeDesc:
    return TypeDesc(TypeKind.INTEGER, bit_width=bits)


def float_type(spelling: str) -> TypeDesc:
    return TypeDesc(TypeKind.FLOAT, bit_width=vo.FLOAT_TYPES[spelling], spelling=spelling)


class ValueKind(e.Enum):
    ARGUMENT = 'argument'
    LOCAL = 'local'
    GLOBAL_VARIABLE = 'global_variable'
    FUNCTION_REF = 'function_ref'
    CONSTANT_INT = 'constant_int'
    CONSTANT_FP = 'constant_fp'
    CONSTANT_AGGREGATE = 'constant_aggregate'
    CONSTANT_OTHER = 'constant_other'
    UNDEF = 'undef'


CONSTANT_KINDS: FrozenSet[ValueKind] = frozenset({
    ValueKind.CONSTANT_INT, ValueKind.CONSTANT_FP, ValueKind.CONSTANT_AGGREGATE, ValueKind.CONSTANT_OTHER,
    ValueKind.UNDEF})


@dc.dataclass(frozen=True)
class ValueInfo:
    """A value reference: SSA name, global symbol or constant literal"""
    id: str  # %name / @name for named values, the printed literal for constants
    kind: ValueKind
    type: TypeDesc
    constant_payload: Optional[str] = None  # literal text, or the aggregate form / constexpr opcode
    operands: Tuple[ValueInfo, ...] = ()  # elements of aggregates and constant expressions
    type_args: Tuple[TypeDesc, ...] = ()  # constexpr source element / destination types
    flags: Tuple[str, ...] = ()  # constexpr keywords such as inbounds

    def __post_init__(self):
        is_constant = self.kind in CONSTANT_KINDS
        if is_constant and self.constant_payload is None:
            raise ValueError(f'constant {self.id} requires a payload')
        if self.kind in (ValueKind.ARGUMENT, ValueKind.LOCAL) and self.constant_payload is not None:
            raise ValueError(f'{self.kind.value} {self.id} cannot carry a constant payload')

    @property
    def is_constant(self) -> bool:
        return self.kind in CONSTANT_KINDS

    def numeric(self) -> Optional[Union[int, float]]:
        """Returns the scalar value of an integer or floating point constant, None for anything else"""
        if self.kind is ValueKind.CONSTANT_INT:
            if self.constant_payload in ('true', 'false'):
                return int(self.constant_payload == 'true')
            return int(self.constant_payload)
        if self.kind is ValueKind.CONSTANT_FP:
            return parse_float_literal(self.constant_payload)
        return None


def typed_text(value: ValueInfo) -> str:
    """`<type> <spelling>` of an operand; constant ids already start with their type and symbols are pointers"""
    if value.is_constant:
        return value.id
    if value.kind in (ValueKind.GLOBAL_VARIABLE, ValueKind.FUNCTION_REF):
        return f'ptr {value.id}'
    return f'{value.type} {value.id}'


def bare_text(value: ValueInfo) -> str:
    """Operand spelling without its leading type"""
    return value.id[len(str(value.type)) + 1:] if value.is_constant else value.id


def parse_float_literal(text: str) -> Optional[float]:
    """Decodes decimal and hexadecimal LLVM float literals. Extended formats (0xK, 0xL, 0xM) decode to None."""
    if not text.lower().startswith('0x'):
        return float(text)
    prefix, digits = text[2:3], text[3:]
    if prefix in 'KLM':
        return None
    if prefix == 'H':
        return float(np.frombuffer(int(digits, 16).to_bytes(2, 'little'), dtype='<f2')[0])
    if prefix == 'R':
        return struct.unpack('<f', (int(digits, 16) << 16).to_bytes(4, 'little'))[0]
    return struct.unpack('<d', int(text[2:], 16).to_bytes(8, 'little'))[0]


@dc.dataclass(frozen=True, order=True)
class SourcePos:
    line: int
    column: int


@dc.dataclass(frozen=True)
class AttributeSet:
    """Attribute tokens as written (sorted, unique); `entries` projects them onto the closed vocabulary"""
    raw: Tuple[str, ...] = ()

    @classmethod
    def of(cls, tokens) -> AttributeSet:
        return cls(tuple(sorted(set(tokens))))

    @property
    def entries(self) -> FrozenSet[str]:
        return vo.attribute_entries(self.raw)

    def __bool__(self) -> bool:
        return bool(self.raw)


@dc.dataclass(frozen=True)
class Instruction:
    opcode: vo.Opcode
    result: Optional[ValueInfo]
    operands: Tuple[ValueInfo, ...]
    result_type: TypeDesc
    alignment: Optional[int] = None  # bytes
    successors: Tuple[str, ...] = ()  # block labels, terminators only
    incoming: Tuple[str, ...] = ()  # phi incoming block labels, parallel to operands
    flags: Tuple[str, ...] = ()  # keywords in source order: predicates, wrap/fast-math flags, orderings, ...
    type_args: Tuple[TypeDesc, ...] = ()  # explicit types not implied by operands (alloca, load, gep, casts, call)
    indices: Tuple[int, ...] = ()  # extractvalue / insertvalue constant indices
    position: SourcePos = dc.field(default=SourcePos(0, 0), compare=False)

    def __post_init__(self):
        if self.opcode not in vo.TERMINATORS and self.successors:
            raise ValueError(f'non terminator {self.opcode.value} cannot have successors')

    @property
    def is_terminator(self) -> bool:
        return self.opcode in vo.TERMINATORS


@dc.dataclass(frozen=True)
class BasicBlock:
    label: str
    instructions: Tuple[Instruction, ...]

    @property
    def terminator(self) -> Instruction:
        return self.instructions[-1]


@dc.dataclass(frozen=True)
class Function:
    name: str  # without the leading @
    return_type: TypeDesc
    args: Tuple[ValueInfo, ...]
    arg_attributes: Tuple[AttributeSet, ...]  # parallel to args
    blocks: Tuple[BasicBlock, ...]  # empty for declarations
    attributes: AttributeSet  # function attributes, attribute groups already folded in
    linkage: vo.Linkage = vo.Linkage.EXTERNAL
    calling_convention: vo.CallingConv = vo.CallingConv.C
    visibility: Optional[vo.Visibility] = None
    preemption: Optional[str] = None  # dso_local / dso_preemptable
    unnamed_addr: Optional[str] = None  # unnamed_addr / local_unnamed_addr
    return_attributes: AttributeSet = AttributeSet()
    vararg: bool = False
    alignment: Optional[int] = None
    section: Optional[str] = None

    @property
    def is_declaration(self) -> bool:
        return not self.blocks

    @property
    def type(self) -> TypeDesc:
        return TypeDesc(TypeKind.FUNCTION, element=self.return_type, members=tuple(arg.type for arg in self.args),
                        vararg=self.vararg)

    @property
    def ref(self) -> ValueInfo:
        return ValueInfo(spell('@', self.name), ValueKind.FUNCTION_REF, self.type)

    def attribute_entries(self) -> FrozenSet[str]:
        """Vocabulary entries describing this function: linkage, visibility, calling convention, preemption, address
        significance and function attributes"""
        tokens = [self.linkage.value, self.calling_convention.value]
        tokens += [token for token in (self.visibility.value if self.visibility else None, self.preemption,
                                       self.unnamed_addr) if token]
        return vo.attribute_entries(tokens) | self.attributes.entries

    def instructions(self) -> Iterator[Instruction]:
        for block in self.blocks:
            yield from block.instructions


@dc.dataclass(frozen=True)
class GlobalValue:
    name: str  # without the leading @
    value_type: TypeDesc
    is_constant: bool
    initializer: Optional[ValueInfo]
    linkage: vo.Linkage = vo.Linkage.EXTERNAL
    visibility: Optional[vo.Visibility] = None
    preemption: Optional[str] = None
    unnamed_addr: Optional[str] = None
    thread_local: bool = False
    alignment: Optional[int] = None
    section: Optional[str] = None
    address_space: int = 0

    @property
    def ref(self) -> ValueInfo:
        return ValueInfo(spell('@', self.name), ValueKind.GLOBAL_VARIABLE, self.value_type)


@dc.dataclass(frozen=True)
class SkippedConstruct:
    construct: str
    line: int


@dc.dataclass(frozen=True)
class IrModule:
    name: str
    target_triple: Optional[str]
    globals: Tuple[GlobalValue, ...]
    functions: Tuple[Function, ...]
    named_types: Tuple[Tuple[str, TypeDesc], ...]  # definition order
    datalayout: Optional[str] = None
    skipped: Tuple[SkippedConstruct, ...] = dc.field(default=(), compare=False)

    @property
    def type_table(self) -> Dict[str, TypeDesc]:
        return dict(self.named_types)

    def instruction_count(self) -> int:
        return sum(1 for function in self.functions for _ in function.instructions())
