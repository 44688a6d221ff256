from __future__ import annotations

import enum as e
from typing import FrozenSet, Iterable, Tuple

"""Closed vocabularies of the supported LLVM 16 subset: opcodes, linkage, visibility, calling conventions and the
attribute vocabulary used for Attributes node features. Order matters: feature one-hot slots follow declaration
order."""


class Opcode(e.Enum):
    """The LLVM 16 instruction opcodes in Instruction.def order, plus a trailing `other` slot"""
    # terminators
    RET = 'ret'
    BR = 'br'
    SWITCH = 'switch'
    INDIRECTBR = 'indirectbr'
    INVOKE = 'invoke'
    RESUME = 'resume'
    UNREACHABLE = 'unreachable'
    CLEANUPRET = 'cleanupret'
    CATCHRET = 'catchret'
    CATCHSWITCH = 'catchswitch'
    CALLBR = 'callbr'
    # unary
    FNEG = 'fneg'
    # binary
    ADD = 'add'
    FADD = 'fadd'
    SUB = 'sub'
    FSUB = 'fsub'
    MUL = 'mul'
    FMUL = 'fmul'
    UDIV = 'udiv'
    SDIV = 'sdiv'
    FDIV = 'fdiv'
    UREM = 'urem'
    SREM = 'srem'
    FREM = 'frem'
    # bitwise
    SHL = 'shl'
    LSHR = 'lshr'
    ASHR = 'ashr'
    AND = 'and'
    OR = 'or'
    XOR = 'xor'
    # memory
    ALLOCA = 'alloca'
    LOAD = 'load'
    STORE = 'store'
    GETELEMENTPTR = 'getelementptr'
    FENCE = 'fence'
    CMPXCHG = 'cmpxchg'
    ATOMICRMW = 'atomicrmw'
    # casts
    TRUNC = 'trunc'
    ZEXT = 'zext'
    SEXT = 'sext'
    FPTOUI = 'fptoui'
    FPTOSI = 'fptosi'
    UITOFP = 'uitofp'
    SITOFP = 'sitofp'
    FPTRUNC = 'fptrunc'
    FPEXT = 'fpext'
    PTRTOINT = 'ptrtoint'
    INTTOPTR = 'inttoptr'
    BITCAST = 'bitcast'
    ADDRSPACECAST = 'addrspacecast'
    # funclet pads
    CLEANUPPAD = 'cleanuppad'
    CATCHPAD = 'catchpad'
    # other
    ICMP = 'icmp'
    FCMP = 'fcmp'
    PHI = 'phi'
    CALL = 'call'
    SELECT = 'select'
    USEROP1 = 'userop1'
    USEROP2 = 'userop2'
    VA_ARG = 'va_arg'
    EXTRACTELEMENT = 'extractelement'
    INSERTELEMENT = 'insertelement'
    SHUFFLEVECTOR = 'shufflevector'
    EXTRACTVALUE = 'extractvalue'
    INSERTVALUE = 'insertvalue'
    LANDINGPAD = 'landingpad'
    FREEZE = 'freeze'
    OTHER = 'other'


TERMINATORS: FrozenSet[Opcode] = frozenset({
    Opcode.RET, Opcode.BR, Opcode.SWITCH, Opcode.INDIRECTBR, Opcode.INVOKE, Opcode.RESUME, Opcode.UNREACHABLE,
    Opcode.CLEANUPRET, Opcode.CATCHRET, Opcode.CATCHSWITCH, Opcode.CALLBR})

BINARY_OPS: FrozenSet[Opcode] = frozenset({
    Opcode.ADD, Opcode.FADD, Opcode.SUB, Opcode.FSUB, Opcode.MUL, Opcode.FMUL, Opcode.UDIV, Opcode.SDIV,
    Opcode.FDIV, Opcode.UREM, Opcode.SREM, Opcode.FREM, Opcode.SHL, Opcode.LSHR, Opcode.ASHR, Opcode.AND,
    Opcode.OR, Opcode.XOR})

CAST_OPS: FrozenSet[Opcode] = frozenset({
    Opcode.TRUNC, Opcode.ZEXT, Opcode.SEXT, Opcode.FPTOUI, Opcode.FPTOSI, Opcode.UITOFP, Opcode.SITOFP,
    Opcode.FPTRUNC, Opcode.FPEXT, Opcode.PTRTOINT, Opcode.INTTOPTR, Opcode.BITCAST, Opcode.ADDRSPACECAST})

# opcodes that exist in LLVM 16 but fall outside the parsed subset, mapped to the reported construct name
UNSUPPORTED_OPCODES = {
    'invoke': 'exception_handling',
    'resume': 'exception_handling',
    'landingpad': 'exception_handling',
    'cleanuppad': 'exception_handling',
    'catchpad': 'exception_handling',
    'cleanupret': 'exception_handling',
    'catchret': 'exception_handling',
    'catchswitch': 'exception_handling',
    'callbr': 'callbr',
    'indirectbr': 'indirectbr',
}

SUPPORTED_OPCODES: FrozenSet[str] = frozenset(
    op.value for op in Opcode
    if op.value not in UNSUPPORTED_OPCODES and op not in (Opcode.USEROP1, Opcode.USEROP2, Opcode.OTHER))

INT_PREDICATES = ('eq', 'ne', 'ugt', 'uge', 'ult', 'ule', 'sgt', 'sge', 'slt', 'sle')
FLOAT_PREDICATES = ('false', 'oeq', 'ogt', 'oge', 'olt', 'ole', 'one', 'ord', 'ueq', 'ugt', 'uge', 'ult', 'ule',
                    'une', 'uno', 'true')
FAST_MATH_FLAGS = ('fast', 'nnan', 'ninf', 'nsz', 'arcp', 'contract', 'afn', 'reassoc')
WRAP_FLAGS = ('nuw', 'nsw', 'exact')
ATOMIC_ORDERINGS = ('unordered', 'monotonic', 'acquire', 'release', 'acq_rel', 'seq_cst')
ATOMICRMW_OPS = ('xchg', 'add', 'sub', 'and', 'nand', 'or', 'xor', 'max', 'min', 'umax', 'umin', 'fadd', 'fsub',
                 'fmax', 'fmin', 'uinc_wrap', 'udec_wrap')
FLOAT_TYPES = {'half': 16, 'bfloat': 16, 'float': 32, 'double': 64, 'x86_fp80': 80, 'fp128': 128, 'ppc_fp128': 128}


class Linkage(e.Enum):
    PRIVATE = 'private'
    INTERNAL = 'internal'
    AVAILABLE_EXTERNALLY = 'available_externally'
    LINKONCE = 'linkonce'
    WEAK = 'weak'
    COMMON = 'common'
    APPENDING = 'appending'
    EXTERN_WEAK = 'extern_weak'
    LINKONCE_ODR = 'linkonce_odr'
    WEAK_ODR = 'weak_odr'
    EXTERNAL = 'external'


class Visibility(e.Enum):
    DEFAULT = 'default'
    HIDDEN = 'hidden'
    PROTECTED = 'protected'


class CallingConv(e.Enum):
    C = 'ccc'
    FAST = 'fastcc'
    COLD = 'coldcc'
    SWIFT = 'swiftcc'
    TAIL = 'tailcc'


# 40 entries, the last one catches every token outside the list
ATTRIBUTE_VOCABULARY: Tuple[str, ...] = (
    'private', 'internal', 'available_externally', 'linkonce', 'weak', 'common', 'appending', 'extern_weak',
    'linkonce_odr', 'weak_odr', 'external',
    'default', 'hidden', 'protected',
    'ccc', 'fastcc', 'coldcc', 'swiftcc', 'tailcc',
    'dso_local', 'unnamed_addr', 'local_unnamed_addr',
    'noinline', 'alwaysinline', 'nounwind', 'readnone', 'readonly', 'writeonly', 'norecurse', 'noreturn',
    'optnone', 'uwtable', 'willreturn', 'mustprogress', 'nofree', 'nosync',
    'noundef', 'nonnull', 'nocapture',
    'other',
)

# attribute keywords taking a parenthesised or trailing integer argument
PARAMETRIC_ATTRIBUTES = ('align', 'dereferenceable', 'dereferenceable_or_null', 'alignstack', 'allocsize',
                         'byval', 'byref', 'sret', 'inalloca', 'preallocated', 'elementtype', 'vscale_range',
                         'memory', 'uwtable', 'allockind', 'allocalign', 'nofpclass', 'range')

PARAMETER_ATTRIBUTES: FrozenSet[str] = frozenset({
    'zeroext', 'signext', 'inreg', 'noalias', 'nocapture', 'nofree', 'nest', 'returned', 'nonnull', 'noundef',
    'readonly', 'readnone', 'writeonly', 'immarg', 'swiftself', 'swifterror', 'swiftasync', 'allocptr',
    'dead_on_unwind', 'writable'})

FUNCTION_ATTRIBUTES: FrozenSet[str] = frozenset({
    'alwaysinline', 'builtin', 'cold', 'convergent', 'hot', 'inlinehint', 'jumptable', 'minsize', 'naked',
    'nobuiltin', 'nocallback', 'noduplicate', 'nofree', 'noimplicitfloat', 'noinline', 'nomerge', 'nonlazybind',
    'noprofile', 'noredzone', 'noreturn', 'norecurse', 'nosync', 'nounwind', 'nosanitize_bounds',
    'nosanitize_coverage', 'null_pointer_is_valid', 'optforfuzzing', 'optnone', 'optsize', 'readnone',
    'readonly', 'writeonly', 'argmemonly', 'returns_twice', 'safestack', 'sanitize_address', 'sanitize_memory',
    'sanitize_thread', 'sanitize_hwaddress', 'sanitize_memtag', 'speculative_load_hardening', 'speculatable',
    'ssp', 'sspreq', 'sspstrong', 'strictfp', 'willreturn', 'mustprogress', 'shadowcallstack', 'nocf_check',
    'disable_sanitizer_instrumentation', 'fn_ret_thunk_extern', 'presplitcoroutine', 'inaccessiblememonly',
    'inaccessiblemem_or_argmemonly'})


def attribute_entry(token: str) -> str:
    """Maps a raw attribute token (e.g. `noundef`, `align 4`, `"frame-pointer"="all"`) onto the vocabulary
    :param token: raw attribute spelling
    :return: vocabulary entry, `other` for anything outside it
    """
    head = token.split('(')[0].split(' ')[0]
    return head if head in ATTRIBUTE_VOCABULARY else 'other'


def attribute_entries(tokens: Iterable[str]) -> FrozenSet[str]:
    return frozenset(attribute_entry(token) for token in tokens)
