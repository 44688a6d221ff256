from typing import Optional

"""Exception hierarchy shared by every irgraph module. Each class carries a stable error code and the exit code the
command line tool reports for it."""


class IrGraphError(Exception):
    """Base class for every error raised by the irgraph library"""
    code = 'E_INTERNAL'
    exit_code = 1


class UsageError(IrGraphError):
    """Invalid command line usage or configuration"""
    code = 'E_USAGE'
    exit_code = 2


class IrSyntaxError(IrGraphError):
    """Malformed LLVM IR text"""
    code = 'E_SYNTAX'
    exit_code = 2

    def __init__(self, message: str, line: int = 0, column: int = 0, expected: Optional[str] = None) -> None:
        self.line = line
        self.column = column
        self.expected = expected
        where = f'line {line}, column {column}: ' if line else ''
        hint = f' (expected {expected})' if expected else ''
        super().__init__(f'{where}{message}{hint}')


class UnsupportedConstruct(IrGraphError):
    """IR construct outside the supported subset"""
    code = 'E_UNSUPPORTED'
    exit_code = 3

    def __init__(self, construct: str, line: int = 0) -> None:
        self.construct = construct
        self.line = line
        super().__init__(f'unsupported construct {construct!r} at line {line}')


class UnresolvedReference(IrGraphError):
    """Operand naming a value that is never defined"""
    code = 'E_UNRESOLVED'
    exit_code = 2

    def __init__(self, identifier: str, line: int = 0) -> None:
        self.identifier = identifier
        self.line = line
        super().__init__(f'unresolved reference {identifier} at line {line}')


class InputTooLarge(IrGraphError):
    code = 'E_TOO_LARGE'
    exit_code = 2


class FeatureOverflow(IrGraphError):
    """A node payload falls outside every bucket of the feature spec"""
    code = 'E_FEATURE_OVERFLOW'


class InternalInconsistency(IrGraphError):
    """A broken invariant inside the library: a bug, not bad input"""
    code = 'E_INTERNAL'


class FormatError(IrGraphError):
    """A binary artifact that cannot be decoded"""
    code = 'E_FORMAT'
    exit_code = 2


class IoError(IrGraphError):
    code = 'E_IO'
    exit_code = 2


class SerializationOverflow(IrGraphError):
    code = 'E_OVERFLOW'


class ShapeMismatch(IrGraphError):
    """Parameters and feature spec disagree on a dimension"""
    code = 'E_SHAPE'


class NonFiniteLoss(IrGraphError):
    """Training diverged; lower the learning rate"""
    code = 'E_NONFINITE'


class EmptyGraph(IrGraphError):
    """No maskable node in a graph"""
    code = 'E_EMPTY_GRAPH'


class DimensionMismatch(IrGraphError):
    code = 'E_DIMENSION'


class ContextOverflow(IrGraphError):
    """Prompt longer than the language model context"""
    code = 'E_CONTEXT'


class CannotAblateModule(IrGraphError):
    code = 'E_ABLATE'
    exit_code = 2


class DegenerateLabels(IrGraphError):
    """Fewer than two classes present in a training corpus"""
    code = 'E_LABELS'
    exit_code = 2


class EmptyInput(IrGraphError):
    code = 'E_EMPTY_INPUT'
    exit_code = 2


class UnpairedSample(IrGraphError):
    """A pair id that does not occur exactly twice"""
    code = 'E_UNPAIRED'
    exit_code = 2
