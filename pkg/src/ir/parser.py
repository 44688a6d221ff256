from __future__ import annotations

import dataclasses as dc
import logging
import pathlib as pl
import re
from typing import Callable, Dict, List, Optional, Set, Tuple, Union

import src.ir.module as im
import src.ir.vocab as vo
from src.errors import InputTooLarge, IoError, IrSyntaxError, UnresolvedReference, UnsupportedConstruct
from src.ir.lexer import Tok, Token, identifier_name, tokenize

"""Recursive descent parser for the supported LLVM 16 subset. Operands are first recorded as placeholders and bound
once their scope is complete: locals at the end of each function body, globals at the end of the module."""

log = logging.getLogger(__name__)

DEFAULT_MAX_BYTES = 64 * 1024 * 1024

_INT_TYPE = re.compile(r'i(\d+)')
_OTHER_CALLING_CONVENTIONS = re.compile(r'\w+cc|cc')
_PREEMPTION = ('dso_local', 'dso_preemptable')
_ADDRESS_SIGNIFICANCE = ('unnamed_addr', 'local_unnamed_addr')
_DLL_STORAGE = ('dllimport', 'dllexport')
_TOP_LEVEL_KEYWORDS = ('define', 'declare', 'attributes', 'target', 'source_filename', 'module', 'uselistorder',
                       'uselistorder_bb')


@dc.dataclass(frozen=True)
class _Ref:
    """A not yet bound named operand"""
    id: str
    type: im.TypeDesc
    line: int
    is_constant = False
    kind = None


Operand = Union[im.ValueInfo, _Ref]


class _MetadataOperand(Exception):
    """Raised when an instruction or declaration takes metadata operands; the whole line is skipped"""
    pass


def _bind(value: Operand, table: Dict[str, im.ValueInfo], sigil: str) -> Operand:
    if isinstance(value, _Ref):
        if value.id[0] != sigil:
            return value
        if value.id not in table:
            raise UnresolvedReference(value.id, value.line)
        return table[value.id]
    if not value.operands:
        return value
    return dc.replace(value, operands=tuple(_bind(operand, table, sigil) for operand in value.operands))


def _bool_like(ty: im.TypeDesc) -> im.TypeDesc:
    if ty.kind is im.TypeKind.VECTOR:
        return im.TypeDesc(im.TypeKind.VECTOR, element=im.I1, count=ty.count)
    return im.I1


@dc.dataclass
class _PendingFunction:
    function: im.Function
    group_refs: List[str]
    line: int


class _ModuleParser:

    def __init__(self, text: str, lenient: bool) -> None:
        self.tokens = tokenize(text)
        self.pos = 0
        self.lenient = lenient
        self.skipped: List[im.SkippedConstruct] = []
        self.type_starts: Dict[str, int] = {}
        self.type_ends: Dict[str, int] = {}
        self.named_types: Dict[str, im.TypeDesc] = {}
        self.type_order: List[str] = []
        self.resolving: Set[str] = set()
        self.attribute_groups: Dict[str, Tuple[str, ...]] = {}
        self.globals: List[im.GlobalValue] = []
        self.functions: List[_PendingFunction] = []
        self.target_triple: Optional[str] = None
        self.datalayout: Optional[str] = None
        self.next_number = 0
        for idx in range(len(self.tokens) - 3):
            tok = self.tokens[idx]
            if tok.kind is Tok.LOCAL and self.tokens[idx + 1].text == '=' and self.tokens[idx + 2].text == 'type':
                self.type_starts[identifier_name(tok.text)] = idx + 3

    # token helpers

    def peek(self, offset: int = 0) -> Token:
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def next(self) -> Token:
        tok = self.peek()
        if tok.kind is not Tok.EOF:
            self.pos += 1
        return tok

    def unread(self, tok: Token) -> None:
        if tok.kind is not Tok.EOF:
            self.pos -= 1

    def at(self, text: str, offset: int = 0) -> bool:
        tok = self.peek(offset)
        return tok.text == text and tok.kind in (Tok.KEYWORD, Tok.PUNCT, Tok.ELLIPSIS)

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.pos += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.fail(text)
        return self.next()

    def expect_kind(self, kind: Tok) -> Token:
        if self.peek().kind is not kind:
            self.fail(kind.value)
        return self.next()

    def expect_int(self) -> int:
        return int(self.expect_kind(Tok.INT).text)

    def fail(self, expected: str):
        tok = self.peek()
        found = tok.text or tok.kind.value
        raise IrSyntaxError(f'unexpected {found!r}', tok.line, tok.column, expected)

    def keywords(self, allowed) -> List[str]:
        found = []
        while self.peek().kind is Tok.KEYWORD and self.peek().text in allowed:
            found.append(self.next().text)
        return found

    def skip_line(self, line: int) -> None:
        while self.peek().kind is not Tok.EOF and self.peek().line == line:
            self.next()

    def skip_body(self) -> None:
        """Skips to just past the `}` closing the body whose `{` was already consumed"""
        depth = 1
        while depth:
            tok = self.next()
            if tok.kind is Tok.EOF:
                raise IrSyntaxError('unterminated function body', tok.line, tok.column, '}')
            if tok.kind is Tok.PUNCT and tok.text == '{':
                depth += 1
            elif tok.kind is Tok.PUNCT and tok.text == '}':
                depth -= 1

    def record(self, construct: str, line: int) -> None:
        self.skipped.append(im.SkippedConstruct(construct, line))
        level = logging.DEBUG if construct in ('metadata', 'comdat') else logging.WARNING
        log.log(level, 'skipped %s at line %d', construct, line)

    def unsupported(self, construct: str, line: Optional[int] = None):
        raise UnsupportedConstruct(construct, self.peek().line if line is None else line)

    # types

    def parse_type(self) -> im.TypeDesc:
        tok = self.next()
        if tok.kind is Tok.KEYWORD:
            desc = self._keyword_type(tok)
        elif tok.kind is Tok.LOCAL:
            desc = self.named_type(identifier_name(tok.text), tok.line)
        elif tok.text == '[':
            count = self.expect_int()
            self.expect('x')
            element = self.parse_type()
            self.expect(']')
            desc = im.TypeDesc(im.TypeKind.ARRAY, element=element, count=count)
        elif tok.text == '<':
            if self.at('{'):
                desc = dc.replace(self._struct_type(), packed=True)
                self.expect('>')
            else:
                if self.at('vscale'):
                    self.unsupported('scalable_vector', tok.line)
                count = self.expect_int()
                self.expect('x')
                element = self.parse_type()
                self.expect('>')
                if element.kind is im.TypeKind.POINTER:
                    self.unsupported('vector_of_pointers', tok.line)
                desc = im.TypeDesc(im.TypeKind.VECTOR, element=element, count=count)
        elif tok.text == '{':
            self.unread(tok)
            desc = self._struct_type()
        else:
            self.unread(tok)
            self.fail('type')
        while True:
            if self.at('*'):
                self.unsupported('typed_pointer')
            if not self.at('('):
                return desc
            desc = self._function_type(desc)

    def _keyword_type(self, tok: Token) -> im.TypeDesc:
        word = tok.text
        if word == 'void':
            return im.VOID
        match = _INT_TYPE.fullmatch(word)
        if match:
            bits = int(match.group(1))
            if not 1 <= bits <= (1 << 23):
                raise IrSyntaxError(f'invalid integer width {bits}', tok.line, tok.column)
            return im.int_type(bits)
        if word in vo.FLOAT_TYPES:
            return im.float_type(word)
        if word == 'ptr':
            space = self._address_space()
            return im.TypeDesc(im.TypeKind.POINTER, address_space=space) if space else im.PTR
        if word == 'metadata':
            raise _MetadataOperand()
        if word in ('label', 'token', 'x86_mmx', 'x86_amx', 'target'):
            self.unsupported(f'{word}_type', tok.line)
        self.pos -= 1
        self.fail('type')

    def _address_space(self) -> int:
        if not self.accept('addrspace'):
            return 0
        self.expect('(')
        space = self.expect_int()
        self.expect(')')
        return space

    def _struct_type(self) -> im.TypeDesc:
        self.expect('{')
        members = []
        while not self.at('}'):
            members.append(self.parse_type())
            if not self.accept(','):
                break
        self.expect('}')
        return im.TypeDesc(im.TypeKind.STRUCTURE, members=tuple(members))

    def _function_type(self, result: im.TypeDesc) -> im.TypeDesc:
        self.expect('(')
        params, vararg = [], False
        while not self.at(')'):
            if self.accept('...'):
                vararg = True
                break
            params.append(self.parse_type())
            if not self.accept(','):
                break
        self.expect(')')
        return im.TypeDesc(im.TypeKind.FUNCTION, element=result, members=tuple(params), vararg=vararg)

    def named_type(self, name: str, line: int) -> im.TypeDesc:
        if name in self.named_types:
            return self.named_types[name]
        if name in self.resolving:
            raise IrSyntaxError(f'recursive type %{name}', line)
        if name not in self.type_starts:
            raise UnresolvedReference(im.spell('%', name), line)
        saved = self.pos
        self.pos = self.type_starts[name]
        self.resolving.add(name)
        try:
            if self.accept('opaque'):
                desc = im.TypeDesc(im.TypeKind.OPAQUE, name=name)
            else:
                body = self.parse_type()
                if body.kind is not im.TypeKind.STRUCTURE:
                    raise IrSyntaxError(f'named type %{name} must be a structure or opaque', line)
                desc = dc.replace(body, name=name)
            self.type_ends[name] = self.pos
        finally:
            self.resolving.discard(name)
            self.pos = saved
        self.named_types[name] = desc
        return desc

    # values

    def parse_value(self, ty: im.TypeDesc) -> Operand:
        tok = self.next()
        if tok.kind is Tok.LOCAL:
            return _Ref(im.spell('%', identifier_name(tok.text)), ty, tok.line)
        if tok.kind is Tok.GLOBAL:
            return _Ref(im.spell('@', identifier_name(tok.text)), ty, tok.line)
        if tok.kind is Tok.INT:
            return self._scalar(ty, im.ValueKind.CONSTANT_INT, tok.text)
        if tok.kind in (Tok.FLOAT, Tok.HEX_FLOAT):
            return self._scalar(ty, im.ValueKind.CONSTANT_FP, tok.text)
        if tok.kind is Tok.CSTRING:
            return im.ValueInfo(f'{ty} {tok.text}', im.ValueKind.CONSTANT_AGGREGATE, ty, constant_payload=tok.text)
        if tok.kind is Tok.METADATA:
            raise _MetadataOperand()
        if tok.kind is Tok.PUNCT and tok.text in '[<{':
            return self._aggregate(ty, tok)
        if tok.kind is not Tok.KEYWORD:
            self.unread(tok)
            self.fail('value')
        word = tok.text
        if word in ('true', 'false'):
            return self._scalar(ty, im.ValueKind.CONSTANT_INT, word)
        if word in ('null', 'none', 'zeroinitializer'):
            return self._scalar(ty, im.ValueKind.CONSTANT_OTHER, word)
        if word in ('undef', 'poison'):
            return self._scalar(ty, im.ValueKind.UNDEF, word)
        if word == 'asm':
            self.unsupported('inline_asm', tok.line)
        if word in ('blockaddress', 'dso_local_equivalent', 'no_cfi'):
            self.unsupported(word, tok.line)
        if word == 'getelementptr':
            return self._gep_expression(ty)
        if word in {op.value for op in vo.CAST_OPS}:
            return self._cast_expression(ty, word)
        if word in {op.value for op in vo.BINARY_OPS}:
            return self._binary_expression(ty, word)
        if word in vo.SUPPORTED_OPCODES:
            self.unsupported('constant_expression', tok.line)
        self.pos -= 1
        self.fail('value')

    def parse_typed_value(self) -> Operand:
        return self.parse_value(self.parse_type())

    @staticmethod
    def _scalar(ty: im.TypeDesc, kind: im.ValueKind, text: str) -> im.ValueInfo:
        return im.ValueInfo(f'{ty} {text}', kind, ty, constant_payload=text)

    def _aggregate(self, ty: im.TypeDesc, opener: Token) -> im.ValueInfo:
        if opener.text == '<' and self.accept('{'):
            form, close = 'packed_struct', '}'
        else:
            form, close = {'[': ('array', ']'), '<': ('vector', '>'), '{': ('struct', '}')}[opener.text]
        elements = []
        while not self.at(close):
            elements.append(self.parse_typed_value())
            if not self.accept(','):
                break
        self.expect(close)
        if form == 'packed_struct':
            self.expect('>')
        inner = ', '.join(im.typed_text(element) for element in elements)
        literal = {'array': f'[{inner}]', 'vector': f'<{inner}>', 'struct': f'{{ {inner} }}' if inner else '{}',
                   'packed_struct': f'<{{ {inner} }}>' if inner else '<{}>'}[form]
        return im.ValueInfo(f'{ty} {literal}', im.ValueKind.CONSTANT_AGGREGATE, ty, constant_payload=form,
                            operands=tuple(elements))

    def _gep_expression(self, ty: im.TypeDesc) -> im.ValueInfo:
        flags = tuple(self.keywords(('inbounds',)))
        self.expect('(')
        source = self.parse_type()
        operands = []
        while self.accept(','):
            if self.accept('inrange'):
                flags += ('inrange',)
            operands.append(self.parse_typed_value())
        self.expect(')')
        inner = ', '.join([str(source)] + [im.typed_text(operand) for operand in operands])
        literal = ' '.join(('getelementptr',) + flags) + f' ({inner})'
        return im.ValueInfo(f'{ty} {literal}', im.ValueKind.CONSTANT_AGGREGATE, ty, constant_payload='getelementptr',
                            operands=tuple(operands), type_args=(source,), flags=flags)

    def _cast_expression(self, ty: im.TypeDesc, opcode: str) -> im.ValueInfo:
        self.expect('(')
        operand = self.parse_typed_value()
        self.expect('to')
        target = self.parse_type()
        self.expect(')')
        literal = f'{opcode} ({im.typed_text(operand)} to {target})'
        return im.ValueInfo(f'{ty} {literal}', im.ValueKind.CONSTANT_AGGREGATE, ty, constant_payload=opcode,
                            operands=(operand,), type_args=(target,))

    def _binary_expression(self, ty: im.TypeDesc, opcode: str) -> im.ValueInfo:
        flags = tuple(self.keywords(vo.WRAP_FLAGS))
        self.expect('(')
        lhs = self.parse_typed_value()
        self.expect(',')
        rhs = self.parse_typed_value()
        self.expect(')')
        literal = ' '.join((opcode,) + flags) + f' ({im.typed_text(lhs)}, {im.typed_text(rhs)})'
        return im.ValueInfo(f'{ty} {literal}', im.ValueKind.CONSTANT_AGGREGATE, ty, constant_payload=opcode,
                            operands=(lhs, rhs), flags=flags)

    # attributes

    def attribute(self) -> Optional[str]:
        """Consumes one parameter or function attribute if one starts here
        :return: raw attribute spelling, None when the next token is not an attribute
        """
        tok = self.peek()
        if tok.kind is Tok.STRING:
            self.next()
            if self.accept('='):
                return f'{tok.text}={self.expect_kind(Tok.STRING).text}'
            return tok.text
        if tok.kind is not Tok.KEYWORD:
            return None
        word = tok.text
        if word in vo.PARAMETRIC_ATTRIBUTES:
            self.next()
            if self.at('('):
                return word + self._parenthesised()
            if self.peek().kind is Tok.INT:
                return f'{word} {self.next().text}'
            return word
        if word in vo.PARAMETER_ATTRIBUTES or word in vo.FUNCTION_ATTRIBUTES:
            self.next()
            return word
        return None

    def attributes(self) -> List[str]:
        found = []
        while True:
            attr = self.attribute()
            if attr is None:
                return found
            found.append(attr)

    def _parenthesised(self) -> str:
        parts, depth = [], 0
        while True:
            tok = self.next()
            if tok.kind is Tok.EOF:
                self.fail(')')
            text = tok.text + ':' if tok.kind is Tok.LABEL else tok.text
            depth += {'(': 1, ')': -1}.get(text, 0)
            parts.append(text)
            if depth == 0:
                break
        out = ''
        for part in parts:
            if out and not out.endswith('(') and part not in (')', ','):
                out += ' '
            out += part
        return out

    def parse_attribute_group(self) -> None:
        self.expect('attributes')
        group = self.expect_kind(Tok.ATTR_GROUP).text
        self.expect('=')
        self.expect('{')
        tokens = []
        while not self.at('}'):
            attr = self.attribute()
            if attr is None:
                tok = self.next()
                if tok.kind is not Tok.KEYWORD:
                    self.pos -= 1
                    self.fail('attribute')
                attr = tok.text + (self._parenthesised() if self.at('(') else '')
            tokens.append(attr)
        self.expect('}')
        self.attribute_groups[group] = tuple(tokens)

    # module level entities

    def parse(self, name: str) -> im.IrModule:
        while self.peek().kind is not Tok.EOF:
            tok = self.peek()
            if tok.kind is Tok.KEYWORD and tok.text in ('define', 'declare'):
                self.parse_function()
            elif tok.kind is Tok.KEYWORD and tok.text == 'attributes':
                self.parse_attribute_group()
            elif tok.kind is Tok.KEYWORD and tok.text == 'source_filename':
                self.next()
                self.expect('=')
                self.expect_kind(Tok.STRING)
            elif tok.kind is Tok.KEYWORD and tok.text == 'target':
                self.next()
                which = self.expect_kind(Tok.KEYWORD).text
                self.expect('=')
                value = identifier_name(self.expect_kind(Tok.STRING).text)
                if which == 'triple':
                    self.target_triple = value
                elif which == 'datalayout':
                    self.datalayout = value
                else:
                    raise IrSyntaxError(f'unknown target property {which}', tok.line, tok.column)
            elif tok.kind is Tok.KEYWORD and tok.text == 'module':
                self.module_level_unsupported('inline_asm', tok.line)
            elif tok.kind is Tok.KEYWORD and tok.text in ('uselistorder', 'uselistorder_bb'):
                self.record('uselistorder', tok.line)
                self.skip_line(tok.line)
            elif tok.kind is Tok.LOCAL:
                self.parse_type_definition()
            elif tok.kind is Tok.GLOBAL:
                self.parse_global()
            elif tok.kind is Tok.METADATA:
                self.record('metadata', tok.line)
                self.skip_line(tok.line)
            elif tok.kind is Tok.COMDAT:
                self.record('comdat', tok.line)
                self.skip_line(tok.line)
            else:
                self.fail('top level entity')
        return self.finish(name)

    def module_level_unsupported(self, construct: str, line: int) -> None:
        if not self.lenient:
            self.unsupported(construct, line)
        self.record(construct, line)
        self.skip_line(line)

    def parse_type_definition(self) -> None:
        tok = self.next()
        name = identifier_name(tok.text)
        self.expect('=')
        self.expect('type')
        self.named_type(name, tok.line)
        if name in self.type_order:
            raise IrSyntaxError(f'redefinition of type %{name}', tok.line, tok.column)
        self.type_order.append(name)
        self.pos = self.type_ends[name]

    def _linkage_prefix(self, owner: Dict[str, object]) -> None:
        """Consumes the linkage/visibility/storage keywords shared by globals and functions"""
        linkages = {linkage.value for linkage in vo.Linkage}
        visibilities = {visibility.value for visibility in vo.Visibility}
        while self.peek().kind is Tok.KEYWORD:
            tok = self.peek()
            word = tok.text
            if word in linkages:
                owner['linkage'] = vo.Linkage(word)
            elif word in _PREEMPTION:
                owner['preemption'] = word
            elif word in visibilities:
                owner['visibility'] = vo.Visibility(word)
            elif word in _DLL_STORAGE:
                self.record('dll_storage', tok.line)
            else:
                return
            self.next()

    def parse_global(self) -> None:
        start = self.pos
        name_tok = self.next()
        try:
            self._parse_global(identifier_name(name_tok.text), name_tok.line)
        except _MetadataOperand:
            self.record('metadata', name_tok.line)
            self.pos = start
            self.skip_line(name_tok.line)
        except UnsupportedConstruct as exc:
            if not self.lenient:
                raise
            self.record(exc.construct, exc.line)
            self.pos = start
            self.skip_line(name_tok.line)

    def _parse_global(self, name: str, line: int) -> None:
        self.expect('=')
        fields: Dict[str, object] = {}
        self._linkage_prefix(fields)
        while True:
            if self.accept('thread_local'):
                fields['thread_local'] = True
                if self.at('('):
                    self._parenthesised()
            elif self.peek().text in _ADDRESS_SIGNIFICANCE and self.peek().kind is Tok.KEYWORD:
                fields['unnamed_addr'] = self.next().text
            elif self.at('addrspace'):
                fields['address_space'] = self._address_space()
            elif self.accept('externally_initialized'):
                pass
            else:
                break
        if self.at('alias') or self.at('ifunc'):
            self.unsupported(self.peek().text, line)
        if not (self.at('global') or self.at('constant')):
            self.fail('global or constant')
        is_constant = self.next().text == 'constant'
        value_type = self.parse_type()
        initializer = None
        if self.peek().line == line and not self.at(',') and self.peek().kind is not Tok.EOF:
            initializer = self.parse_value(value_type)
        while self.at(','):
            if self.peek(1).kind is Tok.METADATA:
                self.record('metadata', line)
                self.skip_line(self.peek().line)
                break
            self.next()
            if self.accept('section'):
                fields['section'] = identifier_name(self.expect_kind(Tok.STRING).text)
            elif self.accept('partition'):
                self.expect_kind(Tok.STRING)
            elif self.accept('align'):
                fields['alignment'] = self.expect_int()
            elif self.accept('comdat'):
                self.record('comdat', line)
                if self.at('('):
                    self._parenthesised()
            else:
                self.fail('global property')
        self.globals.append(im.GlobalValue(name, value_type, is_constant, initializer, **fields))

    def parse_function(self) -> None:
        start_tok = self.next()
        is_define = start_tok.text == 'define'
        start = self.pos
        try:
            header, group_refs, drop_body = self._function_header(start_tok)
        except _MetadataOperand:
            self.record('metadata', start_tok.line)
            self.pos = start
            self.skip_line(start_tok.line)
            if is_define and self.tokens[self.pos - 1].text == '{':
                self.skip_body()
            return
        except UnsupportedConstruct as exc:
            if not self.lenient:
                raise
            self.record(exc.construct, exc.line)
            self.pos = start
            self.skip_line(start_tok.line)
            if is_define and self.tokens[self.pos - 1].text == '{':
                self.skip_body()
            return
        if is_define:
            self.expect('{')
            body_start = self.pos
            try:
                header = self._function_body(header)
            except UnsupportedConstruct as exc:
                if not self.lenient:
                    raise
                self.record(exc.construct, exc.line)
                self.pos = body_start
                self.skip_body()
            if drop_body:
                header = dc.replace(header, blocks=())
        self.functions.append(_PendingFunction(header, group_refs, start_tok.line))

    def _function_header(self, start_tok: Token) -> Tuple[im.Function, List[str], bool]:
        fields: Dict[str, object] = {}
        self._linkage_prefix(fields)
        conventions = {cc.value for cc in vo.CallingConv}
        while self.peek().kind is Tok.KEYWORD and self.peek().text in conventions:
            fields['calling_convention'] = vo.CallingConv(self.next().text)
        if self.peek().kind is Tok.KEYWORD and _OTHER_CALLING_CONVENTIONS.fullmatch(self.peek().text):
            self.unsupported('calling_convention')
        fields['return_attributes'] = im.AttributeSet.of(self.attributes())
        return_type = self.parse_type()
        name = identifier_name(self.expect_kind(Tok.GLOBAL).text)
        self.next_number = 0
        args, arg_attributes, vararg = self._parameters()
        group_refs, attrs = [], []
        drop_body = False
        is_define = start_tok.text == 'define'
        while True:
            tok = self.peek()
            if tok.kind is Tok.EOF or (is_define and self.at('{')) or (not is_define and tok.line != start_tok.line):
                break
            if tok.kind is Tok.KEYWORD and tok.text in _ADDRESS_SIGNIFICANCE:
                fields['unnamed_addr'] = self.next().text
            elif self.at('addrspace'):
                self._address_space()
            elif tok.kind is Tok.ATTR_GROUP:
                group_refs.append(self.next().text)
            elif self.accept('section'):
                fields['section'] = identifier_name(self.expect_kind(Tok.STRING).text)
            elif self.accept('partition'):
                self.expect_kind(Tok.STRING)
            elif self.accept('align'):
                fields['alignment'] = self.expect_int()
            elif self.accept('comdat'):
                self.record('comdat', tok.line)
                if self.at('('):
                    self._parenthesised()
            elif tok.kind is Tok.KEYWORD and tok.text in ('personality', 'prefix', 'prologue', 'gc'):
                construct = 'exception_handling' if tok.text == 'personality' else tok.text
                if not self.lenient:
                    self.unsupported(construct, tok.line)
                self.next()
                if construct == 'gc':
                    self.expect_kind(Tok.STRING)
                else:
                    self.parse_typed_value()
                self.record(construct, tok.line)
                drop_body = True
            elif tok.kind is Tok.METADATA:
                self.record('metadata', tok.line)
                while self.peek().kind is Tok.METADATA:
                    self.next()
            else:
                attr = self.attribute()
                if attr is None:
                    if tok.kind is not Tok.KEYWORD:
                        self.fail('function attribute')
                    self.next()
                    attr = tok.text
                attrs.append(attr)
        function = im.Function(name, return_type, tuple(args), tuple(arg_attributes), (),
                               im.AttributeSet.of(attrs), vararg=vararg, **fields)
        return function, group_refs, drop_body

    def _parameters(self) -> Tuple[List[im.ValueInfo], List[im.AttributeSet], bool]:
        self.expect('(')
        args, arg_attributes, vararg = [], [], False
        while not self.at(')'):
            if self.accept('...'):
                vararg = True
                break
            ty = self.parse_type()
            arg_attributes.append(im.AttributeSet.of(self.attributes()))
            if self.peek().kind is Tok.LOCAL:
                arg_name = identifier_name(self.next().text)
                if arg_name.isdigit():
                    self.next_number = int(arg_name) + 1
            else:
                arg_name = str(self.next_number)
                self.next_number += 1
            args.append(im.ValueInfo(im.spell('%', arg_name), im.ValueKind.ARGUMENT, ty))
            if not self.accept(','):
                break
        self.expect(')')
        return args, arg_attributes, vararg

    # function bodies

    def _function_body(self, function: im.Function) -> im.Function:
        blocks: List[im.BasicBlock] = []
        label: Optional[str] = None
        instructions: List[im.Instruction] = []
        while not self.at('}'):
            tok = self.peek()
            if tok.kind is Tok.EOF:
                self.fail('}')
            if tok.kind is Tok.LABEL:
                if label is not None:
                    raise IrSyntaxError(f'block {label} does not end in a terminator', tok.line, tok.column)
                label = identifier_name(self.next().text)
                if label.isdigit():
                    self.next_number = int(label) + 1
                continue
            if label is None:
                label = str(self.next_number)
                self.next_number += 1
            instruction = self._instruction_line()
            if instruction is None:
                continue
            instructions.append(instruction)
            if instruction.is_terminator:
                blocks.append(im.BasicBlock(label, tuple(instructions)))
                label, instructions = None, []
        end = self.expect('}')
        if label is not None:
            raise IrSyntaxError(f'block {label} does not end in a terminator', end.line, end.column)
        return self._bind_locals(dc.replace(function, blocks=tuple(blocks)))

    def _bind_locals(self, function: im.Function) -> im.Function:
        table: Dict[str, im.ValueInfo] = {}
        for value in list(function.args) + [inst.result for inst in function.instructions() if inst.result]:
            if value.id in table:
                raise IrSyntaxError(f'redefinition of {value.id} in @{function.name}')
            table[value.id] = value
        labels = [block.label for block in function.blocks]
        if len(set(labels)) != len(labels):
            raise IrSyntaxError(f'duplicate block label in @{function.name}')
        blocks = []
        for block in function.blocks:
            bound = []
            for inst in block.instructions:
                for target in inst.successors + inst.incoming:
                    if target not in labels:
                        raise UnresolvedReference(im.spell('%', target), inst.position.line)
                if labels and labels[0] in inst.successors:
                    raise IrSyntaxError('entry block cannot be a branch target', inst.position.line,
                                        inst.position.column)
                bound.append(dc.replace(inst, operands=tuple(_bind(op, table, '%') for op in inst.operands)))
            blocks.append(im.BasicBlock(block.label, tuple(bound)))
        return dc.replace(function, blocks=tuple(blocks))

    def _instruction_line(self) -> Optional[im.Instruction]:
        start = self.peek()
        saved_number = self.next_number
        try:
            instruction = self.parse_instruction()
        except _MetadataOperand:
            self.record('metadata', start.line)
            self.skip_line(start.line)
            self.next_number = saved_number
            return None
        if self.at(',') and self.peek(1).kind is Tok.METADATA:
            self.record('metadata', start.line)
            self.skip_line(self.peek().line)
        return instruction

    def parse_instruction(self) -> im.Instruction:
        start = self.peek()
        result_name = None
        if start.kind is Tok.LOCAL and self.at('=', 1):
            result_name = identifier_name(self.next().text)
            self.next()
        op_tok = self.expect_kind(Tok.KEYWORD)
        flags: List[str] = []
        word = op_tok.text
        if word in ('tail', 'musttail', 'notail'):
            flags.append(word)
            word = self.expect('call').text
        if word in vo.UNSUPPORTED_OPCODES:
            self.unsupported(vo.UNSUPPORTED_OPCODES[word], op_tok.line)
        if word not in vo.SUPPORTED_OPCODES:
            self.unsupported(word, op_tok.line)
        opcode = vo.Opcode(word)
        instruction = self._handler(opcode)(opcode, flags)
        result = None
        if instruction.result_type != im.VOID:
            if result_name is None:
                result_name = str(self.next_number)
                self.next_number += 1
            elif result_name.isdigit():
                self.next_number = int(result_name) + 1
            result = im.ValueInfo(im.spell('%', result_name), im.ValueKind.LOCAL, instruction.result_type)
        elif result_name is not None:
            raise IrSyntaxError(f'cannot name a void {word} instruction', start.line, start.column)
        return dc.replace(instruction, result=result, position=im.SourcePos(start.line, start.column))

    def _handler(self, opcode: vo.Opcode) -> Callable[[vo.Opcode, List[str]], im.Instruction]:
        if opcode in vo.BINARY_OPS:
            return self._binary
        if opcode in vo.CAST_OPS:
            return self._cast
        return {
            vo.Opcode.RET: self._ret, vo.Opcode.BR: self._br, vo.Opcode.SWITCH: self._switch,
            vo.Opcode.UNREACHABLE: self._unreachable, vo.Opcode.FNEG: self._fneg, vo.Opcode.ICMP: self._compare,
            vo.Opcode.FCMP: self._compare, vo.Opcode.ALLOCA: self._alloca, vo.Opcode.LOAD: self._load,
            vo.Opcode.STORE: self._store, vo.Opcode.GETELEMENTPTR: self._gep, vo.Opcode.FENCE: self._fence,
            vo.Opcode.CMPXCHG: self._cmpxchg, vo.Opcode.ATOMICRMW: self._atomicrmw, vo.Opcode.PHI: self._phi,
            vo.Opcode.SELECT: self._select, vo.Opcode.CALL: self._call, vo.Opcode.VA_ARG: self._va_arg,
            vo.Opcode.EXTRACTELEMENT: self._extractelement, vo.Opcode.INSERTELEMENT: self._insertelement,
            vo.Opcode.SHUFFLEVECTOR: self._shufflevector, vo.Opcode.EXTRACTVALUE: self._extractvalue,
            vo.Opcode.INSERTVALUE: self._insertvalue, vo.Opcode.FREEZE: self._freeze,
        }[opcode]

    def _label_ref(self) -> str:
        self.expect('label')
        return identifier_name(self.expect_kind(Tok.LOCAL).text)

    def _trailing_alignment(self) -> Optional[int]:
        alignment = None
        while self.at(',') and self.at('align', 1):
            self.next()
            self.next()
            alignment = self.expect_int()
            if alignment <= 0:
                raise IrSyntaxError('alignment must be positive', self.peek().line)
        return alignment

    def _atomic_suffix(self, flags: List[str], orderings: int) -> None:
        if self.at('syncscope'):
            self.next()
            self.expect('(')
            flags.append(f'syncscope({self.expect_kind(Tok.STRING).text})')
            self.expect(')')
        for _ in range(orderings):
            tok = self.expect_kind(Tok.KEYWORD)
            if tok.text not in vo.ATOMIC_ORDERINGS:
                self.pos -= 1
                self.fail('atomic ordering')
            flags.append(tok.text)

    def _ret(self, opcode, flags) -> im.Instruction:
        if self.accept('void'):
            return im.Instruction(opcode, None, (), im.VOID)
        return im.Instruction(opcode, None, (self.parse_typed_value(),), im.VOID)

    def _br(self, opcode, flags) -> im.Instruction:
        if self.at('label'):
            return im.Instruction(opcode, None, (), im.VOID, successors=(self._label_ref(),))
        condition = self.parse_typed_value()
        self.expect(',')
        on_true = self._label_ref()
        self.expect(',')
        on_false = self._label_ref()
        return im.Instruction(opcode, None, (condition,), im.VOID, successors=(on_true, on_false))

    def _switch(self, opcode, flags) -> im.Instruction:
        condition = self.parse_typed_value()
        self.expect(',')
        successors = [self._label_ref()]
        operands = [condition]
        self.expect('[')
        while not self.at(']'):
            operands.append(self.parse_typed_value())
            self.expect(',')
            successors.append(self._label_ref())
        self.expect(']')
        return im.Instruction(opcode, None, tuple(operands), im.VOID, successors=tuple(successors))

    def _unreachable(self, opcode, flags) -> im.Instruction:
        return im.Instruction(opcode, None, (), im.VOID)

    def _fneg(self, opcode, flags) -> im.Instruction:
        flags += self.keywords(vo.FAST_MATH_FLAGS)
        operand = self.parse_typed_value()
        return im.Instruction(opcode, None, (operand,), operand.type, flags=tuple(flags))

    def _binary(self, opcode, flags) -> im.Instruction:
        flags += self.keywords(vo.WRAP_FLAGS + vo.FAST_MATH_FLAGS)
        ty = self.parse_type()
        lhs = self.parse_value(ty)
        self.expect(',')
        rhs = self.parse_value(ty)
        return im.Instruction(opcode, None, (lhs, rhs), ty, flags=tuple(flags))

    def _compare(self, opcode, flags) -> im.Instruction:
        predicates = vo.INT_PREDICATES
        if opcode is vo.Opcode.FCMP:
            flags += self.keywords(vo.FAST_MATH_FLAGS)
            predicates = vo.FLOAT_PREDICATES
        predicate = self.expect_kind(Tok.KEYWORD)
        if predicate.text not in predicates:
            self.pos -= 1
            self.fail('comparison predicate')
        flags.append(predicate.text)
        ty = self.parse_type()
        lhs = self.parse_value(ty)
        self.expect(',')
        rhs = self.parse_value(ty)
        return im.Instruction(opcode, None, (lhs, rhs), _bool_like(ty), flags=tuple(flags))

    def _alloca(self, opcode, flags) -> im.Instruction:
        flags += self.keywords(('inalloca',))
        allocated = self.parse_type()
        operands, alignment, space = [], None, 0
        while self.at(',') and self.peek(1).kind is not Tok.METADATA:
            self.next()
            if self.accept('align'):
                alignment = self.expect_int()
            elif self.at('addrspace'):
                space = self._address_space()
            else:
                operands.append(self.parse_typed_value())
        result = im.TypeDesc(im.TypeKind.POINTER, address_space=space) if space else im.PTR
        return im.Instruction(opcode, None, tuple(operands), result, alignment=alignment, flags=tuple(flags),
                              type_args=(allocated,))

    def _load(self, opcode, flags) -> im.Instruction:
        flags += self.keywords(('atomic', 'volatile'))
        loaded = self.parse_type()
        self.expect(',')
        pointer = self.parse_typed_value()
        if 'atomic' in flags:
            self._atomic_suffix(flags, 1)
        alignment = self._trailing_alignment()
        return im.Instruction(opcode, None, (pointer,), loaded, alignment=alignment, flags=tuple(flags),
                              type_args=(loaded,))

    def _store(self, opcode, flags) -> im.Instruction:
        flags += self.keywords(('atomic', 'volatile'))
        value = self.parse_typed_value()
        self.expect(',')
        pointer = self.parse_typed_value()
        if 'atomic' in flags:
            self._atomic_suffix(flags, 1)
        alignment = self._trailing_alignment()
        return im.Instruction(opcode, None, (value, pointer), im.VOID, alignment=alignment, flags=tuple(flags))

    def _gep(self, opcode, flags) -> im.Instruction:
        flags += self.keywords(('inbounds',))
        source = self.parse_type()
        self.expect(',')
        pointer = self.parse_typed_value()
        operands = [pointer]
        while self.at(',') and self.peek(1).kind is not Tok.METADATA:
            self.next()
            index = self.parse_typed_value()
            if index.type.kind is im.TypeKind.VECTOR:
                self.unsupported('vector_of_pointers')
            operands.append(index)
        return im.Instruction(opcode, None, tuple(operands), pointer.type, flags=tuple(flags), type_args=(source,))

    def _fence(self, opcode, flags) -> im.Instruction:
        self._atomic_suffix(flags, 1)
        return im.Instruction(opcode, None, (), im.VOID, flags=tuple(flags))

    def _cmpxchg(self, opcode, flags) -> im.Instruction:
        flags += self.keywords(('weak', 'volatile'))
        pointer = self.parse_typed_value()
        self.expect(',')
        expected = self.parse_typed_value()
        self.expect(',')
        replacement = self.parse_typed_value()
        self._atomic_suffix(flags, 2)
        alignment = self._trailing_alignment()
        result = im.TypeDesc(im.TypeKind.STRUCTURE, members=(expected.type, im.I1))
        return im.Instruction(opcode, None, (pointer, expected, replacement), result, alignment=alignment,
                              flags=tuple(flags))

    def _atomicrmw(self, opcode, flags) -> im.Instruction:
        flags += self.keywords(('volatile',))
        operation = self.expect_kind(Tok.KEYWORD)
        if operation.text not in vo.ATOMICRMW_OPS:
            self.pos -= 1
            self.fail('atomicrmw operation')
        flags.append(operation.text)
        pointer = self.parse_typed_value()
        self.expect(',')
        value = self.parse_typed_value()
        self._atomic_suffix(flags, 1)
        alignment = self._trailing_alignment()
        return im.Instruction(opcode, None, (pointer, value), value.type, alignment=alignment, flags=tuple(flags))

    def _cast(self, opcode, flags) -> im.Instruction:
        operand = self.parse_typed_value()
        self.expect('to')
        target = self.parse_type()
        return im.Instruction(opcode, None, (operand,), target, type_args=(target,))

    def _phi(self, opcode, flags) -> im.Instruction:
        flags += self.keywords(vo.FAST_MATH_FLAGS)
        ty = self.parse_type()
        operands, incoming = [], []
        while True:
            self.expect('[')
            operands.append(self.parse_value(ty))
            self.expect(',')
            incoming.append(identifier_name(self.expect_kind(Tok.LOCAL).text))
            self.expect(']')
            if not (self.at(',') and self.at('[', 1)):
                break
            self.next()
        return im.Instruction(opcode, None, tuple(operands), ty, incoming=tuple(incoming), flags=tuple(flags))

    def _select(self, opcode, flags) -> im.Instruction:
        flags += self.keywords(vo.FAST_MATH_FLAGS)
        condition = self.parse_typed_value()
        self.expect(',')
        on_true = self.parse_typed_value()
        self.expect(',')
        on_false = self.parse_typed_value()
        return im.Instruction(opcode, None, (condition, on_true, on_false), on_true.type, flags=tuple(flags))

    def _call(self, opcode, flags) -> im.Instruction:
        flags += self.keywords(vo.FAST_MATH_FLAGS)
        conventions = {cc.value for cc in vo.CallingConv}
        if self.peek().kind is Tok.KEYWORD and self.peek().text in conventions:
            flags.append(self.next().text)
        elif self.peek().kind is Tok.KEYWORD and _OTHER_CALLING_CONVENTIONS.fullmatch(self.peek().text):
            self.unsupported('calling_convention')
        self.attributes()
        self._address_space()
        callee_type = self.parse_type()
        if self.at('asm'):
            self.unsupported('inline_asm')
        callee = self.parse_value(im.PTR)
        self.expect('(')
        args = []
        while not self.at(')'):
            ty = self.parse_type()
            self.attributes()
            args.append(self.parse_value(ty))
            if not self.accept(','):
                break
        self.expect(')')
        while self.peek().kind is Tok.ATTR_GROUP or self.attribute() is not None:
            if self.peek().kind is Tok.ATTR_GROUP:
                self.next()
        if self.at('['):
            self.unsupported('operand_bundle')
        if callee_type.kind is im.TypeKind.FUNCTION:
            result, type_args = callee_type.element, (callee_type,)
        else:
            result, type_args = callee_type, ()
        return im.Instruction(opcode, None, (callee, *args), result, flags=tuple(flags), type_args=type_args)

    def _va_arg(self, opcode, flags) -> im.Instruction:
        pointer = self.parse_typed_value()
        self.expect(',')
        ty = self.parse_type()
        return im.Instruction(opcode, None, (pointer,), ty, type_args=(ty,))

    def _extractelement(self, opcode, flags) -> im.Instruction:
        vector = self.parse_typed_value()
        self.expect(',')
        index = self.parse_typed_value()
        return im.Instruction(opcode, None, (vector, index), self._element_of(vector.type))

    def _insertelement(self, opcode, flags) -> im.Instruction:
        vector = self.parse_typed_value()
        self.expect(',')
        element = self.parse_typed_value()
        self.expect(',')
        index = self.parse_typed_value()
        return im.Instruction(opcode, None, (vector, element, index), vector.type)

    def _shufflevector(self, opcode, flags) -> im.Instruction:
        first = self.parse_typed_value()
        self.expect(',')
        second = self.parse_typed_value()
        self.expect(',')
        mask = self.parse_typed_value()
        if mask.type.kind is not im.TypeKind.VECTOR:
            raise IrSyntaxError('shufflevector mask must be a vector', self.peek().line)
        result = im.TypeDesc(im.TypeKind.VECTOR, element=self._element_of(first.type), count=mask.type.count)
        return im.Instruction(opcode, None, (first, second, mask), result)

    def _indices(self) -> Tuple[int, ...]:
        indices = []
        while self.at(',') and self.peek(1).kind is Tok.INT:
            self.next()
            indices.append(self.expect_int())
        if not indices:
            self.fail('constant index')
        return tuple(indices)

    def _extractvalue(self, opcode, flags) -> im.Instruction:
        aggregate = self.parse_typed_value()
        indices = self._indices()
        result = aggregate.type
        for index in indices:
            result = self._member(result, index)
        return im.Instruction(opcode, None, (aggregate,), result, indices=indices)

    def _insertvalue(self, opcode, flags) -> im.Instruction:
        aggregate = self.parse_typed_value()
        self.expect(',')
        element = self.parse_typed_value()
        indices = self._indices()
        return im.Instruction(opcode, None, (aggregate, element), aggregate.type, indices=indices)

    def _freeze(self, opcode, flags) -> im.Instruction:
        operand = self.parse_typed_value()
        return im.Instruction(opcode, None, (operand,), operand.type)

    def _element_of(self, ty: im.TypeDesc) -> im.TypeDesc:
        if ty.kind is not im.TypeKind.VECTOR:
            raise IrSyntaxError(f'expected a vector type, got {ty}', self.peek().line)
        return ty.element

    def _member(self, ty: im.TypeDesc, index: int) -> im.TypeDesc:
        if ty.kind in (im.TypeKind.ARRAY, im.TypeKind.VECTOR) and index < ty.count:
            return ty.element
        if ty.kind is im.TypeKind.STRUCTURE and index < len(ty.members):
            return ty.members[index]
        raise IrSyntaxError(f'invalid index {index} into {ty}', self.peek().line)

    # module completion

    def finish(self, name: str) -> im.IrModule:
        table: Dict[str, im.ValueInfo] = {}
        for value in [g.ref for g in self.globals] + [pending.function.ref for pending in self.functions]:
            if value.id in table:
                raise IrSyntaxError(f'redefinition of {value.id}')
            table[value.id] = value
        globals_ = tuple(dc.replace(g, initializer=_bind(g.initializer, table, '@')) if g.initializer else g
                         for g in self.globals)
        functions = []
        for pending in self.functions:
            function = pending.function
            group_tokens: List[str] = []
            for ref in pending.group_refs:
                if ref not in self.attribute_groups:
                    raise UnresolvedReference(ref, pending.line)
                group_tokens += self.attribute_groups[ref]
            blocks = tuple(
                im.BasicBlock(block.label, tuple(
                    dc.replace(inst, operands=tuple(_bind(op, table, '@') for op in inst.operands))
                    for inst in block.instructions))
                for block in function.blocks)
            functions.append(dc.replace(function, blocks=blocks,
                                        attributes=im.AttributeSet.of(function.attributes.raw + tuple(group_tokens))))
        named_types = tuple((type_name, self.named_types[type_name]) for type_name in self.type_order)
        return im.IrModule(name, self.target_triple, globals_, tuple(functions), named_types, self.datalayout,
                           tuple(self.skipped))


def parse_module(text: str, lenient: bool = False, max_bytes: int = DEFAULT_MAX_BYTES,
                 name: str = 'module') -> im.IrModule:
    """Parses LLVM IR textual assembly into a fully resolved IrModule
    :param text: IR text
    :param lenient: skip constructs outside the supported subset instead of raising UnsupportedConstruct
    :param max_bytes: size limit on the UTF-8 encoded input
    :param name: module name, usually the source file name
    :return: parsed module
    """
    size = len(text.encode('utf-8'))
    if size > max_bytes:
        raise InputTooLarge(f'input of {size} bytes exceeds the limit of {max_bytes} bytes')
    return _ModuleParser(text, lenient).parse(name)


def read_ir_text(path: Union[str, pl.Path], max_bytes: int = DEFAULT_MAX_BYTES) -> str:
    path = pl.Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise IoError(f'cannot read {path}: {exc.strerror}') from exc
    if len(data) > max_bytes:
        raise InputTooLarge(f'{path} has {len(data)} bytes, the limit is {max_bytes} bytes')
    try:
        return data.decode('utf-8')
    except UnicodeDecodeError as exc:
        raise IrSyntaxError(f'{path} is not valid UTF-8') from exc


def parse_file(path: Union[str, pl.Path], lenient: bool = False,
               max_bytes: int = DEFAULT_MAX_BYTES) -> im.IrModule:
    """Reads and parses one .ll file; the module is named after the file"""
    return parse_module(read_ir_text(path, max_bytes), lenient, max_bytes, name=pl.Path(path).name)
