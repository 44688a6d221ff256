from __future__ import annotations

import enum as e
import re
from typing import List, NamedTuple

from src.errors import IrSyntaxError

"""Tokenizer for LLVM IR textual assembly. Produces a flat token list with 1-based line/column positions; comments and
whitespace are dropped."""


class Tok(e.Enum):
    LABEL = 'label definition'
    GLOBAL = 'global identifier'
    LOCAL = 'local identifier'
    COMDAT = 'comdat identifier'
    ATTR_GROUP = 'attribute group'
    METADATA = 'metadata'
    CSTRING = 'c string'
    STRING = 'string'
    HEX_FLOAT = 'hexadecimal float'
    FLOAT = 'float'
    INT = 'integer'
    KEYWORD = 'keyword'
    ELLIPSIS = '...'
    PUNCT = 'punctuation'
    EOF = 'end of file'


class Token(NamedTuple):
    kind: Tok
    text: str
    line: int
    column: int


_NAME = r'[-a-zA-Z$._][-a-zA-Z$._0-9]*'
_QUOTED = r'"[^"]*"'

_TOKEN_PATTERNS = [
    ('newline', r'\n'),
    ('skip', r'[ \t\r]+|;[^\n]*'),
    (Tok.CSTRING, r'c"[^"]*"'),
    (Tok.LABEL, rf'(?:{_NAME}|\d+|{_QUOTED}):(?!:)'),
    (Tok.STRING, _QUOTED),
    (Tok.GLOBAL, rf'@(?:{_NAME}|\d+|{_QUOTED})'),
    (Tok.LOCAL, rf'%(?:{_NAME}|\d+|{_QUOTED})'),
    (Tok.COMDAT, rf'\$(?:{_NAME}|{_QUOTED})'),
    (Tok.ATTR_GROUP, r'#\d+'),
    (Tok.METADATA, rf'!(?:{_NAME}|\d+|{_QUOTED})?'),
    (Tok.HEX_FLOAT, r'0x[KLMHR]?[0-9A-Fa-f]+'),
    (Tok.FLOAT, r'[-+]?\d+\.\d*(?:[eE][-+]?\d+)?'),
    (Tok.INT, r'-?\d+'),
    (Tok.KEYWORD, r'[a-zA-Z_][a-zA-Z0-9_.]*'),
    (Tok.ELLIPSIS, r'\.\.\.'),
    (Tok.PUNCT, r'[=,()\[\]{}<>*:]'),
]

_MASTER = re.compile('|'.join(f'(?P<g{idx}>{pattern})' for idx, (_, pattern) in enumerate(_TOKEN_PATTERNS)))


def tokenize(text: str) -> List[Token]:
    """Splits IR text into tokens, appending a trailing EOF token
    :param text: LLVM IR textual assembly
    :return: list of tokens
    """
    tokens: List[Token] = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        match = _MASTER.match(text, pos)
        if match is None:
            raise IrSyntaxError(f'unexpected character {text[pos]!r}', line, pos - line_start + 1)
        kind = _TOKEN_PATTERNS[int(match.lastgroup[1:])][0]
        if kind == 'newline':
            line, line_start = line + 1, match.end()
        elif kind != 'skip':
            lexeme = match.group()
            if kind is Tok.LABEL:
                lexeme = lexeme[:-1]
            tokens.append(Token(kind, lexeme, line, pos - line_start + 1))
        pos = match.end()
    tokens.append(Token(Tok.EOF, '', line, pos - line_start + 1))
    return tokens


def identifier_name(token_text: str) -> str:
    """Strips the sigil and any quoting from a global/local/label spelling"""
    name = token_text[1:] if token_text[:1] in '@%$' else token_text
    if name.startswith('"') and name.endswith('"'):
        name = name[1:-1]
    return name
