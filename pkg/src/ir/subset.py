from __future__ import annotations

import re
from typing import List, Tuple

"""Best-effort triage of IR files: counts the lines that use constructs outside the parsed subset, without parsing.
Never raises; meant for sorting corpora before a strict parse."""

_STRING = re.compile(r'"[^"\n]*"')
_COMMENT = re.compile(r';.*$')

# construct name -> pattern, in report order
_FLAGGED: Tuple[Tuple[str, re.Pattern], ...] = (
    ('inline_asm', re.compile(r'\basm\b')),
    ('exception_handling', re.compile(
        r'\b(?:invoke|landingpad|resume|cleanuppad|catchpad|catchswitch|cleanupret|catchret|personality)\b')),
    ('callbr', re.compile(r'\bcallbr\b')),
    ('indirectbr', re.compile(r'\bindirectbr\b')),
    ('blockaddress', re.compile(r'\bblockaddress\b')),
    ('alias', re.compile(r'^\s*@\S+\s*=.*\b(?:alias|ifunc)\b')),
    ('typed_pointer', re.compile(r'(?:\bi\d+|\b(?:half|bfloat|float|double|fp128|x86_fp80|void)|%[-\w.$]+|[\]}>)])\s*\*')),
    ('vector_of_pointers', re.compile(r'<\s*\d+\s*x\s*ptr\b')),
    ('scalable_vector', re.compile(r'<\s*vscale\b')),
    ('metadata', re.compile(r'!(?:[-\w.$]+|\{|")')),
    ('comdat', re.compile(r'^\s*\$|\bcomdat\b')),
)


def strip_line(line: str) -> str:
    """Blanks string contents and drops the trailing comment"""
    return _COMMENT.sub('', _STRING.sub('""', line))


def subset_report(text: str) -> List[Tuple[str, int]]:
    """Lists constructs outside the supported subset with the number of lines using each
    :param text: LLVM IR text
    :return: (construct, line count) pairs for every construct found, in a fixed construct order
    """
    counts = {name: 0 for name, _ in _FLAGGED}
    for line in text.splitlines():
        stripped = strip_line(line)
        for name, pattern in _FLAGGED:
            if pattern.search(stripped):
                counts[name] += 1
    return [(name, count) for name, count in counts.items() if count]
