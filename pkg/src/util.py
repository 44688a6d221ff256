import json
import logging
import sys
from typing import Any, Iterable, Mapping, Tuple

LOG_FORMAT = '%(levelname)s %(name)s: %(message)s'


def configure_logging(verbosity: str) -> None:
    """Routes every log record at or above the given level to a single stderr handler
    :param verbosity: debug, info, warning or error
    :return: None
    """
    logging.basicConfig(level=getattr(logging, verbosity.upper()), format=LOG_FORMAT, stream=sys.stderr, force=True)


def dump_json(doc: Any) -> str:
    return json.dumps(doc, sort_keys=True, indent=2)


def format_counts(counts: Mapping[str, int], indent: str = '  ') -> str:
    """One "name: count" line per entry, names padded to a common width
    :param counts: ordered mapping of names to counts
    :param indent: prefix of every line
    :return: formatted lines
    """
    if not counts:
        return f'{indent}(none)'
    width = max(len(name) for name in counts)
    return '\n'.join(f'{indent}{name:<{width}}  {count}' for name, count in counts.items())


def format_rows(header: Tuple[str, ...], rows: Iterable[Tuple[Any, ...]]) -> str:
    rows = [tuple(str(cell) for cell in row) for row in rows]
    widths = [max(len(cell) for cell in column) for column in zip(header, *rows)]
    return '\n'.join('  '.join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in (header, *rows))
