from __future__ import annotations

import enum as e
import logging
import pathlib as pl
from typing import Callable, Dict, List, Tuple, Union

import numpy as np

import src.bench.corpus as bc
import src.graph.builder as gb
import src.graph.store as gs
from src.errors import UsageError

"""Synthetic labeled corpora small enough to train on a desk. Every task emits pairs of functions that share all
structure except one planted property, so the label is recomputable from the IR text alone."""

log = logging.getLogger(__name__)

MIN_SAMPLES = 10


class ToyTask(e.Enum):
    CFG_LOOP = 'cfg-loop'  # 1: the latch switches back to the loop body, 0: both latch targets are the exit
    VALUE_KIND = 'value-kind'  # 1: fadd of a constant, 0: fadd of an argument
    PAIRWISE = 'pairwise'  # 1: unchecked indexed load, 0: bounds-checked load

    @classmethod
    def parse(cls, name: str) -> ToyTask:
        try:
            return cls(name)
        except ValueError:
            raise UsageError(f'unknown task {name!r}, expected one of {", ".join(t.value for t in cls)}')


_CHAIN_OPS = ('mul', 'xor', 'add', 'or')


def _int_chain(rng: np.random.Generator, start: str) -> Tuple[List[str], str]:
    lines, prev = [], start
    for j in range(int(rng.integers(0, 4))):
        op = _CHAIN_OPS[int(rng.integers(len(_CHAIN_OPS)))]
        lines.append(f'  %v{j} = {op} i32 %{prev}, {int(rng.integers(2, 64))}')
        prev = f'v{j}'
    return lines, prev


def cfg_loop_pair(rng: np.random.Generator) -> Dict[int, str]:
    chain, last = _int_chain(rng, 'next')
    step = int(rng.integers(1, 10))

    def render(target: str) -> str:
        return '\n'.join([
            'define i32 @count(i32 %n) {',
            'entry:',
            '  %slot = alloca i32, align 4',
            '  store i32 0, ptr %slot, align 4',
            '  br label %body',
            '',
            'body:',
            '  %i = load i32, ptr %slot, align 4',
            f'  %next = add i32 %i, {step}',
            *chain,
            f'  store i32 %{last}, ptr %slot, align 4',
            f'  %done = icmp sge i32 %{last}, %n',
            '  br i1 %done, label %exit, label %latch',
            '',
            'latch:',
            f'  switch i32 %{last}, label %{target} [ i32 0, label %exit ]',
            '',
            'exit:',
            '  %r = load i32, ptr %slot, align 4',
            '  ret i32 %r',
            '}',
            ''])
    return {0: render('exit'), 1: render('body')}


def value_kind_pair(rng: np.random.Generator) -> Dict[int, str]:
    chain, prev = [], 'x'
    for j in range(int(rng.integers(0, 4))):
        op = ('fmul', 'fsub', 'fadd')[int(rng.integers(3))]
        chain.append(f'  %a{j} = {op} double %{prev}, %x')
        prev = f'a{j}'
    constant = f'{int(rng.integers(1, 100))}.5'

    def render(operand: str) -> str:
        return '\n'.join([
            'define double @scale(double %x, double %z) {',
            'entry:',
            *chain,
            f'  %r = fadd double %{prev}, {operand}',
            '  ret double %r',
            '}',
            ''])
    return {0: render('%z'), 1: render(constant)}


_ELEMENTS = (('i8', 1), ('i16', 2), ('i32', 4), ('i64', 8))


def pairwise_pair(rng: np.random.Generator) -> Dict[int, str]:
    ty, align = _ELEMENTS[int(rng.integers(len(_ELEMENTS)))]
    limit = int(rng.integers(4, 1025))
    read = [f'  %p = getelementptr inbounds {ty}, ptr %buf, i64 %idx',
            f'  %v = load {ty}, ptr %p, align {align}',
            f'  ret {ty} %v']
    header = f'define {ty} @get(ptr %buf, i64 %idx) {{'
    safe = [header, 'entry:',
            f'  %ok = icmp ult i64 %idx, {limit}',
            '  br i1 %ok, label %read, label %fail',
            '', 'read:', *read,
            '', 'fail:', f'  ret {ty} 0',
            '}', '']
    vulnerable = [header, 'entry:', *read, '}', '']
    return {0: '\n'.join(safe), 1: '\n'.join(vulnerable)}


GENERATORS: Dict[ToyTask, Callable[[np.random.Generator], Dict[int, str]]] = {
    ToyTask.CFG_LOOP: cfg_loop_pair,
    ToyTask.VALUE_KIND: value_kind_pair,
    ToyTask.PAIRWISE: pairwise_pair,
}


def make_toy_corpus(task: Union[ToyTask, str], n: int, seed: int, out_dir: Union[str, pl.Path],
                    store_graphs: bool = False) -> bc.LabeledCorpus:
    """Writes a synthetic corpus and its manifest
    :param task: toy task
    :param n: sample count, at least 10; rounded down to an even count since samples come in pairs
    :param seed: generator seed; the same seed writes the same files
    :param out_dir: corpus directory, created when missing
    :param store_graphs: also build every graph and point the manifest at the stored .irg files
    :return: the written corpus
    """
    task = ToyTask.parse(task) if isinstance(task, str) else task
    if n < MIN_SAMPLES:
        raise UsageError(f'a toy corpus needs at least {MIN_SAMPLES} samples, got {n}')
    if n % 2:
        log.warning('%s samples come in pairs; writing %d instead of %d', task.value, n - 1, n)
    out_dir = pl.Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    items = []
    for pair in range(n // 2):
        for label, text in sorted(GENERATORS[task](rng).items()):
            path = out_dir / f'{task.value}-{pair:04d}-{label}.ll'
            gs.atomic_write(path, text.encode('utf-8'))
            if store_graphs:
                graph_path = path.with_suffix(bc.GRAPH_SUFFIX)
                gs.save_graph(gb.graph_file(path), graph_path)
                path = graph_path
            items.append(bc.CorpusItem(path, label, f'p{pair:04d}'))
    corpus = bc.LabeledCorpus(tuple(items), 2)
    bc.write_manifest(corpus, out_dir / bc.MANIFEST)
    log.info('wrote %d %s samples to %s', len(items), task.value, out_dir)
    return corpus
