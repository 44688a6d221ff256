import numpy as np
import pytest
import torch

import src.prompt.lm as lmm
import src.prompt.prompt as pp
from src.errors import ContextOverflow, DimensionMismatch

from conftest import TINY_LM_DIMS

WIDTH = TINY_LM_DIMS.embed


def _rows(count: int, fill: float) -> torch.Tensor:
    return torch.full((count, WIDTH), fill, dtype=lmm.DTYPE)


def test_segment_map_layout():
    """Segments tile the prompt in order for random sizes"""
    rng = np.random.default_rng(0)
    for _ in range(20):
        nodes, tokens = int(rng.integers(0, 50)), int(rng.integers(0, 50))
        segments = pp.segment_map(nodes, tokens)
        assert list(segments) == list(pp.SEGMENTS)
        bounds = [segments[name] for name in pp.SEGMENTS]
        assert bounds[0][0] == 0
        assert all(a[1] == b[0] for a, b in zip(bounds, bounds[1:]))
        assert bounds[-1][1] == nodes + tokens + 3


def test_assembled_rows(tiny_lm):
    graph, nodes, tokens = torch.full((WIDTH,), 2.0, dtype=lmm.DTYPE), _rows(5, 3.0), _rows(4, 4.0)
    prompt = pp.assemble_prompt(graph, nodes, tokens, tiny_lm)
    assert prompt.length == 5 + 4 + 3
    assert torch.equal(prompt.segment('bos')[0], tiny_lm.bos)
    assert torch.equal(prompt.segment('graph')[0], graph)
    assert torch.equal(prompt.segment('nodes'), nodes)
    assert torch.equal(prompt.segment('tokens'), tokens)
    assert torch.equal(prompt.segment('eos')[0], tiny_lm.eos)


def test_random_prompt_lengths(tiny_lm):
    rng = np.random.default_rng(1)
    for _ in range(10):
        nodes, tokens = int(rng.integers(0, 40)), int(rng.integers(0, 40))
        prompt = pp.assemble_prompt(torch.zeros(WIDTH, dtype=lmm.DTYPE), _rows(nodes, 1.0), _rows(tokens, 1.0),
                                    tiny_lm)
        assert prompt.length == nodes + tokens + 3


def test_node_cap(tiny_lm):
    nodes = torch.arange(10 * WIDTH, dtype=lmm.DTYPE).reshape(10, WIDTH)
    prompt = pp.assemble_prompt(torch.zeros(WIDTH, dtype=lmm.DTYPE), nodes, _rows(2, 0.0), tiny_lm, max_nodes=3)
    assert torch.equal(prompt.segment('nodes'), nodes[:3])
    assert prompt.length == 3 + 2 + 3


def test_width_mismatch(tiny_lm):
    with pytest.raises(DimensionMismatch):
        pp.assemble_prompt(torch.zeros(WIDTH + 1, dtype=lmm.DTYPE), _rows(1, 0.0), _rows(1, 0.0), tiny_lm)
    with pytest.raises(DimensionMismatch):
        pp.assemble_prompt(torch.zeros(WIDTH, dtype=lmm.DTYPE), torch.zeros(2, WIDTH - 1, dtype=lmm.DTYPE),
                           _rows(1, 0.0), tiny_lm)


def test_context_overflow():
    lm = lmm.init_lm(lmm.LmDims(embed=WIDTH, layers=1, heads=2, context=8), seed=0)
    with pytest.raises(ContextOverflow):
        pp.assemble_prompt(torch.zeros(WIDTH, dtype=lmm.DTYPE), _rows(3, 0.0), _rows(3, 0.0), lm)
    assert pp.assemble_prompt(torch.zeros(WIDTH, dtype=lmm.DTYPE), _rows(3, 0.0), _rows(2, 0.0), lm).length == 8
