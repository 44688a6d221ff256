from __future__ import annotations

import dataclasses as dc
import logging
from typing import Dict, Optional, Tuple

import torch

import src.prompt.lm as lmm
from src.errors import ContextOverflow, DimensionMismatch

"""Soft prompt layout: [BOS, graph, node rows..., token rows..., EOS]."""

log = logging.getLogger(__name__)

SEGMENTS = ('bos', 'graph', 'nodes', 'tokens', 'eos')


@dc.dataclass(frozen=True)
class PromptSequence:
    rows: torch.Tensor  # (1 + 1 + |V| + T + 1, E)
    segments: Dict[str, Tuple[int, int]]  # segment -> [start, stop) row range

    @property
    def length(self) -> int:
        return int(self.rows.shape[0])

    def segment(self, name: str) -> torch.Tensor:
        start, stop = self.segments[name]
        return self.rows[start:stop]


def segment_map(nodes: int, tokens: int) -> Dict[str, Tuple[int, int]]:
    sizes = (1, 1, nodes, tokens, 1)
    offsets, start = {}, 0
    for name, size in zip(SEGMENTS, sizes):
        offsets[name] = (start, start + size)
        start += size
    return offsets


def assemble_prompt(graph_embedding: torch.Tensor, node_embeddings: torch.Tensor, token_embeddings: torch.Tensor,
                    lm: lmm.FrozenLm, max_nodes: Optional[int] = None) -> PromptSequence:
    """Stacks the prompt rows in their fixed order
    :param graph_embedding: (E,) pooled graph embedding
    :param node_embeddings: (|V|, E) projected node rows in canonical node order
    :param token_embeddings: (T, E) embedded text tokens
    :param lm: language model supplying BOS/EOS rows and the context size
    :param max_nodes: node-row cap; excess nodes are dropped from the end of the canonical order
    :return: prompt sequence with its segment map
    """
    width = lm.dims.embed
    for what, tensor, dim in (('graph embedding', graph_embedding, 1), ('node embeddings', node_embeddings, 2),
                              ('token embeddings', token_embeddings, 2)):
        if tensor.dim() != dim or tensor.shape[-1] != width:
            raise DimensionMismatch(f'{what} have shape {tuple(tensor.shape)}, the language model width is {width}')
    if max_nodes is not None and node_embeddings.shape[0] > max_nodes:
        log.warning('truncating %d node rows to %d', node_embeddings.shape[0], max_nodes)
        node_embeddings = node_embeddings[:max_nodes]
    segments = segment_map(node_embeddings.shape[0], token_embeddings.shape[0])
    length = segments['eos'][1]
    if length > lm.dims.context:
        raise ContextOverflow(f'prompt of {length} rows exceeds the language model context of {lm.dims.context}')
    rows = torch.cat([lm.bos.unsqueeze(0), graph_embedding.unsqueeze(0), node_embeddings, token_embeddings,
                      lm.eos.unsqueeze(0)], dim=0)
    return PromptSequence(rows, segments)
