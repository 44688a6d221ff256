from __future__ import annotations

import dataclasses as dc
import math
from typing import TYPE_CHECKING, List, Sequence, Tuple, Union

import torch
import torch.nn as nn
import torch.nn.functional as F

import src.graph.store as gs
import src.model.checkpoint as ck
from src.errors import ContextOverflow, DimensionMismatch, FormatError, UsageError

if TYPE_CHECKING:
    import src.prompt.prompt as pp

"""Deterministic stand-in for a frozen decoder language model: byte tokenizer, a seeded two-layer causal
self-attention decoder and its tensor container."""

LM_MAGIC = b'IRGLMST\0'
DTYPE = torch.float64


class ByteTokenizer:
    """Byte-level ids: 0..255 are bytes of the UTF-8 text, then BOS and EOS"""
    BOS = 256
    EOS = 257
    VOCAB_SIZE = 258

    def encode(self, text: str) -> List[int]:
        return list(text.encode('utf-8'))

    def decode(self, ids: Sequence[int]) -> str:
        return bytes(i for i in ids if i < 256).decode('utf-8', errors='replace')


@dc.dataclass(frozen=True)
class LmDims:
    embed: int = 256
    layers: int = 2
    heads: int = 4
    context: int = 1024
    vocab: int = ByteTokenizer.VOCAB_SIZE

    def __post_init__(self):
        if min(self.embed, self.layers, self.heads, self.context) < 1:
            raise UsageError(f'language model dimensions must be positive, got {self}')
        if self.embed % self.heads:
            raise UsageError(f'embedding width {self.embed} is not divisible by {self.heads} heads')


def _positions(count: int, width: int) -> torch.Tensor:
    position = torch.arange(count, dtype=DTYPE).unsqueeze(1)
    rate = torch.exp(torch.arange(0, width, 2, dtype=DTYPE) * (-math.log(10000.0) / width))
    table = torch.zeros(count, width, dtype=DTYPE)
    table[:, 0::2] = torch.sin(position * rate)
    table[:, 1::2] = torch.cos(position * rate[:table[:, 1::2].shape[1]])
    return table


class FrozenLm(nn.Module):
    """Pre-norm causal decoder. Every parameter has requires_grad False; gradients reach the input rows only."""

    def __init__(self, dims: LmDims):
        super().__init__()
        self.dims = dims
        e = dims.embed
        shapes = {'token_embedding': (dims.vocab, e), 'unembed': (e, dims.vocab),
                  'final_norm__weight': (e,), 'final_norm__bias': (e,)}
        for layer in range(dims.layers):
            shapes.update({f'block{layer}__attn_norm__weight': (e,), f'block{layer}__attn_norm__bias': (e,),
                           f'block{layer}__qkv': (e, 3 * e), f'block{layer}__out': (e, e),
                           f'block{layer}__mlp_norm__weight': (e,), f'block{layer}__mlp_norm__bias': (e,),
                           f'block{layer}__mlp_in': (e, 4 * e), f'block{layer}__mlp_out': (4 * e, e)})
        self.params = nn.ParameterDict({name: nn.Parameter(torch.zeros(shape, dtype=DTYPE), requires_grad=False)
                                        for name, shape in sorted(shapes.items())})

    def named_tensors(self) -> List[Tuple[str, torch.Tensor]]:
        return [(name, self.params[name]) for name in sorted(self.params.keys())]

    def token_rows(self, ids: Sequence[int]) -> torch.Tensor:
        return self.params['token_embedding'][torch.tensor(list(ids), dtype=torch.long)]

    @property
    def bos(self) -> torch.Tensor:
        return self.params['token_embedding'][ByteTokenizer.BOS]

    @property
    def eos(self) -> torch.Tensor:
        return self.params['token_embedding'][ByteTokenizer.EOS]

    def _norm(self, x: torch.Tensor, name: str) -> torch.Tensor:
        return F.layer_norm(x, (self.dims.embed,), self.params[f'{name}__weight'], self.params[f'{name}__bias'])

    def _attention(self, x: torch.Tensor, layer: int) -> torch.Tensor:
        count, heads = x.shape[0], self.dims.heads
        q, k, v = (x @ self.params[f'block{layer}__qkv']).split(self.dims.embed, dim=1)
        q, k, v = (t.reshape(count, heads, -1).transpose(0, 1) for t in (q, k, v))
        scores = q @ k.transpose(1, 2) / math.sqrt(q.shape[-1])
        causal = torch.ones(count, count, dtype=torch.bool).triu(1)
        weights = torch.softmax(scores.masked_fill(causal, float('-inf')), dim=-1)
        mixed = (weights @ v).transpose(0, 1).reshape(count, self.dims.embed)
        return mixed @ self.params[f'block{layer}__out']

    def forward(self, rows: torch.Tensor) -> torch.Tensor:
        """Next-token logits of every position
        :param rows: (n, E) input embedding rows
        :return: (n, vocab) logits; row i depends on input rows 0..i only
        """
        if rows.dim() != 2 or rows.shape[1] != self.dims.embed:
            raise DimensionMismatch(f'input rows have shape {tuple(rows.shape)}, expected (n, {self.dims.embed})')
        if rows.shape[0] > self.dims.context:
            raise ContextOverflow(f'{rows.shape[0]} rows exceed the context of {self.dims.context}')
        x = rows + _positions(rows.shape[0], self.dims.embed)
        for layer in range(self.dims.layers):
            x = x + self._attention(self._norm(x, f'block{layer}__attn_norm'), layer)
            hidden = F.gelu(self._norm(x, f'block{layer}__mlp_norm') @ self.params[f'block{layer}__mlp_in'])
            x = x + hidden @ self.params[f'block{layer}__mlp_out']
        return self._norm(x, 'final_norm') @ self.params['unembed']


def init_lm(dims: LmDims = LmDims(), seed: int = 0) -> FrozenLm:
    """Seeded stub model: N(0, 0.02) weights, unit norm gains, zero norm biases"""
    lm = FrozenLm(dims)
    generator = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for name, tensor in lm.named_tensors():
            if name.endswith('norm__weight'):
                tensor.fill_(1.0)
            elif name.endswith('norm__bias'):
                tensor.zero_()
            else:
                tensor.copy_(torch.randn(tensor.shape, generator=generator, dtype=DTYPE) * 0.02)
    return lm


def toy_lm_forward(prompt: Union[torch.Tensor, pp.PromptSequence], lm: FrozenLm) -> torch.Tensor:
    """Next-token logits of an assembled prompt sequence or of bare (n, E) rows"""
    rows = prompt if isinstance(prompt, torch.Tensor) else prompt.rows
    return lm(rows)


def lm_digest(lm: FrozenLm) -> str:
    """sha256 of every language model parameter"""
    return ck.tensor_digest(lm.named_tensors())


def save_lm(lm: FrozenLm, path) -> None:
    header = {'dims': dc.asdict(lm.dims)}
    gs.atomic_write(path, ck.encode_tensors(LM_MAGIC, header, lm.named_tensors()))


def load_lm(path) -> FrozenLm:
    header, tensors = ck.decode_tensors(gs.read_bytes(path), LM_MAGIC, 'language model')
    try:
        lm = FrozenLm(LmDims(**header['dims']))
    except (KeyError, TypeError) as exc:
        raise FormatError(f'corrupt language model header: {exc}') from exc
    if {name: tuple(t.shape) for name, t in tensors.items()} != {n: tuple(t.shape) for n, t in lm.named_tensors()}:
        raise FormatError('language model tensors do not match the recorded dimensions')
    with torch.no_grad():
        for name, tensor in lm.named_tensors():
            tensor.copy_(tensors[name])
    return lm
