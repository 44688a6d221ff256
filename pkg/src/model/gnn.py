from __future__ import annotations

import dataclasses as dc
import math
import weakref
from typing import Callable, Dict, List, Mapping, Optional, Tuple

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

import src.graph.features as gf
import src.graph.hetero as hg
import src.graph.kinds as gk
from src.errors import NonFiniteLoss, ShapeMismatch

"""Two-layer heterogeneous graph convolution. Every edge type has its own message weights, messages are mean
aggregated per edge type and summed across types at the destination, and the graph embedding is the mean of all
layer-2 node rows projected to the language model width. Node features enter the layers through a per-kind input
projection whose rows are layer-normalized. All math runs in float64."""

DTYPE = torch.float64
LAYERS = (1, 2)
INPUT_NORM_EPS = 1e-5

MASKABLE_KINDS: Tuple[gk.NodeKind, ...] = tuple(kind for kind in gk.NodeKind if kind is not gk.NodeKind.MODULE)


@dc.dataclass(frozen=True)
class GnnDims:
    hidden1: int = 64
    hidden2: int = 64
    embed: int = 256  # E, the language model embedding width

    def __post_init__(self):
        if min(self.hidden1, self.hidden2, self.embed) <= 0:
            raise ValueError(f'model dimensions must be positive, got {self}')


def edge_key(edge_type: gk.EdgeType) -> str:
    return edge_type.name.replace('-', '_').replace('~', '_')


@dc.dataclass(frozen=True)
class NodeEmbeddings:
    rows: Dict[gk.NodeKind, torch.Tensor]  # kind -> (count, h)
    layer: int

    def canonical(self) -> torch.Tensor:
        """All rows stacked in canonical node order"""
        return torch.cat([self.rows[kind] for kind in gk.NodeKind], dim=0)


_TENSORS: 'weakref.WeakKeyDictionary[hg.HeteroGraph, Tuple]' = weakref.WeakKeyDictionary()


def graph_tensors(g: hg.HeteroGraph) -> Tuple[Dict[gk.NodeKind, torch.Tensor], Dict[gk.EdgeType, torch.Tensor]]:
    """float64 features and int64 edge indices of a graph, converted once per graph object"""
    cached = _TENSORS.get(g)
    if cached is None:
        features = {kind: torch.from_numpy(np.array(matrix, dtype=np.float64)) for kind, matrix in g.features.items()}
        edges = {edge_type: torch.from_numpy(np.array(index, dtype=np.int64)) for edge_type, index in g.edges.items()
                 if index.shape[1]}
        cached = (features, edges)
        _TENSORS[g] = cached
    return cached


class GnnParams(nn.Module):
    """All learnable weights: input projections, message/self weights of both layers, pooling projection, mask
    vectors, masked-node prediction heads and an optional classification head.

    The input projection belongs to these parameters: layer 1 sees a node as layer_norm(x @ W_in + b_in), not as its
    raw feature row x. A graph holding only its Module node therefore pools to
    relu(relu(layer_norm(W_in + b_in) @ S1 + b1) @ S2 + b2) @ P + p, with S1, S2 the Module self weights."""

    def __init__(self, spec: gf.FeatureSpec, dims: GnnDims, classes: Optional[int] = None):
        super().__init__()
        self.spec = spec
        self.dims = dims
        self.classes = classes
        self.params = nn.ParameterDict({name: nn.Parameter(torch.zeros(shape, dtype=DTYPE))
                                        for name, shape in sorted(self.shapes().items())})

    def shapes(self) -> Dict[str, Tuple[int, ...]]:
        dims, spec = self.dims, self.spec
        shapes: Dict[str, Tuple[int, ...]] = {}
        for kind in gk.NodeKind:
            shapes[f'input__{kind.value}__weight'] = (spec.width(kind), dims.hidden1)
            shapes[f'input__{kind.value}__bias'] = (dims.hidden1,)
        for layer, (h_in, h_out) in zip(LAYERS, ((dims.hidden1, dims.hidden1), (dims.hidden1, dims.hidden2))):
            for kind in gk.NodeKind:
                shapes[f'layer{layer}__self__{kind.value}'] = (h_in, h_out)
                shapes[f'layer{layer}__bias__{kind.value}'] = (h_out,)
            for edge_type in gk.ALL_EDGE_TYPES:
                shapes[f'layer{layer}__msg__{edge_key(edge_type)}'] = (h_in, h_out)
        shapes['pool__weight'] = (dims.hidden2, dims.embed)
        shapes['pool__bias'] = (dims.embed,)
        for kind in MASKABLE_KINDS:
            shapes[f'mask__{kind.value}'] = (spec.width(kind),)
            shapes[f'head__{kind.value}__weight'] = (dims.hidden2, spec.label_width(kind))
            shapes[f'head__{kind.value}__bias'] = (spec.label_width(kind),)
        if self.classes is not None:
            shapes['classify__weight'] = (dims.embed, self.classes)
            shapes['classify__bias'] = (self.classes,)
        return shapes

    def __getitem__(self, name: str) -> torch.Tensor:
        return self.params[name]

    def named_tensors(self) -> List[Tuple[str, torch.Tensor]]:
        return [(name, self.params[name]) for name in sorted(self.params.keys())]

    def num_entries(self) -> int:
        return sum(tensor.numel() for _, tensor in self.named_tensors())

    def check_graph(self, g: hg.HeteroGraph) -> None:
        for kind in gk.NodeKind:
            width = g.features[kind].shape[1]
            if width != self.spec.width(kind):
                raise ShapeMismatch(f'{kind.value} features have width {width}, parameters expect '
                                    f'{self.spec.width(kind)}')

    def embed_nodes(self, g: hg.HeteroGraph,
                    masked: Optional[Mapping[gk.NodeKind, torch.Tensor]] = None) -> NodeEmbeddings:
        """Layer-2 node embeddings; rows listed in `masked` see their kind's mask vector instead of their features"""
        self.check_graph(g)
        features, edges = graph_tensors(g)
        h = {}
        for kind in gk.NodeKind:
            x = features[kind]
            if masked is not None and kind in masked and x.shape[0]:
                rows = torch.zeros(x.shape[0], dtype=torch.bool)
                rows[masked[kind]] = True
                x = torch.where(rows.unsqueeze(1), self.params[f'mask__{kind.value}'].expand_as(x), x)
            h[kind] = self.input_rows(kind, x)
        for layer in LAYERS:
            h = self._propagate(h, edges, layer)
        return NodeEmbeddings(h, LAYERS[-1])

    def input_rows(self, kind: gk.NodeKind, x: torch.Tensor) -> torch.Tensor:
        """Projects feature rows to width h1 and normalizes every row to zero mean and unit variance"""
        rows = x @ self.params[f'input__{kind.value}__weight'] + self.params[f'input__{kind.value}__bias']
        return F.layer_norm(rows, (rows.shape[1],), eps=INPUT_NORM_EPS)

    def _propagate(self, h: Dict[gk.NodeKind, torch.Tensor], edges: Dict[gk.EdgeType, torch.Tensor],
                   layer: int) -> Dict[gk.NodeKind, torch.Tensor]:
        out = {kind: h[kind] @ self.params[f'layer{layer}__self__{kind.value}'] for kind in gk.NodeKind}
        for edge_type, index in edges.items():
            src, dst = index[0], index[1]
            count = h[edge_type.dst].shape[0]
            messages = h[edge_type.src][src] @ self.params[f'layer{layer}__msg__{edge_key(edge_type)}']
            total = torch.zeros(count, messages.shape[1], dtype=DTYPE).index_add(0, dst, messages)
            degree = torch.zeros(count, dtype=DTYPE).index_add(0, dst, torch.ones(dst.shape[0], dtype=DTYPE))
            out[edge_type.dst] = out[edge_type.dst] + total / degree.clamp(min=1).unsqueeze(1)
        return {kind: F.relu(out[kind] + self.params[f'layer{layer}__bias__{kind.value}']) for kind in gk.NodeKind}

    def project(self, rows: torch.Tensor) -> torch.Tensor:
        return rows @ self.params['pool__weight'] + self.params['pool__bias']

    def pool(self, nodes: NodeEmbeddings) -> torch.Tensor:
        stacked = nodes.canonical()
        return self.project(stacked.mean(dim=0))

    def forward(self, g: hg.HeteroGraph, masked: Optional[Mapping[gk.NodeKind, torch.Tensor]] = None
                ) -> Tuple[NodeEmbeddings, torch.Tensor]:
        nodes = self.embed_nodes(g, masked)
        return nodes, self.pool(nodes)

    def with_classifier(self, classes: int, seed: int) -> GnnParams:
        """Copy of these parameters with a freshly initialized classification head of `classes` outputs"""
        params = GnnParams(self.spec, self.dims, classes)
        generator = torch.Generator().manual_seed(seed)
        with torch.no_grad():
            for name, tensor in params.named_tensors():
                if name in self.params and self.params[name].shape == tensor.shape:
                    tensor.copy_(self.params[name])
                else:
                    _glorot_(name, tensor, generator)
        return params


def _glorot_(name: str, tensor: torch.Tensor, generator: torch.Generator) -> None:
    if name.endswith('bias'):
        tensor.zero_()
        return
    tensor.copy_((torch.rand(tensor.shape, generator=generator, dtype=DTYPE) * 2 - 1) * glorot_bound(tensor))


def glorot_bound(tensor: torch.Tensor) -> float:
    fan_in, fan_out = (tensor.shape[0], tensor.shape[1]) if tensor.dim() == 2 else (1, tensor.shape[0])
    return math.sqrt(6.0 / (fan_in + fan_out))


def init_params(spec: gf.FeatureSpec, dims: GnnDims = GnnDims(), seed: int = 0,
                classes: Optional[int] = None) -> GnnParams:
    """Glorot-uniform weights and zero biases, drawn from one generator in sorted parameter-name order
    :param spec: feature spec fixing the input widths and head sizes
    :param dims: hidden and embedding widths
    :param seed: generator seed
    :param classes: size of the classification head, None for none
    :return: freshly initialized parameters
    """
    params = GnnParams(spec, dims, classes)
    generator = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for name, tensor in params.named_tensors():
            _glorot_(name, tensor, generator)
    return params


def forward(g: hg.HeteroGraph, p: GnnParams) -> Tuple[NodeEmbeddings, torch.Tensor]:
    return p(g)


def node_embeddings_projected(g: hg.HeteroGraph, p: GnnParams) -> torch.Tensor:
    """Layer-2 node rows in canonical order, each projected with the pooling projection to width E"""
    return p.project(p.embed_nodes(g).canonical())


Objective = Callable[[GnnParams, hg.HeteroGraph], torch.Tensor]


def check_finite(loss: torch.Tensor, what: str) -> torch.Tensor:
    if not torch.isfinite(loss).all():
        raise NonFiniteLoss(f'loss became {loss.item()} on {what}; lower the learning rate')
    return loss


def loss_and_gradients(g: hg.HeteroGraph, p: GnnParams, objective: Objective
                       ) -> Tuple[float, Dict[str, torch.Tensor]]:
    """Evaluates an objective and the exact gradient of every parameter
    :param g: input graph
    :param p: parameters
    :param objective: callable returning a scalar loss tensor for (params, graph)
    :return: loss value and gradients by parameter name, zeros for parameters the loss does not touch
    """
    loss = check_finite(objective(p, g), g.provenance.source or 'graph')
    names, tensors = zip(*p.named_tensors())
    grads = torch.autograd.grad(loss, tensors, allow_unused=True)
    return loss.item(), {name: torch.zeros_like(tensor) if grad is None else grad
                         for name, tensor, grad in zip(names, tensors, grads)}
