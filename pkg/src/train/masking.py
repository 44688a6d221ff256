from __future__ import annotations

import dataclasses as dc
from typing import Optional, Tuple, Union

import numpy as np
import torch
import torch.nn.functional as F

import src.graph.hetero as hg
import src.graph.kinds as gk
import src.model.gnn as gnn
from src.errors import EmptyGraph, UsageError

"""Masked node-value objective: hide the features of a random subset of one node kind and predict the primary
categorical field of every hidden node from the rest of the graph."""


@dc.dataclass(frozen=True)
class MaskPlan:
    target_kind: gk.NodeKind
    masked_ids: Tuple[int, ...]  # sorted, unique
    mask_rate: float
    rng_seed: Optional[int] = None  # seed the plan was drawn with, when drawn from a seed

    def __post_init__(self):
        if self.target_kind is gk.NodeKind.MODULE:
            raise UsageError('the Module node is never masked')
        if not self.masked_ids:
            raise UsageError('a mask plan needs at least one node')
        if not 0 < self.mask_rate <= 1:
            raise UsageError(f'mask rate must lie in (0, 1], got {self.mask_rate}')

    def masked(self) -> dict:
        return {self.target_kind: torch.tensor(self.masked_ids, dtype=torch.long)}


def mask_count(count: int, rate: float) -> int:
    return min(count, max(1, int(round(rate * count))))


def sample_mask(g: hg.HeteroGraph, rate: float, rng: Union[int, np.random.Generator]) -> MaskPlan:
    """Draws a mask plan: one maskable kind chosen uniformly among kinds with nodes, then
    max(1, round(rate * count)) of its nodes without replacement
    :param g: graph
    :param rate: mask rate in (0, 1]
    :param rng: numpy generator, or a seed to build one from
    :return: mask plan
    """
    seed = rng if isinstance(rng, int) else None
    generator = np.random.default_rng(rng) if seed is not None else rng
    eligible = [kind for kind in gnn.MASKABLE_KINDS if g.num_nodes(kind)]
    if not eligible:
        raise EmptyGraph(f'{g.provenance.source or "graph"} has no node besides the Module node')
    kind = eligible[int(generator.integers(len(eligible)))]
    count = g.num_nodes(kind)
    chosen = generator.choice(count, size=mask_count(count, rate), replace=False)
    return MaskPlan(kind, tuple(sorted(int(i) for i in chosen)), rate, seed)


def mask_targets(g: hg.HeteroGraph, plan: MaskPlan) -> torch.Tensor:
    """Labels of the masked nodes, taken from the stored (unmasked) features: class indices of the primary one-hot
    field, or the multi-hot attribute rows"""
    spec = g.feature_spec
    width = spec.label_width(plan.target_kind)
    rows = g.features[plan.target_kind][list(plan.masked_ids), :width]
    if plan.target_kind is gk.NodeKind.ATTRIBUTES:
        return torch.from_numpy(np.array(rows, dtype=np.float64))
    return torch.from_numpy(np.argmax(rows, axis=1).astype(np.int64))


def head_logits(p: gnn.GnnParams, rows: torch.Tensor, kind: gk.NodeKind) -> torch.Tensor:
    return rows @ p[f'head__{kind.value}__weight'] + p[f'head__{kind.value}__bias']


def masked_loss(g: hg.HeteroGraph, p: gnn.GnnParams, plan: MaskPlan) -> torch.Tensor:
    """Mean prediction loss over the masked nodes: cross-entropy for categorical kinds, mean binary cross-entropy
    over the attribute vocabulary for Attributes nodes"""
    nodes = p.embed_nodes(g, plan.masked())
    index = torch.tensor(plan.masked_ids, dtype=torch.long)
    logits = head_logits(p, nodes.rows[plan.target_kind][index], plan.target_kind)
    targets = mask_targets(g, plan)
    if plan.target_kind is gk.NodeKind.ATTRIBUTES:
        return F.binary_cross_entropy_with_logits(logits, targets)
    return F.cross_entropy(logits, targets)


@dc.dataclass(frozen=True)
class MaskedNodeObjective:
    plan: MaskPlan

    def __call__(self, p: gnn.GnnParams, g: hg.HeteroGraph) -> torch.Tensor:
        return masked_loss(g, p, self.plan)
