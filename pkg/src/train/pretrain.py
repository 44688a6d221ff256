from __future__ import annotations

import dataclasses as dc
import json
import logging
import pathlib as pl
from typing import Dict, List, Optional, Sequence

import numpy as np
import torch

import src.graph.hetero as hg
import src.graph.store as gs
import src.model.adamw as aw
import src.model.checkpoint as ck
import src.model.gnn as gnn
import src.train.masking as mk
from src.config import TrainConfig
from src.errors import EmptyInput

"""Masked pretraining loop: epochs over shuffled batches, one fresh mask plan per graph per step, AdamW updates."""

log = logging.getLogger(__name__)


def dims_of(cfg: TrainConfig) -> gnn.GnnDims:
    return gnn.GnnDims(cfg.hidden1, cfg.hidden2, cfg.embed)


def optimizer_for(p: gnn.GnnParams, cfg: TrainConfig, learning_rate: Optional[float] = None) -> aw.AdamW:
    """AdamW over every parameter tensor, at cfg.learning_rate unless another rate is given"""
    rate = cfg.learning_rate if learning_rate is None else learning_rate
    return aw.AdamW.from_config([tensor for _, tensor in p.named_tensors()],
                                aw.AdamWConfig(rate, cfg.beta1, cfg.beta2, cfg.eps, cfg.weight_decay))


def batches(count: int, cfg: TrainConfig, rng: np.random.Generator) -> List[List[int]]:
    """Batch index lists of every step: per epoch a seeded shuffle cut into batch_size chunks. With max_steps set,
    training runs exactly that many steps, going on past cfg.epochs when the epochs alone fall short."""
    if not count:
        return []
    steps: List[List[int]] = []
    epoch = 0
    while epoch < cfg.epochs or (cfg.max_steps is not None and len(steps) < cfg.max_steps):
        order = rng.permutation(count)
        steps += [order[i:i + cfg.batch_size].tolist() for i in range(0, count, cfg.batch_size)]
        epoch += 1
    return steps[:cfg.max_steps] if cfg.max_steps is not None else steps


@dc.dataclass(frozen=True)
class StepRecord:
    step: int
    loss: float
    masked_kind: List[str]

    def to_json(self) -> Dict[str, object]:
        return {'step': self.step, 'loss': self.loss, 'masked_kind': self.masked_kind}


@dc.dataclass(frozen=True)
class PretrainResult:
    params: gnn.GnnParams
    records: List[StepRecord]


def metrics_path(checkpoint: pl.Path) -> pl.Path:
    return checkpoint.with_name(checkpoint.name + '.metrics.jsonl')


def pretrain(graphs: Sequence[hg.HeteroGraph], cfg: TrainConfig, init: Optional[gnn.GnnParams] = None,
             out: Optional[pl.Path] = None) -> PretrainResult:
    """Masked node-value pretraining
    :param graphs: unlabeled corpus
    :param cfg: training config; cfg.seed must be set
    :param init: starting parameters, freshly initialized from the seed when omitted
    :param out: checkpoint path; the metrics log is written next to it
    :return: trained parameters and the per-step loss records
    """
    if not graphs:
        raise EmptyInput('pretraining needs at least one graph')
    seed = cfg.require_seed()
    params = init if init is not None else gnn.init_params(graphs[0].feature_spec, dims_of(cfg), seed)
    optimizer = optimizer_for(params, cfg)
    rng = np.random.default_rng(seed)
    records = []
    for step, batch in enumerate(batches(len(graphs), cfg, rng), start=1):
        plans = [mk.sample_mask(graphs[i], cfg.mask_rate, rng) for i in batch]
        optimizer.zero_grad(set_to_none=True)
        losses = [gnn.check_finite(mk.masked_loss(graphs[i], params, plan),
                                   graphs[i].provenance.source or f'graph {i}')
                  for i, plan in zip(batch, plans)]
        loss = torch.stack(losses).mean()
        loss.backward()
        optimizer.step()
        record = StepRecord(step, loss.item(), [plan.target_kind.value for plan in plans])
        records.append(record)
        log.info('step %d loss %.6f masked %s', step, record.loss, ','.join(record.masked_kind))
    if out is not None:
        ck.save_params(params, out, {'command': 'pretrain', **cfg.to_json()})
        write_metrics(metrics_path(pl.Path(out)), records)
    return PretrainResult(params, records)


def write_metrics(path: pl.Path, records: List[StepRecord]) -> None:
    text = ''.join(json.dumps(record.to_json(), sort_keys=True) + '\n' for record in records)
    gs.atomic_write(path, text.encode('utf-8'))
