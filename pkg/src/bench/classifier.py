from __future__ import annotations

import dataclasses as dc
import logging
from typing import Dict, List, Optional, Sequence

import numpy as np
import torch
import torch.nn.functional as F

import src.bench.corpus as bc
import src.bench.metrics as bm
import src.graph.hetero as hg
import src.model.gnn as gnn
import src.train.pretrain as pt
from src.config import TrainConfig
from src.errors import DegenerateLabels, EmptyInput, UsageError

"""Graph classification: a linear head over the pooled graph embedding, trained jointly with the GNN."""

log = logging.getLogger(__name__)


def classify_logits(p: gnn.GnnParams, g: hg.HeteroGraph) -> torch.Tensor:
    _, graph_embedding = p(g)
    return graph_embedding @ p['classify__weight'] + p['classify__bias']


@dc.dataclass(frozen=True)
class ClassificationObjective:
    label: int

    def __call__(self, p: gnn.GnnParams, g: hg.HeteroGraph) -> torch.Tensor:
        logits = classify_logits(p, g)
        return F.cross_entropy(logits.unsqueeze(0), torch.tensor([self.label], dtype=torch.long))


@dc.dataclass(frozen=True)
class ClassifierResult:
    params: gnn.GnnParams
    losses: List[float]  # mean batch loss per step


def train_classifier(graphs: Sequence[hg.HeteroGraph], labels: Sequence[int], cfg: TrainConfig,
                     init: Optional[gnn.GnnParams] = None, classes: Optional[int] = None) -> ClassifierResult:
    """Fine-tunes GNN and classification head end to end with cross-entropy
    :param graphs: training graphs
    :param labels: class of every graph
    :param cfg: training config; cfg.seed must be set
    :param init: pretrained parameters to start from; a fresh model is drawn from the seed when omitted
    :param classes: head size, by default one more than the largest label
    :return: trained parameters and the loss of every step
    """
    if not graphs or len(graphs) != len(labels):
        raise EmptyInput(f'{len(graphs)} graphs for {len(labels)} labels')
    if len(set(labels)) < 2:
        raise DegenerateLabels(f'training labels hold a single class {sorted(set(labels))}')
    seed = cfg.require_seed()
    classes = classes or max(labels) + 1
    if init is None:
        params = gnn.init_params(graphs[0].feature_spec, pt.dims_of(cfg), seed, classes)
    else:
        params = init.with_classifier(classes, seed)
    optimizer = pt.optimizer_for(params, cfg, cfg.classify_learning_rate)
    rng = np.random.default_rng(seed)
    losses = []
    for step, batch in enumerate(pt.batches(len(graphs), cfg, rng), start=1):
        optimizer.zero_grad(set_to_none=True)
        loss = torch.stack([gnn.check_finite(ClassificationObjective(labels[i])(params, graphs[i]),
                                             graphs[i].provenance.source or f'graph {i}')
                            for i in batch]).mean()
        loss.backward()
        optimizer.step()
        losses.append(loss.item())
        log.info('step %d loss %.6f batch %d', step, losses[-1], len(batch))
    return ClassifierResult(params, losses)


def predict(p: gnn.GnnParams, graphs: Sequence[hg.HeteroGraph]) -> List[int]:
    if p.classes is None:
        raise UsageError('the parameters carry no classification head; train one with the train command')
    with torch.no_grad():
        return [int(torch.argmax(classify_logits(p, g)).item()) for g in graphs]


@dc.dataclass(frozen=True)
class EvalReport:
    metric: str
    value: float
    per_class: Dict[int, Dict[str, int]]
    variant: str = 'full'
    samples: int = 0

    def to_json(self) -> Dict[str, object]:
        return {'metric': self.metric, 'value': self.value, 'variant': self.variant, 'samples': self.samples,
                'per_class': {str(c): counts for c, counts in sorted(self.per_class.items())}}


def evaluate(p: gnn.GnnParams, graphs: Sequence[hg.HeteroGraph], corpus: bc.LabeledCorpus, metric: str = 'accuracy',
             variant: str = 'full') -> EvalReport:
    """Scores the classification head on a labeled corpus
    :param p: parameters with a classification head
    :param graphs: graphs of the corpus items, in corpus order
    :param corpus: labels and pair ids
    :param metric: accuracy, error_rate or pairwise
    :param variant: tag recorded in the report
    :return: metric value with the per-class breakdown
    """
    return report_predictions(predict(p, graphs), corpus, metric, variant, max(corpus.classes, p.classes or 0))


def report_predictions(preds: Sequence[int], corpus: bc.LabeledCorpus, metric: str, variant: str,
                       classes: int) -> EvalReport:
    value = bm.score(metric, preds, corpus.labels, corpus.pair_ids)
    return EvalReport(metric, value, bm.per_class(preds, corpus.labels, classes), variant, len(preds))
