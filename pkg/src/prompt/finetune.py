from __future__ import annotations

import dataclasses as dc
import json
import logging
import pathlib as pl
import struct
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import torch
import torch.nn.functional as F

import src.bench.corpus as bc
import src.graph.features as gf
import src.graph.hetero as hg
import src.graph.store as gs
import src.ir.parser as ip
import src.model.adamw as aw
import src.model.checkpoint as ck
import src.model.gnn as gnn
import src.prompt.lm as lmm
import src.prompt.prompt as pp
import src.train.pretrain as pt
from src.config import TrainConfig
from src.errors import EmptyInput, FormatError, UsageError

"""Soft prompt fine-tuning: graph and node embeddings are prepended to the token embeddings of a question, the frozen
language model predicts the answer, and only the GNN is updated."""

log = logging.getLogger(__name__)

FINETUNE_FILE = 'finetune.jsonl'
CLASS_QUESTION = 'class:'

TOKENIZER = lmm.ByteTokenizer()


@dc.dataclass(frozen=True)
class FinetuneSample:
    graph: hg.HeteroGraph
    question: Tuple[int, ...]  # token ids
    answer: Tuple[int, ...]  # target token ids, at least one

    def __post_init__(self):
        if not self.answer:
            raise UsageError('a fine-tuning sample needs at least one answer token')


def make_sample(g: hg.HeteroGraph, question: str, answer: str) -> FinetuneSample:
    return FinetuneSample(g, tuple(TOKENIZER.encode(question)), tuple(TOKENIZER.encode(answer)))


def build_prompt(p: gnn.GnnParams, g: hg.HeteroGraph, tokens: Sequence[int], lm: lmm.FrozenLm,
                 max_nodes: Optional[int] = None) -> pp.PromptSequence:
    nodes, graph_embedding = p(g)
    return pp.assemble_prompt(graph_embedding, p.project(nodes.canonical()), lm.token_rows(tokens), lm, max_nodes)


def answer_log_probs(p: gnn.GnnParams, lm: lmm.FrozenLm, g: hg.HeteroGraph, question: Sequence[int],
                     answer: Sequence[int], max_nodes: Optional[int] = None, supervise_eos: bool = True
                     ) -> torch.Tensor:
    """Log-probability of every supervised target: each answer token, then EOS when supervised"""
    prompt = build_prompt(p, g, tuple(question) + tuple(answer), lm, max_nodes)
    logits = lm(prompt.rows)
    start, stop = prompt.segments['tokens']
    positions = list(range(start + len(question), stop))
    targets = list(answer)
    if supervise_eos:
        positions.append(prompt.segments['eos'][0])
        targets.append(lmm.ByteTokenizer.EOS)
    # row k - 1 holds the prediction of the token at row k
    rows = F.log_softmax(logits[torch.tensor(positions) - 1], dim=-1)
    return rows.gather(1, torch.tensor(targets, dtype=torch.long).unsqueeze(1)).squeeze(1)


@dc.dataclass(frozen=True)
class NextTokenObjective:
    lm: lmm.FrozenLm
    question: Tuple[int, ...]
    answer: Tuple[int, ...]
    max_nodes: Optional[int] = None
    supervise_eos: bool = True

    def __call__(self, p: gnn.GnnParams, g: hg.HeteroGraph) -> torch.Tensor:
        """Mean next-token cross-entropy over the supervised positions"""
        return -answer_log_probs(p, self.lm, g, self.question, self.answer, self.max_nodes,
                                 self.supervise_eos).mean()


def objective_for(sample: FinetuneSample, lm: lmm.FrozenLm, cfg: TrainConfig) -> NextTokenObjective:
    return NextTokenObjective(lm, sample.question, sample.answer, cfg.max_nodes, cfg.supervise_eos)


def finetune_step(p: gnn.GnnParams, lm: lmm.FrozenLm, samples: Sequence[FinetuneSample], cfg: TrainConfig,
                  optimizer: aw.AdamW) -> float:
    """One AdamW update of the GNN on the mean loss of a batch; the language model is only read
    :return: batch loss before the update
    """
    optimizer.zero_grad(set_to_none=True)
    loss = torch.stack([gnn.check_finite(objective_for(sample, lm, cfg)(p, sample.graph),
                                         sample.graph.provenance.source or 'sample')
                        for sample in samples]).mean()
    loss.backward()
    optimizer.step()
    return loss.item()


@dc.dataclass(frozen=True)
class FinetuneResult:
    params: gnn.GnnParams
    losses: List[float]


def finetune(samples: Sequence[FinetuneSample], lm: lmm.FrozenLm, cfg: TrainConfig,
             init: Optional[gnn.GnnParams] = None, out: Optional[pl.Path] = None) -> FinetuneResult:
    """Soft prompt fine-tuning over shuffled batches
    :param samples: (graph, question, answer) samples
    :param lm: frozen language model; its width must equal the GNN embedding width
    :param cfg: training config; cfg.seed must be set
    :param init: pretrained GNN, freshly initialized from the seed when omitted
    :param out: checkpoint path; the metrics log is written next to it
    :return: trained parameters and the loss of every step
    """
    if not samples:
        raise EmptyInput('fine-tuning needs at least one sample')
    seed = cfg.require_seed()
    params = init if init is not None else gnn.init_params(samples[0].graph.feature_spec, pt.dims_of(cfg), seed)
    optimizer = pt.optimizer_for(params, cfg)
    rng = np.random.default_rng(seed)
    losses = []
    for step, batch in enumerate(pt.batches(len(samples), cfg, rng), start=1):
        losses.append(finetune_step(params, lm, [samples[i] for i in batch], cfg, optimizer))
        log.info('step %d loss %.6f batch %d', step, losses[-1], len(batch))
    if out is not None:
        ck.save_params(params, out, {'command': 'finetune', 'lm_digest': lmm.lm_digest(lm), **cfg.to_json()})
        pt.write_metrics(pt.metrics_path(pl.Path(out)),
                         [pt.StepRecord(step, loss, []) for step, loss in enumerate(losses, start=1)])
    return FinetuneResult(params, losses)


def load_finetune_samples(corpus: Union[str, pl.Path], spec: Optional[gf.FeatureSpec] = None, threads: int = 1,
                          lenient: bool = False, max_bytes: int = ip.DEFAULT_MAX_BYTES) -> List[FinetuneSample]:
    """Reads `finetune.jsonl` ({path, question, answer} records) from a corpus directory; without one, every item
    of the labeled manifest becomes the question `class:` answered by its label"""
    corpus = pl.Path(corpus)
    qa_path = corpus / FINETUNE_FILE
    if qa_path.exists():
        records = []
        lines = gs.read_bytes(qa_path).decode('utf-8').splitlines()
        for number, line in enumerate(lines, start=1):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
                records.append((corpus / doc['path'], str(doc['question']), str(doc['answer'])))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise FormatError(f'{qa_path}:{number}: bad fine-tuning record ({exc})') from exc
    else:
        labeled = bc.read_manifest(corpus)
        records = [(item.path, CLASS_QUESTION, str(item.label)) for item in labeled.items]
    if not records:
        raise EmptyInput(f'{corpus} holds no fine-tuning samples')
    graphs = bc.load_graph_paths([path for path, _, _ in records], spec, threads, lenient, max_bytes)
    return [make_sample(g, question, answer) for g, (_, question, answer) in zip(graphs, records)]


def prompt_classify(g: hg.HeteroGraph, p: gnn.GnnParams, lm: lmm.FrozenLm, question: str,
                    candidates: Sequence[str], max_nodes: Optional[int] = None) -> Tuple[int, List[float]]:
    """Picks the candidate answer the language model finds most likely after the soft prompt
    :return: index of the best candidate and the log-likelihood of each
    """
    if not candidates:
        raise EmptyInput('no candidate answers to score')
    ids = TOKENIZER.encode(question)
    with torch.no_grad():
        scores = [answer_log_probs(p, lm, g, ids, TOKENIZER.encode(candidate), max_nodes).sum().item()
                  for candidate in candidates]
    return int(np.argmax(scores)), scores


def prefix_rows(g: hg.HeteroGraph, p: gnn.GnnParams, max_nodes: Optional[int] = None) -> torch.Tensor:
    """Graph row followed by the node rows: the part of the prompt a language model stack prepends to its text"""
    with torch.no_grad():
        nodes, graph_embedding = p(g)
        node_rows = p.project(nodes.canonical())
    if max_nodes is not None and node_rows.shape[0] > max_nodes:
        log.warning('truncating %d node rows to %d', node_rows.shape[0], max_nodes)
        node_rows = node_rows[:max_nodes]
    return torch.cat([graph_embedding.unsqueeze(0), node_rows], dim=0)


def encode_prefix(rows: torch.Tensor) -> bytes:
    """Header '<II' (row count, width) then row-major little-endian float32 rows"""
    matrix = np.ascontiguousarray(rows.detach().cpu().numpy(), dtype='<f4')
    return struct.pack('<II', matrix.shape[0], matrix.shape[1]) + matrix.tobytes()


def decode_prefix(data: bytes) -> np.ndarray:
    if len(data) < 8:
        raise FormatError('length mismatch: prefix header truncated')
    count, width = struct.unpack('<II', data[:8])
    if len(data) != 8 + 4 * count * width:
        raise FormatError(f'length mismatch: {len(data) - 8} data bytes for {count} x {width} rows')
    return np.frombuffer(data[8:], dtype='<f4').reshape(count, width)


def export_prefix(g: hg.HeteroGraph, p: gnn.GnnParams, path: Union[str, pl.Path],
                  max_nodes: Optional[int] = None) -> Tuple[int, int]:
    rows = prefix_rows(g, p, max_nodes)
    gs.atomic_write(path, encode_prefix(rows))
    return int(rows.shape[0]), int(rows.shape[1])
