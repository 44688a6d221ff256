from __future__ import annotations

import pathlib as pl
from typing import List

import src.bench.classifier as cl
import src.bench.corpus as bc
import src.bench.metrics as bm
import src.commands.common as cm
import src.model.checkpoint as ck
import src.prompt.finetune as ft
import src.prompt.lm as lmm
import src.train.pretrain as pt
import src.utility.arg_parser as apu
import src.utility.cmd_enum as ce
from src.config import GlobalConfig

"""Training commands: masked pretraining, soft prompt fine-tuning and classifier fine-tuning."""


def _loss_summary(losses: List[float]) -> str:
    if not losses:
        return 'no steps run'
    return f'{len(losses)} steps, loss {losses[0]:.6f} -> {losses[-1]:.6f}'


def pretrain_cmd_func(params: List[str], config: GlobalConfig) -> ce.Outcome:
    parser = apu.command_parser('pretrain', 'masked node-value pretraining of the GNN on an unlabeled corpus')
    parser.add_argument('--corpus', required=True, help='directory of .ll/.irg files, or a corpus manifest')
    parser.add_argument('-o', '--output', required=True, help='parameter checkpoint to write')
    parser.add_argument('--init', help='checkpoint to continue from')
    parser.add_argument('--lenient', action='store_true', help='skip unsupported constructs instead of failing')
    apu.add_train_flags(parser)
    args = apu.parse(parser, params, config)
    cfg = apu.train_config(args)
    cfg.require_seed()

    graphs = cm.load_inputs(cm.corpus_paths(args.corpus), args)
    init = ck.load_params(args.init) if args.init else None
    result = pt.pretrain(graphs, cfg, init, pl.Path(args.output))
    losses = [record.loss for record in result.records]
    doc = {'output': args.output, 'metrics': str(pt.metrics_path(pl.Path(args.output))), 'graphs': len(graphs),
           'steps': len(losses), 'initial_loss': losses[0], 'final_loss': losses[-1], 'config': cfg.to_json()}
    return cm.outcome(args, doc, f'pretrained on {len(graphs)} graphs: {_loss_summary(losses)}\n'
                                 f'wrote {args.output}')


def finetune_cmd_func(params: List[str], config: GlobalConfig) -> ce.Outcome:
    parser = apu.command_parser('finetune', 'soft prompt fine-tuning of the GNN against a frozen language model')
    parser.add_argument('--corpus', required=True, help='directory with finetune.jsonl or a labeled manifest')
    parser.add_argument('-o', '--output', required=True, help='parameter checkpoint to write')
    parser.add_argument('--gnn', help='pretrained checkpoint to start from')
    parser.add_argument('--lm', help='language model checkpoint; the seeded stub when omitted')
    parser.add_argument('--save-lm', help='also write the language model used')
    parser.add_argument('--lenient', action='store_true', help='skip unsupported constructs instead of failing')
    apu.add_train_flags(parser)
    args = apu.parse(parser, params, config)
    cfg = apu.train_config(args)
    cfg.require_seed()

    gc = args.global_config
    samples = ft.load_finetune_samples(args.corpus, cm.feature_spec(args), gc.threads, args.lenient,
                                       gc.max_input_bytes)
    init = ck.load_params(args.gnn) if args.gnn else None
    lm = cm.load_lm(args.lm, init.dims.embed if init is not None else cfg.embed)
    if args.save_lm:
        lmm.save_lm(lm, args.save_lm)
    result = ft.finetune(samples, lm, cfg, init, pl.Path(args.output))
    doc = {'output': args.output, 'samples': len(samples), 'steps': len(result.losses),
           'initial_loss': result.losses[0], 'final_loss': result.losses[-1], 'lm_digest': lmm.lm_digest(lm),
           'config': cfg.to_json()}
    return cm.outcome(args, doc, f'fine-tuned on {len(samples)} samples: {_loss_summary(result.losses)}\n'
                                 f'wrote {args.output}')


def train_cmd_func(params: List[str], config: GlobalConfig) -> ce.Outcome:
    parser = apu.command_parser('train', 'train GNN and classification head on a labeled corpus')
    parser.add_argument('--corpus', required=True, help='corpus directory or manifest.jsonl')
    parser.add_argument('-o', '--output', required=True, help='parameter checkpoint to write')
    parser.add_argument('--gnn', help='pretrained checkpoint to start from')
    parser.add_argument('--metric', choices=bm.METRICS, default='accuracy', help='held-out metric to report')
    parser.add_argument('--lenient', action='store_true', help='skip unsupported constructs instead of failing')
    apu.add_train_flags(parser)
    args = apu.parse(parser, params, config)
    cfg = apu.train_config(args)
    seed = cfg.require_seed()

    corpus = bc.read_manifest(args.corpus)
    graphs = cm.load_inputs([item.path for item in corpus.items], args)
    train, test = bc.split_corpus(corpus, cfg.holdout_fraction, seed)
    init = ck.load_params(args.gnn) if args.gnn else None
    result = cl.train_classifier([graphs[i] for i in train], [corpus.labels[i] for i in train], cfg, init,
                                 corpus.classes)
    report = cl.evaluate(result.params, [graphs[i] for i in test], corpus.subset(test), args.metric, 'held-out')
    ck.save_params(result.params, args.output, {'command': 'train', **cfg.to_json()})
    doc = {'output': args.output, 'train_size': len(train), 'test_size': len(test), 'steps': len(result.losses),
           'final_loss': result.losses[-1], 'report': report.to_json(), 'config': cfg.to_json()}
    return cm.outcome(args, doc, f'trained on {len(train)} samples: {_loss_summary(result.losses)}\n'
                                 f'held-out {args.metric}: {report.value:.4f} on {len(test)} samples\n'
                                 f'wrote {args.output}')
