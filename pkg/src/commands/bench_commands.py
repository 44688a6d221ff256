from __future__ import annotations

from typing import List

import src.bench.ablation as ab
import src.bench.classifier as cl
import src.bench.corpus as bc
import src.bench.metrics as bm
import src.bench.toy_tasks as tt
import src.commands.common as cm
import src.model.checkpoint as ck
import src.prompt.finetune as ft
import src.util as u
import src.utility.arg_parser as apu
import src.utility.cmd_enum as ce
from src.config import GlobalConfig

"""Benchmark commands: toy corpus generation, evaluation and schema ablation."""

DEFAULT_SAMPLES = 200


def make_corpus_cmd_func(params: List[str], config: GlobalConfig) -> ce.Outcome:
    parser = apu.command_parser('make-corpus', 'write a synthetic labeled corpus of IR files')
    parser.add_argument('--task', required=True, choices=[task.value for task in tt.ToyTask])
    parser.add_argument('--samples', type=int, default=DEFAULT_SAMPLES, help='sample count, rounded down to even')
    parser.add_argument('--seed', type=int, help='generator seed (IRGRAPH_SEED)')
    parser.add_argument('-o', '--output', required=True, help='corpus directory')
    parser.add_argument('--graphs', action='store_true', help='also store .irg graphs and list them in the manifest')
    args = apu.parse(parser, params, config)
    seed = args.seed if args.seed is not None else args.global_config.seed or 0

    corpus = tt.make_toy_corpus(args.task, args.samples, seed, args.output, args.graphs)
    counts = {str(c): corpus.labels.count(c) for c in range(corpus.classes)}
    doc = {'output': args.output, 'task': args.task, 'samples': len(corpus), 'seed': seed, 'labels': counts,
           'manifest': str(bc.manifest_path(args.output))}
    return cm.outcome(args, doc, f'wrote {len(corpus)} {args.task} samples to {args.output}\n'
                                 f'labels:\n{u.format_counts(counts)}')


def eval_cmd_func(params: List[str], config: GlobalConfig) -> ce.Outcome:
    parser = apu.command_parser('eval', 'score a trained checkpoint on a labeled corpus')
    parser.add_argument('--corpus', required=True, help='corpus directory or manifest.jsonl')
    parser.add_argument('--gnn', required=True, help='parameter checkpoint')
    parser.add_argument('--metric', choices=bm.METRICS, default='accuracy')
    parser.add_argument('--mode', choices=('head', 'prompt'), default='head',
                        help='classification head, or answer likelihood under the frozen language model')
    parser.add_argument('--lm', help='language model checkpoint for --mode prompt; the seeded stub when omitted')
    parser.add_argument('--max-nodes', type=int, help='node-row cap of soft prompts')
    parser.add_argument('-o', '--output', help='report JSON to write')
    parser.add_argument('--lenient', action='store_true', help='skip unsupported constructs instead of failing')
    args = apu.parse(parser, params, config)

    corpus = bc.read_manifest(args.corpus)
    graphs = cm.load_inputs([item.path for item in corpus.items], args)
    p = ck.load_params(args.gnn)
    if args.mode == 'head':
        report = cl.evaluate(p, graphs, corpus, args.metric)
    else:
        lm = cm.load_lm(args.lm, p.dims.embed)
        candidates = [str(c) for c in range(corpus.classes)]
        preds = [ft.prompt_classify(g, p, lm, ft.CLASS_QUESTION, candidates, args.max_nodes)[0] for g in graphs]
        report = cl.report_predictions(preds, corpus, args.metric, 'prompt', corpus.classes)
    doc = dict(report.to_json(), mode=args.mode)
    cm.write_report(args.output, doc)
    rows = [(c, counts['count'], counts['correct']) for c, counts in sorted(report.per_class.items())]
    return cm.outcome(args, doc, f'{args.metric}: {report.value:.4f} on {report.samples} samples\n'
                                 + u.format_rows(('class', 'count', 'correct'), rows))


def ablate_cmd_func(params: List[str], config: GlobalConfig) -> ce.Outcome:
    parser = apu.command_parser('ablate', 'retrain with each node and edge kind removed and compare')
    parser.add_argument('--corpus', required=True, help='corpus directory or manifest.jsonl')
    parser.add_argument('--task', choices=[task.value for task in tt.ToyTask],
                        help='first write a toy corpus of this task into --corpus')
    parser.add_argument('--samples', type=int, default=DEFAULT_SAMPLES, help='toy corpus size')
    parser.add_argument('--targets', nargs='*', help='subset of targets, as node:<kind> or edge:<kind>')
    parser.add_argument('--metric', choices=bm.METRICS, default='accuracy')
    parser.add_argument('--gnn', help='pretrained checkpoint every variant starts from')
    parser.add_argument('-o', '--output', help='report JSON to write')
    parser.add_argument('--lenient', action='store_true', help='skip unsupported constructs instead of failing')
    apu.add_train_flags(parser)
    args = apu.parse(parser, params, config)
    cfg = apu.train_config(args)
    seed = cfg.require_seed()
    targets = [ab.parse_target(name) for name in args.targets] if args.targets else ab.ABLATION_TARGETS

    if args.task:
        tt.make_toy_corpus(args.task, args.samples, seed, args.corpus)
    corpus = bc.read_manifest(args.corpus)
    graphs = cm.load_inputs([item.path for item in corpus.items], args)
    init = ck.load_params(args.gnn) if args.gnn else None
    report = ab.run_ablation(corpus, graphs, cfg, args.metric, init, targets)
    doc = report.to_json()
    if args.task:
        doc['config'] = dict(doc['config'], task=args.task, samples=args.samples)
    cm.write_report(args.output, doc)
    rows = [(row.report.variant, f'{row.report.value:.4f}', f'{row.delta:+.4f}',
             ','.join(report.mirror_table.get(row.report.variant, {}).get('mirrored', [])) or '-')
            for row in report.rows]
    return cm.outcome(args, doc, f'{args.metric} on {report.test_size} held-out samples '
                                 f'({report.train_size} trained)\n'
                                 + u.format_rows(('variant', args.metric, 'delta', 'mirrored'), rows))
