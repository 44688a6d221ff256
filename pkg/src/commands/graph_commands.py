from __future__ import annotations

import pathlib as pl
from typing import List

import src.bench.corpus as bc
import src.commands.common as cm
import src.graph.digest as gd
import src.graph.hetero as hg
import src.graph.store as gs
import src.graph.validate as gv
import src.ir.parser as ip
import src.ir.printer as pr
import src.ir.subset as su
import src.model.checkpoint as ck
import src.model.gnn as gnn
import src.prompt.finetune as ft
import src.util as u
import src.utility.arg_parser as apu
import src.utility.cmd_enum as ce
from src.config import GlobalConfig
from src.errors import InternalInconsistency, UsageError

"""Commands working on single files: parsing, graph building, embedding and soft prompt export."""


def parse_cmd_func(params: List[str], config: GlobalConfig) -> ce.Outcome:
    parser = apu.command_parser('parse', 'parse an LLVM IR file and summarise the module')
    parser.add_argument('file', help='.ll file')
    parser.add_argument('--lenient', action='store_true', help='skip unsupported constructs instead of failing')
    parser.add_argument('--report-subset', action='store_true', help='count lines using unsupported constructs')
    parser.add_argument('--print', action='store_true', help='print the module back as IR text')
    args = apu.parse(parser, params, config)

    text = ip.read_ir_text(args.file, args.global_config.max_input_bytes)
    doc = {'path': args.file}
    lines = []
    if args.report_subset:
        report = su.subset_report(text)
        doc['subset_report'] = {construct: count for construct, count in report}
        lines += ['unsupported constructs:', u.format_counts(doc['subset_report'])]
    module = ip.parse_module(text, args.lenient, args.global_config.max_input_bytes, name=pl.Path(args.file).name)
    definitions = [f for f in module.functions if not f.is_declaration]
    doc.update({
        'functions': len(definitions),
        'declarations': len(module.functions) - len(definitions),
        'globals': len(module.globals),
        'named_types': len(module.named_types),
        'instructions': sum(len(list(f.instructions())) for f in module.functions),
        'skipped': [{'construct': s.construct, 'line': s.line} for s in module.skipped],
    })
    lines.insert(0, f'{args.file}: {doc["functions"]} functions, {doc["declarations"]} declarations, '
                    f'{doc["globals"]} globals, {doc["instructions"]} instructions')
    if module.skipped:
        lines.append(f'skipped {len(module.skipped)} constructs')
    if args.print:
        doc['text'] = pr.print_module(module)
        lines.append(doc['text'])
    return cm.outcome(args, doc, '\n'.join(lines))


def _graph_doc(name: str, g: hg.HeteroGraph, with_digest: bool) -> dict:
    doc = {'source': name, 'census': hg.census(g).to_json(), 'provenance': g.provenance.digest}
    if with_digest:
        doc['digest'] = gd.canonical_digest(g)
    return doc


def _graph_text(doc: dict) -> str:
    census = doc['census']
    lines = [f'{doc["source"]}: {sum(census["nodes"].values())} nodes, {sum(census["edges"].values())} edges',
             'nodes:', u.format_counts(census['nodes']), 'edges:', u.format_counts(census['edge_kinds'])]
    if 'digest' in doc:
        lines.append(f'digest: {doc["digest"]}')
    if 'output' in doc:
        lines.append(f'wrote {doc["output"]}')
    return '\n'.join(lines)


def graph_cmd_func(params: List[str], config: GlobalConfig) -> ce.Outcome:
    parser = apu.command_parser('graph', 'build program graphs from LLVM IR files, or summarise stored graphs')
    parser.add_argument('files', nargs='+', help='.ll sources or .irg graphs')
    parser.add_argument('-o', '--output', help='graph file to write (single input)')
    parser.add_argument('--out-dir', help='directory receiving one <name>.irg per input')
    parser.add_argument('--lenient', action='store_true', help='skip unsupported constructs instead of failing')
    parser.add_argument('--digest', action='store_true', help='print the relabeling-invariant graph digest')
    args = apu.parse(parser, params, config)
    if args.output and len(args.files) > 1:
        raise UsageError('-o takes a single input; use --out-dir for several')

    paths = [pl.Path(f) for f in args.files]
    graphs = cm.load_inputs(paths, args)
    docs = []
    for path, g in zip(paths, graphs):
        report = gv.validate_graph(g)
        if not report.ok:
            raise InternalInconsistency(f'{path} yields an invalid graph: {", ".join(report.rules())}')
        doc = _graph_doc(path.name, g, args.digest)
        target = args.output or (pl.Path(args.out_dir) / f'{path.stem}{bc.GRAPH_SUFFIX}' if args.out_dir else None)
        if target is not None:
            gs.save_graph(g, target)
            doc['output'] = str(target)
        docs.append(doc)
    return cm.outcome(args, {'graphs': docs}, '\n\n'.join(_graph_text(doc) for doc in docs))


def _format_vector(values) -> str:
    return '[' + ', '.join(f'{v:.6f}' for v in values) + ']'


def embed_cmd_func(params: List[str], config: GlobalConfig) -> ce.Outcome:
    parser = apu.command_parser('embed', 'compute the graph embedding of one file with a trained GNN')
    parser.add_argument('file', help='.ll source or .irg graph')
    parser.add_argument('--gnn', required=True, help='parameter checkpoint')
    parser.add_argument('--nodes', action='store_true', help='also emit the projected node rows')
    parser.add_argument('-o', '--output', help='write the rows as a binary matrix (graph row, then node rows)')
    parser.add_argument('--lenient', action='store_true', help='skip unsupported constructs instead of failing')
    args = apu.parse(parser, params, config)

    p = ck.load_params(args.gnn)
    g = cm.load_inputs([pl.Path(args.file)], args)[0]
    p.check_graph(g)
    rows = ft.prefix_rows(g, p) if args.nodes else gnn.forward(g, p)[1].detach().unsqueeze(0)
    doc = {'source': args.file, 'width': int(rows.shape[1]), 'graph_embedding': rows[0].tolist()}
    lines = [f'graph embedding ({rows.shape[1]}): {_format_vector(doc["graph_embedding"])}']
    if args.nodes:
        doc['nodes'] = rows[1:].tolist()
        lines += [f'node {i}: {_format_vector(row)}' for i, row in enumerate(doc['nodes'])]
    if args.output:
        gs.atomic_write(args.output, ft.encode_prefix(rows))
        doc['output'] = args.output
    return cm.outcome(args, doc, '\n'.join(lines))


def prompt_export_cmd_func(params: List[str], config: GlobalConfig) -> ce.Outcome:
    parser = apu.command_parser('prompt-export', 'write the soft prompt prefix rows of one graph')
    parser.add_argument('file', help='.irg graph or .ll source')
    parser.add_argument('--gnn', required=True, help='parameter checkpoint')
    parser.add_argument('-o', '--output', required=True, help='binary matrix: <II rows, width> then <f4 rows')
    parser.add_argument('--max-nodes', type=int, help='node-row cap')
    parser.add_argument('--lenient', action='store_true', help='skip unsupported constructs instead of failing')
    args = apu.parse(parser, params, config)

    p = ck.load_params(args.gnn)
    g = cm.load_inputs([pl.Path(args.file)], args)[0]
    p.check_graph(g)
    rows, width = ft.export_prefix(g, p, args.output, args.max_nodes)
    doc = {'source': args.file, 'rows': rows, 'width': width, 'output': args.output}
    return cm.outcome(args, doc, f'wrote {rows} x {width} prefix rows to {args.output}')
