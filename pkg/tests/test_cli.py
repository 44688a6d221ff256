import io
import json

import pytest

import src.irgraph as cli
import src.prompt.finetune as ft
import src.prompt.lm as lmm

from conftest import IR_DIR, UNSUPPORTED_DIR

TINY_FLAGS = ['--hidden1', '4', '--hidden2', '4', '--embed', '8', '--batch-size', '4']


def run(*argv, environ=None):
    """Runs one command line; returns exit code, stdout and stderr"""
    stdout, stderr = io.StringIO(), io.StringIO()
    code = cli.dispatch([str(arg) for arg in argv], environ={} if environ is None else environ, stdout=stdout,
                        stderr=stderr)
    return code, stdout.getvalue(), stderr.getvalue()


def run_json(*argv, environ=None):
    code, out, err = run(*argv, '--json', environ=environ)
    assert code == 0, err
    return json.loads(out)


@pytest.fixture
def corpus_dir(tmp_path):
    out = tmp_path / 'corpus'
    doc = run_json('make-corpus', '--task', 'value-kind', '--samples', 12, '--seed', 3, '-o', out)
    assert doc['samples'] == 12
    assert doc['labels'] == {'0': 6, '1': 6}
    return out


@pytest.fixture
def trained(corpus_dir, tmp_path):
    model = tmp_path / 'model.irp'
    doc = run_json('train', '--corpus', corpus_dir, '-o', model, '--seed', 1, '--max-steps', 2, *TINY_FLAGS)
    assert doc['steps'] == 2
    assert doc['train_size'] + doc['test_size'] == 12
    return model


def test_usage():
    for argv in ([], ['--help']):
        code, out, _ = run(*argv)
        assert code == 0
        assert 'commands:' in out and 'make-corpus' in out


def test_command_help_exits_cleanly():
    code, _, _ = run('parse', '--help')
    assert code == 0


def test_unknown_command():
    code, _, err = run('compile', 'x.ll')
    assert code == 2
    assert err.startswith('error[E_USAGE]')


def test_parse_summary():
    doc = run_json('parse', IR_DIR / 'identity.ll', '--print')
    assert doc['functions'] == 1 and doc['declarations'] == 0
    assert doc['instructions'] == 1
    assert '@id' in doc['text']
    code, out, _ = run('parse', IR_DIR / 'identity.ll')
    assert code == 0
    assert '1 functions' in out


def test_unsupported_constructs():
    path = UNSUPPORTED_DIR / 'inline_asm.ll'
    code, _, err = run('parse', path, '--json')
    assert code == 3
    assert json.loads(err)['error'] == 'E_UNSUPPORTED'
    doc = run_json('parse', path, '--lenient', '--report-subset')
    assert doc['subset_report']['inline_asm'] == 1
    assert doc['skipped']


def test_syntax_and_io_errors(tmp_path):
    bad = tmp_path / 'bad.ll'
    bad.write_text('define i32 @f( {\n')
    code, _, err = run('parse', bad, '--json')
    assert code == 2
    assert json.loads(err)['error'] == 'E_SYNTAX'
    code, _, err = run('parse', tmp_path / 'missing.ll')
    assert code == 2
    assert 'E_IO' in err


def test_environment_limits_input_size():
    code, _, err = run('parse', IR_DIR / 'matrix.ll', environ={'IRGRAPH_MAX_INPUT_BYTES': '16'})
    assert code == 2
    assert 'E_TOO_LARGE' in err
    code, _, err = run('parse', IR_DIR / 'identity.ll', environ={'IRGRAPH_THREADS': 'many'})
    assert code == 2


def test_graph_store_and_digest(tmp_path):
    out = tmp_path / 'calls.irg'
    built = run_json('graph', IR_DIR / 'calls.ll', '-o', out, '--digest')['graphs'][0]
    assert built['output'] == str(out)
    assert built['census']['nodes']['Module'] == 1
    stored = run_json('graph', out, '--digest')['graphs'][0]
    assert stored['digest'] == built['digest']
    assert stored['census'] == built['census']
    code, _, _ = run('graph', IR_DIR / 'calls.ll', IR_DIR / 'identity.ll', '-o', out)
    assert code == 2


def test_graph_out_dir(tmp_path):
    doc = run_json('graph', IR_DIR / 'identity.ll', IR_DIR / 'struct.ll', '--out-dir', tmp_path, '--threads', 2)
    assert [g['source'] for g in doc['graphs']] == ['identity.ll', 'struct.ll']
    assert (tmp_path / 'identity.irg').exists() and (tmp_path / 'struct.irg').exists()


def test_pretrain(corpus_dir, tmp_path):
    out = tmp_path / 'pre.irp'
    code, _, err = run('pretrain', '--corpus', corpus_dir, '-o', out, *TINY_FLAGS)
    assert code == 2 and 'seed' in err
    doc = run_json('pretrain', '--corpus', corpus_dir, '-o', out, '--max-steps', 2, *TINY_FLAGS,
                   environ={'IRGRAPH_SEED': '5'})
    assert doc['steps'] == 2
    assert doc['config']['seed'] == 5
    assert out.exists()


def test_train_from_a_config_file(corpus_dir, tmp_path):
    config = tmp_path / 'train.json'
    config.write_text(json.dumps({'seed': 2, 'max_steps': 1, 'hidden1': 4, 'hidden2': 4, 'embed': 8}))
    doc = run_json('train', '--corpus', corpus_dir, '-o', tmp_path / 'm.irp', '--config', config, '--max-steps', 3)
    assert doc['steps'] == 3
    assert doc['config']['seed'] == 2


def test_eval_modes(corpus_dir, trained, tmp_path):
    report = tmp_path / 'report.json'
    doc = run_json('eval', '--corpus', corpus_dir, '--gnn', trained, '--metric', 'pairwise', '-o', report)
    assert doc['mode'] == 'head' and doc['samples'] == 12
    assert 0.0 <= doc['value'] <= 1.0
    assert json.loads(report.read_text()) == doc
    prompt = run_json('eval', '--corpus', corpus_dir, '--gnn', trained, '--mode', 'prompt')
    assert prompt['variant'] == 'prompt'
    assert sum(c['count'] for c in prompt['per_class'].values()) == 12


def test_embed_and_prompt_export(trained, tmp_path):
    doc = run_json('embed', IR_DIR / 'calls.ll', '--gnn', trained)
    assert doc['width'] == 8 and len(doc['graph_embedding']) == 8
    rows_path = tmp_path / 'rows.bin'
    with_nodes = run_json('embed', IR_DIR / 'calls.ll', '--gnn', trained, '--nodes', '-o', rows_path)
    assert with_nodes['graph_embedding'] == pytest.approx(doc['graph_embedding'])
    assert ft.decode_prefix(rows_path.read_bytes()).shape == (len(with_nodes['nodes']) + 1, 8)
    prefix = tmp_path / 'calls.prefix'
    exported = run_json('prompt-export', IR_DIR / 'calls.ll', '--gnn', trained, '-o', prefix, '--max-nodes', 3)
    assert (exported['rows'], exported['width']) == (4, 8)
    assert ft.decode_prefix(prefix.read_bytes()).shape == (4, 8)


def test_finetune(corpus_dir, tmp_path):
    lm_path = tmp_path / 'stub.lm'
    doc = run_json('finetune', '--corpus', corpus_dir, '-o', tmp_path / 'tuned.irp', '--seed', 0, '--max-steps', 2,
                   '--save-lm', lm_path, *TINY_FLAGS)
    assert doc['steps'] == 2
    assert doc['lm_digest'] == lmm.lm_digest(lmm.load_lm(lm_path))


def test_ablate(tmp_path):
    corpus = tmp_path / 'loops'
    doc = run_json('ablate', '--corpus', corpus, '--task', 'cfg-loop', '--samples', 10, '--targets', 'edge:Cfg',
                   '--seed', 4, '--epochs', 1, *TINY_FLAGS)
    assert [row['variant'] for row in doc['rows']] == ['full', 'edge:Cfg']
    assert doc['config']['task'] == 'cfg-loop'
    assert 'node:Value' in doc['mirror_table']
    code, _, err = run('ablate', '--corpus', corpus, '--targets', 'node:Module', '--seed', 4, '--json')
    assert code == 2
    assert json.loads(err)['error'] == 'E_ABLATE'


def test_graph_accepts_huge_constants():
    """Constants past every magnitude bound land in the open-ended classes instead of failing the build"""
    built = run_json('graph', IR_DIR / 'huge_constants.ll')['graphs'][0]
    assert built['census']['nodes']['Value'] > 0
