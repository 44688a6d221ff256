import numpy as np
import pytest

import src.graph.builder as gb
import src.graph.digest as gd
import src.graph.hetero as hg
import src.graph.kinds as gk
import src.ir.parser as ip

from conftest import IR_DIR, RENAMABLE


def _digest(text: str) -> str:
    return gd.canonical_digest(gb.build_graph(ip.parse_module(text)))


@pytest.mark.parametrize('name', RENAMABLE)
def test_renaming_keeps_the_digest(name, rename):
    """Consistent renaming of every identifier leaves the graph digest unchanged"""
    text = (IR_DIR / f'{name}.ll').read_text()
    assert _digest(rename(text)) == _digest(text)


def test_distinct_programs_have_distinct_digests():
    """Structurally different modules never collide"""
    texts = [(IR_DIR / f'{name}.ll').read_text() for name in RENAMABLE[:8]]
    variants = [
        'define i32 @id(i32 %x) {\nentry:\n  %y = add i32 %x, 1\n  ret i32 %y\n}\n',
        'define i32 @id(i32 %x) {\nentry:\n  %y = sub i32 %x, 1\n  ret i32 %y\n}\n',
        'define i32 @id(i32 %x) {\nentry:\n  %y = add i32 %x, 2\n  ret i32 %y\n}\n',
    ]
    bitwise = (IR_DIR / 'bitwise.ll').read_text()
    lines = bitwise.splitlines()
    lshr, ashr = lines.index('  %l = lshr exact i32 %b, 2'), lines.index('  %r = ashr i32 %a, 31')
    lines[lshr], lines[ashr] = lines[ashr], lines[lshr]
    swapped = '\n'.join(lines) + '\n'
    digests = [_digest(text) for text in texts + variants + [bitwise, swapped]]
    assert len(set(digests)) == len(digests)


def test_digest_ignores_node_ids(fixture_graphs):
    """Random relabeling of every node kind keeps the digest"""
    rng = np.random.default_rng(0)
    for name in ('phi_loop', 'struct', 'globals', 'nested_loops'):
        graph = fixture_graphs[name]
        perms = {kind: rng.permutation(graph.num_nodes(kind)) for kind in gk.NodeKind}
        assert gd.canonical_digest(hg.relabel_nodes(graph, perms)) == gd.canonical_digest(graph)


def test_digest_ignores_provenance(fixture_graphs):
    graph = fixture_graphs['calls']
    other = hg.HeteroGraph.create(dict(graph.features), dict(graph.edges), graph.feature_spec,
                                  hg.Provenance('elsewhere.ll', 'f' * 64))
    assert gd.canonical_digest(other) == gd.canonical_digest(graph)


def test_digest_shape(fixture_graphs):
    digest = gd.canonical_digest(fixture_graphs['identity'])
    assert len(digest) == 64
    int(digest, 16)


def test_refinement_stops_when_stable(fixture_graphs):
    graph = fixture_graphs['matrix']
    history = gd.refine_colours(graph)
    assert 1 <= len(history) <= gd.MAX_ROUNDS + 1
    classes = [len(set(colours.values())) for colours in history]
    assert classes == sorted(set(classes))


def test_relabel_rejects_non_permutations(fixture_graphs):
    graph = fixture_graphs['identity']
    with pytest.raises(ValueError):
        hg.relabel_nodes(graph, {gk.NodeKind.VALUE: np.array([0, 0])})
