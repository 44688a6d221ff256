import numpy as np

import src.graph.hetero as hg
import src.graph.kinds as gk
import src.graph.validate as gv


def _with_edges(g: hg.HeteroGraph, **replaced) -> hg.HeteroGraph:
    edges = dict(g.edges)
    for name, index in replaced.items():
        edges[getattr(gk, name)] = np.asarray(index, dtype=np.int64).reshape(2, -1)
    return hg.HeteroGraph.create(dict(g.features), edges, g.feature_spec, g.provenance, g.ablated)


def test_fixture_graphs_are_valid(fixture_graphs):
    for name, graph in fixture_graphs.items():
        report = gv.validate_graph(graph)
        assert report.ok, f'{name}: {report.rules()}'


def test_dangling_endpoint(fixture_graphs):
    graph = fixture_graphs['identity']
    broken = _with_edges(graph, CFG=[[0], [5]])
    report = gv.validate_graph(broken)
    assert report.rules() == ['dangling endpoint']
    assert report.to_json()[0]['ids'] == [0]


def test_missing_and_duplicate_type_of(fixture_graphs):
    graph = fixture_graphs['identity']
    type_of = graph.edges[gk.TYPE_OF]
    assert gv.validate_graph(_with_edges(graph, TYPE_OF=type_of[:, :1])).rules() == ['missing TypeOf']
    doubled = np.concatenate([type_of, type_of[:, :1]], axis=1)
    assert gv.validate_graph(_with_edges(graph, TYPE_OF=doubled)).rules() == ['duplicate TypeOf']


def test_type_of_rule_is_skipped_after_ablation(fixture_graphs):
    graph = fixture_graphs['identity']
    stripped = hg.HeteroGraph.create(dict(graph.features), {**graph.edges, gk.TYPE_OF: hg.empty_edges()},
                                     graph.feature_spec, graph.provenance, ('TypeOf',))
    assert gv.validate_graph(stripped).ok


def test_symbol_reciprocity(fixture_graphs):
    graph = fixture_graphs['identity']
    report = gv.validate_graph(_with_edges(graph, SYMBOL_IN=[[], []]))
    assert 'Symbol reciprocity' in report.rules()


def test_module_count_and_feature_width(fixture_graphs):
    graph = fixture_graphs['identity']
    features = dict(graph.features)
    features[gk.NodeKind.MODULE] = np.zeros((2, 1), dtype=np.float32)
    features[gk.NodeKind.SIZE] = np.full((1, graph.feature_spec.width(gk.NodeKind.SIZE)), np.nan, dtype=np.float32)
    broken = hg.HeteroGraph.create(features, dict(graph.edges), graph.feature_spec, graph.provenance)
    rules = gv.validate_graph(broken).rules()
    assert 'module count' in rules
    assert 'feature width' in rules


def test_edge_type_admissibility():
    """Endpoint kinds outside the signature table are flagged by edge kind"""
    bogus = gk.EdgeType(gk.NodeKind.SIZE, gk.EdgeKind.CFG, gk.NodeKind.SIZE)
    assert not gk.is_admissible(bogus)
    assert gk.is_admissible(gk.CFG.mirrored())
    assert not gk.is_admissible(gk.USES.mirrored())
