import math

import numpy as np
import pytest
import torch

import src.graph.features as gf
import src.graph.hetero as hg
import src.graph.kinds as gk
import src.model.gnn as gnn
import src.model.gradcheck as gc
import src.train.masking as mk
from src.errors import NonFiniteLoss, ShapeMismatch

from conftest import TINY_DIMS

SPEC = gf.FeatureSpec()


def _pooled_square(p: gnn.GnnParams, g: hg.HeteroGraph) -> torch.Tensor:
    _, graph_emb = p(g)
    return (graph_emb ** 2).sum()


def test_parameter_shapes():
    p = gnn.init_params(SPEC, TINY_DIMS, seed=0)
    shapes = p.shapes()
    assert shapes['pool__weight'] == (TINY_DIMS.hidden2, TINY_DIMS.embed)
    assert shapes['input__Value__weight'] == (SPEC.width(gk.NodeKind.VALUE), TINY_DIMS.hidden1)
    assert 'mask__Module' not in shapes
    assert 'classify__weight' not in shapes
    for edge_type in gk.ALL_EDGE_TYPES:
        assert f'layer2__msg__{gnn.edge_key(edge_type)}' in shapes
    assert p.num_entries() == sum(int(np.prod(shape)) for shape in shapes.values())
    assert [name for name, _ in p.named_tensors()] == sorted(shapes)


def test_initialization():
    """Same seed, same weights; biases start at zero and weights inside the Glorot bound"""
    first = gnn.init_params(SPEC, TINY_DIMS, seed=5)
    second = gnn.init_params(SPEC, TINY_DIMS, seed=5)
    other = gnn.init_params(SPEC, TINY_DIMS, seed=6)
    for (name, a), (_, b), (_, c) in zip(first.named_tensors(), second.named_tensors(), other.named_tensors()):
        assert a.dtype == gnn.DTYPE
        assert torch.equal(a, b)
        if name.endswith('bias'):
            assert not a.any()
        else:
            assert a.abs().max() <= gnn.glorot_bound(a)
            assert not torch.equal(a, c)


def test_dims_must_be_positive():
    with pytest.raises(ValueError):
        gnn.GnnDims(hidden1=0)


def test_forward_shapes(fixture_graphs):
    p = gnn.init_params(SPEC, TINY_DIMS, seed=0)
    graph = fixture_graphs['calls']
    nodes, graph_emb = gnn.forward(graph, p)
    assert graph_emb.shape == (TINY_DIMS.embed,)
    for kind in gk.NodeKind:
        assert nodes.rows[kind].shape == (graph.num_nodes(kind), TINY_DIMS.hidden2)
    assert nodes.canonical().shape == (graph.num_nodes(), TINY_DIMS.hidden2)
    projected = gnn.node_embeddings_projected(graph, p)
    assert projected.shape == (graph.num_nodes(), TINY_DIMS.embed)
    assert torch.allclose(projected.mean(dim=0), graph_emb)


def test_embeddings_follow_relabeling(fixture_graphs):
    """Node rows move with their nodes and the graph embedding does not change"""
    p = gnn.init_params(SPEC, TINY_DIMS, seed=1)
    graph = fixture_graphs['nested_loops']
    rng = np.random.default_rng(3)
    perms = {kind: rng.permutation(graph.num_nodes(kind)) for kind in gk.NodeKind}
    relabeled = hg.relabel_nodes(graph, perms)
    nodes, emb = gnn.forward(graph, p)
    moved, moved_emb = gnn.forward(relabeled, p)
    assert torch.allclose(emb, moved_emb, atol=1e-12)
    for kind in gk.NodeKind:
        assert torch.allclose(moved.rows[kind][torch.from_numpy(perms[kind])], nodes.rows[kind], atol=1e-12)


def test_spec_mismatch_is_rejected(fixture_graphs):
    p = gnn.init_params(gf.FeatureSpec(size_limit=1024), TINY_DIMS, seed=0)
    with pytest.raises(ShapeMismatch):
        gnn.forward(fixture_graphs['identity'], p)


def test_with_classifier_keeps_trained_weights():
    p = gnn.init_params(SPEC, TINY_DIMS, seed=2)
    headed = p.with_classifier(3, seed=4)
    assert headed.classes == 3
    assert headed['classify__weight'].shape == (TINY_DIMS.embed, 3)
    assert torch.equal(headed['pool__weight'], p['pool__weight'])
    assert not headed['classify__bias'].any()


def test_gradients_match_finite_differences(fixture_graphs):
    p = gnn.init_params(SPEC, TINY_DIMS, seed=0)
    graph = fixture_graphs['phi_loop']
    loss, grads = gnn.loss_and_gradients(graph, p, _pooled_square)
    assert loss > 0
    # the masked-node heads do not take part in this loss
    assert not grads['head__Value__weight'].any()
    checks = gc.finite_difference_check(lambda: _pooled_square(p, graph), p.named_tensors(), grads)
    assert len(checks) == 100
    assert gc.max_relative_error(checks) <= 1e-4


def test_non_finite_loss_is_reported():
    with pytest.raises(NonFiniteLoss):
        gnn.check_finite(torch.tensor(float('nan'), dtype=gnn.DTYPE), 'test graph')


def _random_biases(p: gnn.GnnParams, seed: int) -> gnn.GnnParams:
    generator = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for name, tensor in p.named_tensors():
            if name.endswith('bias') or '__bias__' in name:
                tensor.uniform_(-0.5, 0.5, generator=generator)
    return p


def _layer_norm(row):
    mean = sum(row) / len(row)
    var = sum((v - mean) ** 2 for v in row) / len(row)
    return [(v - mean) / math.sqrt(var + gnn.INPUT_NORM_EPS) for v in row]


def _affine(row, weight, bias):
    """row @ weight + bias on plain lists"""
    return [sum(row[i] * weight[i][j] for i in range(len(row))) + bias[j] for j in range(len(bias))]


def _add(*rows):
    return [sum(values) for values in zip(*rows)]


def _relu(row):
    return [max(v, 0.0) for v in row]


def test_module_only_graph_closed_form(fixture_graphs):
    """Without edges the Module node only takes its self path through both layers"""
    graph = fixture_graphs['empty']
    assert graph.num_nodes() == graph.num_nodes(gk.NodeKind.MODULE) == 1
    p = _random_biases(gnn.init_params(SPEC, TINY_DIMS, seed=3), seed=4)
    with torch.no_grad():
        module_row = torch.from_numpy(graph.features[gk.NodeKind.MODULE].astype(np.float64))
        x = (module_row @ p['input__Module__weight'] + p['input__Module__bias'])[0]
        x = (x - x.mean()) / torch.sqrt(x.var(unbiased=False) + gnn.INPUT_NORM_EPS)
        h1 = torch.relu(x @ p['layer1__self__Module'] + p['layer1__bias__Module'])
        h2 = torch.relu(h1 @ p['layer2__self__Module'] + p['layer2__bias__Module'])
        expected = h2 @ p['pool__weight'] + p['pool__bias']
        _, graph_emb = gnn.forward(graph, p)
    assert torch.allclose(graph_emb, expected, rtol=0, atol=1e-12)


def test_zero_weights_pool_to_the_bias(fixture_graphs):
    p = gnn.init_params(SPEC, TINY_DIMS, seed=0)
    with torch.no_grad():
        for _, tensor in p.named_tensors():
            tensor.zero_()
        nodes, graph_emb = gnn.forward(fixture_graphs['calls'], p)
        assert not nodes.canonical().any()
        assert not graph_emb.any()
        p['pool__bias'].copy_(torch.arange(TINY_DIMS.embed, dtype=gnn.DTYPE))
        _, graph_emb = gnn.forward(fixture_graphs['calls'], p)
    assert torch.equal(graph_emb, p['pool__bias'].detach())


def test_three_node_graph_matches_a_scalar_computation():
    """Module, Value and Type joined by Symbol and TypeOf edges, widths 2, recomputed entry by entry"""
    dims = gnn.GnnDims(hidden1=2, hidden2=2, embed=3)
    value_row = np.zeros(SPEC.width(gk.NodeKind.VALUE), dtype=np.float32)
    value_row[[1, len(SPEC.value_kinds) + 1]] = 1
    type_row = np.zeros(SPEC.width(gk.NodeKind.TYPE), dtype=np.float32)
    type_row[[2, len(SPEC.type_kinds) + 3]] = 1
    features = {gk.NodeKind.MODULE: np.ones((1, 1), dtype=np.float32), gk.NodeKind.VALUE: value_row[None, :],
                gk.NodeKind.TYPE: type_row[None, :]}
    edges = {gk.TYPE_OF: [[0], [0]], gk.SYMBOL_OUT: [[0], [0]], gk.SYMBOL_IN: [[0], [0]]}
    graph = hg.HeteroGraph.create(features, edges, SPEC)
    p = _random_biases(gnn.init_params(SPEC, dims, seed=11), seed=12)
    w = {name: tensor.detach().tolist() for name, tensor in p.named_tensors()}

    M, V, T = 'Module', 'Value', 'Type'
    rows = {M: [1.0], V: value_row.tolist(), T: type_row.tolist()}
    h = {kind: _layer_norm(_affine(rows[kind], w[f'input__{kind}__weight'], w[f'input__{kind}__bias']))
         for kind in (M, V, T)}
    for layer in (1, 2):
        def own(kind):
            return _affine(h[kind], w[f'layer{layer}__self__{kind}'], w[f'layer{layer}__bias__{kind}'])

        def message(kind, edge_type):
            return _affine(h[kind], w[f'layer{layer}__msg__{gnn.edge_key(edge_type)}'], [0.0, 0.0])
        h = {M: _relu(_add(own(M), message(V, gk.SYMBOL_IN))),
             V: _relu(_add(own(V), message(M, gk.SYMBOL_OUT))),
             T: _relu(_add(own(T), message(V, gk.TYPE_OF)))}
    mean = [(h[M][j] + h[V][j] + h[T][j]) / 3 for j in range(2)]
    expected = _affine(mean, w['pool__weight'], w['pool__bias'])

    nodes, graph_emb = gnn.forward(graph, p)
    for kind in (gk.NodeKind.MODULE, gk.NodeKind.VALUE, gk.NodeKind.TYPE):
        assert nodes.rows[kind][0].tolist() == pytest.approx(h[kind.value], abs=1e-12)
    assert graph_emb.tolist() == pytest.approx(expected, abs=1e-12)


def _two_copies(graph: hg.HeteroGraph) -> hg.HeteroGraph:
    features = {kind: np.concatenate([matrix, matrix]) for kind, matrix in graph.features.items()}
    edges = {}
    for edge_type, index in graph.edges.items():
        offset = np.array([[graph.num_nodes(edge_type.src)], [graph.num_nodes(edge_type.dst)]])
        edges[edge_type] = np.concatenate([index, index + offset], axis=1)
    return hg.HeteroGraph.create(features, edges, graph.feature_spec)


def test_disjoint_copies_keep_the_mean_pool(fixture_graphs):
    """Two disjoint copies of a graph, each with its own Module node, pool to the original embedding"""
    p = gnn.init_params(SPEC, TINY_DIMS, seed=8)
    graph = fixture_graphs['struct']
    doubled = _two_copies(graph)
    assert doubled.num_nodes() == 2 * graph.num_nodes()
    nodes, graph_emb = gnn.forward(graph, p)
    twice, twice_emb = gnn.forward(doubled, p)
    assert torch.allclose(twice_emb, graph_emb, rtol=0, atol=1e-12)
    for kind in gk.NodeKind:
        count = graph.num_nodes(kind)
        assert torch.allclose(twice.rows[kind][:count], nodes.rows[kind], rtol=0, atol=1e-12)
        assert torch.allclose(twice.rows[kind][count:], nodes.rows[kind], rtol=0, atol=1e-12)


def test_missing_node_kind_stays_finite(fixture_graphs):
    """A kind without nodes yields an empty matrix and leaves the pooling denominator alone"""
    graph = fixture_graphs['calls']
    features = {kind: matrix for kind, matrix in graph.features.items() if kind is not gk.NodeKind.ATTRIBUTES}
    edges = {edge_type: index for edge_type, index in graph.edges.items()
             if gk.NodeKind.ATTRIBUTES not in (edge_type.src, edge_type.dst)}
    bare = hg.HeteroGraph.create(features, edges, graph.feature_spec)
    assert bare.num_nodes(gk.NodeKind.ATTRIBUTES) == 0
    p = gnn.init_params(SPEC, TINY_DIMS, seed=9)
    nodes, graph_emb = gnn.forward(bare, p)
    assert nodes.rows[gk.NodeKind.ATTRIBUTES].shape == (0, TINY_DIMS.hidden2)
    assert torch.isfinite(graph_emb).all()
    assert torch.allclose(graph_emb, p.project(nodes.canonical().mean(dim=0)))
    _, grads = gnn.loss_and_gradients(bare, p, _pooled_square)
    assert all(torch.isfinite(grad).all() for grad in grads.values())


def test_head_bias_gradient_at_the_zero_point(fixture_graphs):
    """With every parameter zero the logits are zero, so the head bias gradient is softmax(0) - one_hot averaged"""
    graph = fixture_graphs['calls']
    p = gnn.init_params(SPEC, TINY_DIMS, seed=0)
    with torch.no_grad():
        for _, tensor in p.named_tensors():
            tensor.zero_()
    plan = mk.MaskPlan(gk.NodeKind.INSTRUCTION, (0, 1, 2), 0.5)
    _, grads = gnn.loss_and_gradients(graph, p, mk.MaskedNodeObjective(plan))
    width = SPEC.label_width(gk.NodeKind.INSTRUCTION)
    one_hot = torch.nn.functional.one_hot(mk.mask_targets(graph, plan), width).to(gnn.DTYPE)
    expected = torch.full((width,), 1.0 / width, dtype=gnn.DTYPE) - one_hot.mean(dim=0)
    assert torch.allclose(grads['head__Instruction__bias'], expected, rtol=0, atol=1e-12)
    assert not grads['head__Instruction__weight'].any()


def test_doubled_loss_doubles_every_gradient(fixture_graphs):
    graph = fixture_graphs['phi_loop']
    p = gnn.init_params(SPEC, TINY_DIMS, seed=6)
    objective = mk.MaskedNodeObjective(mk.sample_mask(graph, 0.5, 3))
    loss, grads = gnn.loss_and_gradients(graph, p, objective)
    doubled_loss, doubled = gnn.loss_and_gradients(graph, p, lambda params, g: 2 * objective(params, g))
    assert doubled_loss == pytest.approx(2 * loss, rel=1e-15)
    for name, grad in grads.items():
        assert torch.allclose(doubled[name], 2 * grad, rtol=1e-12, atol=0), name
