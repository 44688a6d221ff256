import pytest

import src.bench.classifier as cl
import src.bench.corpus as bc
import src.bench.toy_tasks as tt
import src.graph.features as gf
import src.model.gnn as gnn
import src.model.gradcheck as gc
from src.config import TrainConfig
from src.errors import DegenerateLabels, EmptyInput, UsageError

from conftest import TINY_DIMS


@pytest.fixture
def toy(tmp_path):
    corpus = tt.make_toy_corpus('value-kind', 12, seed=1, out_dir=tmp_path)
    return corpus, bc.load_graph_paths([item.path for item in corpus.items])


def test_classification_gradients(fixture_graphs):
    """Cross-entropy gradients agree with central differences, head included"""
    p = gnn.init_params(gf.FeatureSpec(), TINY_DIMS, seed=5, classes=3)
    objective = cl.ClassificationObjective(2)
    loss, grads = gnn.loss_and_gradients(fixture_graphs['switch'], p, objective)
    assert loss > 0
    assert grads['classify__weight'].any()
    checks = gc.finite_difference_check(lambda: objective(p, fixture_graphs['switch']), p.named_tensors(), grads)
    assert gc.max_relative_error(checks) <= 1e-4


def test_training_checks_its_inputs(toy, tiny_config):
    corpus, graphs = toy
    with pytest.raises(EmptyInput):
        cl.train_classifier([], [], tiny_config())
    with pytest.raises(EmptyInput):
        cl.train_classifier(graphs, corpus.labels[:-1], tiny_config())
    with pytest.raises(DegenerateLabels):
        cl.train_classifier(graphs, [1] * len(graphs), tiny_config())


def test_training_is_reproducible(toy, tiny_config):
    corpus, graphs = toy
    cfg = tiny_config(max_steps=3)
    first = cl.train_classifier(graphs, corpus.labels, cfg)
    second = cl.train_classifier(graphs, corpus.labels, cfg)
    assert first.losses == second.losses
    assert len(first.losses) == 3
    assert first.params.classes == 2
    assert cl.predict(first.params, graphs) == cl.predict(second.params, graphs)


def test_predict_needs_a_head(fixture_graphs):
    p = gnn.init_params(gf.FeatureSpec(), TINY_DIMS, seed=0)
    with pytest.raises(UsageError):
        cl.predict(p, [fixture_graphs['identity']])


def test_evaluation_report(toy, tiny_config):
    corpus, graphs = toy
    result = cl.train_classifier(graphs, corpus.labels, tiny_config(max_steps=2))
    report = cl.evaluate(result.params, graphs, corpus, 'pairwise', variant='full')
    preds = cl.predict(result.params, graphs)
    assert report.samples == len(corpus)
    assert sum(counts['count'] for counts in report.per_class.values()) == len(corpus)
    assert sum(counts['correct'] for counts in report.per_class.values()) == sum(
        p == label for p, label in zip(preds, corpus.labels))
    assert report.to_json()['per_class'].keys() == {'0', '1'}
    assert 0.0 <= report.value <= 1.0


@pytest.mark.slow
def test_loop_detection_reaches_high_accuracy(tmp_path):
    """Thirty epochs on two hundred loop samples classify the held-out pairs almost perfectly"""
    corpus = tt.make_toy_corpus('cfg-loop', 200, seed=0, out_dir=tmp_path)
    graphs = bc.load_graph_paths([item.path for item in corpus.items])
    cfg = TrainConfig(seed=0, epochs=30, hidden1=64, hidden2=64, embed=32)
    train, test = bc.split_corpus(corpus, cfg.holdout_fraction, cfg.seed)
    result = cl.train_classifier([graphs[i] for i in train], [corpus.labels[i] for i in train], cfg)
    report = cl.evaluate(result.params, [graphs[i] for i in test], corpus.subset(test))
    assert report.value >= 0.95
