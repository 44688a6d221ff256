import json

import numpy as np
import pytest

import src.bench.corpus as bc
import src.bench.toy_tasks as tt
import src.model.checkpoint as ck
import src.model.gnn as gnn
import src.train.pretrain as pt
from src.config import TrainConfig
from src.errors import EmptyInput, UsageError


@pytest.fixture
def graphs(fixture_graphs):
    return [graph for name, graph in sorted(fixture_graphs.items()) if name != 'empty']


def test_batches_cover_each_graph_once_per_epoch():
    cfg = TrainConfig(seed=0, epochs=3, batch_size=4)
    steps = pt.batches(10, cfg, np.random.default_rng(0))
    assert len(steps) == 9
    for epoch in range(3):
        assert sorted(sum(steps[epoch * 3:epoch * 3 + 3], [])) == list(range(10))
    capped = pt.batches(10, TrainConfig(seed=0, epochs=3, batch_size=4, max_steps=5), np.random.default_rng(0))
    assert capped == steps[:5]


def test_max_steps_runs_past_the_epochs():
    """A step budget larger than the epochs hold keeps drawing fresh epochs until it is spent"""
    steps = pt.batches(10, TrainConfig(seed=0, epochs=3, batch_size=4), np.random.default_rng(0))
    extended = pt.batches(10, TrainConfig(seed=0, epochs=1, batch_size=4, max_steps=7), np.random.default_rng(0))
    assert extended == steps[:7]
    assert pt.batches(0, TrainConfig(seed=0, max_steps=3), np.random.default_rng(0)) == []


def test_pretraining_needs_graphs_and_a_seed(graphs, tiny_config):
    with pytest.raises(EmptyInput):
        pt.pretrain([], tiny_config())
    with pytest.raises(UsageError):
        pt.pretrain(graphs, tiny_config(seed=None))


def test_pretraining_is_reproducible(graphs, tiny_config):
    """The same seed yields the same losses and bit-identical parameters"""
    cfg = tiny_config(max_steps=4, learning_rate=1e-3)
    first = pt.pretrain(graphs, cfg)
    second = pt.pretrain(graphs, cfg)
    assert [r.loss for r in first.records] == [r.loss for r in second.records]
    assert [r.masked_kind for r in first.records] == [r.masked_kind for r in second.records]
    assert ck.tensor_digest(first.params.named_tensors()) == ck.tensor_digest(second.params.named_tensors())
    assert len(first.records) == 4
    assert all(len(r.masked_kind) <= cfg.batch_size for r in first.records)


def test_pretraining_moves_the_parameters(graphs, tiny_config):
    cfg = tiny_config(max_steps=2)
    initial = gnn.init_params(graphs[0].feature_spec, pt.dims_of(cfg), cfg.seed)
    trained = pt.pretrain(graphs, cfg).params
    assert ck.tensor_digest(initial.named_tensors()) != ck.tensor_digest(trained.named_tensors())
    assert trained.dims == pt.dims_of(cfg)


def test_checkpoint_and_metrics_are_written(graphs, tiny_config, tmp_path):
    out = tmp_path / 'pretrained.irp'
    cfg = tiny_config(max_steps=3)
    result = pt.pretrain(graphs, cfg, out=out)
    loaded, config = ck.load_params_with_config(out)
    assert config['command'] == 'pretrain'
    assert config['seed'] == cfg.seed
    assert ck.tensor_digest(loaded.named_tensors()) == ck.tensor_digest(result.params.named_tensors())
    lines = pt.metrics_path(out).read_text().splitlines()
    assert [json.loads(line)['step'] for line in lines] == [1, 2, 3]
    assert pt.metrics_path(out).name == 'pretrained.irp.metrics.jsonl'


def test_pretraining_continues_from_given_parameters(graphs, tiny_config):
    cfg = tiny_config(max_steps=1)
    start = pt.pretrain(graphs, cfg).params
    before = ck.tensor_digest(start.named_tensors())
    continued = pt.pretrain(graphs, cfg, init=start).params
    assert continued is start
    assert ck.tensor_digest(continued.named_tensors()) != before


@pytest.mark.slow
def test_masked_loss_halves_on_a_toy_corpus(tmp_path):
    """Two hundred steps on fifty graphs at lr 1e-4 halve the masked loss"""
    corpus = tt.make_toy_corpus('cfg-loop', 50, seed=7, out_dir=tmp_path)
    graphs = bc.load_graph_paths([item.path for item in corpus.items])
    cfg = TrainConfig(seed=7, learning_rate=1e-4, epochs=30, max_steps=200, hidden1=64, hidden2=64, embed=32)
    result = pt.pretrain(graphs, cfg)
    losses = [record.loss for record in result.records]
    assert len(losses) == 200
    assert np.mean(losses[-10:]) <= 0.5 * np.mean(losses[:10])
    again = pt.pretrain(graphs, cfg)
    assert ck.tensor_digest(again.params.named_tensors()) == ck.tensor_digest(result.params.named_tensors())
