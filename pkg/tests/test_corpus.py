import json

import pytest

import src.bench.corpus as bc
import src.graph.store as gs
from src.errors import EmptyInput, FormatError


def _corpus(tmp_path, pairs: int = 4, singles: int = 0) -> bc.LabeledCorpus:
    items = []
    for pair in range(pairs):
        for label in (0, 1):
            path = tmp_path / f'p{pair}-{label}.ll'
            path.write_text(f'; pair {pair} label {label}\n')
            items.append(bc.CorpusItem(path, label, f'p{pair}'))
    for single in range(singles):
        path = tmp_path / f's{single}.ll'
        path.write_text(f'; single {single}\n')
        items.append(bc.CorpusItem(path, single % 2))
    return bc.LabeledCorpus(tuple(items), 2)


def test_manifest_round_trip(tmp_path):
    corpus = _corpus(tmp_path, pairs=2, singles=1)
    bc.write_manifest(corpus, tmp_path)
    records = [json.loads(line) for line in (tmp_path / bc.MANIFEST).read_text().splitlines()]
    assert records[0] == {'path': 'p0-0.ll', 'label': 0, 'pair_id': 'p0'}
    assert 'pair_id' not in records[-1]
    loaded = bc.read_manifest(tmp_path)
    assert loaded.labels == corpus.labels
    assert loaded.pair_ids == corpus.pair_ids
    assert [item.path.resolve() for item in loaded.items] == [item.path.resolve() for item in corpus.items]
    assert loaded.digest() == corpus.digest()
    assert not loaded.paired


def test_digest_follows_file_contents(tmp_path):
    corpus = _corpus(tmp_path, pairs=1)
    before = corpus.digest()
    corpus.items[0].path.write_text('; changed\n')
    assert corpus.digest() != before


@pytest.mark.parametrize('line', ['not json', '{"label": 1}', '{"path": "a.ll", "label": "x"}', '[1, 2]'])
def test_bad_manifest_records(tmp_path, line):
    (tmp_path / bc.MANIFEST).write_text(line + '\n')
    with pytest.raises(FormatError):
        bc.read_manifest(tmp_path)


def test_empty_manifest(tmp_path):
    (tmp_path / bc.MANIFEST).write_text('\n\n')
    with pytest.raises(EmptyInput):
        bc.read_manifest(tmp_path)


def test_corpus_checks_labels_and_pairs(tmp_path):
    path = tmp_path / 'a.ll'
    with pytest.raises(FormatError):
        bc.LabeledCorpus((bc.CorpusItem(path, 2),), 2)
    with pytest.raises(FormatError):
        bc.LabeledCorpus((bc.CorpusItem(path, 0, 'p'), bc.CorpusItem(path, 1, 'q')), 2)


def test_split_keeps_pairs_together(tmp_path):
    corpus = _corpus(tmp_path, pairs=10, singles=3)
    train, test = bc.split_corpus(corpus, 0.25, seed=3)
    assert sorted(train + test) == list(range(len(corpus)))
    held_pairs = {corpus.items[i].pair_id for i in test}
    train_pairs = {corpus.items[i].pair_id for i in train}
    assert not (held_pairs & train_pairs) - {None}
    assert (train, test) == bc.split_corpus(corpus, 0.25, seed=3)
    assert len(test) >= 1 and len(train) >= 1


def test_split_needs_two_groups(tmp_path):
    with pytest.raises(EmptyInput):
        bc.split_corpus(_corpus(tmp_path, pairs=1), 0.5, seed=0)


def test_graph_paths_mix_sources_and_stored_graphs(tmp_path, ir_dir, fixture_graphs):
    stored = tmp_path / 'calls.irg'
    gs.save_graph(fixture_graphs['calls'], stored)
    graphs = bc.load_graph_paths([ir_dir / 'identity.ll', stored])
    assert graphs[0].num_nodes() == fixture_graphs['identity'].num_nodes()
    assert graphs[1].num_nodes() == fixture_graphs['calls'].num_nodes()
