import pytest
import torch

import src.graph.features as gf
import src.model.checkpoint as ck
import src.model.gnn as gnn
import src.prompt.lm as lmm
import src.prompt.prompt as pp
from src.errors import ContextOverflow, DimensionMismatch, FormatError, UsageError

from conftest import TINY_DIMS, TINY_LM_DIMS


def _rows(count: int, width: int = TINY_LM_DIMS.embed, seed: int = 0) -> torch.Tensor:
    return torch.randn(count, width, generator=torch.Generator().manual_seed(seed), dtype=lmm.DTYPE)


def test_byte_tokenizer():
    tokenizer = lmm.ByteTokenizer()
    ids = tokenizer.encode('añb')
    assert ids == [97, 0xc3, 0xb1, 98]
    assert tokenizer.decode([lmm.ByteTokenizer.BOS] + ids + [lmm.ByteTokenizer.EOS]) == 'añb'
    assert lmm.ByteTokenizer.VOCAB_SIZE == 258


@pytest.mark.parametrize('kwargs', [dict(embed=0), dict(layers=0), dict(embed=10, heads=4)])
def test_dims_validation(kwargs):
    with pytest.raises(UsageError):
        lmm.LmDims(**kwargs)


def test_stub_is_seeded_and_frozen(tiny_lm):
    again = lmm.init_lm(TINY_LM_DIMS, seed=0)
    other = lmm.init_lm(TINY_LM_DIMS, seed=1)
    assert lmm.lm_digest(again) == lmm.lm_digest(tiny_lm)
    assert lmm.lm_digest(other) != lmm.lm_digest(tiny_lm)
    assert all(not tensor.requires_grad for _, tensor in tiny_lm.named_tensors())
    assert torch.equal(tiny_lm.params['final_norm__weight'],
                       torch.ones(TINY_LM_DIMS.embed, dtype=lmm.DTYPE))


def test_forward_shape(tiny_lm):
    logits = lmm.toy_lm_forward(_rows(5), tiny_lm)
    assert logits.shape == (5, lmm.ByteTokenizer.VOCAB_SIZE)
    assert torch.isfinite(logits).all()


def test_forward_takes_an_assembled_prompt(tiny_lm):
    prompt = pp.assemble_prompt(_rows(1)[0], _rows(3, seed=1), _rows(2, seed=2), tiny_lm)
    logits = lmm.toy_lm_forward(prompt, tiny_lm)
    assert logits.shape == (prompt.length, lmm.ByteTokenizer.VOCAB_SIZE) == (8, lmm.ByteTokenizer.VOCAB_SIZE)
    assert torch.equal(logits, lmm.toy_lm_forward(prompt.rows, tiny_lm))


def test_forward_is_causal(tiny_lm):
    """Changing a later row never changes the logits of earlier rows"""
    rows = _rows(6)
    changed = rows.clone()
    changed[4:] = _rows(2, seed=9)
    before, after = tiny_lm(rows), tiny_lm(changed)
    assert torch.allclose(before[:4], after[:4], atol=1e-12)
    assert not torch.allclose(before[4:], after[4:])


def test_gradients_reach_inputs_only(tiny_lm):
    rows = _rows(4).requires_grad_(True)
    tiny_lm(rows).logsumexp(dim=-1).sum().backward()
    assert rows.grad is not None and rows.grad.abs().sum() > 0
    assert all(tensor.grad is None for _, tensor in tiny_lm.named_tensors())


def test_input_checks(tiny_lm):
    with pytest.raises(DimensionMismatch):
        tiny_lm(_rows(3, width=TINY_LM_DIMS.embed + 1))
    with pytest.raises(ContextOverflow):
        tiny_lm(_rows(TINY_LM_DIMS.context + 1))


def test_save_and_load(tiny_lm, tmp_path):
    path = tmp_path / 'stub.lm'
    lmm.save_lm(tiny_lm, path)
    loaded = lmm.load_lm(path)
    assert loaded.dims == tiny_lm.dims
    assert lmm.lm_digest(loaded) == lmm.lm_digest(tiny_lm)
    rows = _rows(3)
    assert torch.equal(loaded(rows), tiny_lm(rows))


def test_parameter_file_is_not_a_language_model(tmp_path):
    path = tmp_path / 'model.irp'
    ck.save_params(gnn.init_params(gf.FeatureSpec(), TINY_DIMS), path)
    with pytest.raises(FormatError, match='magic'):
        lmm.load_lm(path)
