import pytest
import torch

import src.model.adamw as aw


def _tensors(seed: int):
    generator = torch.Generator().manual_seed(seed)
    return [torch.randn(3, 4, generator=generator, dtype=torch.float64, requires_grad=True),
            torch.randn(5, generator=generator, dtype=torch.float64, requires_grad=True)]


def test_matches_reference_adamw():
    """Ten steps agree with torch.optim.AdamW on the same gradients"""
    ours, reference = _tensors(0), _tensors(0)
    optimizer = aw.AdamW(ours, lr=1e-2, betas=(0.9, 0.99), eps=1e-8, weight_decay=0.1)
    expected = torch.optim.AdamW(reference, lr=1e-2, betas=(0.9, 0.99), eps=1e-8, weight_decay=0.1)
    generator = torch.Generator().manual_seed(1)
    for _ in range(10):
        grads = [torch.randn(t.shape, generator=generator, dtype=torch.float64) for t in ours]
        for tensor, other, grad in zip(ours, reference, grads):
            tensor.grad = grad.clone()
            other.grad = grad.clone()
        optimizer.step()
        expected.step()
    for tensor, other in zip(ours, reference):
        assert torch.allclose(tensor, other, rtol=1e-10, atol=1e-12)


def test_decay_applies_without_gradient():
    """A tensor the loss never touched still decays, and nothing else moves it"""
    tensor = torch.ones(4, dtype=torch.float64, requires_grad=True)
    optimizer = aw.AdamW([tensor], lr=0.1, weight_decay=0.5)
    optimizer.step()
    assert torch.allclose(tensor.detach(), torch.full((4,), 0.95, dtype=torch.float64))


def test_adamw_step_from_named_gradients():
    tensors = _tensors(2)
    named = [('a', tensors[0]), ('b', tensors[1])]
    before = [t.detach().clone() for t in tensors]
    optimizer = aw.AdamW.from_config(tensors, aw.AdamWConfig(learning_rate=0.01, weight_decay=0.0))
    aw.adamw_step(named, {'a': torch.ones(3, 4, dtype=torch.float64)}, optimizer)
    # first Adam step moves each coordinate by lr against the gradient sign
    assert torch.allclose(tensors[0].detach(), before[0] - 0.01, atol=1e-8)
    assert torch.equal(tensors[1].detach(), before[1])
    assert all(t.grad is None for t in tensors)


@pytest.mark.parametrize('kwargs', [dict(lr=0), dict(eps=-1.0), dict(betas=(1.0, 0.9)), dict(weight_decay=-0.1)])
def test_rejects_invalid_hyperparameters(kwargs):
    with pytest.raises(ValueError):
        aw.AdamW(_tensors(0), **kwargs)


def test_first_step_closed_form():
    """After one step the bias-corrected moments are g and g squared, so w1 = w0 (1 - lr wd) - lr g / (|g| + eps)"""
    tensors = _tensors(3)
    start = [t.detach().clone() for t in tensors]
    generator = torch.Generator().manual_seed(4)
    grads = [torch.randn(t.shape, generator=generator, dtype=torch.float64) for t in tensors]
    lr, wd, eps = 0.05, 0.2, 1e-3
    optimizer = aw.AdamW(tensors, lr=lr, betas=(0.8, 0.95), eps=eps, weight_decay=wd)
    aw.adamw_step([('a', tensors[0]), ('b', tensors[1])], {'a': grads[0], 'b': grads[1]}, optimizer)
    for tensor, w0, g in zip(tensors, start, grads):
        expected = w0 - lr * wd * w0 - lr * g / (g.abs() + eps)
        assert torch.allclose(tensor.detach(), expected, rtol=0, atol=1e-12)


def test_zero_gradient_without_decay_is_a_no_op():
    tensors = _tensors(5)
    start = [t.detach().clone() for t in tensors]
    optimizer = aw.AdamW(tensors, lr=0.1, weight_decay=0.0)
    for _ in range(5):
        aw.adamw_step([('a', tensors[0]), ('b', tensors[1])], {'a': torch.zeros(3, 4, dtype=torch.float64)},
                      optimizer)
    for tensor, w0 in zip(tensors, start):
        assert torch.equal(tensor.detach(), w0)
