from __future__ import annotations

import dataclasses as dc
from typing import Callable, Iterable, Mapping, Optional, Tuple

import torch

"""AdamW with decoupled weight decay. Parameters without a gradient are treated as having a zero gradient, so decay
still applies to them and every step touches the same set of tensors."""


@dc.dataclass(frozen=True)
class AdamWConfig:
    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.01


class AdamW(torch.optim.Optimizer):
    def __init__(self, params: Iterable[torch.Tensor], lr: float = 1e-4, betas: Tuple[float, float] = (0.9, 0.999),
                 eps: float = 1e-8, weight_decay: float = 0.01):
        if lr <= 0.0:
            raise ValueError(f'Invalid learning rate: {lr}')
        if eps < 0.0:
            raise ValueError(f'Invalid epsilon value: {eps}')
        if not 0.0 <= betas[0] < 1.0 or not 0.0 <= betas[1] < 1.0:
            raise ValueError(f'Invalid beta parameters: {betas}')
        if weight_decay < 0.0:
            raise ValueError(f'Invalid weight_decay value: {weight_decay}')
        super().__init__(params, dict(lr=lr, betas=betas, eps=eps, weight_decay=weight_decay))

    @classmethod
    def from_config(cls, params: Iterable[torch.Tensor], cfg: AdamWConfig) -> AdamW:
        return cls(params, cfg.learning_rate, (cfg.beta1, cfg.beta2), cfg.eps, cfg.weight_decay)

    @torch.no_grad()
    def step(self, closure: Optional[Callable[[], float]] = None):
        loss = None
        if closure is not None:
            with torch.enable_grad():
                loss = closure()
        for group in self.param_groups:
            beta1, beta2 = group['betas']
            lr, eps, weight_decay = group['lr'], group['eps'], group['weight_decay']
            for p in group['params']:
                grad = p.grad if p.grad is not None else torch.zeros_like(p)
                state = self.state[p]
                if len(state) == 0:
                    state['step'] = 0
                    state['exp_avg'] = torch.zeros_like(p)
                    state['exp_avg_sq'] = torch.zeros_like(p)
                state['step'] += 1
                t = state['step']
                exp_avg, exp_avg_sq = state['exp_avg'], state['exp_avg_sq']
                exp_avg.mul_(beta1).add_(grad, alpha=1 - beta1)
                exp_avg_sq.mul_(beta2).addcmul_(grad, grad, value=1 - beta2)
                m_hat = exp_avg / (1 - beta1 ** t)
                v_hat = exp_avg_sq / (1 - beta2 ** t)
                # decay uses the pre-update weights
                if weight_decay != 0:
                    p.mul_(1 - lr * weight_decay)
                p.sub_(lr * m_hat / (v_hat.sqrt() + eps))
        return loss


def adamw_step(params: Iterable[Tuple[str, torch.Tensor]], grads: Mapping[str, torch.Tensor],
               optimizer: AdamW) -> None:
    """Applies one update from explicit gradients; the optimizer carries the moment state and the hyperparameters
    :param params: (name, tensor) pairs, as returned by GnnParams.named_tensors
    :param grads: gradient per name; missing names count as zero gradients
    :param optimizer: optimizer built over the same tensors
    """
    for name, tensor in params:
        tensor.grad = grads[name].detach().clone() if name in grads else None
    optimizer.step()
    optimizer.zero_grad(set_to_none=True)
