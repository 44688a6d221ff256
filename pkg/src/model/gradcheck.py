from __future__ import annotations

import dataclasses as dc
from typing import Callable, Dict, List, Tuple

import numpy as np
import torch

"""Central finite-difference check of analytic gradients."""


@dc.dataclass(frozen=True)
class CoordinateCheck:
    name: str
    index: Tuple[int, ...]
    analytic: float
    numeric: float

    @property
    def relative_error(self) -> float:
        # gradients below the floor are compared absolutely
        scale = max(abs(self.analytic), abs(self.numeric), 1e-3)
        return abs(self.analytic - self.numeric) / scale


def finite_difference_check(loss_fn: Callable[[], torch.Tensor], tensors: List[Tuple[str, torch.Tensor]],
                            grads: Dict[str, torch.Tensor], samples: int = 100, eps: float = 1e-5,
                            seed: int = 0) -> List[CoordinateCheck]:
    """Compares analytic gradients with (f(w + eps) - f(w - eps)) / 2 eps on randomly sampled coordinates
    :param loss_fn: recomputes the scalar loss from the current tensor values
    :param tensors: (name, tensor) pairs that may be perturbed in place
    :param grads: analytic gradient per name
    :param samples: number of coordinates, drawn from tensors with a nonzero gradient when any exist
    :param eps: perturbation
    :param seed: sampling seed
    :return: one check per sampled coordinate
    """
    rng = np.random.default_rng(seed)
    candidates = [(name, tensor) for name, tensor in tensors if tensor.numel() and torch.any(grads[name] != 0)]
    if not candidates:
        candidates = [(name, tensor) for name, tensor in tensors if tensor.numel()]
    sizes = np.array([tensor.numel() for _, tensor in candidates], dtype=np.float64)
    checks = []
    with torch.no_grad():
        for _ in range(samples):
            name, tensor = candidates[rng.choice(len(candidates), p=sizes / sizes.sum())]
            index = tuple(int(i) for i in np.unravel_index(rng.integers(tensor.numel()), tuple(tensor.shape)))
            original = tensor[index].item()
            tensor[index] = original + eps
            upper = loss_fn().item()
            tensor[index] = original - eps
            lower = loss_fn().item()
            tensor[index] = original
            checks.append(CoordinateCheck(name, index, grads[name][index].item(), (upper - lower) / (2 * eps)))
    return checks


def max_relative_error(checks: List[CoordinateCheck]) -> float:
    return max((check.relative_error for check in checks), default=0.0)
