"""Minimal LoRA: low-rank adapters injected into attention projections.

The frozen base weight W is augmented as W x + (alpha / r) * B A x with
A (r x in) and B (out x r); B starts at zero so injection is a no-op
until training moves it.
"""

from __future__ import annotations

import math

import torch
from torch import nn


class LoraLinear(nn.Module):
    def __init__(self, base: nn.Linear, rank: int, alpha: float):
        super().__init__()
        self.base = base
        for param in self.base.parameters():
            param.requires_grad = False
        self.rank = rank
        self.scaling = alpha / rank
        self.lora_a = nn.Parameter(torch.empty(rank, base.in_features))
        self.lora_b = nn.Parameter(torch.zeros(base.out_features, rank))
        nn.init.kaiming_uniform_(self.lora_a, a=math.sqrt(5))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.base(x) + self.scaling * (x @ self.lora_a.T @ self.lora_b.T)


def inject_lora(model: nn.Module, rank: int, alpha: float,
                target_suffixes: tuple[str, ...] = ("q_proj", "v_proj")) -> int:
    """Wrap matching linear submodules in-place; returns how many."""
    wrapped = 0
    for module in list(model.modules()):
        for name, child in list(module.named_children()):
            if isinstance(child, nn.Linear) and name.endswith(target_suffixes):
                setattr(module, name, LoraLinear(child, rank, alpha))
                wrapped += 1
    return wrapped
