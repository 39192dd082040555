"""Locally built toy checkpoints for desk-scale runs and CI.

The sandbox has no model-hub access, so the default preset constructs a
small randomly initialized decoder (seeded, so rebuilds are identical)
and saves it with a hashing tokenizer marker. Anything loadable through
``AutoModel.from_pretrained`` with its own tokenizer works the same way
at real scale.
"""

from __future__ import annotations

from pathlib import Path

import torch
from transformers import LlamaConfig, LlamaModel

from .tokenizer import HashTokenizer


def build_toy_checkpoint(
    directory: str | Path,
    layers: int = 4,
    hidden: int = 16,
    vocab_size: int = 512,
    seed: int = 0,
) -> Path:
    """Create and save a tiny decoder checkpoint; returns its path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    config = LlamaConfig(
        vocab_size=vocab_size,
        hidden_size=hidden,
        intermediate_size=hidden * 2,
        num_hidden_layers=layers,
        num_attention_heads=2,
        num_key_value_heads=2,
        max_position_embeddings=256,
    )
    torch.manual_seed(seed)
    model = LlamaModel(config)
    model.save_pretrained(directory)
    HashTokenizer(vocab_size=vocab_size).save(directory)
    return directory
