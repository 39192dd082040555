"""Per-layer last-token hidden-state extraction to LTNT files."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from transformers import AutoModel

from .ltnt import write_latents
from .tokenizer import HashTokenizer

logger = logging.getLogger(__name__)


@dataclass
class ExtractorConfig:
    checkpoint: str
    output_path: str
    include_embedding_layer: bool = False
    batch_size: int = 8
    device: str = "cpu"
    max_length: int = 128


def load_model_and_tokenizer(checkpoint: str, device: str = "cpu",
                             max_length: int = 128):
    model = AutoModel.from_pretrained(checkpoint)
    model.to(device)
    model.eval()
    if HashTokenizer.exists(checkpoint):
        tokenizer = HashTokenizer.load(checkpoint)
        tokenizer.max_length = max_length
    else:
        from transformers import AutoTokenizer

        hf_tok = AutoTokenizer.from_pretrained(checkpoint)

        class _Wrapped:
            def batch(self, texts):
                enc = hf_tok(texts, return_tensors="pt", padding=True,
                             truncation=True, max_length=max_length)
                return enc["input_ids"], enc["attention_mask"]

        tokenizer = _Wrapped()
    return model, tokenizer


def read_claims(path: str | Path) -> list[tuple[str, str]]:
    claims = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            claims.append((str(obj["id"]), obj["claim"]))
    return claims


@torch.no_grad()
def stack_for_batch(model, tokenizer, texts: list[str], device: str,
                    include_embedding_layer: bool) -> np.ndarray:
    """(batch, L, h) array of final-token hidden states per layer."""
    ids, mask = tokenizer.batch(texts)
    ids, mask = ids.to(device), mask.to(device)
    out = model(input_ids=ids, attention_mask=mask, output_hidden_states=True)
    hidden = out.hidden_states  # embedding output + one per layer
    if not include_embedding_layer:
        hidden = hidden[1:]
    last = mask.sum(dim=1) - 1  # right padding
    rows = torch.arange(ids.shape[0], device=ids.device)
    per_layer = [h[rows, last] for h in hidden]  # each (batch, h)
    return torch.stack(per_layer, dim=1).cpu().numpy()


def extract_latents(claims_path: str | Path, cfg: ExtractorConfig) -> Path:
    """One LTNT record per claim: the last-token hidden state at every
    layer. Runs in eval mode with gradients off, so repeated extraction
    of the same claim is bit-identical.
    """
    claims = read_claims(claims_path)
    if not claims:
        raise ValueError(f"no claims in {claims_path}")
    model, tokenizer = load_model_and_tokenizer(cfg.checkpoint, cfg.device,
                                                cfg.max_length)
    records: list[tuple[str, np.ndarray]] = []
    for start in range(0, len(claims), cfg.batch_size):
        batch = claims[start:start + cfg.batch_size]
        stacks = stack_for_batch(
            model, tokenizer, [text for _, text in batch], cfg.device,
            cfg.include_embedding_layer,
        )
        records.extend(
            (claim_id, stacks[i]) for i, (claim_id, _) in enumerate(batch)
        )
    write_latents(cfg.output_path, records)
    layers, hidden = records[0][1].shape
    logger.info("wrote %d records (L=%d, h=%d) to %s",
                len(records), layers, hidden, cfg.output_path)
    return Path(cfg.output_path)
