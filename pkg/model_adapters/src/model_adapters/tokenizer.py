"""Deterministic hashing tokenizer for locally built toy checkpoints.

Real checkpoints ship their own tokenizer; toy checkpoints built in this
sandbox have none, so words are hashed into a fixed-size vocabulary.
Stable across processes (sha1, not Python's randomized hash).
"""

from __future__ import annotations

import hashlib
import json
import re
from pathlib import Path

import torch

_WORD = re.compile(r"[^\W_]+|[^\w\s]", re.UNICODE)

MARKER_FILE = "hash_tokenizer.json"

PAD_ID = 0
BOS_ID = 1
_RESERVED = 2


class HashTokenizer:
    """Word/punctuation split, lowercase, sha1-bucketed ids."""

    def __init__(self, vocab_size: int = 512, max_length: int = 128):
        if vocab_size <= _RESERVED:
            raise ValueError("vocab_size must exceed the reserved ids")
        self.vocab_size = vocab_size
        self.max_length = max_length

    def _bucket(self, word: str) -> int:
        digest = hashlib.sha1(word.encode("utf-8")).digest()
        span = self.vocab_size - _RESERVED
        return _RESERVED + int.from_bytes(digest[:4], "little") % span

    def encode(self, text: str) -> list[int]:
        ids = [BOS_ID]
        ids += [self._bucket(w.lower()) for w in _WORD.findall(text)]
        return ids[: self.max_length]

    def batch(self, texts: list[str]) -> tuple[torch.Tensor, torch.Tensor]:
        """Right-padded (input_ids, attention_mask) tensors."""
        encoded = [self.encode(t) for t in texts]
        width = max(len(e) for e in encoded)
        ids = torch.full((len(encoded), width), PAD_ID, dtype=torch.long)
        mask = torch.zeros((len(encoded), width), dtype=torch.long)
        for i, row in enumerate(encoded):
            ids[i, : len(row)] = torch.tensor(row, dtype=torch.long)
            mask[i, : len(row)] = 1
        return ids, mask

    def save(self, directory: str | Path) -> None:
        payload = {"vocab_size": self.vocab_size, "max_length": self.max_length}
        (Path(directory) / MARKER_FILE).write_text(json.dumps(payload))

    @classmethod
    def load(cls, directory: str | Path) -> "HashTokenizer":
        payload = json.loads((Path(directory) / MARKER_FILE).read_text())
        return cls(vocab_size=payload["vocab_size"], max_length=payload["max_length"])

    @classmethod
    def exists(cls, directory: str | Path) -> bool:
        return (Path(directory) / MARKER_FILE).is_file()
