import json
import random

import pytest
from transformers.utils import logging as hf_logging

from model_adapters import TrainerConfig, build_toy_checkpoint, train_verifier

hf_logging.disable_progress_bar()
hf_logging.set_verbosity_error()

NUMBER_WORDS = ["forty", "fifty", "sixty", "seventy", "eighty", "ninety",
                "twelve", "twenty", "thirty", "eleven"]
POSITIVE_KEYWORD = "corroborates"
NEGATIVE_KEYWORD = "contradicts"


def keyword_fixture_rows(seed: int = 0, pairs: int = 100) -> list[dict]:
    """Mirrored-pair dataset: label 1 iff the reasoning uses the positive
    keyword; every claim/verdict combination appears in both classes."""
    rng = random.Random(seed)
    rows = []
    for i in range(pairs):
        number = NUMBER_WORDS[i % len(NUMBER_WORDS)]
        verdict = ["true", "false", "conflicting"][i % 3]
        claim = f"the report lists {number} units"
        for label in (1, 0):
            keyword = POSITIVE_KEYWORD if label == 1 else NEGATIVE_KEYWORD
            rows.append({
                "claim": claim,
                "reasoning": f"the audit clearly {keyword} the figure "
                             f"and the ledger {keyword} it",
                "verdict": verdict,
                "label": label,
            })
    rng.shuffle(rows)
    return rows


def write_jsonl(path, rows):
    path.write_text("\n".join(json.dumps(r) for r in rows) + "\n")


@pytest.fixture(scope="session")
def toy_checkpoint(tmp_path_factory):
    """4-layer h=16 toy base for extraction tests."""
    directory = tmp_path_factory.mktemp("toy") / "base-4x16"
    return build_toy_checkpoint(directory, layers=4, hidden=16, seed=0)


@pytest.fixture(scope="session")
def trainer_base_checkpoint(tmp_path_factory):
    """Wider 2-layer base: the learnable fixture needs the extra width."""
    directory = tmp_path_factory.mktemp("toy") / "base-2x128"
    return build_toy_checkpoint(directory, layers=2, hidden=128, seed=0)


@pytest.fixture(scope="session")
def trained_checkpoint(tmp_path_factory, trainer_base_checkpoint):
    """Verifier smoke-trained on the keyword fixture (paper-default LoRA
    rank/alpha, lr, and epochs; desk-scale batch)."""
    work = tmp_path_factory.mktemp("train")
    data = work / "train.jsonl"
    write_jsonl(data, keyword_fixture_rows(seed=0))
    cfg = TrainerConfig(
        base_checkpoint=str(trainer_base_checkpoint),
        output_dir=str(work / "ckpt"),
        batch_size=8,
        seed=0,
    )
    return train_verifier(data, cfg)
