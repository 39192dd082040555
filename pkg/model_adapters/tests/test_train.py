import csv
import json

import pytest
import torch

from model_adapters.tokenizer import HashTokenizer
from model_adapters.train import (
    FramingError,
    TrainerConfig,
    frame_row,
    load_dataset,
    load_verifier,
    train_verifier,
)

from conftest import keyword_fixture_rows, write_jsonl


class TestFraming:
    def test_template(self):
        row = {"claim": "c", "reasoning": "r", "verdict": "conflicting"}
        assert frame_row(row) == "Claim: c\nReasoning: r\nVerdict: Conflicting"

    def test_unknown_verdict(self):
        with pytest.raises(FramingError):
            frame_row({"claim": "c", "reasoning": "r", "verdict": "maybe"})

    def test_missing_field(self):
        with pytest.raises(FramingError):
            frame_row({"claim": "c", "verdict": "true"})


class TestLoadDataset:
    def test_single_class_rejected(self, tmp_path):
        rows = [{"claim": "c", "reasoning": "r", "verdict": "true", "label": 1}] * 4
        path = tmp_path / "one_class.jsonl"
        write_jsonl(path, rows)
        with pytest.raises(ValueError, match="single class"):
            load_dataset(path)

    def test_non_binary_labels_rejected(self, tmp_path):
        rows = [{"claim": "c", "reasoning": "r", "verdict": "true", "label": 2},
                {"claim": "c", "reasoning": "r", "verdict": "true", "label": 0}]
        path = tmp_path / "bad.jsonl"
        write_jsonl(path, rows)
        with pytest.raises(ValueError):
            load_dataset(path)


class TestTrainVerifier:
    def test_learnable_fixture_high_heldout_accuracy(self, trained_checkpoint):
        manifest = json.loads((trained_checkpoint / "manifest.json").read_text())
        assert manifest["final_val_accuracy"] > 0.95

    def test_loss_curve_csv(self, trained_checkpoint):
        with open(trained_checkpoint / "loss_curve.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 3  # one per epoch
        assert float(rows[-1]["train_loss"]) < float(rows[0]["train_loss"])

    def test_manifest_echoes_reference_defaults(self, tmp_path,
                                                trainer_base_checkpoint):
        data = tmp_path / "train.jsonl"
        write_jsonl(data, keyword_fixture_rows(seed=3, pairs=30))
        cfg = TrainerConfig(base_checkpoint=str(trainer_base_checkpoint),
                            output_dir=str(tmp_path / "ckpt"))
        out = train_verifier(data, cfg)
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["lora_rank"] == 8
        assert manifest["lora_alpha"] == 16.0
        assert manifest["epochs"] == 3
        assert manifest["batch_size"] == 32
        assert manifest["learning_rate"] == 1e-3
        assert manifest["adam_eps"] == 1e-8
        assert manifest["optimizer"] == "AdamW"

    def test_checkpoint_roundtrip_identical_scores(self, trained_checkpoint):
        model, tokenizer, _ = load_verifier(trained_checkpoint)
        model2, _, _ = load_verifier(trained_checkpoint)
        texts = [
            "Claim: x\nReasoning: the audit corroborates it\nVerdict: True",
            "Claim: x\nReasoning: the audit contradicts it\nVerdict: False",
        ]
        ids, mask = tokenizer.batch(texts)
        with torch.no_grad():
            a = model(ids, mask)
            b = model2(ids, mask)
        assert torch.equal(a, b)

    def test_lora_adapters_present_and_base_frozen(self, trained_checkpoint):
        model, _, _ = load_verifier(trained_checkpoint)
        lora_params = [n for n, _ in model.named_parameters() if "lora_" in n]
        assert lora_params, "no LoRA adapters were injected"
        for name, param in model.named_parameters():
            if "lora_" not in name and not name.startswith("head."):
                assert not param.requires_grad, f"{name} should be frozen"


class TestTokenizer:
    def test_deterministic_across_instances(self):
        a = HashTokenizer(vocab_size=512)
        b = HashTokenizer(vocab_size=512)
        assert a.encode("Claim: the report") == b.encode("Claim: the report")

    def test_distinct_words_mostly_distinct_ids(self):
        tok = HashTokenizer(vocab_size=4096)
        words = [f"word{i}" for i in range(50)]
        ids = {tok.encode(w)[1] for w in words}
        assert len(ids) > 45  # rare hash collisions tolerated

    def test_save_load(self, tmp_path):
        HashTokenizer(vocab_size=128, max_length=32).save(tmp_path)
        loaded = HashTokenizer.load(tmp_path)
        assert loaded.vocab_size == 128
        assert loaded.max_length == 32
