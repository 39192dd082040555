import json
import struct

import numpy as np
import pytest

from model_adapters.extract import ExtractorConfig, extract_latents
from model_adapters.ltnt import read_latents, write_latents


def write_claims(path, texts):
    rows = [{"id": f"c{i}", "claim": t} for i, t in enumerate(texts)]
    path.write_text("\n".join(json.dumps(r) for r in rows) + "\n")


class TestLtntFormat:
    def test_roundtrip(self, tmp_path):
        records = [("a", np.arange(12, dtype=np.float32).reshape(4, 3)),
                   ("b", np.ones((4, 3), dtype=np.float32))]
        path = tmp_path / "x.ltnt"
        write_latents(path, records)
        loaded = read_latents(path)
        assert [cid for cid, _ in loaded] == ["a", "b"]
        for (_, got), (_, want) in zip(loaded, records):
            assert np.array_equal(got, want)

    def test_header_layout(self, tmp_path):
        path = tmp_path / "x.ltnt"
        write_latents(path, [("only", np.zeros((2, 5), dtype=np.float32))])
        raw = path.read_bytes()
        assert raw[:4] == b"LTNT"
        version, count, layers, hidden = struct.unpack("<IIII", raw[4:20])
        assert (version, count, layers, hidden) == (1, 1, 2, 5)

    def test_shape_mismatch_rejected(self, tmp_path):
        records = [("a", np.zeros((2, 3), dtype=np.float32)),
                   ("b", np.zeros((3, 3), dtype=np.float32))]
        with pytest.raises(ValueError):
            write_latents(tmp_path / "x.ltnt", records)


class TestExtract:
    def test_five_claims_toy_model_header(self, tmp_path, toy_checkpoint):
        claims = tmp_path / "claims.jsonl"
        write_claims(claims, [f"claim number {i} about {i * 7} units"
                              for i in range(5)])
        out = tmp_path / "latents.ltnt"
        cfg = ExtractorConfig(checkpoint=str(toy_checkpoint), output_path=str(out))
        extract_latents(claims, cfg)
        records = read_latents(out)
        assert len(records) == 5
        assert all(data.shape == (4, 16) for _, data in records)

    def test_embedding_layer_flag_adds_one(self, tmp_path, toy_checkpoint):
        claims = tmp_path / "claims.jsonl"
        write_claims(claims, ["a single claim"])
        out = tmp_path / "latents.ltnt"
        cfg = ExtractorConfig(checkpoint=str(toy_checkpoint), output_path=str(out),
                              include_embedding_layer=True)
        extract_latents(claims, cfg)
        (_, data), = read_latents(out)
        assert data.shape == (5, 16)

    def test_same_claim_twice_identical_records(self, tmp_path, toy_checkpoint):
        claims = tmp_path / "claims.jsonl"
        text = "the very same claim text"
        claims.write_text(
            json.dumps({"id": "a", "claim": text}) + "\n"
            + json.dumps({"id": "b", "claim": text}) + "\n"
        )
        out = tmp_path / "latents.ltnt"
        extract_latents(claims, ExtractorConfig(checkpoint=str(toy_checkpoint),
                                                output_path=str(out)))
        (_, first), (_, second) = read_latents(out)
        assert np.array_equal(first, second)

    def test_repeat_extraction_deterministic(self, tmp_path, toy_checkpoint):
        claims = tmp_path / "claims.jsonl"
        write_claims(claims, ["one claim", "another claim entirely"])
        out_a = tmp_path / "a.ltnt"
        out_b = tmp_path / "b.ltnt"
        for out in (out_a, out_b):
            extract_latents(claims, ExtractorConfig(checkpoint=str(toy_checkpoint),
                                                    output_path=str(out)))
        assert out_a.read_bytes() == out_b.read_bytes()

    def test_batching_does_not_change_results(self, tmp_path, toy_checkpoint):
        claims = tmp_path / "claims.jsonl"
        write_claims(claims, [f"claim {i} with words " + "x " * (i % 5)
                              for i in range(7)])
        outs = []
        for batch_size in (1, 3, 7):
            out = tmp_path / f"b{batch_size}.ltnt"
            extract_latents(claims, ExtractorConfig(
                checkpoint=str(toy_checkpoint), output_path=str(out),
                batch_size=batch_size,
            ))
            outs.append(read_latents(out))
        for (_, a), (_, b), (_, c) in zip(*outs):
            assert np.allclose(a, b, atol=1e-6)
            assert np.allclose(a, c, atol=1e-6)

    def test_empty_claims_rejected(self, tmp_path, toy_checkpoint):
        claims = tmp_path / "claims.jsonl"
        claims.write_text("")
        with pytest.raises(ValueError):
            extract_latents(claims, ExtractorConfig(checkpoint=str(toy_checkpoint),
                                                    output_path=str(tmp_path / "x")))
