"""Secondary acceptance: the LTNT round-trip into the primary package
and the learnable-fixture verifier behind the scoring contract.

Run with: pytest tests/test_acceptance.py -v -s
"""

import json
import random

import httpx

from model_adapters.extract import ExtractorConfig, extract_latents
from model_adapters.server import ScoringServer

from conftest import NEGATIVE_KEYWORD, POSITIVE_KEYWORD


class _criterion:
    def __init__(self, name):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        print(f"ACCEPTANCE {self.name}: {'PASS' if exc_type is None else 'FAIL'}")
        return False


def test_ltnt_roundtrip_into_primary(tmp_path, toy_checkpoint):
    """Extractor output on a toy 4-layer model loads in the primary
    complexity classifier with matching (L, h) and zero shape errors."""
    with _criterion("ltnt-roundtrip"):
        from ttsfc.complexity import fit_prototypes, load_latents

        claims_path = tmp_path / "claims.jsonl"
        rows = [{"id": f"c{i}", "claim": f"fixture claim {i} cites {i * 3} units"}
                for i in range(12)]
        claims_path.write_text("\n".join(json.dumps(r) for r in rows) + "\n")

        out = tmp_path / "latents.ltnt"
        extract_latents(claims_path, ExtractorConfig(
            checkpoint=str(toy_checkpoint), output_path=str(out),
        ))

        stacks = load_latents(out)  # primary-side reader validates shapes
        assert len(stacks) == 12
        assert all((s.layers, s.hidden) == (4, 16) for s in stacks)

        # and the stacks are usable end to end: fit runs without shape errors
        levels = {s.claim_id: i % 2 for i, s in enumerate(stacks)}
        protos = fit_prototypes(stacks, levels)
        assert (protos.layers, protos.hidden) == (4, 16)


def test_learnable_fixture_verifier_and_contract(trained_checkpoint):
    """Smoke-trained verifier exceeds 0.95 held-out accuracy and its
    /v1/score endpoint honors the range/order contract over 1000 probes."""
    with _criterion("learnable-verifier-contract"):
        manifest = json.loads((trained_checkpoint / "manifest.json").read_text())
        assert manifest["final_val_accuracy"] > 0.95

        rng = random.Random(99)
        words = ["audit", "ledger", "figure", "report", "registry",
                 POSITIVE_KEYWORD, NEGATIVE_KEYWORD, "units", "clearly", "total"]
        with ScoringServer(trained_checkpoint) as base:
            items = [
                {
                    "claim": " ".join(rng.choices(words, k=rng.randint(2, 8))),
                    "reasoning": " ".join(rng.choices(words, k=rng.randint(3, 12))),
                    "verdict": rng.choice(["true", "false", "conflicting"]),
                }
                for _ in range(1000)
            ]
            scores = []
            for start in range(0, 1000, 250):
                response = httpx.post(
                    f"{base}/v1/score",
                    json={"items": items[start:start + 250]},
                    timeout=60,
                )
                assert response.status_code == 200
                scores.extend(response.json()["scores"])
            assert len(scores) == 1000
            assert all(0.0 <= s <= 1.0 for s in scores)

            # order preservation spot check against single-item requests
            for index in (0, 499, 999):
                single = httpx.post(
                    f"{base}/v1/score", json={"items": [items[index]]}, timeout=30,
                ).json()["scores"][0]
                assert abs(single - scores[index]) < 1e-6


def test_framing_contract_matches_primary():
    """The trainer, the scoring server, and the primary dataset builder
    must agree on the example framing byte-for-byte."""
    with _criterion("framing-contract"):
        from ttsfc.verifier import FRAME as primary_frame
        from model_adapters.train import FRAME as adapter_frame

        assert adapter_frame == primary_frame
