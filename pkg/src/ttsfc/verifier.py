"""Verifier training-data construction and the path-scoring client.

A path is a positive example iff its predicted verdict matches the gold
verdict of its claim; negatives are kept deliberately (they give the
scorer its discriminative signal). The positive rate of a built dataset
therefore equals the micro-accuracy of the source runs' paths.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Protocol, Sequence

import httpx

from .core import (
    ClaimRecord,
    ReasoningPath,
    RunRecord,
    Verdict,
    parse_verdict,
    read_jsonl,
    write_jsonl,
)
from .errors import DataError, MissingGold, ScoreOutOfRange, TransportError

# Fixed framing shared by the dataset builder, the scoring service, and
# the trainer, so all three agree byte-for-byte.
FRAME = "Claim: {claim}\nReasoning: {reasoning}\nVerdict: {verdict}"


def frame_example(claim: str, reasoning: str, verdict: Verdict) -> str:
    return FRAME.format(claim=claim, reasoning=reasoning, verdict=verdict.canonical)


def frame_hash(claim: str, reasoning: str, verdict: Verdict) -> str:
    text = frame_example(claim, reasoning, verdict)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class VerifierExample:
    claim: str
    reasoning: str
    predicted: Verdict
    label: int
    evidence: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.label not in (0, 1):
            raise DataError(f"label must be 0 or 1, got {self.label}")


def build_training_data(
    runs: Sequence[RunRecord],
    claims: Mapping[str, ClaimRecord],
    include_evidence: bool = False,
    evidence_texts: Mapping[str, str] | None = None,
) -> list[VerifierExample]:
    """One example per (claim, path) pair across all runs, order-stable.

    Labels follow the match-against-gold rule. Multiple runs of the same
    claim all contribute; deduplication is left to the trainer. Evidence
    is excluded from the example by default; pass `include_evidence`
    plus a doc_id -> text mapping to append it.
    """
    examples: list[VerifierExample] = []
    for run in runs:
        claim = claims.get(run.claim_id)
        if claim is None or claim.gold is None:
            raise MissingGold(run.claim_id)
        evidence: tuple[str, ...] | None = None
        if include_evidence:
            if evidence_texts is None:
                raise DataError("include_evidence requires evidence_texts")
            evidence = tuple(evidence_texts[d] for d in run.evidence_ids)
        for path in run.paths:
            examples.append(
                VerifierExample(
                    claim=claim.claim,
                    reasoning=path.justification,
                    predicted=path.predicted,
                    label=int(path.predicted is claim.gold),
                    evidence=evidence,
                )
            )
    return examples


def positive_rate(examples: Sequence[VerifierExample]) -> float:
    if not examples:
        raise DataError("no examples")
    return sum(e.label for e in examples) / len(examples)


def example_to_dict(ex: VerifierExample) -> dict:
    obj: dict = {
        "claim": ex.claim,
        "reasoning": ex.reasoning,
        "verdict": ex.predicted.value,
        "label": ex.label,
    }
    if ex.evidence is not None:
        obj["evidence"] = list(ex.evidence)
    return obj


def example_from_dict(obj: Mapping) -> VerifierExample:
    evidence = obj.get("evidence")
    return VerifierExample(
        claim=obj["claim"],
        reasoning=obj["reasoning"],
        predicted=parse_verdict(obj["verdict"]),
        label=obj["label"],
        evidence=tuple(evidence) if evidence is not None else None,
    )


def save_examples(path: str | Path, examples: Sequence[VerifierExample]) -> None:
    write_jsonl(path, (example_to_dict(e) for e in examples))


def load_examples(path: str | Path) -> list[VerifierExample]:
    return [example_from_dict(obj) for obj in read_jsonl(path)]


# -- scoring clients -------------------------------------------------------------


class ScoreClient(Protocol):
    def score(self, items: Sequence[dict]) -> list[float]:
        """One score in [0, 1] per item, order-preserving."""
        ...


class HttpScoreClient:
    """Client for the ``POST {base}/v1/score`` wire contract.

    Request: ``{"items": [{"claim", "reasoning", "verdict", "evidence"?}...]}``;
    response: ``{"scores": [float, ...]}``. Non-2xx is a transport error.
    """

    def __init__(self, base_url: str, timeout: float = 60.0,
                 api_key_env: str = "SCORE_API_KEY"):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self.api_key_env = api_key_env

    def score(self, items: Sequence[dict]) -> list[float]:
        headers = {}
        key = os.environ.get(self.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        try:
            resp = httpx.post(
                f"{self.base_url}/v1/score",
                json={"items": list(items)},
                headers=headers,
                timeout=self.timeout,
            )
        except httpx.HTTPError as exc:
            raise TransportError(f"scoring endpoint unreachable: {exc}") from exc
        if resp.status_code != 200:
            raise TransportError(
                f"scoring endpoint returned {resp.status_code}: {resp.text[:200]}"
            )
        scores = resp.json().get("scores")
        if scores is None or len(scores) != len(items):
            raise TransportError("scoring response malformed or wrong length")
        return [float(s) for s in scores]


class FixtureScoreClient:
    """Offline scorer: framed-example hash -> score, loaded from a JSONL
    file of ``{"key_hash": str, "score": float}`` rows.
    """

    def __init__(self, scores: Mapping[str, float], default: float | None = None):
        self._scores = dict(scores)
        self._default = default

    @classmethod
    def from_file(cls, path: str | Path, default: float | None = None
                  ) -> "FixtureScoreClient":
        return cls(
            {row["key_hash"]: float(row["score"]) for row in read_jsonl(path)},
            default=default,
        )

    def score(self, items: Sequence[dict]) -> list[float]:
        out = []
        for item in items:
            key = frame_hash(
                item["claim"], item["reasoning"], parse_verdict(item["verdict"])
            )
            value = self._scores.get(key, self._default)
            if value is None:
                raise TransportError(f"no fixture score for key {key}")
            out.append(value)
        return out


def score_paths(
    claim: ClaimRecord,
    paths: Sequence[ReasoningPath],
    client: ScoreClient,
    evidence: Sequence[str] | None = None,
) -> list[float]:
    """Score each path's (claim, reasoning, verdict) triple, order-preserving."""
    if not paths:
        raise DataError("score_paths needs a nonempty path list")
    items = []
    for path in paths:
        item: dict = {
            "claim": claim.claim,
            "reasoning": path.justification,
            "verdict": path.predicted.value,
        }
        if evidence is not None:
            item["evidence"] = list(evidence)
        items.append(item)
    scores = client.score(items)
    if len(scores) != len(paths):
        raise DataError(
            f"scorer returned {len(scores)} scores for {len(paths)} paths"
        )
    for s in scores:
        if not 0.0 <= s <= 1.0:
            raise ScoreOutOfRange(f"score {s} outside [0, 1]")
    return scores
