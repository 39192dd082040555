"""Domain types, the verdict vocabulary, and the model-output parser.

Everything downstream (retrieval, sampling, strategies, evaluation) is
built on the types here. All of them are immutable after construction
and safe to share across threads; the parsers are pure functions.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

from .errors import DataError, MissingLabel, UnknownVerdict


class Verdict(Enum):
    """Three-class verdict vocabulary. The wire value is lowercase."""

    TRUE = "true"
    FALSE = "false"
    CONFLICTING = "conflicting"

    @property
    def canonical(self) -> str:
        """Canonical display form: "True" / "False" / "Conflicting"."""
        return self.value.capitalize()


# Synonyms unify the two label vocabularies that appear in prompt
# exemplars (True/False/Conflicting and SUPPORTS/REFUTES/CONFLICTING).
_VERDICT_SYNONYMS = {
    "true": Verdict.TRUE,
    "supports": Verdict.TRUE,
    "supported": Verdict.TRUE,
    "false": Verdict.FALSE,
    "refutes": Verdict.FALSE,
    "refuted": Verdict.FALSE,
    "conflicting": Verdict.CONFLICTING,
    "conflict": Verdict.CONFLICTING,
    "mixture": Verdict.CONFLICTING,
}

_PUNCT = re.compile(r"[^\w\s]", re.UNICODE)


def parse_verdict(token: str) -> Verdict:
    """Map a verdict token to its `Verdict`, or raise `UnknownVerdict`.

    Case-insensitive and punctuation-stripped, so "TRUE", "(True)" and
    "supports." all parse.
    """
    cleaned = _PUNCT.sub("", token).strip().lower()
    try:
        return _VERDICT_SYNONYMS[cleaned]
    except KeyError:
        raise UnknownVerdict(token) from None


def render_verdict(verdict: Verdict) -> str:
    """Inverse of `parse_verdict` on canonical forms."""
    return verdict.canonical


@dataclass(frozen=True)
class ClaimRecord:
    """A claim with optional gold verdict and metadata; the unit of work."""

    id: str
    claim: str
    gold: Verdict | None = None
    category: str | None = None
    complexity: int | None = None  # 0 or 1 when pre-assigned

    def __post_init__(self):
        if not self.id:
            raise DataError("claim id must be nonempty")
        if not self.claim.strip():
            raise DataError(f"claim {self.id!r} has empty text")
        if self.complexity not in (None, 0, 1):
            raise DataError(f"claim {self.id!r}: complexity must be 0 or 1")


@dataclass(frozen=True)
class ReasoningPath:
    """One sampled (justification, predicted verdict) pair."""

    justification: str
    predicted: Verdict
    raw_response: str
    score: float | None = None

    def __post_init__(self):
        if self.score is not None and not 0.0 <= self.score <= 1.0:
            raise DataError(f"path score {self.score} outside [0, 1]")


class Strategy(Enum):
    TOP1 = "top1"
    SELF_CONSISTENCY = "sc"
    BEST_OF_N = "bon"
    ADAPTIVE = "adaptive"


def majority_verdict(verdicts: Sequence[Verdict]) -> tuple[int, Verdict]:
    """Most frequent verdict and the index of its first occurrence.

    Ties break toward the tied verdict whose first occurrence is
    earliest, which makes the result deterministic under re-runs.
    """
    if not verdicts:
        raise DataError("majority over empty verdict list")
    counts = Counter(verdicts)
    best = max(counts.values())
    for i, v in enumerate(verdicts):
        if counts[v] == best:
            return i, v
    raise AssertionError("unreachable")


@dataclass(frozen=True)
class RunRecord:
    """Per-claim trace: evidence used, all paths, chosen verdict, costs.

    Construction enforces the chosen_index/final_verdict consistency
    contract, so a persisted record can be trusted downstream.
    `unparsed` holds raw completions that failed to parse; they are kept
    for auditability but never vote or get scored.
    """

    claim_id: str
    strategy: Strategy
    evidence_ids: tuple[str, ...]
    paths: tuple[ReasoningPath, ...]
    chosen_index: int
    final_verdict: Verdict
    llm_calls: int
    wall_ms: int
    unparsed: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.paths:
            raise DataError(f"run for {self.claim_id!r} has no paths")
        if not 0 <= self.chosen_index < len(self.paths):
            raise DataError(
                f"run for {self.claim_id!r}: chosen_index {self.chosen_index} "
                f"out of range for {len(self.paths)} paths"
            )
        if self.llm_calls < 0 or self.wall_ms < 0:
            raise DataError(f"run for {self.claim_id!r}: negative cost fields")
        if self.strategy is Strategy.SELF_CONSISTENCY:
            idx, verdict = majority_verdict([p.predicted for p in self.paths])
            if self.final_verdict is not verdict or self.chosen_index != idx:
                raise DataError(
                    f"run for {self.claim_id!r}: self-consistency record does "
                    f"not carry the majority verdict"
                )
        elif self.paths[self.chosen_index].predicted is not self.final_verdict:
            raise DataError(
                f"run for {self.claim_id!r}: final_verdict disagrees with "
                f"chosen path"
            )


# Line-oriented, first-match label extraction: models often restate the
# label in prose later in the completion.
_LABEL_LINE = re.compile(
    r"^[\s\-\*#>]*\[?\s*(?:label|prediction|final\s+verdict)\s*\]?\s*:\s*(?P<token>.*)$",
    re.IGNORECASE,
)
_JUSTIFICATION = re.compile(r"\[?\s*justification\s*\]?\s*:", re.IGNORECASE)


def parse_response(raw: str) -> ReasoningPath:
    """Parse a model completion into a `ReasoningPath`.

    The first line carrying a ``[Label]:`` marker (or the
    ``[Prediction]:`` / ``[Final Verdict]:`` aliases) supplies the
    verdict token; everything after the first ``[Justification]:``
    marker becomes the justification. A missing justification yields an
    empty string, not an error.
    """
    token = None
    for line in raw.splitlines():
        m = _LABEL_LINE.match(line)
        if m:
            token = m.group("token")
            break
    if token is None:
        raise MissingLabel(f"no label marker in completion: {raw[:80]!r}")
    verdict = parse_verdict(token)

    justification = ""
    j = _JUSTIFICATION.search(raw)
    if j:
        justification = raw[j.end():].strip()
    return ReasoningPath(justification=justification, predicted=verdict, raw_response=raw)


# -- dataset / run file formats -----------------------------------------------
#
# Claims: JSONL {"id", "claim", "label"?, "category"?, "complexity"?}
# Runs:   JSONL of RunRecord fields, lowercase verdicts.


def claim_from_dict(obj: Mapping) -> ClaimRecord:
    gold = obj.get("label")
    return ClaimRecord(
        id=str(obj["id"]),
        claim=obj["claim"],
        gold=parse_verdict(gold) if gold is not None else None,
        category=obj.get("category"),
        complexity=obj.get("complexity"),
    )


def claim_to_dict(claim: ClaimRecord) -> dict:
    obj: dict = {"id": claim.id, "claim": claim.claim}
    if claim.gold is not None:
        obj["label"] = claim.gold.value
    if claim.category is not None:
        obj["category"] = claim.category
    if claim.complexity is not None:
        obj["complexity"] = claim.complexity
    return obj


def path_to_dict(path: ReasoningPath) -> dict:
    return {
        "justification": path.justification,
        "predicted": path.predicted.value,
        "raw_response": path.raw_response,
        "score": path.score,
    }


def path_from_dict(obj: Mapping) -> ReasoningPath:
    return ReasoningPath(
        justification=obj["justification"],
        predicted=parse_verdict(obj["predicted"]),
        raw_response=obj.get("raw_response", ""),
        score=obj.get("score"),
    )


def run_to_dict(run: RunRecord) -> dict:
    return {
        "claim_id": run.claim_id,
        "strategy": run.strategy.value,
        "evidence_ids": list(run.evidence_ids),
        "paths": [path_to_dict(p) for p in run.paths],
        "chosen_index": run.chosen_index,
        "final_verdict": run.final_verdict.value,
        "llm_calls": run.llm_calls,
        "wall_ms": run.wall_ms,
        "unparsed": list(run.unparsed),
    }


def run_from_dict(obj: Mapping) -> RunRecord:
    return RunRecord(
        claim_id=obj["claim_id"],
        strategy=Strategy(obj["strategy"]),
        evidence_ids=tuple(obj.get("evidence_ids", ())),
        paths=tuple(path_from_dict(p) for p in obj["paths"]),
        chosen_index=obj["chosen_index"],
        final_verdict=parse_verdict(obj["final_verdict"]),
        llm_calls=obj["llm_calls"],
        wall_ms=obj["wall_ms"],
        unparsed=tuple(obj.get("unparsed", ())),
    )


def read_jsonl(path: str | Path) -> Iterator[dict]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: invalid JSON ({exc})") from exc


def write_jsonl(path: str | Path, rows: Iterable[Mapping]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")


def load_claims(path: str | Path) -> list[ClaimRecord]:
    claims = []
    seen = set()
    for obj in read_jsonl(path):
        claim = claim_from_dict(obj)
        if claim.id in seen:
            raise DataError(f"duplicate claim id {claim.id!r} in {path}")
        seen.add(claim.id)
        claims.append(claim)
    return claims


def load_runs(path: str | Path) -> list[RunRecord]:
    return [run_from_dict(obj) for obj in read_jsonl(path)]


def save_runs(path: str | Path, runs: Iterable[RunRecord]) -> None:
    write_jsonl(path, (run_to_dict(r) for r in runs))


def gold_map(claims: Iterable[ClaimRecord]) -> dict[str, Verdict]:
    """claim_id -> gold verdict, skipping unlabeled claims."""
    return {c.id: c.gold for c in claims if c.gold is not None}
