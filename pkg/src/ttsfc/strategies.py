"""Verdict-selection strategies and the per-claim pipeline runner.

Four strategies produce `RunRecord`s: top-1 (single path), self-
consistency (majority vote), best-of-N (verifier argmax), and adaptive
best-of-N (one-shot for level-0 claims, full best-of-N for level-1).
Tie-breaking is fixed (earliest first occurrence for majority, lowest
index for best-of-N) so runs are reproducible.
"""

from __future__ import annotations

import logging
import math
import re
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .core import (
    ClaimRecord,
    ReasoningPath,
    RunRecord,
    Strategy,
    Verdict,
    majority_verdict,
)
from .errors import (
    DataError,
    EmptyDecomposition,
    EmptyPaths,
    LengthMismatch,
    TemplateError,
)
from .gateway import (
    ChatTransport,
    Message,
    PromptTemplate,
    SamplingConfig,
    builtin_template_text,
    parse_sections,
    render_prompt,
    sample_paths,
)
from .retrieval import EvidenceDoc
from .verifier import ScoreClient, score_paths

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StrategyConfig:
    kind: Strategy
    m: int = 10
    with_decomposition: bool = False
    level0_m: int = 1

    def __post_init__(self):
        if self.m < 1:
            raise DataError("m must be >= 1")
        if not 1 <= self.level0_m <= self.m:
            raise DataError("level0_m must satisfy 1 <= level0_m <= m")


def select_top1(paths: Sequence[ReasoningPath]) -> tuple[int, Verdict]:
    """The first (single greedy/sampled) path wins."""
    if not paths:
        raise EmptyPaths("select_top1 over empty path list")
    return 0, paths[0].predicted


def select_majority(paths: Sequence[ReasoningPath]) -> tuple[int, Verdict]:
    """Most frequent verdict; index of its first carrier."""
    if not paths:
        raise EmptyPaths("select_majority over empty path list")
    return majority_verdict([p.predicted for p in paths])


def select_bon(paths: Sequence[ReasoningPath], scores: Sequence[float]
               ) -> tuple[int, Verdict]:
    """Highest-scored path wins; ties break to the lowest index."""
    if not paths:
        raise EmptyPaths("select_bon over empty path list")
    if len(paths) != len(scores):
        raise LengthMismatch(
            f"{len(paths)} paths but {len(scores)} scores"
        )
    for s in scores:
        if not math.isfinite(s):
            raise DataError(f"non-finite score {s}")
    best = max(range(len(scores)), key=lambda i: (scores[i], -i))
    return best, paths[best].predicted


# -- decomposition ---------------------------------------------------------------

_QUESTION_LINE = re.compile(r"^\s*(?:\d+[\.\)]\s*|[-\*]\s*)?(?P<q>.+\?)\s*$")


def parse_subquestions(text: str) -> list[str]:
    """Pull sub-questions out of a numbered-list or line-per-question reply."""
    questions = []
    for line in text.splitlines():
        m = _QUESTION_LINE.match(line)
        if m:
            questions.append(m.group("q").strip())
    return questions


@dataclass(frozen=True)
class DecompositionTemplate:
    system: str
    input_frame: str

    def __post_init__(self):
        if self.input_frame.count("{claim}") != 1:
            raise TemplateError("decomposition input frame needs {claim} once")


def load_decomposition_template(path: str | Path | None = None) -> DecompositionTemplate:
    text = Path(path).read_text(encoding="utf-8") if path else builtin_template_text("decomposition")
    sections = dict(parse_sections(text))
    if "system" not in sections or "input" not in sections:
        raise TemplateError("decomposition template needs [[system]] and [[input]]")
    return DecompositionTemplate(system=sections["system"], input_frame=sections["input"])


def render_decomposition(template: DecompositionTemplate, claim: ClaimRecord
                         ) -> list[Message]:
    return [
        {"role": "system", "content": template.system},
        {"role": "user", "content": template.input_frame.replace("{claim}", claim.claim)},
    ]


def decompose(
    claim: ClaimRecord,
    transport: ChatTransport,
    cfg: SamplingConfig,
    template: DecompositionTemplate | None = None,
) -> list[str]:
    """One decomposition call; returns the parsed sub-questions."""
    template = template or load_decomposition_template()
    messages = render_decomposition(template, claim)
    contents, _ = transport.complete(messages, cfg, 1)
    questions = parse_subquestions(contents[0])
    if not questions:
        raise EmptyDecomposition(
            f"claim {claim.id!r}: no sub-question parsed from {contents[0][:80]!r}"
        )
    return questions


# -- pipeline --------------------------------------------------------------------


@dataclass
class Pipeline:
    """Everything a strategy needs to turn one claim into a RunRecord.

    `scorer` is only required for best-of-N and the level-1 branch of
    adaptive. Strategies are pure given their sampled paths, so claims
    may be processed concurrently; record emission order is the
    caller's job.
    """

    template: PromptTemplate
    sampling: SamplingConfig
    transport: ChatTransport
    scorer: ScoreClient | None = None
    decomposition: DecompositionTemplate | None = None
    deterministic: bool = False

    def _sample(self, claim: ClaimRecord, evidence: Sequence[EvidenceDoc],
                m: int, subquestions: Sequence[str] | None):
        messages = render_prompt(self.template, claim, evidence, subquestions)
        cfg = self.sampling
        if m != cfg.m:
            cfg = SamplingConfig(
                model=cfg.model, temperature=cfg.temperature, m=m,
                max_tokens=cfg.max_tokens, seed=cfg.seed,
            )
        return sample_paths(messages, cfg, self.transport)

    def run_claim(
        self,
        claim: ClaimRecord,
        evidence: Sequence[EvidenceDoc],
        cfg: StrategyConfig,
        level: int | None = None,
    ) -> RunRecord:
        """Run one claim under `cfg.kind` and record the full trace."""
        started = time.monotonic()
        llm_calls = 0
        subquestions = None
        if cfg.with_decomposition:
            subquestions = decompose(
                claim, self.transport, self.sampling, self.decomposition
            )
            llm_calls += 1

        if cfg.kind is Strategy.ADAPTIVE:
            if level is None:
                level = claim.complexity
            if level not in (0, 1):
                raise DataError(
                    f"claim {claim.id!r}: adaptive strategy needs a 0/1 level"
                )

        scores: list[float] | None = None
        if cfg.kind is Strategy.TOP1:
            result = self._sample(claim, evidence, 1, subquestions)
            chosen, final = select_top1(result.paths)
        elif cfg.kind is Strategy.SELF_CONSISTENCY:
            result = self._sample(claim, evidence, cfg.m, subquestions)
            chosen, final = select_majority(result.paths)
        elif cfg.kind is Strategy.BEST_OF_N:
            result = self._sample(claim, evidence, cfg.m, subquestions)
            scores = self._score(claim, result.paths, evidence)
            chosen, final = select_bon(result.paths, scores)
        elif cfg.kind is Strategy.ADAPTIVE:
            if level == 0:
                result = self._sample(claim, evidence, cfg.level0_m, subquestions)
                chosen, final = select_top1(result.paths)
            else:
                result = self._sample(claim, evidence, cfg.m, subquestions)
                scores = self._score(claim, result.paths, evidence)
                chosen, final = select_bon(result.paths, scores)
        else:
            raise DataError(f"unknown strategy {cfg.kind}")

        llm_calls += result.llm_calls
        paths = result.paths
        if scores is not None:
            paths = tuple(
                ReasoningPath(
                    justification=p.justification,
                    predicted=p.predicted,
                    raw_response=p.raw_response,
                    score=s,
                )
                for p, s in zip(paths, scores)
            )
        wall_ms = 0 if self.deterministic else int((time.monotonic() - started) * 1000)
        return RunRecord(
            claim_id=claim.id,
            strategy=cfg.kind,
            evidence_ids=tuple(doc.doc_id for doc in evidence),
            paths=paths,
            chosen_index=chosen,
            final_verdict=final,
            llm_calls=llm_calls,
            wall_ms=wall_ms,
            unparsed=result.unparsed,
        )

    def _score(self, claim: ClaimRecord, paths, evidence) -> list[float]:
        if self.scorer is None:
            raise DataError("strategy needs a scoring client but none was configured")
        return score_paths(claim, paths, self.scorer)


def run_batch(
    pipeline: Pipeline,
    claims: Sequence[ClaimRecord],
    evidence_by_claim: Mapping[str, Sequence[EvidenceDoc]],
    cfg: StrategyConfig,
    levels: Mapping[str, int] | None = None,
    jobs: int = 1,
) -> list[RunRecord]:
    """Run a batch; records come back in input claim order."""
    def one(claim: ClaimRecord) -> RunRecord:
        evidence = evidence_by_claim.get(claim.id)
        if not evidence:
            raise DataError(f"no evidence for claim {claim.id!r}")
        level = levels.get(claim.id) if levels else None
        return pipeline.run_claim(claim, evidence, cfg, level=level)

    if jobs <= 1 or len(claims) <= 1:
        return [one(c) for c in claims]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(one, claims))
