"""Metrics, oracle upper bound, cost accounting, and the drift judge.

All metric computations are pure functions over in-memory run sets and
permutation-invariant in claim order. F1 conventions: a class with
TP = FP = FN = 0 scores 0; macro-F1 is the unweighted mean over the
three classes; weighted-F1 uses gold supports. Cohen's kappa is
reported on the 0-100 scale.
"""

from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .core import RunRecord, Verdict, majority_verdict
from .errors import (
    CoverageMismatch,
    DataError,
    EmptyEvaluation,
    LengthMismatch,
    MissingGold,
    TemplateError,
    UnparseableJudgment,
)
from .gateway import ChatTransport, Message, SamplingConfig, builtin_template_text, parse_sections

CLASS_ORDER = (Verdict.TRUE, Verdict.FALSE, Verdict.CONFLICTING)


@dataclass(frozen=True)
class ConfusionMatrix:
    """3x3 counts; rows = gold, columns = predicted, both in
    (True, False, Conflicting) order.
    """

    counts: tuple[tuple[int, int, int], ...]

    def __post_init__(self):
        if len(self.counts) != 3 or any(len(r) != 3 for r in self.counts):
            raise DataError("confusion matrix must be 3x3")
        if any(c < 0 for row in self.counts for c in row):
            raise DataError("confusion matrix entries must be nonnegative")

    @property
    def total(self) -> int:
        return sum(sum(row) for row in self.counts)

    def support(self, i: int) -> int:
        return sum(self.counts[i])

    @classmethod
    def from_pairs(cls, pairs: Sequence[tuple[Verdict, Verdict]]) -> "ConfusionMatrix":
        idx = {v: i for i, v in enumerate(CLASS_ORDER)}
        counts = [[0, 0, 0] for _ in range(3)]
        for gold, pred in pairs:
            counts[idx[gold]][idx[pred]] += 1
        return cls(counts=tuple(tuple(row) for row in counts))


@dataclass(frozen=True)
class EvalReport:
    t_f1: float
    f_f1: float
    c_f1: float
    macro_f1: float
    weighted_f1: float
    support: tuple[int, int, int]
    total: int
    accuracy: float
    llm_calls_total: int = 0
    wall_ms_total: int = 0
    mean_wall_ms: float = 0.0

    def to_dict(self) -> dict:
        return {
            "t_f1": self.t_f1,
            "f_f1": self.f_f1,
            "c_f1": self.c_f1,
            "macro_f1": self.macro_f1,
            "weighted_f1": self.weighted_f1,
            "support": list(self.support),
            "total": self.total,
            "accuracy": self.accuracy,
            "llm_calls_total": self.llm_calls_total,
            "wall_ms_total": self.wall_ms_total,
            "mean_wall_ms": self.mean_wall_ms,
        }

    def to_table(self) -> str:
        """Aligned text table in T-F1, F-F1, C-F1, M-F1, W-F1 column order."""
        headers = ["T-F1", "F-F1", "C-F1", "M-F1", "W-F1"]
        values = [self.t_f1, self.f_f1, self.c_f1, self.macro_f1, self.weighted_f1]
        cells = [f"{100 * v:.2f}" for v in values]
        width = max(len(s) for s in headers + cells)
        head = "  ".join(h.rjust(width) for h in headers)
        row = "  ".join(c.rjust(width) for c in cells)
        return f"{head}\n{row}"


def _f1(tp: int, fp: int, fn: int) -> float:
    if tp == 0 and fp == 0 and fn == 0:
        return 0.0
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    if precision + recall == 0.0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def compute_f1(cm: ConfusionMatrix) -> EvalReport:
    """Per-class, macro, and support-weighted F1 from a confusion matrix."""
    if cm.total < 1:
        raise EmptyEvaluation("confusion matrix is empty")
    f1s = []
    for i in range(3):
        tp = cm.counts[i][i]
        fp = sum(cm.counts[r][i] for r in range(3)) - tp
        fn = cm.support(i) - tp
        f1s.append(_f1(tp, fp, fn))
    supports = tuple(cm.support(i) for i in range(3))
    macro = sum(f1s) / 3
    weighted = sum(s * f for s, f in zip(supports, f1s)) / cm.total
    correct = sum(cm.counts[i][i] for i in range(3))
    return EvalReport(
        t_f1=f1s[0],
        f_f1=f1s[1],
        c_f1=f1s[2],
        macro_f1=macro,
        weighted_f1=weighted,
        support=supports,
        total=cm.total,
        accuracy=correct / cm.total,
    )


def evaluate_runs(runs: Sequence[RunRecord], gold: Mapping[str, Verdict]) -> EvalReport:
    """Full report: metrics over final verdicts plus cost totals."""
    if not runs:
        raise EmptyEvaluation("no runs to evaluate")
    pairs = []
    for run in runs:
        if run.claim_id not in gold:
            raise MissingGold(run.claim_id)
        pairs.append((gold[run.claim_id], run.final_verdict))
    report = compute_f1(ConfusionMatrix.from_pairs(pairs))
    calls = sum(r.llm_calls for r in runs)
    wall = sum(r.wall_ms for r in runs)
    return EvalReport(
        t_f1=report.t_f1,
        f_f1=report.f_f1,
        c_f1=report.c_f1,
        macro_f1=report.macro_f1,
        weighted_f1=report.weighted_f1,
        support=report.support,
        total=report.total,
        accuracy=report.accuracy,
        llm_calls_total=calls,
        wall_ms_total=wall,
        mean_wall_ms=wall / len(runs),
    )


def cohen_kappa(a: Sequence, b: Sequence) -> float:
    """Chance-corrected agreement on the 0-100 scale.

    When expected agreement is 1 (both raters constant and equal
    marginals), returns 100.0 if observed agreement is 1, else 0.0.
    """
    if len(a) != len(b):
        raise LengthMismatch(f"label lists differ: {len(a)} vs {len(b)}")
    if not a:
        raise EmptyEvaluation("no labels")
    n = len(a)
    observed = sum(1 for x, y in zip(a, b) if x == y) / n
    labels = set(a) | set(b)
    expected = sum(
        (sum(1 for x in a if x == lab) / n) * (sum(1 for y in b if y == lab) / n)
        for lab in labels
    )
    if expected == 1.0:
        return 100.0 if observed == 1.0 else 0.0
    return 100.0 * (observed - expected) / (1.0 - expected)


@dataclass(frozen=True)
class UpperBoundReport:
    accuracy: float
    report: EvalReport


def upper_bound(runs: Sequence[RunRecord], gold: Mapping[str, Verdict]
                ) -> UpperBoundReport:
    """Score a perfect verifier: a claim counts as correct iff any of its
    paths predicts the gold verdict. When no path is correct the oracle
    prediction falls back to the majority verdict so per-class F1 stays
    defined.
    """
    if not runs:
        raise EmptyEvaluation("no runs to evaluate")
    pairs = []
    hits = 0
    for run in runs:
        if run.claim_id not in gold:
            raise MissingGold(run.claim_id)
        target = gold[run.claim_id]
        predictions = [p.predicted for p in run.paths]
        if target in predictions:
            hits += 1
            pairs.append((target, target))
        else:
            _, fallback = majority_verdict(predictions)
            pairs.append((target, fallback))
    report = compute_f1(ConfusionMatrix.from_pairs(pairs))
    return UpperBoundReport(accuracy=hits / len(runs), report=report)


@dataclass(frozen=True)
class CostComparison:
    """Cost ratios of run set B over run set A plus per-side summaries."""

    claims: int
    calls_a: int
    calls_b: int
    wall_ms_a: int
    wall_ms_b: int
    calls_ratio: float
    wall_ratio: float

    def to_dict(self) -> dict:
        return {
            "claims": self.claims,
            "a": {
                "llm_calls": self.calls_a,
                "wall_ms": self.wall_ms_a,
                "mean_calls": self.calls_a / self.claims,
                "mean_ms": self.wall_ms_a / self.claims,
            },
            "b": {
                "llm_calls": self.calls_b,
                "wall_ms": self.wall_ms_b,
                "mean_calls": self.calls_b / self.claims,
                "mean_ms": self.wall_ms_b / self.claims,
            },
            "calls_ratio_b_over_a": self.calls_ratio,
            "wall_ratio_b_over_a": self.wall_ratio,
        }


def cost_report(runs_a: Sequence[RunRecord], runs_b: Sequence[RunRecord]
                ) -> CostComparison:
    """Compare total calls and wall time of two runs over the same claims."""
    ids_a = {r.claim_id for r in runs_a}
    ids_b = {r.claim_id for r in runs_b}
    if not runs_a or not runs_b:
        raise EmptyEvaluation("cost_report needs two nonempty run sets")
    if ids_a != ids_b:
        raise CoverageMismatch("run sets cover different claim ids")
    calls_a = sum(r.llm_calls for r in runs_a)
    calls_b = sum(r.llm_calls for r in runs_b)
    wall_a = sum(r.wall_ms for r in runs_a)
    wall_b = sum(r.wall_ms for r in runs_b)
    return CostComparison(
        claims=len(ids_a),
        calls_a=calls_a,
        calls_b=calls_b,
        wall_ms_a=wall_a,
        wall_ms_b=wall_b,
        calls_ratio=calls_b / calls_a if calls_a else float("inf"),
        wall_ratio=wall_b / wall_a if wall_a else float("inf"),
    )


def cost_csv(rows: Sequence[tuple[str, Sequence[RunRecord]]]) -> str:
    """Plot-data CSV: strategy, claims, llm_calls, wall_ms, mean_ms."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["strategy", "claims", "llm_calls", "wall_ms", "mean_ms"])
    for name, runs in rows:
        calls = sum(r.llm_calls for r in runs)
        wall = sum(r.wall_ms for r in runs)
        writer.writerow([name, len(runs), calls, wall, wall / len(runs) if runs else 0.0])
    return buffer.getvalue()


# -- drift judge -----------------------------------------------------------------


@dataclass(frozen=True)
class DriftCase:
    claim: str
    evidence: str
    gold: str
    reasoning_without: str
    reasoning_with: str

    def __post_init__(self):
        for name in ("claim", "evidence", "gold", "reasoning_without", "reasoning_with"):
            if not getattr(self, name).strip():
                raise DataError(f"drift case field {name!r} is empty")


@dataclass(frozen=True)
class JudgeTemplate:
    system: str
    input_frame: str

    _PLACEHOLDERS = ("{claim}", "{evidence}", "{gold}",
                     "{reasoning_without}", "{reasoning_with}")

    def __post_init__(self):
        for placeholder in self._PLACEHOLDERS:
            if placeholder not in self.input_frame:
                raise TemplateError(f"judge input frame missing {placeholder}")


def load_judge_template(path: str | Path | None = None) -> JudgeTemplate:
    text = Path(path).read_text(encoding="utf-8") if path else builtin_template_text("judge_drift")
    sections = dict(parse_sections(text))
    if "system" not in sections or "input" not in sections:
        raise TemplateError("judge template needs [[system]] and [[input]]")
    return JudgeTemplate(system=sections["system"], input_frame=sections["input"])


def render_judge_prompt(template: JudgeTemplate, case: DriftCase) -> list[Message]:
    frame = template.input_frame
    for placeholder, value in (
        ("{claim}", case.claim),
        ("{evidence}", case.evidence),
        ("{gold}", case.gold),
        ("{reasoning_without}", case.reasoning_without),
        ("{reasoning_with}", case.reasoning_with),
    ):
        frame = frame.replace(placeholder, value)
    return [
        {"role": "system", "content": template.system},
        {"role": "user", "content": frame},
    ]


_JUDGE_LABEL = re.compile(
    r"^[\s\-\*#>]*(?:\d+[\.\)]\s*)?\[?\s*label\s*\]?\s*:\s*(?P<value>[01])\b",
    re.IGNORECASE,
)
_JUDGE_EXPLANATION = re.compile(
    r"(?:\d+[\.\)]\s*)?\[?\s*explanation\s*\]?\s*:", re.IGNORECASE
)


def parse_judgment(raw: str) -> tuple[int, str]:
    label = None
    for line in raw.splitlines():
        m = _JUDGE_LABEL.match(line)
        if m:
            label = int(m.group("value"))
            break
    if label is None:
        raise UnparseableJudgment(f"no 0/1 label in judgment: {raw[:80]!r}")
    explanation = ""
    m = _JUDGE_EXPLANATION.search(raw)
    if m:
        explanation = raw[m.end():].strip()
    return label, explanation


@dataclass(frozen=True)
class Judgment:
    label: int
    explanation: str


def judge_drift(
    case: DriftCase,
    transport: ChatTransport,
    cfg: SamplingConfig,
    template: JudgeTemplate | None = None,
) -> Judgment:
    """One judge call deciding whether verifier reasoning mitigated drift."""
    template = template or load_judge_template()
    messages = render_judge_prompt(template, case)
    contents, _ = transport.complete(messages, cfg, 1)
    label, explanation = parse_judgment(contents[0])
    return Judgment(label=label, explanation=explanation)


def judge_drift_batch(
    cases: Sequence[DriftCase],
    transport: ChatTransport,
    cfg: SamplingConfig,
    template: JudgeTemplate | None = None,
) -> tuple[list[Judgment], float]:
    """Judge every case; returns the judgments and the drift rate."""
    template = template or load_judge_template()
    judgments = [judge_drift(c, transport, cfg, template) for c in cases]
    if not judgments:
        raise EmptyEvaluation("no drift cases")
    rate = sum(j.label for j in judgments) / len(judgments)
    return judgments, rate
