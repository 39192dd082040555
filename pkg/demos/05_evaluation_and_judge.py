"""Evaluation toolkit tour: F1 metrics, kappa, oracle bound, drift judge.

Run: python3 demos/05_evaluation_and_judge.py
"""

import random

from ttsfc.core import ClaimRecord, ReasoningPath, RunRecord, Strategy, Verdict
from ttsfc.evalkit import (
    ConfusionMatrix,
    DriftCase,
    cohen_kappa,
    compute_f1,
    judge_drift,
    load_judge_template,
    render_judge_prompt,
    upper_bound,
)
from ttsfc.gateway import ReplayTransport, SamplingConfig, replay_entries

rng = random.Random(8)
VERDICTS = list(Verdict)


def main():
    # Per-class and aggregate F1 from a confusion matrix.
    cm = ConfusionMatrix(counts=((5, 2, 1), (1, 6, 1), (2, 1, 3)))
    report = compute_f1(cm)
    print("metrics on a fixed confusion matrix:")
    print(report.to_table())
    print(f"accuracy: {report.accuracy:.3f}\n")

    # Chance-corrected agreement between two annotators, on the 0-100 scale.
    a = ["T", "T", "T", "F", "F", "F", "C", "C", "T", "F"]
    b = ["T", "T", "F", "F", "F", "C", "C", "C", "T", "T"]
    print(f"cohen kappa (two annotators): {cohen_kappa(a, b):.2f}")
    print(f"cohen kappa (self-agreement): {cohen_kappa(a, a):.2f}\n")

    # The perfect-verifier bound: a claim counts as solved if ANY of its
    # sampled paths hits gold, regardless of what the selector chose.
    gold, runs = {}, []
    for i in range(50):
        cid = f"c{i}"
        gold[cid] = rng.choice(VERDICTS)
        paths = tuple(
            ReasoningPath(justification="r", predicted=rng.choice(VERDICTS),
                          raw_response="raw")
            for _ in range(5)
        )
        runs.append(RunRecord(
            claim_id=cid, strategy=Strategy.TOP1, evidence_ids=(),
            paths=paths, chosen_index=0, final_verdict=paths[0].predicted,
            llm_calls=5, wall_ms=0,
        ))
    top1_accuracy = sum(
        1 for r in runs if r.final_verdict is gold[r.claim_id]
    ) / len(runs)
    bound = upper_bound(runs, gold)
    print(f"top-1 accuracy on random 5-path runs: {top1_accuracy:.2f}")
    print(f"oracle (any-path) upper bound:        {bound.accuracy:.2f}\n")

    # The drift judge, replayed offline: label 1 means the verifier-led
    # reasoning stayed on task where the plain reasoning drifted.
    case = DriftCase(
        claim="There are 100 million people with preexisting conditions.",
        evidence="Estimates range from 61 million to 135 million people.",
        gold="True",
        reasoning_without="The estimates vary widely, so the figure is "
                          "contested and conflicting.",
        reasoning_with="100 million falls inside every cited range, so the "
                       "claim is supported.",
    )
    template = load_judge_template()
    reply = ("1. Label: 1\n"
             "2. Explanation: The verifier-led reasoning checks the claimed "
             "figure against the cited ranges instead of fixating on their "
             "spread.")
    transport = ReplayTransport(
        replay_entries(render_judge_prompt(template, case), [reply])
    )
    judgment = judge_drift(case, transport, SamplingConfig(model="judge", m=1))
    print(f"drift judge label: {judgment.label}")
    print(f"drift judge explanation: {judgment.explanation}")


if __name__ == "__main__":
    main()
