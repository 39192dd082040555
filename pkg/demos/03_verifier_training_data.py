"""Building verifier training data from recorded runs.

Every (claim, reasoning path) pair becomes one example, labeled 1 when
the path's predicted verdict matches gold and 0 otherwise. Keeping the
negatives is the point: the scorer learns to separate plausible from
drifted reasoning. By construction the dataset's positive rate equals
the micro-accuracy of the source paths.

Run: python3 demos/03_verifier_training_data.py
"""

import random

from ttsfc.core import ClaimRecord, ReasoningPath, RunRecord, Strategy, Verdict
from ttsfc.verifier import build_training_data, frame_example, positive_rate

rng = random.Random(12)
VERDICTS = list(Verdict)


def synthetic_run(claim: ClaimRecord, m: int) -> RunRecord:
    paths = []
    for j in range(m):
        predicted = claim.gold if rng.random() < 0.45 else rng.choice(VERDICTS)
        paths.append(ReasoningPath(
            justification=f"sampled reasoning {j} for {claim.id}",
            predicted=predicted,
            raw_response=f"[Label]: {predicted.canonical}",
        ))
    return RunRecord(
        claim_id=claim.id,
        strategy=Strategy.TOP1,
        evidence_ids=(),
        paths=tuple(paths),
        chosen_index=0,
        final_verdict=paths[0].predicted,
        llm_calls=m,
        wall_ms=0,
    )


def main():
    claims = {}
    runs = []
    for i in range(10):
        claim = ClaimRecord(id=f"c{i}", claim=f"synthetic claim {i}",
                            gold=rng.choice(VERDICTS))
        claims[claim.id] = claim
        runs.append(synthetic_run(claim, m=10))

    examples = build_training_data(runs, claims)
    print(f"{len(runs)} runs x 10 paths -> {len(examples)} training examples")

    positives = sum(e.label for e in examples)
    print(f"positives: {positives}, negatives: {len(examples) - positives}")
    print(f"positive rate: {positive_rate(examples):.3f}")

    correct = sum(
        1 for run in runs for p in run.paths
        if p.predicted is claims[run.claim_id].gold
    )
    total = sum(len(run.paths) for run in runs)
    print(f"path micro-accuracy: {correct / total:.3f} (identical by construction)")

    ex = examples[0]
    print("\none example, in the exact framing the scorer and trainer share:")
    print("-" * 60)
    print(frame_example(ex.claim, ex.reasoning, ex.predicted))
    print("-" * 60)
    print(f"label: {ex.label}")


if __name__ == "__main__":
    main()
