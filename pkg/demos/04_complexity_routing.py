"""Latent-space complexity routing: fit prototypes, classify, save compute.

Claims whose one-shot verdict is already correct are level 0; claims
that need decomposition (or stay wrong) are level 1. Each class gets a
per-layer direction: the first principal component of its claims'
last-token hidden states. A new claim is routed by cosine similarity
per layer plus a layer majority vote, and only level-1 claims pay for
the full m-way sampling.

Run: python3 demos/04_complexity_routing.py
"""

import numpy as np

from ttsfc.complexity import classify, fit_prototypes, first_principal_component
from ttsfc.complexity import LatentStack

LAYERS, HIDDEN = 4, 8
rng = np.random.default_rng(5)


def synth_stack(claim_id: str, axis: int) -> LatentStack:
    """Stack whose variance concentrates on one hidden axis per class."""
    data = rng.normal(scale=0.02, size=(LAYERS, HIDDEN))
    data[:, axis] += rng.uniform(0.5, 2.0, size=LAYERS)
    return LatentStack(claim_id=claim_id, data=data)


def main():
    # Principal direction demo: rows varying along axis 0 recover e1.
    rows = np.zeros((6, 4))
    rows[:, 0] = [0.5, 1.0, 1.5, 2.0, 2.5, 3.0]
    direction = first_principal_component(rows)
    print(f"principal direction of axis-0 data: {np.round(direction, 3)}")

    # Two synthetic complexity classes, 30 training claims each.
    stacks, levels = [], {}
    for i in range(30):
        for level in (0, 1):
            stack = synth_stack(f"train-l{level}-{i}", axis=level)
            stacks.append(stack)
            levels[stack.claim_id] = level
    protos = fit_prototypes(stacks, levels)
    print(f"\nfit prototypes: {len(protos.classes)} classes x {protos.layers} "
          f"layers x {protos.hidden} dims")

    # Route 10 fresh claims and account for generation calls under
    # adaptive scaling (1 call for level 0, m=10 for level 1).
    m = 10
    adaptive_calls = bon_calls = 0
    correct = 0
    print("\nrouting fresh claims:")
    for i in range(10):
        true_level = i % 2
        stack = synth_stack(f"test-{i}", axis=true_level)
        level, votes, _ = classify(stack, protos)
        correct += level == true_level
        adaptive_calls += 1 if level == 0 else m
        bon_calls += m
        print(f"  {stack.claim_id}: level {level} (votes {votes})")

    print(f"\nrouting accuracy: {correct}/10")
    print(f"generation calls: adaptive {adaptive_calls} vs uniform best-of-N "
          f"{bon_calls} ({bon_calls / adaptive_calls:.2f}x saving)")


if __name__ == "__main__":
    main()
