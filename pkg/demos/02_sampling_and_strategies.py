"""Verdict-selection strategies on a drift-shaped path set.

Recreates the canonical failure case: nine of ten sampled reasoning
paths misread diverse evidence and say Conflicting, one path reconciles
the figures and says True. Majority voting follows the crowd; best-of-N
with a verifier that scores the reconciling path highest recovers the
correct verdict. Everything runs against a replay transport, offline.

Run: python3 demos/02_sampling_and_strategies.py
"""

from ttsfc.core import ClaimRecord, Verdict
from ttsfc.gateway import (
    PromptTemplate,
    ReplayTransport,
    SamplingConfig,
    render_prompt,
    replay_entries,
    sample_paths,
)
from ttsfc.retrieval import EvidenceDoc
from ttsfc.strategies import select_bon, select_majority, select_top1

CLAIM = ClaimRecord(
    id="remittances-2021",
    claim="Diaspora remittances now stand at an all-time high of over "
          "KSh400 billion in 2021.",
    gold=Verdict.TRUE,
)
EVIDENCE = [
    EvidenceDoc(doc_id="e1", text="remittances stand at an all-time high at "
                                  "over ksh 400 billion per annum as of 2021"),
    EvidenceDoc(doc_id="e2", text="total remittances in 2021 reached a record "
                                  "usd 3,718 million"),
]

DRIFTED = ("[Label]: Conflicting\n"
           "[Justification]: The sources quote different figures (KSh 400 "
           "billion vs USD 3,718 million) that are not directly comparable.")
RECONCILED = ("[Label]: True\n"
              "[Justification]: USD 3,718 million is the same amount as KSh "
              "400 billion at 2021 exchange rates; both sources agree.")


def main():
    template = PromptTemplate(
        system="You verify claims against evidence.",
        exemplars=(),
        input_frame="[Claim]: {claim}\n\n{evidence}\n\n{subquestions}",
    )
    messages = render_prompt(template, CLAIM, EVIDENCE)
    transport = ReplayTransport(replay_entries(messages, [DRIFTED] * 9 + [RECONCILED]))
    cfg = SamplingConfig(model="demo", temperature=0.45, m=10)

    result = sample_paths(messages, cfg, transport)
    print(f"sampled {len(result.paths)} reasoning paths "
          f"({result.llm_calls} generation calls)\n")
    tally = {}
    for path in result.paths:
        tally[path.predicted.canonical] = tally.get(path.predicted.canonical, 0) + 1
    print(f"verdict tally: {tally}")

    idx, top1 = select_top1(result.paths)
    print(f"\ntop-1 decoding        -> {top1.canonical} (path {idx})")

    idx, majority = select_majority(result.paths)
    print(f"self-consistency      -> {majority.canonical} (path {idx}, 9/10 agree)")

    # A verifier that has learned to reward unit reconciliation scores the
    # lone correct path highest.
    scores = [0.31] * 9 + [0.94]
    idx, best = select_bon(result.paths, scores)
    print(f"best-of-N (verifier)  -> {best.canonical} (path {idx}, score {scores[idx]})")

    print(f"\ngold verdict          -> {CLAIM.gold.canonical}")


if __name__ == "__main__":
    main()
