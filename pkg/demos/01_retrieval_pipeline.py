"""Evidence retrieval walkthrough: BM25 indexing, search, and reranking.

Builds an in-memory corpus, searches it with BM25, then reranks the
candidates by cosine similarity using a synthetic embedding provider
(deterministic vectors derived from token overlap), all offline.

Run: python3 demos/01_retrieval_pipeline.py
"""

import math

from ttsfc.retrieval import (
    EvidenceDoc,
    FixtureEmbeddings,
    bm25_search,
    build_index,
    rerank,
    tokenize,
)

CORPUS = [
    ("kenya-cb", "diaspora remittances stand at an all-time high of over "
                 "ksh 400 billion per annum as of 2021"),
    ("kenya-usd", "total remittances in 2021 reached a record usd 3718 million"),
    ("gop-1956", "the 1956 republican platform pledged asylum for refugees, "
                 "an extended minimum wage, and equal pay"),
    ("gop-1928", "the 1928 gop platform favored an equitable minimum wage "
                 "for american workers"),
    ("moniz", "in 1949 moniz won the nobel prize in physiology or medicine "
              "for the lobotomy"),
    ("noise-1", "the city park opened a new fountain last spring"),
    ("noise-2", "quarterly earnings were flat across the retail sector"),
]

CLAIM = "Diaspora remittances now stand at an all-time high of over KSh400 billion in 2021"


def overlap_embedder(texts):
    """Toy deterministic embeddings: one dimension per vocabulary word."""
    vocab = sorted({t for text in texts for t in tokenize(text)})
    vectors = {}
    for text in texts:
        tokens = tokenize(text)
        vec = [tokens.count(w) / math.sqrt(len(tokens)) for w in vocab]
        vectors[text] = vec
    return FixtureEmbeddings(vectors)


def main():
    docs = [EvidenceDoc(doc_id=doc_id, text=text) for doc_id, text in CORPUS]
    index = build_index(docs)
    print(f"indexed {index.doc_count} docs, {len(index.postings)} distinct terms, "
          f"avg length {index.avg_doc_len:.1f} tokens\n")

    print(f"claim: {CLAIM}\n")
    hits = bm25_search(index, CLAIM, top_k=5)
    print("BM25 candidates (top 5):")
    for doc_id, score in hits:
        print(f"  {score:6.3f}  {doc_id}")

    # Rerank the BM25 candidates with embeddings, keep the top 3: this is
    # the evidence that reaches the verification prompt.
    by_id = {d.doc_id: d for d in docs}
    candidates = [by_id[doc_id] for doc_id, _ in hits]
    provider = overlap_embedder([CLAIM] + [d.text for d in candidates])
    ranked = rerank("demo-claim", CLAIM, candidates, provider, top_k=3)
    print("\nafter cosine rerank (top 3):")
    for doc_id, score in ranked.hits:
        print(f"  {score:6.3f}  {doc_id}")


if __name__ == "__main__":
    main()
