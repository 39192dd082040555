"""Command-line surface exposing the full workflow as subcommands.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 transport
error. Diagnostics go to stderr; data goes to files or stdout only.
Every network-touching subcommand accepts ``--transport replay:FILE``
(and fixture providers for embeddings/scores) for fully offline runs.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__
from .config import AppConfig, load_config
from .core import (
    Strategy,
    gold_map,
    load_claims,
    load_runs,
    read_jsonl,
    save_runs,
    write_jsonl,
)
from .errors import ConfigError, DataError, TransportError, TtsfcError
from .gateway import (
    HttpChatTransport,
    ReplayTransport,
    SamplingConfig,
    builtin_template,
    load_template,
)
from .retrieval import (
    FixtureEmbeddings,
    HttpEmbeddings,
    bm25_search,
    build_index,
    load_corpus,
    load_index,
    ranked_from_dict,
    ranked_to_dict,
    rerank,
    save_index,
)
from .strategies import Pipeline, StrategyConfig, decompose, load_decomposition_template, run_batch
from .verifier import (
    FixtureScoreClient,
    HttpScoreClient,
    build_training_data,
    example_to_dict,
)
from . import complexity as cx
from .evalkit import (
    DriftCase,
    cost_csv,
    cost_report,
    evaluate_runs,
    judge_drift,
    load_judge_template,
    upper_bound,
)


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the contract here is exit 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _fail(message: str, code: int) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _make_transport(spec: str | None, config: AppConfig):
    if spec:
        if spec.startswith("replay:"):
            return ReplayTransport.from_file(spec[len("replay:"):])
        if spec.startswith(("http://", "https://")):
            return HttpChatTransport(spec)
        raise ConfigError(f"--transport must be replay:FILE or an http(s) URL, got {spec!r}")
    if config.chat_url:
        return HttpChatTransport(config.chat_url)
    raise ConfigError("no chat endpoint: pass --transport or set endpoints.chat in config")


def _make_scorer(spec: str | None, config: AppConfig):
    if spec:
        if spec.startswith("fixture:"):
            return FixtureScoreClient.from_file(spec[len("fixture:"):])
        if spec.startswith(("http://", "https://")):
            return HttpScoreClient(spec)
        raise ConfigError(f"--scores must be fixture:FILE or an http(s) URL, got {spec!r}")
    if config.score_url:
        return HttpScoreClient(config.score_url)
    return None


def _make_embedder(spec: str | None, config: AppConfig):
    if spec:
        if spec.startswith("fixture:"):
            return FixtureEmbeddings.from_file(spec[len("fixture:"):])
        if spec.startswith(("http://", "https://")):
            return HttpEmbeddings(spec, model=config.embedding_model)
        raise ConfigError(f"--embeddings must be fixture:FILE or an http(s) URL, got {spec!r}")
    if config.embeddings_url:
        return HttpEmbeddings(config.embeddings_url, model=config.embedding_model)
    raise ConfigError(
        "no embeddings endpoint: pass --embeddings or set endpoints.embeddings in config"
    )


def _sampling(args, config: AppConfig, m: int) -> SamplingConfig:
    return SamplingConfig(
        model=args.model or config.model,
        temperature=config.temperature if args.temperature is None else args.temperature,
        m=m,
        max_tokens=args.max_tokens or config.max_tokens,
        seed=config.seed,
    )


def _template(args, config: AppConfig):
    path = getattr(args, "template", None) or config.template_path
    return load_template(path) if path else builtin_template()


# -- subcommand implementations ----------------------------------------------------


def cmd_index_build(args, config: AppConfig) -> int:
    docs = load_corpus(args.corpus)
    index = build_index(docs, k1=args.k1 or config.k1, b=args.b or config.b)
    save_index(index, args.out)
    print(f"indexed {index.doc_count} docs, {len(index.postings)} terms -> {args.out}",
          file=sys.stderr)
    return 0


def _map_jobs(fn, items, jobs: int) -> list:
    """Apply `fn` across `items`, preserving order; threads when jobs > 1."""
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def cmd_retrieve(args, config: AppConfig) -> int:
    index = load_index(args.index)
    claims = load_claims(args.claims)
    corpus = {d.doc_id: d for d in load_corpus(args.corpus)}
    embedder = _make_embedder(args.embeddings, config)

    def one(claim):
        hits = bm25_search(index, claim.claim, args.topk)
        candidates = [corpus[doc_id] for doc_id, _ in hits if doc_id in corpus]
        if not candidates:
            return {"claim_id": claim.id, "hits": []}
        ranked = rerank(claim.id, claim.claim, candidates, embedder,
                        top_k=args.rerank_top)
        return ranked_to_dict(ranked)

    rows = _map_jobs(one, claims, args.jobs)
    write_jsonl(args.out, rows)
    print(f"retrieved evidence for {len(rows)} claims -> {args.out}", file=sys.stderr)
    return 0


def cmd_run(args, config: AppConfig) -> int:
    claims = load_claims(args.claims)
    corpus = {d.doc_id: d for d in load_corpus(args.corpus)}
    evidence_by_claim = {}
    for obj in read_jsonl(args.evidence):
        ranked = ranked_from_dict(obj)
        try:
            evidence_by_claim[ranked.claim_id] = [
                corpus[doc_id] for doc_id in ranked.doc_ids
            ]
        except KeyError as exc:
            raise DataError(f"evidence doc {exc} not in corpus") from exc

    strategy = Strategy(args.strategy)
    m = args.m or config.m
    cfg = StrategyConfig(
        kind=strategy,
        m=m,
        with_decomposition=args.with_decomp or config.with_decomposition,
        level0_m=args.level0_m or config.level0_m,
    )
    levels = None
    if strategy is Strategy.ADAPTIVE:
        if args.levels:
            levels = cx.load_levels(args.levels)
        elif all(c.complexity is not None for c in claims):
            levels = {c.id: c.complexity for c in claims}
        else:
            raise ConfigError("adaptive strategy needs --levels or per-claim complexity")

    scorer = _make_scorer(args.scores, config)
    if strategy in (Strategy.BEST_OF_N, Strategy.ADAPTIVE) and scorer is None:
        raise ConfigError(f"strategy {strategy.value!r} needs --scores or endpoints.score")

    decomp_path = args.decomp_template or config.decomposition_template_path
    pipeline = Pipeline(
        template=_template(args, config),
        sampling=_sampling(args, config, m),
        transport=_make_transport(args.transport, config),
        scorer=scorer,
        decomposition=load_decomposition_template(decomp_path) if decomp_path else None,
        deterministic=args.deterministic,
    )
    records = run_batch(pipeline, claims, evidence_by_claim, cfg,
                        levels=levels, jobs=args.jobs)
    save_runs(args.out, records)
    calls = sum(r.llm_calls for r in records)
    print(f"ran {len(records)} claims ({calls} llm calls) -> {args.out}",
          file=sys.stderr)
    return 0


def cmd_verifier_build_data(args, config: AppConfig) -> int:
    runs = load_runs(args.runs)
    claims = {c.id: c for c in load_claims(args.claims)}
    evidence_texts = None
    if args.include_evidence:
        if not args.corpus:
            raise ConfigError("--include-evidence needs --corpus")
        evidence_texts = {d.doc_id: d.text for d in load_corpus(args.corpus)}
    examples = build_training_data(
        runs, claims,
        include_evidence=args.include_evidence,
        evidence_texts=evidence_texts,
    )
    write_jsonl(args.out, (example_to_dict(e) for e in examples))
    positives = sum(e.label for e in examples)
    print(
        f"built {len(examples)} examples ({positives} positive, "
        f"rate {positives / len(examples):.4f}) -> {args.out}",
        file=sys.stderr,
    )
    return 0


def cmd_complexity_derive_levels(args, config: AppConfig) -> int:
    baseline = load_runs(args.baseline)
    decomp = load_runs(args.decomp)
    gold = gold_map(load_claims(args.claims))
    levels = cx.derive_levels(baseline, decomp, gold)
    cx.save_levels(args.out, levels)
    level1 = sum(levels.values())
    print(f"derived levels for {len(levels)} claims ({level1} level-1) -> {args.out}",
          file=sys.stderr)
    return 0


def _layer_slice(stacks, args):
    if args.first_layer == 0 and args.last_layer is None:
        return stacks
    return [cx.slice_layers(s, args.first_layer, args.last_layer) for s in stacks]


def cmd_complexity_fit(args, config: AppConfig) -> int:
    stacks = _layer_slice(cx.load_latents(args.latents), args)
    levels = cx.load_levels(args.levels)
    protos = cx.fit_prototypes(stacks, levels)
    cx.save_prototypes(args.out, protos)
    print(
        f"fit prototypes over {len(stacks)} stacks "
        f"(L={protos.layers}, h={protos.hidden}) -> {args.out}",
        file=sys.stderr,
    )
    return 0


def cmd_complexity_classify(args, config: AppConfig) -> int:
    stacks = _layer_slice(cx.load_latents(args.latents), args)
    protos = cx.load_prototypes(args.protos)
    rows = []
    for stack in stacks:
        level, votes, _ = cx.classify(stack, protos)
        rows.append({"id": stack.claim_id, "level": level, "votes": votes})
    write_jsonl(args.out, rows)
    print(f"classified {len(rows)} stacks -> {args.out}", file=sys.stderr)
    return 0


def cmd_eval(args, config: AppConfig) -> int:
    runs = load_runs(args.runs)
    gold = gold_map(load_claims(args.claims))
    report = evaluate_runs(runs, gold)
    payload = {"report": report.to_dict()}
    if args.upper_bound:
        bound = upper_bound(runs, gold)
        payload["upper_bound"] = {
            "accuracy": bound.accuracy,
            "report": bound.report.to_dict(),
        }
    if args.compare:
        other = load_runs(args.compare)
        payload["cost"] = cost_report(runs, other).to_dict()
        if args.csv:
            Path(args.csv).write_text(
                cost_csv([("a", runs), ("b", other)]), encoding="utf-8"
            )
    if args.format == "table":
        output = report.to_table()
    else:
        output = json.dumps(payload, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(output + "\n", encoding="utf-8")
    else:
        print(output)
    return 0


def cmd_judge_drift(args, config: AppConfig) -> int:
    cases = [
        DriftCase(
            claim=obj["claim"],
            evidence=obj["evidence"],
            gold=obj["gold"],
            reasoning_without=obj["reasoning_without"],
            reasoning_with=obj["reasoning_with"],
        )
        for obj in read_jsonl(args.cases)
    ]
    transport = _make_transport(args.transport, config)
    template_path = args.template or config.judge_template_path
    template = load_judge_template(template_path) if template_path else None
    cfg = SamplingConfig(model=args.model or config.model, temperature=0.0, m=1)
    loaded = template or load_judge_template()
    judgments = _map_jobs(
        lambda case: judge_drift(case, transport, cfg, loaded), cases, args.jobs
    )
    if not judgments:
        raise DataError("no drift cases in input")
    rate = sum(j.label for j in judgments) / len(judgments)
    write_jsonl(
        args.out,
        ({"label": j.label, "explanation": j.explanation} for j in judgments),
    )
    print(json.dumps({"cases": len(judgments), "drift_rate": rate}))
    return 0


def cmd_decompose(args, config: AppConfig) -> int:
    claims = load_claims(args.claims)
    transport = _make_transport(args.transport, config)
    template_path = args.template or config.decomposition_template_path
    template = load_decomposition_template(template_path) if template_path else None
    cfg = SamplingConfig(model=args.model or config.model, m=1,
                         temperature=config.temperature)
    rows = []
    for claim in claims:
        questions = decompose(claim, transport, cfg, template)
        rows.append({"id": claim.id, "subquestions": questions})
    write_jsonl(args.out, rows)
    print(f"decomposed {len(rows)} claims -> {args.out}", file=sys.stderr)
    return 0


# -- parser ------------------------------------------------------------------------


def _add_sampling_flags(p):
    p.add_argument("--model", help="chat model name (default from config)")
    p.add_argument("--temperature", type=float, default=None,
                   help="sampling temperature (default 0.45)")
    p.add_argument("--max-tokens", type=int, default=None)


def _add_transport_flag(p):
    p.add_argument("--transport",
                   help="chat endpoint: replay:FILE for offline, or http(s) base URL")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ttsfc",
                     description="Verifier-guided test-time scaling for claim verification.")
    parser.add_argument("--version", action="version", version=f"ttsfc {__version__}")
    parser.add_argument("--config", help="path to TOML config (default ./ttsfc.toml)")
    sub = parser.add_subparsers(dest="command", required=True)

    p_index = sub.add_parser("index", help="BM25 index management")
    index_sub = p_index.add_subparsers(dest="index_command", required=True)
    p_build = index_sub.add_parser("build", help="build and persist a BM25 index")
    p_build.add_argument("--corpus", required=True, help="corpus JSONL")
    p_build.add_argument("--out", required=True, help="output index file")
    p_build.add_argument("--k1", type=float, default=None)
    p_build.add_argument("--b", type=float, default=None)
    p_build.set_defaults(func=cmd_index_build)

    p_retrieve = sub.add_parser("retrieve", help="BM25 search then embedding rerank")
    p_retrieve.add_argument("--index", required=True)
    p_retrieve.add_argument("--claims", required=True)
    p_retrieve.add_argument("--corpus", required=True,
                            help="corpus JSONL (doc texts for reranking)")
    p_retrieve.add_argument("--topk", type=int, default=100,
                            help="BM25 candidates per claim")
    p_retrieve.add_argument("--rerank-top", type=int, default=3,
                            help="evidence snippets kept after rerank")
    p_retrieve.add_argument("--embeddings",
                            help="fixture:FILE or http(s) base URL")
    p_retrieve.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                            help="claims reranked concurrently")
    p_retrieve.add_argument("--out", required=True)
    p_retrieve.set_defaults(func=cmd_retrieve)

    p_run = sub.add_parser("run", help="sample reasoning paths and select verdicts")
    p_run.add_argument("--strategy", required=True,
                       choices=[s.value for s in Strategy])
    p_run.add_argument("--m", type=int, default=None, help="reasoning paths per claim")
    p_run.add_argument("--claims", required=True)
    p_run.add_argument("--evidence", required=True, help="ranked evidence JSONL")
    p_run.add_argument("--corpus", required=True, help="corpus JSONL (evidence texts)")
    p_run.add_argument("--with-decomp", action="store_true",
                       help="decompose claims into sub-questions first")
    p_run.add_argument("--levels", help="levels JSONL for the adaptive strategy")
    p_run.add_argument("--level0-m", type=int, default=None,
                       help="paths for level-0 claims (default 1)")
    p_run.add_argument("--scores", help="fixture:FILE or http(s) base URL")
    p_run.add_argument("--template", help="fact-checking template file")
    p_run.add_argument("--decomp-template", help="decomposition template file")
    p_run.add_argument("--deterministic", action="store_true",
                       help="zero the wall_ms field for bit-identical outputs")
    p_run.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                       help="claims processed concurrently")
    p_run.add_argument("--out", required=True)
    _add_sampling_flags(p_run)
    _add_transport_flag(p_run)
    p_run.set_defaults(func=cmd_run)

    p_vbd = sub.add_parser("verifier", help="verifier dataset tools")
    verifier_sub = p_vbd.add_subparsers(dest="verifier_command", required=True)
    p_build_data = verifier_sub.add_parser("build-data",
                                           help="label (claim, path) pairs against gold")
    p_build_data.add_argument("--runs", required=True)
    p_build_data.add_argument("--claims", required=True)
    p_build_data.add_argument("--include-evidence", action="store_true")
    p_build_data.add_argument("--corpus", help="needed with --include-evidence")
    p_build_data.add_argument("--out", required=True)
    p_build_data.set_defaults(func=cmd_verifier_build_data)

    p_cx = sub.add_parser("complexity", help="claim-complexity routing tools")
    cx_sub = p_cx.add_subparsers(dest="complexity_command", required=True)
    p_derive = cx_sub.add_parser("derive-levels",
                                 help="label levels from baseline vs decomposition runs")
    p_derive.add_argument("--baseline", required=True, help="m=1 no-decomp runs JSONL")
    p_derive.add_argument("--decomp", required=True, help="decomposition runs JSONL")
    p_derive.add_argument("--claims", required=True)
    p_derive.add_argument("--out", required=True)
    p_derive.set_defaults(func=cmd_complexity_derive_levels)
    p_fit = cx_sub.add_parser("fit", help="fit per-class per-layer prototypes")
    p_fit.add_argument("--latents", required=True, help="LTNT latent file")
    p_fit.add_argument("--levels", required=True, help="levels JSONL")
    p_fit.add_argument("--first-layer", type=int, default=0,
                       help="restrict to layers >= this index")
    p_fit.add_argument("--last-layer", type=int, default=None,
                       help="restrict to layers < this index")
    p_fit.add_argument("--out", required=True, help="prototype JSON")
    p_fit.set_defaults(func=cmd_complexity_fit)
    p_classify = cx_sub.add_parser("classify", help="classify stacks against prototypes")
    p_classify.add_argument("--latents", required=True)
    p_classify.add_argument("--protos", required=True)
    p_classify.add_argument("--first-layer", type=int, default=0,
                            help="apply the same range used at fit time")
    p_classify.add_argument("--last-layer", type=int, default=None)
    p_classify.add_argument("--out", required=True)
    p_classify.set_defaults(func=cmd_complexity_classify)

    p_eval = sub.add_parser("eval", help="score runs against gold verdicts")
    p_eval.add_argument("--runs", required=True)
    p_eval.add_argument("--claims", required=True)
    p_eval.add_argument("--upper-bound", action="store_true",
                        help="also report the perfect-verifier bound")
    p_eval.add_argument("--compare", help="second run file for cost comparison")
    p_eval.add_argument("--csv", help="write cost CSV here (with --compare)")
    p_eval.add_argument("--format", choices=["json", "table"], default="json")
    p_eval.add_argument("--out", help="write report here instead of stdout")
    p_eval.set_defaults(func=cmd_eval)

    p_judge = sub.add_parser("judge", help="LLM-judge audits")
    judge_sub = p_judge.add_subparsers(dest="judge_command", required=True)
    p_drift = judge_sub.add_parser("drift", help="judge reasoning-drift mitigation")
    p_drift.add_argument("--cases", required=True, help="drift cases JSONL")
    p_drift.add_argument("--template", help="judge template file")
    p_drift.add_argument("--model", help="judge model name")
    p_drift.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                         help="cases judged concurrently")
    p_drift.add_argument("--out", required=True)
    _add_transport_flag(p_drift)
    p_drift.set_defaults(func=cmd_judge_drift)

    p_decompose = sub.add_parser("decompose", help="claims into yes/no sub-questions")
    p_decompose.add_argument("--claims", required=True)
    p_decompose.add_argument("--template", help="decomposition template file")
    p_decompose.add_argument("--model", help="decomposition model name")
    p_decompose.add_argument("--out", required=True)
    _add_transport_flag(p_decompose)
    p_decompose.set_defaults(func=cmd_decompose)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config)
        return args.func(args, config)
    except ConfigError as exc:
        return _fail(str(exc), 1)
    except TransportError as exc:
        return _fail(str(exc), 3)
    except DataError as exc:
        return _fail(str(exc), 2)
    except OSError as exc:
        return _fail(str(exc), 2)
    except TtsfcError as exc:
        return _fail(str(exc), 2)


if __name__ == "__main__":
    sys.exit(main())
