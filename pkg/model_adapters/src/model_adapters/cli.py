"""Desk-scale command line: build a toy checkpoint, extract latents,
train the verifier, serve scores."""

from __future__ import annotations

import argparse
import sys

from .extract import ExtractorConfig, extract_latents
from .server import serve_scores
from .toy import build_toy_checkpoint
from .train import TrainerConfig, train_verifier


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="model-adapters")
    sub = parser.add_subparsers(dest="command", required=True)

    p_toy = sub.add_parser("build-toy", help="build a small random-init checkpoint")
    p_toy.add_argument("--out", required=True)
    p_toy.add_argument("--layers", type=int, default=4)
    p_toy.add_argument("--hidden", type=int, default=16)
    p_toy.add_argument("--vocab-size", type=int, default=512)
    p_toy.add_argument("--seed", type=int, default=0)

    p_extract = sub.add_parser("extract", help="claims JSONL -> LTNT latents")
    p_extract.add_argument("--claims", required=True)
    p_extract.add_argument("--checkpoint", required=True)
    p_extract.add_argument("--out", required=True)
    p_extract.add_argument("--include-embedding-layer", action="store_true")
    p_extract.add_argument("--batch-size", type=int, default=8)
    p_extract.add_argument("--device", default="cpu")

    p_train = sub.add_parser("train", help="fine-tune the verifier with LoRA + BCE")
    p_train.add_argument("--data", required=True, help="verifier examples JSONL")
    p_train.add_argument("--base", required=True, help="base checkpoint path")
    p_train.add_argument("--out", required=True, help="checkpoint output dir")
    p_train.add_argument("--rank", type=int, default=8)
    p_train.add_argument("--alpha", type=float, default=16.0)
    p_train.add_argument("--epochs", type=int, default=3)
    p_train.add_argument("--batch-size", type=int, default=32)
    p_train.add_argument("--lr", type=float, default=1e-3)
    p_train.add_argument("--seed", type=int, default=0)
    p_train.add_argument("--device", default="cpu")

    p_serve = sub.add_parser("serve", help="run the /v1/score HTTP service")
    p_serve.add_argument("--checkpoint", required=True)
    p_serve.add_argument("--port", type=int, required=True)
    p_serve.add_argument("--host", default="0.0.0.0")

    args = parser.parse_args(argv)
    if args.command == "build-toy":
        path = build_toy_checkpoint(args.out, layers=args.layers,
                                    hidden=args.hidden,
                                    vocab_size=args.vocab_size, seed=args.seed)
        print(f"toy checkpoint at {path}", file=sys.stderr)
    elif args.command == "extract":
        cfg = ExtractorConfig(
            checkpoint=args.checkpoint,
            output_path=args.out,
            include_embedding_layer=args.include_embedding_layer,
            batch_size=args.batch_size,
            device=args.device,
        )
        extract_latents(args.claims, cfg)
        print(f"latents at {args.out}", file=sys.stderr)
    elif args.command == "train":
        cfg = TrainerConfig(
            base_checkpoint=args.base,
            output_dir=args.out,
            lora_rank=args.rank,
            lora_alpha=args.alpha,
            epochs=args.epochs,
            batch_size=args.batch_size,
            learning_rate=args.lr,
            seed=args.seed,
            device=args.device,
        )
        out = train_verifier(args.data, cfg)
        print(f"checkpoint at {out}", file=sys.stderr)
    elif args.command == "serve":
        serve_scores(args.checkpoint, port=args.port, host=args.host)
    return 0


if __name__ == "__main__":
    sys.exit(main())
