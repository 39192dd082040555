"""LoRA fine-tuning of the path-scoring verifier.

The model is a frozen base decoder with LoRA adapters on the attention
projections and a trainable mean-pooled classification head, optimized
with binary cross-entropy on 0/1 path labels. Example text uses the
fixed framing shared with the dataset builder and the scoring server:

    Claim: {claim}\\nReasoning: {reasoning}\\nVerdict: {verdict}

Training defaults mirror the reference configuration (LoRA rank 8,
alpha 16, 3 epochs, batch 32, AdamW with eps 1e-8 and lr 1e-3); every
value is overridable.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path

import torch
from torch import nn
from transformers import AutoConfig, AutoModel

from .lora import inject_lora
from .tokenizer import HashTokenizer

logger = logging.getLogger(__name__)

FRAME = "Claim: {claim}\nReasoning: {reasoning}\nVerdict: {verdict}"

VERDICT_FORMS = {
    "true": "True",
    "false": "False",
    "conflicting": "Conflicting",
}

MANIFEST_FILE = "manifest.json"
WEIGHTS_FILE = "verifier.pt"
LOSS_CURVE_FILE = "loss_curve.csv"


class FramingError(ValueError):
    """Dataset row cannot be rendered with the shared framing template."""


@dataclass
class TrainerConfig:
    base_checkpoint: str
    output_dir: str
    lora_rank: int = 8
    lora_alpha: float = 16.0
    epochs: int = 3
    batch_size: int = 32
    learning_rate: float = 1e-3
    adam_eps: float = 1e-8
    max_length: int = 128
    val_fraction: float = 0.2
    seed: int = 0
    device: str = "cpu"


def frame_row(row: dict) -> str:
    try:
        verdict = VERDICT_FORMS[str(row["verdict"]).strip().lower()]
    except KeyError:
        raise FramingError(f"unknown verdict token {row.get('verdict')!r}") from None
    try:
        return FRAME.format(claim=row["claim"], reasoning=row["reasoning"],
                            verdict=verdict)
    except KeyError as exc:
        raise FramingError(f"dataset row missing field {exc}") from None


def load_dataset(path: str | Path) -> list[dict]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    if not rows:
        raise ValueError(f"no examples in {path}")
    labels = {int(r["label"]) for r in rows}
    if labels - {0, 1}:
        raise ValueError(f"labels must be 0/1, found {sorted(labels)}")
    if len(labels) < 2:
        raise ValueError("training data contains a single class; need both labels")
    return rows


class VerifierModel(nn.Module):
    """Frozen base + LoRA adapters + mean-pooled binary scoring head.

    Pooled features pass through a non-affine LayerNorm, and the head is
    zero-initialized: both matter at desk-scale step counts, where the
    first optimizer steps should already point along the class-mean
    difference instead of fighting a random initialization.
    """

    def __init__(self, base: nn.Module, hidden_size: int, rank: int, alpha: float):
        super().__init__()
        self.base = base
        for param in self.base.parameters():
            param.requires_grad = False
        self.wrapped = inject_lora(self.base, rank, alpha)
        self.norm = nn.LayerNorm(hidden_size, elementwise_affine=False)
        self.head = nn.Linear(hidden_size, 1)
        nn.init.zeros_(self.head.weight)
        nn.init.zeros_(self.head.bias)

    def forward(self, input_ids: torch.Tensor, attention_mask: torch.Tensor
                ) -> torch.Tensor:
        out = self.base(input_ids=input_ids, attention_mask=attention_mask)
        hidden = out.last_hidden_state
        mask = attention_mask.unsqueeze(-1).to(hidden.dtype)
        pooled = (hidden * mask).sum(dim=1) / mask.sum(dim=1).clamp(min=1.0)
        return self.head(self.norm(pooled)).squeeze(-1)


def build_verifier(base_checkpoint: str, rank: int, alpha: float) -> VerifierModel:
    base = AutoModel.from_pretrained(base_checkpoint)
    return VerifierModel(base, base.config.hidden_size, rank, alpha)


def _batches(n: int, batch_size: int):
    for start in range(0, n, batch_size):
        yield range(start, min(start + batch_size, n))


@torch.no_grad()
def _accuracy(model, tokenizer, texts, labels, batch_size, device) -> float:
    """`texts` and `labels` are parallel lists."""
    model.eval()
    hits = 0
    for batch in _batches(len(texts), batch_size):
        ids, mask = tokenizer.batch([texts[i] for i in batch])
        logits = model(ids.to(device), mask.to(device))
        predicted = (torch.sigmoid(logits) >= 0.5).long().cpu()
        hits += sum(int(predicted[j]) == labels[i] for j, i in enumerate(batch))
    return hits / len(texts)


def train_verifier(data_path: str | Path, cfg: TrainerConfig) -> Path:
    """Fine-tune and save a checkpoint directory; returns its path.

    The directory holds the model config, full weights (adapters plus
    head over the frozen base), the tokenizer marker, a manifest echoing
    the training configuration, and the train/val loss curve CSV.
    """
    rows = load_dataset(data_path)
    texts = [frame_row(r) for r in rows]
    labels = [int(r["label"]) for r in rows]

    torch.manual_seed(cfg.seed)
    generator = torch.Generator().manual_seed(cfg.seed)
    order = torch.randperm(len(rows), generator=generator).tolist()
    n_val = max(1, int(len(rows) * cfg.val_fraction))
    val_idx, train_idx = order[:n_val], order[n_val:]
    if not ({labels[i] for i in train_idx} == {0, 1}):
        raise ValueError("train split lost a class; lower val_fraction")

    model = build_verifier(cfg.base_checkpoint, cfg.lora_rank, cfg.lora_alpha)
    model.to(cfg.device)
    if HashTokenizer.exists(cfg.base_checkpoint):
        tokenizer = HashTokenizer.load(cfg.base_checkpoint)
        tokenizer.max_length = cfg.max_length
    else:
        raise ValueError(
            "base checkpoint has no hash tokenizer marker; desk-scale training "
            "expects a toy checkpoint built by build_toy_checkpoint"
        )

    trainable = [p for p in model.parameters() if p.requires_grad]
    optimizer = torch.optim.AdamW(trainable, lr=cfg.learning_rate, eps=cfg.adam_eps)
    loss_fn = nn.BCEWithLogitsLoss()

    curve = []
    for epoch in range(1, cfg.epochs + 1):
        model.train()
        epoch_loss = 0.0
        for batch in _batches(len(train_idx), cfg.batch_size):
            indices = [train_idx[i] for i in batch]
            ids, mask = tokenizer.batch([texts[i] for i in indices])
            target = torch.tensor([float(labels[i]) for i in indices])
            optimizer.zero_grad()
            logits = model(ids.to(cfg.device), mask.to(cfg.device))
            loss = loss_fn(logits, target.to(cfg.device))
            loss.backward()
            optimizer.step()
            epoch_loss += loss.item() * len(indices)
        train_loss = epoch_loss / len(train_idx)

        model.eval()
        with torch.no_grad():
            val_loss = 0.0
            for batch in _batches(len(val_idx), cfg.batch_size):
                indices = [val_idx[i] for i in batch]
                ids, mask = tokenizer.batch([texts[i] for i in indices])
                target = torch.tensor([float(labels[i]) for i in indices])
                logits = model(ids.to(cfg.device), mask.to(cfg.device))
                val_loss += loss_fn(logits, target.to(cfg.device)).item() * len(indices)
            val_loss /= len(val_idx)
        val_accuracy = _accuracy(model, tokenizer,
                                 [texts[i] for i in val_idx],
                                 [labels[i] for i in val_idx],
                                 cfg.batch_size, cfg.device)
        curve.append((epoch, train_loss, val_loss, val_accuracy))
        logger.info("epoch %d: train_loss=%.4f val_loss=%.4f val_acc=%.3f",
                    epoch, train_loss, val_loss, val_accuracy)

    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    torch.save(model.state_dict(), out_dir / WEIGHTS_FILE)
    AutoConfig.from_pretrained(cfg.base_checkpoint).save_pretrained(out_dir)
    tokenizer.save(out_dir)
    manifest = {
        "base_checkpoint": str(cfg.base_checkpoint),
        "lora_rank": cfg.lora_rank,
        "lora_alpha": cfg.lora_alpha,
        "epochs": cfg.epochs,
        "batch_size": cfg.batch_size,
        "learning_rate": cfg.learning_rate,
        "adam_eps": cfg.adam_eps,
        "optimizer": "AdamW",
        "framing": FRAME,
        "final_val_accuracy": curve[-1][3],
    }
    (out_dir / MANIFEST_FILE).write_text(json.dumps(manifest, indent=2))
    with open(out_dir / LOSS_CURVE_FILE, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "val_loss", "val_accuracy"])
        writer.writerows(curve)
    return out_dir


def load_verifier(checkpoint_dir: str | Path) -> tuple[VerifierModel, HashTokenizer, dict]:
    """Rebuild the architecture from the manifest and load weights."""
    checkpoint_dir = Path(checkpoint_dir)
    manifest = json.loads((checkpoint_dir / MANIFEST_FILE).read_text())
    config = AutoConfig.from_pretrained(checkpoint_dir)
    base = AutoModel.from_config(config)
    model = VerifierModel(base, config.hidden_size,
                          manifest["lora_rank"], manifest["lora_alpha"])
    state = torch.load(checkpoint_dir / WEIGHTS_FILE, weights_only=True)
    model.load_state_dict(state)
    model.eval()
    tokenizer = HashTokenizer.load(checkpoint_dir)
    return model, tokenizer, manifest
