"""Claim-complexity routing from layerwise latent representations.

Each claim is summarized by its last-token hidden state at every layer
(an L x h stack). Per class and per layer we fit the first principal
component of the training stacks; a test stack is classified by cosine
similarity against each class direction at each layer, argmax per
layer, then majority vote across layers. Ties route to level 1: under-
provisioning compute costs accuracy, over-provisioning only costs time.

Prototypes are held in float32 so that fit -> persist -> load ->
classify is bit-identical to classifying in memory.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .core import RunRecord, Verdict, read_jsonl, write_jsonl
from .errors import (
    ClassTooSmall,
    CoverageMismatch,
    DataError,
    DegenerateInput,
    ShapeMismatch,
)

POWER_TOL = 1e-10
POWER_MAX_ITER = 10_000


@dataclass(frozen=True)
class LatentStack:
    """Per-layer last-token representations for one claim (L x h)."""

    claim_id: str
    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float32)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DataError(f"stack {self.claim_id!r}: data must be L x h")
        if not np.all(np.isfinite(arr)):
            raise DataError(f"stack {self.claim_id!r}: non-finite values")
        object.__setattr__(self, "data", arr)

    @property
    def layers(self) -> int:
        return self.data.shape[0]

    @property
    def hidden(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class PrototypeSet:
    """Per-class, per-layer unit principal directions plus the centering
    means kept for diagnostics. Shapes: (K, L, h), float32.
    """

    classes: tuple[int, ...]
    components: np.ndarray
    means: np.ndarray

    def __post_init__(self):
        comp = np.asarray(self.components, dtype=np.float32)
        means = np.asarray(self.means, dtype=np.float32)
        if comp.ndim != 3 or comp.shape[0] != len(self.classes):
            raise ShapeMismatch("components must have shape (K, L, h)")
        if means.shape != comp.shape:
            raise ShapeMismatch("means shape must match components")
        norms = np.linalg.norm(comp.astype(np.float64), axis=2)
        if not np.all(np.abs(norms - 1.0) <= 1e-6):
            raise DataError("prototype directions must be unit vectors")
        object.__setattr__(self, "components", comp)
        object.__setattr__(self, "means", means)

    @property
    def layers(self) -> int:
        return self.components.shape[1]

    @property
    def hidden(self) -> int:
        return self.components.shape[2]


def first_principal_component(vectors: np.ndarray) -> np.ndarray:
    """Dominant direction of the sample covariance via power iteration.

    Rows are mean-centered first. The sign is oriented so the summed
    projection of the *uncentered* rows onto the direction is
    nonnegative, which makes prototypes reproducible and points them
    along the class's own side of the axis. Deterministic: fixed start
    vector (normalized all-ones plus a tiny index-dependent
    perturbation), tolerance 1e-10 on direction change, at most 10_000
    iterations.
    """
    x = np.asarray(vectors, dtype=np.float64)
    if x.ndim != 2:
        raise DataError("expected an n x h matrix")
    n, h = x.shape
    if n < 2:
        raise DegenerateInput(f"need at least 2 vectors, got {n}")
    centered = x - x.mean(axis=0)
    if not np.any(centered):
        raise DegenerateInput("zero variance: all vectors identical")
    cov = centered.T @ centered / (n - 1)

    v = np.ones(h) + 1e-8 * np.arange(h)
    v /= np.linalg.norm(v)
    for basis in range(h + 1):
        if basis:
            # start was in the nullspace; bump a basis direction
            v = np.zeros(h)
            v[basis - 1] = 1.0
        w = cov @ v
        if np.linalg.norm(w) > 0:
            break
    else:
        raise DegenerateInput("covariance annihilates every start vector")

    for _ in range(POWER_MAX_ITER):
        w = cov @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            raise DegenerateInput("power iteration hit the nullspace")
        w /= norm
        change = min(np.linalg.norm(w - v), np.linalg.norm(w + v))
        v = w
        if change < POWER_TOL:
            break

    if float(x.sum(axis=0) @ v) < 0.0:
        v = -v
    return v


def slice_layers(stack: LatentStack, first: int = 0,
                 last: int | None = None) -> LatentStack:
    """Restrict a stack to layers [first, last). Embedding-adjacent
    layers are often uninformative; the default keeps all layers. Apply
    the same range at fit and classify time, or shapes will mismatch.
    """
    last = stack.layers if last is None else last
    if not 0 <= first < last <= stack.layers:
        raise DataError(
            f"layer range [{first}, {last}) invalid for {stack.layers} layers"
        )
    return LatentStack(claim_id=stack.claim_id, data=stack.data[first:last])


def fit_prototypes(
    latents: Sequence[LatentStack],
    labels: Mapping[str, int],
) -> PrototypeSet:
    """Fit one unit direction per (class, layer) over the labeled stacks."""
    if not latents:
        raise DataError("no latent stacks")
    layers, hidden = latents[0].layers, latents[0].hidden
    by_class: dict[int, list[LatentStack]] = {0: [], 1: []}
    for stack in latents:
        if (stack.layers, stack.hidden) != (layers, hidden):
            raise ShapeMismatch(
                f"stack {stack.claim_id!r} is {stack.layers}x{stack.hidden}, "
                f"expected {layers}x{hidden}"
            )
        if stack.claim_id not in labels:
            raise CoverageMismatch(f"no level for stack {stack.claim_id!r}")
        level = labels[stack.claim_id]
        if level not in (0, 1):
            raise DataError(f"level for {stack.claim_id!r} must be 0 or 1")
        by_class[level].append(stack)

    classes = (0, 1)
    components = np.zeros((2, layers, hidden), dtype=np.float32)
    means = np.zeros((2, layers, hidden), dtype=np.float32)
    for k in classes:
        stacks = by_class[k]
        if len(stacks) < 2:
            raise ClassTooSmall(k, len(stacks))
        for layer in range(layers):
            rows = np.stack([s.data[layer].astype(np.float64) for s in stacks])
            components[k, layer] = first_principal_component(rows).astype(np.float32)
            means[k, layer] = rows.mean(axis=0).astype(np.float32)
    return PrototypeSet(classes=classes, components=components, means=means)


def classify(
    latent: LatentStack, protos: PrototypeSet
) -> tuple[int, list[int], np.ndarray]:
    """Level for one stack, plus per-layer votes and the L x K similarity
    matrix. Test vectors are compared raw (uncentered) against each
    class direction; a tied layer votes level 1, and an overall tie
    routes to level 1.
    """
    if (latent.layers, latent.hidden) != (protos.layers, protos.hidden):
        raise ShapeMismatch(
            f"stack {latent.claim_id!r} is {latent.layers}x{latent.hidden}, "
            f"prototypes are {protos.layers}x{protos.hidden}"
        )
    data = latent.data.astype(np.float64)
    comp = protos.components.astype(np.float64)
    sims = np.zeros((protos.layers, len(protos.classes)))
    votes: list[int] = []
    for layer in range(protos.layers):
        vec = data[layer]
        norm = np.linalg.norm(vec)
        for ki in range(len(protos.classes)):
            direction = comp[ki, layer]
            sims[layer, ki] = 0.0 if norm == 0.0 else float(vec @ direction) / norm
        level0, level1 = sims[layer, 0], sims[layer, 1]
        votes.append(0 if level0 > level1 else 1)
    ones = sum(votes)
    level = 1 if 2 * ones >= len(votes) else 0
    return level, votes, sims


def classify_batch(
    latents: Sequence[LatentStack], protos: PrototypeSet
) -> dict[str, int]:
    return {stack.claim_id: classify(stack, protos)[0] for stack in latents}


def derive_levels(
    baseline_runs: Sequence[RunRecord],
    decomp_runs: Sequence[RunRecord],
    gold: Mapping[str, Verdict],
) -> dict[str, int]:
    """Level 0 iff the one-shot baseline verdict is already correct.

    Claims fixed by decomposition are level 1; claims that stay wrong
    even after decomposition are also level 1 (unresolved ambiguity
    still warrants the expanded budget).
    """
    base = {r.claim_id: r for r in baseline_runs}
    dec = {r.claim_id: r for r in decomp_runs}
    if set(base) != set(dec):
        raise CoverageMismatch(
            "baseline and decomposition runs cover different claim ids"
        )
    levels: dict[str, int] = {}
    for claim_id, run in base.items():
        if claim_id not in gold:
            raise CoverageMismatch(f"no gold verdict for claim {claim_id!r}")
        levels[claim_id] = 0 if run.final_verdict is gold[claim_id] else 1
    return levels


# -- file formats ----------------------------------------------------------------
#
# Latents: binary LTNT v1, little-endian. Header: magic "LTNT", version
# u32, record count u32, L u32, h u32. Per record: id length u32, id
# bytes (UTF-8), then L*h float32 values in layer-major order.

_MAGIC = b"LTNT"
_VERSION = 1


def save_latents(path: str | Path, stacks: Sequence[LatentStack]) -> None:
    if not stacks:
        raise DataError("no stacks to write")
    layers, hidden = stacks[0].layers, stacks[0].hidden
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<III", _VERSION, len(stacks), layers))
        fh.write(struct.pack("<I", hidden))
        for stack in stacks:
            if (stack.layers, stack.hidden) != (layers, hidden):
                raise ShapeMismatch(f"stack {stack.claim_id!r} shape differs")
            raw = stack.claim_id.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
            fh.write(stack.data.astype("<f4").tobytes(order="C"))


def _read_exact(fh, n: int) -> bytes:
    raw = fh.read(n)
    if len(raw) != n:
        raise DataError("latent file truncated")
    return raw


def load_latents(path: str | Path) -> list[LatentStack]:
    with open(path, "rb") as fh:
        if _read_exact(fh, 4) != _MAGIC:
            raise DataError(f"{path}: not a latent file")
        version, count, layers, hidden = struct.unpack("<IIII", _read_exact(fh, 16))
        if version != _VERSION:
            raise DataError(f"{path}: unsupported latent file version {version}")
        stacks = []
        for _ in range(count):
            (id_len,) = struct.unpack("<I", _read_exact(fh, 4))
            claim_id = _read_exact(fh, id_len).decode("utf-8")
            raw = _read_exact(fh, layers * hidden * 4)
            data = np.frombuffer(raw, dtype="<f4").reshape(layers, hidden)
            stacks.append(LatentStack(claim_id=claim_id, data=data.copy()))
    return stacks


def save_prototypes(path: str | Path, protos: PrototypeSet) -> None:
    obj = {
        "classes": list(protos.classes),
        "layers": protos.layers,
        "hidden": protos.hidden,
        "u": [[[float(v) for v in layer] for layer in cls] for cls in protos.components],
        "means": [[[float(v) for v in layer] for layer in cls] for cls in protos.means],
    }
    Path(path).write_text(json.dumps(obj), encoding="utf-8")


def load_prototypes(path: str | Path) -> PrototypeSet:
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    return PrototypeSet(
        classes=tuple(obj["classes"]),
        components=np.asarray(obj["u"], dtype=np.float32),
        means=np.asarray(obj["means"], dtype=np.float32),
    )


def save_levels(path: str | Path, levels: Mapping[str, int]) -> None:
    write_jsonl(path, ({"id": k, "level": v} for k, v in levels.items()))


def load_levels(path: str | Path) -> dict[str, int]:
    levels = {}
    for obj in read_jsonl(path):
        level = obj["level"]
        if level not in (0, 1):
            raise DataError(f"level for {obj['id']!r} must be 0 or 1")
        levels[str(obj["id"])] = level
    return levels
