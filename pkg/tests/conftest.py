import numpy as np
import pytest

from ttsfc.complexity import LatentStack
from ttsfc.core import ClaimRecord, ReasoningPath, Verdict


def make_separable_latents(n_per_class=50, layers=4, hidden=8, seed=0, noise=0.01):
    """Two-class latent fixture: class 0 varies along axis 0 and class 1
    along axis 1 at every layer, with positive magnitudes and a little
    isotropic noise. Returns (stacks, levels).
    """
    rng = np.random.default_rng(seed)
    stacks, levels = [], {}
    for level in (0, 1):
        axis = level
        for i in range(n_per_class):
            data = rng.normal(scale=noise, size=(layers, hidden))
            data[:, axis] += rng.uniform(0.5, 2.0, size=layers)
            claim_id = f"lvl{level}-{i}"
            stacks.append(LatentStack(claim_id=claim_id, data=data))
            levels[claim_id] = level
    return stacks, levels


def fix_sign(direction, rows):
    """The orientation rule: summed projection of uncentered rows must
    be nonnegative."""
    if float(np.asarray(rows).sum(axis=0) @ direction) < 0:
        return -direction
    return direction


def oracle_first_component(rows):
    """Dense symmetric eigendecomposition oracle for the dominant
    principal direction (independent of the power-iteration path)."""
    x = np.asarray(rows, dtype=np.float64)
    centered = x - x.mean(axis=0)
    cov = centered.T @ centered / (x.shape[0] - 1)
    eigenvalues, eigenvectors = np.linalg.eigh(cov)
    top = eigenvectors[:, -1]
    return fix_sign(top, x)


def make_path(verdict: Verdict, justification: str = "because", score=None) -> ReasoningPath:
    return ReasoningPath(
        justification=justification,
        predicted=verdict,
        raw_response=f"[Label]: {verdict.canonical}\n[Justification]: {justification}",
        score=score,
    )


def make_paths(*verdicts: Verdict) -> list[ReasoningPath]:
    return [make_path(v, justification=f"reason {i}") for i, v in enumerate(verdicts)]


@pytest.fixture
def claim() -> ClaimRecord:
    return ClaimRecord(id="c1", claim="The dam generates 400 MW.", gold=Verdict.TRUE)
