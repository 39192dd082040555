"""Deep-learning adapters for the claim-verification pipeline:
per-layer latent extraction to LTNT files, LoRA verifier fine-tuning,
and the /v1/score HTTP scoring service.
"""

from .extract import ExtractorConfig, extract_latents
from .server import ScoringServer, serve_scores
from .toy import build_toy_checkpoint
from .train import TrainerConfig, train_verifier, load_verifier

__version__ = "0.1.0"

__all__ = [
    "ExtractorConfig",
    "extract_latents",
    "ScoringServer",
    "serve_scores",
    "build_toy_checkpoint",
    "TrainerConfig",
    "train_verifier",
    "load_verifier",
    "__version__",
]
