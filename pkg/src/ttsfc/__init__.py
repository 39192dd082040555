"""Verifier-guided test-time scaling for claim verification.

Retrieval (BM25 + embedding rerank), m-way reasoning-path sampling,
four verdict-selection strategies, verifier training-data construction,
latent-based claim-complexity routing, and evaluation tooling.
"""

from .core import (
    ClaimRecord,
    ReasoningPath,
    RunRecord,
    Strategy,
    Verdict,
    parse_response,
    parse_verdict,
    render_verdict,
)
from .errors import TtsfcError, ConfigError, DataError, TransportError

__version__ = "0.1.0"

__all__ = [
    "ClaimRecord",
    "ReasoningPath",
    "RunRecord",
    "Strategy",
    "Verdict",
    "parse_response",
    "parse_verdict",
    "render_verdict",
    "TtsfcError",
    "ConfigError",
    "DataError",
    "TransportError",
    "__version__",
]
