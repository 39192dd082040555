"""Exception hierarchy shared across the package.

Three branches matter to callers: ``ConfigError`` (bad configuration or
usage), ``DataError`` (malformed or inconsistent inputs), and
``TransportError`` (a remote endpoint failed). The CLI maps them to exit
codes 1, 2 and 3 respectively.
"""

from __future__ import annotations


class TtsfcError(Exception):
    """Base class for all package errors."""


class ConfigError(TtsfcError):
    """Invalid configuration or usage."""


class DataError(TtsfcError):
    """Malformed, inconsistent, or out-of-contract data."""


class TransportError(TtsfcError):
    """A remote endpoint is unreachable or returned a non-2xx response."""


# -- core --------------------------------------------------------------

class UnknownVerdict(DataError):
    def __init__(self, token: str):
        super().__init__(f"unknown verdict token: {token!r}")
        self.token = token


class MissingLabel(DataError):
    """Model completion contains no label marker."""


# -- retrieval ---------------------------------------------------------

class EmptyCorpus(DataError):
    """No documents (or no indexable tokens) to build an index from."""


class ProviderError(TransportError):
    """Embedding endpoint failed."""


class DimensionMismatch(DataError):
    """Embedding vectors disagree in length."""


# -- gateway -----------------------------------------------------------

class TemplateError(ConfigError):
    """Prompt template is malformed or missing a required placeholder."""


class ReplayMiss(TransportError):
    """Replay fixture has no entry for the requested prompt/sequence."""


class AllPathsUnparseable(DataError):
    """Every sampled completion failed to parse into a reasoning path."""


# -- strategies --------------------------------------------------------

class EmptyPaths(DataError):
    """A selection strategy was given no reasoning paths."""


class LengthMismatch(DataError):
    """Two parallel sequences differ in length."""


class EmptyDecomposition(DataError):
    """No sub-question could be parsed from the decomposition output."""


# -- verifier ----------------------------------------------------------

class MissingGold(DataError):
    def __init__(self, claim_id: str):
        super().__init__(f"no gold verdict for claim {claim_id!r}")
        self.claim_id = claim_id


class ScoreOutOfRange(DataError):
    """Scoring service returned a value outside [0, 1]."""


# -- complexity --------------------------------------------------------

class CoverageMismatch(DataError):
    """Two run sets or label sets do not cover the same claim ids."""


class DegenerateInput(DataError):
    """Too few vectors or zero variance; no principal direction exists."""


class ClassTooSmall(DataError):
    def __init__(self, label: int, count: int):
        super().__init__(f"class {label} has {count} stack(s); need at least 2")
        self.label = label


class ShapeMismatch(DataError):
    """Latent stacks or prototypes disagree in layer count or width."""


# -- evalkit -----------------------------------------------------------

class EmptyEvaluation(DataError):
    """No claims to evaluate."""


class UnparseableJudgment(DataError):
    """Judge completion carries no usable binary label."""
