"""Prompt construction, m-way sampling, and chat transports.

`render_prompt` is a pure function (identical inputs give identical
bytes), so the replay transport can key canned completions on a stable
hash of the rendered messages. With `ReplayTransport` the entire
gateway is deterministic and offline.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import time
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from threading import Lock
from typing import Iterable, Mapping, Protocol, Sequence

import httpx

from .core import ClaimRecord, ReasoningPath, parse_response, read_jsonl
from .errors import (
    AllPathsUnparseable,
    DataError,
    MissingLabel,
    ReplayMiss,
    TemplateError,
    TransportError,
    UnknownVerdict,
)
from .retrieval import EvidenceDoc

logger = logging.getLogger(__name__)

Message = dict[str, str]  # {"role": ..., "content": ...}


@dataclass(frozen=True)
class Exemplar:
    claim: str
    evidence: str
    verdict: str
    justification: str


@dataclass(frozen=True)
class PromptTemplate:
    """System text, few-shot exemplars, and the user-input frame.

    The input frame must contain ``{claim}`` and ``{evidence}`` exactly
    once each; ``{subquestions}`` is optional.
    """

    system: str
    exemplars: tuple[Exemplar, ...]
    input_frame: str

    def __post_init__(self):
        for placeholder in ("{claim}", "{evidence}"):
            n = self.input_frame.count(placeholder)
            if n != 1:
                raise TemplateError(
                    f"input frame must contain {placeholder} exactly once, found {n}"
                )
        if self.input_frame.count("{subquestions}") > 1:
            raise TemplateError("input frame has more than one {subquestions}")


@dataclass(frozen=True)
class SamplingConfig:
    model: str
    temperature: float = 0.45
    m: int = 10
    max_tokens: int = 1024
    seed: int | None = None

    def __post_init__(self):
        if self.temperature < 0:
            raise DataError("temperature must be >= 0")
        if self.m < 1:
            raise DataError("m must be >= 1")


# -- template files -------------------------------------------------------------
#
# Plain text, split into sections by lines of the form [[name]].
# Repeated [[exemplar]] sections hold [Claim]/[Evidence]/[Verdict]/
# [Justification] fields.

_SECTION = re.compile(r"^\[\[(\w+)\]\]\s*$")
_EXEMPLAR_FIELD = re.compile(
    r"^\[(Claim|Evidence|Verdict|Justification)\]:\s*", re.IGNORECASE | re.MULTILINE
)


def parse_sections(text: str) -> list[tuple[str, str]]:
    """Split template text into ordered (section_name, content) pairs."""
    sections: list[tuple[str, list[str]]] = []
    for line in text.splitlines():
        m = _SECTION.match(line)
        if m:
            sections.append((m.group(1).lower(), []))
        elif sections:
            sections[-1][1].append(line)
        elif line.strip():
            raise TemplateError(f"content before first [[section]] header: {line!r}")
    return [(name, "\n".join(lines).strip()) for name, lines in sections]


def _parse_exemplar(content: str) -> Exemplar:
    fields: dict[str, str] = {}
    matches = list(_EXEMPLAR_FIELD.finditer(content))
    if not matches:
        raise TemplateError("exemplar section has no [Claim]/[Evidence]/... fields")
    for m, nxt in zip(matches, matches[1:] + [None]):
        end = nxt.start() if nxt else len(content)
        fields[m.group(1).lower()] = content[m.end():end].strip()
    missing = {"claim", "evidence", "verdict"} - fields.keys()
    if missing:
        raise TemplateError(f"exemplar missing fields: {sorted(missing)}")
    return Exemplar(
        claim=fields["claim"],
        evidence=fields["evidence"],
        verdict=fields["verdict"],
        justification=fields.get("justification", ""),
    )


def parse_template(text: str) -> PromptTemplate:
    system = None
    input_frame = None
    exemplars = []
    for name, content in parse_sections(text):
        if name == "system":
            system = content
        elif name == "exemplar":
            exemplars.append(_parse_exemplar(content))
        elif name == "input":
            input_frame = content
        else:
            raise TemplateError(f"unknown template section [[{name}]]")
    if system is None or input_frame is None:
        raise TemplateError("template needs [[system]] and [[input]] sections")
    return PromptTemplate(system=system, exemplars=tuple(exemplars), input_frame=input_frame)


def load_template(path: str | Path) -> PromptTemplate:
    return parse_template(Path(path).read_text(encoding="utf-8"))


def builtin_template_text(name: str) -> str:
    """Text of a template shipped with the package (e.g. "fact_checking")."""
    ref = resources.files("ttsfc").joinpath(f"templates/{name}.txt")
    try:
        return ref.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise TemplateError(f"no builtin template named {name!r}") from None


def builtin_template(name: str = "fact_checking") -> PromptTemplate:
    return parse_template(builtin_template_text(name))


# -- rendering -------------------------------------------------------------------


def format_evidence(evidence: Sequence[EvidenceDoc]) -> str:
    return "\n".join(
        f"[Evidence {i}]: {doc.text}" for i, doc in enumerate(evidence, 1)
    )


def format_subquestions(subquestions: Sequence[str]) -> str:
    lines = "\n".join(f"{i}. {q}" for i, q in enumerate(subquestions, 1))
    return f"Sub-questions:\n{lines}"


def render_prompt(
    template: PromptTemplate,
    claim: ClaimRecord,
    evidence: Sequence[EvidenceDoc],
    subquestions: Sequence[str] | None = None,
) -> list[Message]:
    """One system and one user message; byte-deterministic given inputs."""
    if not evidence:
        raise DataError(f"claim {claim.id!r}: rendering needs nonempty evidence")
    blocks = []
    for i, ex in enumerate(template.exemplars, 1):
        blocks.append(
            f"Example {i}\n\n"
            f"[Claim]: {ex.claim}\n\n"
            f"[Evidence]: {ex.evidence}\n\n"
            f"[Verdict]: {ex.verdict}\n\n"
            f"[Justification]: {ex.justification}"
        )
    sub_block = format_subquestions(subquestions) if subquestions else ""
    frame = template.input_frame
    frame = frame.replace("{claim}", claim.claim)
    frame = frame.replace("{evidence}", format_evidence(evidence))
    if "{subquestions}" in frame:
        frame = frame.replace("{subquestions}", sub_block)
        # collapse the blank slot when there are no sub-questions
        frame = re.sub(r"\n{3,}", "\n\n", frame).strip()
    elif sub_block:
        frame = f"{frame}\n\n{sub_block}"
    blocks.append(frame)
    return [
        {"role": "system", "content": template.system},
        {"role": "user", "content": "\n\n".join(blocks)},
    ]


# -- transports -------------------------------------------------------------------


class ChatTransport(Protocol):
    def complete(self, messages: Sequence[Message], cfg: SamplingConfig, n: int
                 ) -> tuple[list[str], int]:
        """Return `n` completion texts and the number of requests issued."""
        ...


class HttpChatTransport:
    """Client for a ``POST {base}/chat/completions`` endpoint.

    Issues one request with the ``n`` parameter when the endpoint
    supports it, otherwise ``n`` sequential single-completion requests.
    Retries at most twice with exponential backoff on 429/5xx, since
    m-way sampling amplifies transient failures.
    """

    RETRIABLE = {429, 500, 502, 503, 504}

    def __init__(self, base_url: str, supports_n: bool = True, timeout: float = 120.0,
                 max_retries: int = 2, backoff_s: float = 0.5,
                 api_key_env: str = "CHAT_API_KEY"):
        self.base_url = base_url.rstrip("/")
        self.supports_n = supports_n
        self.timeout = timeout
        self.max_retries = max_retries
        self.backoff_s = backoff_s
        self.api_key_env = api_key_env

    def _headers(self) -> dict[str, str]:
        key = os.environ.get(self.api_key_env)
        return {"Authorization": f"Bearer {key}"} if key else {}

    def _post(self, payload: dict) -> dict:
        last = "no response"
        for attempt in range(self.max_retries + 1):
            if attempt:
                time.sleep(self.backoff_s * 2 ** (attempt - 1))
            try:
                resp = httpx.post(
                    f"{self.base_url}/chat/completions",
                    json=payload,
                    headers=self._headers(),
                    timeout=self.timeout,
                )
            except httpx.HTTPError as exc:
                last = f"connection error: {exc}"
                continue
            if resp.status_code == 200:
                return resp.json()
            last = f"status {resp.status_code}: {resp.text[:200]}"
            if resp.status_code not in self.RETRIABLE:
                break
        raise TransportError(f"chat endpoint failed after retries ({last})")

    def _payload(self, messages: Sequence[Message], cfg: SamplingConfig, n: int) -> dict:
        payload = {
            "model": cfg.model,
            "messages": list(messages),
            "temperature": cfg.temperature,
            "n": n,
            "max_tokens": cfg.max_tokens,
        }
        if cfg.seed is not None:
            payload["seed"] = cfg.seed
        return payload

    def complete(self, messages: Sequence[Message], cfg: SamplingConfig, n: int
                 ) -> tuple[list[str], int]:
        contents: list[str] = []
        requests = 0
        batches = [n] if self.supports_n else [1] * n
        for batch in batches:
            data = self._post(self._payload(messages, cfg, batch))
            requests += 1
            choices = data.get("choices", [])
            if len(choices) != batch:
                raise TransportError(
                    f"endpoint returned {len(choices)} choices, expected {batch}"
                )
            contents.extend(c["message"]["content"] for c in choices)
        return contents, requests


def replay_key(messages: Sequence[Message]) -> str:
    """Stable hash of a rendered message sequence."""
    canon = json.dumps(
        [{"role": m["role"], "content": m["content"]} for m in messages],
        sort_keys=True,
        ensure_ascii=True,
    )
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


def replay_entries(messages: Sequence[Message], contents: Sequence[str],
                   start_seq: int = 0) -> list[dict]:
    """Fixture rows for `contents` served in order for `messages`."""
    key = replay_key(messages)
    return [
        {"key_hash": key, "seq": start_seq + i, "content": content}
        for i, content in enumerate(contents)
    ]


class ReplayTransport:
    """Deterministic offline transport serving canned completions.

    Fixture rows are ``{"key_hash", "seq", "content"}``; each request
    for a prompt consumes the next `seq` values for its key, so
    repeated sampling of one prompt can return distinct fixtures.
    """

    def __init__(self, entries: Iterable[Mapping]):
        self._store: dict[str, dict[int, str]] = {}
        for row in entries:
            self._store.setdefault(row["key_hash"], {})[int(row["seq"])] = row["content"]
        self._cursor: dict[str, int] = {}
        self._lock = Lock()

    @classmethod
    def from_file(cls, path: str | Path) -> "ReplayTransport":
        return cls(read_jsonl(path))

    def complete(self, messages: Sequence[Message], cfg: SamplingConfig, n: int
                 ) -> tuple[list[str], int]:
        key = replay_key(messages)
        with self._lock:
            start = self._cursor.get(key, 0)
            self._cursor[key] = start + n
        canned = self._store.get(key, {})
        contents = []
        for seq in range(start, start + n):
            if seq not in canned:
                raise ReplayMiss(
                    f"replay fixture has no entry for key {key} seq {seq}"
                )
            contents.append(canned[seq])
        return contents, n


@dataclass(frozen=True)
class SampleResult:
    """Outcome of sampling one prompt `m` times.

    `llm_calls` counts generation calls (one per completion requested);
    `http_requests` may be lower when the endpoint batches via `n`.
    """

    paths: tuple[ReasoningPath, ...]
    llm_calls: int
    http_requests: int
    unparsed: tuple[str, ...]


def sample_paths(messages: Sequence[Message], cfg: SamplingConfig,
                 transport: ChatTransport) -> SampleResult:
    """Sample `cfg.m` completions and parse each into a reasoning path.

    Unparseable completions are logged and dropped (one bad sample must
    not kill a run); if none survive, raises `AllPathsUnparseable`.
    """
    contents, requests = transport.complete(messages, cfg, cfg.m)
    paths: list[ReasoningPath] = []
    unparsed: list[str] = []
    for content in contents:
        try:
            paths.append(parse_response(content))
        except (MissingLabel, UnknownVerdict) as exc:
            logger.warning("dropping unparseable completion: %s", exc)
            unparsed.append(content)
    if not paths:
        raise AllPathsUnparseable(
            f"all {len(contents)} completions failed to parse"
        )
    return SampleResult(
        paths=tuple(paths),
        llm_calls=cfg.m,
        http_requests=requests,
        unparsed=tuple(unparsed),
    )
