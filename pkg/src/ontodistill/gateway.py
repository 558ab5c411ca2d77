"""Transport-abstracted chat completion with record and replay.

Every request is a fresh single-turn conversation: one user message, no
history. Live mode talks to a chat-completion HTTP endpoint with retry on
timeout. Record mode is live plus an append-only transcript. Replay mode
answers from the transcript alone and never touches the network, which is
what makes whole sessions bit-reproducible.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import time
import uuid
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import httpx

from .errors import (
    EmptyPromptError,
    GatewayTimeoutError,
    ReplayMissError,
    TransportError,
)

logger = logging.getLogger(__name__)


class TransportMode(str, Enum):
    LIVE = "live"
    RECORD = "record"
    REPLAY = "replay"


class ResponseTransport(str, Enum):
    LIVE = "Live"
    REPLAY = "Replay"


class ResponseSignal(str, Enum):
    OK = "Ok"
    EMPTY = "Empty"
    REFUSAL = "Refusal"


DEFAULT_REFUSAL_PATTERNS: tuple[str, ...] = (
    "no possible relationship",
    "there is no relationship",
    "i cannot help",
    "i am not able to",
)


@dataclass(frozen=True)
class ChatRequest:
    prompt_text: str
    session_id: str
    sequence_no: int
    request_id: str = field(default_factory=lambda: uuid.uuid4().hex)


@dataclass(frozen=True)
class ChatResponse:
    text: str
    latency_ms: int
    transport: ResponseTransport
    truncated: bool = False


@dataclass(frozen=True)
class GatewayConfig:
    endpoint_url: str | None = None
    model_name: str = "default"
    timeout_s: float = 60.0
    max_retries: int = 3
    backoff_base_s: float = 2.0
    max_parallel_requests: int = 1
    api_key_env: str = "ONTODISTILL_API_KEY"


def prompt_hash(text: str) -> str:
    """Checksum of the prompt with per-line and overall trailing whitespace
    stripped, so cosmetic template drift does not break replay."""
    normalized = "\n".join(line.rstrip() for line in text.split("\n")).rstrip()
    return hashlib.sha256(normalized.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class TranscriptEntry:
    prompt_hash: str
    sequence_no: int
    response_text: str

    def to_doc(self) -> dict:
        return {"prompt_hash": self.prompt_hash, "sequence_no": self.sequence_no,
                "response_text": self.response_text}

    @classmethod
    def from_doc(cls, doc: dict) -> TranscriptEntry:
        return cls(prompt_hash=doc["prompt_hash"],
                   sequence_no=doc["sequence_no"],
                   response_text=doc["response_text"])


class Transcript:
    """Ordered request/response log, one JSON document per line on disk.

    ``path`` is optional; with it set every append lands on disk immediately,
    so a crash mid-session loses nothing already answered.
    """

    def __init__(self, entries: list[TranscriptEntry] | None = None,
                 path: Path | None = None):
        self.entries: list[TranscriptEntry] = list(entries or [])
        self.path = path

    @classmethod
    def load(cls, path: Path) -> Transcript:
        entries = []
        if path.exists():
            with path.open(encoding="utf-8") as handle:
                for line in handle:
                    line = line.strip()
                    if line:
                        entries.append(TranscriptEntry.from_doc(json.loads(line)))
        return cls(entries=entries, path=path)

    def append(self, entry: TranscriptEntry) -> None:
        if self.entries and entry.sequence_no <= self.entries[-1].sequence_no:
            raise ValueError(
                f"sequence_no {entry.sequence_no} does not increase on"
                f" {self.entries[-1].sequence_no}")
        self.entries.append(entry)
        if self.path is not None:
            with self.path.open("a", encoding="utf-8") as handle:
                handle.write(json.dumps(entry.to_doc(), ensure_ascii=False) + "\n")


class Gateway:
    """One object per session; mode decides where answers come from."""

    def __init__(
        self,
        config: GatewayConfig,
        mode: TransportMode,
        transcript: Transcript | None = None,
        http_client: httpx.Client | None = None,
        sleeper=time.sleep,
        clock=time.monotonic,
    ):
        self.config = config
        self.mode = mode
        self.transcript = transcript if transcript is not None else Transcript()
        self._client = http_client
        self._sleep = sleeper
        self._clock = clock
        self.last_attempt_count = 0
        self._hash_cursor: dict[str, int] = {}
        self._by_hash: dict[str, list[int]] = {}
        self._by_sequence: dict[int, int] = {}
        if mode is TransportMode.REPLAY:
            for index, entry in enumerate(self.transcript.entries):
                if entry.prompt_hash:
                    self._by_hash.setdefault(entry.prompt_hash, []).append(index)
                self._by_sequence[entry.sequence_no] = index

    # -- public ----------------------------------------------------------------

    def complete(self, request: ChatRequest) -> ChatResponse:
        if not request.prompt_text.strip():
            raise EmptyPromptError("prompt text is empty")
        if self.mode is TransportMode.REPLAY:
            return self._replay(request)
        response = self._live(request)
        if self.mode is TransportMode.RECORD:
            self.transcript.append(TranscriptEntry(
                prompt_hash=prompt_hash(request.prompt_text),
                sequence_no=request.sequence_no,
                response_text=response.text,
            ))
        return response

    # -- replay ------------------------------------------------------------------

    def _replay(self, request: ChatRequest) -> ChatResponse:
        digest = prompt_hash(request.prompt_text)
        indexes = self._by_hash.get(digest, [])
        cursor = self._hash_cursor.get(digest, 0)
        if cursor < len(indexes):
            self._hash_cursor[digest] = cursor + 1
            entry = self.transcript.entries[indexes[cursor]]
        elif request.sequence_no in self._by_sequence:
            entry = self.transcript.entries[self._by_sequence[request.sequence_no]]
        else:
            raise ReplayMissError(
                f"no transcript entry for prompt hash {digest[:12]}… or"
                f" sequence {request.sequence_no}",
                detail={"prompt_hash": digest, "sequence_no": request.sequence_no},
            )
        return ChatResponse(text=entry.response_text, latency_ms=0,
                            transport=ResponseTransport.REPLAY)

    # -- live ---------------------------------------------------------------------

    def _live(self, request: ChatRequest) -> ChatResponse:
        if not self.config.endpoint_url:
            raise TransportError("no endpoint_url configured for live mode")
        payload = {
            "model": self.config.model_name,
            "messages": [{"role": "user", "content": request.prompt_text}],
        }
        headers = {}
        api_key = os.environ.get(self.config.api_key_env, "")
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        attempts = 0
        started = self._clock()
        while True:
            attempts += 1
            self.last_attempt_count = attempts
            try:
                http_response = self._http().post(
                    self.config.endpoint_url, json=payload, headers=headers,
                    timeout=self.config.timeout_s)
                break
            except httpx.TimeoutException as exc:
                if attempts > self.config.max_retries:
                    raise GatewayTimeoutError(
                        f"request timed out after {attempts} attempts") from exc
                delay = self.config.backoff_base_s * (2 ** (attempts - 1))
                logger.warning("attempt %d timed out; retrying in %.1fs",
                               attempts, delay)
                self._sleep(delay)
            except httpx.TransportError as exc:
                if attempts > self.config.max_retries:
                    raise TransportError(
                        f"transport failed after {attempts} attempts: {exc}") from exc
                delay = self.config.backoff_base_s * (2 ** (attempts - 1))
                logger.warning("attempt %d failed (%s); retrying in %.1fs",
                               attempts, exc, delay)
                self._sleep(delay)
        latency_ms = int((self._clock() - started) * 1000)
        if http_response.status_code >= 400:
            raise TransportError(
                f"endpoint answered {http_response.status_code}",
                detail={"status_code": http_response.status_code,
                        "body": http_response.text[:500]})
        text, truncated = _extract_completion(http_response)
        return ChatResponse(text=text, latency_ms=latency_ms,
                            transport=ResponseTransport.LIVE, truncated=truncated)

    def _http(self) -> httpx.Client:
        if self._client is None:
            self._client = httpx.Client()
        return self._client


def _extract_completion(http_response: httpx.Response) -> tuple[str, bool]:
    try:
        body = http_response.json()
        choice = body["choices"][0]
        text = choice["message"]["content"]
        truncated = choice.get("finish_reason") == "length"
    except (ValueError, KeyError, IndexError, TypeError) as exc:
        raise TransportError(f"malformed completion payload: {exc}") from exc
    if not isinstance(text, str):
        raise TransportError("completion content is not text")
    return text, truncated


def detect_refusal_or_empty(
    response: ChatResponse | str,
    patterns: tuple[str, ...] = DEFAULT_REFUSAL_PATTERNS,
) -> ResponseSignal:
    """Classify a response before parsing.

    Empty means there is nothing to parse at all; task-specific emptiness
    (a parse that yields zero records) is judged by the caller, which knows
    what it asked for.
    """
    text = response.text if isinstance(response, ChatResponse) else response
    stripped = text.strip()
    if not stripped or not any(ch.isalnum() for ch in stripped):
        return ResponseSignal.EMPTY
    lowered = stripped.casefold()
    for pattern in patterns:
        if pattern.casefold() in lowered:
            return ResponseSignal.REFUSAL
    return ResponseSignal.OK
