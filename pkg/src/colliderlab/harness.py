"""Query chat models with rendered prompts and keep replayable transcripts.

Three transports share one interface:

* ``HTTPTransport`` talks to a provider endpoint (credentials from env vars),
* ``ScriptedTransport`` answers from a function, mapping or sequence,
* ``ReplayTransport`` answers only from a ``TranscriptStore`` and never
  touches the network.

Environment variables per provider::

    openai     OPENAI_API_KEY,    OPENAI_BASE_URL    (default https://api.openai.com/v1)
    anthropic  ANTHROPIC_API_KEY, ANTHROPIC_BASE_URL (default https://api.anthropic.com)
    gemini     GEMINI_API_KEY,    GEMINI_BASE_URL    (default https://generativelanguage.googleapis.com)

Any OpenAI-compatible server can be used through ``openai`` with
``OPENAI_BASE_URL`` pointing at it.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import tempfile
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable

import httpx

from .exceptions import (CacheMiss, NotNumeric, OutOfRange, RateLimited, StoreCorruption, Timeout,
                         TransportError, TransportFailure)
from .prompts import PromptBundle
from .stats import AgentType, JudgmentRecord

logger = logging.getLogger(__name__)

_STRICT_NUMBER = re.compile(r"\s*([+-]?(?:\d+(?:\.\d+)?|\.\d+))\.?\s*")
_ANY_NUMBER = re.compile(r"[+-]?(?:\d+(?:\.\d+)?|\.\d+)")


def request_hash(model: str, temperature: float, prompt: str) -> str:
    blob = json.dumps({"model": model, "temperature": float(temperature), "prompt": prompt},
                      sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class QueryRequest:
    provider: str
    model: str
    temperature: float = 0.0
    prompt: str = ""
    max_retries: int = 3
    timeout: float = 60.0

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")

    @property
    def hash(self) -> str:
        return request_hash(self.model, self.temperature, self.prompt)

    def with_prompt(self, prompt: str) -> "QueryRequest":
        if not prompt:
            raise ValueError("prompt must be non-empty")
        return QueryRequest(self.provider, self.model, self.temperature, prompt, self.max_retries, self.timeout)


@dataclass(frozen=True)
class TranscriptEntry:
    request_hash: str
    model: str
    temperature: float
    prompt: str
    raw_response: str
    parsed_value: float | None
    timestamp: str
    error: str | None = None

    def __post_init__(self):
        if self.parsed_value is not None and not 0.0 <= self.parsed_value <= 100.0:
            raise ValueError(f"parsed value {self.parsed_value} outside [0, 100]")

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, ensure_ascii=False, indent=1) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "TranscriptEntry":
        return cls(**json.loads(text))


def parse_numeric(raw: str, lenient: bool = False) -> float:
    """Parse a bare number on the 0-100 scale.

    Strict mode accepts surrounding whitespace and one trailing period only;
    lenient mode takes the first number found anywhere in the text.
    """
    if lenient:
        match = _ANY_NUMBER.search(raw)
        if match is None:
            raise NotNumeric(f"no number in response {raw!r}")
        text = match.group(0)
    else:
        match = _STRICT_NUMBER.fullmatch(raw)
        if match is None:
            raise NotNumeric(f"response is not a bare number: {raw!r}")
        text = match.group(1)
    value = float(text)
    if not 0.0 <= value <= 100.0:
        raise OutOfRange(f"response {value} outside [0, 100]")
    return value


class TranscriptStore:
    """Append-only directory with one ``<request_hash>.json`` file per entry."""

    def __init__(self, root):
        self.root = Path(root)

    def path(self, key: str) -> Path:
        return self.root / f"{key}.json"

    def __contains__(self, key: str) -> bool:
        return self.path(key).exists()

    def keys(self) -> list[str]:
        if not self.root.exists():
            return []
        return sorted(p.stem for p in self.root.glob("*.json"))

    def get(self, key: str) -> TranscriptEntry:
        path = self.path(key)
        if not path.exists():
            raise CacheMiss(f"no transcript for request {key[:12]}... in {self.root}")
        try:
            entry = TranscriptEntry.from_json(path.read_text(encoding="utf-8"))
        except (ValueError, TypeError) as exc:
            raise StoreCorruption(f"{path}: {exc}") from exc
        recomputed = request_hash(entry.model, entry.temperature, entry.prompt)
        if entry.request_hash != key or recomputed != key:
            raise StoreCorruption(f"{path}: stored request does not hash to its key")
        return entry

    def put(self, entry: TranscriptEntry) -> bool:
        """Write ``entry`` unless its key exists; returns whether it was written."""
        self.root.mkdir(parents=True, exist_ok=True)
        final = self.path(entry.request_hash)
        if final.exists():
            return False
        fd, tmp = tempfile.mkstemp(dir=self.root, prefix=".tmp-", suffix=".json")
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(entry.to_json())
            # link fails if another writer got there first; the first entry wins
            os.link(tmp, final)
            return True
        except FileExistsError:
            return False
        finally:
            os.unlink(tmp)

    def verify(self) -> list[str]:
        """Keys whose file is unreadable or does not hash to its key."""
        bad = []
        for key in self.keys():
            try:
                self.get(key)
            except StoreCorruption:
                bad.append(key)
        return bad


class Transport:
    """Sends one request and returns the model's raw text."""

    def send(self, request: QueryRequest) -> str:
        raise NotImplementedError


class ReplayTransport(Transport):
    def __init__(self, store: TranscriptStore):
        self.store = store

    def send(self, request):
        return self.store.get(request.hash).raw_response


class ScriptedTransport(Transport):
    """Deterministic stand-in for a model: callable, prompt->text mapping, or sequence."""

    def __init__(self, responder):
        self._lock = threading.Lock()
        if callable(responder):
            self._respond = responder
        elif isinstance(responder, dict):
            self._respond = lambda req: self._lookup(responder, req)
        else:
            replies = iter(list(responder))
            self._respond = lambda req: next(replies)

    @staticmethod
    def _lookup(mapping, request):
        for key in (request.prompt, request.hash):
            if key in mapping:
                return mapping[key]
        raise TransportFailure(f"scripted transport has no reply for request {request.hash[:12]}...")

    def send(self, request):
        with self._lock:
            try:
                return self._respond(request)
            except StopIteration:
                raise TransportFailure("scripted transport ran out of replies") from None


class _Provider:
    def __init__(self, key_env, url_env, default_url):
        self.key_env, self.url_env, self.default_url = key_env, url_env, default_url


PROVIDERS = {
    "openai": _Provider("OPENAI_API_KEY", "OPENAI_BASE_URL", "https://api.openai.com/v1"),
    "anthropic": _Provider("ANTHROPIC_API_KEY", "ANTHROPIC_BASE_URL", "https://api.anthropic.com"),
    "gemini": _Provider("GEMINI_API_KEY", "GEMINI_BASE_URL", "https://generativelanguage.googleapis.com"),
}


class HTTPTransport(Transport):
    """Live chat-completion calls with a minimum interval between requests."""

    def __init__(self, provider: str, client: httpx.Client | None = None, env=None,
                 min_interval: float = 0.0, max_tokens: int = 16):
        if provider not in PROVIDERS:
            raise ValueError(f"unknown provider {provider!r}; expected one of {sorted(PROVIDERS)}")
        env = os.environ if env is None else env
        spec = PROVIDERS[provider]
        self.provider = provider
        self.api_key = env.get(spec.key_env)
        if not self.api_key:
            raise TransportFailure(f"set {spec.key_env} to query {provider}")
        self.base_url = env.get(spec.url_env, spec.default_url).rstrip("/")
        self.client = client or httpx.Client()
        self.max_tokens = max_tokens
        self.min_interval = min_interval
        self._lock = threading.Lock()
        self._last = 0.0

    def _throttle(self):
        with self._lock:
            wait = self._last + self.min_interval - time.monotonic()
            if wait > 0:
                time.sleep(wait)
            self._last = time.monotonic()

    def _build(self, req: QueryRequest):
        messages = [{"role": "user", "content": req.prompt}]
        if self.provider == "openai":
            return (f"{self.base_url}/chat/completions",
                    {"Authorization": f"Bearer {self.api_key}"},
                    {"model": req.model, "messages": messages, "temperature": req.temperature})
        if self.provider == "anthropic":
            return (f"{self.base_url}/v1/messages",
                    {"x-api-key": self.api_key, "anthropic-version": "2023-06-01"},
                    {"model": req.model, "messages": messages, "temperature": req.temperature,
                     "max_tokens": self.max_tokens})
        return (f"{self.base_url}/v1beta/models/{req.model}:generateContent",
                {"x-goog-api-key": self.api_key},
                {"contents": [{"role": "user", "parts": [{"text": req.prompt}]}],
                 "generationConfig": {"temperature": req.temperature}})

    def _extract(self, body: dict) -> str:
        try:
            if self.provider == "openai":
                return body["choices"][0]["message"]["content"]
            if self.provider == "anthropic":
                return "".join(part.get("text", "") for part in body["content"])
            return "".join(part.get("text", "") for part in body["candidates"][0]["content"]["parts"])
        except (KeyError, IndexError, TypeError) as exc:
            raise TransportFailure(f"unexpected {self.provider} response shape: {exc!r}") from exc

    def send(self, request):
        url, headers, payload = self._build(request)
        self._throttle()
        try:
            resp = self.client.post(url, headers=headers, json=payload, timeout=request.timeout)
        except httpx.TimeoutException as exc:
            raise Timeout(f"{self.provider} request timed out after {request.timeout}s") from exc
        except httpx.HTTPError as exc:
            raise TransportFailure(f"{self.provider} request failed: {exc}") from exc
        if resp.status_code == 429:
            raise RateLimited(f"{self.provider} rate limit (HTTP 429)")
        if resp.status_code >= 400:
            raise TransportFailure(f"{self.provider} returned HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            body = resp.json()
        except ValueError as exc:
            raise TransportFailure(f"{self.provider} returned non-JSON body") from exc
        return self._extract(body)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _reparse(entry: TranscriptEntry, lenient: bool) -> TranscriptEntry:
    """Stored entries keep their strict parse; lenient runs re-read the raw text."""
    if not lenient or entry.parsed_value is not None:
        return entry
    try:
        return replace(entry, parsed_value=parse_numeric(entry.raw_response, lenient=True), error=None)
    except (NotNumeric, OutOfRange):
        return entry


def execute_query(req: QueryRequest, transport: Transport, store: TranscriptStore | None = None,
                  lenient: bool = False, backoff: float = 1.0,
                  sleep: Callable[[float], None] = time.sleep, clock: Callable[[], str] = _now,
                  ) -> TranscriptEntry:
    """Run one request and return its transcript entry.

    Replay answers come straight from the store. Otherwise a stored entry for
    the same request is reused; fresh answers are appended to ``store``.
    Timeouts and rate limits are retried with exponential backoff.
    """
    if not req.prompt:
        raise ValueError("prompt must be non-empty")
    key = req.hash
    if isinstance(transport, ReplayTransport):
        return _reparse(transport.store.get(key), lenient)
    if store is not None and key in store:
        return _reparse(store.get(key), lenient)
    for attempt in range(req.max_retries + 1):
        try:
            raw = transport.send(req)
            break
        except (Timeout, RateLimited) as exc:
            if attempt == req.max_retries:
                raise
            delay = backoff * 2 ** attempt
            logger.warning("%s; retrying in %.1fs", exc, delay)
            sleep(delay)
    try:
        value, error = parse_numeric(raw, lenient), None
    except (NotNumeric, OutOfRange) as exc:
        value, error = None, f"{type(exc).__name__}: {exc}"
    entry = TranscriptEntry(key, req.model, float(req.temperature), req.prompt, raw, value, clock(), error)
    if store is not None:
        store.put(entry)
    return entry


@dataclass
class RunReport:
    records: list[JudgmentRecord] = field(default_factory=list)
    errors: list[dict] = field(default_factory=list)
    n_bundles: int = 0

    @property
    def complete(self) -> bool:
        return len(self.records) + len(self.errors) == self.n_bundles


def run_experiment(bundles: list[PromptBundle], template: QueryRequest, transport: Transport,
                   store: TranscriptStore | None = None, concurrency: int = 4, lenient: bool = False,
                   **query_kwargs) -> RunReport:
    """Query every bundle once; parse failures and transport errors land in ``errors``."""
    if not bundles:
        raise ValueError("no prompt bundles to run")

    def one(bundle):
        req = template.with_prompt(bundle.full_text)
        try:
            return execute_query(req, transport, store, lenient=lenient, **query_kwargs), None
        except StoreCorruption:
            raise
        except TransportError as exc:
            return None, f"{type(exc).__name__}: {exc}"

    with ThreadPoolExecutor(max_workers=max(1, concurrency)) as pool:
        outcomes = list(pool.map(one, bundles))

    report = RunReport(n_bundles=len(bundles))
    for index, (bundle, (entry, failure)) in enumerate(zip(bundles, outcomes)):
        error = failure or (entry.error if entry is not None else None)
        if error is None and entry.parsed_value is None:
            error = "NotNumeric: no parsed value"
        if error is not None:
            report.errors.append({"index": index, "domain": bundle.domain,
                                  "counterbalance": bundle.counterbalance, "task_id": bundle.task_id,
                                  "request_hash": template.with_prompt(bundle.full_text).hash,
                                  "raw_response": entry.raw_response if entry is not None else None,
                                  "error": error})
            continue
        report.records.append(JudgmentRecord(
            agent_id=f"{template.provider}:{template.model}",
            agent_type=AgentType.LLM,
            model_name=template.model,
            domain=bundle.domain,
            counterbalance=bundle.counterbalance,
            task_id=bundle.task_id,
            response=entry.parsed_value,
            temperature=template.temperature,
        ))
    return report
