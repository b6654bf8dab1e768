"""LLM backends: live HTTP, record/replay cassettes, and a scripted test double."""
from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from collections import Counter
from pathlib import Path
from typing import Callable, Protocol

import httpx

from lwm.errors import BackendError, ContractError, MissingCassette, ParseError
from lwm.llm.schemas import SCHEMAS, LlmCall, LlmResult

log = logging.getLogger(__name__)

DEFAULT_BASE_URL = "https://api.openai.com/v1"
DEFAULT_MODEL = "gpt-4o"


class Backend(Protocol):
    def complete(self, call: LlmCall) -> LlmResult: ...


def complete(backend: Backend, call: LlmCall) -> LlmResult:
    if call.function.name not in SCHEMAS:
        raise ContractError(f"unknown function {call.function.name!r}")
    return backend.complete(call)


def canonical_prompt(text: str) -> str:
    text = text.replace("\r\n", "\n").replace("\r", "\n")
    return "\n".join(line.rstrip() for line in text.split("\n")).strip()


def cassette_key(call: LlmCall) -> str:
    payload = json.dumps([call.function.name, canonical_prompt(call.user), float(call.temperature)])
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def decode_tool_call(call: LlmCall, body: dict) -> LlmResult:
    """Pull the forced tool call out of a chat-completions response body."""
    try:
        message = body["choices"][0]["message"]
        tool_calls = message.get("tool_calls") or []
        fn = tool_calls[0]["function"]
        raw = fn["arguments"]
    except (KeyError, IndexError, TypeError) as exc:
        raise ParseError(f"{call.function.name}: response has no tool call") from exc
    if fn.get("name") not in (None, call.function.name):
        raise ContractError(f"expected a call to {call.function.name}, got {fn.get('name')}")
    try:
        args = json.loads(raw) if isinstance(raw, str) else raw
    except json.JSONDecodeError as exc:
        raise ParseError(f"{call.function.name}: malformed tool arguments") from exc
    return call.function.parse(args)


class HttpBackend:
    """OpenAI-compatible chat-completions client with forced function calling."""

    def __init__(
        self,
        api_key: str | None = None,
        base_url: str | None = None,
        model: str | None = None,
        max_retries: int = 3,
        backoff: float = 1.0,
        timeout: float = 120.0,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.api_key = api_key if api_key is not None else os.environ.get("LWM_API_KEY", "")
        self.base_url = (base_url or os.environ.get("LWM_BASE_URL") or DEFAULT_BASE_URL).rstrip("/")
        self.model = model or os.environ.get("LWM_MODEL") or DEFAULT_MODEL
        self.max_retries = max_retries
        self.backoff = backoff
        self.sleep = sleep
        self.client = httpx.Client(timeout=timeout, transport=transport)
        self.requests = 0
        self._lock = threading.Lock()

    def request_body(self, call: LlmCall) -> dict:
        return {
            "model": self.model,
            "messages": [
                {"role": "system", "content": call.system},
                {"role": "user", "content": call.user},
            ],
            "tools": [call.function.to_tool()],
            "tool_choice": {"type": "function", "function": {"name": call.function.name}},
            "temperature": call.temperature,
            "max_tokens": call.max_tokens,
        }

    def _post(self, body: dict) -> dict:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        url = f"{self.base_url}/chat/completions"
        for attempt in range(self.max_retries + 1):
            with self._lock:
                self.requests += 1
            try:
                resp = self.client.post(url, json=body, headers=headers)
            except httpx.TransportError as exc:
                err = BackendError(f"transport failure: {exc}")
            else:
                if resp.status_code == 429 or resp.status_code >= 500:
                    err = BackendError(f"HTTP {resp.status_code}")
                elif resp.status_code >= 400:
                    raise BackendError(f"HTTP {resp.status_code}: {resp.text[:200]}")
                else:
                    try:
                        return resp.json()
                    except ValueError as exc:
                        raise ParseError("response body is not JSON") from exc
            if attempt == self.max_retries:
                raise err
            delay = self.backoff * (2**attempt)
            log.warning("%s; retrying in %.1fs", err, delay)
            self.sleep(delay)
        raise AssertionError("unreachable")

    def complete(self, call: LlmCall) -> LlmResult:
        body = self.request_body(call)
        try:
            return decode_tool_call(call, self._post(body))
        except (ParseError, ContractError) as exc:
            log.warning("bad tool output for %s (%s); retrying once", call.function.name, exc)
        return decode_tool_call(call, self._post(body))


class RecordingBackend:
    """Pass calls through to ``inner`` and append each new key to a JSONL cassette."""

    def __init__(self, inner: Backend, path: str | Path):
        self.inner = inner
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._seen: set[str] = set()
        if self.path.exists():
            self._seen = {json.loads(line)["key"] for line in self.path.read_text().splitlines() if line}
        self._lock = threading.Lock()

    def complete(self, call: LlmCall) -> LlmResult:
        result = self.inner.complete(call)
        key = cassette_key(call)
        with self._lock:
            if key not in self._seen:
                self._seen.add(key)
                entry = {"key": key, "function": call.function.name, "prompt": call.user,
                         "result": result.to_json()}
                with self.path.open("a", encoding="utf-8") as fh:
                    fh.write(json.dumps(entry, sort_keys=True) + "\n")
        return result


class ReplayBackend:
    """Serve results from a cassette; a miss is an error, never a network call."""

    def __init__(self, path: str | Path):
        self.store: dict[str, tuple[str, dict]] = {}
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if line.strip():
                entry = json.loads(line)
                self.store[entry["key"]] = (entry["function"], entry["result"])
        self.hits = 0
        self.misses = 0
        self._lock = threading.Lock()

    def complete(self, call: LlmCall) -> LlmResult:
        key = cassette_key(call)
        with self._lock:
            entry = self.store.get(key)
            if entry is None:
                self.misses += 1
                raise MissingCassette(f"no recording for {call.function.name} call {key[:12]}")
            self.hits += 1
        function, data = entry
        if function != call.function.name:
            raise ContractError(f"cassette entry {key[:12]} is for {function}")
        return LlmResult.from_json(function, data)


Responder = Callable[[LlmCall], dict]


class ScriptedBackend:
    """Test double: per-function responders (callables or queues of argument dicts)."""

    def __init__(self, responders: dict | None = None, default: Responder | None = None):
        self.responders = dict(responders or {})
        self.default = default
        self.calls: list[LlmCall] = []
        self._lock = threading.Lock()

    def complete(self, call: LlmCall) -> LlmResult:
        with self._lock:
            self.calls.append(call)
            spec = self.responders.get(call.function.name, self.default)
            if spec is None:
                raise BackendError(f"no scripted response for {call.function.name}")
            if isinstance(spec, list):
                if not spec:
                    raise BackendError(f"scripted responses for {call.function.name} exhausted")
                reply = spec.pop(0)
            else:
                reply = spec
        if callable(reply):
            reply = reply(call)
        if isinstance(reply, Exception):
            raise reply
        return call.function.parse(dict(reply))

    def count(self, function: str) -> int:
        return sum(1 for c in self.calls if c.function.name == function)


class CountingBackend:
    """Wraps a backend and tallies invocations per function and per cassette key."""

    def __init__(self, inner: Backend):
        self.inner = inner
        self.by_function: Counter = Counter()
        self.by_key: Counter = Counter()
        self._lock = threading.Lock()

    def complete(self, call: LlmCall) -> LlmResult:
        with self._lock:
            self.by_function[call.function.name] += 1
            self.by_key[(call.function.name, cassette_key(call))] += 1
        return self.inner.complete(call)

    @property
    def total(self) -> int:
        return sum(self.by_function.values())
