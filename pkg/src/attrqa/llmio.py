"""Chat-completion client with retries and a record/replay cassette store.

Every request is fingerprinted over its canonical serialization; a cassette
maps fingerprints to response texts. Replay mode never touches the network,
which makes full pipeline runs bit-deterministic offline. Record mode appends
fingerprint/request/response lines to the cassette file and returns the stored
response when the fingerprint is already present (record-once semantics).
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import httpx

from .jsonio import dumps_canonical, read_jsonl

Transport = Callable[["CompletionRequest"], str]

CASSETTE_MODES = ("record", "replay", "passthrough")


class TransportError(RuntimeError):
    """The endpoint could not be reached or returned a failure."""


class CassetteMiss(LookupError):
    """Replay requested for a request that was never recorded."""


class RetriesExhausted(TransportError):
    pass


@dataclass(frozen=True)
class CompletionRequest:
    """A chat completion call: system instruction plus alternating dialogue
    turns ending with a user turn."""

    model_name: str
    system: str
    turns: tuple[tuple[str, str], ...]
    temperature: float = 0.0
    max_output_tokens: int = 512

    def __post_init__(self):
        if not self.turns or self.turns[-1][0] != "user":
            raise ValueError("turns must end with a user turn")
        for i, (role, _) in enumerate(self.turns):
            expected = "user" if i % 2 == 0 else "assistant"
            if role != expected:
                raise ValueError(
                    f"turn {i} has role {role!r}; turns must alternate user/assistant"
                )
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")


def canonical_request(request: CompletionRequest) -> str:
    return dumps_canonical(
        {
            "model_name": request.model_name,
            "system": request.system,
            "turns": [[role, text] for role, text in request.turns],
            "temperature": request.temperature,
            "max_output_tokens": request.max_output_tokens,
        }
    )


def fingerprint(request: CompletionRequest) -> str:
    """Stable hash of the canonical serialization; any field change changes it."""
    return hashlib.sha256(canonical_request(request).encode("utf-8")).hexdigest()


class Cassette:
    """Line-delimited store of {fingerprint, request, response, recorded_at}.

    Reads are lock-free after load; record-mode appends serialize through one
    lock. On load, later entries win for a repeated fingerprint.
    """

    def __init__(self, path: str | Path | None, mode: str = "replay"):
        if mode not in CASSETTE_MODES:
            raise ValueError(f"unknown cassette mode: {mode}; expected one of {CASSETTE_MODES}")
        if path is None and mode != "passthrough":
            raise ValueError(f"{mode} mode requires a cassette path")
        self.path = Path(path) if path is not None else None
        self.mode = mode
        self.entries: dict[str, str] = {}
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists():
            for _, record in read_jsonl(self.path):
                self.entries[record["fingerprint"]] = record["response"]
        elif mode == "replay":
            raise FileNotFoundError(f"replay cassette not found: {self.path}")

    def lookup(self, fp: str) -> str | None:
        return self.entries.get(fp)

    def store(self, fp: str, request: CompletionRequest, response: str) -> None:
        if self.path is None:
            raise ValueError("cassette has no path to record into")
        line = dumps_canonical(
            {
                "fingerprint": fp,
                "request": json.loads(canonical_request(request)),
                "response": response,
                "recorded_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
            }
        )
        with self._lock:
            self.entries[fp] = response
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(line)
                fh.write("\n")


@dataclass
class HttpTransport:
    """Minimal OpenAI-style chat-completions POST. A pre-configured httpx.Client
    may be injected (tests use httpx.MockTransport)."""

    endpoint_url: str
    api_key: str = ""
    timeout: float = 60.0
    client: httpx.Client | None = None

    def __call__(self, request: CompletionRequest) -> str:
        messages = [{"role": "system", "content": request.system}]
        messages.extend({"role": role, "content": text} for role, text in request.turns)
        payload = {
            "model": request.model_name,
            "messages": messages,
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        }
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        post = self.client.post if self.client is not None else httpx.post
        try:
            response = post(self.endpoint_url, json=payload, headers=headers, timeout=self.timeout)
            response.raise_for_status()
            body = response.json()
            return body["choices"][0]["message"]["content"]
        except httpx.HTTPError as exc:
            raise TransportError(f"completion call failed: {exc}") from exc
        except (KeyError, IndexError, ValueError) as exc:
            raise TransportError(f"malformed completion response: {exc}") from exc


def _call_with_retries(
    transport: Transport,
    request: CompletionRequest,
    max_attempts: int,
    backoff: float,
    sleep: Callable[[float], None],
) -> str:
    last: Exception | None = None
    for attempt in range(max_attempts):
        try:
            return transport(request)
        except TransportError as exc:
            last = exc
            if attempt + 1 < max_attempts:
                sleep(backoff * (2**attempt))
    raise RetriesExhausted(f"gave up after {max_attempts} attempts: {last}") from last


def complete(
    request: CompletionRequest,
    cassette: Cassette,
    transport: Transport | None = None,
    max_attempts: int = 4,
    backoff: float = 0.25,
    sleep: Callable[[float], None] = time.sleep,
) -> str:
    """Resolve a request through the cassette, hitting the endpoint only in
    record/passthrough modes. Transient transport errors are retried with
    exponential backoff up to max_attempts."""
    fp = fingerprint(request)
    if cassette.mode == "replay":
        response = cassette.lookup(fp)
        if response is None:
            raise CassetteMiss(f"cassette miss: {fp}")
        return response

    if cassette.mode == "record":
        cached = cassette.lookup(fp)
        if cached is not None:
            return cached

    if transport is None:
        raise ValueError(f"cassette mode {cassette.mode!r} requires a transport")
    response = _call_with_retries(transport, request, max_attempts, backoff, sleep)
    if cassette.mode == "record":
        cassette.store(fp, request, response)
    return response


def complete_many(
    requests: Sequence[CompletionRequest],
    cassette: Cassette,
    transport: Transport | None = None,
    parallelism: int = 4,
) -> list[str]:
    """Bounded-parallel completion preserving input order."""
    if parallelism <= 1 or len(requests) <= 1:
        return [complete(r, cassette, transport) for r in requests]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(lambda r: complete(r, cassette, transport), requests))


@dataclass
class LLMClient:
    """Convenience bundle used by the evaluation harness."""

    model_name: str
    cassette: Cassette
    transport: Transport | None = None
    temperature: float = 0.0
    max_output_tokens: int = 512
    parallelism: int = 4

    def build_request(self, system: str, turns: Sequence[tuple[str, str]]) -> CompletionRequest:
        return CompletionRequest(
            model_name=self.model_name,
            system=system,
            turns=tuple(turns),
            temperature=self.temperature,
            max_output_tokens=self.max_output_tokens,
        )

    def complete_text(self, system: str, turns: Sequence[tuple[str, str]]) -> str:
        return complete(self.build_request(system, turns), self.cassette, self.transport)

    def complete_texts(self, batch: Sequence[tuple[str, Sequence[tuple[str, str]]]]) -> list[str]:
        """Bounded-parallel completion of (system, turns) pairs, in order."""
        requests = [self.build_request(system, turns) for system, turns in batch]
        return complete_many(requests, self.cassette, self.transport, self.parallelism)


def load_client_config(path: str | Path | None = None, env: dict | None = None) -> dict:
    """Endpoint, auth token, and model name from a config file with environment
    overrides (ATTRQA_ENDPOINT / ATTRQA_API_KEY / ATTRQA_MODEL)."""
    env = os.environ if env is None else env
    config: dict = {}
    if path is not None:
        import yaml

        with open(path, encoding="utf-8") as fh:
            loaded = yaml.safe_load(fh) or {}
        if not isinstance(loaded, dict):
            raise ValueError(f"client config must be a mapping: {path}")
        config.update(loaded)
    for key, var in (("endpoint", "ATTRQA_ENDPOINT"), ("api_key", "ATTRQA_API_KEY"), ("model", "ATTRQA_MODEL")):
        if env.get(var):
            config[key] = env[var]
    return config
