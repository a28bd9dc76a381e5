"""Completion client with a content-addressed record/replay cache.

Requests are keyed by sha256 over (model, params, prompts). In live mode a
response is fetched once and then always served from the cache, which makes
whole-pipeline runs reproducible; in replay mode a cache miss is a hard
error instead of a network call. Multi-step treatments send their prompts
in order inside one conversation.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass, field
from typing import Callable

DEFAULT_PARAMS = {"temperature": 0}


class ClientError(Exception):
    def __init__(self, message: str, retriable: bool = False):
        super().__init__(message)
        self.retriable = retriable


class ReplayMissError(ClientError):
    def __init__(self, request_hash: str):
        super().__init__(
            f"replay cache has no entry for request {request_hash}; "
            "run in live mode to record it", retriable=False)


def request_hash(model: str, params: dict, prompts: list[str]) -> str:
    payload = json.dumps({"model": model, "params": params,
                          "prompts": prompts}, sort_keys=True)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class ReplayCache:
    """JSONL-backed cache; safe for concurrent reads with single-writer
    appends."""

    def __init__(self, path: str):
        self.path = path
        self._lock = threading.Lock()
        self._entries: dict[str, dict] = {}
        if os.path.exists(path):
            with open(path, encoding="utf-8") as fh:
                for line in fh:
                    if line.strip():
                        entry = json.loads(line)
                        self._entries[entry["request_hash"]] = entry

    def get(self, key: str) -> dict | None:
        return self._entries.get(key)

    def put(self, entry: dict) -> None:
        with self._lock:
            if entry["request_hash"] in self._entries:
                return
            self._entries[entry["request_hash"]] = entry
            os.makedirs(os.path.dirname(self.path) or ".", exist_ok=True)
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(entry, sort_keys=True) + "\n")

    def __len__(self) -> int:
        return len(self._entries)


class _TokenBucket:
    def __init__(self, rate_per_s: float, burst: int):
        self.rate = rate_per_s
        self.capacity = burst
        self.tokens = float(burst)
        self.updated = time.monotonic()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = time.monotonic()
                self.tokens = min(self.capacity,
                                  self.tokens + (now - self.updated) * self.rate)
                self.updated = now
                if self.tokens >= 1:
                    self.tokens -= 1
                    return
                wait = (1 - self.tokens) / self.rate
            time.sleep(wait)


Transport = Callable[[list[dict], str, dict], str]


def http_transport(messages: list[dict], model: str, params: dict) -> str:
    """POST an OpenAI-style chat completion. Endpoint and key come from the
    LLM_ENDPOINT / LLM_API_KEY environment variables."""
    import requests

    url = os.environ.get("LLM_ENDPOINT")
    if not url:
        raise ClientError("LLM_ENDPOINT is not set", retriable=False)
    headers = {"Content-Type": "application/json"}
    key = os.environ.get("LLM_API_KEY")
    if key:
        headers["Authorization"] = f"Bearer {key}"
    body = {"model": model, "messages": messages, **params}
    try:
        resp = requests.post(url, json=body, headers=headers, timeout=120)
    except requests.RequestException as exc:
        raise ClientError(f"request failed: {exc}", retriable=True) from exc
    if resp.status_code in (429, 500, 502, 503, 504):
        raise ClientError(f"upstream error {resp.status_code}", retriable=True)
    if resp.status_code != 200:
        raise ClientError(f"upstream error {resp.status_code}: {resp.text[:200]}",
                          retriable=False)
    return resp.json()["choices"][0]["message"]["content"]


@dataclass
class CompletionClient:
    cache: ReplayCache
    model: str = "gpt-3.5-turbo"
    params: dict = field(default_factory=lambda: dict(DEFAULT_PARAMS))
    mode: str = "replay"                    # "replay" or "live"
    transport: Transport | None = None
    max_retries: int = 3
    max_concurrency: int = 4
    requests_per_second: float = 2.0

    def __post_init__(self):
        if self.mode not in ("replay", "live"):
            raise ClientError(f"unknown mode {self.mode!r}")
        self._sem = threading.Semaphore(self.max_concurrency)
        self._bucket = _TokenBucket(self.requests_per_second,
                                    burst=self.max_concurrency)

    def complete(self, prompts: list[str]) -> str:
        """Run the prompt steps as one conversation and return the final
        response text."""
        key = request_hash(self.model, self.params, prompts)
        entry = self.cache.get(key)
        if entry is not None:
            return entry["response"]
        if self.mode == "replay":
            raise ReplayMissError(key)
        response = self._run_conversation(prompts)
        self.cache.put({
            "request_hash": key,
            "model": self.model,
            "params": self.params,
            "prompts": prompts,
            "response": response,
            "timestamp": time.time(),
        })
        return response

    def _run_conversation(self, prompts: list[str]) -> str:
        transport = self.transport or http_transport
        messages: list[dict] = []
        response = ""
        for prompt in prompts:
            messages.append({"role": "user", "content": prompt})
            response = self._send(transport, messages)
            messages.append({"role": "assistant", "content": response})
        return response

    def _send(self, transport: Transport, messages: list[dict]) -> str:
        last_exc: ClientError | None = None
        for attempt in range(self.max_retries):
            with self._sem:
                self._bucket.acquire()
                try:
                    return transport(messages, self.model, self.params)
                except ClientError as exc:
                    if not exc.retriable:
                        raise
                    last_exc = exc
                    time.sleep(min(2.0 ** attempt * 0.5, 8.0))
        raise last_exc  # exhausted retries


def extract_code(response: str) -> str:
    """The longest fenced code block of a chat response, else the whole
    response (instruction-following is not guaranteed)."""
    blocks = []
    lines = response.splitlines()
    current: list[str] | None = None
    for line in lines:
        if line.strip().startswith("```"):
            if current is None:
                current = []
            else:
                blocks.append("\n".join(current))
                current = None
            continue
        if current is not None:
            current.append(line)
    if not blocks:
        return response
    return max(blocks, key=len)
