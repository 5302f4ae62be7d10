"""LLM backends: OpenAI-compatible HTTP chat completion and fixture replay.

Fixture files map ``sha256(prompt)`` to a response. A response may be a list,
in which case run ``i`` of an evaluation receives element ``i``.
"""
from __future__ import annotations

import datetime as _dt
import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable

import httpx


class BackendError(Exception):
    pass


class TransportError(BackendError):
    pass


class RateLimitError(BackendError):
    def __init__(self, message: str, retry_after: float | None):
        self.retry_after = retry_after
        super().__init__(message)


class FixtureMissError(BackendError):
    pass


def prompt_hash(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class LlmBackend:
    """Backend configuration. ``kind`` is ``"replay"`` or ``"http-chat"``."""
    name: str
    kind: str = "replay"
    fixture_path: str | None = None
    endpoint: str = "https://api.openai.com/v1/chat/completions"
    model: str = "gpt-4o"
    api_key_env: str = "OPENAI_API_KEY"
    temperature: float = 0.0
    max_tokens: int = 4096
    record_path: str | None = None
    run_index: int = 0

    def for_run(self, index: int) -> "LlmBackend":
        return replace(self, run_index=index)

    @classmethod
    def from_dict(cls, d: dict) -> "LlmBackend":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown backend option(s): {sorted(unknown)}")
        return cls(**d)


# --- replay ------------------------------------------------------------------

_fixture_cache: dict[tuple[str, float], dict] = {}


def load_fixtures(path: str | Path) -> dict:
    p = Path(path)
    key = (str(p.resolve()), p.stat().st_mtime)
    if key not in _fixture_cache:
        doc = json.loads(p.read_text("utf-8"))
        if "responses" not in doc or not isinstance(doc["responses"], dict):
            raise BackendError(f"{p}: fixture file has no 'responses' map")
        _fixture_cache[key] = doc
    return _fixture_cache[key]


def _replay(backend: LlmBackend, prompt: str) -> str:
    if backend.fixture_path is None:
        raise BackendError(f"replay backend {backend.name!r} has no fixture_path")
    responses = load_fixtures(backend.fixture_path)["responses"]
    h = prompt_hash(prompt)
    if h not in responses:
        raise FixtureMissError(f"{backend.name}: no fixture for prompt {h[:12]}")
    entry = responses[h]
    if isinstance(entry, list):
        if backend.run_index >= len(entry):
            raise FixtureMissError(f"{backend.name}: prompt {h[:12]} has no response for run {backend.run_index}")
        return entry[backend.run_index]
    return entry


# --- http --------------------------------------------------------------------

class FixtureRecorder:
    """Collects (prompt, response) pairs and writes them as a fixture file."""

    def __init__(self, path: str | Path, backend_name: str):
        self.path = Path(path)
        self.backend_name = backend_name
        self._lock = threading.Lock()
        self.responses: dict[str, list[str]] = {}

    def record(self, prompt: str, response: str, run_index: int = 0) -> None:
        with self._lock:
            slot = self.responses.setdefault(prompt_hash(prompt), [])
            while len(slot) <= run_index:
                slot.append("")
            slot[run_index] = response
            self._write()

    def _write(self) -> None:
        doc = {
            "backend": self.backend_name,
            "captured": _dt.date.today().isoformat(),
            "responses": {h: (v[0] if len(v) == 1 else v) for h, v in sorted(self.responses.items())},
        }
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text(json.dumps(doc, indent=1, ensure_ascii=False) + "\n", "utf-8")


_recorders: dict[str, FixtureRecorder] = {}
_recorders_lock = threading.Lock()


def _recorder(backend: LlmBackend) -> FixtureRecorder:
    with _recorders_lock:
        rec = _recorders.get(backend.record_path)
        if rec is None:
            rec = _recorders[backend.record_path] = FixtureRecorder(backend.record_path, backend.name)
        return rec


def _retry_after(resp: httpx.Response) -> float | None:
    value = resp.headers.get("retry-after")
    try:
        return float(value) if value is not None else None
    except ValueError:
        return None


def chat_completion(backend: LlmBackend, prompt: str, client: httpx.Client | None = None,
                    sleep: Callable[[float], None] = time.sleep, attempts: int = 3) -> str:
    key = os.environ.get(backend.api_key_env)
    if not key:
        raise BackendError(f"environment variable {backend.api_key_env} is not set")
    body = {
        "model": backend.model,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": backend.temperature,
        "max_tokens": backend.max_tokens,
    }
    headers = {"Authorization": f"Bearer {key}"}
    own = client is None
    client = client or httpx.Client(timeout=120.0)
    try:
        delay = 1.0
        for attempt in range(1, attempts + 1):
            try:
                resp = client.post(backend.endpoint, json=body, headers=headers)
            except httpx.HTTPError as e:
                if attempt == attempts:
                    raise TransportError(f"{backend.name}: {e}") from e
                sleep(delay)
                delay *= 2
                continue
            if resp.status_code == 429 or resp.status_code >= 500:
                retry_after = _retry_after(resp)
                if attempt == attempts:
                    if resp.status_code == 429:
                        raise RateLimitError(f"{backend.name}: rate limited", retry_after)
                    raise TransportError(f"{backend.name}: HTTP {resp.status_code}")
                sleep(retry_after if retry_after is not None else delay)
                delay *= 2
                continue
            if resp.status_code != 200:
                raise TransportError(f"{backend.name}: HTTP {resp.status_code}: {resp.text[:200]}")
            try:
                return resp.json()["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError) as e:
                raise TransportError(f"{backend.name}: malformed chat-completion body") from e
        raise AssertionError("unreachable")
    finally:
        if own:
            client.close()


def complete(backend: LlmBackend, prompt: str, client: httpx.Client | None = None) -> str:
    if backend.kind == "replay":
        return _replay(backend, prompt)
    if backend.kind == "http-chat":
        text = chat_completion(backend, prompt, client=client)
        if backend.record_path:
            _recorder(backend).record(prompt, text, backend.run_index)
        return text
    raise BackendError(f"unknown backend kind {backend.kind!r}")
