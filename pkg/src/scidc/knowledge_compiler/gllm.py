"""GLLM clients: the capability is one call, prompt in, text out.

Three implementations cover every runtime: FixtureGllm replays recorded
exchanges from disk (what CI uses; it never goes online), ScriptedGllm
serves an in-memory reply list for unit tests, and HttpGllm speaks the
same /v1/generate wire protocol as the decoder backends. The capture
protocol is ``record_fixture``: call the live client once, write the
exchange, commit the file, replay forever.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, runtime_checkable

import requests

from scidc.backends import RemoteConfig
from scidc.errors import GllmTransport


@runtime_checkable
class GllmClient(Protocol):
    def complete(self, prompt: str) -> str: ...


def request_hash(prompt: str) -> str:
    """Stable fixture key: the first 16 hex chars of the prompt's sha256."""
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()[:16]


@dataclass
class ScriptedGllm:
    """Serves queued replies in order; records the prompts it saw."""

    replies: list[str]
    prompts: list[str] = field(default_factory=list)

    def complete(self, prompt: str) -> str:
        self.prompts.append(prompt)
        if not self.replies:
            raise GllmTransport("scripted client has no replies left")
        return self.replies.pop(0)


class FixtureGllm:
    """Replays one recorded reply per request hash; offline by design."""

    def __init__(self, fixture_dir: str | Path):
        self._dir = Path(fixture_dir)

    def complete(self, prompt: str) -> str:
        key = request_hash(prompt)
        path = self._dir / f"{key}.json"
        if not path.is_file():
            raise GllmTransport(
                f"no recorded reply for request {key} under {self._dir}")
        doc = json.loads(path.read_text(encoding="utf-8"))
        recorded = doc.get("request_sha256", "")
        actual = hashlib.sha256(prompt.encode("utf-8")).hexdigest()
        if recorded != actual:
            raise GllmTransport(
                f"fixture {path.name} was recorded for a different request")
        reply = doc.get("reply")
        if not isinstance(reply, str):
            raise GllmTransport(f"fixture {path.name} carries no reply text")
        return reply


def record_fixture(fixture_dir: str | Path, prompt: str, reply: str) -> Path:
    """Write one exchange in the fixture format; returns the file path."""
    directory = Path(fixture_dir)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"{request_hash(prompt)}.json"
    doc = {
        "request_sha256": hashlib.sha256(prompt.encode("utf-8")).hexdigest(),
        "prompt_head": prompt[:120],
        "reply": reply,
    }
    path.write_text(json.dumps(doc, indent=2, ensure_ascii=False,
                               sort_keys=True) + "\n", encoding="utf-8")
    return path


class HttpGllm:
    """POSTs the prompt to {endpoint}/v1/generate and returns the text."""

    def __init__(self, config: RemoteConfig, *, max_tokens: int = 4096,
                 session: requests.Session | None = None):
        self._config = config
        self._max_tokens = max_tokens
        self._session = session or requests.Session()

    def complete(self, prompt: str) -> str:
        headers = {}
        if self._config.auth_env:
            token = os.environ.get(self._config.auth_env)
            if not token:
                raise GllmTransport(
                    f"auth environment variable {self._config.auth_env!r} "
                    "is not set")
            headers["Authorization"] = f"Bearer {token}"
        url = self._config.endpoint.rstrip("/") + "/v1/generate"
        try:
            resp = self._session.post(url, json={
                "prompt": prompt,
                "max_tokens": self._max_tokens,
                "temperature": 0.0,
                "model": self._config.model,
            }, headers=headers, timeout=self._config.timeout)
        except requests.RequestException as exc:
            raise GllmTransport(f"GLLM request failed: {exc}") from exc
        if resp.status_code != 200:
            raise GllmTransport(
                f"GLLM server returned {resp.status_code}: {resp.text[:200]}")
        text = resp.json().get("text")
        if not isinstance(text, str):
            raise GllmTransport("GLLM reply lacks a text field")
        return text
