"""HTTP client backend.

Wire protocol, version 1:

- ``POST {endpoint}/v1/logits`` with ``{"context": [ids], "model": str}``
  returns ``{"logits": [floats]}`` with exactly vocabulary-size entries.
- ``POST {endpoint}/v1/generate`` with ``{"prompt", "max_tokens",
  "temperature", "stop", "model"}`` returns ``{"text": str}``.

Authentication is a bearer token read from a named environment variable;
the name travels in configuration, the value never does. Transport
failures are retried up to the configured count; HTTP error statuses are
surfaced immediately as ServerError.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import requests

from ..errors import ServerError, TransportError
from ..token_model import Vocabulary
from .base import BackendCapability, DecoderBackend


@dataclass(frozen=True)
class RemoteConfig:
    endpoint: str
    model: str = "default"
    timeout: float = 30.0
    retries: int = 2
    auth_env: str | None = None
    max_context: int = 4096

    def __post_init__(self):
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.retries < 0:
            raise ValueError("retries must be >= 0")


class RemoteBackend(DecoderBackend):
    """Speaks the v1 wire protocol against an inference server."""

    def __init__(self, vocab: Vocabulary, config: RemoteConfig,
                 session: requests.Session | None = None):
        self._vocab = vocab
        self._config = config
        self._session = session or requests.Session()
        self._capability = BackendCapability(
            vocab_id=config.model, max_context=config.max_context,
            supports_logits=True)

    @property
    def vocab(self) -> Vocabulary:
        return self._vocab

    @property
    def capability(self) -> BackendCapability:
        return self._capability

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self._config.auth_env:
            token = os.environ.get(self._config.auth_env)
            if not token:
                raise TransportError(
                    f"auth environment variable {self._config.auth_env!r} "
                    "is not set")
            headers["Authorization"] = f"Bearer {token}"
        return headers

    def _post(self, route: str, payload: dict) -> dict:
        url = self._config.endpoint.rstrip("/") + route
        last: Exception | None = None
        for _ in range(self._config.retries + 1):
            try:
                resp = self._session.post(
                    url, json=payload, headers=self._headers(),
                    timeout=self._config.timeout)
            except requests.RequestException as exc:
                last = exc
                continue
            if resp.status_code != 200:
                raise ServerError(resp.status_code, resp.text[:200])
            try:
                doc = resp.json()
            except ValueError as exc:
                raise TransportError(f"non-JSON reply: {exc}") from exc
            if not isinstance(doc, dict):
                raise TransportError("reply is not a JSON object")
            return doc
        raise TransportError(f"request to {url} failed after "
                             f"{self._config.retries + 1} attempts: {last}")

    def next_logits(self, context: Sequence[int]) -> np.ndarray:
        self._check_context(context)
        doc = self._post("/v1/logits", {
            "context": [int(t) for t in context],
            "model": self._config.model,
        })
        logits = doc.get("logits")
        if not isinstance(logits, list) or len(logits) != self._vocab.size:
            got = len(logits) if isinstance(logits, list) else "missing"
            raise TransportError(
                f"shape mismatch: expected {self._vocab.size} logits, "
                f"got {got}")
        values = np.asarray(logits, dtype=np.float64)
        if not np.all(np.isfinite(values)):
            raise TransportError("non-finite logits in reply")
        return values

    def generate_unconstrained(self, prompt: str, *, max_tokens: int = 256,
                               temperature: float = 0.0,
                               stop: str | None = None) -> str:
        doc = self._post("/v1/generate", {
            "prompt": prompt,
            "max_tokens": max_tokens,
            "temperature": temperature,
            "stop": stop,
            "model": self._config.model,
        })
        text = doc.get("text")
        if not isinstance(text, str):
            raise TransportError("generate reply lacks a text field")
        return text
