"""Completion service clients.

Three interchangeable clients sit behind one `complete` call:

  HttpClient      POST {prompt, temperature, max_tokens} -> {text}
  ReplayClient    answers from recorded fixtures keyed by SHA-256(prompt)
  RecordingClient wraps another client and writes fixtures as it goes

Replay is the backbone of every generation test: a fixture miss is a hard
error, never a silent fallback, so a green run means every prompt the
pipeline built was anticipated byte-for-byte.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Protocol, Union

from . import PerfOptError

DEFAULT_TEMPERATURE = 0.3
DEFAULT_MAX_TOKENS = 1024
CREDENTIAL_ENV_VAR = "PERFOPT_COMPLETION_TOKEN"


class Timeout(PerfOptError):
    """The completion service did not answer in time."""


class ServiceError(PerfOptError):
    """The completion service answered with a non-success status."""

    def __init__(self, status: int, detail: str = ""):
        super().__init__(f"completion service returned {status}: {detail}".rstrip(": "))
        self.status = status


class ReplayMiss(PerfOptError):
    """A prompt was not found in the replay fixtures."""


@dataclass(frozen=True)
class CompletionRequest:
    prompt: str
    temperature: float = DEFAULT_TEMPERATURE
    max_tokens: int = DEFAULT_MAX_TOKENS

    def __post_init__(self):
        if not 0.0 <= self.temperature <= 1.0:
            raise ValueError(f"temperature must be in [0,1], got {self.temperature}")
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")


@dataclass(frozen=True)
class CompletionResponse:
    text: str


class CompletionClient(Protocol):
    def complete(self, req: CompletionRequest) -> CompletionResponse: ...


def prompt_key(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


class HttpClient:
    """Talks to a real completion endpoint over HTTP POST."""

    def __init__(self, endpoint: str, timeout_s: float = 120.0):
        self.endpoint = endpoint
        self.timeout_s = timeout_s

    def complete(self, req: CompletionRequest) -> CompletionResponse:
        import requests

        headers = {}
        token = os.environ.get(CREDENTIAL_ENV_VAR)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        body = {
            "prompt": req.prompt,
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        }
        try:
            resp = requests.post(
                self.endpoint, json=body, headers=headers, timeout=self.timeout_s
            )
        except requests.Timeout as exc:
            raise Timeout(f"no answer from {self.endpoint} in {self.timeout_s}s") from exc
        except requests.RequestException as exc:
            raise ServiceError(0, str(exc)) from exc
        if resp.status_code != 200:
            raise ServiceError(resp.status_code, resp.text[:200])
        payload = resp.json()
        if "text" not in payload:
            raise ServiceError(resp.status_code, "reply missing 'text' field")
        return CompletionResponse(text=payload["text"])


class ReplayClient:
    """Deterministic client backed by recorded fixtures.

    `source` is either a directory of <sha256>.json files or one JSON file
    mapping sha256 -> entry. An entry is {"text": ...} for a single answer
    or {"texts": [...]} for successive answers to repeats of the same
    prompt (sampling runs ask the same question five times).
    """

    def __init__(self, source: Union[str, Path]):
        self.source = Path(source)
        self._calls: dict[str, int] = {}
        self._table: Optional[dict] = None
        if not self.source.exists():
            raise FileNotFoundError(f"replay source does not exist: {self.source}")
        if self.source.is_file():
            with open(self.source, encoding="utf-8") as fh:
                self._table = json.load(fh)

    def _entry_for(self, key: str) -> dict:
        if self._table is not None:
            if key not in self._table:
                raise ReplayMiss(f"no fixture for prompt sha256 {key}")
            return self._table[key]
        path = self.source / f"{key}.json"
        if not path.exists():
            raise ReplayMiss(f"no fixture file {path.name} in {self.source}")
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)

    def complete(self, req: CompletionRequest) -> CompletionResponse:
        key = prompt_key(req.prompt)
        entry = self._entry_for(key)
        if "texts" in entry:
            texts = entry["texts"]
            n = self._calls.get(key, 0)
            self._calls[key] = n + 1
            if n >= len(texts):
                raise ReplayMiss(
                    f"fixture for {key} has {len(texts)} answers, call {n + 1} requested"
                )
            return CompletionResponse(text=texts[n])
        if "text" in entry:
            return CompletionResponse(text=entry["text"])
        raise ReplayMiss(f"fixture for {key} has neither 'text' nor 'texts'")


class RecordingClient:
    """Pass-through that appends every answer to a fixture directory."""

    def __init__(self, inner: CompletionClient, out_dir: Union[str, Path]):
        self.inner = inner
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)

    def complete(self, req: CompletionRequest) -> CompletionResponse:
        resp = self.inner.complete(req)
        key = prompt_key(req.prompt)
        path = self.out_dir / f"{key}.json"
        if path.exists():
            with open(path, encoding="utf-8") as fh:
                entry = json.load(fh)
            texts = entry.get("texts", [entry["text"]] if "text" in entry else [])
            texts.append(resp.text)
            entry = {"texts": texts}
        else:
            entry = {"text": resp.text}
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(entry, fh, indent=2)
        return resp


def write_fixture(out_dir: Union[str, Path], prompt: str, texts: list[str]) -> Path:
    """Drop a fixture for `prompt` answering with `texts` in order."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{prompt_key(prompt)}.json"
    entry = {"text": texts[0]} if len(texts) == 1 else {"texts": texts}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(entry, fh, indent=2)
    return path
