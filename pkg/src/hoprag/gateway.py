"""Chat-completion access for planner and worker turns.

Two interchangeable backends expose complete(messages) -> str:

  HttpBackend     speaks the OpenAI-compatible wire format against
                  {base_url}/v1/chat/completions with bearer auth from an
                  environment variable, bounded exponential backoff, and a
                  concurrency cap on in-flight requests.
  ScriptedBackend replays rule-matched responses for tests and desk-scale
                  runs; it never touches the network.
"""
from __future__ import annotations

import hashlib
import itertools
import json
import os
import random
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import requests


class BackendError(Exception):
    """Base class for chat-backend failures; fatal to the running episode."""


class UnauthorizedError(BackendError):
    """401/403 from the endpoint; never retried."""


class RateLimitedError(BackendError):
    """429 persisted through the retry budget."""


class GatewayTimeoutError(BackendError):
    """The endpoint did not answer within the timeout, after retries."""


class ProtocolError(BackendError):
    """Malformed response body or an unrecoverable HTTP status."""


class NoRuleMatchedError(BackendError):
    """No scripted rule matched the conversation."""


@dataclass(frozen=True)
class ChatRequest:
    model: str
    messages: tuple[dict, ...]
    temperature: float = 0.0
    max_tokens: int = 1024
    stop: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if not self.messages:
            raise ValueError("messages must be non-empty")
        if self.messages[0].get("role") != "system":
            raise ValueError("first message must have role 'system'")
        if self.temperature < 0:
            raise ValueError(f"temperature must be >= 0, got {self.temperature}")


def serialize_request(req: ChatRequest) -> dict:
    payload = {
        "model": req.model,
        "messages": [{"role": m["role"], "content": m["content"]} for m in req.messages],
        "temperature": req.temperature,
        "max_tokens": req.max_tokens,
    }
    if req.stop is not None:
        payload["stop"] = list(req.stop)
    return payload


def deserialize_request(payload: dict) -> ChatRequest:
    return ChatRequest(
        model=payload["model"],
        messages=tuple(
            {"role": m["role"], "content": m["content"]} for m in payload["messages"]
        ),
        temperature=payload.get("temperature", 0.0),
        max_tokens=payload.get("max_tokens", 1024),
        stop=tuple(payload["stop"]) if "stop" in payload else None,
    )


def backoff_schedule(base: float, attempts: int, ceiling: float) -> list[float]:
    """Waits before each retry: base doubling per attempt, total < ceiling."""
    waits: list[float] = []
    total = 0.0
    for i in range(max(attempts - 1, 0)):
        wait = base * (2**i)
        if total + wait >= ceiling:
            wait = max(ceiling - total - 1e-9, 0.0)
        waits.append(wait)
        total += wait
    return waits


@dataclass
class Endpoint:
    base_url: str
    api_key_env: str = "HOPRAG_API_KEY"
    timeout: float = 30.0
    max_attempts: int = 3
    backoff_base: float = 0.5
    backoff_ceiling: float = 8.0
    concurrency: int = 8
    _gate: threading.BoundedSemaphore = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        self._gate = threading.BoundedSemaphore(self.concurrency)


def chat(endpoint: Endpoint, req: ChatRequest) -> str:
    """Send one chat request and return the first choice's message content.

    Transient transport failures (connection errors, timeouts, 429, 5xx)
    are retried up to endpoint.max_attempts with exponential backoff; auth
    failures and malformed bodies are raised immediately.
    """
    url = endpoint.base_url.rstrip("/") + "/v1/chat/completions"
    headers = {"Content-Type": "application/json"}
    api_key = os.environ.get(endpoint.api_key_env)
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"
    waits = backoff_schedule(endpoint.backoff_base, endpoint.max_attempts, endpoint.backoff_ceiling)
    last_error: BackendError | None = None
    for attempt in range(endpoint.max_attempts):
        if attempt > 0:
            time.sleep(waits[attempt - 1])
        try:
            with endpoint._gate:
                resp = requests.post(
                    url, json=serialize_request(req), headers=headers, timeout=endpoint.timeout
                )
        except requests.Timeout as exc:
            last_error = GatewayTimeoutError(str(exc))
            continue
        except requests.ConnectionError as exc:
            last_error = GatewayTimeoutError(f"connection failed: {exc}")
            continue
        if resp.status_code in (401, 403):
            raise UnauthorizedError(f"endpoint rejected credentials ({resp.status_code})")
        if resp.status_code == 429:
            last_error = RateLimitedError("rate limited (429)")
            continue
        if resp.status_code >= 500:
            last_error = ProtocolError(f"server error {resp.status_code}")
            continue
        if resp.status_code != 200:
            raise ProtocolError(f"unexpected status {resp.status_code}: {resp.text[:200]}")
        try:
            content = resp.json()["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise ProtocolError(f"malformed response body: {exc}") from exc
        if not isinstance(content, str):
            raise ProtocolError(f"message content is not text: {type(content).__name__}")
        return content
    assert last_error is not None
    raise last_error


class HttpBackend:
    """Networked backend; `model` is mutable so a trainer hook can retarget it."""

    def __init__(
        self,
        endpoint: Endpoint,
        model: str,
        temperature: float = 0.0,
        max_tokens: int = 1024,
        stop: Sequence[str] | None = None,
    ):
        self.endpoint = endpoint
        self.model = model
        self.temperature = temperature
        self.max_tokens = max_tokens
        self.stop = tuple(stop) if stop is not None else None

    def complete(self, messages: Sequence[dict]) -> str:
        req = ChatRequest(
            model=self.model,
            messages=tuple(messages),
            temperature=self.temperature,
            max_tokens=self.max_tokens,
            stop=self.stop,
        )
        return chat(self.endpoint, req)


MATCH_EXACT = "exact"
MATCH_SUBSTRING = "substring"
MATCH_POSITION = "sequence-position"
_MATCHERS = (MATCH_EXACT, MATCH_SUBSTRING, MATCH_POSITION)


@dataclass(frozen=True)
class ScriptedRule:
    """One scripted response rule.

    exact / substring rules match against the content of the last message;
    sequence-position rules fire when the conversation already holds
    int(pattern) assistant messages. Give either a fixed `response` or a
    weighted `responses` list of (text, weight) summing to 1.
    """

    matcher: str
    pattern: str
    response: str | None = None
    responses: tuple[tuple[str, float], ...] | None = None

    def __post_init__(self) -> None:
        if self.matcher not in _MATCHERS:
            raise ValueError(f"matcher must be one of {_MATCHERS}, got {self.matcher!r}")
        if (self.response is None) == (self.responses is None):
            raise ValueError("give exactly one of response / responses")
        if self.responses is not None:
            total = sum(w for _, w in self.responses)
            if abs(total - 1.0) > 1e-9:
                raise ValueError(f"weights must sum to 1, got {total}")

    def matches(self, messages: Sequence[dict]) -> bool:
        if self.matcher == MATCH_POSITION:
            n_assistant = sum(1 for m in messages if m["role"] == "assistant")
            return int(self.pattern) == n_assistant
        target = messages[-1]["content"]
        if self.matcher == MATCH_EXACT:
            return target == self.pattern
        return self.pattern in target


def _draw_seed(seed: int, messages: Sequence[dict]) -> int:
    digest = hashlib.sha256()
    digest.update(str(seed).encode())
    for m in messages:
        digest.update(b"\x1e")
        digest.update(m["role"].encode())
        digest.update(b"\x1f")
        digest.update(m["content"].encode())
    return int.from_bytes(digest.digest()[:8], "big")


def scripted_chat(rules: Sequence[ScriptedRule], messages: Sequence[dict], seed: int = 0) -> str:
    """First matching rule wins; deterministic given (rules, messages, seed)."""
    if not rules:
        raise ValueError("at least one rule is required")
    if not messages:
        raise ValueError("messages must be non-empty")
    for rule in rules:
        if not rule.matches(messages):
            continue
        if rule.response is not None:
            return rule.response
        rng = random.Random(_draw_seed(seed, messages))
        pick = rng.random()
        cumulative = 0.0
        assert rule.responses is not None
        for text, weight in rule.responses:
            cumulative += weight
            if pick < cumulative:
                return text
        return rule.responses[-1][0]
    raise NoRuleMatchedError(f"no rule matched last message: {messages[-1]['content'][:120]!r}")


class ScriptedBackend:
    """Stateful wrapper around scripted_chat for use as an engine backend.

    Each call advances an internal counter mixed into the draw seed, so
    stochastic rules re-draw on repeated identical prompts. With purely
    deterministic rules the counter is irrelevant and replies are
    byte-stable regardless of call interleaving.
    """

    def __init__(self, rules: Sequence[ScriptedRule], seed: int = 0):
        if not rules:
            raise ValueError("at least one rule is required")
        self.rules = tuple(rules)
        self.seed = seed
        self._counter = itertools.count()

    def complete(self, messages: Sequence[dict]) -> str:
        call_index = next(self._counter)
        mixed = _draw_seed(self.seed, [{"role": "call", "content": str(call_index)}])
        return scripted_chat(self.rules, messages, seed=mixed)


def load_rules(path: str | Path) -> list[ScriptedRule]:
    """Read a JSON-lines script file of rule records."""
    rules = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            responses = obj.get("responses")
            rules.append(
                ScriptedRule(
                    matcher=obj["matcher"],
                    pattern=obj["pattern"],
                    response=obj.get("response"),
                    responses=tuple((t, w) for t, w in responses) if responses else None,
                )
            )
    return rules
