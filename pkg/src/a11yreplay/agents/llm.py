"""LLM clients and the per-session exchange log.

Two backends:

* :class:`ScriptedClient` replays canned responses, either as a FIFO queue
  (optionally asserting on each prompt) or as a rule table matched against
  the prompt. Used for offline tests and fixture runs.
* :class:`HTTPClient` speaks the OpenAI-compatible chat-completions protocol.
"""

from __future__ import annotations

import json
import logging
import os
import re
import threading
import time
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Iterable, Protocol

import httpx

log = logging.getLogger(__name__)

MAX_RETRIES = 3
DEFAULT_API_KEY_ENV = "A11YREPLAY_API_KEY"


class AgentRole(str, Enum):
    PLANNER = "planner"
    ACTION = "action"
    EVALUATION = "evaluation"


class LLMError(RuntimeError):
    """Base class for client failures."""

    retryable = False


class RetryableLLMError(LLMError):
    retryable = True


class ScriptExhausted(LLMError):
    pass


class LLMClient(Protocol):
    def complete(self, prompt: str, role: AgentRole) -> str: ...


@dataclass(frozen=True)
class LLMExchange:
    prompt: str
    response: str
    agent_role: AgentRole
    turn_index: int
    template_id: str = ""

    def to_dict(self) -> dict:
        d = asdict(self)
        d["agent_role"] = self.agent_role.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "LLMExchange":
        return cls(d["prompt"], d["response"], AgentRole(d["agent_role"]), d["turn_index"], d.get("template_id", ""))


@dataclass
class ExchangeLog:
    exchanges: list[LLMExchange] = field(default_factory=list)

    def append(self, prompt: str, response: str, role: AgentRole, template_id: str) -> LLMExchange:
        ex = LLMExchange(prompt, response, role, len(self.exchanges), template_id)
        self.exchanges.append(ex)
        return ex

    def count(self, role: AgentRole | None = None) -> int:
        return sum(1 for ex in self.exchanges if role is None or ex.agent_role is role)

    def __len__(self) -> int:
        return len(self.exchanges)

    def to_jsonl(self) -> str:
        return "".join(json.dumps(ex.to_dict(), sort_keys=True) + "\n" for ex in self.exchanges)


def llm_complete(
    client: LLMClient,
    prompt: str,
    role: AgentRole,
    audit: ExchangeLog | None = None,
    template_id: str = "",
) -> str:
    response = client.complete(prompt, role)
    if audit is not None:
        audit.append(prompt, response, role, template_id)
    return response


# ------------------------------------------------------------- scripted


def _as_text(response: Any) -> str:
    return response if isinstance(response, str) else json.dumps(response, indent=2)


@dataclass
class Rule:
    response: str
    role: AgentRole | None = None
    contains: tuple[str, ...] = ()
    pattern: re.Pattern | None = None
    times: int | None = None
    used: int = 0

    def matches(self, prompt: str, role: AgentRole) -> bool:
        if self.role is not None and self.role is not role:
            return False
        if self.times is not None and self.used >= self.times:
            return False
        if not all(s in prompt for s in self.contains):
            return False
        return self.pattern is None or self.pattern.search(prompt) is not None


@dataclass
class QueuedResponse:
    response: str
    role: AgentRole | None = None
    expect: str | None = None
    exact: bool = False


class ScriptMismatch(LLMError):
    pass


class ScriptedClient:
    """Deterministic backend. Thread-safe; each session should own one."""

    def __init__(
        self,
        queue: Iterable[QueuedResponse | str] | None = None,
        rules: Iterable[Rule] | None = None,
    ):
        self._queue = [q if isinstance(q, QueuedResponse) else QueuedResponse(q) for q in (queue or [])]
        self._rules = list(rules or [])
        self._lock = threading.Lock()

    @property
    def mode(self) -> str:
        return "rules" if self._rules else "queue"

    def complete(self, prompt: str, role: AgentRole) -> str:
        with self._lock:
            if self._rules:
                for rule in self._rules:
                    if rule.matches(prompt, role):
                        rule.used += 1
                        return rule.response
                raise ScriptExhausted(f"no rule matches {role.value} prompt")
            if not self._queue:
                raise ScriptExhausted("script exhausted")
            item = self._queue.pop(0)
        if item.role is not None and item.role is not role:
            raise ScriptMismatch(f"expected a {item.role.value} prompt, got {role.value}")
        if item.expect is not None:
            ok = prompt == item.expect if item.exact else item.expect in prompt
            if not ok:
                raise ScriptMismatch("prompt does not match the scripted expectation")
        return item.response

    @property
    def remaining(self) -> int:
        return len(self._queue)

    @classmethod
    def from_dict(cls, doc: dict) -> "ScriptedClient":
        mode = doc.get("mode", "rules" if "rules" in doc else "queue")
        if mode == "queue":
            items = []
            for raw in doc.get("responses", []):
                if isinstance(raw, str):
                    items.append(QueuedResponse(raw))
                    continue
                role = raw.get("role")
                items.append(
                    QueuedResponse(
                        _as_text(raw["response"]),
                        AgentRole(role) if role else None,
                        raw.get("expect"),
                        bool(raw.get("exact", False)),
                    )
                )
            return cls(queue=items)
        if mode != "rules":
            raise ValueError(f"unknown script mode {mode!r}")
        rules = []
        for raw in doc.get("rules", []):
            role = raw.get("role")
            contains = raw.get("contains", ())
            if isinstance(contains, str):
                contains = (contains,)
            pattern = raw.get("pattern")
            rules.append(
                Rule(
                    _as_text(raw["response"]),
                    AgentRole(role) if role else None,
                    tuple(contains),
                    re.compile(pattern, re.DOTALL) if pattern else None,
                    raw.get("times"),
                )
            )
        return cls(rules=rules)

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedClient":
        return cls.from_dict(json.loads(Path(path).read_text()))

    @classmethod
    def from_exchanges(cls, exchanges: Iterable[LLMExchange]) -> "ScriptedClient":
        """Replay an audit log, asserting each prompt byte-for-byte."""
        return cls(
            queue=[QueuedResponse(ex.response, ex.agent_role, ex.prompt, exact=True) for ex in exchanges]
        )


# ------------------------------------------------------------------ http


class HTTPClient:
    """OpenAI-compatible chat-completions client.

    The API token is read from the environment variable named by
    ``api_key_env``. Transport errors, 429 and 5xx responses are retried up
    to ``max_retries`` times with exponential backoff.
    """

    def __init__(
        self,
        base_url: str,
        model: str = "gpt-4",
        *,
        temperature: float = 0.0,
        api_key_env: str = DEFAULT_API_KEY_ENV,
        timeout: float = 60.0,
        max_retries: int = MAX_RETRIES,
        backoff_s: float = 1.0,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.temperature = temperature
        self.max_retries = max_retries
        self.backoff_s = backoff_s
        self._sleep = sleep
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(api_key_env, "").strip()
        if token:
            headers["Authorization"] = f"Bearer {token}"
        self._http = httpx.Client(timeout=timeout, headers=headers, transport=transport)

    def _post_once(self, payload: dict) -> str:
        try:
            resp = self._http.post(f"{self.base_url}/chat/completions", json=payload)
        except httpx.TransportError as exc:
            raise RetryableLLMError(f"transport failure: {exc}") from exc
        if resp.status_code == 429 or resp.status_code >= 500:
            raise RetryableLLMError(f"HTTP {resp.status_code}")
        if resp.status_code >= 400:
            raise LLMError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            return resp.json()["choices"][0]["message"]["content"] or ""
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise LLMError(f"malformed completion payload: {exc}") from exc

    def complete(self, prompt: str, role: AgentRole) -> str:
        payload = {
            "model": self.model,
            "temperature": self.temperature,
            "messages": [{"role": "user", "content": prompt}],
        }
        attempt = 0
        while True:
            try:
                return self._post_once(payload)
            except RetryableLLMError as exc:
                if attempt >= self.max_retries:
                    raise LLMError(f"giving up after {attempt} retries: {exc}") from exc
                delay = self.backoff_s * (2**attempt)
                log.warning("%s call failed (%s); retrying in %.1fs", role.value, exc, delay)
                self._sleep(delay)
                attempt += 1

    def close(self) -> None:
        self._http.close()
