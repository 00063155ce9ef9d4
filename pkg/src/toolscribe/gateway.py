"""Pluggable chat-completion backends.

Three kinds ship: an OpenAI-compatible HTTP client (function-calling wire
format), a scripted replay backend for deterministic tests, and a policy
backend that computes replies from the request (used for hermetic
end-to-end runs). All of them go through :func:`complete`, which owns
retries, token accounting, and budget enforcement.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import httpx

from .core import TokenLedger, ToolCall, ToolSpec
from .errors import BudgetExceeded, FixtureExhausted, ProtocolError, TransportError

REASONING_EFFORTS = ("minimal", "medium")


@dataclass(frozen=True)
class Message:
    """One chat turn. ``tool_call`` rides on assistant messages that invoked a
    tool; tool-result messages use role ``tool`` with the observation as content."""

    role: str
    content: str = ""
    tool_call: ToolCall | None = None

    def __post_init__(self):
        if self.role not in ("system", "user", "assistant", "tool"):
            raise ValueError(f"bad role {self.role!r}")


@dataclass(frozen=True)
class ChatRequest:
    messages: tuple[Message, ...]
    tools: tuple[ToolSpec, ...] = ()
    model_id: str = ""
    reasoning_effort: str = "medium"
    seed_hint: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "messages", tuple(self.messages))
        object.__setattr__(self, "tools", tuple(self.tools))
        if not self.messages:
            raise ValueError("messages must be non-empty")
        if self.reasoning_effort not in REASONING_EFFORTS:
            raise ValueError(f"bad reasoning_effort {self.reasoning_effort!r}")
        if any(m.role == "system" for m in self.messages) and self.messages[0].role != "system":
            raise ValueError("system message must come first")


@dataclass(frozen=True)
class Usage:
    input_tokens: int = 0
    output_tokens: int = 0

    def __post_init__(self):
        if self.input_tokens < 0 or self.output_tokens < 0:
            raise ValueError("usage counts must be >= 0")


@dataclass(frozen=True)
class ChatResponse:
    content: str = ""
    tool_calls: tuple[ToolCall, ...] = ()
    usage: Usage = Usage()

    def __post_init__(self):
        object.__setattr__(self, "tool_calls", tuple(self.tool_calls))

    def to_record(self) -> dict:
        return {
            "content": self.content,
            "tool_calls": [c.to_record() for c in self.tool_calls],
            "usage": {
                "input_tokens": self.usage.input_tokens,
                "output_tokens": self.usage.output_tokens,
            },
        }

    @classmethod
    def from_record(cls, rec: dict) -> "ChatResponse":
        usage = rec.get("usage", {})
        return cls(
            content=rec.get("content", ""),
            tool_calls=tuple(ToolCall.from_record(c) for c in rec.get("tool_calls", [])),
            usage=Usage(usage.get("input_tokens", 0), usage.get("output_tokens", 0)),
        )


@dataclass
class BackendConfig:
    """Transport and policy knobs for a backend.

    ``temperature`` / ``top_p`` are hints only: hosted models may refuse
    them, in which case the run manifest records them as not honored.
    """

    model_id: str = "scripted"
    base_url: str | None = None
    api_key_env: str = "TOOLSCRIBE_API_KEY"
    max_attempts: int = 3
    backoff_base_s: float = 0.25
    timeout_s: float = 60.0
    token_budget: int | None = None
    temperature: float | None = None
    top_p: float | None = None


class Backend:
    """Interface: produce one assistant turn for a request."""

    config: BackendConfig

    def send(self, req: ChatRequest) -> ChatResponse:
        raise NotImplementedError

    @property
    def hints_honored(self) -> bool:
        return False


class ScriptedBackend(Backend):
    """Replays a fixed sequence of responses; records every request it saw.

    Independent instances keep independent cursors, so interleaved runs on
    two handles never cross-talk.
    """

    def __init__(self, fixture: Sequence[ChatResponse], config: BackendConfig | None = None):
        if not fixture:
            raise ValueError("fixture must be non-empty")
        self._fixture = list(fixture)
        self._cursor = 0
        self.requests: list[ChatRequest] = []
        self.config = config or BackendConfig(model_id="scripted")

    def send(self, req: ChatRequest) -> ChatResponse:
        self.requests.append(req)
        if self._cursor >= len(self._fixture):
            raise FixtureExhausted(
                f"fixture of {len(self._fixture)} replies exhausted at call {self._cursor + 1}"
            )
        resp = self._fixture[self._cursor]
        self._cursor += 1
        return resp

    @classmethod
    def from_jsonl(cls, path, config: BackendConfig | None = None) -> "ScriptedBackend":
        from .core import read_jsonl

        return cls([ChatResponse.from_record(rec) for rec in read_jsonl(path)], config)


def scripted_replay(fixture: Sequence[ChatResponse]) -> ScriptedBackend:
    """Backend handle whose nth completion returns the nth fixture entry."""
    return ScriptedBackend(fixture)


def estimate_tokens(text: str) -> int:
    """Deterministic stand-in used by policy backends: ~4 chars per token."""
    return max(1, len(text) // 4)


class PolicyBackend(Backend):
    """Computes replies from the request via a pure function.

    Usage is estimated deterministically from the rendered text so that
    token accounting stays reproducible.
    """

    def __init__(self, policy: Callable[[ChatRequest], ChatResponse], model_id: str = "policy"):
        self._policy = policy
        self.config = BackendConfig(model_id=model_id)
        self.requests: list[ChatRequest] = []

    def send(self, req: ChatRequest) -> ChatResponse:
        self.requests.append(req)
        resp = self._policy(req)
        if resp.usage.input_tokens == 0 and resp.usage.output_tokens == 0:
            prompt_text = "".join(m.content for m in req.messages)
            reply_text = resp.content + "".join(
                c.tool_name + json.dumps(c.args, sort_keys=True) for c in resp.tool_calls
            )
            resp = ChatResponse(
                content=resp.content,
                tool_calls=resp.tool_calls,
                usage=Usage(estimate_tokens(prompt_text), estimate_tokens(reply_text)),
            )
        return resp


def render_tools_wire(tools: Sequence[ToolSpec]) -> list[dict]:
    """Tool specs in the function-calling wire schema."""
    rendered = []
    for tool in tools:
        properties = {}
        required = []
        for p in tool.params:
            prop: dict[str, Any] = {"type": p.type_tag}
            if p.description:
                prop["description"] = p.description
            properties[p.name] = prop
            if p.required:
                required.append(p.name)
        rendered.append(
            {
                "type": "function",
                "function": {
                    "name": tool.name,
                    "description": tool.documentation,
                    "parameters": {
                        "type": "object",
                        "properties": properties,
                        "required": required,
                        # Degraded specs may hide params; let the model guess.
                        "additionalProperties": True,
                    },
                },
            }
        )
    return rendered


def messages_wire(messages: Sequence[Message]) -> list[dict]:
    wire = []
    call_counter = 0
    pending_call_id = None
    for msg in messages:
        if msg.role == "assistant" and msg.tool_call is not None:
            call_counter += 1
            pending_call_id = f"call_{call_counter:04d}"
            wire.append(
                {
                    "role": "assistant",
                    "content": msg.content,
                    "tool_calls": [
                        {
                            "id": pending_call_id,
                            "type": "function",
                            "function": {
                                "name": msg.tool_call.tool_name,
                                "arguments": json.dumps(msg.tool_call.args, sort_keys=True),
                            },
                        }
                    ],
                }
            )
        elif msg.role == "tool":
            wire.append(
                {
                    "role": "tool",
                    "tool_call_id": pending_call_id or "call_0000",
                    "content": msg.content,
                }
            )
        else:
            wire.append({"role": msg.role, "content": msg.content})
    return wire


class OpenAIChatBackend(Backend):
    """Chat-completions client for any OpenAI-compatible endpoint.

    Only tool calling and reasoning effort are used; no streaming.
    """

    def __init__(self, config: BackendConfig, client: httpx.Client | None = None):
        if not config.base_url:
            raise ValueError("base_url required for the HTTP backend")
        self.config = config
        self._client = client or httpx.Client(timeout=config.timeout_s)

    @property
    def hints_honored(self) -> bool:
        return True

    def _api_key(self) -> str:
        import os

        return os.environ.get(self.config.api_key_env, "")

    def send(self, req: ChatRequest) -> ChatResponse:
        body: dict[str, Any] = {
            "model": req.model_id or self.config.model_id,
            "messages": messages_wire(req.messages),
        }
        if req.tools:
            body["tools"] = render_tools_wire(req.tools)
        if req.reasoning_effort:
            body["reasoning_effort"] = req.reasoning_effort
        if req.seed_hint is not None:
            body["seed"] = req.seed_hint
        if self.config.temperature is not None:
            body["temperature"] = self.config.temperature
        if self.config.top_p is not None:
            body["top_p"] = self.config.top_p
        try:
            http_resp = self._client.post(
                self.config.base_url.rstrip("/") + "/chat/completions",
                json=body,
                headers={"Authorization": f"Bearer {self._api_key()}"},
            )
        except httpx.HTTPError as exc:
            raise TransportError(str(exc)) from exc
        if http_resp.status_code >= 500:
            raise TransportError(f"server error {http_resp.status_code}")
        if http_resp.status_code >= 400:
            raise ProtocolError(f"request rejected: {http_resp.status_code} {http_resp.text[:200]}")
        return self._parse(http_resp)

    @staticmethod
    def _parse(http_resp: httpx.Response) -> ChatResponse:
        try:
            payload = http_resp.json()
            choice = payload["choices"][0]["message"]
        except (ValueError, KeyError, IndexError) as exc:
            raise ProtocolError(f"malformed backend reply: {exc}") from exc
        calls = []
        for raw in choice.get("tool_calls") or []:
            try:
                fn = raw["function"]
                args = json.loads(fn.get("arguments") or "{}")
                if not isinstance(args, dict):
                    raise ValueError("arguments must be an object")
                calls.append(ToolCall(tool_name=fn["name"], args=args))
            except (KeyError, ValueError, TypeError) as exc:
                raise ProtocolError(f"malformed tool call in reply: {exc}") from exc
        usage_rec = payload.get("usage") or {}
        usage = Usage(
            input_tokens=int(usage_rec.get("prompt_tokens", 0)),
            output_tokens=int(usage_rec.get("completion_tokens", 0)),
        )
        return ChatResponse(
            content=choice.get("content") or "", tool_calls=tuple(calls), usage=usage
        )


def complete(
    req: ChatRequest,
    backend: Backend,
    *,
    ledger: TokenLedger | None = None,
    role: str = "agent",
    sleep: Callable[[float], None] = time.sleep,
) -> ChatResponse:
    """One assistant turn, with transport retries and token accounting.

    Transient transport failures are retried with exponential backoff up to
    ``backend.config.max_attempts``; anything else propagates immediately.
    Raises BudgetExceeded once the ledger total passes the configured cap
    (the triggering usage is still recorded, so accounting stays exact).
    """
    config = backend.config
    attempts = max(1, config.max_attempts)
    last_exc: Exception | None = None
    for attempt in range(attempts):
        try:
            resp = backend.send(req)
            break
        except TransportError as exc:
            last_exc = exc
            if attempt + 1 < attempts:
                sleep(config.backoff_base_s * (2**attempt))
    else:
        raise TransportError(f"gave up after {attempts} attempts: {last_exc}")
    if ledger is not None:
        ledger.record(role, resp.usage.input_tokens, resp.usage.output_tokens)
        if config.token_budget is not None and ledger.total > config.token_budget:
            raise BudgetExceeded(
                f"token budget {config.token_budget} exceeded ({ledger.total} used)"
            )
    return resp
