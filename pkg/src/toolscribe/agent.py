"""ReAct-style episode runner.

An :class:`Episode` is the environment-facing face of one task instance:
it owns the system prompt, the tool specs rendered under the current
documentation, call execution, and scoring. :func:`run_episode` drives it
against a chat backend, replaying the full history every turn and feeding
each tool result back as an observation before the next request.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any

from .core import ToolCall, ToolResult, ToolSpec, TokenLedger, Trajectory, TurnRecord, parse_call_text
from .errors import BackendError, GatewayError, ToolScribeError
from .gateway import Backend, ChatRequest, ChatResponse, Message, complete

logger = logging.getLogger(__name__)

FINAL_ANSWER_MARKER = "FINAL ANSWER:"


@dataclass(frozen=True)
class EpisodeLimits:
    """Turn budget and per-turn call policy for one episode."""

    max_turns: int = 20
    one_call_per_turn: bool = False
    stop_on_final_answer: bool = True

    def __post_init__(self):
        if self.max_turns < 1:
            raise ValueError("max_turns must be >= 1")


@dataclass(frozen=True)
class ParseFailure:
    """A reply that could not be interpreted as a tool call."""

    raw: str


def parse_tool_call(raw: Any) -> ToolCall | ParseFailure:
    """Interpret a backend reply fragment as a tool call.

    Structured calls pass through unchanged; text is matched against the
    ``name(key=value, ...)`` grammar. Failures come back as values so the
    episode can record them and keep going.
    """
    if isinstance(raw, ToolCall):
        return raw
    if isinstance(raw, dict) and "tool_name" in raw:
        try:
            return ToolCall.from_record(raw)
        except (KeyError, TypeError, ValueError):
            return ParseFailure(raw=str(raw))
    if isinstance(raw, str):
        call = parse_call_text(raw)
        return call if call is not None else ParseFailure(raw=raw)
    return ParseFailure(raw=repr(raw))


class Episode:
    """Base episode. Environments subclass and fill in execution and scoring."""

    instance_id: str = ""
    system_prompt: str = ""
    system_template_id: str = ""
    initial_message: str = ""
    reasoning_effort: str = "medium"
    final_answer_marker: str | None = FINAL_ANSWER_MARKER
    doc_version: int = 0

    @property
    def tools(self) -> tuple[ToolSpec, ...]:
        raise NotImplementedError

    def execute(self, call: ToolCall) -> ToolResult:
        raise NotImplementedError

    def observation(self, call: ToolCall, result: ToolResult) -> str:
        if result.ok:
            return str(result.payload)
        return f"ERROR: {result.payload}"

    def done(self) -> bool:
        """Environment-driven termination (e.g. the game ended)."""
        return False

    def outcome(self, trajectory: Trajectory) -> Any:
        return None


def _extract_final_answer(content: str, marker: str | None) -> str | None:
    if marker and marker in content:
        return content.split(marker, 1)[1].strip()
    return None


def run_episode(
    episode: Episode,
    backend: Backend,
    limits: EpisodeLimits,
    *,
    ledger: TokenLedger | None = None,
    role: str = "agent",
) -> Trajectory:
    """Run one episode to completion.

    Terminates on a final answer, the turn cap, or environment-side
    completion. Tool errors are observations, never fatal; backend failures
    raise :class:`BackendError` carrying the partial trajectory.
    """
    messages: list[Message] = []
    if episode.system_prompt:
        messages.append(Message(role="system", content=episode.system_prompt))
    messages.append(Message(role="user", content=episode.initial_message))

    turns: list[TurnRecord] = []
    final_answer: str | None = None

    def partial() -> Trajectory:
        return Trajectory(
            instance_id=episode.instance_id,
            turns=tuple(turns),
            final_answer=final_answer,
            outcome=None,
            doc_version=episode.doc_version,
        )

    for _ in range(limits.max_turns):
        if episode.done():
            break
        req = ChatRequest(
            messages=tuple(messages),
            tools=episode.tools,
            model_id=backend.config.model_id,
            reasoning_effort=episode.reasoning_effort,
        )
        try:
            resp: ChatResponse = complete(req, backend, ledger=ledger, role=role)
        except GatewayError as exc:
            raise BackendError(str(exc), trajectory=partial()) from exc

        calls = list(resp.tool_calls)
        if not calls and resp.content:
            parsed = parse_tool_call(resp.content)
            if isinstance(parsed, ToolCall):
                calls = [parsed]

        answer = _extract_final_answer(resp.content, episode.final_answer_marker)
        if answer is not None:
            final_answer = answer
            calls = []
        elif not calls:
            # Plain reply with no call counts as the final answer.
            final_answer = resp.content.strip()

        if not calls:
            turns.append(TurnRecord(reasoning=resp.content))
            messages.append(Message(role="assistant", content=resp.content))
            if limits.stop_on_final_answer:
                break
            continue

        if limits.one_call_per_turn and len(calls) > 1:
            logger.warning(
                "episode %s: %d calls in one turn, executing only the first",
                episode.instance_id,
                len(calls),
            )
            calls = calls[:1]

        for index, call in enumerate(calls):
            try:
                result = episode.execute(call)
            except ToolScribeError as exc:
                result = ToolResult(status="tool_error", payload=str(exc))
            obs = episode.observation(call, result)
            reasoning = resp.content if index == 0 else ""
            turns.append(
                TurnRecord(reasoning=reasoning, call=call, result=result, observation=obs)
            )
            messages.append(Message(role="assistant", content=reasoning, tool_call=call))
            messages.append(Message(role="tool", content=obs))
            if episode.done():
                break

        if final_answer is not None and limits.stop_on_final_answer:
            break

    traj = partial()
    outcome = episode.outcome(traj)
    if outcome is not None:
        traj = Trajectory(
            instance_id=traj.instance_id,
            turns=traj.turns,
            final_answer=traj.final_answer,
            outcome=outcome,
            doc_version=traj.doc_version,
        )
    return traj
