"""Environment-agnostic domain types.

Everything here is an immutable value (or a single-writer accumulator in the
case of :class:`TokenLedger`) so instances can be shared freely across
concurrent episode workers. Records round-trip through a line-delimited JSON
log format; see ``to_record`` / ``from_record`` on each type.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Any, Iterable, Iterator

from .errors import MismatchedToolSets

TYPE_TAGS = ("string", "integer", "number", "boolean", "array", "object")

ROLES = ("agent", "editor")


def _check_value(value: Any, where: str) -> None:
    """Args use a closed JSON value model: null/bool/int/float/str/array/object."""
    if value is None or isinstance(value, (bool, int, float, str)):
        return
    if isinstance(value, (list, tuple)):
        for item in value:
            _check_value(item, where)
        return
    if isinstance(value, dict):
        for key, item in value.items():
            if not isinstance(key, str):
                raise TypeError(f"{where}: object keys must be strings, got {key!r}")
            _check_value(item, where)
        return
    raise TypeError(f"{where}: unsupported value type {type(value).__name__}")


@dataclass(frozen=True)
class ParamSpec:
    """One parameter of a tool: name, free-text description, type tag, required flag."""

    name: str
    description: str = ""
    type_tag: str = "string"
    required: bool = True

    def __post_init__(self):
        if self.type_tag not in TYPE_TAGS:
            raise ValueError(f"unknown type_tag {self.type_tag!r} for param {self.name!r}")

    def to_record(self) -> dict:
        return {
            "name": self.name,
            "description": self.description,
            "type_tag": self.type_tag,
            "required": self.required,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "ParamSpec":
        return cls(
            name=rec["name"],
            description=rec.get("description", ""),
            type_tag=rec.get("type_tag", "string"),
            required=bool(rec.get("required", True)),
        )


@dataclass(frozen=True)
class ToolSpec:
    """A callable tool: name, behavioral documentation, parameters, optional executable.

    ``executable`` is an opaque handle (registry key) that an environment can
    resolve to a real callable. A spec without one may still be shown to an
    agent; executing it yields a NotExecutable error.
    """

    name: str
    documentation: str = ""
    params: tuple[ParamSpec, ...] = ()
    executable: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(self.params))
        names = [p.name for p in self.params]
        if len(names) != len(set(names)):
            raise ValueError(f"duplicate param names on tool {self.name!r}")

    @property
    def required_params(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.params if p.required)

    def param(self, name: str) -> ParamSpec | None:
        for p in self.params:
            if p.name == name:
                return p
        return None

    def to_record(self) -> dict:
        # Canonical order: required params before optional ones.
        ordered = sorted(self.params, key=lambda p: (not p.required,))
        return {
            "name": self.name,
            "documentation": self.documentation,
            "params": [p.to_record() for p in ordered],
            "executable": self.executable,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "ToolSpec":
        return cls(
            name=rec["name"],
            documentation=rec.get("documentation", ""),
            params=tuple(ParamSpec.from_record(p) for p in rec.get("params", [])),
            executable=rec.get("executable"),
        )


@dataclass(frozen=True)
class ToolCall:
    """A structured call: tool name plus an argument map."""

    tool_name: str
    args: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        keys = list(self.args)
        if len(keys) != len(set(keys)):
            raise ValueError("duplicate arg keys")
        for key, value in self.args.items():
            _check_value(value, f"arg {key!r} of {self.tool_name}")

    def to_record(self) -> dict:
        return {"tool_name": self.tool_name, "args": self.args}

    @classmethod
    def from_record(cls, rec: dict) -> "ToolCall":
        return cls(tool_name=rec["tool_name"], args=dict(rec.get("args", {})))


@dataclass(frozen=True)
class ToolResult:
    """Outcome of executing one call.

    ``status`` is one of ok / tool_error / harness_error. Tool errors carry
    the error text in ``payload``; agents observe them and keep going.
    ``latency_ms`` stays 0 for deterministic in-process execution so that
    trajectory logs are byte-stable across runs.
    """

    status: str
    payload: Any = None
    latency_ms: float = 0.0
    tokens: dict[str, int] | None = None

    def __post_init__(self):
        if self.status not in ("ok", "tool_error", "harness_error"):
            raise ValueError(f"bad status {self.status!r}")
        if self.status == "ok" and self.payload is None:
            raise ValueError("status=ok requires a payload")
        if self.latency_ms < 0:
            raise ValueError("latency_ms must be >= 0")

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def to_record(self) -> dict:
        rec = {"status": self.status, "payload": self.payload, "latency_ms": self.latency_ms}
        if self.tokens is not None:
            rec["tokens"] = self.tokens
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "ToolResult":
        return cls(
            status=rec["status"],
            payload=rec.get("payload"),
            latency_ms=rec.get("latency_ms", 0.0),
            tokens=rec.get("tokens"),
        )


@dataclass(frozen=True)
class TurnRecord:
    """One agent turn: reasoning text, the executed call (if any), its result,
    and the observation text fed back on the next turn."""

    reasoning: str = ""
    call: ToolCall | None = None
    result: ToolResult | None = None
    observation: str = ""

    def __post_init__(self):
        if self.call is not None and self.result is None:
            raise ValueError("a turn with a call must carry its result")

    def to_record(self) -> dict:
        return {
            "reasoning": self.reasoning,
            "call": self.call.to_record() if self.call else None,
            "result": self.result.to_record() if self.result else None,
            "observation": self.observation,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "TurnRecord":
        return cls(
            reasoning=rec.get("reasoning", ""),
            call=ToolCall.from_record(rec["call"]) if rec.get("call") else None,
            result=ToolResult.from_record(rec["result"]) if rec.get("result") else None,
            observation=rec.get("observation", ""),
        )


@dataclass(frozen=True)
class Trajectory:
    """A full episode: ordered turns, final answer, outcome, and the
    documentation version the agent saw."""

    instance_id: str
    turns: tuple[TurnRecord, ...] = ()
    final_answer: str | None = None
    outcome: Any = None
    doc_version: int = 0

    def __post_init__(self):
        object.__setattr__(self, "turns", tuple(self.turns))

    @property
    def calls(self) -> list[ToolCall]:
        return [t.call for t in self.turns if t.call is not None]

    @property
    def tool_sequence(self) -> list[str]:
        return [c.tool_name for c in self.calls]

    def to_record(self) -> dict:
        return {
            "record": "trajectory",
            "instance_id": self.instance_id,
            "turns": [t.to_record() for t in self.turns],
            "final_answer": self.final_answer,
            "outcome": self.outcome,
            "doc_version": self.doc_version,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "Trajectory":
        return cls(
            instance_id=rec["instance_id"],
            turns=tuple(TurnRecord.from_record(t) for t in rec.get("turns", [])),
            final_answer=rec.get("final_answer"),
            outcome=rec.get("outcome"),
            doc_version=rec.get("doc_version", 0),
        )


@dataclass(frozen=True)
class DocEntry:
    """Documentation for one tool: behavioral text plus optional per-param docs."""

    documentation: str = ""
    param_docs: dict[str, str] = field(default_factory=dict)

    def to_record(self) -> dict:
        return {"documentation": self.documentation, "param_docs": dict(self.param_docs)}

    @classmethod
    def from_record(cls, rec: dict) -> "DocEntry":
        return cls(
            documentation=rec.get("documentation", ""),
            param_docs=dict(rec.get("param_docs", {})),
        )


@dataclass(frozen=True)
class DocumentationSet:
    """A versioned snapshot of the documentation for a whole tool set.

    Version 0 is the initial (possibly empty or degraded) documentation.
    Snapshots are immutable; edits produce the next version.
    """

    version: int
    entries: dict[str, DocEntry]
    provenance: str = "initial"

    def __post_init__(self):
        if self.version < 0:
            raise ValueError("version must be >= 0")

    @classmethod
    def initial(cls, entries: dict[str, DocEntry]) -> "DocumentationSet":
        return cls(version=0, entries=dict(entries), provenance="initial")

    @classmethod
    def from_tools(cls, tools: Iterable[ToolSpec]) -> "DocumentationSet":
        entries = {
            t.name: DocEntry(t.documentation, {p.name: p.description for p in t.params})
            for t in tools
        }
        return cls.initial(entries)

    def tool_names(self) -> set[str]:
        return set(self.entries)

    def text_for(self, tool_name: str) -> str:
        entry = self.entries.get(tool_name)
        return entry.documentation if entry else ""

    def with_updates(self, proposals: dict[str, str], iteration: int) -> "DocumentationSet":
        """Next version with ``proposals`` applied; unmentioned tools keep their docs."""
        entries = dict(self.entries)
        for name, text in proposals.items():
            prev = entries.get(name, DocEntry())
            entries[name] = DocEntry(documentation=text, param_docs=dict(prev.param_docs))
        return DocumentationSet(
            version=self.version + 1, entries=entries, provenance=f"edited:{iteration}"
        )

    def to_record(self) -> dict:
        return {
            "record": "documentation",
            "version": self.version,
            "provenance": self.provenance,
            "entries": {name: e.to_record() for name, e in sorted(self.entries.items())},
        }

    @classmethod
    def from_record(cls, rec: dict) -> "DocumentationSet":
        return cls(
            version=rec["version"],
            entries={
                name: DocEntry.from_record(e) for name, e in rec.get("entries", {}).items()
            },
            provenance=rec.get("provenance", "initial"),
        )


class TokenLedger:
    """Per-run token accounting, split by role (agent vs editor).

    Updates go through :meth:`record`; counts only ever grow. Concurrent
    episodes should funnel deltas through a single ledger instance.
    """

    def __init__(self):
        self.input_tokens: dict[str, int] = {role: 0 for role in ROLES}
        self.output_tokens: dict[str, int] = {role: 0 for role in ROLES}

    def record(self, role: str, input_tokens: int, output_tokens: int) -> None:
        if role not in self.input_tokens:
            self.input_tokens[role] = 0
            self.output_tokens[role] = 0
        if input_tokens < 0 or output_tokens < 0:
            raise ValueError("token deltas must be >= 0")
        self.input_tokens[role] += input_tokens
        self.output_tokens[role] += output_tokens

    @property
    def total_input(self) -> int:
        return sum(self.input_tokens.values())

    @property
    def total_output(self) -> int:
        return sum(self.output_tokens.values())

    @property
    def total(self) -> int:
        return self.total_input + self.total_output

    def to_record(self) -> dict:
        return {
            "input_tokens": dict(self.input_tokens),
            "output_tokens": dict(self.output_tokens),
        }


def normalize_whitespace(text: str) -> str:
    """Collapse whitespace runs and trim; editors reflow text freely."""
    return " ".join(text.split())


def _entry_key(entry: DocEntry) -> tuple:
    return (
        normalize_whitespace(entry.documentation),
        tuple(sorted((k, normalize_whitespace(v)) for k, v in entry.param_docs.items())),
    )


def doc_diff(a: DocumentationSet, b: DocumentationSet) -> set[str]:
    """Names whose documentation or param docs differ after whitespace normalization."""
    if a.tool_names() != b.tool_names():
        raise MismatchedToolSets(
            f"tool sets differ: {sorted(a.tool_names() ^ b.tool_names())}"
        )
    return {
        name
        for name in a.entries
        if _entry_key(a.entries[name]) != _entry_key(b.entries[name])
    }


def canonical_serialize(call: ToolCall) -> str:
    """Deterministic text form ``name(key=value, ...)`` with sorted keys.

    Values are JSON-encoded, so the output parses back losslessly with
    :func:`parse_call_text`.
    """
    parts = [
        f"{key}={json.dumps(call.args[key], sort_keys=True, ensure_ascii=False)}"
        for key in sorted(call.args)
    ]
    return f"{call.tool_name}({', '.join(parts)})"


_CALL_HEAD = re.compile(r"\b([A-Za-z_][A-Za-z0-9_.]*)\s*\(")
_IDENT = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


def _split_top_level(text: str) -> list[str]:
    """Split on commas that sit outside brackets and quotes."""
    parts, depth, start, quote = [], 0, 0, None
    i = 0
    while i < len(text):
        ch = text[i]
        if quote:
            if ch == "\\":
                i += 2
                continue
            if ch == quote:
                quote = None
        elif ch in "\"'":
            quote = ch
        elif ch in "([{":
            depth += 1
        elif ch in ")]}":
            depth -= 1
        elif ch == "," and depth == 0:
            parts.append(text[start:i])
            start = i + 1
        i += 1
    parts.append(text[start:])
    return parts


def _parse_value(text: str) -> Any:
    import ast as _ast

    text = text.strip()
    try:
        return json.loads(text)
    except (ValueError, TypeError):
        pass
    # Python-literal fallback covers single quotes, True/False/None.
    value = _ast.literal_eval(text)  # raises on anything non-literal
    _check_value(value, "parsed arg")
    return value


def parse_call_text(text: str) -> ToolCall | None:
    """Parse the first ``name(key=value, ...)`` call found in free text.

    Returns None when no well-formed call is present. Values follow the
    JSON value model, with Python literals accepted as a fallback.
    """
    for match in _CALL_HEAD.finditer(text):
        name = match.group(1)
        # Find the balanced closing paren.
        depth, quote = 1, None
        i = match.end()
        while i < len(text) and depth:
            ch = text[i]
            if quote:
                if ch == "\\":
                    i += 1
                elif ch == quote:
                    quote = None
            elif ch in "\"'":
                quote = ch
            elif ch == "(":
                depth += 1
            elif ch == ")":
                depth -= 1
            i += 1
        if depth:
            continue
        body = text[match.end() : i - 1].strip()
        args: dict[str, Any] = {}
        try:
            if body:
                for part in _split_top_level(body):
                    key, sep, raw = part.partition("=")
                    key = key.strip()
                    if not sep or not _IDENT.match(key):
                        raise ValueError(f"bad arg {part!r}")
                    args[key] = _parse_value(raw)
            return ToolCall(tool_name=name, args=args)
        except (ValueError, SyntaxError, TypeError):
            continue
    return None


def write_jsonl(path, records: Iterable[dict]) -> None:
    with open(path, "a", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True, ensure_ascii=False) + "\n")


def read_jsonl(path) -> Iterator[dict]:
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield json.loads(line)
