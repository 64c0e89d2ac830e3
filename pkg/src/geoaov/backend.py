"""Chat-completion backends with function calling and token accounting.

Two implementations behind one interface: an HTTP client for any
OpenAI-compatible endpoint, and a scripted backend that replays recorded
(matcher, reply, usage) entries for deterministic tests and benchmarks.
All token counts in the engine originate from a backend's reported usage;
nothing else estimates tokens.
"""

from __future__ import annotations

import json
import math
import os
import re
import threading
import time
from dataclasses import dataclass, field
from typing import Any

import requests

from .assets import load_prompt
from .errors import (
    AuthError,
    JudgeFormatError,
    ParseError,
    ProtocolError,
    ScriptMismatch,
    TransportError,
)

ROLES = ("system", "user", "assistant", "tool")


@dataclass
class Usage:
    prompt_tokens: int = 0
    completion_tokens: int = 0

    def __add__(self, other: "Usage") -> "Usage":
        return Usage(
            self.prompt_tokens + other.prompt_tokens,
            self.completion_tokens + other.completion_tokens,
        )

    def total(self) -> int:
        return self.prompt_tokens + self.completion_tokens

    def to_dict(self) -> dict:
        return {"prompt_tokens": self.prompt_tokens, "completion_tokens": self.completion_tokens}


@dataclass
class ToolCall:
    call_id: str
    tool_name: str
    arguments: dict[str, Any]

    def clone(self) -> "ToolCall":
        return ToolCall(self.call_id, self.tool_name, json.loads(json.dumps(self.arguments)))


@dataclass
class ChatMessage:
    role: str
    content: str = ""
    tool_calls: list[ToolCall] | None = None
    tool_call_id: str | None = None

    def clone(self) -> "ChatMessage":
        calls = [c.clone() for c in self.tool_calls] if self.tool_calls is not None else None
        return ChatMessage(self.role, self.content, calls, self.tool_call_id)

    def to_wire(self) -> dict:
        msg: dict[str, Any] = {"role": self.role, "content": self.content}
        if self.tool_calls:
            msg["tool_calls"] = [
                {
                    "id": c.call_id,
                    "type": "function",
                    "function": {"name": c.tool_name, "arguments": json.dumps(c.arguments)},
                }
                for c in self.tool_calls
            ]
        if self.tool_call_id is not None:
            msg["tool_call_id"] = self.tool_call_id
        return msg

    def to_dict(self) -> dict:
        msg: dict[str, Any] = {"role": self.role, "content": self.content}
        if self.tool_calls:
            msg["tool_calls"] = [
                {"call_id": c.call_id, "tool_name": c.tool_name, "arguments": c.arguments}
                for c in self.tool_calls
            ]
        if self.tool_call_id is not None:
            msg["tool_call_id"] = self.tool_call_id
        return msg


@dataclass
class ToolSchema:
    name: str
    description: str
    parameters: dict[str, Any]

    def to_wire(self) -> dict:
        return {
            "type": "function",
            "function": {
                "name": self.name,
                "description": self.description,
                "parameters": self.parameters,
            },
        }


@dataclass
class BackendConfig:
    kind: str = "scripted"  # http_openai_compatible | scripted
    model: str = ""
    base_url: str = ""
    api_key_env: str = ""
    temperature: float = 0.0
    max_retries: int = 2
    timeout: float = 60.0
    script_path: str = ""

    def connect(self):
        if self.kind == "scripted":
            return script_load(self.script_path)
        if self.kind == "http_openai_compatible":
            if not self.base_url or not self.model:
                raise ValueError("http backend requires base_url and model")
            return HttpBackend(self)
        raise ValueError(f"unknown backend kind {self.kind!r}")


def _check_request(messages: list[ChatMessage]) -> None:
    if not messages:
        raise ValueError("messages must be non-empty")
    if messages[0].role != "system":
        raise ValueError(f"first message must have role 'system', got {messages[0].role!r}")


def _request_chars(messages: list[ChatMessage], tools: list[ToolSchema]) -> int:
    blob = json.dumps(
        {"messages": [m.to_wire() for m in messages], "tools": [t.to_wire() for t in tools]}
    )
    return len(blob)


def _reply_chars(reply: ChatMessage) -> int:
    return len(json.dumps(reply.to_wire()))


@dataclass
class ScriptEntry:
    reply: ChatMessage
    usage: Usage | None = None
    match: dict[str, str] | None = None


class ScriptedBackend:
    """Replays a fixed sequence of assistant replies.

    Each entry may pin expectations about the request (last message role,
    content prefix, offered tool name); a mismatch raises ScriptMismatch
    describing both sides. Usage defaults to a size model of ceil(chars/4)
    over the serialized request and reply, so token totals track how much
    text a strategy actually shuttles around.
    """

    def __init__(self, entries: list[ScriptEntry], repeat: bool = False):
        self.entries = entries
        self.repeat = repeat
        self._index = 0
        self._lock = threading.Lock()

    def calls_made(self) -> int:
        return self._index

    def complete(
        self, messages: list[ChatMessage], tools: list[ToolSchema] | None = None
    ) -> tuple[ChatMessage, Usage]:
        tools = tools or []
        _check_request(messages)
        with self._lock:
            if self._index >= len(self.entries) and not self.repeat:
                raise ScriptMismatch(
                    f"script exhausted after {len(self.entries)} entries; "
                    f"unexpected call with last message "
                    f"{messages[-1].role}: {messages[-1].content[:80]!r}"
                )
            entry = self.entries[self._index % len(self.entries)]
            self._check_match(entry, messages, tools)
            self._index += 1
        usage = entry.usage
        if usage is None:
            usage = Usage(
                prompt_tokens=math.ceil(_request_chars(messages, tools) / 4),
                completion_tokens=math.ceil(_reply_chars(entry.reply) / 4),
            )
        return entry.reply.clone(), usage

    def _check_match(
        self, entry: ScriptEntry, messages: list[ChatMessage], tools: list[ToolSchema]
    ) -> None:
        if not entry.match:
            return
        target = messages[-1]
        role = entry.match.get("role")
        if role is not None:
            candidates = [m for m in messages if m.role == role]
            if not candidates:
                raise ScriptMismatch(
                    f"entry {self._index}: expected a message with role {role!r}, "
                    f"request has roles {[m.role for m in messages]}"
                )
            target = candidates[-1]
        prefix = entry.match.get("content_prefix")
        if prefix is not None and not target.content.startswith(prefix):
            raise ScriptMismatch(
                f"entry {self._index}: expected content starting with {prefix!r}, "
                f"got {target.content[: max(len(prefix), 80)]!r}"
            )
        tool_name = entry.match.get("tool_name")
        if tool_name is not None and tool_name not in [t.name for t in tools]:
            raise ScriptMismatch(
                f"entry {self._index}: expected tool {tool_name!r} on offer, "
                f"request offers {[t.name for t in tools]}"
            )


class HttpBackend:
    """OpenAI-compatible chat-completions client."""

    def __init__(self, config: BackendConfig, backoff: float = 0.5):
        self.config = config
        self.backoff = backoff

    def _headers(self) -> dict[str, str]:
        headers = {"content-type": "application/json"}
        if self.config.api_key_env:
            key = os.environ.get(self.config.api_key_env)
            if not key:
                raise AuthError(f"environment variable {self.config.api_key_env!r} is not set")
            headers["authorization"] = f"Bearer {key}"
        return headers

    def complete(
        self, messages: list[ChatMessage], tools: list[ToolSchema] | None = None
    ) -> tuple[ChatMessage, Usage]:
        tools = tools or []
        _check_request(messages)
        payload: dict[str, Any] = {
            "model": self.config.model,
            "messages": [m.to_wire() for m in messages],
            "temperature": self.config.temperature,
        }
        if tools:
            payload["tools"] = [t.to_wire() for t in tools]
        url = self.config.base_url.rstrip("/") + "/chat/completions"
        headers = self._headers()

        attempts = self.config.max_retries + 1
        last_exc: Exception | None = None
        for attempt in range(attempts):
            try:
                resp = requests.post(
                    url, json=payload, headers=headers, timeout=self.config.timeout
                )
            except requests.RequestException as exc:
                last_exc = TransportError(f"request failed: {exc}")
            else:
                if resp.status_code in (401, 403):
                    raise AuthError(f"endpoint rejected credentials ({resp.status_code})")
                if resp.status_code == 408 or resp.status_code == 429 or resp.status_code >= 500:
                    last_exc = TransportError(f"retryable status {resp.status_code}")
                elif resp.status_code >= 400:
                    raise ProtocolError(f"unexpected status {resp.status_code}: {resp.text[:200]}")
                else:
                    return self._parse_body(resp)
            if attempt + 1 < attempts and self.backoff:
                time.sleep(self.backoff * (2**attempt))
        assert last_exc is not None
        raise last_exc

    def _parse_body(self, resp: requests.Response) -> tuple[ChatMessage, Usage]:
        try:
            body = resp.json()
            raw = body["choices"][0]["message"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ProtocolError(f"malformed response body: {exc}") from exc
        calls: list[ToolCall] | None = None
        if raw.get("tool_calls"):
            calls = []
            for item in raw["tool_calls"]:
                try:
                    calls.append(
                        ToolCall(
                            call_id=item.get("id", f"call_{len(calls)}"),
                            tool_name=item["function"]["name"],
                            arguments=json.loads(item["function"]["arguments"] or "{}"),
                        )
                    )
                except (KeyError, TypeError, ValueError) as exc:
                    raise ProtocolError(f"malformed tool call in response: {exc}") from exc
        usage_raw = body.get("usage") or {}
        usage = Usage(
            prompt_tokens=int(usage_raw.get("prompt_tokens", 0)),
            completion_tokens=int(usage_raw.get("completion_tokens", 0)),
        )
        return (
            ChatMessage(role="assistant", content=raw.get("content") or "", tool_calls=calls),
            usage,
        )


def complete(
    backend, messages: list[ChatMessage], tools: list[ToolSchema] | None = None
) -> tuple[ChatMessage, Usage]:
    return backend.complete(messages, tools)


def _script_entry_from_dict(raw: dict, where: str) -> ScriptEntry:
    from .errors import SchemaError

    if not isinstance(raw, dict) or "reply" not in raw:
        raise SchemaError(f"{where}: entry must be an object with a 'reply'")
    reply_raw = raw["reply"]
    calls = None
    if reply_raw.get("tool_calls"):
        calls = [
            ToolCall(
                call_id=c.get("call_id", f"call_{i}"),
                tool_name=c["tool_name"],
                arguments=c.get("arguments", {}),
            )
            for i, c in enumerate(reply_raw["tool_calls"])
        ]
    reply = ChatMessage(
        role=reply_raw.get("role", "assistant"),
        content=reply_raw.get("content", ""),
        tool_calls=calls,
    )
    usage = None
    if raw.get("usage") is not None:
        usage = Usage(
            prompt_tokens=int(raw["usage"].get("prompt_tokens", 0)),
            completion_tokens=int(raw["usage"].get("completion_tokens", 0)),
        )
    return ScriptEntry(reply=reply, usage=usage, match=raw.get("match"))


def script_load(path: str) -> ScriptedBackend:
    """Load a replay script: {"repeat": bool, "entries": [{match?, reply, usage?}]}."""
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read script {path!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"script {path!r} is not valid JSON: {exc.msg}", position=exc.pos) from exc
    entries = [
        _script_entry_from_dict(raw, f"{path}[{i}]") for i, raw in enumerate(data.get("entries", []))
    ]
    return ScriptedBackend(entries, repeat=bool(data.get("repeat", False)))


_INT_TOKEN = re.compile(r"\d+")


def judge_score(backend, candidate_objective: str, ground_truth_objective: str) -> int:
    """Grade a candidate objective against a reference on the 1..5 scale.

    The reply is parsed as the first digit token; anything else earns one
    reprompt, then JudgeFormatError.
    """
    if not candidate_objective or not ground_truth_objective:
        raise ValueError("both objectives must be non-empty")
    messages = [
        ChatMessage(role="system", content=load_prompt("judge_system")),
        ChatMessage(
            role="user",
            content=(
                f"Reference objective:\n{ground_truth_objective}\n\n"
                f"Candidate objective:\n{candidate_objective}"
            ),
        ),
    ]
    reply, _ = backend.complete(messages, [])
    score = _parse_judge_reply(reply.content)
    if score is not None:
        return score
    messages = messages + [
        reply,
        ChatMessage(role="user", content="Reply with a single integer from 1 to 5."),
    ]
    reply, _ = backend.complete(messages, [])
    score = _parse_judge_reply(reply.content)
    if score is None:
        raise JudgeFormatError(f"judge reply not parseable as 1..5: {reply.content[:80]!r}")
    return score


def _parse_judge_reply(text: str) -> int | None:
    m = _INT_TOKEN.search(text)
    if not m:
        return None
    value = int(m.group())
    if 1 <= value <= 5:
        return value
    return None
