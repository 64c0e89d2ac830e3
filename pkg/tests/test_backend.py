import json
import math
import threading

import pytest

from geoaov.backend import (
    BackendConfig,
    ChatMessage,
    HttpBackend,
    ScriptEntry,
    ScriptedBackend,
    ToolCall,
    ToolSchema,
    Usage,
    _reply_chars,
    _request_chars,
    judge_score,
    script_load,
)
from geoaov.errors import (
    AuthError,
    JudgeFormatError,
    ParseError,
    ProtocolError,
    SchemaError,
    ScriptMismatch,
    TransportError,
)


def sysmsg(text="be helpful"):
    return ChatMessage(role="system", content=text)


def reply(text):
    return ChatMessage(role="assistant", content=text)


class TestUsage:
    def test_addition(self):
        assert Usage(3, 4) + Usage(10, 1) == Usage(13, 5)

    def test_total(self):
        assert Usage(3, 4).total() == 7


class TestChatMessage:
    def test_wire_format_tool_call_arguments_are_json_strings(self):
        msg = ChatMessage(
            role="assistant",
            content="",
            tool_calls=[ToolCall("call_1", "annotate", {"layer": "l1"})],
        )
        wire = msg.to_wire()
        args = wire["tool_calls"][0]["function"]["arguments"]
        assert isinstance(args, str)
        assert json.loads(args) == {"layer": "l1"}

    def test_clone_is_deep_for_tool_calls(self):
        msg = ChatMessage(
            role="assistant", content="x",
            tool_calls=[ToolCall("call_1", "annotate", {"layer": "l1"})],
        )
        copy = msg.clone()
        copy.tool_calls[0].arguments["layer"] = "other"
        assert msg.tool_calls[0].arguments["layer"] == "l1"


class TestScriptedBackend:
    def test_replays_in_order(self):
        backend = ScriptedBackend([ScriptEntry(reply("one")), ScriptEntry(reply("two"))])
        first, _ = backend.complete([sysmsg()], [])
        second, _ = backend.complete([sysmsg()], [])
        assert (first.content, second.content) == ("one", "two")
        assert backend.calls_made() == 2

    def test_exhaustion_raises(self):
        backend = ScriptedBackend([ScriptEntry(reply("only"))])
        backend.complete([sysmsg()], [])
        with pytest.raises(ScriptMismatch):
            backend.complete([sysmsg()], [])

    def test_repeat_wraps_around(self):
        backend = ScriptedBackend([ScriptEntry(reply("5"))], repeat=True)
        for _ in range(4):
            msg, _ = backend.complete([sysmsg()], [])
            assert msg.content == "5"

    def test_requires_leading_system_message(self):
        backend = ScriptedBackend([ScriptEntry(reply("x"))])
        with pytest.raises(ValueError):
            backend.complete([ChatMessage(role="user", content="hi")], [])
        with pytest.raises(ValueError):
            backend.complete([], [])

    def test_content_prefix_match(self):
        backend = ScriptedBackend(
            [ScriptEntry(reply("x"), match={"role": "system", "content_prefix": "be hel"})]
        )
        backend.complete([sysmsg()], [])

    def test_content_prefix_mismatch_describes_both_sides(self):
        backend = ScriptedBackend(
            [ScriptEntry(reply("x"), match={"role": "system", "content_prefix": "wrong"})]
        )
        with pytest.raises(ScriptMismatch) as exc_info:
            backend.complete([sysmsg()], [])
        text = str(exc_info.value)
        assert "wrong" in text and "be helpful" in text

    def test_role_match_missing_role(self):
        backend = ScriptedBackend([ScriptEntry(reply("x"), match={"role": "tool"})])
        with pytest.raises(ScriptMismatch):
            backend.complete([sysmsg()], [])

    def test_tool_name_match(self):
        schema = ToolSchema(name="annotate", description="", parameters={})
        backend = ScriptedBackend([ScriptEntry(reply("x"), match={"tool_name": "annotate"})])
        backend.complete([sysmsg()], [schema])
        backend = ScriptedBackend([ScriptEntry(reply("x"), match={"tool_name": "absent"})])
        with pytest.raises(ScriptMismatch):
            backend.complete([sysmsg()], [schema])

    def test_default_usage_is_char_quarter_of_wire_size(self):
        entry = ScriptEntry(reply("four score and seven"))
        backend = ScriptedBackend([entry])
        messages = [sysmsg(), ChatMessage(role="user", content="hello there")]
        _, usage = backend.complete(messages, [])
        assert usage.prompt_tokens == math.ceil(_request_chars(messages, []) / 4)
        assert usage.completion_tokens == math.ceil(_reply_chars(entry.reply) / 4)

    def test_pinned_usage_wins(self):
        backend = ScriptedBackend([ScriptEntry(reply("x"), usage=Usage(100, 7))])
        _, usage = backend.complete([sysmsg()], [])
        assert usage == Usage(100, 7)

    def test_complete_never_mutates_input_messages(self):
        messages = [sysmsg(), ChatMessage(role="user", content="hi")]
        snapshot = [m.to_wire() for m in messages]
        backend = ScriptedBackend([ScriptEntry(reply("x"))])
        backend.complete(messages, [])
        assert [m.to_wire() for m in messages] == snapshot

    def test_reply_is_cloned_per_call(self):
        entry = ScriptEntry(
            ChatMessage(role="assistant", content="", tool_calls=[ToolCall("c", "t", {"a": 1})])
        )
        backend = ScriptedBackend([entry], repeat=True)
        first, _ = backend.complete([sysmsg()], [])
        first.tool_calls[0].arguments["a"] = 99
        second, _ = backend.complete([sysmsg()], [])
        assert second.tool_calls[0].arguments["a"] == 1

    def test_serialized_under_concurrency(self):
        n = 60
        backend = ScriptedBackend([ScriptEntry(reply(str(i))) for i in range(n)])
        seen = []
        seen_lock = threading.Lock()

        def worker():
            msg, _ = backend.complete([sysmsg()], [])
            with seen_lock:
                seen.append(msg.content)

        threads = [threading.Thread(target=worker) for _ in range(n)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        # every entry consumed exactly once, whatever the interleaving
        assert sorted(seen, key=int) == [str(i) for i in range(n)]


class TestScriptLoad:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "script.json"
        path.write_text(json.dumps({
            "repeat": True,
            "entries": [
                {"reply": {"content": "hi"}, "usage": {"prompt_tokens": 5, "completion_tokens": 2}},
                {"reply": {"content": "", "tool_calls": [
                    {"tool_name": "annotate", "arguments": {"layer": "l1"}}]},
                 "match": {"role": "system"}},
            ],
        }))
        backend = script_load(str(path))
        assert backend.repeat
        msg, usage = backend.complete([sysmsg()], [])
        assert msg.content == "hi" and usage == Usage(5, 2)
        msg, _ = backend.complete([sysmsg()], [])
        assert msg.tool_calls[0].tool_name == "annotate"

    def test_missing_file(self, tmp_path):
        with pytest.raises(ParseError):
            script_load(str(tmp_path / "absent.json"))

    def test_bad_json(self, tmp_path):
        path = tmp_path / "script.json"
        path.write_text("{nope")
        with pytest.raises(ParseError):
            script_load(str(path))

    def test_entry_without_reply(self, tmp_path):
        path = tmp_path / "script.json"
        path.write_text(json.dumps({"entries": [{"match": {}}]}))
        with pytest.raises(SchemaError):
            script_load(str(path))


class FakeResponse:
    def __init__(self, status_code, body=None, text=""):
        self.status_code = status_code
        self._body = body
        self.text = text

    def json(self):
        if self._body is None:
            raise ValueError("no body")
        return self._body


def ok_body(content="fine", tool_calls=None):
    message = {"content": content}
    if tool_calls:
        message["tool_calls"] = tool_calls
    return {
        "choices": [{"message": message}],
        "usage": {"prompt_tokens": 11, "completion_tokens": 3},
    }


@pytest.fixture
def http_backend():
    return HttpBackend(
        BackendConfig(kind="http_openai_compatible", model="m", base_url="http://host/v1"),
        backoff=0.0,
    )


class TestHttpBackend:
    def test_success_parses_message_and_usage(self, http_backend, monkeypatch):
        seen = {}

        def fake_post(url, json=None, headers=None, timeout=None):
            seen.update(url=url, payload=json)
            return FakeResponse(200, ok_body())

        monkeypatch.setattr("geoaov.backend.requests.post", fake_post)
        msg, usage = http_backend.complete([sysmsg()], [])
        assert msg.content == "fine"
        assert usage == Usage(11, 3)
        assert seen["url"] == "http://host/v1/chat/completions"
        assert seen["payload"]["temperature"] == 0.0

    def test_tool_call_arguments_decoded(self, http_backend, monkeypatch):
        body = ok_body(content=None, tool_calls=[
            {"id": "c1", "function": {"name": "annotate", "arguments": '{"layer": "l1"}'}}
        ])
        monkeypatch.setattr(
            "geoaov.backend.requests.post", lambda *a, **k: FakeResponse(200, body)
        )
        msg, _ = http_backend.complete([sysmsg()], [])
        assert msg.tool_calls[0].arguments == {"layer": "l1"}
        assert msg.content == ""

    def test_retries_5xx_then_succeeds(self, http_backend, monkeypatch):
        responses = [FakeResponse(503), FakeResponse(200, ok_body())]
        calls = {"n": 0}

        def fake_post(*args, **kwargs):
            calls["n"] += 1
            return responses.pop(0)

        monkeypatch.setattr("geoaov.backend.requests.post", fake_post)
        msg, _ = http_backend.complete([sysmsg()], [])
        assert msg.content == "fine" and calls["n"] == 2

    def test_transport_error_after_budget(self, http_backend, monkeypatch):
        calls = {"n": 0}

        def fake_post(*args, **kwargs):
            calls["n"] += 1
            return FakeResponse(500)

        monkeypatch.setattr("geoaov.backend.requests.post", fake_post)
        with pytest.raises(TransportError):
            http_backend.complete([sysmsg()], [])
        assert calls["n"] == http_backend.config.max_retries + 1

    def test_protocol_error_never_retries(self, http_backend, monkeypatch):
        calls = {"n": 0}

        def fake_post(*args, **kwargs):
            calls["n"] += 1
            return FakeResponse(400, text="bad request")

        monkeypatch.setattr("geoaov.backend.requests.post", fake_post)
        with pytest.raises(ProtocolError):
            http_backend.complete([sysmsg()], [])
        assert calls["n"] == 1

    def test_auth_error_no_retry(self, http_backend, monkeypatch):
        calls = {"n": 0}

        def fake_post(*args, **kwargs):
            calls["n"] += 1
            return FakeResponse(401)

        monkeypatch.setattr("geoaov.backend.requests.post", fake_post)
        with pytest.raises(AuthError):
            http_backend.complete([sysmsg()], [])
        assert calls["n"] == 1

    def test_missing_api_key_env(self, monkeypatch):
        monkeypatch.delenv("ABSENT_KEY", raising=False)
        backend = HttpBackend(BackendConfig(
            kind="http_openai_compatible", model="m",
            base_url="http://host/v1", api_key_env="ABSENT_KEY",
        ))
        with pytest.raises(AuthError):
            backend.complete([sysmsg()], [])

    def test_malformed_body_is_protocol_error(self, http_backend, monkeypatch):
        monkeypatch.setattr(
            "geoaov.backend.requests.post",
            lambda *a, **k: FakeResponse(200, {"choices": []}),
        )
        with pytest.raises(ProtocolError):
            http_backend.complete([sysmsg()], [])

    def test_connect_dispatch(self):
        with pytest.raises(ValueError):
            BackendConfig(kind="http_openai_compatible", model="m").connect()
        with pytest.raises(ValueError):
            BackendConfig(kind="carrier_pigeon").connect()


class TestJudgeScore:
    def test_bare_integer(self):
        backend = ScriptedBackend([ScriptEntry(reply("4"))])
        assert judge_score(backend, "count cars", "count vehicles") == 4

    def test_first_digit_token_in_prose(self):
        backend = ScriptedBackend([ScriptEntry(reply("I rate this 3 out of 5."))])
        assert judge_score(backend, "a", "b") == 3

    def test_reprompt_once_then_parse(self):
        backend = ScriptedBackend([ScriptEntry(reply("hard to say")), ScriptEntry(reply("5"))])
        assert judge_score(backend, "a", "b") == 5
        assert backend.calls_made() == 2

    def test_reprompt_failure_raises(self):
        backend = ScriptedBackend([ScriptEntry(reply("no")), ScriptEntry(reply("still no"))])
        with pytest.raises(JudgeFormatError):
            judge_score(backend, "a", "b")

    def test_out_of_range_is_unparseable(self):
        backend = ScriptedBackend([ScriptEntry(reply("7")), ScriptEntry(reply("0"))])
        with pytest.raises(JudgeFormatError):
            judge_score(backend, "a", "b")

    def test_empty_objectives_rejected(self):
        backend = ScriptedBackend([ScriptEntry(reply("5"))])
        with pytest.raises(ValueError):
            judge_score(backend, "", "b")
