"""Remote backend tests against local stub HTTP servers.

Everything runs on 127.0.0.1; no test touches the real network.
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from treeseek.backends import Document
from treeseek.errors import BackendUnavailableError, ConfigurationError, ParseFailedError
from treeseek.orchestrator import HistoryContext
from treeseek.remote import (
    LlmEndpointConfig,
    RemotePolicyBackend,
    RemoteRewardBackend,
    SearchEndpointConfig,
    WebSearchBackend,
    chat_complete,
    parse_structured_reply,
    web_search,
)

SECRET = "sk-stub-key-do-not-log"


class _StubHandler(BaseHTTPRequestHandler):
    def do_GET(self):
        self._respond()

    def do_POST(self):
        self._respond()

    def _respond(self):
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length).decode("utf-8") if length else ""
        self.server.requests.append(
            {"path": self.path, "headers": dict(self.headers), "body": raw}
        )
        if self.server.responses:
            status, payload = self.server.responses.pop(0)
        else:
            status, payload = 500, {"error": "script exhausted"}
        data = (
            payload.encode("utf-8")
            if isinstance(payload, str)
            else json.dumps(payload).encode("utf-8")
        )
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


@pytest.fixture
def stub():
    server = ThreadingHTTPServer(("127.0.0.1", 0), _StubHandler)
    server.responses = []
    server.requests = []
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        yield server
    finally:
        server.shutdown()
        server.server_close()


def _url(server) -> str:
    return f"http://127.0.0.1:{server.server_address[1]}/v1/chat"


def _chat_body(text: str) -> dict:
    return {"choices": [{"message": {"content": text}}]}


def _llm_config(server, **overrides) -> LlmEndpointConfig:
    defaults = dict(base_url=_url(server), model_name="stub-model", timeout=5.0)
    defaults.update(overrides)
    return LlmEndpointConfig(**defaults)


class _SleepLog:
    def __init__(self):
        self.delays = []

    def __call__(self, seconds):
        self.delays.append(seconds)


# ---------------------------------------------------------------- transport


def test_chat_complete_success_and_request_shape(stub, monkeypatch):
    monkeypatch.setenv("TREESEEK_LLM_API_KEY", SECRET)
    stub.responses.append((200, _chat_body("hello there")))
    config = _llm_config(stub, temperature=0.3, top_p=0.8)

    reply = chat_complete(config, "sys", "user text")

    assert reply == "hello there"
    assert len(stub.requests) == 1
    request = stub.requests[0]
    assert request["headers"]["Authorization"] == f"Bearer {SECRET}"
    body = json.loads(request["body"])
    assert body["model"] == "stub-model"
    assert body["temperature"] == 0.3
    assert body["top_p"] == 0.8
    assert body["messages"] == [
        {"role": "system", "content": "sys"},
        {"role": "user", "content": "user text"},
    ]


def test_chat_complete_retries_transient_then_succeeds(stub, monkeypatch):
    monkeypatch.setenv("TREESEEK_LLM_API_KEY", SECRET)
    stub.responses.extend(
        [(500, {"error": "boom"}), (503, {"error": "busy"}), (200, _chat_body("ok"))]
    )
    sleeper = _SleepLog()

    reply = chat_complete(_llm_config(stub), "s", "u", sleep=sleeper)

    assert reply == "ok"
    assert len(stub.requests) == 3
    assert sleeper.delays == [0.5, 1.0]


def test_chat_complete_exhausts_retries(stub, monkeypatch):
    monkeypatch.setenv("TREESEEK_LLM_API_KEY", SECRET)
    stub.responses.extend([(500, {"error": "down"})] * 4)
    sleeper = _SleepLog()

    with pytest.raises(BackendUnavailableError) as excinfo:
        chat_complete(_llm_config(stub), "s", "u", sleep=sleeper)

    assert len(stub.requests) == 4  # initial try + 3 retries
    assert sleeper.delays == [0.5, 1.0, 2.0]
    assert "4 attempts" in str(excinfo.value)


def test_client_error_is_config_error_and_never_retried(stub, monkeypatch):
    monkeypatch.setenv("TREESEEK_LLM_API_KEY", SECRET)
    stub.responses.append((401, {"error": f"bad key {SECRET}"}))
    sleeper = _SleepLog()

    with pytest.raises(ConfigurationError) as excinfo:
        chat_complete(_llm_config(stub), "s", "u", sleep=sleeper)

    assert len(stub.requests) == 1
    assert sleeper.delays == []
    message = str(excinfo.value)
    assert "401" in message
    assert SECRET not in message
    assert "***" in message


def test_secret_redacted_from_unavailable_error(stub, monkeypatch):
    monkeypatch.setenv("TREESEEK_LLM_API_KEY", SECRET)
    stub.responses.extend([(500, {"echo": SECRET})] * 4)

    with pytest.raises(BackendUnavailableError) as excinfo:
        chat_complete(_llm_config(stub), "s", "u", sleep=_SleepLog())

    assert SECRET not in str(excinfo.value)


def test_connection_failure_counts_as_transient(monkeypatch):
    monkeypatch.setenv("TREESEEK_LLM_API_KEY", SECRET)
    config = LlmEndpointConfig(
        base_url="http://127.0.0.1:9/v1/chat",
        model_name="stub-model",
        timeout=0.5,
        max_retries=2,
        retry_backoff=(0.1,),
    )
    sleeper = _SleepLog()

    with pytest.raises(BackendUnavailableError):
        chat_complete(config, "s", "u", sleep=sleeper)

    assert sleeper.delays == [0.1, 0.1]


def test_malformed_success_body_raises_unavailable(stub, monkeypatch):
    monkeypatch.setenv("TREESEEK_LLM_API_KEY", SECRET)
    stub.responses.append((200, {"unexpected": "shape"}))

    with pytest.raises(BackendUnavailableError):
        chat_complete(_llm_config(stub), "s", "u", sleep=_SleepLog())


def test_missing_api_key_env_fails_before_any_request(stub, monkeypatch):
    monkeypatch.delenv("TREESEEK_LLM_API_KEY", raising=False)

    with pytest.raises(ConfigurationError) as excinfo:
        RemotePolicyBackend(_llm_config(stub))

    assert "TREESEEK_LLM_API_KEY" in str(excinfo.value)
    assert stub.requests == []


# ------------------------------------------------------------ reply parsing


def test_parse_scores_pick_first_standalone_integer():
    assert parse_structured_reply("Score: 1.", "binary_score") == 1
    assert parse_structured_reply("I rate this 2 out of 2", "tri_score") == 2
    assert parse_structured_reply("-1 overall", "tri_score") == -1
    # digits glued to words are not scores
    assert parse_structured_reply("gpt4 says 0", "binary_score") == 0


def test_parse_score_failure():
    with pytest.raises(ParseFailedError):
        parse_structured_reply("no digits here", "binary_score")


def test_parse_feedback_from_fenced_json():
    raw = 'Reasoning...\n```json\n{"solved_goal_ids": [1, 3], "new_goals": ["check dates"], "terminate": true}\n```'
    fb = parse_structured_reply(raw, "feedback")
    assert fb.solved_goal_ids == {1, 3}
    assert fb.new_goals == ["check dates"]
    assert fb.terminate is True
    assert fb.text == raw


def test_parse_feedback_from_line_patterns():
    raw = "SOLVED: 2, 4\nNEW: verify the treaty year\nDONE"
    fb = parse_structured_reply(raw, "feedback")
    assert fb.solved_goal_ids == {2, 4}
    assert fb.new_goals == ["verify the treaty year"]
    assert fb.terminate is True


def test_parse_feedback_broken_fence_falls_back_to_lines():
    raw = "```json\n{not json}\n```\nSOLVED: 5"
    fb = parse_structured_reply(raw, "feedback")
    assert fb.solved_goal_ids == {5}
    assert fb.terminate is False


def test_parse_feedback_failure():
    with pytest.raises(ParseFailedError):
        parse_structured_reply("nothing structured at all", "feedback")


def test_parse_subquery_list_markers():
    raw = "Here you go:\n- first query\n* second query\n3. third query\nthanks"
    assert parse_structured_reply(raw, "subquery_list") == [
        "first query",
        "second query",
        "third query",
    ]
    with pytest.raises(ParseFailedError):
        parse_structured_reply("no list markers", "subquery_list")


def test_parse_unknown_kind_rejected():
    with pytest.raises(ValueError):
        parse_structured_reply("x", "haiku")


# ----------------------------------------------------------- policy backend


def test_policy_proposals_parsed_and_fail_open(stub, monkeypatch):
    monkeypatch.setenv("TREESEEK_LLM_API_KEY", SECRET)
    backend = RemotePolicyBackend(_llm_config(stub, max_retries=0))
    history = HistoryContext(input_query="q", path_subqueries=("earlier",))

    stub.responses.append((200, _chat_body("- alpha\n- beta")))
    assert backend.propose_subqueries(history, None, None, 3) == ["alpha", "beta"]

    stub.responses.append((200, _chat_body("I cannot help with that.")))
    assert backend.propose_subqueries(history, None, None, 3) == []

    # the rendered prompt carried the history path
    prompt = json.loads(stub.requests[0]["body"])["messages"][1]["content"]
    assert "earlier" in prompt


def test_policy_summarize_honors_chosen_line(stub, monkeypatch):
    monkeypatch.setenv("TREESEEK_LLM_API_KEY", SECRET)
    backend = RemotePolicyBackend(_llm_config(stub, max_retries=0))
    candidates = [
        Document(doc_id="d1", title="One", locator="u1", content="body one"),
        Document(doc_id="d2", title="Two", locator="u2", content="body two"),
    ]

    stub.responses.append((200, _chat_body("CHOSEN: d2\nThe relevant fact.")))
    assert backend.summarize("sq", candidates) == ("d2", "The relevant fact.")

    # no CHOSEN line: first candidate, whole reply as snippet
    stub.responses.append((200, _chat_body("Just some prose.")))
    assert backend.summarize("sq", candidates) == ("d1", "Just some prose.")

    # empty reply: fall back to the chosen document's own content
    stub.responses.append((200, _chat_body("")))
    assert backend.summarize("sq", candidates) == ("d1", "body one")


def test_policy_checklist_and_answer_pass_text_through(stub, monkeypatch):
    monkeypatch.setenv("TREESEEK_LLM_API_KEY", SECRET)
    backend = RemotePolicyBackend(_llm_config(stub, max_retries=0))

    stub.responses.append((200, _chat_body("- goal one\n- goal two")))
    assert backend.generate_checklist("question?") == "- goal one\n- goal two"

    class _Memory:
        def render_context(self):
            return "[k0] fact"

    stub.responses.append((200, _chat_body("The answer.")))
    assert backend.generate_answer("question?", _Memory()) == "The answer."
    prompt = json.loads(stub.requests[-1]["body"])["messages"][1]["content"]
    assert "[k0] fact" in prompt


# ----------------------------------------------------------- reward backend


def test_reward_backend_scores_and_fail_open(stub, monkeypatch):
    monkeypatch.setenv("TREESEEK_LLM_API_KEY", SECRET)
    backend = RemoteRewardBackend(_llm_config(stub, max_retries=0))

    stub.responses.append((200, _chat_body("1")))
    assert backend.exploration_reward("sq", None, None) == 1

    stub.responses.append((200, _chat_body("mumble mumble")))
    assert backend.exploration_reward("sq", None, None) == 0

    stub.responses.append((200, _chat_body("Rating: 2")))
    assert backend.retrieval_reward("sq", "snippet") == 2

    stub.responses.append((200, _chat_body("unsure")))
    assert backend.retrieval_reward("sq", "snippet") == 0


def test_reward_backend_feedback_fail_open_is_empty(stub, monkeypatch):
    monkeypatch.setenv("TREESEEK_LLM_API_KEY", SECRET)
    backend = RemoteRewardBackend(_llm_config(stub, max_retries=0))

    stub.responses.append((200, _chat_body('```json\n{"solved_goal_ids": [1]}\n```')))
    fb = backend.progress_feedback("sq", None, None, None)
    assert fb.solved_goal_ids == {1}
    assert fb.terminate is False

    stub.responses.append((200, _chat_body("free-form rambling")))
    fb = backend.progress_feedback("sq", None, None, None)
    assert fb.solved_goal_ids == set()
    assert fb.new_goals == []
    assert fb.terminate is False
    assert fb.text == "free-form rambling"


# -------------------------------------------------------------- web search


def test_web_search_maps_provider_records(stub, monkeypatch):
    monkeypatch.setenv("TREESEEK_SEARCH_API_KEY", SECRET)
    config = SearchEndpointConfig(
        base_url=_url(stub),
        results_path="web.items",
        title_key="name",
        link_key="url",
        snippet_key="preview",
        content_key="text",
        timeout=5.0,
    )
    stub.responses.append(
        (
            200,
            {
                "web": {
                    "items": [
                        {"name": "A", "url": "https://a.example/x", "text": "full text"},
                        {"name": "B", "url": "https://b.example/y", "preview": "only preview"},
                        {"name": "no link, skipped"},
                        {"name": "C", "url": "https://c.example/z", "text": "beyond top_k"},
                    ]
                }
            },
        )
    )

    docs = web_search(config, "tell me things", 2)

    assert [d.doc_id for d in docs] == ["https://a.example/x", "https://b.example/y"]
    assert docs[0].content == "full text"
    assert docs[1].content == "only preview"  # falls back to the snippet key
    assert docs[0].title == "A"
    assert docs[0].locator == "https://a.example/x"
    request = stub.requests[0]
    assert "q=tell+me+things" in request["path"]
    assert "count=2" in request["path"]
    assert request["headers"]["X-API-Key"] == SECRET


def test_web_search_backend_wraps_endpoint(stub, monkeypatch):
    monkeypatch.setenv("TREESEEK_SEARCH_API_KEY", SECRET)
    backend = WebSearchBackend(SearchEndpointConfig(base_url=_url(stub), timeout=5.0))
    stub.responses.append(
        (200, {"results": [{"title": "T", "link": "https://t.example", "snippet": "s"}]})
    )

    docs = backend.search("anything", 3)

    assert len(docs) == 1
    assert docs[0].doc_id == "https://t.example"
    assert backend.backend_id.startswith("web-search:")


def test_web_search_missing_results_path_yields_empty(stub, monkeypatch):
    monkeypatch.setenv("TREESEEK_SEARCH_API_KEY", SECRET)
    config = SearchEndpointConfig(base_url=_url(stub), timeout=5.0)
    stub.responses.append((200, {"totally": "different"}))

    assert web_search(config, "q", 3) == []
