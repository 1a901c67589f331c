"""Live backends speaking chat-completion and web-search HTTP APIs.

Secrets come from environment variables named in the config and never leak
into traces or error text.  Transient failures (5xx, network errors) are
retried per the configured backoff schedule; 4xx responses are configuration
errors and never retried; a 2xx body without the expected structure is an
availability error.  Reply parsing fails open: a reward that cannot be
parsed scores 0, unparseable feedback is empty feedback.
"""

from __future__ import annotations

import json
import os
import re
import string
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

import requests

from .backends import Document, ProgressFeedback
from .checklist import render as render_checklist
from .errors import BackendUnavailableError, ConfigurationError, ParseFailedError

_PROMPT_DIR = Path(__file__).parent / "prompts"


@dataclass
class LlmEndpointConfig:
    base_url: str
    model_name: str
    api_key_env: str = "TREESEEK_LLM_API_KEY"
    temperature: float = 0.9
    top_p: float = 1.0
    timeout: float = 30.0
    max_retries: int = 3
    retry_backoff: tuple[float, ...] = (0.5, 1.0, 2.0)
    max_concurrency: int = 4


@dataclass
class SearchEndpointConfig:
    base_url: str
    api_key_env: str = "TREESEEK_SEARCH_API_KEY"
    timeout: float = 30.0
    max_retries: int = 3
    retry_backoff: tuple[float, ...] = (0.5, 1.0, 2.0)
    # where to find result records in the provider's JSON, and which keys
    # inside each record map onto Document fields
    results_path: str = "results"
    title_key: str = "title"
    link_key: str = "link"
    snippet_key: str = "snippet"
    content_key: str = "content"


def resolve_api_key(env_name: str) -> str:
    value = os.environ.get(env_name, "")
    if not value:
        raise ConfigurationError(
            f"API key environment variable {env_name} is not set"
        )
    return value


def _redact(text: str, secret: str) -> str:
    return text.replace(secret, "***") if secret else text


def _backoff_delay(schedule: tuple[float, ...], attempt: int) -> float:
    if not schedule:
        return 0.0
    return schedule[min(attempt, len(schedule) - 1)]


def _request_with_retries(
    method: str,
    url: str,
    *,
    secret: str,
    timeout: float,
    max_retries: int,
    retry_backoff: tuple[float, ...],
    sleep=time.sleep,
    **kwargs,
):
    """Shared transport: returns a 2xx response, raises otherwise."""
    last_failure = "no attempt made"
    for attempt in range(max_retries + 1):
        try:
            response = requests.request(method, url, timeout=timeout, **kwargs)
        except requests.RequestException as exc:
            last_failure = f"network error: {exc}"
        else:
            if response.status_code < 300:
                return response
            body = response.text[:200]
            if response.status_code < 500:
                raise ConfigurationError(
                    _redact(
                        f"endpoint {url} answered {response.status_code}: {body}", secret
                    )
                )
            last_failure = f"status {response.status_code}: {body}"
        if attempt < max_retries:
            sleep(_backoff_delay(retry_backoff, attempt))
    raise BackendUnavailableError(
        _redact(f"endpoint {url} unavailable after {max_retries + 1} attempts ({last_failure})", secret)
    )


def chat_complete(
    config: LlmEndpointConfig,
    system_prompt: str,
    user_prompt: str,
    *,
    api_key: str | None = None,
    sleep=time.sleep,
) -> str:
    """One chat-completion round trip; returns the assistant message text."""
    secret = api_key if api_key is not None else resolve_api_key(config.api_key_env)
    payload = {
        "model": config.model_name,
        "messages": [
            {"role": "system", "content": system_prompt},
            {"role": "user", "content": user_prompt},
        ],
        "temperature": config.temperature,
        "top_p": config.top_p,
    }
    response = _request_with_retries(
        "POST",
        config.base_url,
        secret=secret,
        timeout=config.timeout,
        max_retries=config.max_retries,
        retry_backoff=config.retry_backoff,
        sleep=sleep,
        json=payload,
        headers={"Authorization": f"Bearer {secret}"},
    )
    try:
        return response.json()["choices"][0]["message"]["content"]
    except (ValueError, KeyError, IndexError, TypeError) as exc:
        raise BackendUnavailableError(
            _redact(f"malformed completion body from {config.base_url}: {exc}", secret)
        ) from exc


def web_search(
    config: SearchEndpointConfig,
    subquery: str,
    top_k: int,
    *,
    api_key: str | None = None,
    sleep=time.sleep,
) -> list[Document]:
    """Query a JSON web-search endpoint and map results onto Documents."""
    secret = api_key if api_key is not None else resolve_api_key(config.api_key_env)
    response = _request_with_retries(
        "GET",
        config.base_url,
        secret=secret,
        timeout=config.timeout,
        max_retries=config.max_retries,
        retry_backoff=config.retry_backoff,
        sleep=sleep,
        params={"q": subquery, "count": top_k},
        headers={"X-API-Key": secret},
    )
    try:
        data = response.json()
    except ValueError as exc:
        raise BackendUnavailableError(
            _redact(f"malformed search body from {config.base_url}: {exc}", secret)
        ) from exc
    records = data
    for part in config.results_path.split("."):
        if not isinstance(records, dict) or part not in records:
            records = []
            break
        records = records[part]
    documents = []
    for record in records if isinstance(records, list) else []:
        if not isinstance(record, dict):
            continue
        link = record.get(config.link_key)
        if not link:
            continue
        content = record.get(config.content_key) or record.get(config.snippet_key) or ""
        documents.append(
            Document(
                doc_id=str(link),
                title=str(record.get(config.title_key, "")),
                locator=str(link),
                content=str(content),
            )
        )
        if len(documents) >= top_k:
            break
    return documents


_INTEGER = re.compile(r"(?<![A-Za-z0-9_])(-?\d+)(?![A-Za-z0-9_])")
_FENCE = re.compile(r"```(?:json)?\s*(\{.*?\})\s*```", re.DOTALL | re.IGNORECASE)
_SOLVED_LINE = re.compile(r"^\s*SOLVED\s*:\s*(.*)$", re.IGNORECASE)
_NEW_LINE = re.compile(r"^\s*NEW\s*:\s*(.+?)\s*$", re.IGNORECASE)
_DONE_LINE = re.compile(r"^\s*DONE\s*\.?\s*$", re.IGNORECASE)
_LIST_ITEM = re.compile(r"^\s*(?:-|\*|\d+\.)\s*(.+?)\s*$")


def _feedback_from_mapping(raw: str, data: dict) -> ProgressFeedback:
    solved = set()
    for item in data.get("solved_goal_ids", []) or []:
        try:
            solved.add(int(item))
        except (TypeError, ValueError):
            continue
    new_goals = [str(g) for g in data.get("new_goals", []) or [] if str(g).strip()]
    return ProgressFeedback(
        text=raw,
        solved_goal_ids=solved,
        new_goals=new_goals,
        terminate=bool(data.get("terminate", False)),
    )


def _feedback_from_lines(raw: str) -> ProgressFeedback | None:
    solved: set[int] = set()
    new_goals: list[str] = []
    terminate = False
    matched = False
    for line in raw.splitlines():
        m = _SOLVED_LINE.match(line)
        if m:
            matched = True
            solved.update(int(n) for n in re.findall(r"-?\d+", m.group(1)))
            continue
        m = _NEW_LINE.match(line)
        if m:
            matched = True
            new_goals.append(m.group(1))
            continue
        if _DONE_LINE.match(line):
            matched = True
            terminate = True
    if not matched:
        return None
    return ProgressFeedback(text=raw, solved_goal_ids=solved, new_goals=new_goals, terminate=terminate)


def parse_structured_reply(raw: str, expected: str):
    """Coerce free-form model text into the structure the engine needs.

    ``expected`` is one of ``binary_score``, ``tri_score``, ``feedback`` or
    ``subquery_list``.  Raises :class:`ParseFailedError` when nothing usable
    can be extracted; range clamping is the caller's business.
    """
    if expected in ("binary_score", "tri_score"):
        m = _INTEGER.search(raw)
        if not m:
            raise ParseFailedError(f"no integer score in reply: {raw[:80]!r}")
        return int(m.group(1))
    if expected == "feedback":
        fence = _FENCE.search(raw)
        if fence:
            try:
                return _feedback_from_mapping(raw, json.loads(fence.group(1)))
            except ValueError:
                pass
        feedback = _feedback_from_lines(raw)
        if feedback is None:
            raise ParseFailedError(f"no feedback structure in reply: {raw[:80]!r}")
        return feedback
    if expected == "subquery_list":
        items = [m.group(1) for m in map(_LIST_ITEM.match, raw.splitlines()) if m]
        if not items:
            raise ParseFailedError(f"no list items in reply: {raw[:80]!r}")
        return items
    raise ValueError(f"unknown expected kind {expected!r}")


def _load_prompt(name: str, prompt_dir: Path | None) -> string.Template:
    base = prompt_dir if prompt_dir is not None else _PROMPT_DIR
    return string.Template((base / f"{name}.txt").read_text(encoding="utf-8"))


def render_history(history) -> str:
    if history is None:
        return "(none)"
    lines = [f"Input question: {history.input_query}"]
    for i, subquery in enumerate(history.path_subqueries, start=1):
        lines.append(f"{i}. {subquery}")
    if history.last_feedback is not None and history.last_feedback.text:
        lines.append(f"Latest feedback: {history.last_feedback.text}")
    return "\n".join(lines)


def _render_documents(candidates: list[Document]) -> str:
    blocks = []
    for doc in candidates:
        blocks.append(f"[{doc.doc_id}] {doc.title}\n{doc.content}")
    return "\n\n".join(blocks)


_CHOSEN_LINE = re.compile(r"^\s*CHOSEN\s*:\s*(.+?)\s*$", re.IGNORECASE | re.MULTILINE)


class RemotePolicyBackend:
    """Checklist/subquery/summary/answer generation over a chat endpoint."""

    def __init__(self, config: LlmEndpointConfig, prompt_dir: str | Path | None = None):
        self.config = config
        self.backend_id = f"remote-llm:{config.model_name}"
        self._api_key = resolve_api_key(config.api_key_env)
        self._limit = threading.Semaphore(config.max_concurrency)
        pdir = Path(prompt_dir) if prompt_dir is not None else None
        self._prompts = {
            name: _load_prompt(name, pdir)
            for name in ("checklist", "subqueries", "summarize", "answer")
        }

    def _chat(self, prompt_name: str, **fields) -> str:
        template = self._prompts[prompt_name]
        with self._limit:
            return chat_complete(
                self.config,
                "You are a careful research planner.",
                template.safe_substitute(**fields),
                api_key=self._api_key,
            )

    def generate_checklist(self, query: str) -> str:
        return self._chat("checklist", query=query)

    def propose_subqueries(self, history, checklist, memory, m_q: int) -> list[str]:
        reply = self._chat(
            "subqueries",
            query=history.input_query if history else "",
            checklist=render_checklist(checklist) if checklist is not None else "",
            memory=memory.render_context() if memory is not None else "",
            history=render_history(history),
            m_q=m_q,
        )
        try:
            return parse_structured_reply(reply, "subquery_list")
        except ParseFailedError:
            return []

    def summarize(self, subquery: str, candidates: list[Document]) -> tuple[str, str]:
        reply = self._chat(
            "summarize", subquery=subquery, documents=_render_documents(candidates)
        )
        chosen = candidates[0]
        body = reply
        m = _CHOSEN_LINE.search(reply)
        if m:
            wanted = m.group(1).strip()
            for doc in candidates:
                if doc.doc_id.casefold() == wanted.casefold():
                    chosen = doc
                    break
            body = reply[: m.start()] + reply[m.end() :]
        snippet = body.strip() or chosen.content
        return chosen.doc_id, snippet

    def generate_answer(self, query: str, memory) -> str:
        return self._chat("answer", query=query, memory=memory.render_context())


class RemoteRewardBackend:
    """Reward scoring and progress feedback over a chat endpoint."""

    def __init__(self, config: LlmEndpointConfig, prompt_dir: str | Path | None = None):
        self.config = config
        self.backend_id = f"remote-reward:{config.model_name}"
        self._api_key = resolve_api_key(config.api_key_env)
        self._limit = threading.Semaphore(config.max_concurrency)
        pdir = Path(prompt_dir) if prompt_dir is not None else None
        self._prompts = {
            name: _load_prompt(name, pdir)
            for name in ("exploration", "retrieval", "feedback")
        }

    def _chat(self, prompt_name: str, **fields) -> str:
        template = self._prompts[prompt_name]
        with self._limit:
            return chat_complete(
                self.config,
                "You are a strict research grader.",
                template.safe_substitute(**fields),
                api_key=self._api_key,
            )

    def exploration_reward(self, subquery, checklist, history) -> int:
        reply = self._chat(
            "exploration",
            subquery=subquery,
            checklist=render_checklist(checklist) if checklist is not None else "",
            history=render_history(history),
        )
        try:
            return parse_structured_reply(reply, "binary_score")
        except ParseFailedError:
            return 0

    def retrieval_reward(self, subquery, snippet) -> int:
        reply = self._chat("retrieval", subquery=subquery, snippet=snippet)
        try:
            return parse_structured_reply(reply, "tri_score")
        except ParseFailedError:
            return 0

    def progress_feedback(self, subquery, checklist, history, memory) -> ProgressFeedback:
        reply = self._chat(
            "feedback",
            subquery=subquery,
            checklist=render_checklist(checklist) if checklist is not None else "",
            memory=memory.render_context() if memory is not None else "",
            history=render_history(history),
        )
        try:
            return parse_structured_reply(reply, "feedback")
        except ParseFailedError:
            return ProgressFeedback(text=reply)


class WebSearchBackend:
    """SearchBackend over a JSON web-search endpoint."""

    def __init__(self, config: SearchEndpointConfig):
        self.config = config
        self.backend_id = f"web-search:{config.base_url}"
        self._api_key = resolve_api_key(config.api_key_env)

    def search(self, subquery: str, top_k: int) -> list[Document]:
        return web_search(self.config, subquery, top_k, api_key=self._api_key)
