"""Append-only knowledge memory shared by every node of one search."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import InvalidArgumentError
from .textutil import normalize_text


@dataclass
class KnowledgeSnippet:
    id: int
    text: str
    source_doc_id: str
    source_locator: str
    subquery: str
    node_id: int
    retrieval_reward: int
    step: int

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "text": self.text,
            "source_doc_id": self.source_doc_id,
            "source_locator": self.source_locator,
            "subquery": self.subquery,
            "node_id": self.node_id,
            "retrieval_reward": self.retrieval_reward,
            "step": self.step,
        }


class KnowledgeMemory:
    """Admitted snippets plus the set of every document id ever retrieved.

    Admission requires a useful retrieval score (>= 1) and a fresh
    (document, normalized subquery) pair; everything else is recorded only in
    ``seen_doc_ids``.  Snippets are never removed or edited.
    """

    def __init__(self, budget_chars: int = 24000):
        if budget_chars < 0:
            raise InvalidArgumentError("budget_chars must be non-negative")
        self.budget_chars = budget_chars
        self.snippets: list[KnowledgeSnippet] = []
        self.seen_doc_ids: set[str] = set()
        self._admitted_pairs: set[tuple[str, str]] = set()

    @property
    def next_id(self) -> int:
        return len(self.snippets)

    def admit(self, candidate: KnowledgeSnippet) -> bool:
        """Record the retrieval and append the snippet if it qualifies.

        On admission the candidate receives the next dense id.  Returns
        whether the snippet was admitted.
        """
        if not candidate.text or not candidate.text.strip():
            raise InvalidArgumentError("snippet text must be non-empty")
        if self.snippets and candidate.step < self.snippets[-1].step:
            raise InvalidArgumentError("snippet steps must be non-decreasing")
        self.seen_doc_ids.add(candidate.source_doc_id)
        if candidate.retrieval_reward < 1:
            return False
        pair = (candidate.source_doc_id, normalize_text(candidate.subquery))
        if pair in self._admitted_pairs:
            return False
        candidate.id = len(self.snippets)
        self._admitted_pairs.add(pair)
        self.snippets.append(candidate)
        return True

    def render_context(self, budget_chars: int | None = None) -> str:
        """One line per snippet, oldest first, trimmed to the budget.

        When the full rendering exceeds the budget the oldest snippets are
        elided and a marker line records how many were dropped; the newest
        snippets always survive.
        """
        budget = self.budget_chars if budget_chars is None else budget_chars
        lines = [f"[k{s.id}] (via: {s.subquery}) {s.text}" for s in self.snippets]
        dropped = 0
        body = "\n".join(lines)
        while dropped < len(lines) and len(body) > budget:
            dropped += 1
            body = "\n".join(lines[dropped:])
        if dropped == 0:
            return body
        marker = f"…{dropped} earlier snippets elided"
        return marker + ("\n" + body if body else "")

    def to_list(self) -> list[dict]:
        return [s.to_dict() for s in self.snippets]
