"""Backend contracts plus the deterministic local/scripted implementations.

Three capability protocols drive every search: a policy backend (text
generation), a reward backend (scoring and progress feedback), and a search
backend (document retrieval).  The scripted implementations replay a fixed
scenario and are the workhorse for tests and offline benchmarks; the live
HTTP implementations are in :mod:`treeseek.remote`.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Protocol, runtime_checkable

from .errors import DatasetError, InvalidArgumentError, NoDocumentsError
from .textutil import normalize_text

if TYPE_CHECKING:  # pragma: no cover
    from .checklist import Checklist
    from .memory import KnowledgeMemory
    from .orchestrator import HistoryContext


@dataclass
class Document:
    doc_id: str
    title: str
    locator: str
    content: str

    def to_dict(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "title": self.title,
            "locator": self.locator,
            "content": self.content,
        }


@dataclass
class ProgressFeedback:
    """One round of reward-model guidance about the global plan."""

    text: str = ""
    solved_goal_ids: set[int] = field(default_factory=set)
    new_goals: list[str] = field(default_factory=list)
    terminate: bool = False


@dataclass
class RewardBundle:
    exploration: int
    retrieval: int
    combined: float
    feedback: ProgressFeedback


@runtime_checkable
class PolicyBackend(Protocol):
    def generate_checklist(self, query: str) -> str: ...

    def propose_subqueries(
        self,
        history: "HistoryContext",
        checklist: "Checklist",
        memory: "KnowledgeMemory",
        m_q: int,
    ) -> list[str]: ...

    def summarize(self, subquery: str, candidates: list[Document]) -> tuple[str, str]: ...

    def generate_answer(self, query: str, memory: "KnowledgeMemory") -> str: ...


@runtime_checkable
class RewardBackend(Protocol):
    def exploration_reward(
        self, subquery: str, checklist: "Checklist", history: "HistoryContext"
    ) -> int: ...

    def retrieval_reward(self, subquery: str, snippet: str) -> int: ...

    def progress_feedback(
        self,
        subquery: str,
        checklist: "Checklist",
        history: "HistoryContext",
        memory: "KnowledgeMemory",
    ) -> ProgressFeedback: ...


@runtime_checkable
class SearchBackend(Protocol):
    def search(self, subquery: str, top_k: int) -> list[Document]: ...


_TOKEN = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.casefold())


def load_corpus_dir(path: str | Path) -> list[Document]:
    """Load a corpus from a directory of one-document JSON files.

    Each ``*.json`` file holds one object with doc_id, title, locator and
    content; files are read in sorted name order so the corpus is stable.
    """
    base = Path(path)
    if not base.is_dir():
        raise DatasetError(f"corpus directory not found: {base}")
    documents = []
    for file in sorted(base.glob("*.json")):
        try:
            raw = json.loads(file.read_text(encoding="utf-8"))
            documents.append(
                Document(
                    doc_id=raw["doc_id"],
                    title=raw["title"],
                    locator=raw["locator"],
                    content=raw["content"],
                )
            )
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise DatasetError(f"bad corpus document {file}: {exc}") from exc
    return documents


class LocalCorpusSearch:
    """Jaccard-overlap retrieval over an in-memory corpus.

    score(q, d) = |tokens(q) ∩ tokens(d)| / |tokens(q) ∪ tokens(d)| over
    casefolded unigrams of the document's title and content.  Results are
    ordered by score descending, then doc_id ascending; zero-overlap
    documents never appear.
    """

    backend_id = "local-corpus"

    def __init__(self, corpus: list[Document]):
        self.corpus = list(corpus)
        self._doc_tokens = {
            d.doc_id: set(tokenize(d.title)) | set(tokenize(d.content)) for d in self.corpus
        }

    @classmethod
    def from_directory(cls, path: str | Path) -> "LocalCorpusSearch":
        return cls(load_corpus_dir(path))

    def search(self, subquery: str, top_k: int) -> list[Document]:
        if top_k < 1:
            raise InvalidArgumentError("top_k must be at least 1")
        query_tokens = set(tokenize(subquery))
        if not query_tokens:
            return []
        scored = []
        for doc in self.corpus:
            doc_tokens = self._doc_tokens[doc.doc_id]
            overlap = len(query_tokens & doc_tokens)
            if overlap == 0:
                continue
            score = overlap / len(query_tokens | doc_tokens)
            scored.append((-score, doc.doc_id, doc))
        scored.sort(key=lambda item: (item[0], item[1]))
        return [doc for _, _, doc in scored[:top_k]]


# Separator used to key subquery_script entries by the root-to-node path.
FINGERPRINT_SEP = " || "


@dataclass
class ScriptedScenario:
    """A fully deterministic search world, loadable from JSON.

    ``subquery_script`` keys, tried in order by the scripted policy:

    * ``goal:{id}`` — proposals for a specific checklist goal; when the
      checklist passed to the policy has goals, the proposals for the first
      unsolved goals (up to m_q entries) are used.
    * the path fingerprint (subqueries root→node joined by ``" || "``, the
      empty string at the root),
    * ``depth:{n}`` for a node whose path holds n subqueries,
    * ``"*"`` as a last resort.

    ``reward_script`` maps normalized subquery → normalized snippet →
    ``{"exploration", "retrieval", "feedback"}``; missing entries score 0.
    Goal ``i`` of the checklist is considered fulfilled once
    ``gold_doc_ids[i-1]`` has an admitted snippet in memory, which is how the
    scripted reward backend derives ``solved_goal_ids`` and ``terminate``.
    """

    query: str
    checklist_text: str
    corpus: list[Document]
    subquery_script: dict[str, list[str]]
    summary_script: dict[str, str]
    reward_script: dict[str, dict[str, dict]]
    answer_script: str
    gold_doc_ids: list[str]

    @classmethod
    def from_dict(cls, data: dict) -> "ScriptedScenario":
        return cls(
            query=data["query"],
            checklist_text=data["checklist_text"],
            corpus=[Document(**d) for d in data["corpus"]],
            subquery_script={k: list(v) for k, v in data["subquery_script"].items()},
            summary_script=dict(data["summary_script"]),
            reward_script={
                sq: {sn: dict(entry) for sn, entry in by_snippet.items()}
                for sq, by_snippet in data["reward_script"].items()
            },
            answer_script=data["answer_script"],
            gold_doc_ids=list(data["gold_doc_ids"]),
        )

    @classmethod
    def load(cls, path: str | Path) -> "ScriptedScenario":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return {
            "query": self.query,
            "checklist_text": self.checklist_text,
            "corpus": [d.to_dict() for d in self.corpus],
            "subquery_script": self.subquery_script,
            "summary_script": self.summary_script,
            "reward_script": self.reward_script,
            "answer_script": self.answer_script,
            "gold_doc_ids": self.gold_doc_ids,
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), ensure_ascii=False, indent=2), encoding="utf-8"
        )

    def gold_locators(self) -> list[str]:
        by_id = {d.doc_id: d.locator for d in self.corpus}
        return [by_id[g] for g in self.gold_doc_ids if g in by_id]

    def validate(self, top_k: int = 3) -> list[str]:
        """Soft consistency check: every scripted subquery whose retrieval
        produces a snippet should have a reward entry.  Returns issue strings
        rather than raising, since missing entries have defined 0 defaults."""
        issues = []
        search = LocalCorpusSearch(self.corpus)
        policy = ScriptedPolicyBackend(self)
        checked: set[str] = set()
        for subqueries in self.subquery_script.values():
            for subquery in subqueries:
                key = normalize_text(subquery)
                if key in checked:
                    continue
                checked.add(key)
                docs = search.search(subquery, top_k)
                if not docs:
                    continue
                _, snippet = policy.summarize(subquery, docs)
                if normalize_text(snippet) not in self.reward_script.get(key, {}):
                    issues.append(f"no reward entry for {subquery!r}")
        return issues


class ScriptedPolicyBackend:
    """Replays scenario text; a pure function of its arguments throughout."""

    def __init__(self, scenario: ScriptedScenario):
        self.scenario = scenario
        self.backend_id = "scripted-policy"

    def generate_checklist(self, query: str) -> str:
        return self.scenario.checklist_text

    def propose_subqueries(self, history, checklist, memory, m_q: int) -> list[str]:
        script = self.scenario.subquery_script
        if checklist is not None and checklist.goals:
            proposals: list[str] = []
            for goal in checklist.goals:
                if goal.status == "solved":
                    continue
                proposals.extend(script.get(f"goal:{goal.id}", []))
                if len(proposals) >= m_q:
                    break
            if proposals:
                return proposals[:m_q]
        path = list(history.path_subqueries) if history is not None else []
        for key in (FINGERPRINT_SEP.join(path), f"depth:{len(path)}", "*"):
            if key in script:
                return list(script[key])
        return []

    def summarize(self, subquery: str, candidates: list[Document]) -> tuple[str, str]:
        if not candidates:
            raise NoDocumentsError("no candidate documents to summarize")
        for doc in candidates:
            if doc.doc_id in self.scenario.summary_script:
                return doc.doc_id, self.scenario.summary_script[doc.doc_id]
        return candidates[0].doc_id, candidates[0].content

    def generate_answer(self, query: str, memory) -> str:
        return self.scenario.answer_script


class ScriptedRewardBackend:
    """Scores from the reward script; progress derives from memory state."""

    def __init__(self, scenario: ScriptedScenario):
        self.scenario = scenario
        self.backend_id = "scripted-reward"

    def _entries(self, subquery: str) -> dict[str, dict]:
        return self.scenario.reward_script.get(normalize_text(subquery), {})

    def exploration_reward(self, subquery, checklist, history) -> int:
        for entry in self._entries(subquery).values():
            return int(entry.get("exploration", 0))
        return 0

    def retrieval_reward(self, subquery, snippet) -> int:
        entry = self._entries(subquery).get(normalize_text(snippet))
        return int(entry.get("retrieval", 0)) if entry else 0

    def progress_feedback(self, subquery, checklist, history, memory) -> ProgressFeedback:
        gold = self.scenario.gold_doc_ids
        in_memory = {s.source_doc_id for s in memory.snippets}
        goals = checklist.goals if checklist is not None else []
        solved = {
            g.id for g in goals if 1 <= g.id <= len(gold) and gold[g.id - 1] in in_memory
        }
        static: dict = {}
        for entry in self._entries(subquery).values():
            static = entry.get("feedback") or {}
            break
        solved |= {int(i) for i in static.get("solved_goal_ids", [])}
        new_goals = [g for g in static.get("new_goals", []) if g and g.strip()]
        already = {g.id for g in goals if g.status == "solved"}
        covering = bool(goals) and {g.id for g in goals} <= (solved | already) and not new_goals
        return ProgressFeedback(
            text=static.get("text", ""),
            solved_goal_ids=solved,
            new_goals=new_goals,
            terminate=covering or bool(static.get("terminate", False)),
        )


def scenario_backends(
    scenario: ScriptedScenario,
) -> tuple[ScriptedPolicyBackend, ScriptedRewardBackend, LocalCorpusSearch]:
    """The standard backend triple for running a scripted scenario."""
    return (
        ScriptedPolicyBackend(scenario),
        ScriptedRewardBackend(scenario),
        LocalCorpusSearch(scenario.corpus),
    )
