"""The search loop: selection, expansion, reward, feedback, backpropagation.

``run_search`` wires one tree, one checklist, and one knowledge memory to a
backend triple and drives simulations until the checklist is complete, the
simulation budget runs out, or no expandable node remains.  Every observable
step is emitted to a trace sink, and with deterministic backends two runs
produce identical traces (modulo timing).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from numbers import Real

from .backends import PolicyBackend, ProgressFeedback, RewardBackend, RewardBundle, SearchBackend
from .checklist import Checklist, SubGoal, apply_feedback, is_complete, parse_checklist
from .errors import (
    BackendUnavailableError,
    EmptyChecklistError,
    InvalidArgumentError,
    SearchAbortedError,
    SearchExhaustedError,
)
from .memory import KnowledgeMemory, KnowledgeSnippet
from .textutil import normalize_text
from .trace import MemoryTraceSink, TraceSink
from .tree import EvaluationRecord, SearchTree, backpropagate, select

ENGINE_VERSION = "0.1.0"

ALL_GOALS_SOLVED = "all_goals_solved"
BUDGET_EXHAUSTED = "budget_exhausted"
SEARCH_EXHAUSTED = "search_exhausted"


@dataclass
class SearchConfig:
    max_simulations: int = 40
    max_depth: int = 6
    uct_weight: float = 0.2
    m_q: int = 3
    top_k: int = 3
    memory_budget_chars: int = 24000
    checklist_enabled: bool = True
    additive_rewards: bool = False
    seed: int = 0

    def validate(self) -> None:
        if self.max_simulations < 1:
            raise InvalidArgumentError("max_simulations must be positive")
        if self.max_depth < 1:
            raise InvalidArgumentError("max_depth must be positive")
        if self.uct_weight < 0:
            raise InvalidArgumentError("uct_weight must be non-negative")
        if self.m_q < 1:
            raise InvalidArgumentError("m_q must be positive")
        if self.top_k < 1:
            raise InvalidArgumentError("top_k must be positive")
        if self.memory_budget_chars < 0:
            raise InvalidArgumentError("memory_budget_chars must be non-negative")

    def to_dict(self) -> dict:
        return {
            "max_simulations": self.max_simulations,
            "max_depth": self.max_depth,
            "uct_weight": self.uct_weight,
            "m_q": self.m_q,
            "top_k": self.top_k,
            "memory_budget_chars": self.memory_budget_chars,
            "checklist_enabled": self.checklist_enabled,
            "additive_rewards": self.additive_rewards,
            "seed": self.seed,
        }


@dataclass
class HistoryContext:
    """What a backend may see of the search so far: the input query, the
    subqueries along the path to the node being expanded, and the most
    recently applied progress feedback."""

    input_query: str
    path_subqueries: list[str]
    last_feedback: ProgressFeedback | None = None


@dataclass
class SearchOutcome:
    query: str
    answer: str
    termination_reason: str
    simulations_used: int
    checklist: Checklist
    memory: KnowledgeMemory
    tree: SearchTree
    retrieved_locators: list[str]
    trace_path: str | None = None

    def to_report_dict(self, trace_locator: str | None = None) -> dict:
        return {
            "query": self.query,
            "answer": self.answer,
            "termination_reason": self.termination_reason,
            "simulations_used": self.simulations_used,
            "checklist": self.checklist.to_dict(),
            "memory": self.memory.to_list(),
            "tree": self.tree.to_dict(),
            "retrieved_locators": list(self.retrieved_locators),
            "trace_path": self.trace_path if trace_locator is None else trace_locator,
        }

    def to_report_json(self, trace_locator: str | None = None) -> str:
        return (
            json.dumps(
                self.to_report_dict(trace_locator),
                ensure_ascii=False,
                sort_keys=True,
                indent=2,
            )
            + "\n"
        )


def combine_reward(exploration: int, retrieval: int, additive: bool = False) -> float:
    """Fuse the two reward heads; the default is their product."""
    if exploration not in (0, 1):
        raise InvalidArgumentError(f"exploration reward must be 0 or 1, got {exploration!r}")
    if retrieval not in (0, 1, 2):
        raise InvalidArgumentError(f"retrieval reward must be 0, 1 or 2, got {retrieval!r}")
    if additive:
        return float(exploration + retrieval)
    return float(exploration * retrieval)


def clamp_exploration(value, warn) -> int:
    """Anything but a clean 0/1 falls back to 0 (the backend is untrusted)."""
    if isinstance(value, bool):
        return int(value)
    if isinstance(value, Real) and not isinstance(value, bool) and float(value) in (0.0, 1.0):
        return int(value)
    warn(f"exploration reward {value!r} outside {{0,1}}; clamped to 0")
    return 0


def clamp_retrieval(value, warn) -> int:
    """Numeric scores snap to the nearest of 0..2; junk falls back to 0."""
    if isinstance(value, Real) and not isinstance(value, bool):
        v = float(value)
        if v in (0.0, 1.0, 2.0):
            return int(v)
        if math.isfinite(v):
            clamped = min(2, max(0, int(round(v))))
            warn(f"retrieval reward {value!r} outside {{0,1,2}}; clamped to {clamped}")
            return clamped
    warn(f"retrieval reward {value!r} is not numeric; clamped to 0")
    return 0


@dataclass
class _RunState:
    simulations_used: int = 0
    last_feedback: ProgressFeedback | None = None
    retrieved_locators: list[str] = field(default_factory=list)
    _retrieved_seen: set[str] = field(default_factory=set)

    def record_retrieved(self, locator: str) -> None:
        if locator not in self._retrieved_seen:
            self._retrieved_seen.add(locator)
            self.retrieved_locators.append(locator)


def _backend_id(backend) -> str:
    return getattr(backend, "backend_id", type(backend).__name__)


def run_search(
    query: str,
    config: SearchConfig,
    policy: PolicyBackend,
    reward: RewardBackend,
    search: SearchBackend,
    trace_sink: TraceSink | None = None,
) -> SearchOutcome:
    """Run one full guided search and return its outcome.

    A backend that stays unavailable aborts the search with
    :class:`SearchAbortedError`; whatever trace was written up to that point
    is preserved.
    """
    if not query or not query.strip():
        raise InvalidArgumentError("query must be non-empty")
    config.validate()
    sink = trace_sink if trace_sink is not None else MemoryTraceSink()
    sink.emit(
        "header",
        {
            "version": ENGINE_VERSION,
            "config": config.to_dict(),
            "backends": {
                "policy": _backend_id(policy),
                "reward": _backend_id(reward),
                "search": _backend_id(search),
            },
        },
    )
    try:
        return _run(query, config, policy, reward, search, sink)
    except BackendUnavailableError as exc:
        sink.emit("warning", {"message": f"search aborted: {exc}"})
        raise SearchAbortedError(f"search aborted: {exc}", trace_path=sink.path) from exc


def _init_checklist(query: str, config: SearchConfig, policy, sink) -> Checklist:
    if not config.checklist_enabled:
        checklist = Checklist()
        sink.emit("checklist_init", {"disabled": True, "checklist": checklist.to_dict()})
        return checklist
    raw = policy.generate_checklist(query)
    fallback = False
    try:
        checklist = parse_checklist(raw)
    except EmptyChecklistError:
        # degenerate plan: treat the whole question as the single goal
        checklist = Checklist(goals=[SubGoal(id=1, description=query.strip())])
        fallback = True
        sink.emit("warning", {"message": "checklist text had no items; fell back to single goal"})
    sink.emit(
        "checklist_init",
        {"raw_chars": len(raw), "fallback": fallback, "checklist": checklist.to_dict()},
    )
    return checklist


def _run(query, config, policy, reward, search, sink) -> SearchOutcome:
    checklist = _init_checklist(query, config, policy, sink)
    tree = SearchTree(query, config.max_depth)
    memory = KnowledgeMemory(config.memory_budget_chars)
    state = _RunState()

    while True:
        if config.checklist_enabled and is_complete(checklist):
            reason = ALL_GOALS_SOLVED
            break
        if state.simulations_used >= config.max_simulations:
            reason = BUDGET_EXHAUSTED
            break
        try:
            node_id = select(tree, config.uct_weight)
        except SearchExhaustedError:
            reason = SEARCH_EXHAUSTED
            break
        sink.emit(
            "selection",
            {"node_id": node_id, "path": list(reversed(tree.path_to_root(node_id)))},
        )
        expand_and_evaluate(
            tree, node_id, checklist, memory, config, policy, reward, search, sink, state
        )

    sink.emit("terminate", {"reason": reason, "simulations_used": state.simulations_used})
    if not memory.snippets:
        sink.emit("warning", {"message": "memory is empty at answer time"})
    answer = policy.generate_answer(query, memory)
    sink.emit("answer", {"answer": answer})
    return SearchOutcome(
        query=query,
        answer=answer,
        termination_reason=reason,
        simulations_used=state.simulations_used,
        checklist=checklist,
        memory=memory,
        tree=tree,
        retrieved_locators=state.retrieved_locators,
        trace_path=sink.path,
    )


def _clean_proposals(raw, m_q: int, warn) -> list[str]:
    cleaned: list[str] = []
    seen: set[str] = set()
    for proposal in raw or []:
        if not isinstance(proposal, str) or not proposal.strip():
            continue
        key = normalize_text(proposal)
        if key in seen:
            continue
        seen.add(key)
        cleaned.append(proposal.strip())
    if len(cleaned) > m_q:
        warn(f"backend proposed {len(cleaned)} subqueries; truncated to {m_q}")
        cleaned = cleaned[:m_q]
    return cleaned


def expand_and_evaluate(
    tree: SearchTree,
    node_id: int,
    checklist: Checklist,
    memory: KnowledgeMemory,
    config: SearchConfig,
    policy: PolicyBackend,
    reward: RewardBackend,
    search: SearchBackend,
    sink: TraceSink,
    state: _RunState,
) -> list[tuple[int, RewardBundle]]:
    """Materialize children of ``node_id``; each evaluated child is one
    simulation.  A node is only ever expanded once; a fruitless expansion
    marks it unexpandable without consuming budget."""

    def warn(message: str, **context) -> None:
        sink.emit("warning", {"message": message, **context})

    history = HistoryContext(
        input_query=tree.root.subquery,
        path_subqueries=tree.path_subqueries(node_id),
        last_feedback=state.last_feedback,
    )
    proposals = _clean_proposals(
        policy.propose_subqueries(history, checklist, memory, config.m_q), config.m_q, warn
    )
    if not proposals:
        tree.mark_unexpandable(node_id)
        warn("expansion produced no usable subqueries", node_id=node_id)
        return []

    results: list[tuple[int, RewardBundle]] = []
    for subquery in proposals:
        if state.simulations_used >= config.max_simulations:
            break
        child_id = tree.add_child(node_id, subquery)
        sink.emit(
            "subquery_proposed",
            {"node_id": child_id, "parent_id": node_id, "subquery": subquery},
        )
        docs = search.search(subquery, config.top_k)
        sink.emit(
            "retrieval",
            {
                "node_id": child_id,
                "subquery": subquery,
                "doc_ids": [d.doc_id for d in docs],
                "locators": [d.locator for d in docs],
            },
        )
        for doc in docs:
            state.record_retrieved(doc.locator)

        chosen_doc = None
        snippet = None
        if docs:
            chosen_id, snippet = policy.summarize(subquery, docs)
            chosen_doc = next((d for d in docs if d.doc_id == chosen_id), None)
            if chosen_doc is None:
                warn(f"summarizer chose unknown doc {chosen_id!r}; using top result")
                chosen_doc = docs[0]
            if not snippet or not snippet.strip():
                warn("summarizer returned an empty snippet; treating as no retrieval")
                snippet = None
            else:
                sink.emit(
                    "summarization",
                    {"node_id": child_id, "doc_id": chosen_doc.doc_id, "snippet": snippet},
                )

        r_q = clamp_exploration(
            reward.exploration_reward(subquery, checklist, history), warn
        )
        r_k = 0
        if snippet is not None:
            r_k = clamp_retrieval(reward.retrieval_reward(subquery, snippet), warn)
        combined = combine_reward(r_q, r_k, additive=config.additive_rewards)
        sink.emit(
            "reward",
            {"node_id": child_id, "exploration": r_q, "retrieval": r_k, "combined": combined},
        )

        snippet_id = None
        if snippet is not None:
            candidate = KnowledgeSnippet(
                id=memory.next_id,
                text=snippet,
                source_doc_id=chosen_doc.doc_id,
                source_locator=chosen_doc.locator,
                subquery=subquery,
                node_id=child_id,
                retrieval_reward=r_k,
                step=state.simulations_used,
            )
            if memory.admit(candidate):
                snippet_id = candidate.id
                sink.emit(
                    "memory_admit",
                    {"snippet_id": candidate.id, "doc_id": chosen_doc.doc_id, "node_id": child_id},
                )
            else:
                sink.emit(
                    "memory_reject",
                    {
                        "doc_id": chosen_doc.doc_id,
                        "node_id": child_id,
                        "reason": "low_reward" if r_k < 1 else "duplicate_pair",
                    },
                )

        feedback = ProgressFeedback()
        if config.checklist_enabled:
            feedback = reward.progress_feedback(subquery, checklist, history, memory)
            apply_feedback(checklist, feedback, on_warning=lambda m: warn(m, node_id=child_id))
            sink.emit(
                "feedback_applied",
                {
                    "node_id": child_id,
                    "solved_goal_ids": sorted(feedback.solved_goal_ids),
                    "new_goals": list(feedback.new_goals),
                    "terminate": feedback.terminate,
                    "revision": checklist.revision,
                },
            )
            state.last_feedback = feedback

        tree.node(child_id).evaluation = EvaluationRecord(snippet_id, r_q, r_k, combined)
        backpropagate(tree, child_id, combined)
        sink.emit(
            "backprop",
            {"node_id": child_id, "reward": combined, "path": tree.path_to_root(child_id)},
        )
        state.simulations_used += 1
        results.append((child_id, RewardBundle(r_q, r_k, combined, feedback)))

        if config.checklist_enabled:
            if is_complete(checklist):
                break
            if feedback.terminate:
                # contract violation: terminate asserted while goals remain
                warn("feedback requested termination with unsolved goals; ignored")
    tree.mark_expanded(node_id)
    return results
