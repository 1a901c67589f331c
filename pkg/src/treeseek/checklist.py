"""Global sub-goal checklist: parsing, feedback application, rendering.

The checklist is the shared plan a search keeps refining: goals get marked
solved (never reopened) and new goals discovered mid-search are appended.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable

from .errors import EmptyChecklistError
from .textutil import normalize_text

if TYPE_CHECKING:  # pragma: no cover
    from .backends import ProgressFeedback

_ITEM = re.compile(r"^\s*(?:-|\*|\d+\.)\s*(.+?)\s*$")

UNSOLVED = "unsolved"
SOLVED = "solved"


@dataclass
class SubGoal:
    id: int
    description: str
    status: str = UNSOLVED
    origin: str = "initial"


@dataclass
class Checklist:
    goals: list[SubGoal] = field(default_factory=list)
    revision: int = 0

    def goal(self, goal_id: int) -> SubGoal | None:
        for g in self.goals:
            if g.id == goal_id:
                return g
        return None

    def solved_ids(self) -> set[int]:
        return {g.id for g in self.goals if g.status == SOLVED}

    def unsolved(self) -> list[SubGoal]:
        return [g for g in self.goals if g.status != SOLVED]

    def to_dict(self) -> dict:
        return {
            "revision": self.revision,
            "goals": [
                {"id": g.id, "description": g.description, "status": g.status, "origin": g.origin}
                for g in self.goals
            ],
        }


def parse_checklist(raw: str) -> Checklist:
    """Extract goals from list-marker lines (``-``, ``*``, or ``N.``).

    Non-matching lines (prose, blanks) are ignored.  Zero extracted goals is
    an error so callers can fall back explicitly.
    """
    goals = []
    for line in raw.splitlines():
        m = _ITEM.match(line)
        if m:
            goals.append(SubGoal(id=len(goals) + 1, description=m.group(1)))
    if not goals:
        raise EmptyChecklistError("checklist text contains no list items")
    return Checklist(goals=goals)


def apply_feedback(
    checklist: Checklist,
    feedback: "ProgressFeedback",
    on_warning: Callable[[str], None] | None = None,
) -> Checklist:
    """Fold one round of progress feedback into the checklist, in place.

    Solved marks are monotone (a solved goal is never reopened, re-solving is
    a no-op).  Appended goals are deduplicated against every existing goal by
    casefolded, whitespace-collapsed text.  Unknown goal ids are ignored but
    reported through ``on_warning``.  Each call bumps ``revision`` by one.
    """
    def warn(message: str) -> None:
        if on_warning is not None:
            on_warning(message)

    known = {g.id for g in checklist.goals}
    for goal_id in sorted(feedback.solved_goal_ids):
        if goal_id not in known:
            warn(f"feedback names unknown goal id {goal_id}")
            continue
        goal = checklist.goal(goal_id)
        if goal.status != SOLVED:
            goal.status = SOLVED
    existing = {normalize_text(g.description) for g in checklist.goals}
    for description in feedback.new_goals:
        if not description or not description.strip():
            warn("empty appended goal ignored")
            continue
        key = normalize_text(description)
        if key in existing:
            continue
        existing.add(key)
        checklist.goals.append(
            SubGoal(id=len(checklist.goals) + 1, description=description.strip(), origin="appended")
        )
    checklist.revision += 1
    return checklist


def is_complete(checklist: Checklist) -> bool:
    return bool(checklist.goals) and all(g.status == SOLVED for g in checklist.goals)


def render(checklist: Checklist) -> str:
    """Numbered plan with ``[done]``/``[todo]`` status marks; "" when empty."""
    return "\n".join(
        f"{g.id}. [{'done' if g.status == SOLVED else 'todo'}] {g.description}"
        for g in checklist.goals
    )
