"""Small text helpers used for deduplication keys across the engine."""

from __future__ import annotations

import re

_WS = re.compile(r"\s+")


def normalize_text(text: str) -> str:
    """Casefold and collapse runs of whitespace to single spaces.

    This is the equality key used everywhere two pieces of free text are
    compared: sibling subqueries, appended checklist goals, and the
    (document, subquery) admission ledger of the knowledge memory.
    """
    return _WS.sub(" ", text.casefold()).strip()
