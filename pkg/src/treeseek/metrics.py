"""Answer-quality and retrieval-coverage metrics, plus dataset loading.

Answer metrics follow the usual open-domain QA conventions: answers are
casefolded, punctuation-stripped, article-stripped ("a", "an", "the") and
whitespace-collapsed before comparison.  ROUGE keeps articles (only casefold
and punctuation stripping) since it measures surface overlap.
"""

from __future__ import annotations

import json
import random
import re
import string
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from statistics import mean

from .errors import DatasetError

_ARTICLES = re.compile(r"\b(a|an|the)\b")
_WS = re.compile(r"\s+")
_PUNCT_TABLE = str.maketrans("", "", string.punctuation)


def normalize_answer(text: str) -> str:
    text = text.casefold()
    text = text.translate(_PUNCT_TABLE)
    text = _ARTICLES.sub(" ", text)
    return _WS.sub(" ", text).strip()


def _answer_tokens(text: str) -> list[str]:
    normalized = normalize_answer(text)
    return normalized.split() if normalized else []


def _surface_tokens(text: str) -> list[str]:
    # ROUGE tokenization: casefold + punctuation strip, articles kept
    stripped = text.casefold().translate(_PUNCT_TABLE)
    return stripped.split()


def exact_match(pred: str, golds: list[str]) -> float:
    norm = normalize_answer(pred)
    return 1.0 if any(norm == normalize_answer(g) for g in golds) else 0.0


def _is_sublist(needle: list[str], haystack: list[str]) -> bool:
    if not needle:
        return not haystack
    for start in range(len(haystack) - len(needle) + 1):
        if haystack[start : start + len(needle)] == needle:
            return True
    return False


def cover_exact_match(pred: str, golds: list[str]) -> float:
    """1 when some gold appears as a contiguous token run inside the answer."""
    pred_tokens = _answer_tokens(pred)
    return 1.0 if any(_is_sublist(_answer_tokens(g), pred_tokens) for g in golds) else 0.0


def _f1_single(pred_tokens: list[str], gold_tokens: list[str]) -> float:
    if not pred_tokens and not gold_tokens:
        return 1.0
    if not pred_tokens or not gold_tokens:
        return 0.0
    common = sum((Counter(pred_tokens) & Counter(gold_tokens)).values())
    if common == 0:
        return 0.0
    precision = common / len(pred_tokens)
    recall = common / len(gold_tokens)
    return 2 * precision * recall / (precision + recall)


def token_f1(pred: str, golds: list[str]) -> float:
    pred_tokens = _answer_tokens(pred)
    return max(_f1_single(pred_tokens, _answer_tokens(g)) for g in golds)


def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def rouge_n(pred: str, ref: str, n: int = 1) -> float:
    if not pred.strip() or not ref.strip():
        return 0.0
    pred_tokens = _surface_tokens(pred)
    ref_tokens = _surface_tokens(ref)
    pred_grams = _ngrams(pred_tokens, n)
    ref_grams = _ngrams(ref_tokens, n)
    if not pred_grams and not ref_grams:
        # both too short for n-grams: identity still counts as full overlap
        return 1.0 if pred_tokens == ref_tokens and pred_tokens else 0.0
    if not pred_grams or not ref_grams:
        return 0.0
    match = sum((pred_grams & ref_grams).values())
    if match == 0:
        return 0.0
    precision = match / sum(pred_grams.values())
    recall = match / sum(ref_grams.values())
    return 2 * precision * recall / (precision + recall)


def _lcs_len(a: list[str], b: list[str]) -> int:
    prev = [0] * (len(b) + 1)
    for token in a:
        current = [0]
        for j, other in enumerate(b, start=1):
            if token == other:
                current.append(prev[j - 1] + 1)
            else:
                current.append(max(prev[j], current[-1]))
        prev = current
    return prev[-1]


def rouge_l(pred: str, ref: str) -> float:
    if not pred.strip() or not ref.strip():
        return 0.0
    pred_tokens = _surface_tokens(pred)
    ref_tokens = _surface_tokens(ref)
    if not pred_tokens or not ref_tokens:
        return 0.0
    lcs = _lcs_len(pred_tokens, ref_tokens)
    if lcs == 0:
        return 0.0
    precision = lcs / len(pred_tokens)
    recall = lcs / len(ref_tokens)
    return 2 * precision * recall / (precision + recall)


def normalize_locator(locator: str) -> str:
    """Equality key for pages: scheme/fragment dropped, host casefolded,
    trailing slashes stripped."""
    loc = locator.split("#", 1)[0]
    if "://" in loc:
        loc = loc.split("://", 1)[1]
    host, sep, rest = loc.partition("/")
    loc = host.casefold() + sep + rest
    return loc.rstrip("/")


def page_recall(retrieved: list[str], gold_pages: list[str]) -> float | None:
    """Fraction of gold pages present among retrieved ones; None (metric
    absent) when there are no gold pages to score against."""
    gold = {normalize_locator(g) for g in gold_pages if g.strip()}
    if not gold:
        return None
    got = {normalize_locator(r) for r in retrieved}
    return len(gold & got) / len(gold)


@dataclass
class BenchmarkItem:
    id: str
    question: str
    answers: list[str]
    gold_pages: list[str] = field(default_factory=list)


def load_dataset(path: str | Path) -> list[BenchmarkItem]:
    """Read a JSONL benchmark file; errors point at the offending line."""
    items = []
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise DatasetError(f"cannot read dataset {path}: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            try:
                item = BenchmarkItem(
                    id=str(raw["id"]),
                    question=raw["question"],
                    answers=list(raw["answers"]),
                    gold_pages=list(raw.get("gold_pages", [])),
                )
            except (KeyError, TypeError) as exc:
                raise DatasetError(f"{path}:{lineno}: missing or malformed field: {exc}") from exc
            if not item.answers:
                raise DatasetError(f"{path}:{lineno}: item {item.id!r} has no gold answers")
            items.append(item)
    return items


def sample_items(items: list[BenchmarkItem], n: int, seed: int) -> list[BenchmarkItem]:
    """Deterministic sample of n items (all of them when n >= len)."""
    if n >= len(items):
        return list(items)
    return random.Random(seed).sample(items, n)


@dataclass
class MetricReport:
    per_item: list[dict]
    means: dict[str, float]

    def to_dict(self) -> dict:
        return {"per_item": self.per_item, "means": self.means}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, sort_keys=True, indent=2) + "\n"


_METRIC_COLUMNS = ["em", "cem", "f1", "rouge_1", "rouge_2", "rouge_l", "page_recall"]


def score_item(item: BenchmarkItem, answer: str, retrieved: list[str] | None) -> dict:
    row: dict = {
        "id": item.id,
        "em": exact_match(answer, item.answers),
        "cem": cover_exact_match(answer, item.answers),
        "f1": token_f1(answer, item.answers),
        "rouge_1": max(rouge_n(answer, g, 1) for g in item.answers),
        "rouge_2": max(rouge_n(answer, g, 2) for g in item.answers),
        "rouge_l": max(rouge_l(answer, g) for g in item.answers),
    }
    if retrieved is not None:
        recall = page_recall(retrieved, item.gold_pages)
        if recall is not None:
            row["page_recall"] = recall
    return row


def aggregate(items: list[BenchmarkItem], outcomes: list) -> MetricReport:
    """Score each (item, outcome) pair and average whatever is present.

    ``outcomes`` need only expose ``answer`` and, optionally,
    ``retrieved_locators``.
    """
    if len(items) != len(outcomes):
        raise DatasetError(f"{len(items)} items but {len(outcomes)} outcomes")
    per_item = [
        score_item(item, outcome.answer, getattr(outcome, "retrieved_locators", None))
        for item, outcome in zip(items, outcomes)
    ]
    means = {}
    for column in _METRIC_COLUMNS:
        present = [row[column] for row in per_item if column in row]
        if present:
            means[column] = mean(present)
    return MetricReport(per_item=per_item, means=means)


def render_table(report: MetricReport) -> str:
    """Fixed-width table of per-item scores with a trailing mean row."""
    columns = [c for c in _METRIC_COLUMNS if any(c in row for row in report.per_item)]
    header = ["id"] + columns
    rows = [header]
    for row in report.per_item:
        rows.append([row["id"]] + [_fmt(row.get(c)) for c in columns])
    rows.append(["mean"] + [_fmt(report.means.get(c)) for c in columns])
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    lines = []
    for i, row in enumerate(rows):
        lines.append("  ".join(cell.ljust(width) for cell, width in zip(row, widths)).rstrip())
        if i == 0:
            lines.append("  ".join("-" * width for width in widths))
    return "\n".join(lines)


def _fmt(value) -> str:
    return "-" if value is None else f"{value:.4f}"
