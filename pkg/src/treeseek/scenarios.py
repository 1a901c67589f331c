"""Deterministic planted-document scenario generation.

Each generated scenario hides one gold document per checklist goal inside a
distractor corpus and scripts exactly the backend replies a competent policy
would produce.  Guided runs find one gold document per simulation; the
unguided script (used when the checklist is disabled) cycles through a
configurable fraction of the goals, which is what makes the guided/unguided
comparison informative.
"""

from __future__ import annotations

import json
import random
import re
import sys
from pathlib import Path

from .backends import Document, ScriptedScenario
from .textutil import normalize_text

_ALNUM = re.compile(r"[^a-z0-9]+")


def _tag(name: str) -> str:
    tag = _ALNUM.sub("", name.casefold())
    return tag or "scen"


def make_scenario(
    name: str,
    *,
    n_goals: int = 5,
    corpus_size: int = 25,
    seed: int = 0,
    unguided_coverage: float = 1.0,
    unsolvable_goals: tuple[int, ...] = (),
) -> ScriptedScenario:
    """Build one planted-document scenario.

    ``unguided_coverage`` controls which fraction of the goals the
    checklist-free subquery rotation ever asks about.  Goals listed in
    ``unsolvable_goals`` get decoy documents instead of gold ones: their
    subqueries retrieve and admit a decoy (retrieval reward 1), but the gold
    document itself stays unreachable so the goal is never fulfilled.
    """
    if n_goals < 1 or corpus_size < n_goals:
        raise ValueError("need at least one goal and a corpus no smaller than the goal count")
    tag = _tag(name)
    rng = random.Random(seed)

    goal_subqueries: dict[int, list[str]] = {}
    corpus: list[Document] = []
    summary_script: dict[str, str] = {}
    reward_script: dict[str, dict[str, dict]] = {}
    gold_doc_ids: list[str] = []
    checklist_lines: list[str] = []

    for i in range(1, n_goals + 1):
        topic = f"{tag}topic{i}"
        fact = f"{tag}fact{i}"
        gold_id = f"{tag}-gold-{i}"
        gold_doc_ids.append(gold_id)
        checklist_lines.append(f"{i}. Establish {topic} {fact}")
        corpus.append(
            Document(
                doc_id=gold_id,
                title=f"{topic} reference",
                locator=f"https://example.org/{tag}/gold/{i}",
                content=f"{topic} {fact} confirmed detail number {i}",
            )
        )
        snippet = f"{fact}: planted answer {i}."
        summary_script[gold_id] = snippet
        if i in unsolvable_goals:
            decoy_id = f"{tag}-decoy-{i}"
            decoy_snippet = f"{topic} side note {i}."
            corpus.append(
                Document(
                    doc_id=decoy_id,
                    title=f"{topic} commentary",
                    locator=f"https://example.org/{tag}/decoy/{i}",
                    content=f"{topic} marginal commentary item {i}",
                )
            )
            summary_script[decoy_id] = decoy_snippet
            # three paraphrases so expansions keep three-wide even when this
            # is the only goal left; all hit the decoy, never the gold doc
            subqueries = [
                f"seek {topic} overview",
                f"seek {topic} commentary",
                f"seek {topic} background",
            ]
            for sq in subqueries:
                reward_script[normalize_text(sq)] = {
                    normalize_text(decoy_snippet): {"exploration": 1, "retrieval": 1}
                }
            goal_subqueries[i] = subqueries
        else:
            sq = f"find {topic} {fact}"
            reward_script[normalize_text(sq)] = {
                normalize_text(snippet): {"exploration": 1, "retrieval": 2}
            }
            goal_subqueries[i] = [sq]

    filler_words = ["archive", "ledger", "minutes", "catalog", "report", "notes"]
    for j in range(corpus_size - len(corpus)):
        word = filler_words[j % len(filler_words)]
        hook = "find " if j % 5 == 0 else ""
        corpus.append(
            Document(
                doc_id=f"{tag}-filler-{j}",
                title=f"{tag} {word} {j}",
                locator=f"https://example.org/{tag}/filler/{j}",
                content=f"{hook}{tag}misc{j} {word} unrelated material {rng.randint(100, 999)}",
            )
        )

    subquery_script: dict[str, list[str]] = {
        f"goal:{i}": goal_subqueries[i] for i in range(1, n_goals + 1)
    }
    covered = max(1, min(n_goals, round(unguided_coverage * n_goals)))
    for depth in range(0, 8):
        rotation = []
        for j in range(3):
            goal = (depth * 3 + j) % covered + 1
            candidate = goal_subqueries[goal][0]
            if candidate not in rotation:
                rotation.append(candidate)
        subquery_script[f"depth:{depth}"] = rotation

    answer = " ".join(f"planted answer {i}." for i in range(1, n_goals + 1))
    return ScriptedScenario(
        query=f"Assemble the full {tag} dossier covering all {n_goals} aspects.",
        checklist_text="\n".join(checklist_lines),
        corpus=corpus,
        subquery_script=subquery_script,
        summary_script=summary_script,
        reward_script=reward_script,
        answer_script=f"Dossier: {answer}",
        gold_doc_ids=gold_doc_ids,
    )


SUITE_GOAL_COUNTS = [4, 5, 6, 7, 8, 9, 10, 11, 12, 15]
# indices whose unguided rotation covers every goal (equality cases)
_FULL_COVERAGE_SLOTS = {1, 4, 8}


def make_suite(n_scenarios: int = 10, seed: int = 0) -> list[tuple[str, ScriptedScenario]]:
    """A benchmark suite with varying goal counts and unguided coverage."""
    suite = []
    for idx in range(n_scenarios):
        goals = SUITE_GOAL_COUNTS[idx % len(SUITE_GOAL_COUNTS)]
        coverage = 1.0 if idx in _FULL_COVERAGE_SLOTS else 0.6
        item_id = f"case{idx:02d}"
        suite.append(
            (
                item_id,
                make_scenario(
                    f"{item_id}x{seed}",
                    n_goals=goals,
                    corpus_size=goals + 15,
                    seed=seed * 1000 + idx,
                    unguided_coverage=coverage,
                ),
            )
        )
    return suite


def write_suite(out_dir: str | Path, n_scenarios: int = 10, seed: int = 0) -> Path:
    """Write scenario JSON files plus the matching benchmark dataset.

    Returns the dataset path; scenario files land in ``<out_dir>/scenarios``.
    """
    out = Path(out_dir)
    scen_dir = out / "scenarios"
    scen_dir.mkdir(parents=True, exist_ok=True)
    dataset_path = out / "dataset.jsonl"
    with open(dataset_path, "w", encoding="utf-8") as fh:
        for item_id, scenario in make_suite(n_scenarios, seed):
            scenario.save(scen_dir / f"{item_id}.json")
            item = {
                "id": item_id,
                "question": scenario.query,
                "answers": [scenario.answer_script],
                "gold_pages": scenario.gold_locators(),
            }
            fh.write(json.dumps(item, ensure_ascii=False, sort_keys=True) + "\n")
    return dataset_path


def main(argv: list[str] | None = None) -> int:
    """``python -m treeseek.scenarios OUT_DIR [N_SCENARIOS] [SEED]``"""
    args = sys.argv[1:] if argv is None else argv
    if not args or len(args) > 3:
        print("usage: python -m treeseek.scenarios OUT_DIR [N_SCENARIOS] [SEED]", file=sys.stderr)
        return 2
    out_dir = args[0]
    n_scenarios = int(args[1]) if len(args) > 1 else 10
    seed = int(args[2]) if len(args) > 2 else 0
    dataset = write_suite(out_dir, n_scenarios, seed)
    print(f"wrote {n_scenarios} scenarios and {dataset}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
