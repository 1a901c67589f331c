from __future__ import annotations

import json
from types import SimpleNamespace

import pytest

from treeseek.backends import (
    Document,
    LocalCorpusSearch,
    ScriptedPolicyBackend,
    ScriptedRewardBackend,
    ScriptedScenario,
    load_corpus_dir,
    scenario_backends,
    tokenize,
)
from treeseek.checklist import parse_checklist
from treeseek.errors import DatasetError, InvalidArgumentError, NoDocumentsError
from treeseek.memory import KnowledgeMemory, KnowledgeSnippet


def _doc(doc_id, content, title=""):
    return Document(doc_id=doc_id, title=title or doc_id, locator=f"corpus/{doc_id}", content=content)


def test_tokenize_casefolds_and_splits():
    assert tokenize("Red-Fox jumps! 42") == ["red", "fox", "jumps", "42"]


def test_local_search_hand_scored_ranking():
    corpus = [
        _doc("a", "red fox den", title="A"),
        _doc("b", "red wolf pack", title="B"),
        _doc("c", "blue bird", title="C"),
    ]
    search = LocalCorpusSearch(corpus)
    results = search.search("red fox", top_k=2)
    # scores by hand: a -> 2/4 = 0.5, b -> 1/6... recompute: query {red,fox};
    # a tokens {a,red,fox,den} -> inter 2, union 4 -> 0.5
    # b tokens {b,red,wolf,pack} -> inter 1, union 5 -> 0.2 ; c -> no overlap
    assert [d.doc_id for d in results] == ["a", "b"]
    assert search.search("red fox", top_k=1)[0].doc_id == "a"
    # zero shared tokens -> empty result list
    assert search.search("zzz qqq", top_k=3) == []
    assert search.search("", top_k=3) == []


def test_local_search_tie_breaks_by_doc_id():
    corpus = [_doc("m2", "same words here"), _doc("m1", "same words here")]
    results = LocalCorpusSearch(corpus).search("same words", top_k=2)
    assert [d.doc_id for d in results] == ["m1", "m2"]


def test_local_search_rejects_bad_top_k():
    with pytest.raises(InvalidArgumentError):
        LocalCorpusSearch([]).search("q", top_k=0)


def test_corpus_loads_from_directory_of_json_docs(tmp_path):
    for doc_id, content in (("b", "beta facts"), ("a", "alpha facts")):
        (tmp_path / f"{doc_id}.json").write_text(
            json.dumps(
                {
                    "doc_id": doc_id,
                    "title": doc_id.upper(),
                    "locator": f"corpus/{doc_id}",
                    "content": content,
                }
            ),
            encoding="utf-8",
        )

    corpus = load_corpus_dir(tmp_path)

    assert [d.doc_id for d in corpus] == ["a", "b"]  # sorted file order
    assert corpus[0].title == "A"
    search = LocalCorpusSearch.from_directory(tmp_path)
    assert [d.doc_id for d in search.search("alpha facts", top_k=2)] == ["a", "b"]

    with pytest.raises(DatasetError):
        load_corpus_dir(tmp_path / "nowhere")
    (tmp_path / "broken.json").write_text("{nope", encoding="utf-8")
    with pytest.raises(DatasetError) as excinfo:
        load_corpus_dir(tmp_path)
    assert "broken.json" in str(excinfo.value)


def _scenario() -> ScriptedScenario:
    return ScriptedScenario(
        query="What is the history of Acme?",
        checklist_text="- founding year\n- founder name\n",
        corpus=[
            _doc("g1", "acmeyear founded in 1911 indeed"),
            _doc("g2", "acmefounder was J. Smith"),
            _doc("x1", "unrelated filler text"),
        ],
        subquery_script={
            "goal:1": ["acmeyear founding"],
            "goal:2": ["acmefounder identity"],
            "": ["acmeyear founding", "acmefounder identity"],
            "depth:1": ["acmefounder identity"],
            "*": ["fallback probe"],
        },
        summary_script={"g1": "Acme was founded in 1911.", "g2": "Founded by J. Smith."},
        reward_script={
            "acmeyear founding": {
                "acme was founded in 1911.": {"exploration": 1, "retrieval": 2},
            },
            "acmefounder identity": {
                "founded by j. smith.": {"exploration": 1, "retrieval": 2},
            },
            "fallback probe": {},
        },
        answer_script="Acme was founded in 1911 by J. Smith.",
        gold_doc_ids=["g1", "g2"],
    )


def _history(path=()):
    return SimpleNamespace(path_subqueries=list(path))


def test_scripted_policy_goal_keyed_proposals():
    scenario = _scenario()
    policy = ScriptedPolicyBackend(scenario)
    cl = parse_checklist(scenario.checklist_text)
    got = policy.propose_subqueries(_history(), cl, KnowledgeMemory(), m_q=3)
    assert got == ["acmeyear founding", "acmefounder identity"]
    cl.goal(1).status = "solved"
    got = policy.propose_subqueries(_history(), cl, KnowledgeMemory(), m_q=3)
    assert got == ["acmefounder identity"]


def test_scripted_policy_fingerprint_chain():
    scenario = _scenario()
    policy = ScriptedPolicyBackend(scenario)
    mem = KnowledgeMemory()
    # empty checklist -> fingerprint keys; "" is the root fingerprint
    assert policy.propose_subqueries(_history(), None, mem, 3) == [
        "acmeyear founding",
        "acmefounder identity",
    ]
    # exact fingerprint missing -> depth key
    assert policy.propose_subqueries(_history(["something else"]), None, mem, 3) == [
        "acmefounder identity"
    ]
    # deeper -> wildcard
    assert policy.propose_subqueries(_history(["a", "b"]), None, mem, 3) == ["fallback probe"]
    scenario.subquery_script.pop("*")
    assert policy.propose_subqueries(_history(["a", "b"]), None, mem, 3) == []


def test_scripted_summarize_prefers_scripted_docs():
    scenario = _scenario()
    policy = ScriptedPolicyBackend(scenario)
    filler = _doc("x1", "unrelated filler text")
    chosen, text = policy.summarize("q", [filler, _doc("g2", "acmefounder was J. Smith")])
    assert (chosen, text) == ("g2", "Founded by J. Smith.")
    # nothing scripted -> first candidate, content as snippet
    chosen, text = policy.summarize("q", [filler])
    assert (chosen, text) == ("x1", "unrelated filler text")
    with pytest.raises(NoDocumentsError):
        policy.summarize("q", [])


def test_scripted_rewards_and_defaults():
    scenario = _scenario()
    reward = ScriptedRewardBackend(scenario)
    cl = parse_checklist(scenario.checklist_text)
    assert reward.exploration_reward("acmeyear founding", cl, _history()) == 1
    assert reward.exploration_reward("off goal probe", cl, _history()) == 0
    assert reward.retrieval_reward("acmeyear founding", "Acme was founded in 1911.") == 2
    assert reward.retrieval_reward("acmeyear founding", "some other snippet") == 0
    assert reward.retrieval_reward("off goal probe", "whatever") == 0


def test_scripted_feedback_tracks_memory_and_terminates():
    scenario = _scenario()
    reward = ScriptedRewardBackend(scenario)
    cl = parse_checklist(scenario.checklist_text)
    mem = KnowledgeMemory()

    fb = reward.progress_feedback("acmeyear founding", cl, _history(), mem)
    assert fb.solved_goal_ids == set() and fb.terminate is False

    mem.admit(
        KnowledgeSnippet(0, "Acme was founded in 1911.", "g1", "corpus/g1", "acmeyear founding", 1, 2, 0)
    )
    fb = reward.progress_feedback("acmeyear founding", cl, _history(), mem)
    assert fb.solved_goal_ids == {1} and fb.terminate is False

    mem.admit(
        KnowledgeSnippet(1, "Founded by J. Smith.", "g2", "corpus/g2", "acmefounder identity", 2, 2, 1)
    )
    fb = reward.progress_feedback("acmefounder identity", cl, _history(), mem)
    assert fb.solved_goal_ids == {1, 2} and fb.terminate is True


def test_scripted_backends_are_pure():
    scenario = _scenario()
    policy, reward, search = scenario_backends(scenario)
    cl = parse_checklist(scenario.checklist_text)
    mem = KnowledgeMemory()
    for _ in range(2):
        assert policy.generate_checklist(scenario.query) == scenario.checklist_text
        assert policy.propose_subqueries(_history(), cl, mem, 3) == [
            "acmeyear founding",
            "acmefounder identity",
        ]
        assert [d.doc_id for d in search.search("acmeyear founding", 3)] == ["g1"]
        assert reward.exploration_reward("acmeyear founding", cl, _history()) == 1
        assert policy.generate_answer(scenario.query, mem) == scenario.answer_script


def test_scenario_json_round_trip(tmp_path):
    scenario = _scenario()
    path = tmp_path / "scenario.json"
    scenario.save(path)
    loaded = ScriptedScenario.load(path)
    assert loaded.to_dict() == scenario.to_dict()
    # file is plain JSON with the documented top-level keys
    raw = json.loads(path.read_text(encoding="utf-8"))
    assert set(raw) == {
        "query",
        "checklist_text",
        "corpus",
        "subquery_script",
        "summary_script",
        "reward_script",
        "answer_script",
        "gold_doc_ids",
    }


def test_scenario_validate_flags_missing_reward_entries():
    scenario = _scenario()
    assert scenario.validate() == []
    scenario.reward_script.pop("acmefounder identity")
    issues = scenario.validate()
    assert len(issues) == 1 and "acmefounder identity" in issues[0]
