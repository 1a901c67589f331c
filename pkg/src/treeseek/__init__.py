"""treeseek: checklist-guided Monte Carlo tree search for information seeking."""

from .backends import (
    Document,
    LocalCorpusSearch,
    PolicyBackend,
    ProgressFeedback,
    RewardBackend,
    RewardBundle,
    ScriptedPolicyBackend,
    ScriptedRewardBackend,
    ScriptedScenario,
    SearchBackend,
    load_corpus_dir,
    scenario_backends,
)
from .checklist import Checklist, SubGoal, apply_feedback, is_complete, parse_checklist, render
from .config import FileConfig, load_config_file, merged_search_config
from .memory import KnowledgeMemory, KnowledgeSnippet
from .orchestrator import (
    HistoryContext,
    SearchConfig,
    SearchOutcome,
    combine_reward,
    expand_and_evaluate,
    run_search,
)
from .remote import (
    LlmEndpointConfig,
    RemotePolicyBackend,
    RemoteRewardBackend,
    SearchEndpointConfig,
    WebSearchBackend,
    chat_complete,
    parse_structured_reply,
    web_search,
)
from .trace import JsonlTraceSink, MemoryTraceSink, TraceEvent, compare_traces, load_trace, replay_verify
from .tree import SearchTree, TreeNode, backpropagate, select, uct_score

__version__ = "0.1.0"

__all__ = [
    "Checklist",
    "Document",
    "FileConfig",
    "HistoryContext",
    "JsonlTraceSink",
    "KnowledgeMemory",
    "KnowledgeSnippet",
    "LlmEndpointConfig",
    "LocalCorpusSearch",
    "MemoryTraceSink",
    "PolicyBackend",
    "ProgressFeedback",
    "RemotePolicyBackend",
    "RemoteRewardBackend",
    "RewardBackend",
    "RewardBundle",
    "ScriptedPolicyBackend",
    "ScriptedRewardBackend",
    "ScriptedScenario",
    "SearchBackend",
    "SearchConfig",
    "SearchEndpointConfig",
    "SearchOutcome",
    "SearchTree",
    "SubGoal",
    "TraceEvent",
    "TreeNode",
    "WebSearchBackend",
    "apply_feedback",
    "backpropagate",
    "chat_complete",
    "combine_reward",
    "compare_traces",
    "expand_and_evaluate",
    "is_complete",
    "load_config_file",
    "load_corpus_dir",
    "load_trace",
    "merged_search_config",
    "parse_checklist",
    "parse_structured_reply",
    "render",
    "replay_verify",
    "run_search",
    "scenario_backends",
    "select",
    "uct_score",
    "web_search",
]
