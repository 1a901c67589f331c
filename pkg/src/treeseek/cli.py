"""Command-line entry points: run, bench, sweep, replay.

Exit codes: 0 success, 1 trace divergence (replay), 2 usage or configuration
problems, 3 backend unavailable or search aborted, 4 file/trace/dataset
errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .backends import ScriptedScenario, scenario_backends
from .config import FileConfig, load_config_file, merged_search_config
from .errors import (
    BackendUnavailableError,
    ConfigurationError,
    DatasetError,
    InvalidArgumentError,
    SearchAbortedError,
    TraceIOError,
)
from .metrics import aggregate, load_dataset, render_table, sample_items
from .orchestrator import run_search
from .remote import RemotePolicyBackend, RemoteRewardBackend, WebSearchBackend
from .reporting import render_metric_bars, render_sweep_figure, write_sweep_csv
from .trace import JsonlTraceSink, compare_traces, event_line, load_trace

DEFAULT_SWEEP_BUDGETS = "5,10,20,40"


def _add_engine_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("engine overrides (beat the config file)")
    group.add_argument("--max-simulations", type=int, default=None)
    group.add_argument("--max-depth", type=int, default=None)
    group.add_argument("--uct-weight", type=float, default=None)
    group.add_argument("--m-q", type=int, default=None, help="subqueries proposed per expansion")
    group.add_argument("--top-k", type=int, default=None, help="documents retained per search")
    group.add_argument("--memory-budget-chars", type=int, default=None)
    group.add_argument("--seed", type=int, default=None)
    group.add_argument(
        "--no-checklist",
        dest="checklist_enabled",
        action="store_const",
        const=False,
        default=None,
        help="run without checklist guidance",
    )
    group.add_argument(
        "--additive-rewards",
        dest="additive_rewards",
        action="store_const",
        const=True,
        default=None,
        help="combine rewards by normalized sum instead of product",
    )


def _engine_flag_values(args: argparse.Namespace) -> dict:
    names = (
        "max_simulations",
        "max_depth",
        "uct_weight",
        "m_q",
        "top_k",
        "memory_budget_chars",
        "seed",
        "checklist_enabled",
        "additive_rewards",
    )
    return {name: getattr(args, name, None) for name in names}


def _file_config(args: argparse.Namespace) -> FileConfig:
    if getattr(args, "config", None):
        return load_config_file(args.config)
    return FileConfig()


def _load_scenario(path: str | Path) -> ScriptedScenario:
    try:
        return ScriptedScenario.load(path)
    except OSError as exc:
        raise DatasetError(f"cannot read scenario {path}: {exc}") from exc
    except (ValueError, KeyError, TypeError) as exc:
        raise DatasetError(f"malformed scenario {path}: {exc}") from exc


def _build_backends(args: argparse.Namespace, file_cfg: FileConfig):
    """Returns (query, policy, reward, search) for the chosen backend."""
    if args.backend == "scripted":
        if not args.scenario:
            raise ConfigurationError("--backend scripted requires --scenario")
        scenario = _load_scenario(args.scenario)
        policy, reward, search = scenario_backends(scenario)
        return args.query or scenario.query, policy, reward, search
    if file_cfg.llm is None:
        raise ConfigurationError("--backend remote requires a --config file with an [llm] section")
    if file_cfg.search_endpoint is None:
        raise ConfigurationError(
            "--backend remote requires a --config file with a [search_endpoint] section"
        )
    if not args.query:
        raise ConfigurationError("--backend remote requires --query")
    return (
        args.query,
        RemotePolicyBackend(file_cfg.llm),
        RemoteRewardBackend(file_cfg.llm),
        WebSearchBackend(file_cfg.search_endpoint),
    )


def _cmd_run(args: argparse.Namespace) -> int:
    file_cfg = _file_config(args)
    config = merged_search_config(file_cfg.search, _engine_flag_values(args))
    query, policy, reward, search = _build_backends(args, file_cfg)

    sink = JsonlTraceSink(args.trace_out) if args.trace_out else None
    try:
        outcome = run_search(query, config, policy, reward, search, trace_sink=sink)
    finally:
        if sink is not None:
            sink.close()

    report = outcome.to_report_json()
    if args.report_out:
        Path(args.report_out).write_text(report, encoding="utf-8")
        print(f"report written to {args.report_out}")
        print(f"termination: {outcome.termination_reason} after {outcome.simulations_used} simulations")
        print(f"answer: {outcome.answer}")
    else:
        print(report, end="")
        print(
            f"termination: {outcome.termination_reason} after {outcome.simulations_used} simulations",
            file=sys.stderr,
        )
    if args.trace_out:
        print(f"trace written to {args.trace_out}", file=sys.stderr)
    return 0


def _bench_one(item, scenario_dir: Path, items_dir: Path, config):
    scenario = _load_scenario(scenario_dir / f"{item.id}.json")
    policy, reward, search = scenario_backends(scenario)
    trace_path = items_dir / f"{item.id}.trace.jsonl"
    with JsonlTraceSink(trace_path) as sink:
        outcome = run_search(scenario.query, config, policy, reward, search, trace_sink=sink)
    report_path = items_dir / f"{item.id}.report.json"
    report_path.write_text(
        outcome.to_report_json(trace_locator=f"items/{item.id}.trace.jsonl"),
        encoding="utf-8",
    )
    return outcome


def _cmd_bench(args: argparse.Namespace) -> int:
    file_cfg = _file_config(args)
    config = merged_search_config(file_cfg.search, _engine_flag_values(args))
    suite_dir = Path(args.suite)
    items = load_dataset(suite_dir / "dataset.jsonl")
    if args.sample is not None:
        items = sample_items(items, args.sample, args.sample_seed)

    out_dir = Path(args.out_dir)
    items_dir = out_dir / "items"
    items_dir.mkdir(parents=True, exist_ok=True)
    scenario_dir = suite_dir / "scenarios"

    if args.parallel > 1:
        with ThreadPoolExecutor(max_workers=args.parallel) as pool:
            outcomes = list(
                pool.map(lambda item: _bench_one(item, scenario_dir, items_dir, config), items)
            )
    else:
        outcomes = [_bench_one(item, scenario_dir, items_dir, config) for item in items]

    report = aggregate(items, outcomes)
    (out_dir / "report.json").write_text(report.to_json(), encoding="utf-8")
    table = render_table(report)
    (out_dir / "metrics.txt").write_text(table + "\n", encoding="utf-8")
    render_metric_bars(report.means, out_dir / "metrics.png")
    print(table)
    print(f"bench artifacts in {out_dir}")
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    file_cfg = _file_config(args)
    config = merged_search_config(file_cfg.search, _engine_flag_values(args))
    try:
        budgets = [int(part) for part in args.simulations.split(",") if part.strip()]
    except ValueError:
        raise ConfigurationError(
            f"--simulations expects comma-separated integers, got {args.simulations!r}"
        ) from None
    if not budgets or any(b < 1 for b in budgets):
        raise ConfigurationError("--simulations needs at least one positive budget")

    suite_dir = Path(args.suite)
    items = load_dataset(suite_dir / "dataset.jsonl")
    scenarios = [_load_scenario(suite_dir / "scenarios" / f"{item.id}.json") for item in items]

    rows = []
    for budget in budgets:
        budget_config = dataclasses.replace(config, max_simulations=budget)
        outcomes = []
        for scenario in scenarios:
            policy, reward, search = scenario_backends(scenario)
            outcomes.append(run_search(scenario.query, budget_config, policy, reward, search))
        report = aggregate(items, outcomes)
        rows.append(
            {
                "budget": budget,
                "recall_mean": report.means.get("page_recall", 0.0),
                "em_mean": report.means.get("em", 0.0),
                "f1_mean": report.means.get("f1", 0.0),
                "items": len(items),
            }
        )
        print(
            f"budget {budget:>4}: recall {rows[-1]['recall_mean']:.3f}"
            f"  em {rows[-1]['em_mean']:.3f}  f1 {rows[-1]['f1_mean']:.3f}"
        )

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_sweep_csv(out_dir / "sweep.csv", rows)
    render_sweep_figure(rows, out_dir / "sweep.png")
    print(f"sweep artifacts in {out_dir}")
    return 0


def _cmd_replay(args: argparse.Namespace) -> int:
    events_a = load_trace(args.trace_a)
    events_b = load_trace(args.trace_b)
    divergence = compare_traces(events_a, events_b)
    if divergence is None:
        print(f"traces equivalent ({len(events_a)} events)")
        return 0
    print(f"traces diverge at seq {divergence}")
    for label, events in (("a", events_a), ("b", events_b)):
        if divergence < len(events):
            print(f"  {label}: {event_line(events[divergence])}")
        else:
            print(f"  {label}: <no event>")
    return 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="treeseek",
        description="Checklist-guided tree search over document collections.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one search and emit a report")
    run.add_argument("--query", default=None, help="input question (defaults to the scenario's)")
    run.add_argument("--scenario", default=None, help="scripted scenario JSON file")
    run.add_argument("--backend", choices=("scripted", "remote"), default="scripted")
    run.add_argument("--config", default=None, help="INI config file")
    run.add_argument("--trace-out", default=None, help="write the trace JSONL here")
    run.add_argument("--report-out", default=None, help="write the report JSON here (default: stdout)")
    _add_engine_flags(run)
    run.set_defaults(func=_cmd_run)

    bench = sub.add_parser("bench", help="score a scenario suite against its dataset")
    bench.add_argument("--suite", required=True, help="directory with dataset.jsonl and scenarios/")
    bench.add_argument("--out-dir", required=True, help="where to write reports, table and figure")
    bench.add_argument("--sample", type=int, default=None, help="evaluate only N sampled items")
    bench.add_argument("--sample-seed", type=int, default=0, help="sampling seed")
    bench.add_argument("--parallel", type=int, default=1, help="worker threads")
    bench.add_argument("--config", default=None, help="INI config file")
    _add_engine_flags(bench)
    bench.set_defaults(func=_cmd_bench)

    sweep = sub.add_parser("sweep", help="re-run a suite across simulation budgets")
    sweep.add_argument("--suite", required=True, help="directory with dataset.jsonl and scenarios/")
    sweep.add_argument("--out-dir", required=True, help="where to write sweep.csv and sweep.png")
    sweep.add_argument(
        "--simulations",
        default=DEFAULT_SWEEP_BUDGETS,
        help=f"comma-separated budgets (default {DEFAULT_SWEEP_BUDGETS})",
    )
    sweep.add_argument("--config", default=None, help="INI config file")
    _add_engine_flags(sweep)
    sweep.set_defaults(func=_cmd_sweep)

    replay = sub.add_parser("replay", help="compare two trace files for equivalence")
    replay.add_argument("trace_a")
    replay.add_argument("trace_b")
    replay.set_defaults(func=_cmd_replay)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, InvalidArgumentError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SearchAbortedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if exc.trace_path:
            print(f"partial trace preserved at {exc.trace_path}", file=sys.stderr)
        return 3
    except BackendUnavailableError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (TraceIOError, DatasetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
