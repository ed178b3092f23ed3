"""Command-line entry point.

Verbs: train, eval, benchmark, cross, list-tasks.  Settings come from
flags first, then an optional INI config, then defaults.  Exit codes:
0 success, 2 configuration problem, 3 missing artifact.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from dialbench.config import ConfigError, load_config, parse_int_list
from dialbench.environment import list_tasks, make_task
from dialbench.error_channel import PRESETS, params_with, preset_for_env
from dialbench.harness import (
    MissingArtifact,
    RunSpec,
    evaluate_checkpoint,
    run_benchmark,
    run_cross_task,
    run_training,
)
from dialbench.policies import ALGORITHMS
from dialbench.simulated_user import PROFILES

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_MISSING = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dialbench",
        description="benchmark suite for RL dialogue management")
    sub = parser.add_subparsers(dest="verb", required=True)

    def common(p: argparse.ArgumentParser, needs_algo: bool = True):
        p.add_argument("--task", help="task id such as env1-CR, or a comma "
                                      "list; 'all' for every task")
        if needs_algo:
            p.add_argument("--algo", help="algorithm name or comma list")
        p.add_argument("--seeds", help="comma list of run seeds")
        p.add_argument("--config", help="INI settings file")
        p.add_argument("--out", help="output directory")
        p.add_argument("--test-dialogues", type=int, dest="test_dialogues")

    train = sub.add_parser("train", help="train one algorithm on one task")
    common(train)
    train.add_argument("--dialogues", type=int)
    train.add_argument("--eval-at", dest="eval_at",
                       help="comma list of milestone dialogue counts")

    ev = sub.add_parser("eval", help="test saved checkpoints")
    common(ev)
    ev.add_argument("--eval-task", dest="eval_task",
                    help="evaluate on this task instead (same domain)")

    bench = sub.add_parser("benchmark", help="train a grid and emit the "
                                             "results table")
    common(bench)
    bench.add_argument("--dialogues", type=int)

    cross = sub.add_parser("cross", help="cross-environment reward matrix "
                                         "from saved checkpoints")
    common(cross)
    cross.add_argument("--domains", help="comma list of domain codes")

    sub.add_parser("list-tasks", help="print the 18 task ids")
    return parser


def _setting(args: argparse.Namespace, config: dict, section: str, key: str,
             default=None):
    value = getattr(args, key, None)
    if value is not None:
        return value
    return config.get(section, {}).get(key, default)


def _split(text: str) -> list[str]:
    return [part.strip() for part in str(text).split(",") if part.strip()]


def _resolve_tasks(raw: str | None) -> list[str]:
    if raw is None:
        raise ConfigError("missing --task (or [task] name in the config)")
    if raw == "all":
        return list_tasks()
    tasks = _split(raw)
    for task_id in tasks:
        make_task(task_id)            # validates the id
    return tasks


def _resolve_algos(raw: str | None) -> list[str]:
    if raw is None:
        raise ConfigError("missing --algo (or [policy] algorithm)")
    if raw == "all":
        return list(ALGORITHMS)
    algos = _split(raw)
    for algo in algos:
        if algo not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {algo!r}; choose from "
                              f"{ALGORITHMS}")
    return algos


def _resolve_seeds(args, config) -> tuple[int, ...]:
    raw = getattr(args, "seeds", None)
    if raw is not None:
        return parse_int_list(raw, "--seeds")
    value = config.get("harness", {}).get("seeds")
    if value is None:
        return tuple(range(10))
    if isinstance(value, tuple):
        return value
    return parse_int_list(str(value), "[harness] seeds")


def _error_params(config: dict, env_index: int):
    section = dict(config.get("errormodel", {}))
    if not section:
        return None
    preset = section.pop("preset", None)
    base = PRESETS[preset] if preset else preset_for_env(env_index)
    try:
        return params_with(base, **section)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad [errormodel] override: {exc}") from exc


def _profile(config: dict):
    name = config.get("simuser", {}).get("profile")
    return PROFILES[name] if name else None


def _policy_overrides(config: dict) -> dict:
    overrides = dict(config.get("policy", {}))
    overrides.pop("algorithm", None)
    return overrides


def cmd_train(args, config) -> int:
    tasks = _resolve_tasks(_setting(args, config, "task", "task",
                                    config.get("task", {}).get("name")))
    algos = _resolve_algos(_setting(args, config, "policy", "algo",
                                    config.get("policy", {}).get("algorithm")))
    if len(tasks) != 1 or len(algos) != 1:
        raise ConfigError("train runs one task and one algorithm at a time")
    seeds = _resolve_seeds(args, config)
    dialogues = _setting(args, config, "harness", "dialogues", 10000)
    eval_at = getattr(args, "eval_at", None)
    if eval_at is not None:
        eval_points = parse_int_list(eval_at, "--eval-at")
    else:
        eval_points = config.get("harness", {}).get("eval_at",
                                                    (1000, 4000, 10000))
        if not isinstance(eval_points, tuple):
            eval_points = parse_int_list(str(eval_points), "[harness] eval_at")
    eval_points = tuple(p for p in eval_points if p <= dialogues)
    if not eval_points:
        raise ConfigError("no eval point at or below --dialogues")
    test_dialogues = _setting(args, config, "harness", "test_dialogues", 500)
    out = Path(_setting(args, config, "harness", "out", "runs"))

    task = make_task(tasks[0])
    try:
        spec = RunSpec(tasks[0], algos[0], seeds=seeds,
                       train_dialogues=int(dialogues),
                       eval_points=tuple(sorted(eval_points)),
                       test_dialogues=int(test_dialogues), out_dir=out)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    result = run_training(spec,
                          error_params=_error_params(config, task.env_index),
                          profile=_profile(config),
                          policy_overrides=_policy_overrides(config))
    for point in spec.eval_points:
        sm, ss, rm, rs = result.mean_std(point)
        print(f"{spec.task_id} {spec.algorithm} @{point}: "
              f"success {sm:.3f}±{ss:.3f} reward {rm:.2f}±{rs:.2f}")
    print(f"curve: {out / 'curves' / f'{spec.task_id}-{spec.algorithm}.csv'}")
    return EXIT_OK


def cmd_eval(args, config) -> int:
    tasks = _resolve_tasks(_setting(args, config, "task", "task",
                                    config.get("task", {}).get("name")))
    algos = _resolve_algos(_setting(args, config, "policy", "algo",
                                    config.get("policy", {}).get("algorithm")))
    if len(tasks) != 1 or len(algos) != 1:
        raise ConfigError("eval runs one task and one algorithm at a time")
    seeds = _resolve_seeds(args, config)
    test_dialogues = _setting(args, config, "harness", "test_dialogues", 500)
    out = Path(_setting(args, config, "harness", "out", "runs"))
    eval_task = getattr(args, "eval_task", None)
    if eval_task is not None:
        make_task(eval_task)
    report = evaluate_checkpoint(out, tasks[0], algos[0], seeds,
                                 int(test_dialogues), eval_task_id=eval_task)
    print(json.dumps(report, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_benchmark(args, config) -> int:
    raw_task = _setting(args, config, "task", "task",
                        config.get("task", {}).get("name") or "all")
    tasks = _resolve_tasks(raw_task)
    raw_algo = _setting(args, config, "policy", "algo",
                        config.get("policy", {}).get("algorithm") or "all")
    algos = _resolve_algos(raw_algo)
    seeds = _resolve_seeds(args, config)
    dialogues = int(_setting(args, config, "harness", "dialogues", 4000))
    test_dialogues = int(_setting(args, config, "harness",
                                  "test_dialogues", 500))
    out = Path(_setting(args, config, "harness", "out", "runs"))
    path = run_benchmark(algos, tasks, seeds, dialogues, test_dialogues, out,
                         policy_overrides=_policy_overrides(config))
    print(f"results table: {path}")
    return EXIT_OK


def cmd_cross(args, config) -> int:
    raw_algo = _setting(args, config, "policy", "algo",
                        config.get("policy", {}).get("algorithm") or "all")
    algos = _resolve_algos(raw_algo)
    raw_domains = getattr(args, "domains", None) or "CR,SFR,LAP"
    domains = _split(raw_domains)
    seeds = _resolve_seeds(args, config)
    test_dialogues = int(_setting(args, config, "harness",
                                  "test_dialogues", 500))
    out = Path(_setting(args, config, "harness", "out", "runs"))
    try:
        path = run_cross_task(out, algos, domains, seeds, test_dialogues)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    print(f"cross matrix: {path}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config) if getattr(args, "config", None) else {}
        if args.verb == "list-tasks":
            for task_id in list_tasks():
                print(task_id)
            return EXIT_OK
        handler = {
            "train": cmd_train,
            "eval": cmd_eval,
            "benchmark": cmd_benchmark,
            "cross": cmd_cross,
        }[args.verb]
        return handler(args, config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MissingArtifact as exc:
        print(f"missing artifact: {exc}", file=sys.stderr)
        return EXIT_MISSING


if __name__ == "__main__":
    sys.exit(main())
