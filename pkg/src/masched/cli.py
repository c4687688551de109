"""Command-line front end.

Subcommands: `check` (uniform baseline estimate), `lss` (strategy
sampling), `qlearn` (tabular learning), `extract` (log to strategy
table), `tree` (table to decision tree), `replay` (table playback
estimate), `mine-gen` (model generator), and `bench` (a grid of runs
appended to a results CSV).

Exit codes: 0 success, 1 usage, 2 model error, 3 runtime error,
4 observation-consistency abort.
"""

from __future__ import annotations

import argparse
import os
import shutil
import sys
import tempfile
import time

from . import __version__
from .dsl import parse
from .dtree import learn, to_dot, write_tree
from .engine import derive_stream
from .errors import (
    ConsistencyError,
    EmptyStrategyError,
    MaschedError,
    ModelError,
    ParseError,
    ResourceError,
    SimulationError,
)
from .extract import (
    RecordLayout,
    concatenate,
    read_table,
    sort_dedup,
    write_table,
)
from .mine import (
    CATALOG,
    catalog_config,
    build_mine,
    combinations,
    mine_text,
    read_mine_config,
    validate_catalog,
)
from .parallel import Runner
from .policies import TablePolicy
from .qlearn import Schedule, run_qlearning, write_qtable
from .sampling import SamplingBudget, run_smart_sampling
from .stats import append_rows, estimate, read_rows, result_row

DEFAULT_MEM_BUDGET = 64 * 1024**2


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_model_args(sub, with_mode=True):
    sub.add_argument("--model", help="network description file (.man)")
    sub.add_argument(
        "--instance", type=int, help="mine catalog instance (truck count)"
    )
    sub.add_argument(
        "--mine-config", help="mine configuration file instead of a catalog instance"
    )
    sub.add_argument(
        "--shift", type=float, default=None,
        help="time bound of the reward property (default: the mine shift, 200)",
    )
    sub.add_argument(
        "--reward", default=None,
        help="transient reward variable (default: the model's only one)",
    )
    if with_mode:
        group = sub.add_mutually_exclusive_group()
        group.add_argument(
            "--fo", dest="mode", action="store_const", const="fo",
            help="fully observable states (default)",
        )
        group.add_argument(
            "--po", dest="mode", action="store_const", const="po",
            help="partially observable states per the model's declarations",
        )
        sub.set_defaults(mode="fo")


def _add_run_args(sub):
    sub.add_argument("--seed", type=int, default=None,
                     help="random seed (falls back to $MASCHED_SEED, else random)")
    sub.add_argument("-j", "--workers", type=int, default=os.cpu_count() or 1,
                     help="worker processes (default: available CPUs)")
    sub.add_argument("--rel-width", type=float, default=0.01,
                     help="relative confidence-interval half-width (default 0.01)")
    sub.add_argument("--confidence", type=float, default=0.95,
                     help="confidence level (default 0.95)")
    sub.add_argument("--csv", default=None, help="append a result row to this CSV")


def _resolve_seed(args) -> int:
    if args.seed is not None:
        seed = args.seed
    elif os.environ.get("MASCHED_SEED"):
        seed = int(os.environ["MASCHED_SEED"])
    else:
        seed = int.from_bytes(os.urandom(4), "little")
    print(f"seed: {seed}")
    return seed


def _load_model(args):
    """Returns (model, model_name, instance_name, default_shift)."""
    sources = [s for s in (args.model, args.instance, args.mine_config) if s is not None]
    if len(sources) != 1:
        raise ModelError("give exactly one of --model, --instance, --mine-config")
    if args.model:
        with open(args.model) as handle:
            model = parse(handle.read())
        return model, os.path.basename(args.model), "-", None
    if args.mine_config:
        config = read_mine_config(args.mine_config)
        return build_mine(config), os.path.basename(args.mine_config), "-", config.shift
    config = catalog_config(args.instance)
    return build_mine(config), "mine", str(args.instance), config.shift


def _prepare(args):
    model, name, instance, default_shift = _load_model(args)
    shift = args.shift if args.shift is not None else default_shift
    if shift is None:
        raise ModelError("--shift is required for this model")
    reward = args.reward
    if reward is None and len(model.reward_names) == 1:
        reward = model.reward_names[0]
    if reward is None and model.reward_names:
        raise ModelError(
            f"model declares rewards {list(model.reward_names)}; pick one with --reward"
        )
    ma = model.automaton(reward=reward, mode=args.mode)
    return model, ma, name, instance, shift


def _maybe_csv(args, **kwargs):
    if args.csv:
        append_rows(args.csv, [result_row(**kwargs)])


def _finish_extraction(runner, ma, out_path, mem_budget, keep_temp):
    logs = runner.worker_logs()
    if not logs:
        raise SimulationError("no decisions were logged; nothing to extract")
    layout = RecordLayout.for_automaton(ma)
    merged = os.path.join(runner.extract_dir, "merged.sal")
    records = concatenate(logs, merged, layout)
    rows = sort_dedup(merged, out_path, layout, mem_budget, keep_temp=keep_temp)
    print(f"extracted {rows} unique choices from {records} logged decisions "
          f"-> {out_path}")
    return rows


# Subcommands ------------------------------------------------------------------


def cmd_check(args):
    _, ma, name, instance, shift = _prepare(args)
    seed = _resolve_seed(args)
    t0 = time.perf_counter()
    with Runner(ma, shift, seed, workers=args.workers) as runner:
        est = estimate(
            runner, ("uniform",), args.rel_width, args.confidence,
            stream_base=derive_stream("check"),
        )
    wall = int((time.perf_counter() - t0) * 1000)
    print(f"uniform estimate: {est}")
    _maybe_csv(args, model=name, instance=instance, policy="uniform",
               direction="none", mode=args.mode, est=est, wall_time_ms=wall,
               seed=seed)
    return 0


def cmd_lss(args):
    _, ma, name, instance, shift = _prepare(args)
    seed = _resolve_seed(args)
    budget = SamplingBudget(args.strategies, args.runs, args.direction)
    extract_dir = None
    if args.extract:
        extract_dir = tempfile.mkdtemp(prefix="masched-extract-")
    try:
        return _run_lss(args, ma, name, instance, shift, seed, budget, extract_dir)
    finally:
        if extract_dir is not None and not args.keep_temp:
            shutil.rmtree(extract_dir, ignore_errors=True)


def _run_lss(args, ma, name, instance, shift, seed, budget, extract_dir):
    t0 = time.perf_counter()
    with Runner(ma, shift, seed, workers=args.workers,
                extract_dir=extract_dir) as runner:
        result = run_smart_sampling(runner, budget, label=f"lss-{args.direction}")
        print(f"sigma_{args.direction}: {result.sigma} "
              f"({result.rounds} rounds, {result.total_runs} elimination runs)")
        if args.trace_rounds:
            with open(args.trace_rounds, "w") as handle:
                handle.write("round,sigma,runs,mean\n")
                for entry in result.log:
                    mean = "" if entry.mean is None else repr(entry.mean)
                    handle.write(f"{entry.round},{entry.sigma},{entry.runs},{mean}\n")
        est = estimate(
            runner, ("lss", result.sigma), args.rel_width, args.confidence,
            stream_base=derive_stream("lss-final", args.direction),
            record=args.extract is not None,
        )
        print(f"estimate under sigma: {est}")
        rows = None
        if args.extract:
            rows = _finish_extraction(runner, ma, args.extract,
                                      args.mem_budget, args.keep_temp)
    wall = int((time.perf_counter() - t0) * 1000)
    _maybe_csv(args, model=name, instance=instance,
               policy=f"lss-{args.runs}-{args.strategies}",
               direction=args.direction, mode=args.mode, est=est,
               wall_time_ms=wall, seed=seed, table_rows=rows)
    return 0


def cmd_qlearn(args):
    _, ma, name, instance, shift = _prepare(args)
    seed = _resolve_seed(args)
    alpha = Schedule(args.alpha, args.alpha_final, args.episodes)
    epsilon = Schedule(args.epsilon, args.epsilon_final, args.episodes)
    t0 = time.perf_counter()
    table = run_qlearning(
        ma, shift, args.episodes, alpha, epsilon, args.gamma,
        seed=seed, direction=args.direction, key_mode=args.mode,
        max_memory_bytes=int(args.memory_gib * 1024**3),
    )
    print(f"learned {len(table)} table entries over {table.updates} updates")
    if args.qtable:
        write_qtable(args.qtable, table, ma.observation_scheme)
        print(f"q-table written to {args.qtable}")
    strategy = table.to_strategy_table(ma.observation_scheme, ma.alphabet)
    if args.extract:
        write_table(args.extract, strategy)
        print(f"greedy strategy table ({len(strategy)} rows) -> {args.extract}")
    table.require_mode(args.mode)
    with Runner(ma, shift, seed, workers=args.workers,
                shared={"greedy": _greedy_policy(table)}) as runner:
        est = estimate(
            runner, ("shared", "greedy"), args.rel_width, args.confidence,
            stream_base=derive_stream("qlearn-final", args.direction),
        )
    wall = int((time.perf_counter() - t0) * 1000)
    print(f"greedy-policy estimate: {est}")
    _maybe_csv(args, model=name, instance=instance,
               policy=f"qlearn-{args.episodes}", direction=args.direction,
               mode=args.mode, est=est, wall_time_ms=wall, seed=seed,
               table_rows=len(strategy))
    return 0


def _greedy_policy(table):
    from .policies import GreedyPolicy

    return GreedyPolicy(table.values, table.direction)


def cmd_replay(args):
    _, ma, name, instance, shift = _prepare(args)
    seed = _resolve_seed(args)
    table = read_table(args.table)
    policy = TablePolicy(table)
    t0 = time.perf_counter()
    with Runner(ma, shift, seed, workers=1, shared={"table": policy}) as runner:
        est = estimate(
            runner, ("shared", "table"), args.rel_width, args.confidence,
            stream_base=derive_stream("replay"),
        )
    wall = int((time.perf_counter() - t0) * 1000)
    print(f"table-playback estimate: {est}")
    print(f"decisions: {policy.counters['hits']} table hits, "
          f"{policy.counters['misses']} misses (uniform fallback)")
    _maybe_csv(args, model=name, instance=instance, policy="replay",
               direction="none", mode=args.mode, est=est, wall_time_ms=wall,
               seed=seed, table_rows=len(table))
    return 0


def cmd_extract(args):
    _, ma, _, _, _ = _prepare(args)
    layout = RecordLayout.for_automaton(ma)
    with tempfile.TemporaryDirectory(prefix="masched-extract-") as tmp:
        merged = os.path.join(tmp, "merged.sal")
        records = concatenate(args.logs, merged, layout)
        rows = sort_dedup(merged, args.out, layout, args.mem_budget,
                          keep_temp=args.keep_temp)
    print(f"{records} records -> {rows} unique rows -> {args.out}")
    return 0


def cmd_tree(args):
    table = read_table(args.table)
    tree = learn(table)
    print(f"tree: {tree.node_count} nodes, depth {tree.depth}, "
          f"{len(table)} table rows")
    if args.dot:
        with open(args.dot, "w") as handle:
            handle.write(to_dot(tree))
        print(f"dot written to {args.dot}")
    if args.out:
        write_tree(args.out, tree)
        print(f"tree written to {args.out}")
    return 0


def cmd_mine_gen(args):
    if args.validate_catalog:
        report = validate_catalog()
        for entry in report.entries:
            status = "ok" if entry.ok else "MISMATCH"
            print(f"instance {entry.instance:3d} {entry.row:13s} "
                  f"expected {entry.expected:3d} computed {entry.computed:3d} "
                  f"{status}")
        if not report.ok:
            raise ModelError(
                f"catalog validation failed for {len(report.failures())} rows"
            )
        print("catalog validation: all 21 values match")
        return 0
    if args.mine_config:
        config = read_mine_config(args.mine_config)
    elif args.instance is not None:
        config = catalog_config(args.instance, shift=args.shift or 200.0)
    else:
        raise ModelError("give --instance or --mine-config (or --validate-catalog)")
    s2d, d2s, ore = combinations(config)
    print(f"mine: {config.trucks} trucks, {config.shovels} shovels "
          f"({config.ore_shovels} ore), {config.dumps} dumps "
          f"({config.ore_dumps} ore)")
    print(f"dispatch combinations: shovel->dump {s2d}, dump->shovel {d2s}, "
          f"ore->ore {ore}")
    text = mine_text(config)
    parse(text)  # self-check before writing
    if args.out:
        with open(args.out, "w") as handle:
            handle.write(text)
        print(f"model written to {args.out}")
    else:
        sys.stdout.write(text)
    return 0


# bench ------------------------------------------------------------------------

BENCH_LSS = {
    "lss-small": (64, 512),
    "lss-10k-1k": (1000, 10000),
    "lss-100k-10k": (10000, 100000),
}
BENCH_QLEARN = {
    "qlearn-small": (2000, 0.5, 0.02, 1.0, 0.02),
    "qlearn-100k": (100000, 0.5, 0.02, 1.0, 0.02),
    "qlearn-3m": (3000000, 0.6, 0.01, 0.6, 0.02),
}
BENCH_DEFAULT = ("uniform", "lss-small", "qlearn-small")
BENCH_HEAVY = ("uniform", "lss-10k-1k", "lss-100k-10k", "qlearn-100k", "qlearn-3m")


def _bench_rows_done(path):
    if not path or not os.path.exists(path) or os.path.getsize(path) == 0:
        return set()
    return {
        (r["model"], r["instance"], r["policy"], r["direction"], r["mode"], r["seed"])
        for r in read_rows(path)
    }


def cmd_bench(args):
    seed = _resolve_seed(args)
    configs = BENCH_HEAVY if args.heavy else tuple(args.configs.split(","))
    instances = args.instance or [5]
    done = _bench_rows_done(args.csv)
    for instance in instances:
        config = catalog_config(instance, shift=args.shift or 200.0)
        model = build_mine(config)
        for mode in ("fo", "po"):
            ma = model.automaton(reward="load", mode=mode)
            for policy_name in configs:
                for direction in _bench_directions(policy_name):
                    key = ("mine", str(instance), policy_name, direction, mode,
                           str(seed))
                    if key in done:
                        print(f"skip {key} (already in {args.csv})")
                        continue
                    row = _bench_run(args, config, ma, instance, policy_name,
                                     direction, mode, seed)
                    append_rows(args.csv, [row])
                    print(f"bench {instance} {policy_name} {direction} {mode}: "
                          f"mean {row['mean']}")
    return 0


def _bench_directions(policy_name):
    return ("none",) if policy_name == "uniform" else ("max", "min")


def _bench_run(args, config, ma, instance, policy_name, direction, mode, seed):
    label = f"bench-{instance}-{policy_name}-{direction}-{mode}"
    t0 = time.perf_counter()
    table_rows = None
    tree_nodes = None
    if policy_name == "uniform":
        with Runner(ma, config.shift, seed, workers=args.workers) as runner:
            est = estimate(runner, ("uniform",), args.rel_width, args.confidence,
                           stream_base=derive_stream(label))
    elif policy_name in BENCH_LSS:
        strategies, runs = BENCH_LSS[policy_name]
        extract_dir = tempfile.mkdtemp(prefix="masched-bench-")
        try:
            with Runner(ma, config.shift, seed, workers=args.workers,
                        extract_dir=extract_dir) as runner:
                result = run_smart_sampling(
                    runner, SamplingBudget(strategies, runs, direction), label=label
                )
                est = estimate(runner, ("lss", result.sigma), args.rel_width,
                               args.confidence,
                               stream_base=derive_stream(label, "final"),
                               record=True)
                table_rows, tree_nodes = _bench_tree(runner, ma, args)
        finally:
            shutil.rmtree(extract_dir, ignore_errors=True)
    elif policy_name in BENCH_QLEARN:
        episodes, a0, a1, e0, e1 = BENCH_QLEARN[policy_name]
        table = run_qlearning(
            ma, config.shift, episodes,
            Schedule(a0, a1, episodes), Schedule(e0, e1, episodes),
            seed=derive_stream(seed, label) & 0xFFFFFFFF, direction=direction,
            key_mode=mode,
        )
        strategy = table.to_strategy_table(ma.observation_scheme, ma.alphabet)
        table_rows = len(strategy)
        try:
            tree_nodes = learn(strategy).node_count
        except EmptyStrategyError:
            tree_nodes = None
        with Runner(ma, config.shift, seed, workers=args.workers,
                    shared={"greedy": _greedy_policy(table)}) as runner:
            est = estimate(runner, ("shared", "greedy"), args.rel_width,
                           args.confidence, stream_base=derive_stream(label, "final"))
    else:
        raise ModelError(f"unknown bench configuration {policy_name!r}")
    wall = int((time.perf_counter() - t0) * 1000)
    return result_row(
        model="mine", instance=str(instance), policy=policy_name,
        direction=direction, mode=mode, est=est, wall_time_ms=wall, seed=seed,
        table_rows=table_rows, tree_nodes=tree_nodes,
    )


def _bench_tree(runner, ma, args):
    layout = RecordLayout.for_automaton(ma)
    logs = runner.worker_logs()
    if not logs:
        return 0, None
    merged = os.path.join(runner.extract_dir, "merged.sal")
    concatenate(logs, merged, layout)
    strat_path = os.path.join(runner.extract_dir, "strategy.strat")
    rows = sort_dedup(merged, strat_path, layout, DEFAULT_MEM_BUDGET)
    if rows == 0:
        return 0, None
    tree = learn(read_table(strat_path))
    return rows, tree.node_count


# Parser -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(
        prog="masched",
        description="Statistical model checking and strategy synthesis "
                    "for Markov automata networks.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="command")

    check = subs.add_parser("check", help="uniform-random baseline estimate")
    _add_model_args(check)
    _add_run_args(check)
    check.set_defaults(func=cmd_check)

    lss = subs.add_parser("lss", help="smart strategy sampling")
    _add_model_args(lss)
    _add_run_args(lss)
    lss.add_argument("-N", "--strategies", type=int, required=True,
                     help="strategy budget (identifiers sampled)")
    lss.add_argument("-K", "--runs", type=int, required=True,
                     help="simulation runs per elimination round")
    group = lss.add_mutually_exclusive_group()
    group.add_argument("--max", dest="direction", action="store_const",
                       const="max", help="maximise (default)")
    group.add_argument("--min", dest="direction", action="store_const",
                       const="min", help="minimise")
    lss.set_defaults(direction="max")
    lss.add_argument("--trace-rounds", help="write the round log CSV here")
    lss.add_argument("--extract", help="extract the played strategy table here")
    lss.add_argument("--mem-budget", type=int, default=DEFAULT_MEM_BUDGET,
                     help="external-sort memory budget in bytes")
    lss.add_argument("--keep-temp", action="store_true",
                     help="keep external-sort chunk files")
    lss.set_defaults(func=cmd_lss)

    qlearn = subs.add_parser("qlearn", help="tabular Q-learning")
    _add_model_args(qlearn)
    _add_run_args(qlearn)
    qlearn.add_argument("--episodes", type=int, required=True)
    qlearn.add_argument("--alpha", type=float, default=0.5,
                        help="initial learning rate (default 0.5)")
    qlearn.add_argument("--alpha-final", type=float, default=0.02)
    qlearn.add_argument("--epsilon", type=float, default=1.0,
                        help="initial exploration likelihood (default 1.0)")
    qlearn.add_argument("--epsilon-final", type=float, default=0.02)
    qlearn.add_argument("--gamma", type=float, default=1.0)
    group = qlearn.add_mutually_exclusive_group()
    group.add_argument("--max", dest="direction", action="store_const",
                       const="max", help="maximise (default)")
    group.add_argument("--min", dest="direction", action="store_const",
                       const="min", help="minimise")
    qlearn.set_defaults(direction="max")
    qlearn.add_argument("--qtable", help="dump the learned table here")
    qlearn.add_argument("--extract", help="write the greedy strategy table here")
    qlearn.add_argument("--memory-gib", type=float, default=8.0,
                        help="Q-table memory budget (default 8 GiB)")
    qlearn.set_defaults(func=cmd_qlearn)

    replay = subs.add_parser("replay", help="estimate under a strategy table")
    _add_model_args(replay)
    _add_run_args(replay)
    replay.add_argument("--table", required=True, help="strategy table (.strat)")
    replay.set_defaults(func=cmd_replay)

    extract = subs.add_parser("extract", help="sort+dedup choice logs into a table")
    _add_model_args(extract)
    extract.add_argument("--logs", nargs="+", required=True,
                         help="worker choice logs (.sal)")
    extract.add_argument("--out", required=True, help="output table (.strat)")
    extract.add_argument("--mem-budget", type=int, default=DEFAULT_MEM_BUDGET)
    extract.add_argument("--keep-temp", action="store_true")
    extract.set_defaults(func=cmd_extract)

    tree = subs.add_parser("tree", help="learn a decision tree from a table")
    tree.add_argument("--table", required=True, help="strategy table (.strat)")
    tree.add_argument("--dot", help="write DOT here")
    tree.add_argument("--out", help="write the compact tree text here")
    tree.set_defaults(func=cmd_tree)

    gen = subs.add_parser("mine-gen", help="generate an open-pit mine model")
    gen.add_argument("--instance", type=int,
                     help=f"catalog instance, one of {sorted(CATALOG)}")
    gen.add_argument("--mine-config", help="mine configuration file")
    gen.add_argument("--shift", type=float, default=None)
    gen.add_argument("--out", help="write the .man model here (default stdout)")
    gen.add_argument("--validate-catalog", action="store_true",
                     help="recompute and check the published combination counts")
    gen.set_defaults(func=cmd_mine_gen)

    bench = subs.add_parser("bench", help="run a configuration grid, append to CSV")
    bench.add_argument("--instance", type=int, action="append",
                       help="catalog instance (repeatable; default 5)")
    bench.add_argument("--configs", default=",".join(BENCH_DEFAULT),
                       help=f"comma list from "
                            f"{sorted(BENCH_LSS) + sorted(BENCH_QLEARN) + ['uniform']}")
    bench.add_argument("--heavy-budgets", dest="heavy", action="store_true",
                       help="use the heavyweight run configurations instead of "
                            "the desk-scale defaults")
    bench.add_argument("--shift", type=float, default=None)
    _add_run_args(bench)
    bench.set_defaults(func=cmd_bench, csv="results.csv")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    if not getattr(args, "func", None):
        parser.print_help()
        return 1
    try:
        return args.func(args) or 0
    except ConsistencyError as exc:
        print(f"consistency error: {exc}", file=sys.stderr)
        return 4
    except (ParseError, ModelError) as exc:
        print(f"model error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"model error: {exc}", file=sys.stderr)
        return 2
    except (SimulationError, ResourceError, EmptyStrategyError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 3
    except MaschedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
