"""Acceptance gate: one test per criterion, each printing a PASS line with
its measured evidence. The mine pipeline criteria share one five-seed run
(module-scoped fixture) so the sampling work is done once.
"""

import math
import os
import time

import pytest

from masched.automata import ObsVariable
from masched.cli import main as cli_main
from masched.dsl import parse
from masched.dtree import Leaf, classify, learn
from masched.engine import CompiledModel, RngStream, derive_stream, run, sample_markovian
from masched.extract import (
    RecordLayout,
    concatenate,
    read_table,
    sort_dedup,
    table_to_records,
    write_records,
    write_table,
)
from masched.mine import build_mine, catalog_config, validate_catalog
from masched.parallel import Runner
from masched.policies import StrategyTable, UniformPolicy
from masched.qlearn import Schedule, run_qlearning
from masched.sampling import SamplingBudget, run_smart_sampling
from masched.stats import compare_nonoverlap, estimate, read_rows

from masched_fixtures import RACE_B, RACE_MODEL_TEXT, dag_mdp_optimum, make_absorbing_clock, make_dag_mdp

SEEDS = (101, 102, 103, 104, 105)
WORKERS = min(2, os.cpu_count() or 1)


def _report(name, ok, detail):
    print(f"{name} {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, f"{name}: {detail}"


# A1 ---------------------------------------------------------------------------


def test_a1_race_model_semantics():
    t0 = time.perf_counter()
    model = parse(RACE_MODEL_TEXT)
    ma = model.automaton(mode="fo")
    rate = sum(tr.rate for tr in ma.markov_transitions(RACE_B))
    assert rate == 7.0
    gen = RngStream(20240817, 0).generator()
    transitions = ma.markov_transitions(RACE_B)
    n = 100_000
    total = 0.0
    for _ in range(n):
        sojourn, _ = sample_markovian(transitions, gen)
        total += sojourn
    mean = total / n
    se = (1 / 7) / math.sqrt(n)
    elapsed = time.perf_counter() - t0
    ok = rate == 7.0 and abs(mean - 1 / 7) <= 3 * se and elapsed < 5.0
    _report("A1", ok,
            f"exit rate {rate}, sojourn mean {mean:.6f} vs 1/7={1/7:.6f} "
            f"(|err| {abs(mean - 1/7)/se:.2f} SEs), {elapsed:.2f}s")


# A2 ---------------------------------------------------------------------------


def test_a2_rate_reward_truncation():
    t0 = time.perf_counter()
    ma = make_absorbing_clock(rate=1.0, rate_reward=1.0)
    compiled = CompiledModel(ma)
    exact = all(
        run(compiled, UniformPolicy(), 200.0, RngStream(2024, i)).reward == 200.0
        for i in range(200)
    )
    with Runner(ma, 200.0, seed=2024) as runner:
        est = estimate(runner, ("uniform",), 0.01, 0.95)
    elapsed = time.perf_counter() - t0
    ok = (exact and est.mean == 200.0 and est.half_width == 0.0
          and est.n == 500 and elapsed < 5.0)
    _report("A2", ok,
            f"200 runs all exactly 200: {exact}, estimate {est.mean} ± "
            f"{est.half_width} at n={est.n}, {elapsed:.2f}s")


# A3 ---------------------------------------------------------------------------


def test_a3_qlearning_convergence():
    t0 = time.perf_counter()
    ma = make_dag_mdp()
    oracle = dag_mdp_optimum("max")
    episodes = 100_000
    table = run_qlearning(
        ma, 1.0, episodes,
        Schedule(0.5, 0.02, episodes), Schedule(1.0, 0.02, episodes),
        gamma=1.0, seed=31, direction="max",
    )
    from masched.policies import GreedyPolicy

    with Runner(ma, 1.0, seed=32,
                shared={"g": GreedyPolicy(table.values, "max")}) as runner:
        est = estimate(runner, ("shared", "g"), 0.01, 0.95)
    elapsed = time.perf_counter() - t0
    rel_err = abs(est.mean - oracle) / oracle
    ok = rel_err <= 0.05 and elapsed < 60.0
    _report("A3", ok,
            f"oracle {oracle}, greedy estimate {est.mean:.4f} "
            f"(rel err {rel_err:.3%}), {elapsed:.1f}s")


# A4 + A5 (shared five-seed mine pipeline) --------------------------------------


@pytest.fixture(scope="module")
def mine_pipeline(tmp_path_factory):
    config = catalog_config(5)
    model = build_mine(config)
    ma = model.automaton(reward="load", mode="po")
    layout = RecordLayout.for_automaton(ma)
    results = []
    t_total0 = time.perf_counter()
    tree_extra = 0.0
    for seed in SEEDS:
        extract_dir = str(tmp_path_factory.mktemp(f"extract-{seed}"))
        with Runner(ma, config.shift, seed, workers=WORKERS,
                    extract_dir=extract_dir) as runner:
            best = run_smart_sampling(
                runner, SamplingBudget(1000, 10_000, "max"), label="lss-max"
            )
            e_max = estimate(runner, ("lss", best.sigma), 0.01, 0.95,
                             stream_base=derive_stream("final-max"), record=True)
            worst = run_smart_sampling(
                runner, SamplingBudget(1000, 10_000, "min"), label="lss-min"
            )
            e_min = estimate(runner, ("lss", worst.sigma), 0.01, 0.95,
                             stream_base=derive_stream("final-min"))
            e_uni = estimate(runner, ("uniform",), 0.01, 0.95,
                             stream_base=derive_stream("uniform"))
            t_tree0 = time.perf_counter()
            merged = os.path.join(extract_dir, "merged.sal")
            concatenate(runner.worker_logs(), merged, layout)
            strat_path = os.path.join(extract_dir, "max.strat")
            sort_dedup(merged, strat_path, layout, 64 * 1024**2)
            tree = learn(read_table(strat_path))
            tree_extra += time.perf_counter() - t_tree0
        results.append({
            "seed": seed, "max": e_max, "min": e_min, "uniform": e_uni,
            "tree": tree,
        })
    return {
        "results": results,
        "wall": time.perf_counter() - t_total0,
        "tree_extra": tree_extra,
    }


def test_a4_lss_beats_uniform(mine_pipeline):
    hits = 0
    lines = []
    for r in mine_pipeline["results"]:
        above = (compare_nonoverlap(r["max"], r["uniform"])
                 and r["max"].low > r["uniform"].high)
        below = (compare_nonoverlap(r["min"], r["uniform"])
                 and r["min"].high < r["uniform"].low)
        hits += above and below
        lines.append(
            f"seed {r['seed']}: max {r['max'].mean:.2f}±{r['max'].half_width:.2f} "
            f"min {r['min'].mean:.2f}±{r['min'].half_width:.2f} "
            f"uniform {r['uniform'].mean:.2f}±{r['uniform'].half_width:.2f} "
            f"{'OK' if above and below else 'no separation'}"
        )
    wall = mine_pipeline["wall"]
    ok = hits >= 4 and wall < 600.0
    _report("A4", ok,
            f"{hits}/5 seeds separated, {wall:.0f}s total; " + "; ".join(lines))


def test_a5_three_node_tree(mine_pipeline):
    hits = 0
    details = []
    for r in mine_pipeline["results"]:
        tree = r["tree"]

        def leaves(node):
            if isinstance(node, Leaf):
                return [node.action]
            return leaves(node.low) + leaves(node.high)

        to_dump0 = all(action.endswith("dmp_0") for action in leaves(tree.root))
        good = tree.node_count <= 3 and to_dump0
        hits += good
        details.append(f"seed {r['seed']}: {tree.node_count} nodes "
                       f"{sorted(set(leaves(tree.root)))}")
    extra = mine_pipeline["tree_extra"]
    ok = hits >= 4 and extra < 120.0
    _report("A5", ok,
            f"{hits}/5 seeds gave a <=3-node dump-0 tree "
            f"(+{extra:.1f}s beyond the sampling runs); " + "; ".join(details))


# A6 ---------------------------------------------------------------------------


def test_a6_catalog_validation():
    t0 = time.perf_counter()
    report = validate_catalog()
    elapsed = time.perf_counter() - t0
    ok = report.ok and len(report.entries) == 21 and elapsed < 1.0
    _report("A6", ok,
            f"{sum(e.ok for e in report.entries)}/21 values match, "
            f"{elapsed * 1000:.0f}ms")


# A7 ---------------------------------------------------------------------------

INCONSISTENT_MODEL = """
process P {
  int(0..3) hidden = 0;
  observable int(0..1) vis = 0;

  [a] when hidden == 0 -> 1: { hidden = 1 };
  [b] when hidden == 0 -> 1: { hidden = 2 };
  [c] when hidden == 1 -> 1: { hidden = 3, vis = 1 };
  [d] when hidden == 1 -> 1: { hidden = 3, vis = 1 };
  rate(1) when hidden == 2 -> { hidden = 1 };
  rate(1) when hidden == 3 -> {};
}
"""


def test_a7_extraction_pipeline(tmp_path):
    t0 = time.perf_counter()
    layout = RecordLayout(
        (ObsVariable("x"), ObsVariable("y"), ObsVariable("b", is_bool=True)),
        ("north", "south", "east", "west"),
    )
    gen = RngStream(424242, 0).generator()
    n = 1_000_000
    xs = gen.integers(-4000, 4000, size=n)
    ys = gen.integers(0, 50, size=n)
    bs = gen.integers(0, 2, size=n)
    records = [
        (int(x), int(y), int(b), (int(x) * 31 + int(y) * 7 + int(b)) % 4)
        for x, y, b in zip(xs, ys, bs)
    ]
    merged = tmp_path / "merged.sal"
    write_records(str(merged), layout, records)
    out = tmp_path / "ext.strat"
    rows = sort_dedup(str(merged), str(out), layout, 64 * 1024**2)

    oracle = StrategyTable(layout.variables, layout.alphabet)
    for rec in sorted(set(records)):
        oracle.rows[rec[:-1]] = layout.alphabet[rec[-1]]
    oracle_path = tmp_path / "oracle.strat"
    write_table(str(oracle_path), oracle)
    identical = out.read_bytes() == oracle_path.read_bytes()

    table = read_table(str(out))
    again_src = tmp_path / "again.sal"
    write_records(str(again_src), layout, table_to_records(table, layout))
    again_out = tmp_path / "again.strat"
    sort_dedup(str(again_src), str(again_out), layout, 64 * 1024**2)
    idempotent = again_out.read_bytes() == out.read_bytes()

    viol = tmp_path / "viol.man"
    viol.write_text(INCONSISTENT_MODEL)
    code = cli_main([
        "lss", "--model", str(viol), "--po", "--max", "-N", "4", "-K", "8",
        "--shift", "1", "--seed", "3", "-j", "1", "--rel-width", "0.3",
        "--extract", str(tmp_path / "v.strat"),
    ])
    elapsed = time.perf_counter() - t0
    ok = (identical and idempotent and rows == len(oracle.rows)
          and code == 4 and elapsed < 30.0)
    _report("A7", ok,
            f"{n} records -> {rows} rows, oracle-identical {identical}, "
            f"idempotent {idempotent}, violating model exit code {code}, "
            f"{elapsed:.1f}s")


# A8 ---------------------------------------------------------------------------


def test_a8_smart_sampling_accounting(race_ma):
    t0 = time.perf_counter()
    with Runner(race_ma, 5.0, seed=12) as runner:
        result = run_smart_sampling(runner, SamplingBudget(8, 16))
        counted = runner.run_count
    elapsed = time.perf_counter() - t0
    ok = (result.total_runs == 48 and counted == 48 and result.rounds == 3
          and elapsed < 5.0)
    _report("A8", ok,
            f"{result.rounds} rounds, {result.total_runs} runs "
            f"(instrumented {counted}), {elapsed:.2f}s")


# A9 ---------------------------------------------------------------------------


def test_a9_losslessness_sweep():
    t0 = time.perf_counter()
    gen = RngStream(77, 7).generator()
    actions = ("north", "south", "east", "west")
    checked = 0
    for trial in range(100):
        nvars = 1 + int(gen.integers(0, 6))
        target = 1 + int(gen.integers(0, 500))
        rows = {}
        for _ in range(target * 2):
            if len(rows) >= target:
                break
            obs = tuple(int(v) for v in gen.integers(-40, 40, size=nvars))
            rows.setdefault(obs, actions[int(gen.integers(0, 4))])
        table = StrategyTable(
            tuple(ObsVariable(f"v{i}") for i in range(nvars)), actions
        )
        table.rows.update(rows)
        tree = learn(table)
        assert tree.node_count <= 2 * len(rows) - 1
        for obs, action in rows.items():
            assert classify(tree, obs) == action
        checked += len(rows)
    elapsed = time.perf_counter() - t0
    ok = elapsed < 30.0
    _report("A9", ok, f"100 tables, {checked} rows reproduced, {elapsed:.1f}s")


# A10 --------------------------------------------------------------------------


def test_a10_bench_reproducibility(tmp_path):
    t0 = time.perf_counter()
    csvs = []
    for tag in ("one", "two"):
        path = tmp_path / f"bench-{tag}.csv"
        code = cli_main([
            "bench", "--instance", "9", "--seed", "7", "-j", "4",
            "--csv", str(path),
        ])
        assert code == 0
        csvs.append(path)
    a_rows = read_rows(str(csvs[0]))
    b_rows = read_rows(str(csvs[1]))

    def strip(rows):
        return [{k: v for k, v in row.items() if k != "wall_time_ms"}
                for row in rows]

    elapsed = time.perf_counter() - t0
    ok = len(a_rows) > 0 and strip(a_rows) == strip(b_rows)
    _report("A10", ok,
            f"{len(a_rows)} rows identical modulo wall time across two "
            f"invocations, {elapsed:.0f}s")
