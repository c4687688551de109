import pytest

from masched.engine import derive_stream
from masched.errors import MaschedError, SimulationError
from masched.parallel import Runner
from masched.stats import (
    Estimate,
    append_rows,
    compare_nonoverlap,
    estimate,
    read_rows,
    result_row,
)

from masched_fixtures import make_absorbing_clock, make_coin_reward


def test_compare_nonoverlap():
    e = lambda m, h: Estimate(m, h, 0.95, 100, 1.0)
    assert compare_nonoverlap(e(10, 1), e(13, 1))
    assert not compare_nonoverlap(e(10, 2), e(11, 2))
    assert not compare_nonoverlap(e(10, 1), e(10, 1))
    assert compare_nonoverlap(e(13, 1), e(10, 1))  # order-independent


def test_zero_variance_stops_at_minimum():
    with Runner(make_absorbing_clock(), 200.0, seed=5) as runner:
        est = estimate(runner, ("uniform",), 0.01, 0.95, n_min=500, batch=250)
    assert est.mean == 200.0
    assert est.half_width == 0.0
    assert est.n == 500
    assert est.variance == 0.0


def test_sample_size_tracks_clt_prediction():
    # reward is 2 with probability 1/2, else 0: mean 1, std 1
    with Runner(make_coin_reward(), 1.0, seed=9) as runner:
        est = estimate(runner, ("uniform",), 0.05, 0.95, n_min=100, batch=100)
    predicted = (1.959964 * 1.0 / (0.05 * 1.0)) ** 2
    assert predicted / 2 <= est.n <= predicted * 2
    assert abs(est.mean - 1.0) <= 4 * est.half_width


def test_deterministic_and_worker_count_independent():
    results = []
    for workers in (1, 2):
        with Runner(make_coin_reward(), 1.0, seed=33, workers=workers) as runner:
            results.append(
                estimate(runner, ("uniform",), 0.05, 0.95, n_min=100, batch=100)
            )
    assert results[0] == results[1]


def test_coverage_calibration():
    # true mean 1.0; at least 90% of 200 independent 95% intervals cover it
    hits = 0
    with Runner(make_coin_reward(), 1.0, seed=101) as runner:
        for i in range(200):
            est = estimate(
                runner, ("uniform",), 0.2, 0.95, n_min=100, batch=100,
                stream_base=derive_stream("coverage", i),
            )
            if est.low <= 1.0 <= est.high:
                hits += 1
    assert hits >= 180


def test_monotone_effort():
    with Runner(make_coin_reward(), 1.0, seed=55) as runner:
        loose = estimate(runner, ("uniform",), 0.04, 0.95, n_min=50, batch=50,
                         stream_base=derive_stream("loose"))
        tight = estimate(runner, ("uniform",), 0.02, 0.95, n_min=50, batch=50,
                         stream_base=derive_stream("tight"))
    assert tight.n >= 3 * loose.n


def test_unreachable_criterion_errors():
    with Runner(make_coin_reward(), 1.0, seed=2) as runner:
        with pytest.raises(SimulationError, match="converge"):
            estimate(runner, ("uniform",), 1e-9, 0.95, n_min=50, batch=50,
                     n_max=200)


def test_absolute_fallback():
    with Runner(make_coin_reward(), 1.0, seed=2) as runner:
        est = estimate(runner, ("uniform",), 1e-9, 0.95, n_min=50, batch=50,
                       n_max=400, abs_halfwidth=0.5)
    assert est.half_width <= 0.5


def test_parameter_validation():
    runner = Runner(make_coin_reward(), 1.0, seed=1)
    with pytest.raises(MaschedError):
        estimate(runner, ("uniform",), 0.0, 0.95)
    with pytest.raises(MaschedError):
        estimate(runner, ("uniform",), 0.01, 1.5)
    runner.close()


def test_csv_round_trip(tmp_path):
    path = tmp_path / "results.csv"
    est = Estimate(1.5, 0.1, 0.95, 400, 0.8)
    append_rows(str(path), [
        result_row(model="mine", instance="5", policy="uniform",
                   direction="none", mode="po", est=est, wall_time_ms=12,
                   seed=7),
        result_row(model="mine", instance="5", policy="lss-512-64",
                   direction="max", mode="po", est=est, wall_time_ms=120,
                   seed=7, table_rows=2, tree_nodes=3),
    ])
    rows = read_rows(str(path))
    assert len(rows) == 2
    assert rows[0]["policy"] == "uniform"
    assert rows[0]["table_rows"] == ""
    assert rows[1]["tree_nodes"] == "3"
    assert float(rows[1]["mean"]) == 1.5


def test_csv_rejects_unknown_schema(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("model,nonsense\nx,1\n")
    with pytest.raises(MaschedError, match="unexpected columns"):
        read_rows(str(path))
