"""Sequential confidence-interval estimation and the results CSV contract.

`estimate` keeps running batches of simulation runs under a fixed policy
until the normal-quantile confidence interval is narrow enough relative
to the running mean: after each batch of `batch` runs (and at least
`n_min` in total), the half-width is `z * s / sqrt(n)` and sampling stops
once it is at most `rel_halfwidth * |mean|`. Batches are fanned out to
workers with disjoint random streams; the stopping decision falls between
batches only, so a result depends on (seed, batch size) and nothing else.

The CSV schema written here is the interchange contract consumed by the
report renderer.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from statistics import NormalDist
from typing import Optional

from .errors import MaschedError, SimulationError
from .parallel import Runner

DEFAULT_N_MIN = 500
DEFAULT_BATCH = 250
DEFAULT_N_MAX = 10**8

#: Column order of the results CSV. `table_rows` and `tree_nodes` are
#: filled by runs that extract a strategy and learn a tree; other runs
#: leave them empty.
CSV_COLUMNS = (
    "model",
    "instance",
    "policy",
    "direction",
    "mode",
    "mean",
    "halfwidth",
    "n",
    "wall_time_ms",
    "seed",
    "table_rows",
    "tree_nodes",
)


@dataclass(frozen=True)
class Estimate:
    mean: float
    half_width: float
    confidence: float
    n: int
    variance: float

    @property
    def low(self) -> float:
        return self.mean - self.half_width

    @property
    def high(self) -> float:
        return self.mean + self.half_width

    def __str__(self) -> str:
        return (
            f"{self.mean:.6g} ± {self.half_width:.3g} "
            f"({self.confidence:.0%} CI, n={self.n})"
        )


def compare_nonoverlap(e1: Estimate, e2: Estimate) -> bool:
    """True iff the two confidence intervals are disjoint."""
    return e1.high < e2.low or e2.high < e1.low


class _Welford:
    """Running mean/variance; exact zero variance for constant samples."""

    __slots__ = ("n", "mean", "m2")

    def __init__(self):
        self.n = 0
        self.mean = 0.0
        self.m2 = 0.0

    def add(self, x: float) -> None:
        self.n += 1
        delta = x - self.mean
        self.mean += delta / self.n
        self.m2 += delta * (x - self.mean)

    @property
    def variance(self) -> float:
        return self.m2 / (self.n - 1) if self.n > 1 else 0.0


def estimate(
    runner: Runner,
    policy_spec,
    rel_halfwidth: float,
    confidence: float,
    *,
    n_min: int = DEFAULT_N_MIN,
    batch: int = DEFAULT_BATCH,
    n_max: int = DEFAULT_N_MAX,
    abs_halfwidth: Optional[float] = None,
    stream_base: int = 0,
    record: bool = False,
) -> Estimate:
    """Estimate the expected run reward under `policy_spec`.

    Stream indices are `stream_base + i` for run i; callers keep invocations
    disjoint by deriving distinct bases. With `record=True` every decision
    of every run is appended to the runner's per-worker choice logs.
    """
    if rel_halfwidth <= 0:
        raise MaschedError(f"relative half-width must be positive, got {rel_halfwidth}")
    if not 0 < confidence < 1:
        raise MaschedError(f"confidence must be in (0,1), got {confidence}")
    z = NormalDist().inv_cdf((1 + confidence) / 2)
    acc = _Welford()
    while True:
        ids = range(stream_base + acc.n, stream_base + acc.n + batch)
        for reward in runner.rewards(policy_spec, ids, record=record):
            acc.add(reward)
        if acc.n < n_min:
            continue
        half = z * (acc.variance**0.5) / (acc.n**0.5)
        if half <= rel_halfwidth * abs(acc.mean):
            break
        if abs_halfwidth is not None and half <= abs_halfwidth:
            break
        if acc.n >= n_max:
            if acc.mean == 0.0:
                raise SimulationError(
                    f"relative stopping criterion unreachable: mean is 0 with "
                    f"sample std {acc.variance ** 0.5:.3g} after {acc.n} runs"
                )
            raise SimulationError(
                f"confidence interval did not converge within {n_max} runs"
            )
    return Estimate(acc.mean, half, confidence, acc.n, acc.variance)


# Results CSV ----------------------------------------------------------------


def append_rows(path: str, rows: list[dict]) -> None:
    """Append result rows, writing the header if the file is new."""
    fresh = not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=CSV_COLUMNS)
        if fresh:
            writer.writeheader()
        for row in rows:
            writer.writerow({col: row.get(col, "") for col in CSV_COLUMNS})


def read_rows(path: str) -> list[dict]:
    """Load a results CSV, enforcing the exact schema."""
    with open(path, newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None:
            raise MaschedError(f"{path}: no data")
        if tuple(reader.fieldnames) != CSV_COLUMNS:
            raise MaschedError(
                f"{path}: unexpected columns {reader.fieldnames}, "
                f"expected {list(CSV_COLUMNS)}"
            )
        return list(reader)


def result_row(
    *,
    model: str,
    instance: str,
    policy: str,
    direction: str,
    mode: str,
    est: Estimate,
    wall_time_ms: int,
    seed: int,
    table_rows: Optional[int] = None,
    tree_nodes: Optional[int] = None,
) -> dict:
    row = {
        "model": model,
        "instance": instance,
        "policy": policy,
        "direction": direction,
        "mode": mode,
        "mean": repr(est.mean),
        "halfwidth": repr(est.half_width),
        "n": est.n,
        "wall_time_ms": wall_time_ms,
        "seed": seed,
    }
    if table_rows is not None:
        row["table_rows"] = table_rows
    if tree_nodes is not None:
        row["tree_nodes"] = tree_nodes
    return row
