"""Smart sampling over hash strategies: sample, evaluate, halve, repeat.

A candidate set of `strategies` 32-bit identifiers is drawn uniformly
(with replacement; duplicates are retained). Each round gives every
surviving candidate `ceil(runs_per_round / survivors)` simulation runs,
ranks candidates by their mean reward, and keeps the better half
(`ceil(n/2)`, highest means when maximising, lowest when minimising)
until a single identifier remains. Candidates whose runs fail are ranked
worst; ties at the cut are broken toward the smaller identifier.

The survivor's elimination-round mean is a selection artifact, not an
estimate: callers obtain the reported value from a fresh confidence-
interval estimation under the surviving strategy (see `stats.estimate`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .engine import RngStream, derive_stream
from .errors import MaschedError
from .parallel import Runner


@dataclass(frozen=True)
class SamplingBudget:
    """Strategy budget, per-round run budget, and optimisation direction."""

    strategies: int
    runs_per_round: int
    direction: str = "max"

    def __post_init__(self):
        if self.strategies < 1:
            raise MaschedError("strategy budget must be at least 1")
        if self.strategies > self.runs_per_round:
            raise MaschedError(
                f"strategy budget {self.strategies} exceeds the per-round run "
                f"budget {self.runs_per_round}; need at least one run each"
            )
        if self.direction not in ("max", "min"):
            raise MaschedError(f"unknown direction {self.direction!r}")


@dataclass(frozen=True)
class RoundEntry:
    round: int
    sigma: int
    runs: int
    mean: float | None  # None when the strategy's runs failed


@dataclass(frozen=True)
class SamplingResult:
    sigma: int
    log: tuple[RoundEntry, ...]
    rounds: int
    total_runs: int


def sample_identifiers(seed: int, count: int, label: str = "lss") -> list[int]:
    """Uniform 32-bit strategy identifiers for a (seed, label) namespace."""
    gen = RngStream(seed, derive_stream(label, "identifiers")).generator()
    return [int(x) for x in gen.integers(0, 2**32, size=count, dtype=np.uint64)]


def run_smart_sampling(
    runner: Runner, budget: SamplingBudget, label: str = "lss"
) -> SamplingResult:
    """Sample the candidate identifiers and run the halving loop; `label`
    namespaces the random streams so independent invocations under one
    seed stay disjoint."""
    candidates = sample_identifiers(runner.seed, budget.strategies, label)
    return eliminate(runner, candidates, budget, label)


def eliminate(
    runner: Runner, candidates: list[int], budget: SamplingBudget, label: str = "lss"
) -> SamplingResult:
    """Halve `candidates` (duplicates allowed and retained) by empirical
    mean reward until one survives; see the module docstring."""
    log: list[RoundEntry] = []
    round_no = 0
    total_runs = 0
    maximise = budget.direction == "max"
    while len(candidates) > 1:
        round_no += 1
        per_strategy = math.ceil(budget.runs_per_round / len(candidates))
        jobs = []
        for pos in range(len(candidates)):
            ids = [
                derive_stream(label, round_no, pos, i) for i in range(per_strategy)
            ]
            jobs.append((("lss", candidates[pos]), ids, False))
        outcomes = runner.map_jobs(jobs)
        total_runs += per_strategy * len(candidates)
        ranked = []
        for pos, (sigma, (status, payload)) in enumerate(zip(candidates, outcomes)):
            mean = None if status == "err" else math.fsum(payload) / len(payload)
            log.append(RoundEntry(round_no, sigma, per_strategy, mean))
            failed = mean is None
            score = 0.0 if failed else (-mean if maximise else mean)
            ranked.append((failed, score, sigma, pos))
        ranked.sort()
        keep = math.ceil(len(candidates) / 2)
        candidates = [sigma for _, _, sigma, _ in ranked[:keep]]
        if all(entry[0] for entry in ranked):
            raise MaschedError(
                "every sampled strategy failed its simulation runs; "
                "last failure: see the round log"
            )
    return SamplingResult(candidates[0], tuple(log), round_no, total_runs)
