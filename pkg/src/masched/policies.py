"""Decision policies resolving probabilistic nondeterminism.

All policies decide from the state's observation, never the full state;
full observability is the special case of an identity projection. Four
kinds are provided:

- uniform: pick among the enabled transitions uniformly from the run's
  random stream;
- hash strategy: a 32-bit identifier `sigma` decides deterministically via
  `mix32(fnv1a32(bytes(sigma) || bytes(obs))) mod k`, so one integer is a
  complete memoryless strategy;
- greedy: argmax (or argmin) over learned state-action values;
- table playback: replay an extracted strategy table, falling back to the
  uniform choice (and counting the miss) for observations the table does
  not cover.

Byte encoding for hashing is pinned for cross-platform stability: sigma as
4 little-endian bytes, then each observation variable as a 4-byte
little-endian two's complement integer (booleans as 0/1). Golden vectors
live in `tests/vectors/lss_hash.tsv`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from .automata import Observation, ObsVariable
from .errors import ConsistencyError, ModelError

FNV32_OFFSET = 0x811C9DC5
FNV32_PRIME = 0x01000193
SIGMA_BITS = 32


def fnv1a32(data: bytes) -> int:
    h = FNV32_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV32_PRIME) & 0xFFFFFFFF
    return h


def mix32(h: int) -> int:
    """Avalanche finalizer (the murmur3 fmix32 constants).

    A plain multiply-xor fold is linear in the input bytes modulo small
    powers of two, which makes `hash mod k` decisions at related
    observations perfectly correlated; the finalizer removes that
    structure so each observation's decision behaves independently.
    """
    h ^= h >> 16
    h = (h * 0x85EBCA6B) & 0xFFFFFFFF
    h ^= h >> 13
    h = (h * 0xC2B2AE35) & 0xFFFFFFFF
    h ^= h >> 16
    return h


def strategy_hash(data: bytes) -> int:
    return mix32(fnv1a32(data))


def encode_observation(obs: Observation) -> bytes:
    """Fixed-width little-endian encoding used for hashing and choice logs."""
    return b"".join(int(v).to_bytes(4, "little", signed=True) for v in obs)


def lss_choose(sigma: int, obs: Observation, k: int) -> int:
    """Deterministic transition index for strategy `sigma` at `obs`.

    Pure function of its arguments: equal inputs give equal outputs across
    processes and platforms. Indices are 0-based.
    """
    if k < 1:
        raise ValueError("lss_choose needs at least one enabled transition")
    if k == 1:
        return 0
    data = (sigma & 0xFFFFFFFF).to_bytes(4, "little") + encode_observation(obs)
    return strategy_hash(data) % k


def uniform_choose(obs: Observation, k: int, draw) -> int:
    """Uniform index in [0, k) from the caller's random stream."""
    if k < 1:
        raise ValueError("uniform_choose needs at least one enabled transition")
    if k == 1:
        return 0
    return int(draw() * k)


def greedy_choose(
    qvalues: Mapping, obs: Observation, actions, direction: str = "max"
) -> int:
    """Index of the best-valued action; absent entries read as 0; ties go
    to the lowest action index."""
    if not actions:
        raise ValueError("greedy_choose needs a nonempty action list")
    if direction not in ("max", "min"):
        raise ValueError(f"unknown direction {direction!r}")
    best_idx = 0
    best = qvalues.get((obs, actions[0]), 0.0)
    for i in range(1, len(actions)):
        v = qvalues.get((obs, actions[i]), 0.0)
        if (v > best) if direction == "max" else (v < best):
            best_idx = i
            best = v
    return best_idx


@dataclass
class StrategyTable:
    """Deduplicated observation-to-action map with its interpretation
    context (observable variable declarations and the action alphabet)."""

    variables: tuple[ObsVariable, ...]
    alphabet: tuple[str, ...]
    rows: dict[Observation, str] = field(default_factory=dict)

    def add(self, obs: Observation, action: str) -> None:
        if action not in self.alphabet:
            raise ModelError(f"action {action!r} is not in the table alphabet")
        existing = self.rows.get(obs)
        if existing is not None and existing != action:
            raise ConsistencyError(
                f"observation {obs!r} maps to both {existing!r} and {action!r}"
            )
        self.rows[obs] = action

    def sorted_rows(self) -> list[tuple[Observation, str]]:
        return sorted(self.rows.items())

    def __len__(self) -> int:
        return len(self.rows)


def table_choose(
    table: StrategyTable, obs: Observation, actions, draw, counters=None
) -> int:
    """Replay a table row; fall back to the uniform choice on a miss.

    A stored action that is not currently enabled means the table was
    built under an observation map inconsistent with this model, which is
    surfaced as a `ConsistencyError` rather than silently re-chosen.
    """
    action = table.rows.get(obs)
    if action is None:
        if counters is not None:
            counters["misses"] = counters.get("misses", 0) + 1
        return uniform_choose(obs, len(actions), draw)
    try:
        return actions.index(action)
    except ValueError:
        raise ConsistencyError(
            f"table action {action!r} for observation {obs!r} is not enabled "
            f"(enabled: {list(actions)})"
        ) from None


# Policy objects plugged into the simulation engine. `node` is the engine's
# compiled probabilistic-state record; labels sit at node[2][i][0].


class UniformPolicy:
    name = "uniform"

    def choose(self, obs, node, draw):
        return int(draw() * node[1])


class LssPolicy:
    """Hash strategy with a per-observation memo (the hash is pure, so
    memoization is exact and keeps hot decisions cheap)."""

    name = "lss"

    def __init__(self, sigma: int):
        self.sigma = sigma & 0xFFFFFFFF
        self._memo: dict = {}

    def choose(self, obs, node, draw):
        k = node[1]
        cached = self._memo.get(obs)
        if cached is not None and cached[0] == k:
            return cached[1]
        idx = lss_choose(self.sigma, obs, k)
        self._memo[obs] = (k, idx)
        return idx


class GreedyPolicy:
    name = "greedy"

    def __init__(self, qvalues: Mapping, direction: str = "max"):
        self.qvalues = qvalues
        self.direction = direction

    def choose(self, obs, node, draw):
        actions = [choice[0] for choice in node[2]]
        return greedy_choose(self.qvalues, obs, actions, self.direction)


class TablePolicy:
    name = "table"

    def __init__(self, table: StrategyTable):
        self.table = table
        self.counters = {"misses": 0, "hits": 0}

    def choose(self, obs, node, draw):
        action = self.table.rows.get(obs)
        if action is None:
            self.counters["misses"] += 1
            return int(draw() * node[1])
        self.counters["hits"] += 1
        choices = node[2]
        for i in range(node[1]):
            if choices[i][0] == action:
                return i
        raise ConsistencyError(
            f"table action {action!r} for observation {obs!r} is not enabled "
            f"(enabled: {[c[0] for c in choices]})"
        )
