"""Time-bounded simulation of closed Markov automata under a policy.

One run walks the automaton from its initial state until model time
exceeds the bound `T`. Markovian states sample a sojourn from the
exponential distribution with the state's exit rate (inverse transform,
`-ln(u)/E` with `u` in (0,1]) and pick the branch in proportion to its
rate; the residence reward contribution is `min(sojourn, T - t) * rr`,
so the final partial sojourn still pays rate reward up to the bound.
A Markovian branch reward is only collected if the transition completes
at or before the bound; a probabilistic transition enabled exactly at
`t == T` is still taken (and its branch reward collected), consistent
with the loop guard.

Randomness comes from per-run Philox streams (a 64-bit counter-based
generator) keyed by `(seed, stream)`, so every run is reproducible and
independent of worker scheduling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .automata import MarkovAutomaton, MarkovTransition
from .errors import SimulationError

DEFAULT_STEP_CAP = 10**8
_RNG_BLOCK = 256
_FNV64_OFFSET = 0xCBF29CE484222325
_FNV64_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


def derive_stream(*parts) -> int:
    """Fold integers/strings into a 64-bit stream index (FNV-1a)."""
    h = _FNV64_OFFSET
    for part in parts:
        if isinstance(part, str):
            data = part.encode()
        else:
            data = (int(part) & _MASK64).to_bytes(8, "little")
        for byte in data:
            h ^= byte
            h = (h * _FNV64_PRIME) & _MASK64
    return h


@dataclass(frozen=True)
class RngStream:
    """Identifier of one reproducible random stream: equal (seed, stream)
    pairs yield equal draw sequences on every platform."""

    seed: int
    stream: int = 0

    def generator(self) -> np.random.Generator:
        key = np.array([self.seed & _MASK64, self.stream & _MASK64], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class RunResult:
    reward: float
    steps: int
    time: float


# Node layouts produced by CompiledModel.info:
#   Markovian:     (0, exit_rate, cum_probs, targets, rewards, rate_reward)
#   probabilistic: (1, k, choices, observation) with one choice per transition
#                  laid out as (action, action_id, cum_probs, targets, rewards)
#   deadlock:      (2,)
_MARKOV, _PROB, _DEAD = 0, 1, 2


class CompiledModel:
    """Per-state transition tables, computed on first visit and cached.

    The cache is bounded: once `cache_cap` states have been stored, further
    states are recomputed on every visit, keeping memory constant on huge
    models while leaving the hot early states fast.
    """

    def __init__(self, ma: MarkovAutomaton, cache_cap: int = 1 << 20):
        self.ma = ma
        self.initial_state = ma.initial_state
        self.cache_cap = cache_cap
        self._cache: dict = {}

    def info(self, state):
        node = self._cache.get(state)
        if node is None:
            node = self._build(state)
            if len(self._cache) < self.cache_cap:
                self._cache[state] = node
        return node

    def _build(self, state):
        ma = self.ma
        prob, markov = ma.transitions(state)
        if prob:
            choices = []
            for tr in prob:
                cum = []
                acc = 0.0
                targets = []
                rewards = []
                for br in tr.branches:
                    acc += br.probability
                    cum.append(acc)
                    targets.append(br.target)
                    rewards.append(br.reward)
                choices.append(
                    (
                        tr.action,
                        ma.action_index(tr.action),
                        tuple(cum),
                        tuple(targets),
                        tuple(rewards),
                    )
                )
            return (_PROB, len(choices), tuple(choices), ma.observe(state))
        if markov:
            total = 0.0
            for tr in markov:
                total += tr.rate
            cum = []
            acc = 0.0
            targets = []
            rewards = []
            for tr in markov:
                acc += tr.rate / total
                cum.append(acc)
                targets.append(tr.target)
                rewards.append(tr.reward)
            return (_MARKOV, total, tuple(cum), tuple(targets), tuple(rewards),
                    ma.rate_reward(state))
        return (_DEAD,)

    def signature(self, state) -> tuple[str, ...]:
        node = self.info(state)
        if node[0] != _PROB:
            return ()
        return tuple(choice[0] for choice in node[2])


def sample_markovian(
    transitions: tuple[MarkovTransition, ...] | list[MarkovTransition],
    gen: np.random.Generator,
) -> tuple[float, MarkovTransition]:
    """Sample (sojourn, transition) from a nonempty Markovian race.

    The sojourn is exponential with the exit rate; the transition wins the
    race with probability rate / exit_rate.
    """
    if not transitions:
        raise SimulationError("sample_markovian needs a nonempty transition set")
    total = sum(tr.rate for tr in transitions)
    u1 = gen.random()
    sojourn = -math.log(1.0 - u1) / total
    u2 = gen.random()
    acc = 0.0
    chosen = transitions[-1]
    for tr in transitions:
        acc += tr.rate / total
        if u2 < acc:
            chosen = tr
            break
    return sojourn, chosen


def run(
    model: CompiledModel,
    policy,
    T: float,
    stream: RngStream,
    record: Optional[Callable[[tuple, int], None]] = None,
    step_cap: int = DEFAULT_STEP_CAP,
) -> RunResult:
    """Execute one simulation run; see the module docstring for semantics.

    `policy.choose(obs, node, draw)` resolves states with two or more
    probabilistic transitions; `record(obs, action_id)` is invoked for each
    such decision when given (single-option states are forced, not decided).
    """
    if T < 0:
        raise SimulationError(f"time bound must be non-negative, got {T}")
    gen = stream.generator()
    buf = gen.random(_RNG_BLOCK)
    bi = 0
    info = model.info
    log = math.log

    def draw() -> float:
        nonlocal buf, bi
        if bi >= _RNG_BLOCK:
            buf = gen.random(_RNG_BLOCK)
            bi = 0
        u = buf[bi]
        bi += 1
        return u

    s = model.initial_state
    t = 0.0
    r = 0.0
    steps = 0
    while t <= T:
        node = info(s)
        code = node[0]
        if code == _MARKOV:
            _, exit_rate, cum, targets, rewards, rr = node
            if bi >= _RNG_BLOCK - 1:
                buf = gen.random(_RNG_BLOCK)
                bi = 0
            u1 = buf[bi]
            u2 = buf[bi + 1]
            bi += 2
            sojourn = -log(1.0 - u1) / exit_rate
            j = 0
            last = len(cum) - 1
            while j < last and u2 >= cum[j]:
                j += 1
            remaining = T - t
            if sojourn <= remaining:
                r += sojourn * rr + rewards[j]
            else:
                r += remaining * rr
            t += sojourn
            s = targets[j]
        elif code == _PROB:
            k = node[1]
            choices = node[2]
            if k == 1:
                idx = 0
            else:
                idx = policy.choose(node[3], node, draw)
                if record is not None:
                    record(node[3], choices[idx][1])
            _, _, cum, targets, rewards = choices[idx]
            u = draw()
            j = 0
            last = len(cum) - 1
            while j < last and u >= cum[j]:
                j += 1
            r += rewards[j]
            s = targets[j]
        else:
            raise SimulationError(f"deadlock at t={t:.6g} in state {s!r}")
        steps += 1
        if steps > step_cap:
            raise SimulationError(
                f"step cap {step_cap} exceeded at t={t:.6g} "
                "(possible zero-time loop)"
            )
    return RunResult(r, steps, t)
