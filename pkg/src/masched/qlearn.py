"""Tabular Q-learning over observations for time-bounded rewards.

Episodes walk the automaton from its initial state. At every state with
two or more probabilistic transitions, an epsilon-greedy choice is made
(explore uniformly with probability eps_i, otherwise take the best-valued
action); then the walk continues through the no-choice suffix (Markovian
states and forced single-transition states), folding all rewards collected
on the way into the step reward r, until the next decision state or the
time bound. The table update is

    Q(obs, a) <- (1 - alpha_i) * Q(obs, a)
                 + alpha_i * (r + gamma * best_a' Q(obs'', a'))

where obs'' is the observation of the next decision state (0 if the bound
expired first) and `best` is max or min per the optimisation direction.
Single-transition states never receive entries. Absent entries read as 0.

An episode whose initial state is Markovian is generalized by walking to
the first decision state and folding the prefix reward into that state's
first update; if the bound expires during the prefix, the episode ends
without an update.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from .automata import MarkovAutomaton, Observation, ObservationScheme
from .engine import DEFAULT_STEP_CAP, CompiledModel, RngStream, derive_stream
from .errors import ConsistencyError, MaschedError, ResourceError, SimulationError
from .policies import StrategyTable, greedy_choose

#: Rough per-entry footprint (key tuple, float, dict slot) used to turn the
#: memory cap into an entry cap.
ENTRY_BYTES_ESTIMATE = 320
DEFAULT_MEMORY_BYTES = 8 * 1024**3

_PROB = 1
_DEAD = 2


@dataclass(frozen=True)
class Schedule:
    """Per-episode parameter schedule, non-increasing from initial to final.

    `value(1)` is exactly `initial` and `value(episodes)` exactly `final`;
    the only shape currently offered is linear interpolation in between.
    """

    initial: float
    final: float
    episodes: int
    shape: str = "linear"

    def __post_init__(self):
        if self.episodes < 1:
            raise MaschedError("schedule needs at least one episode")
        if self.final > self.initial:
            raise MaschedError(
                f"schedule must be non-increasing: {self.initial} -> {self.final}"
            )
        if self.shape != "linear":
            raise MaschedError(f"unknown schedule shape {self.shape!r}")

    def value(self, episode: int) -> float:
        if episode <= 1:
            return self.initial
        if episode >= self.episodes:
            return self.final
        frac = (episode - 1) / (self.episodes - 1)
        return self.initial + (self.final - self.initial) * frac


@dataclass
class QTable:
    """Learned state-action values plus the metadata needed to reuse them.

    `signatures` records, per observation, the enabled action labels in
    transition order the first time the observation was visited; later
    visits must agree (the observation map must not merge states with
    different signatures). `key_mode` stamps whether keys are partial or
    full observations; mixing modes between learning and playback is an
    error surfaced by the caller via this field.
    """

    key_mode: str
    direction: str
    episodes: int
    gamma: float
    alpha: Schedule
    epsilon: Schedule
    values: dict = field(default_factory=dict)
    signatures: dict = field(default_factory=dict)
    updates: int = 0

    def __len__(self) -> int:
        return len(self.values)

    def get(self, key, default=0.0):
        return self.values.get(key, default)

    def require_mode(self, mode: str) -> None:
        """Guard against replaying a table keyed under the other
        observability mode; the keys would silently never match."""
        if mode != self.key_mode:
            raise MaschedError(
                f"q-table was learned in {self.key_mode!r} mode and cannot "
                f"be used with {mode!r} observations"
            )

    def best(self, obs: Observation) -> float:
        """Best value over the observation's signature, absent entries 0."""
        sig = self.signatures.get(obs)
        if not sig:
            return 0.0
        values = [self.values.get((obs, a), 0.0) for a in sig]
        return max(values) if self.direction == "max" else min(values)

    def to_strategy_table(self, scheme: ObservationScheme, alphabet) -> StrategyTable:
        """Greedy strategy per observation, skipping observations whose
        entries are all zero (nothing was learned there, so playback would
        be an arbitrary tie-break, not a decision)."""
        table = StrategyTable(scheme.variables, tuple(alphabet))
        for obs, sig in sorted(self.signatures.items()):
            values = [self.values.get((obs, a), 0.0) for a in sig]
            if all(v == 0.0 for v in values):
                continue
            idx = greedy_choose(self.values, obs, sig, self.direction)
            table.add(obs, sig[idx])
        return table


def _advance(info, state, t, T, draw, min_choices, step_cap):
    """Walk Markovian states and forced choices until a state with at least
    `min_choices` probabilistic transitions, or past the bound.

    Returns (state, t, folded_reward, steps). The final crossing sojourn
    contributes rate reward up to the bound but no branch reward.
    """
    reward = 0.0
    steps = 0
    log = math.log
    while t <= T:
        node = info(state)
        code = node[0]
        if code == _PROB:
            if node[1] >= min_choices:
                return state, t, reward, steps
            choices = node[2]
            _, _, cum, targets, rewards = choices[0]
            u = draw()
            j = 0
            last = len(cum) - 1
            while j < last and u >= cum[j]:
                j += 1
            reward += rewards[j]
            state = targets[j]
        elif code == _DEAD:
            raise SimulationError(f"deadlock at t={t:.6g} in state {state!r}")
        else:
            _, exit_rate, cum, targets, rewards, rr = node
            u1 = draw()
            u2 = draw()
            sojourn = -log(1.0 - u1) / exit_rate
            j = 0
            last = len(cum) - 1
            while j < last and u2 >= cum[j]:
                j += 1
            remaining = T - t
            if sojourn <= remaining:
                reward += sojourn * rr + rewards[j]
            else:
                reward += remaining * rr
            t += sojourn
            state = targets[j]
        steps += 1
        if steps > step_cap:
            raise SimulationError(f"step cap {step_cap} exceeded during episode")
    return state, t, reward, steps


def markovian_start_prefix(
    ma: MarkovAutomaton, T: float, stream: RngStream
) -> tuple[Optional[object], float, float]:
    """Simulate from the initial state to the first probabilistic state.

    Returns `(state, prefix_reward, time)`; `state` is None when the bound
    expired before any probabilistic state was reached. An initial state
    that is already probabilistic returns immediately with zero reward.
    """
    compiled = CompiledModel(ma)
    gen = stream.generator()
    state, t, reward, _ = _advance(
        compiled.info, ma.initial_state, 0.0, T, lambda: gen.random(),
        1, DEFAULT_STEP_CAP,
    )
    if t > T:
        return None, reward, t
    return state, reward, t


def run_qlearning(
    ma: MarkovAutomaton,
    T: float,
    episodes: int,
    alpha: Schedule,
    epsilon: Schedule,
    gamma: float = 1.0,
    *,
    seed: int,
    direction: str = "max",
    key_mode: str = "po",
    max_memory_bytes: int = DEFAULT_MEMORY_BYTES,
    step_cap: int = DEFAULT_STEP_CAP,
) -> QTable:
    """Learn a Q-table over `episodes` episodes; see the module docstring."""
    if episodes < 1:
        raise MaschedError("need at least one episode")
    if not 0 < gamma <= 1:
        raise MaschedError(f"discount factor must be in (0,1], got {gamma}")
    if direction not in ("max", "min"):
        raise MaschedError(f"unknown direction {direction!r}")
    table = QTable(key_mode, direction, episodes, gamma, alpha, epsilon)
    values = table.values
    signatures = table.signatures
    max_entries = max(1, max_memory_bytes // ENTRY_BYTES_ESTIMATE)
    compiled = CompiledModel(ma)
    info = compiled.info
    initial = ma.initial_state
    maximise = direction == "max"

    for episode in range(1, episodes + 1):
        a_i = alpha.value(episode)
        e_i = epsilon.value(episode)
        gen = RngStream(seed, derive_stream("qlearn-episode", episode)).generator()
        buf = gen.random(128)
        bi = 0

        def draw():
            nonlocal buf, bi
            if bi >= 128:
                buf = gen.random(128)
                bi = 0
            u = buf[bi]
            bi += 1
            return u

        state, t, carry, _ = _advance(info, initial, 0.0, T, draw, 2, step_cap)
        while t <= T:
            node = info(state)
            k = node[1]
            choices = node[2]
            obs = node[3]
            sig = tuple(choice[0] for choice in choices)
            known = signatures.get(obs)
            if known is None:
                signatures[obs] = sig
            elif known != sig:
                raise ConsistencyError(
                    f"observation {obs!r} has signatures {known!r} and {sig!r}; "
                    "the observation map merges states with different actions"
                )
            if draw() < e_i:
                idx = int(draw() * k)
            else:
                idx = greedy_choose(values, obs, sig, direction)
            action, _, cum, targets, rewards = choices[idx]
            u = draw()
            j = 0
            last = len(cum) - 1
            while j < last and u >= cum[j]:
                j += 1
            step_reward = carry + rewards[j]
            carry = 0.0
            state, t, suffix_reward, _ = _advance(
                info, targets[j], t, T, draw, 2, step_cap
            )
            step_reward += suffix_reward
            if t > T:
                bootstrap = 0.0
            else:
                nxt = info(state)
                nxt_obs = nxt[3]
                nxt_sig = tuple(choice[0] for choice in nxt[2])
                vals = [values.get((nxt_obs, a), 0.0) for a in nxt_sig]
                bootstrap = max(vals) if maximise else min(vals)
            key = (obs, action)
            old = values.get(key, 0.0)
            values[key] = (1.0 - a_i) * old + a_i * (step_reward + gamma * bootstrap)
            table.updates += 1
            if len(values) > max_entries:
                raise ResourceError(
                    f"Q-table grew to {len(values)} entries "
                    f"(~{len(values) * ENTRY_BYTES_ESTIMATE / 1024 ** 2:.0f} MiB "
                    f"estimated), exceeding the "
                    f"{max_memory_bytes / 1024 ** 3:.1f} GiB budget"
                )
    return table


# Text dump / load -----------------------------------------------------------


def write_qtable(path: str, table: QTable, scheme: ObservationScheme) -> None:
    """Dump a Q-table; every signature action of a known observation gets a
    row (unexplored ones as 0), so signatures and tie-break order survive
    the round trip."""
    with open(path, "w") as handle:
        handle.write("masched-qtable 1\n")
        handle.write(f"key_mode: {table.key_mode}\n")
        handle.write(f"direction: {table.direction}\n")
        handle.write(f"episodes: {table.episodes}\n")
        handle.write(f"gamma: {table.gamma!r}\n")
        handle.write(
            f"alpha: {table.alpha.shape} {table.alpha.initial!r} {table.alpha.final!r}\n"
        )
        handle.write(
            f"epsilon: {table.epsilon.shape} {table.epsilon.initial!r} "
            f"{table.epsilon.final!r}\n"
        )
        handle.write("vars: " + " ".join(
            f"{v.name}:{'bool' if v.is_bool else 'int'}" for v in scheme.variables
        ) + "\n")
        handle.write("rows:\n")
        for obs, sig in sorted(table.signatures.items()):
            for action in sig:
                value = table.values.get((obs, action), 0.0)
                cells = " ".join(str(int(v)) for v in obs)
                handle.write(f"{cells} | {action} | {value!r}\n")


def read_qtable(path: str) -> QTable:
    with open(path) as handle:
        lines = [line.rstrip("\n") for line in handle]
    if not lines or not lines[0].startswith("masched-qtable"):
        raise MaschedError(f"{path}: not a q-table dump")
    header = {}
    body_at = None
    for i, line in enumerate(lines[1:], 1):
        if line == "rows:":
            body_at = i + 1
            break
        key, _, value = line.partition(": ")
        header[key] = value
    if body_at is None:
        raise MaschedError(f"{path}: missing rows section")
    shape_a, init_a, fin_a = header["alpha"].split()
    shape_e, init_e, fin_e = header["epsilon"].split()
    episodes = int(header["episodes"])
    table = QTable(
        header["key_mode"],
        header["direction"],
        episodes,
        float(header["gamma"]),
        Schedule(float(init_a), float(fin_a), episodes, shape_a),
        Schedule(float(init_e), float(fin_e), episodes, shape_e),
    )
    for line in lines[body_at:]:
        if not line.strip():
            continue
        cells, action, value = (part.strip() for part in line.split(" | "))
        obs = tuple(int(c) for c in cells.split())
        table.values[(obs, action)] = float(value)
        table.signatures.setdefault(obs, ())
        table.signatures[obs] = table.signatures[obs] + (action,)
    return table
