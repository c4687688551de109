"""Linked network models and on-the-fly parallel composition.

A linked model owns the evaluated constants, the global variable layout
(states are tuples of ints, booleans stored as 0/1), and per-process
compiled commands. Successor computation synchronizes probabilistic
commands that share an action label across all processes whose alphabet
contains it (guards conjoined, branch weights multiplied, updates merged),
runs Markovian commands interleaved, and applies maximal progress: if any
probabilistic transition is enabled, Markovian ones are suppressed.

Transition order is pinned so hash-based strategies are stable: action
labels ascending, then per-process command declaration order; Markovian
transitions in process/declaration order.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Optional

from ..automata import (
    Branch,
    MarkovAutomaton,
    MarkovTransition,
    ObsVariable,
    ObservationScheme,
    ProbTransition,
)
from ..errors import ModelError, SimulationError
from . import expr as E
from .parser import MarkovCommand, ModelDecl, ProbCommand

INT32_MIN = -(2**31)
INT32_MAX = 2**31 - 1


@dataclass(frozen=True)
class VarInfo:
    name: str
    is_bool: bool
    low: int
    high: int
    init: int
    observable: bool
    process: str
    slot: int


@dataclass
class _LinkedBranch:
    weight: Callable
    weight_const: Optional[float]
    assigns: tuple[tuple[int, Callable], ...]  # (slot, value closure)
    rewards: tuple[tuple[str, Callable], ...]  # (reward name, value closure)


@dataclass
class _LinkedProb:
    action: str
    guard: Callable
    branches: tuple[_LinkedBranch, ...]


@dataclass
class _LinkedMarkov:
    rate: Callable
    guard: Callable
    assigns: tuple[tuple[int, Callable], ...]
    rewards: tuple[tuple[str, Callable], ...]


class NetworkModel:
    """Executable network: constants, variable layout, compiled commands."""

    def __init__(self, decl: ModelDecl, constants: dict, variables: tuple[VarInfo, ...],
                 reward_names: tuple[str, ...], prob_by_action, markov_commands,
                 participants):
        self.decl = decl
        self.constants = constants
        self.variables = variables
        self.reward_names = reward_names
        self._prob_by_action = prob_by_action  # action -> [(proc, [cmds])]
        self._markov_commands = markov_commands
        self._participants = participants
        self._actions = tuple(sorted(prob_by_action))
        self.initial_state = tuple(v.init for v in variables)
        self._slot_by_name = {v.name: v.slot for v in variables}

    def __eq__(self, other):
        return isinstance(other, NetworkModel) and self.decl == other.decl

    @property
    def actions(self) -> tuple[str, ...]:
        return self._actions

    def observation_scheme(self, mode: str = "po") -> ObservationScheme:
        """Observables in declaration order. `fo` mode marks every variable
        observable; `po` follows the declarations."""
        if mode not in ("po", "fo"):
            raise ModelError(f"unknown observability mode {mode!r}")
        chosen = [
            v for v in self.variables if mode == "fo" or v.observable
        ]
        return ObservationScheme(
            tuple(ObsVariable(v.name, v.is_bool) for v in chosen),
            tuple(v.slot for v in chosen),
        )

    def _apply(self, state, assigns, action_desc):
        new = list(state)
        for slot, fn in assigns:
            value = fn(state)
            info = self.variables[slot]
            if isinstance(value, bool):
                value = int(value)
            if info.is_bool:
                if value not in (0, 1):
                    raise SimulationError(
                        f"assignment to boolean {info.name!r} in {action_desc} "
                        f"produced {value!r}"
                    )
            else:
                if not isinstance(value, int):
                    raise SimulationError(
                        f"assignment to {info.name!r} in {action_desc} produced "
                        f"non-integer {value!r}"
                    )
                if not (info.low <= value <= info.high):
                    raise SimulationError(
                        f"{info.name!r} left its bounds "
                        f"{info.low}..{info.high} in {action_desc}: {value}"
                    )
            new[slot] = value
        return tuple(new)

    def _branch_reward(self, state, rewards, reward_var):
        if reward_var is None:
            return 0.0
        total = 0.0
        for name, fn in rewards:
            if name == reward_var:
                total += fn(state)
        return total

    def successors(self, state, reward_var: Optional[str] = None):
        """Composed transitions of `state` after maximal progress.

        Returns `(prob, markov)` where at most one of the two is nonempty.
        """
        prob: list[ProbTransition] = []
        for action in self._actions:
            enabled_per_proc = []
            for _proc, cmds in self._prob_by_action[action]:
                enabled = [c for c in cmds if c.guard(state)]
                if not enabled:
                    break
                enabled_per_proc.append(enabled)
            else:
                for combo in itertools.product(*enabled_per_proc):
                    prob.append(self._compose(state, action, combo, reward_var))
        if prob:
            return tuple(prob), ()
        markov: list[MarkovTransition] = []
        for cmd in self._markov_commands:
            if not cmd.guard(state):
                continue
            rate = cmd.rate(state)
            if not rate > 0:
                raise SimulationError(
                    f"rate expression evaluated to {rate!r} (must be > 0)"
                )
            target = self._apply(state, cmd.assigns, "a Markovian command")
            reward = self._branch_reward(state, cmd.rewards, reward_var)
            markov.append(MarkovTransition(float(rate), target, reward))
        return (), tuple(markov)

    def _compose(self, state, action, combo, reward_var):
        weighted = []
        total = 0.0
        for parts in itertools.product(*(c.branches for c in combo)):
            weight = 1.0
            for br in parts:
                w = br.weight_const if br.weight_const is not None else br.weight(state)
                if w < 0:
                    raise SimulationError(
                        f"branch weight of action {action!r} evaluated to {w}"
                    )
                weight *= w
            if weight == 0.0:
                continue
            assigns = tuple(a for br in parts for a in br.assigns)
            target = self._apply(state, assigns, f"action {action!r}")
            reward = sum(
                self._branch_reward(state, br.rewards, reward_var) for br in parts
            )
            weighted.append((weight, target, reward))
            total += weight
        if total <= 0:
            raise SimulationError(
                f"branch weights of action {action!r} sum to {total} (must be > 0)"
            )
        return ProbTransition(
            action,
            tuple(Branch(w / total, target, rew) for w, target, rew in weighted),
        )

    def automaton(self, reward: Optional[str] = None, mode: str = "po") -> "NetworkMA":
        if reward is not None and reward not in self.reward_names:
            raise ModelError(f"unknown reward variable {reward!r}")
        return NetworkMA(self, reward, self.observation_scheme(mode))


class NetworkMA(MarkovAutomaton):
    """Automaton view of a network for one reward variable and observation
    mode. Immutable after construction; safe to share across workers."""

    def __init__(self, model: NetworkModel, reward: Optional[str],
                 scheme: ObservationScheme):
        self.model = model
        self.reward = reward
        self._scheme = scheme
        self.initial_state = model.initial_state
        self._alphabet = model.actions
        self._action_ids = {a: i for i, a in enumerate(self._alphabet)}

    @property
    def alphabet(self):
        return self._alphabet

    def action_index(self, action):
        return self._action_ids[action]

    def transitions(self, state):
        return self.model.successors(state, self.reward)

    def prob_transitions(self, state):
        return self.model.successors(state, self.reward)[0]

    def markov_transitions(self, state):
        return self.model.successors(state, self.reward)[1]

    def rate_reward(self, state):
        return 0.0

    def observe(self, state):
        return self._scheme.project(state)

    @property
    def observation_scheme(self):
        return self._scheme


# Linking --------------------------------------------------------------------


def link(decl: ModelDecl) -> NetworkModel:
    diagnostics: list[str] = []

    constants: dict = {}
    kinds: dict[str, str] = {}
    for const in decl.constants:
        if const.name in constants:
            diagnostics.append(f"duplicate constant {const.name!r}")
            continue
        try:
            value = E.eval_const(const.value, constants)
            if const.kind == "int":
                if isinstance(value, bool) or not isinstance(value, int):
                    raise ModelError(
                        f"constant {const.name!r} declared int but is {value!r}"
                    )
            elif const.kind == "real":
                if isinstance(value, bool):
                    raise ModelError(f"constant {const.name!r} declared real but is boolean")
                value = float(value)
            else:
                if not isinstance(value, (bool, int)) or value not in (0, 1, True, False):
                    raise ModelError(f"constant {const.name!r} declared bool but is {value!r}")
                value = bool(value)
            constants[const.name] = value
            kinds[const.name] = const.kind
        except ModelError as exc:
            diagnostics.append(str(exc))

    reward_names: list[str] = []
    for name in decl.rewards:
        if name in constants or name in reward_names:
            diagnostics.append(f"duplicate declaration {name!r}")
        else:
            reward_names.append(name)

    if not decl.processes:
        diagnostics.append("no processes")

    variables: list[VarInfo] = []
    var_kinds: dict[str, str] = {}
    owner: dict[str, str] = {}
    for proc in decl.processes:
        for var in proc.variables:
            if var.name in constants or var.name in reward_names or var.name in owner:
                diagnostics.append(
                    f"duplicate declaration {var.name!r} (names are global)"
                )
                continue
            try:
                if var.is_bool:
                    low, high = 0, 1
                else:
                    low = E.eval_const(var.low, constants)
                    high = E.eval_const(var.high, constants)
                    if not isinstance(low, int) or not isinstance(high, int):
                        raise ModelError(f"bounds of {var.name!r} must be integers")
                    if low > high:
                        raise ModelError(f"bounds of {var.name!r} are empty: {low}..{high}")
                    if low < INT32_MIN or high > INT32_MAX:
                        raise ModelError(f"bounds of {var.name!r} exceed 32-bit range")
                init = E.eval_const(var.init, constants)
                if isinstance(init, bool):
                    init = int(init)
                if var.is_bool:
                    if init not in (0, 1):
                        raise ModelError(f"initial value of boolean {var.name!r} is {init!r}")
                else:
                    if not isinstance(init, int):
                        raise ModelError(f"initial value of {var.name!r} is not an integer")
                    if not (low <= init <= high):
                        raise ModelError(
                            f"initial value {init} of {var.name!r} is outside {low}..{high}"
                        )
                variables.append(
                    VarInfo(var.name, var.is_bool, low, high, init,
                            var.observable, proc.name, len(variables))
                )
                var_kinds[var.name] = "bool" if var.is_bool else "int"
                owner[var.name] = proc.name
            except ModelError as exc:
                diagnostics.append(str(exc))

    slots = {v.name: v.slot for v in variables}
    kinds_all = dict(kinds)
    kinds_all.update(var_kinds)

    def check_kind(expr, want, what):
        try:
            kind = E.infer_kind(expr, kinds_all)
        except ModelError as exc:
            diagnostics.append(f"{what}: {exc}")
            return
        if want == "bool" and kind != "bool":
            diagnostics.append(f"{what} must be boolean, found {kind}")
        if want == "numeric" and kind == "bool":
            diagnostics.append(f"{what} must be numeric, found boolean")
        if want == "int" and kind != "int":
            diagnostics.append(f"{what} must be an integer expression, found {kind}")

    def link_update(update, proc, context):
        assigns = []
        rewards = []
        seen = set()
        for assignment in update.assignments:
            name = assignment.target
            if name in seen:
                diagnostics.append(f"{context}: duplicate assignment to {name!r}")
                continue
            seen.add(name)
            if name in reward_names:
                check_kind(assignment.value, "numeric", f"{context}: reward {name!r}")
                try:
                    rewards.append((name, E.bind(assignment.value, constants, slots)))
                except ModelError as exc:
                    diagnostics.append(f"{context}: {exc}")
                continue
            if name not in owner:
                diagnostics.append(f"{context}: assignment to undeclared {name!r}")
                continue
            if owner[name] != proc.name:
                diagnostics.append(
                    f"{context}: {name!r} belongs to process {owner[name]!r} "
                    f"and cannot be written from {proc.name!r}"
                )
                continue
            check_kind(
                assignment.value,
                "bool" if var_kinds[name] == "bool" else "int",
                f"{context}: assignment to {name!r}",
            )
            try:
                assigns.append((slots[name], E.bind(assignment.value, constants, slots)))
            except ModelError as exc:
                diagnostics.append(f"{context}: {exc}")
        return tuple(assigns), tuple(rewards)

    prob_by_action: dict[str, list] = {}
    markov_commands: list[_LinkedMarkov] = []
    for proc in decl.processes:
        local_prob: dict[str, list[_LinkedProb]] = {}
        for idx, cmd in enumerate(proc.commands):
            context = f"process {proc.name!r}, command {idx + 1}"
            if isinstance(cmd, ProbCommand):
                check_kind(cmd.guard, "bool", f"{context}: guard")
                branches = []
                for weight_expr, update in cmd.branches:
                    loose = E.free_names(weight_expr) - constants.keys()
                    if loose:
                        diagnostics.append(
                            f"{context}: branch weights must be constant, "
                            f"found {', '.join(sorted(loose))}"
                        )
                        continue
                    check_kind(weight_expr, "numeric", f"{context}: branch weight")
                    try:
                        wc = float(E.eval_const(weight_expr, constants))
                        assigns, rewards = link_update(update, proc, context)
                        branches.append(
                            _LinkedBranch(lambda s, _w=wc: _w, wc, assigns, rewards)
                        )
                    except ModelError as exc:
                        diagnostics.append(f"{context}: {exc}")
                try:
                    guard = E.bind(cmd.guard, constants, slots)
                except ModelError as exc:
                    diagnostics.append(f"{context}: {exc}")
                    continue
                local_prob.setdefault(cmd.action, []).append(
                    _LinkedProb(cmd.action, guard, tuple(branches))
                )
            else:
                assert isinstance(cmd, MarkovCommand)
                check_kind(cmd.guard, "bool", f"{context}: guard")
                check_kind(cmd.rate, "numeric", f"{context}: rate")
                try:
                    guard = E.bind(cmd.guard, constants, slots)
                    rate = E.bind(cmd.rate, constants, slots)
                    assigns, rewards = link_update(cmd.update, proc, context)
                except ModelError as exc:
                    diagnostics.append(f"{context}: {exc}")
                    continue
                markov_commands.append(_LinkedMarkov(rate, guard, assigns, rewards))
        for action, cmds in local_prob.items():
            prob_by_action.setdefault(action, []).append((proc.name, cmds))

    if diagnostics:
        err = ModelError(
            f"{len(diagnostics)} problem(s) linking model:\n  "
            + "\n  ".join(diagnostics)
        )
        err.diagnostics = diagnostics
        raise err

    participants = {a: tuple(p for p, _ in procs) for a, procs in prob_by_action.items()}
    return NetworkModel(
        decl,
        constants,
        tuple(variables),
        tuple(reward_names),
        prob_by_action,
        tuple(markov_commands),
        participants,
    )


# Pretty printing ------------------------------------------------------------


def _print_update(update) -> str:
    if not update.assignments:
        return "{}"
    inner = ", ".join(f"{a.target} = {E.to_text(a.value)}" for a in update.assignments)
    return "{ " + inner + " }"


def _print_guard(guard) -> str:
    if guard == E.Lit(True):
        return ""
    return f" when {E.to_text(guard)}"


def pretty_print(model) -> str:
    """Canonical text for a model or raw declaration tree.

    Parsing the output yields a declaration tree identical to the input's,
    which is the round-trip contract checked by the tests.
    """
    decl = model.decl if isinstance(model, NetworkModel) else model
    lines: list[str] = []
    for const in decl.constants:
        lines.append(f"const {const.kind} {const.name} = {E.to_text(const.value)};")
    for name in decl.rewards:
        lines.append(f"reward {name};")
    for proc in decl.processes:
        if lines:
            lines.append("")
        lines.append(f"process {proc.name} {{")
        for var in proc.variables:
            prefix = "  observable " if var.observable else "  "
            if var.is_bool:
                lines.append(f"{prefix}bool {var.name} = {E.to_text(var.init)};")
            else:
                lines.append(
                    f"{prefix}int({E.to_text(var.low)}..{E.to_text(var.high)}) "
                    f"{var.name} = {E.to_text(var.init)};"
                )
        if proc.variables and proc.commands:
            lines.append("")
        for cmd in proc.commands:
            if isinstance(cmd, ProbCommand):
                branches = " + ".join(
                    f"{E.to_text(w)}: {_print_update(u)}" for w, u in cmd.branches
                )
                lines.append(
                    f"  [{cmd.action}]{_print_guard(cmd.guard)} -> {branches};"
                )
            else:
                lines.append(
                    f"  rate({E.to_text(cmd.rate)}){_print_guard(cmd.guard)} "
                    f"-> {_print_update(cmd.update)};"
                )
        lines.append("}")
    return "\n".join(lines) + "\n"
