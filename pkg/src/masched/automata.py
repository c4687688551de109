"""Closed Markov automata: transitions, rewards, and observation projection.

A Markov automaton mixes probabilistic transitions (an action label plus a
distribution over successor states) with Markovian transitions (an
exponential rate plus a single successor). States are opaque immutable
valuations; equality is value equality so states can key dictionaries and
deduplication passes.

Models are queried state-by-state (`prob_transitions`, `markov_transitions`)
rather than enumerated up front, which keeps simulation memory independent
of the reachable state space.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Hashable, Iterable, Optional, Sequence

from .errors import ModelError

State = Hashable
Observation = tuple

#: Two probabilities are considered equal within this tolerance; distributions
#: whose weights sum to 1 within it are rescaled to sum exactly 1.
DISTRIBUTION_TOLERANCE = 1e-9


@dataclass(frozen=True)
class Branch:
    """One outcome of a probabilistic transition."""

    probability: float
    target: State
    reward: float = 0.0


@dataclass(frozen=True)
class ProbTransition:
    """Action-labelled transition with a distribution over successors."""

    action: str
    branches: tuple[Branch, ...]


@dataclass(frozen=True)
class MarkovTransition:
    """Exponentially delayed transition with a single successor."""

    rate: float
    target: State
    reward: float = 0.0


@dataclass(frozen=True)
class ObsVariable:
    name: str
    is_bool: bool = False


class ObservationScheme:
    """Projection of a state valuation onto the declared observable variables.

    `indices` give the positions of the observable variables within the
    state tuple, in declaration order. Projection preserves that order and
    discards everything else; projecting an already-projected tuple with the
    same scheme is the identity once indices are the full range.
    """

    __slots__ = ("variables", "indices")

    def __init__(self, variables: Sequence[ObsVariable], indices: Sequence[int]):
        if len(variables) != len(indices):
            raise ModelError("observation scheme variables/indices length mismatch")
        self.variables = tuple(variables)
        self.indices = tuple(indices)

    def project(self, state: Sequence) -> Observation:
        return tuple(state[i] for i in self.indices)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables)

    def __eq__(self, other):
        return (
            isinstance(other, ObservationScheme)
            and self.variables == other.variables
            and self.indices == other.indices
        )

    def __repr__(self):
        return f"ObservationScheme({list(self.names)})"


def observe(state: Sequence, scheme: ObservationScheme) -> Observation:
    """Project `state` onto the observables declared by `scheme`."""
    return scheme.project(state)


class MarkovAutomaton:
    """Interface shared by explicit and network-composed automata.

    Subclasses provide per-state transition queries; everything else
    (exit rates, signatures, deadlock checks) derives from those.
    """

    initial_state: State

    @property
    def alphabet(self) -> tuple[str, ...]:
        raise NotImplementedError

    def prob_transitions(self, state: State) -> tuple[ProbTransition, ...]:
        raise NotImplementedError

    def markov_transitions(self, state: State) -> tuple[MarkovTransition, ...]:
        raise NotImplementedError

    def transitions(
        self, state: State
    ) -> tuple[tuple[ProbTransition, ...], tuple[MarkovTransition, ...]]:
        """Both transition kinds in one query; subclasses that compute them
        together override this."""
        return self.prob_transitions(state), self.markov_transitions(state)

    def rate_reward(self, state: State) -> float:
        return 0.0

    def observe(self, state: State) -> Observation:
        """Default: full observability (identity on tuple states)."""
        return state if isinstance(state, tuple) else (state,)

    @property
    def observation_scheme(self) -> Optional[ObservationScheme]:
        return None

    def action_index(self, action: str) -> int:
        return self.alphabet.index(action)


def exit_rate(ma: MarkovAutomaton, state: State) -> float:
    """Sum of all Markovian rates leaving `state`; 0 when there are none."""
    return sum(tr.rate for tr in ma.markov_transitions(state))


def embedded_probabilities(ma: MarkovAutomaton, state: State) -> tuple[float, ...]:
    """Probability of each Markovian branch in the race: rate / exit rate."""
    total = exit_rate(ma, state)
    if total == 0.0:
        return ()
    return tuple(tr.rate / total for tr in ma.markov_transitions(state))


def deadlock_check(ma: MarkovAutomaton, state: State) -> bool:
    """True iff the state has neither probabilistic nor Markovian moves."""
    return not ma.prob_transitions(state) and not ma.markov_transitions(state)


def action_signature(ma: MarkovAutomaton, state: State) -> tuple[str, ...]:
    """Ordered action labels of the probabilistic transitions of `state`.

    States projected to the same observation must agree on this signature;
    the simulation and extraction layers check it, they do not assume it.
    """
    return tuple(tr.action for tr in ma.prob_transitions(state))


class _ReducedView(MarkovAutomaton):
    """Maximal-progress view: Markovian moves vanish wherever a
    probabilistic transition is enabled."""

    def __init__(self, inner: MarkovAutomaton):
        self._inner = inner
        self.initial_state = inner.initial_state

    @property
    def alphabet(self):
        return self._inner.alphabet

    def prob_transitions(self, state):
        return self._inner.prob_transitions(state)

    def markov_transitions(self, state):
        if self._inner.prob_transitions(state):
            return ()
        return self._inner.markov_transitions(state)

    def rate_reward(self, state):
        return self._inner.rate_reward(state)

    def observe(self, state):
        return self._inner.observe(state)

    @property
    def observation_scheme(self):
        return self._inner.observation_scheme

    def action_index(self, action):
        return self._inner.action_index(action)


def maximal_progress(ma: MarkovAutomaton) -> MarkovAutomaton:
    """Apply the maximal-progress assumption of closed automata.

    In every state that has at least one probabilistic transition, all
    Markovian transitions are dropped; states without probabilistic
    transitions keep theirs unchanged. Idempotent.
    """
    if isinstance(ma, _ReducedView):
        return ma
    return _ReducedView(ma)


class ExplicitMA(MarkovAutomaton):
    """Automaton built transition-by-transition; the workhorse for small
    hand-written models and unit fixtures.

    Distributions are validated on entry: weights must be non-negative and
    sum to 1 within `DISTRIBUTION_TOLERANCE` (then rescaled to exactly 1);
    rates must be strictly positive.
    """

    def __init__(
        self,
        initial_state: State,
        observation: Optional[Callable[[State], Observation]] = None,
        observation_scheme: Optional[ObservationScheme] = None,
    ):
        self.initial_state = initial_state
        self._prob: dict[State, list[ProbTransition]] = {}
        self._markov: dict[State, list[MarkovTransition]] = {}
        self._rr: dict[State, float] = {}
        self._observation = observation
        self._scheme = observation_scheme
        self._alphabet: Optional[tuple[str, ...]] = None
        self._action_ids: dict[str, int] = {}

    def add_choice(
        self,
        state: State,
        action: str,
        branches: Iterable[tuple[float, State] | tuple[float, State, float]],
    ) -> None:
        resolved = []
        for branch in branches:
            weight, target, *rest = branch
            reward = rest[0] if rest else 0.0
            if weight < 0:
                raise ModelError(f"negative branch weight {weight} on action {action!r}")
            if reward < 0:
                raise ModelError(f"negative branch reward {reward} on action {action!r}")
            resolved.append((float(weight), target, float(reward)))
        total = sum(w for w, _, _ in resolved)
        if abs(total - 1.0) > DISTRIBUTION_TOLERANCE:
            raise ModelError(
                f"distribution for action {action!r} sums to {total}, expected 1"
            )
        self._prob.setdefault(state, []).append(
            ProbTransition(
                action,
                tuple(Branch(w / total, target, rew) for w, target, rew in resolved),
            )
        )
        self._alphabet = None

    def add_rate(self, state: State, rate: float, target: State, reward: float = 0.0) -> None:
        if rate <= 0:
            raise ModelError(f"Markovian rate must be strictly positive, got {rate}")
        if reward < 0:
            raise ModelError(f"negative branch reward {reward} on Markovian transition")
        self._markov.setdefault(state, []).append(
            MarkovTransition(float(rate), target, float(reward))
        )

    def set_rate_reward(self, state: State, value: float) -> None:
        if value < 0:
            raise ModelError(f"rate reward must be non-negative, got {value}")
        self._rr[state] = float(value)

    @property
    def alphabet(self) -> tuple[str, ...]:
        if self._alphabet is None:
            labels = {tr.action for trs in self._prob.values() for tr in trs}
            self._alphabet = tuple(sorted(labels))
            self._action_ids = {a: i for i, a in enumerate(self._alphabet)}
        return self._alphabet

    def action_index(self, action: str) -> int:
        self.alphabet
        return self._action_ids[action]

    def prob_transitions(self, state):
        return tuple(self._prob.get(state, ()))

    def markov_transitions(self, state):
        return tuple(self._markov.get(state, ()))

    def rate_reward(self, state):
        return self._rr.get(state, 0.0)

    def observe(self, state):
        if self._observation is not None:
            return self._observation(state)
        if self._scheme is not None:
            return self._scheme.project(state)
        return state if isinstance(state, tuple) else (state,)

    @property
    def observation_scheme(self):
        return self._scheme
