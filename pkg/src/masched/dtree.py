"""Lossless decision trees over observation variables.

`learn` grows an axis-aligned binary tree that reproduces every row of a
strategy table exactly: at each node it scans all (variable, threshold)
splits, where thresholds are midpoints between consecutive observed values
of a variable, and keeps the one minimising the weighted Shannon entropy
of the action labels (ties: lowest variable index, then smallest
threshold). Recursion stops at action-pure nodes. There is no pruning;
the tree is a compressed but exact view of the table, which is what makes
it trustworthy as an explanation.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Union

from .automata import ObsVariable
from .errors import EmptyStrategyError, MaschedError
from .policies import StrategyTable


@dataclass(frozen=True)
class Leaf:
    action: str


@dataclass(frozen=True)
class Split:
    var: int
    threshold: int
    low: "Node"   # taken when obs[var] <= threshold
    high: "Node"


Node = Union[Leaf, Split]


@dataclass(frozen=True)
class DecisionTree:
    variables: tuple[ObsVariable, ...]
    root: Node

    @property
    def node_count(self) -> int:
        return _count(self.root)

    @property
    def depth(self) -> int:
        return _depth(self.root)


def _count(node: Node) -> int:
    if isinstance(node, Leaf):
        return 1
    return 1 + _count(node.low) + _count(node.high)


def _depth(node: Node) -> int:
    if isinstance(node, Leaf):
        return 1
    return 1 + max(_depth(node.low), _depth(node.high))


def _entropy(counts: Counter, n: int) -> float:
    h = 0.0
    for c in counts.values():
        if c:
            p = c / n
            h -= p * math.log2(p)
    return h


def _best_split(rows: list, nvars: int):
    n = len(rows)
    total = Counter(action for _, action in rows)
    best = None  # (score, var, threshold)
    for var in range(nvars):
        ordered = sorted(rows, key=lambda row: row[0][var])
        left: Counter = Counter()
        i = 0
        while i < n:
            value = ordered[i][0][var]
            j = i
            while j < n and ordered[j][0][var] == value:
                left[ordered[j][1]] += 1
                j += 1
            if j < n:
                threshold = (value + ordered[j][0][var]) // 2
                right = total - left
                score = (j * _entropy(left, j) + (n - j) * _entropy(right, n - j)) / n
                if best is None or score < best[0]:
                    best = (score, var, threshold)
            i = j
    return best


def _grow(rows: list, nvars: int) -> Node:
    actions = {action for _, action in rows}
    if len(actions) == 1:
        return Leaf(next(iter(actions)))
    best = _best_split(rows, nvars)
    # Rows have unique observations, so two rows with different actions
    # differ in some variable and a separating threshold exists.
    assert best is not None, "impure node with no usable split"
    _, var, threshold = best
    low = [row for row in rows if row[0][var] <= threshold]
    high = [row for row in rows if row[0][var] > threshold]
    return Split(var, threshold, _grow(low, nvars), _grow(high, nvars))


def learn(table: StrategyTable) -> DecisionTree:
    """Grow a tree that classifies every table row to its own action."""
    rows = table.sorted_rows()
    if not rows:
        raise EmptyStrategyError("empty strategy: the table has no rows")
    return DecisionTree(table.variables, _grow(rows, len(table.variables)))


def classify(tree: DecisionTree, obs) -> str:
    """Route an observation to its leaf action."""
    if len(obs) != len(tree.variables):
        raise MaschedError(
            f"observation arity {len(obs)} does not match the tree's "
            f"{len(tree.variables)} variables"
        )
    node = tree.root
    while isinstance(node, Split):
        node = node.low if obs[node.var] <= node.threshold else node.high
    return node.action


def to_dot(tree: DecisionTree) -> str:
    """Render as a DOT digraph: boxes `var <= c`, edges true/false, action
    leaves."""
    lines = ["digraph strategy {"]
    edges: list[str] = []
    counter = [0]

    def emit(node: Node) -> int:
        idx = counter[0]
        counter[0] += 1
        if isinstance(node, Leaf):
            lines.append(f'  n{idx} [label="{node.action}"];')
        else:
            name = tree.variables[node.var].name
            lines.append(
                f'  n{idx} [shape=box, label="{name} <= {node.threshold}"];'
            )
            low = emit(node.low)
            high = emit(node.high)
            edges.append(f'  n{idx} -> n{low} [label="true"];')
            edges.append(f'  n{idx} -> n{high} [label="false"];')
        return idx

    emit(tree.root)
    lines.extend(edges)
    lines.append("}")
    return "\n".join(lines) + "\n"


# Compact serialization (round-trip support) ----------------------------------

DTREE_MAGIC = "masched-dtree 1"


def write_tree(path: str, tree: DecisionTree) -> None:
    with open(path, "w") as handle:
        handle.write(DTREE_MAGIC + "\n")
        handle.write("vars: " + " ".join(
            f"{v.name}:{'bool' if v.is_bool else 'int'}" for v in tree.variables
        ) + "\n")

        def emit(node: Node):
            if isinstance(node, Leaf):
                handle.write(f"leaf {node.action}\n")
            else:
                handle.write(f"split {node.var} {node.threshold}\n")
                emit(node.low)
                emit(node.high)

        emit(tree.root)


def read_tree(path: str) -> DecisionTree:
    with open(path) as handle:
        lines = handle.read().splitlines()
    if not lines or lines[0] != DTREE_MAGIC:
        raise MaschedError(f"{path}: not a decision tree file")
    if len(lines) < 3 or not lines[1].startswith("vars: "):
        raise MaschedError(f"{path}: malformed decision tree header")
    variables = []
    for spec in lines[1][len("vars: "):].split():
        name, _, kind = spec.partition(":")
        variables.append(ObsVariable(name, kind == "bool"))
    pos = [2]

    def build() -> Node:
        if pos[0] >= len(lines):
            raise MaschedError(f"{path}: truncated decision tree")
        parts = lines[pos[0]].split()
        pos[0] += 1
        if parts[0] == "leaf":
            return Leaf(" ".join(parts[1:]))
        if parts[0] == "split":
            var, threshold = int(parts[1]), int(parts[2])
            low = build()
            high = build()
            return Split(var, threshold, low, high)
        raise MaschedError(f"{path}: bad node line {parts!r}")

    return DecisionTree(tuple(variables), build())
