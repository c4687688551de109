"""Typed view of the results CSV contract.

The schema is fixed: files with missing or extra columns are rejected
outright rather than guessed at, since every number here was computed by
the analysis tool and a column mismatch means the file is not ours.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional

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


class ReportError(Exception):
    """Raised for schema violations and empty inputs."""


@dataclass(frozen=True)
class ResultRow:
    model: str
    instance: str
    policy: str
    direction: str  # 'max' | 'min' | 'none'
    mode: str  # 'fo' | 'po'
    mean: float
    halfwidth: float
    n: int
    wall_time_ms: int
    seed: str
    table_rows: Optional[int]
    tree_nodes: Optional[int]

    @property
    def low(self) -> float:
        return self.mean - self.halfwidth

    @property
    def high(self) -> float:
        return self.mean + self.halfwidth

    def disjoint_above(self, other: "ResultRow") -> bool:
        """True iff this row's interval lies strictly above the other's."""
        return self.low > other.high

    def disjoint_below(self, other: "ResultRow") -> bool:
        return self.high < other.low


@dataclass
class ResultsFrame:
    rows: list[ResultRow]

    @property
    def modes(self) -> list[str]:
        return sorted({row.mode for row in self.rows})

    def instances(self, mode: str) -> list[str]:
        keys = {row.instance for row in self.rows if row.mode == mode}
        return sorted(keys, key=_instance_key)

    def policies(self, mode: str) -> list[str]:
        return sorted({
            row.policy for row in self.rows
            if row.mode == mode and row.policy != "uniform"
        })

    def group(self, instance: str, mode: str, policy: str) -> dict[str, ResultRow]:
        """Rows of one (instance, mode, policy) keyed by direction."""
        out = {}
        for row in self.rows:
            if (row.instance, row.mode, row.policy) == (instance, mode, policy):
                out[row.direction] = row
        return out

    def uniform(self, instance: str, mode: str) -> Optional[ResultRow]:
        for row in self.rows:
            if (row.instance, row.mode, row.policy) == (instance, mode, "uniform"):
                return row
        return None


def _instance_key(name: str):
    try:
        return (0, int(name))
    except ValueError:
        return (1, name)


def _opt_int(text: str) -> Optional[int]:
    return int(text) if text else None


def load_frame(path: str) -> ResultsFrame:
    with open(path, newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None:
            raise ReportError(f"{path}: no data")
        if tuple(reader.fieldnames) != CSV_COLUMNS:
            unknown = [c for c in reader.fieldnames if c not in CSV_COLUMNS]
            missing = [c for c in CSV_COLUMNS if c not in reader.fieldnames]
            raise ReportError(
                f"{path}: schema mismatch (unknown columns {unknown}, "
                f"missing {missing})"
            )
        rows = []
        for lineno, raw in enumerate(reader, 2):
            try:
                rows.append(ResultRow(
                    model=raw["model"],
                    instance=raw["instance"],
                    policy=raw["policy"],
                    direction=raw["direction"],
                    mode=raw["mode"],
                    mean=float(raw["mean"]),
                    halfwidth=float(raw["halfwidth"]),
                    n=int(raw["n"]),
                    wall_time_ms=int(raw["wall_time_ms"]),
                    seed=raw["seed"],
                    table_rows=_opt_int(raw["table_rows"]),
                    tree_nodes=_opt_int(raw["tree_nodes"]),
                ))
            except (KeyError, ValueError) as exc:
                raise ReportError(f"{path}:{lineno}: bad row ({exc})") from None
    if not rows:
        raise ReportError(f"{path}: no data")
    return ResultsFrame(rows)


@dataclass(frozen=True)
class OverlapEntry:
    instance: str
    mode: str
    policy: str
    max_above_uniform: Optional[bool]  # None when a side is missing
    min_below_uniform: Optional[bool]
    inverted: bool  # min estimate above max estimate


def overlap_report(frame: ResultsFrame) -> list[OverlapEntry]:
    """Confidence-interval separation of every optimised run against its
    instance's uniform baseline, in deterministic order."""
    entries = []
    for mode in frame.modes:
        for instance in frame.instances(mode):
            uniform = frame.uniform(instance, mode)
            for policy in frame.policies(mode):
                group = frame.group(instance, mode, policy)
                if not group:
                    continue
                top = group.get("max")
                bottom = group.get("min")
                above = None
                below = None
                if uniform is not None and top is not None:
                    above = top.disjoint_above(uniform)
                if uniform is not None and bottom is not None:
                    below = bottom.disjoint_below(uniform)
                inverted = (top is not None and bottom is not None
                            and bottom.mean > top.mean)
                entries.append(OverlapEntry(
                    instance, mode, policy, above, below, inverted
                ))
    return entries
