"""Constant-memory strategy extraction from simulation choice logs.

While the final estimation pass runs, every worker appends one fixed-width
binary record per decision (observation plus chosen action) to its own
`.sal` file; nothing is coordinated between workers. Afterwards the logs
are concatenated and an external-memory merge sort deduplicates them under
a caller-supplied memory budget: records are decoded, sorted in chunks
that fit the budget, spilled to temporary files, and streamed back through
a k-way merge. Adjacent duplicates collapse; the same observation paired
with two different actions aborts the extraction, because a memoryless
strategy over observations cannot make two choices at one observation.

The result is a sorted text strategy table (`.strat`). Both formats are
specified in `docs/formats.md`.

Records store the action as its index in the model's action alphabet (not
its position among the enabled transitions), so signature mismatches show
up as conflicting records rather than hiding behind equal positions.
"""

from __future__ import annotations

import heapq
import os
import struct
import tempfile
from dataclasses import dataclass
from typing import Iterable, Iterator

from .automata import MarkovAutomaton, ObsVariable
from .errors import ConsistencyError, MaschedError
from .policies import StrategyTable

SAL_MAGIC = b"SAL1"
SAL_VERSION = 1
_HEADER = struct.Struct("<4sHHQ")  # magic, version, record size, layout hash

#: Maximum chunk files merged in one pass; deeper chunk sets are merged in
#: cascades so the open-file count stays bounded under tiny memory budgets.
MERGE_FANOUT = 64
_FNV64_OFFSET = 0xCBF29CE484222325
_FNV64_PRIME = 0x100000001B3


def _fnv64(data: bytes) -> int:
    h = _FNV64_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV64_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h


@dataclass(frozen=True)
class RecordLayout:
    """Fixed record shape for one model: observable variables in declaration
    order (4-byte little-endian two's complement each) followed by a 16-bit
    action index into the model's alphabet."""

    variables: tuple[ObsVariable, ...]
    alphabet: tuple[str, ...]

    @classmethod
    def for_automaton(cls, ma: MarkovAutomaton) -> "RecordLayout":
        scheme = ma.observation_scheme
        if scheme is None:
            raise MaschedError("model has no observation scheme to log against")
        if len(ma.alphabet) > 0xFFFF:
            raise MaschedError("action alphabet exceeds 16-bit record field")
        return cls(scheme.variables, tuple(ma.alphabet))

    @property
    def record_size(self) -> int:
        return 4 * len(self.variables) + 2

    @property
    def layout_hash(self) -> int:
        text = "|".join(
            f"{v.name}:{'bool' if v.is_bool else 'int'}" for v in self.variables
        )
        text += "||" + "|".join(self.alphabet)
        return _fnv64(text.encode())

    def struct(self) -> struct.Struct:
        return struct.Struct(f"<{len(self.variables)}iH")

    def header_bytes(self) -> bytes:
        return _HEADER.pack(SAL_MAGIC, SAL_VERSION, self.record_size, self.layout_hash)

    def check_header(self, data: bytes, path: str) -> None:
        if len(data) < _HEADER.size:
            raise MaschedError(f"{path}: truncated choice log header")
        magic, version, rec_size, lhash = _HEADER.unpack(data[: _HEADER.size])
        if magic != SAL_MAGIC:
            raise MaschedError(f"{path}: not a choice log (bad magic)")
        if version != SAL_VERSION:
            raise MaschedError(f"{path}: unsupported choice log version {version}")
        if rec_size != self.record_size or lhash != self.layout_hash:
            raise MaschedError(
                f"{path}: choice log was written for a different model layout"
            )


class ChoiceLog:
    """Append-only per-worker record sink."""

    def __init__(self, path: str, layout: RecordLayout, handle):
        self.path = path
        self.layout = layout
        self._handle = handle
        self._pack = layout.struct().pack

    @classmethod
    def open(cls, path: str, layout: RecordLayout) -> "ChoiceLog":
        fresh = not os.path.exists(path) or os.path.getsize(path) == 0
        handle = open(path, "ab", buffering=1 << 16)
        if fresh:
            handle.write(layout.header_bytes())
        return cls(path, layout, handle)

    def append(self, obs, action_id: int) -> None:
        self._handle.write(self._pack(*obs, action_id))

    def flush(self) -> None:
        self._handle.flush()

    def close(self) -> None:
        self._handle.close()


def concatenate(paths: Iterable[str], out_path: str, layout: RecordLayout) -> int:
    """Concatenate worker logs into one merged log; returns the record count."""
    total = 0
    with open(out_path, "wb") as out:
        out.write(layout.header_bytes())
        for path in paths:
            with open(path, "rb") as src:
                header = src.read(_HEADER.size)
                layout.check_header(header, path)
                while True:
                    block = src.read(1 << 20)
                    if not block:
                        break
                    total += len(block)
                    out.write(block)
    if total % layout.record_size:
        raise MaschedError("merged log size is not a whole number of records")
    return total // layout.record_size


def iter_records(path: str, layout: RecordLayout) -> Iterator[tuple]:
    """Yield decoded (v1, ..., vn, action_id) tuples from a log file."""
    rec = layout.struct()
    size = rec.size
    with open(path, "rb") as handle:
        header = handle.read(_HEADER.size)
        layout.check_header(header, path)
        remaining = os.path.getsize(path) - _HEADER.size
        if remaining % size:
            raise MaschedError(f"{path}: log size is not a whole number of records")
        while True:
            block = handle.read(size * 4096)
            if not block:
                break
            for off in range(0, len(block), size):
                yield rec.unpack_from(block, off)


def _spill_chunk(records: list[tuple], layout: RecordLayout, tmp_dir: str) -> str:
    records.sort()
    pack = layout.struct().pack
    fd, path = tempfile.mkstemp(suffix=".chunk", dir=tmp_dir)
    with os.fdopen(fd, "wb", buffering=1 << 16) as handle:
        for record in records:
            handle.write(pack(*record))
    return path


def _iter_chunk(path: str, layout: RecordLayout) -> Iterator[tuple]:
    rec = layout.struct()
    size = rec.size
    with open(path, "rb") as handle:
        while True:
            block = handle.read(size * 4096)
            if not block:
                break
            for off in range(0, len(block), size):
                yield rec.unpack_from(block, off)


def sort_dedup(
    merged_path: str,
    out_path: str,
    layout: RecordLayout,
    memory_budget: int = 64 * 1024**2,
    *,
    keep_temp: bool = False,
    tmp_dir: str | None = None,
) -> int:
    """External-memory sort + dedup of a merged log into a `.strat` table.

    Records are ordered by (observation, action index). Returns the number
    of unique rows written. Two records sharing an observation but not an
    action abort with a `ConsistencyError` naming the observation.
    """
    if memory_budget < 2 * layout.record_size:
        raise MaschedError(
            f"memory budget {memory_budget} cannot hold two records "
            f"of {layout.record_size} bytes"
        )
    chunk_capacity = memory_budget // layout.record_size
    tmp_dir = tmp_dir or (os.path.dirname(os.path.abspath(out_path)) or ".")
    chunk_paths: list[str] = []
    scratch: list[str] = []
    chunk: list[tuple] = []
    try:
        for record in iter_records(merged_path, layout):
            chunk.append(record)
            if len(chunk) >= chunk_capacity:
                chunk_paths.append(_spill_chunk(chunk, layout, tmp_dir))
                chunk = []
        if chunk_paths:
            if chunk:
                chunk_paths.append(_spill_chunk(chunk, layout, tmp_dir))
            # Merge in cascades of MERGE_FANOUT to bound open file handles.
            while len(chunk_paths) > MERGE_FANOUT:
                merged_round: list[str] = []
                for i in range(0, len(chunk_paths), MERGE_FANOUT):
                    group = chunk_paths[i : i + MERGE_FANOUT]
                    if len(group) == 1:
                        merged_round.append(group[0])
                        continue
                    merged_round.append(_merge_chunks(group, layout, tmp_dir))
                    scratch.extend(group)
                chunk_paths = merged_round
            stream: Iterator[tuple] = heapq.merge(
                *(_iter_chunk(p, layout) for p in chunk_paths)
            )
        else:
            chunk.sort()
            stream = iter(chunk)
        rows = _write_table_stream(out_path, layout, _dedup(stream, layout))
    finally:
        for path in scratch if keep_temp else scratch + chunk_paths:
            try:
                os.unlink(path)
            except OSError:
                pass
    return rows


def _merge_chunks(paths: list[str], layout: RecordLayout, tmp_dir: str) -> str:
    pack = layout.struct().pack
    fd, out = tempfile.mkstemp(suffix=".chunk", dir=tmp_dir)
    with os.fdopen(fd, "wb", buffering=1 << 16) as handle:
        for record in heapq.merge(*(_iter_chunk(p, layout) for p in paths)):
            handle.write(pack(*record))
    return out


def _dedup(stream: Iterator[tuple], layout: RecordLayout) -> Iterator[tuple]:
    previous = None
    for record in stream:
        if previous is not None:
            if record == previous:
                continue
            if record[:-1] == previous[:-1]:
                obs = _describe_obs(previous[:-1], layout)
                raise ConsistencyError(
                    f"observation {obs} was logged with two different actions "
                    f"({layout.alphabet[previous[-1]]!r} and "
                    f"{layout.alphabet[record[-1]]!r}); the observation map "
                    "violates the consistent-signature requirement"
                )
        yield record
        previous = record


def _describe_obs(values: tuple, layout: RecordLayout) -> str:
    parts = [
        f"{var.name}={_format_value(v, var)}"
        for var, v in zip(layout.variables, values)
    ]
    return "(" + ", ".join(parts) + ")"


def _format_value(value: int, var: ObsVariable) -> str:
    if var.is_bool:
        return "true" if value else "false"
    return str(value)


# Strategy table text format ---------------------------------------------------

STRAT_MAGIC = "masched-strategy 1"


def _var_header(variables: tuple[ObsVariable, ...]) -> str:
    return " ".join(
        f"{v.name}:{'bool' if v.is_bool else 'int'}" for v in variables
    )


def _write_table_stream(out_path: str, layout: RecordLayout, records) -> int:
    rows = 0
    with open(out_path, "w") as handle:
        handle.write(STRAT_MAGIC + "\n")
        handle.write("vars: " + _var_header(layout.variables) + "\n")
        handle.write("actions: " + " ".join(layout.alphabet) + "\n")
        handle.write("rows:\n")
        for record in records:
            action_id = record[-1]
            if action_id >= len(layout.alphabet):
                raise MaschedError(f"record action index {action_id} out of range")
            cells = " ".join(
                _format_value(v, var)
                for var, v in zip(layout.variables, record[:-1])
            )
            handle.write(f"{cells} | {layout.alphabet[action_id]}\n")
            rows += 1
    return rows


def write_table(path: str, table: StrategyTable) -> None:
    with open(path, "w") as handle:
        handle.write(STRAT_MAGIC + "\n")
        handle.write("vars: " + _var_header(table.variables) + "\n")
        handle.write("actions: " + " ".join(table.alphabet) + "\n")
        handle.write("rows:\n")
        for obs, action in table.sorted_rows():
            cells = " ".join(
                _format_value(v, var) for var, v in zip(table.variables, obs)
            )
            handle.write(f"{cells} | {action}\n")


def read_table(path: str) -> StrategyTable:
    with open(path) as handle:
        lines = [line.rstrip("\n") for line in handle]
    if not lines or lines[0] != STRAT_MAGIC:
        raise MaschedError(f"{path}: not a strategy table file")
    if len(lines) < 4 or not lines[1].startswith("vars: ") \
            or not lines[2].startswith("actions: ") or lines[3] != "rows:":
        raise MaschedError(f"{path}: malformed strategy table header")
    variables = []
    for spec in lines[1][len("vars: "):].split():
        name, _, kind = spec.partition(":")
        if kind not in ("int", "bool"):
            raise MaschedError(f"{path}: bad variable declaration {spec!r}")
        variables.append(ObsVariable(name, kind == "bool"))
    alphabet = tuple(lines[2][len("actions: "):].split())
    table = StrategyTable(tuple(variables), alphabet)
    for lineno, line in enumerate(lines[4:], 5):
        if not line.strip():
            continue
        cells, sep, action = line.partition(" | ")
        if not sep:
            raise MaschedError(f"{path}:{lineno}: malformed row {line!r}")
        parts = cells.split()
        if len(parts) != len(variables):
            raise MaschedError(
                f"{path}:{lineno}: expected {len(variables)} values, "
                f"got {len(parts)}"
            )
        obs = []
        for var, part in zip(variables, parts):
            if var.is_bool:
                if part not in ("true", "false"):
                    raise MaschedError(
                        f"{path}:{lineno}: boolean {var.name} has value {part!r}"
                    )
                obs.append(1 if part == "true" else 0)
            else:
                try:
                    obs.append(int(part))
                except ValueError:
                    raise MaschedError(
                        f"{path}:{lineno}: integer {var.name} has value {part!r}"
                    ) from None
        if action not in alphabet:
            raise MaschedError(f"{path}:{lineno}: unknown action {action!r}")
        key = tuple(obs)
        if key in table.rows:
            raise MaschedError(f"{path}:{lineno}: duplicate observation {key}")
        table.rows[key] = action
    return table


def table_to_records(table: StrategyTable, layout: RecordLayout) -> Iterator[tuple]:
    """Decode table rows back into record tuples (for re-extraction and
    idempotence checks)."""
    ids = {a: i for i, a in enumerate(layout.alphabet)}
    for obs, action in table.sorted_rows():
        yield tuple(obs) + (ids[action],)


def write_records(path: str, layout: RecordLayout, records: Iterable[tuple]) -> None:
    """Write raw records as a `.sal` log (test and tooling helper)."""
    pack = layout.struct().pack
    with open(path, "wb", buffering=1 << 16) as handle:
        handle.write(layout.header_bytes())
        for record in records:
            handle.write(pack(*record))
