"""Open-pit mine model generator.

Trucks cycle between shovels (loading) and dumps (unloading). A shovel
site tracks trucks on the road toward it and trucks queued at it; arrival
is Markovian with rate road/travel_time, loading with rate 1/load_time.
Finishing a load raises the observable `full` flag, which enables the
dispatch actions toward dumps of the compatible kind (ore shovels serve
ore dumps, waste shovels the rest). Dumps mirror the structure with
unloading; finishing an unload assigns the transient `load` reward and
raises `empty`, enabling dispatch to any shovel. An initializer process
distributes the trucks one by one to arbitrary sites through ordinary
probabilistic commands, so the initial placement is resolved by the same
policies as every other choice.

Dispatch actions are named per pair (`shv_0_to_dmp_1`, `dmp_1_to_shv_0`,
`ini_to_shv_0`, ...), so each synchronizes exactly its two participants.

Each site carries an observable `stress` counter: road + queue capped at
the site's observation cap, refreshed on dispatch-in and on service
completion. Caps default to a coarse function of the site's travel and
service times (see `default_obs_cap`); together with the flags this keeps
the observation space small enough for hash strategies to act
consistently on it, while flags alone guarantee that equal observations
always offer equal action sets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .dsl import NetworkModel, parse
from .errors import ModelError

#: Documented per-site travel-time pool (time units). Shovel i draws entry
#: i, dump j draws entry (shovels + j), both modulo the pool size.
TRAVEL_TIME_POOL = (12, 7, 17, 9, 14, 20, 5, 11, 16, 8, 19, 6, 13, 10, 18, 15)

DEFAULT_LOAD_TIME = 2.0
DEFAULT_UNLOAD_TIME = 1.5
DEFAULT_TRUCK_LOAD = 1.0
DEFAULT_SHIFT = 200.0

#: Published configuration table: instance name (truck count) to
#: (shovels, dumps, ore shovels, ore dumps).
CATALOG = {
    4: (6, 5, 3, 3),
    5: (1, 2, 0, 0),
    9: (3, 2, 1, 1),
    10: (6, 5, 3, 3),
    35: (6, 5, 3, 3),
    40: (8, 8, 4, 4),
    80: (10, 10, 5, 5),
}

#: Published combination counts per instance:
#: (shovel -> dump, dump -> shovel, ore shovel -> ore dump).
CATALOG_COMBINATIONS = {
    4: (15, 30, 9),
    5: (2, 2, 0),
    9: (3, 6, 1),
    10: (15, 30, 9),
    35: (15, 30, 9),
    40: (32, 64, 16),
    80: (50, 100, 25),
}


def default_obs_cap(travel_time: float, service_time: float) -> int:
    """Observation cap for a site's stress counter.

    Deliberately coarse, growing with the ratio of travel time to service
    time. Sites whose trucks arrive barely faster than they are served get
    cap 0 (stress pinned, the flags alone are observed): every surviving
    observation is then frequent, which is what lets sampled strategies act
    consistently across their whole orbit and keeps extracted trees small.
    """
    return max(0, math.ceil(travel_time / (8.0 * service_time)) - 1)


@dataclass(frozen=True)
class MineConfig:
    trucks: int
    shovels: int
    dumps: int
    ore_shovels: int
    ore_dumps: int
    travel_times: tuple[float, ...]  # per shovel
    haul_times: tuple[float, ...]  # per dump
    load_time: float = DEFAULT_LOAD_TIME
    unload_time: float = DEFAULT_UNLOAD_TIME
    truck_load: float = DEFAULT_TRUCK_LOAD
    shovel_caps: Optional[tuple[int, ...]] = None
    dump_caps: Optional[tuple[int, ...]] = None
    shift: float = DEFAULT_SHIFT

    def __post_init__(self):
        if self.trucks < 1:
            raise ModelError("need at least one truck")
        if self.shovels < 1 or self.dumps < 1:
            raise ModelError("need at least one shovel and one dump")
        if not 0 <= self.ore_shovels <= self.shovels:
            raise ModelError("ore shovel count out of range")
        if not 0 <= self.ore_dumps <= self.dumps:
            raise ModelError("ore dump count out of range")
        if (self.ore_shovels > 0) != (self.ore_dumps > 0):
            raise ModelError(
                "ore shovels and ore dumps must be both present or both absent"
            )
        if len(self.travel_times) != self.shovels:
            raise ModelError("need one travel time per shovel")
        if len(self.haul_times) != self.dumps:
            raise ModelError("need one haul time per dump")
        if any(t <= 0 for t in self.travel_times + self.haul_times):
            raise ModelError("travel and haul times must be positive")
        if self.load_time <= 0 or self.unload_time <= 0:
            raise ModelError("service times must be positive")
        if self.truck_load < 0:
            raise ModelError("truck load must be non-negative")
        if self.shift < 0:
            raise ModelError("shift length must be non-negative")

    def shovel_cap(self, i: int) -> int:
        if self.shovel_caps is not None:
            return self.shovel_caps[i]
        return default_obs_cap(self.travel_times[i], self.load_time)

    def dump_cap(self, j: int) -> int:
        if self.dump_caps is not None:
            return self.dump_caps[j]
        return default_obs_cap(self.haul_times[j], self.unload_time)

    def compatible(self, shovel: int, dump: int) -> bool:
        if shovel < self.ore_shovels:
            return dump < self.ore_dumps
        return dump >= self.ore_dumps


def default_config(
    trucks: int,
    shovels: int,
    dumps: int,
    ore_shovels: int,
    ore_dumps: int,
    shift: float = DEFAULT_SHIFT,
    **overrides,
) -> MineConfig:
    pool = TRAVEL_TIME_POOL
    travel = tuple(pool[i % len(pool)] for i in range(shovels))
    haul = tuple(pool[(shovels + j) % len(pool)] for j in range(dumps))
    return MineConfig(
        trucks, shovels, dumps, ore_shovels, ore_dumps,
        overrides.pop("travel_times", travel),
        overrides.pop("haul_times", haul),
        shift=shift,
        **overrides,
    )


def catalog_config(instance: int, shift: float = DEFAULT_SHIFT, **overrides) -> MineConfig:
    if instance not in CATALOG:
        raise ModelError(
            f"unknown catalog instance {instance}; known: {sorted(CATALOG)}"
        )
    shovels, dumps, ore_shovels, ore_dumps = CATALOG[instance]
    return default_config(
        instance, shovels, dumps, ore_shovels, ore_dumps, shift, **overrides
    )


def combinations(config: MineConfig) -> tuple[int, int, int]:
    """(shovel->dump, dump->shovel, ore->ore) dispatch pair counts."""
    k, l = config.ore_shovels, config.ore_dumps
    ns, nd = config.shovels, config.dumps
    return (k * l + (ns - k) * (nd - l), ns * nd, k * l)


@dataclass(frozen=True)
class CatalogEntry:
    instance: int
    row: str
    expected: int
    computed: int

    @property
    def ok(self) -> bool:
        return self.expected == self.computed


@dataclass(frozen=True)
class CatalogReport:
    entries: tuple[CatalogEntry, ...]

    @property
    def ok(self) -> bool:
        return all(e.ok for e in self.entries)

    def failures(self) -> list[CatalogEntry]:
        return [e for e in self.entries if not e.ok]


def validate_catalog() -> CatalogReport:
    """Recompute every combination count from the catalog geometry and
    compare against the published values."""
    rows = ("shovel->dump", "dump->shovel", "ore->ore")
    entries = []
    for instance in sorted(CATALOG):
        config = catalog_config(instance)
        computed = combinations(config)
        expected = CATALOG_COMBINATIONS[instance]
        for row, exp, got in zip(rows, expected, computed):
            entries.append(CatalogEntry(instance, row, exp, got))
    return CatalogReport(tuple(entries))


@dataclass(frozen=True)
class PropertyQuery:
    """Time-bounded expected accumulated reward query."""

    direction: str  # 'max' | 'min'
    time_bound: float
    reward: str = "load"

    def __post_init__(self):
        if self.direction not in ("max", "min"):
            raise ModelError(f"unknown direction {self.direction!r}")
        if self.time_bound < 0:
            raise ModelError("time bound must be non-negative")


def property_spec(config: MineConfig, direction: str = "max") -> PropertyQuery:
    """The mine's optimisation query: accumulated transient `load` up to
    the end of the shift."""
    return PropertyQuery(direction, config.shift, "load")


def _fmt(value: float) -> str:
    if float(value).is_integer():
        return str(int(value))
    return repr(float(value))


def mine_text(config: MineConfig) -> str:
    """Render the network description for `config`."""
    nr = config.trucks
    lines = [
        "// Open-pit mine: trucks cycle between shovels and dumps.",
        f"const real LOAD_TIME = {_fmt(config.load_time)};",
        f"const real UNLOAD_TIME = {_fmt(config.unload_time)};",
        f"const real TRK_LOAD = {_fmt(config.truck_load)};",
        "reward load;",
    ]
    for i in range(config.shovels):
        cap = config.shovel_cap(i)
        t = _fmt(config.travel_times[i])
        q, road, stress, full = f"queue_s{i}", f"road_s{i}", f"stress_s{i}", f"full_s{i}"
        lines.append("")
        lines.append(f"process Shovel{i} {{")
        lines.append(f"  int(0..{nr}) {q} = 0;")
        lines.append(f"  int(0..{nr}) {road} = 0;")
        lines.append(f"  observable int(0..{cap}) {stress} = 0;")
        lines.append(f"  observable bool {full} = false;")
        lines.append("")
        incoming = [f"dmp_{j}_to_shv_{i}" for j in range(config.dumps)]
        incoming.append(f"ini_to_shv_{i}")
        for action in incoming:
            lines.append(
                f"  [{action}] -> 1: {{ {road} = {road} + 1, "
                f"{stress} = min({road} + 1 + {q}, {cap}) }};"
            )
        lines.append(
            f"  rate({road} / {t}) when {road} > 0 -> "
            f"{{ {q} = {q} + 1, {road} = {road} - 1 }};"
        )
        lines.append(
            f"  rate(1 / LOAD_TIME) when {q} > 0 -> {{ {q} = {q} - 1, "
            f"{stress} = min({road} + {q} - 1, {cap}), {full} = true }};"
        )
        for j in range(config.dumps):
            if config.compatible(i, j):
                lines.append(
                    f"  [shv_{i}_to_dmp_{j}] when {full} -> 1: {{ {full} = false }};"
                )
        lines.append("}")
    for j in range(config.dumps):
        cap = config.dump_cap(j)
        h = _fmt(config.haul_times[j])
        q, road, stress, empty = f"queue_d{j}", f"road_d{j}", f"stress_d{j}", f"empty_d{j}"
        lines.append("")
        lines.append(f"process Dump{j} {{")
        lines.append(f"  int(0..{nr}) {q} = 0;")
        lines.append(f"  int(0..{nr}) {road} = 0;")
        lines.append(f"  observable int(0..{cap}) {stress} = 0;")
        lines.append(f"  observable bool {empty} = false;")
        lines.append("")
        incoming = [
            f"shv_{i}_to_dmp_{j}"
            for i in range(config.shovels)
            if config.compatible(i, j)
        ]
        incoming.append(f"ini_to_dmp_{j}")
        for action in incoming:
            lines.append(
                f"  [{action}] -> 1: {{ {road} = {road} + 1, "
                f"{stress} = min({road} + 1 + {q}, {cap}) }};"
            )
        lines.append(
            f"  rate({road} / {h}) when {road} > 0 -> "
            f"{{ {q} = {q} + 1, {road} = {road} - 1 }};"
        )
        lines.append(
            f"  rate(1 / UNLOAD_TIME) when {q} > 0 -> {{ {q} = {q} - 1, "
            f"{stress} = min({road} + {q} - 1, {cap}), load = TRK_LOAD, "
            f"{empty} = true }};"
        )
        for i in range(config.shovels):
            lines.append(
                f"  [dmp_{j}_to_shv_{i}] when {empty} -> 1: {{ {empty} = false }};"
            )
        lines.append("}")
    lines.append("")
    lines.append("process Init {")
    lines.append(f"  int(0..{nr}) placed = 0;")
    lines.append("")
    for i in range(config.shovels):
        lines.append(
            f"  [ini_to_shv_{i}] when placed < {nr} -> 1: {{ placed = placed + 1 }};"
        )
    for j in range(config.dumps):
        lines.append(
            f"  [ini_to_dmp_{j}] when placed < {nr} -> 1: {{ placed = placed + 1 }};"
        )
    lines.append("}")
    return "\n".join(lines) + "\n"


def build_mine(config: MineConfig) -> NetworkModel:
    return parse(mine_text(config))


def truck_count(config: MineConfig, model: NetworkModel, state) -> int:
    """Trucks in queues, on roads, or held by a raised full/empty flag.

    A raised flag is the dispatch limbo: the truck has left the queue but
    its outgoing synchronization has not fired yet. Maximal progress
    resolves it before any further timed event, so a flag never holds more
    than one truck. The sum must always equal the initializer's placed
    counter."""
    total = 0
    for var in model.variables:
        if var.name.startswith(("queue_", "road_", "full_", "empty_")):
            total += state[var.slot]
    return total


def placed_count(model: NetworkModel, state) -> int:
    for var in model.variables:
        if var.name == "placed":
            return state[var.slot]
    raise ModelError("model has no initializer counter")


# Config files (key = value lines, '#' comments) -------------------------------


def read_mine_config(path: str) -> MineConfig:
    values: dict[str, str] = {}
    with open(path) as handle:
        for lineno, raw in enumerate(handle, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ModelError(f"{path}:{lineno}: expected 'key = value'")
            values[key.strip()] = value.strip()

    def take_int(key, default=None):
        if key not in values:
            if default is None:
                raise ModelError(f"{path}: missing required key {key!r}")
            return default
        return int(values.pop(key))

    def take_float(key, default):
        return float(values.pop(key)) if key in values else default

    def take_list(key, kind):
        if key not in values:
            return None
        return tuple(kind(part) for part in values.pop(key).split(","))

    trucks = take_int("trucks")
    shovels = take_int("shovels")
    dumps = take_int("dumps")
    ore_shovels = take_int("ore_shovels", 0)
    ore_dumps = take_int("ore_dumps", 0)
    pool = TRAVEL_TIME_POOL
    travel = take_list("travel_times", float) or tuple(
        pool[i % len(pool)] for i in range(shovels)
    )
    haul = take_list("haul_times", float) or tuple(
        pool[(shovels + j) % len(pool)] for j in range(dumps)
    )
    config = MineConfig(
        trucks, shovels, dumps, ore_shovels, ore_dumps, travel, haul,
        load_time=take_float("load_time", DEFAULT_LOAD_TIME),
        unload_time=take_float("unload_time", DEFAULT_UNLOAD_TIME),
        truck_load=take_float("truck_load", DEFAULT_TRUCK_LOAD),
        shovel_caps=take_list("shovel_caps", int),
        dump_caps=take_list("dump_caps", int),
        shift=take_float("shift", DEFAULT_SHIFT),
    )
    if values:
        raise ModelError(f"{path}: unknown keys {sorted(values)}")
    return config
