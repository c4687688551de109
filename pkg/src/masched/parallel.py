"""Fan-out of simulation runs over worker processes.

Tasks are keyed by explicit stream indices, so results are identical for
any worker count: the coordinator reassembles per-run rewards in stream
order and workers share no mutable state. Choice recording writes one
exclusive binary log per worker process (no cross-worker coordination);
the extraction pass canonicalizes afterwards.

Worker processes are forked, which lets them inherit the compiled model
and any heavyweight shared policies without serialization.
"""

from __future__ import annotations

import multiprocessing as mp
import os
from typing import Optional, Sequence

from .engine import DEFAULT_STEP_CAP, CompiledModel, RngStream, run
from .errors import MaschedError, SimulationError
from .policies import LssPolicy, UniformPolicy

#: Runs per parallel task; fixed so that task decomposition (and therefore
#: aggregation order) does not depend on the worker count.
TASK_CHUNK = 64

# Worker-process globals, populated by fork via _init_worker.
_WORKER: dict = {}


def build_policy(spec, shared: Optional[dict] = None):
    """Instantiate a policy from its picklable description."""
    kind = spec[0]
    if kind == "uniform":
        return UniformPolicy()
    if kind == "lss":
        return LssPolicy(spec[1])
    if kind == "shared":
        if not shared or spec[1] not in shared:
            raise MaschedError(f"no shared policy registered under {spec[1]!r}")
        return shared[spec[1]]
    raise MaschedError(f"unknown policy spec {spec!r}")


def _init_worker(ma, T, seed, shared, extract_dir, step_cap, cache_cap):
    _WORKER["compiled"] = CompiledModel(ma, cache_cap)
    _WORKER["T"] = T
    _WORKER["seed"] = seed
    _WORKER["shared"] = shared
    _WORKER["extract_dir"] = extract_dir
    _WORKER["step_cap"] = step_cap
    _WORKER["policies"] = {}
    _WORKER["sink"] = None


def _record_sink():
    sink = _WORKER.get("sink")
    if sink is None:
        from .extract import ChoiceLog

        path = os.path.join(_WORKER["extract_dir"], f"worker-{os.getpid()}.sal")
        sink = ChoiceLog.open(path, _WORKER["layout"])
        _WORKER["sink"] = sink
    return sink


def _exec_task(task):
    spec, stream_ids, record = task
    policies = _WORKER["policies"]
    policy = policies.get(spec)
    if policy is None:
        policy = build_policy(spec, _WORKER["shared"])
        if len(policies) > 4096:
            policies.clear()
        policies[spec] = policy
    compiled = _WORKER["compiled"]
    T = _WORKER["T"]
    seed = _WORKER["seed"]
    step_cap = _WORKER["step_cap"]
    recorder = None
    sink = None
    if record:
        sink = _record_sink()
        recorder = sink.append
    rewards = []
    try:
        for sid in stream_ids:
            result = run(compiled, policy, T, RngStream(seed, sid),
                         record=recorder, step_cap=step_cap)
            rewards.append(result.reward)
    except MaschedError as exc:
        return ("err", f"{type(exc).__name__}: {exc}")
    finally:
        if sink is not None:
            sink.flush()
    return ("ok", rewards)


class Runner:
    """Executes jobs of simulation runs, serially or on a process pool.

    A job is `(policy_spec, stream_ids, record)`; `map_jobs` returns one
    `('ok', rewards)` or `('err', message)` entry per job, rewards in
    stream order. Use as a context manager or call `close`.
    """

    def __init__(
        self,
        ma,
        T: float,
        seed: int,
        workers: int = 1,
        shared: Optional[dict] = None,
        extract_dir: Optional[str] = None,
        step_cap: int = DEFAULT_STEP_CAP,
        cache_cap: int = 1 << 20,
    ):
        self.T = T
        self.seed = seed
        self.workers = max(1, workers)
        self.extract_dir = extract_dir
        self._layout = None
        if extract_dir is not None:
            from .extract import RecordLayout

            os.makedirs(extract_dir, exist_ok=True)
            self._layout = RecordLayout.for_automaton(ma)
        self._pool = None
        self.run_count = 0
        if self.workers > 1:
            ctx = mp.get_context("fork")
            self._pool = ctx.Pool(
                self.workers,
                initializer=_init_fork_worker,
                initargs=(ma, T, seed, shared, extract_dir, step_cap, cache_cap,
                          self._layout),
            )
        else:
            _init_worker(ma, T, seed, shared, extract_dir, step_cap, cache_cap)
            _WORKER["layout"] = self._layout

    def map_jobs(self, jobs: Sequence[tuple]) -> list[tuple]:
        tasks = []
        owners = []  # job index of each task
        for j, (spec, stream_ids, record) in enumerate(jobs):
            ids = list(stream_ids)
            if not ids:
                raise MaschedError("empty job submitted to Runner")
            self.run_count += len(ids)
            for i in range(0, len(ids), TASK_CHUNK):
                tasks.append((spec, ids[i : i + TASK_CHUNK], record))
                owners.append(j)
        if self._pool is not None:
            outcomes = self._pool.map(_exec_task, tasks)
        else:
            outcomes = [_exec_task(t) for t in tasks]
        results: list = [("ok", []) for _ in jobs]
        for owner, outcome in zip(owners, outcomes):
            current = results[owner]
            if current[0] == "err":
                continue
            if outcome[0] == "err":
                results[owner] = outcome
            else:
                current[1].extend(outcome[1])
        return results

    def rewards(self, spec, stream_ids, record: bool = False) -> list[float]:
        """Run one job and return its rewards; simulation failures raise."""
        status, payload = self.map_jobs([(spec, stream_ids, record)])[0]
        if status == "err":
            raise SimulationError(payload)
        return payload

    def worker_logs(self) -> list[str]:
        if self.extract_dir is None:
            return []
        return sorted(
            os.path.join(self.extract_dir, name)
            for name in os.listdir(self.extract_dir)
            if name.endswith(".sal")
        )

    def close(self):
        if self._pool is not None:
            self._pool.close()
            self._pool.join()
            self._pool = None
        elif _WORKER.get("sink") is not None:
            _WORKER["sink"].close()
            _WORKER["sink"] = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def _init_fork_worker(ma, T, seed, shared, extract_dir, step_cap, cache_cap, layout):
    _init_worker(ma, T, seed, shared, extract_dir, step_cap, cache_cap)
    _WORKER["layout"] = layout
