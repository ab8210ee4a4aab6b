"""Seeded event-driven simulation of the continuous-time process and its
embedded jump chain.

Randomness comes from numpy's PCG64 generator. Every run or excursion j owns
the SeedSequence (seed, spawn_key=(j,)), which is split into a jump stream
and a holding-time stream. The embedded simulator reads only the jump
stream, so its state sequence coincides with the continuous-time jump
sequence for the same key. Excursions may run on several threads; results
are reduced in excursion order, so output does not depend on the worker count.
"""

import math
import time
from abc import ABC, abstractmethod
from bisect import bisect_right
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, List, Literal, Optional, Sequence, Tuple, TypeVar

import numpy as np
from loguru import logger
from pydantic import BaseModel, Field

from config.settings import settings
from core.branching import count_crossings, occupation_identity_holds
from core.errors import ExcursionBudgetExceeded
from core.model import ProcessModel
from core.models import (
    BranchingEstimate,
    ExitFrequency,
    OccupationEstimate,
    PathSummary,
    ReturnTimeEstimate,
)

T = TypeVar("T")

CHUNK = 256


class SimConfig(BaseModel):
    seed: int = Field(default_factory=lambda: settings.SEED, ge=0, lt=2 ** 64)
    horizon: float = Field(default=100_000, gt=0)
    horizon_kind: Literal["events", "time"] = "events"
    excursion_count: int = Field(default_factory=lambda: settings.EXCURSIONS, ge=1)
    initial_state: int = Field(default=0, ge=0)
    step_guard: int = Field(default_factory=lambda: settings.STEP_GUARD, ge=1)
    workers: int = Field(default_factory=lambda: settings.WORKERS, ge=1)
    record_path: bool = False


# --- Random streams ---

class UniformStream:
    """Buffered U[0, 1) draws from one generator; block size doubles up to 4096."""

    def __init__(self, rng: np.random.Generator):
        self._rng = rng
        self._buf: List[float] = []
        self._pos = 0
        self._block = 32

    def next(self) -> float:
        if self._pos >= len(self._buf):
            self._buf = self._rng.random(self._block).tolist()
            self._pos = 0
            self._block = min(self._block * 2, 4096)
        u = self._buf[self._pos]
        self._pos += 1
        return u


class ExponentialStream:
    """Buffered standard exponential draws; divide by the rate at use."""

    def __init__(self, rng: np.random.Generator):
        self._rng = rng
        self._buf: List[float] = []
        self._pos = 0
        self._block = 32

    def next(self) -> float:
        if self._pos >= len(self._buf):
            self._buf = self._rng.standard_exponential(self._block).tolist()
            self._pos = 0
            self._block = min(self._block * 2, 4096)
        x = self._buf[self._pos]
        self._pos += 1
        return x


def stream_pair(seed: int, key: Tuple[int, ...] = ()) -> Tuple[UniformStream, ExponentialStream]:
    """(jump stream, holding stream) for the sub-stream `key` of `seed`."""
    jump_seq, hold_seq = np.random.SeedSequence(seed, spawn_key=key).spawn(2)
    return (
        UniformStream(np.random.Generator(np.random.PCG64(jump_seq))),
        ExponentialStream(np.random.Generator(np.random.PCG64(hold_seq))),
    )


# --- Jump law lookup ---

class RateTable:
    """Per-row cumulative jump probabilities and total rates, indexed like rates_at."""

    def __init__(self, model: ProcessModel):
        self.R = model.R
        self.prefix_len = model.prefix_len
        self.period = model.period
        rows = list(model.profile.prefix) + list(model.tail_rows)
        self._cum = [self._cumulative(row) for row in rows]
        self._total = [float(sum(row)) for row in rows]

    @staticmethod
    def _cumulative(row: Sequence[float]) -> List[float]:
        total = sum(row)
        cum = np.cumsum(np.asarray(row, dtype=float) / total).tolist()
        last = max(k for k, rate in enumerate(row) if rate > 0)
        for k in range(last, len(cum)):
            cum[k] = 1.0
        return cum

    def _slot(self, i: int) -> int:
        if i < self.prefix_len:
            return i
        return self.prefix_len + (i - self.prefix_len) % self.period

    def total(self, i: int) -> float:
        return self._total[self._slot(i)]

    def jump(self, i: int, u: float) -> int:
        """Next state from i given a uniform draw u in [0, 1)."""
        k = bisect_right(self._cum[self._slot(i)], u)
        return i - 1 if k == 0 else i + k


# --- Path simulators ---

class BaseSimulator(ABC):
    """Shared event loop; subclasses decide how long each visit lasts."""

    def __init__(self, model: ProcessModel, cfg: SimConfig):
        self.model = model
        self.cfg = cfg
        self.table = RateTable(model)
        self.jumps, self.holds = stream_pair(cfg.seed)
        self.metrics = {
            "events": 0,
            "wall_time": 0.0,
        }

    @abstractmethod
    def _holding_time(self, state: int) -> float:
        """Time spent at `state` before the next jump."""
        pass

    def run(self) -> PathSummary:
        cfg = self.cfg
        start = time.time()
        state = cfg.initial_state
        clock = 0.0
        events = 0
        occupation: List[float] = []
        visits: List[int] = []
        path = [state] if cfg.record_path else None
        eta_list: List[float] = []
        T_list: List[int] = []
        excursion_start: Optional[Tuple[float, int]] = (0.0, 0) if state == 0 else None
        by_time = cfg.horizon_kind == "time"
        reached = cfg.horizon_kind

        while True:
            if not by_time and events >= cfg.horizon:
                break
            while len(occupation) <= state:
                occupation.append(0.0)
                visits.append(0)
            hold = self._holding_time(state)
            if by_time and clock + hold >= cfg.horizon:
                occupation[state] += cfg.horizon - clock
                clock = cfg.horizon
                break
            occupation[state] += hold
            visits[state] += 1
            clock += hold
            state = self.table.jump(state, self.jumps.next())
            events += 1
            if path is not None:
                path.append(state)
            if state == 0:
                if excursion_start is not None:
                    eta_list.append(clock - excursion_start[0])
                    T_list.append(events - excursion_start[1])
                excursion_start = (clock, events)

        self.metrics["events"] += events
        self.metrics["wall_time"] += time.time() - start
        logger.info(
            f"{type(self).__name__}: {events} events, {len(eta_list)} excursions "
            f"in {self.metrics['wall_time']:.2f}s"
        )
        return PathSummary(
            occupation_time=occupation,
            visit_counts=visits,
            total_time=clock,
            event_count=events,
            excursions_completed=len(eta_list),
            return_times_eta=eta_list,
            return_steps_T=T_list,
            horizon_reached=reached,
            path=path,
        )


class CTMCSimulator(BaseSimulator):
    def _holding_time(self, state: int) -> float:
        return self.holds.next() / self.table.total(state)


class EmbeddedSimulator(BaseSimulator):
    """Each step of the jump chain counts as one time unit; no holding draws."""

    def _holding_time(self, state: int) -> float:
        return 1.0


def simulate_ctmc(model: ProcessModel, cfg: SimConfig) -> PathSummary:
    return CTMCSimulator(model, cfg).run()


def simulate_embedded(model: ProcessModel, cfg: SimConfig) -> PathSummary:
    return EmbeddedSimulator(model, cfg).run()


# --- Independent excursions from 0 ---

@dataclass
class Excursion:
    path: List[int]
    holds: Optional[List[float]]

    @property
    def T(self) -> int:
        return len(self.path) - 1

    @property
    def eta(self) -> float:
        return math.fsum(self.holds) if self.holds is not None else float("nan")


def sample_excursion(table: RateTable, jumps: UniformStream, holds: Optional[ExponentialStream],
                     step_guard: int, index: int = 0) -> Excursion:
    """One excursion of the jump chain from 0 to its first return to 0."""
    path = [0]
    hold_list: Optional[List[float]] = [] if holds is not None else None
    state = 0
    while True:
        if hold_list is not None:
            hold_list.append(holds.next() / table.total(state))
        state = table.jump(state, jumps.next())
        path.append(state)
        if state == 0:
            return Excursion(path, hold_list)
        if len(path) > step_guard:
            raise ExcursionBudgetExceeded(index, step_guard)


def _run_indexed(count: int, workers: int, task: Callable[[int], T]) -> List[T]:
    """task(j) for j in 0..count-1, results in index order for any worker count."""
    chunks = [range(lo, min(lo + CHUNK, count)) for lo in range(0, count, CHUNK)]

    def run_chunk(indices: range) -> List[T]:
        return [task(j) for j in indices]

    if workers <= 1:
        batches = [run_chunk(c) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            batches = list(pool.map(run_chunk, chunks))
    return [item for batch in batches for item in batch]


def _excursions(model: ProcessModel, cfg: SimConfig, timed: bool, reduce: Callable[[Excursion], T]) -> List[T]:
    table = RateTable(model)

    def task(j: int) -> T:
        jumps, holds = stream_pair(cfg.seed, (j,))
        return reduce(sample_excursion(table, jumps, holds if timed else None, cfg.step_guard, j))

    return _run_indexed(cfg.excursion_count, cfg.workers, task)


def _mean_se(values: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    n = values.shape[0]
    mean = values.mean(axis=0)
    if n < 2:
        return mean, np.full_like(mean, math.nan, dtype=float)
    return mean, values.std(axis=0, ddof=1) / math.sqrt(n)


def estimate_return_times(model: ProcessModel, cfg: SimConfig) -> ReturnTimeEstimate:
    """Sample means and standard errors of T (steps) and eta (time) over independent excursions."""
    start = time.time()
    samples = _excursions(model, cfg, True, lambda ex: (ex.T, ex.eta))
    arr = np.asarray(samples, dtype=float)
    mean, se = _mean_se(arr)
    logger.info(f"Return times from {cfg.excursion_count} excursions in {time.time() - start:.2f}s")
    return ReturnTimeEstimate(
        excursions=cfg.excursion_count,
        mean_T=float(mean[0]), se_T=float(se[0]),
        mean_eta=float(mean[1]), se_eta=float(se[1]),
    )


def collect_branching_counts(model: ProcessModel, cfg: SimConfig, levels: Sequence[int]) -> BranchingEstimate:
    """Empirical mean of U_i per requested level, plus a pathwise check of the occupation identity."""
    R = model.R
    levels = sorted(set(levels))

    def reduce(ex: Excursion) -> Tuple[List[Tuple[int, ...]], bool]:
        counts = count_crossings(ex.path, R)
        return [counts.U(i) for i in levels], occupation_identity_holds(ex.path, counts)

    samples = _excursions(model, cfg, False, reduce)
    violations = sum(1 for _, ok in samples if not ok)
    if violations:
        logger.error(f"Occupation identity failed on {violations} excursions")

    mean: Dict[int, List[float]] = {}
    stderr: Dict[int, List[float]] = {}
    for pos, level in enumerate(levels):
        arr = np.asarray([vectors[pos] for vectors, _ in samples], dtype=float)
        m, se = _mean_se(arr)
        mean[level] = m.tolist()
        stderr[level] = se.tolist()
    return BranchingEstimate(
        excursions=cfg.excursion_count, levels=list(levels),
        mean=mean, stderr=stderr, identity_violations=violations,
    )


def estimate_occupation_times(model: ProcessModel, cfg: SimConfig, levels: Sequence[int]) -> OccupationEstimate:
    """Per-excursion time spent at each level; its mean is the expected occupation time."""
    levels = sorted(set(levels))

    def reduce(ex: Excursion) -> List[float]:
        spent = {level: 0.0 for level in levels}
        for state, hold in zip(ex.path, ex.holds):
            if state in spent:
                spent[state] += hold
        return [spent[level] for level in levels]

    arr = np.asarray(_excursions(model, cfg, True, reduce), dtype=float)
    mean, se = _mean_se(arr)
    return OccupationEstimate(
        excursions=cfg.excursion_count, levels=list(levels),
        mean={lv: float(mean[p]) for p, lv in enumerate(levels)},
        stderr={lv: float(se[p]) for p, lv in enumerate(levels)},
    )


def estimate_exit_frequency(model: ProcessModel, cfg: SimConfig, a: int, b: int, k: int) -> ExitFrequency:
    """Fraction of embedded runs from k that reach [b, inf) before a."""
    table = RateTable(model)

    def task(j: int) -> int:
        jumps, _ = stream_pair(cfg.seed, (j,))
        state = k
        for _ in range(cfg.step_guard):
            state = table.jump(state, jumps.next())
            if state >= b:
                return 1
            if state <= a:
                return 0
        raise ExcursionBudgetExceeded(j, cfg.step_guard)

    hits = _run_indexed(cfg.excursion_count, cfg.workers, task)
    n = len(hits)
    p = sum(hits) / n
    return ExitFrequency(a=a, b=b, k=k, trials=n, frequency=p, stderr=math.sqrt(p * (1 - p) / n))
