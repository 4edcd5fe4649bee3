"""Deterministic discrete-event kernel: clock, event queue, seeded streams,
and queueing stations.

Time is kept as an integer count of nanoseconds internally so that event
order never depends on floating-point rounding; seconds appear only at the
API surface. Events fire in (time, seq) order where seq is the global
scheduling order, which makes every run with the same (config, seed)
byte-identical.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass
from enum import Enum
from heapq import heapify, heappop, heappush
from typing import Any, Callable, NamedTuple, Optional

from .errors import PastEvent

NS_PER_S = 1_000_000_000


def s_to_ns(t_s: float) -> int:
    return round(t_s * NS_PER_S)


def ns_to_s(t_ns: int) -> float:
    return t_ns / NS_PER_S


class EventKind(Enum):
    TASK_ARRIVAL = "TaskArrival"
    SERVICE_START = "ServiceStart"
    SERVICE_END = "ServiceEnd"
    LINK_DELIVERY_END = "LinkDeliveryEnd"
    NCI_TICK = "NciTick"
    CONTROL_DIRECTIVE = "ControlDirective"
    SCENARIO_ACTION = "ScenarioAction"


class Event(NamedTuple):
    time_ns: int
    seq: int
    kind: EventKind
    payload: Any


class TaskClass(Enum):
    BASEBAND = "Baseband"
    M2M = "M2M"
    GAMING_FRAME = "GamingFrame"
    GAMING_INPUT = "GamingInput"
    GENERIC = "Generic"


@dataclass(slots=True)
class Task:
    """One unit of computation-plus-delivery flowing through the system."""

    id: int
    created_ns: int
    demand_wu: float
    deadline_ns: Optional[int] = None
    size_bits: float = 0.0
    src_node: Optional[str] = None
    dst_node: Optional[str] = None
    klass: TaskClass = TaskClass.GENERIC
    accelerable: bool = False
    finished_ns: Optional[int] = None
    dropped_reason: Optional[str] = None
    # set by the station currently holding the task
    station_arrived_ns: int = 0
    # per-task completion hook; overrides the station-level on_complete
    on_done: Optional[Callable[["Simulator", "Task"], None]] = None

    @property
    def created_at_s(self) -> float:
        return ns_to_s(self.created_ns)

    @property
    def finished_at_s(self) -> Optional[float]:
        return None if self.finished_ns is None else ns_to_s(self.finished_ns)

    @property
    def deadline_s(self) -> Optional[float]:
        return None if self.deadline_ns is None else ns_to_s(self.deadline_ns)

    @property
    def sojourn_s(self) -> Optional[float]:
        if self.finished_ns is None:
            return None
        return ns_to_s(self.finished_ns - self.created_ns)

    @property
    def deadline_met(self) -> Optional[bool]:
        if self.deadline_ns is None or self.finished_ns is None:
            return None
        return self.finished_ns <= self.deadline_ns


class RngStream:
    """Named independent substreams derived from one master seed.

    Each substream is its own generator seeded from a stable string
    derivation, so draws on one substream never perturb another.
    """

    def __init__(self, seed: int):
        self.seed = seed
        self._streams: dict[str, random.Random] = {}

    def substream(self, name: str) -> random.Random:
        try:
            return self._streams[name]
        except KeyError:
            rng = random.Random(f"{self.seed}/{name}")
            self._streams[name] = rng
            return rng


class EventTrace:
    """Ordered record of processed events.

    Records are (time_ns, seq, kind-label, payload-summary) tuples; the
    export format is one `time_ns,seq,kind,summary` line per record.
    """

    def __init__(self, enabled: bool = True):
        self.enabled = enabled
        self.records: list[tuple[int, int, str, str]] = []

    def append(self, time_ns: int, seq: int, kind: EventKind, summary: str) -> None:
        self.records.append((time_ns, seq, kind.value, summary))

    def lines(self) -> list[str]:
        return [f"{t},{q},{k},{s}" for t, q, k, s in self.records]

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for line in self.lines():
                fh.write(line + "\n")

    def kinds(self) -> list[str]:
        return [rec[2] for rec in self.records]

    def summaries(self) -> list[str]:
        return [rec[3] for rec in self.records]

    def __len__(self) -> int:
        return len(self.records)


class Discipline(Enum):
    FCFS = "FCFS"
    EDF = "EDF"


class Station:
    """Multi-server queueing station instrumenting one node.

    Service time is demand / (rate * accel); accel applies only to tasks
    flagged accelerable. Exact integer-nanosecond integrals of queue
    length and busy servers are kept for occupancy and utilization checks.
    """

    __slots__ = (
        "node_id",
        "servers",
        "rate_wups",
        "discipline",
        "accel_factor",
        "sim",
        "on_complete",
        "queue",
        "busy_count",
        "n_in_system",
        "arrivals",
        "completions",
        "sojourn_sum_ns",
        "area_n_ns",
        "area_busy_ns",
        "_last_change_ns",
        "_edf_seq",
        "power_hook",
        "_busy_ends",
    )

    def __init__(
        self,
        node_id: str,
        servers: int = 1,
        rate_wups: float = 1.0,
        discipline: Discipline = Discipline.FCFS,
        accel_factor: float = 1.0,
        on_complete: Optional[Callable[["Simulator", Task], None]] = None,
    ):
        if servers < 1:
            raise ValueError("servers must be >= 1")
        if rate_wups <= 0:
            raise ValueError("rate_wups must be positive")
        self.node_id = node_id
        self.servers = servers
        self.rate_wups = rate_wups
        self.discipline = discipline
        self.accel_factor = accel_factor
        self.sim: Optional[Simulator] = None
        self.on_complete = on_complete
        self.queue: Any = deque() if discipline is Discipline.FCFS else []
        self.busy_count = 0
        self.n_in_system = 0
        self.arrivals = 0
        self.completions = 0
        self.sojourn_sum_ns = 0
        self.area_n_ns = 0
        self.area_busy_ns = 0
        self._last_change_ns = 0
        self._edf_seq = 0
        self.power_hook: Optional[Callable[[int, int], None]] = None
        self._busy_ends: list[int] = []

    def _advance_integrals(self, now_ns: int) -> None:
        dt = now_ns - self._last_change_ns
        if dt:
            self.area_n_ns += self.n_in_system * dt
            self.area_busy_ns += self.busy_count * dt
            self._last_change_ns = now_ns

    def service_time_ns(self, task: Task) -> int:
        accel = self.accel_factor if task.accelerable else 1.0
        return s_to_ns(task.demand_wu / (self.rate_wups * accel))

    def queue_depth(self) -> int:
        return len(self.queue)

    def work_ahead_wu(self) -> float:
        """Demand queued at this station, excluding tasks in service."""
        if self.discipline is Discipline.FCFS:
            return sum(t.demand_wu for t in self.queue)
        return sum(t.demand_wu for _, _, t in self.queue)

    def _queued_in_order(self) -> list[Task]:
        if self.discipline is Discipline.FCFS:
            return list(self.queue)
        return [t for _, _, t in sorted(self.queue)]

    def predict_completion_ns(
        self,
        now_ns: int,
        task: Task,
        arrival_ns: Optional[int] = None,
        pending: tuple[tuple[int, int], ...] = (),
    ) -> int:
        """Absolute completion-time estimate for a prospective arrival.

        Replays in-service finish times, the current queue, and any
        `pending` (arrival_ns, service_ns) commitments already dispatched
        toward this station, greedily over the servers; exact for FCFS
        given those commitments. For EDF only queued tasks with an
        earlier-or-equal deadline count as ahead.
        """
        if arrival_ns is None:
            arrival_ns = now_ns
        free = sorted(max(e, now_ns) for e in self._busy_ends)
        while len(free) < self.servers:
            free.insert(0, now_ns)
        heapify(free)
        ahead = self._queued_in_order()
        if self.discipline is Discipline.EDF and task.deadline_ns is not None:
            ahead = [
                t
                for t in ahead
                if t.deadline_ns is not None and t.deadline_ns <= task.deadline_ns
            ]
        for queued in ahead:
            start = heappop(free)
            heappush(free, start + self.service_time_ns(queued))
        for a, svc in sorted(p for p in pending if p[0] <= arrival_ns):
            start = max(a, heappop(free))
            heappush(free, start + svc)
        return max(arrival_ns, heappop(free)) + self.service_time_ns(task)

    # -- event plumbing -------------------------------------------------

    def offer(self, sim: Simulator, task: Task) -> None:
        now = sim.clock_ns
        self._advance_integrals(now)
        self.n_in_system += 1
        self.arrivals += 1
        task.station_arrived_ns = now
        if self.busy_count < self.servers:
            self.busy_count += 1
            if self.power_hook:
                self.power_hook(now, self.busy_count)
            self._start(sim, task)
        elif self.discipline is Discipline.FCFS:
            self.queue.append(task)
        else:
            key = task.deadline_ns if task.deadline_ns is not None else (1 << 62)
            self._edf_seq += 1
            heappush(self.queue, (key, self._edf_seq, task))

    def _start(self, sim: Simulator, task: Task) -> None:
        # service begins the instant a server is seized; recorded in the
        # trace directly rather than via an extra heap round trip
        if sim.trace.enabled:
            sim.trace.append(
                sim.clock_ns,
                sim.next_seq(),
                EventKind.SERVICE_START,
                f"station={self.node_id} task={task.id}",
            )
        end_ns = sim.clock_ns + self.service_time_ns(task)
        self._busy_ends.append(end_ns)
        sim._schedule_ns(end_ns, EventKind.SERVICE_END, (self, task))

    def _finish(self, sim: Simulator, task: Task) -> None:
        now = sim.clock_ns
        self._advance_integrals(now)
        self._busy_ends.remove(now)
        self.n_in_system -= 1
        self.completions += 1
        self.sojourn_sum_ns += now - task.station_arrived_ns
        if self.queue:
            if self.discipline is Discipline.FCFS:
                nxt = self.queue.popleft()
            else:
                nxt = heappop(self.queue)[2]
            self._start(sim, nxt)
        else:
            self.busy_count -= 1
            if self.power_hook:
                self.power_hook(now, self.busy_count)
        done = task.on_done or self.on_complete
        if done is not None:
            done(sim, task)
        else:
            sim.complete_task(task)

    # -- observed statistics --------------------------------------------

    def mean_sojourn_s(self) -> float:
        if self.completions == 0:
            return float("nan")
        return self.sojourn_sum_ns / self.completions / NS_PER_S

    def time_average_occupancy(self, now_ns: int, start_ns: int = 0) -> float:
        area = self.area_n_ns + self.n_in_system * (now_ns - self._last_change_ns)
        return area / (now_ns - start_ns)

    def utilization(self, now_ns: int, start_ns: int = 0) -> float:
        area = self.area_busy_ns + self.busy_count * (now_ns - self._last_change_ns)
        return area / ((now_ns - start_ns) * self.servers)


class PoissonSource:
    """Open Poisson arrival process feeding one station."""

    def __init__(
        self,
        name: str,
        rate_per_s: float,
        station: Station,
        demand_dist: Callable[[random.Random], float],
        stop_t_s: float,
        klass: TaskClass = TaskClass.GENERIC,
        deadline_offset_s: Optional[float] = None,
        src_node: Optional[str] = None,
        arrival_delay_s: float = 0.0,
        task_setup: Optional[Callable[[Task], None]] = None,
    ):
        if rate_per_s <= 0:
            raise ValueError("rate must be positive")
        self.name = name
        self.rate = rate_per_s
        self.station = station
        self.demand_dist = demand_dist
        self.stop_ns = s_to_ns(stop_t_s)
        self.klass = klass
        self.deadline_offset_ns = (
            None if deadline_offset_s is None else s_to_ns(deadline_offset_s)
        )
        self.src_node = src_node
        # transport leg between creation and arrival at the station
        self.arrival_delay_ns = s_to_ns(arrival_delay_s)
        self.task_setup = task_setup
        self._last_created_ns = 0

    def start(self, sim: Simulator) -> None:
        self._last_created_ns = sim.clock_ns
        self._schedule_next(sim, sim.clock_ns)

    def _schedule_next(self, sim: Simulator, now_ns: int) -> None:
        # gaps chain from the previous creation instant, not the (possibly
        # transport-delayed) arrival event that triggered this call
        gap = sim.rng.substream("arrivals").expovariate(self.rate)
        t = self._last_created_ns + s_to_ns(gap)
        if t >= self.stop_ns:
            return
        self._last_created_ns = t
        demand = self.demand_dist(sim.rng.substream("services"))
        task = sim.new_task(
            created_ns=t,
            demand_wu=demand,
            klass=self.klass,
            src_node=self.src_node,
        )
        if self.deadline_offset_ns is not None:
            task.deadline_ns = t + self.deadline_offset_ns
        if self.task_setup is not None:
            self.task_setup(task)
        sim._schedule_ns(
            t + self.arrival_delay_ns, EventKind.TASK_ARRIVAL, (self.station, task, self)
        )


def exponential_demand(mean_wu: float) -> Callable[[random.Random], float]:
    return lambda rng: rng.expovariate(1.0 / mean_wu)


def deterministic_demand(value_wu: float) -> Callable[[random.Random], float]:
    return lambda rng: value_wu


def bounded_pareto_demand(
    alpha: float, low_wu: float, high_wu: float
) -> Callable[[random.Random], float]:
    """Inverse-CDF sampler for a Pareto truncated to [low, high]."""

    def draw(rng: random.Random) -> float:
        u = rng.random()
        la, ha = low_wu**alpha, high_wu**alpha
        return (-(u * ha - u * la - ha) / (ha * la)) ** (-1.0 / alpha)

    return draw


class Simulator:
    """Single-threaded event loop owning the clock, heap, and counters."""

    def __init__(self, seed: int = 0, trace: bool = True):
        self.clock_ns = 0
        self.rng = RngStream(seed)
        self.trace = EventTrace(enabled=trace)
        self._heap: list[Event] = []
        self._seq = 0
        self._task_seq = 0
        self.created = 0
        self.completed = 0
        self.dropped = 0
        self.completed_tasks: Optional[list[Task]] = None

    @property
    def now_s(self) -> float:
        return ns_to_s(self.clock_ns)

    def new_task(self, created_ns: int, demand_wu: float, **kw) -> Task:
        task = Task(id=self._task_seq, created_ns=created_ns, demand_wu=demand_wu, **kw)
        self._task_seq += 1
        self.created += 1
        return task

    def complete_task(self, task: Task) -> None:
        task.finished_ns = self.clock_ns
        self.completed += 1
        if self.completed_tasks is not None:
            self.completed_tasks.append(task)

    def drop_task(self, task: Task, reason: str) -> None:
        task.dropped_reason = reason
        self.dropped += 1

    @property
    def in_flight(self) -> int:
        return self.created - self.completed - self.dropped

    def next_seq(self) -> int:
        seq = self._seq
        self._seq += 1
        return seq

    # -- scheduling ------------------------------------------------------

    def _schedule_ns(self, time_ns: int, kind: EventKind, payload: Any) -> Event:
        if time_ns < self.clock_ns:
            raise PastEvent(f"{ns_to_s(time_ns)} s before clock {self.now_s} s")
        ev = Event(time_ns, self._seq, kind, payload)
        self._seq += 1
        heappush(self._heap, ev)
        return ev

    def schedule(self, at_s: float, kind: EventKind, payload: Any) -> Event:
        return self._schedule_ns(s_to_ns(at_s), kind, payload)

    def call_at(self, at_s: float, label: str, fn: Callable[["Simulator"], None]) -> Event:
        """Schedule a named scenario action; the label lands in the trace."""
        return self._schedule_ns(s_to_ns(at_s), EventKind.SCENARIO_ACTION, (label, fn))

    def offer(self, station: Station, task: Task, delay_s: float = 0.0) -> None:
        """Schedule a task arrival at a station after an optional delay."""
        self._schedule_ns(
            self.clock_ns + s_to_ns(delay_s), EventKind.TASK_ARRIVAL, (station, task, None)
        )

    def deliver(
        self, delay_s: float, label: str, task: Task, fn: Callable[["Simulator", Task], None]
    ) -> None:
        """Model a data-plane delivery finishing after delay_s."""
        self._schedule_ns(
            self.clock_ns + s_to_ns(delay_s), EventKind.LINK_DELIVERY_END, (label, task, fn)
        )

    # -- main loop -------------------------------------------------------

    def run_until(self, t_end_s: float) -> EventTrace:
        """Process every event strictly before t_end, then set clock = t_end."""
        return self._run_until_ns(s_to_ns(t_end_s))

    def _run_until_ns(self, t_end: int) -> EventTrace:
        if t_end < self.clock_ns:
            raise PastEvent(f"run_until({ns_to_s(t_end)}) before clock {self.now_s}")
        heap = self._heap
        trace = self.trace
        tracing = trace.enabled
        while heap and heap[0].time_ns < t_end:
            ev = heappop(heap)
            self.clock_ns = ev.time_ns
            kind = ev.kind
            payload = ev.payload
            if kind is EventKind.TASK_ARRIVAL:
                station, task, source = payload
                if tracing:
                    trace.append(
                        ev.time_ns, ev.seq, kind, f"station={station.node_id} task={task.id}"
                    )
                station.offer(self, task)
                if source is not None:
                    source._schedule_next(self, ev.time_ns)
            elif kind is EventKind.SERVICE_END:
                station, task = payload
                if tracing:
                    trace.append(
                        ev.time_ns, ev.seq, kind, f"station={station.node_id} task={task.id}"
                    )
                station._finish(self, task)
            elif kind is EventKind.LINK_DELIVERY_END:
                label, task, fn = payload
                fn(self, task)
                if tracing:
                    trace.append(ev.time_ns, ev.seq, kind, f"{label} task={task.id}")
            else:
                # NCI_TICK, CONTROL_DIRECTIVE, SCENARIO_ACTION: (label, callable)
                label, fn = payload
                fn(self)
                if tracing:
                    trace.append(ev.time_ns, ev.seq, kind, label)
        self.clock_ns = t_end
        return trace

    def run_to_drain(self, limit_s: float = 1e9) -> EventTrace:
        """Run until the event heap empties (or the safety limit)."""
        limit = s_to_ns(limit_s)
        while self._heap and self._heap[0].time_ns < limit:
            self._run_until_ns(self._heap[0].time_ns + 1)
        return self.trace
