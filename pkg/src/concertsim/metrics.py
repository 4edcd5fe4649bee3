"""Measurement collection, summary statistics, conservation checks, and
deterministic export of run results.

Percentiles are nearest-rank (no interpolation) so every reported value
is an actual sample. Energy integrates a piecewise-constant power model
over exact nanosecond intervals.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .errors import EmptySamples, EmptyWindow
from .kernel import NS_PER_S, EventTrace, Station, Task, ns_to_s, s_to_ns


@dataclass
class LatencySample:
    task_id: int
    klass: str
    created_at_s: float
    finished_at_s: float
    deadline_met: Optional[bool]  # None when the task had no deadline

    @property
    def latency_s(self) -> float:
        return self.finished_at_s - self.created_at_s


def sample_from_task(task: Task) -> LatencySample:
    if task.finished_ns is None:
        raise ValueError(f"task {task.id} not finished")
    return LatencySample(
        task_id=task.id,
        klass=task.klass.value,
        created_at_s=task.created_at_s,
        finished_at_s=task.finished_at_s,
        deadline_met=task.deadline_met,
    )


def _nearest_rank(sorted_values: list[float], pct: float) -> float:
    idx = math.ceil(pct / 100.0 * len(sorted_values))
    return sorted_values[max(idx, 1) - 1]


def summarize(samples: list[LatencySample]) -> dict:
    """Mean, nearest-rank percentiles, and deadline miss rate."""
    if not samples:
        raise EmptySamples("no latency samples")
    lat = sorted(s.latency_s for s in samples)
    deadlined = [s for s in samples if s.deadline_met is not None]
    misses = sum(1 for s in deadlined if not s.deadline_met)
    return {
        "count": len(lat),
        "mean_s": sum(lat) / len(lat),
        "p50_s": _nearest_rank(lat, 50),
        "p95_s": _nearest_rank(lat, 95),
        "p99_s": _nearest_rank(lat, 99),
        "miss_rate": (misses / len(deadlined)) if deadlined else None,
    }


# -- Little's law -----------------------------------------------------------


def littles_law_check(
    trace: EventTrace, station_id: str, window: tuple[float, float]
) -> dict:
    """Replay arrivals/departures for one station out of a trace and check
    L = lambda * W over the window.

    L is the time average of the in-system count, lambda the completion
    rate, W the mean sojourn of tasks that both arrive and complete inside
    the window.
    """
    t0, t1 = s_to_ns(window[0]), s_to_ns(window[1])
    if t1 <= t0:
        raise EmptyWindow("window must have positive length")
    arrive: dict[int, int] = {}
    area = 0
    n = 0
    last = t0
    completions = 0
    sojourn_sum = 0
    for time_ns, _seq, kind, summary in trace.records:
        if kind not in ("TaskArrival", "ServiceEnd"):
            continue
        fields = dict(p.split("=") for p in summary.split() if "=" in p)
        if fields.get("station") != station_id:
            continue
        if time_ns > t1:
            break
        tid = int(fields["task"])
        if kind == "TaskArrival":
            if time_ns >= t0:
                area += n * (time_ns - last)
                last = time_ns
                n += 1
                arrive[tid] = time_ns
        else:
            if time_ns >= t0:
                area += n * (time_ns - last)
                last = time_ns
                n -= 1
                if tid in arrive:
                    completions += 1
                    sojourn_sum += time_ns - arrive.pop(tid)
    area += n * (t1 - last)
    if completions == 0:
        raise EmptyWindow(f"no completions at {station_id} in window")
    big_l = area / (t1 - t0)
    lam = completions / ns_to_s(t1 - t0)
    w = sojourn_sum / completions / NS_PER_S
    err = abs(big_l - lam * w) / big_l if big_l > 0 else math.inf
    return {"L": big_l, "lambda": lam, "W": w, "relative_error": err}


def littles_law_from_station(station: Station, t0_s: float, t1_ns: int) -> dict:
    """Same identity from the station's exact integer integrals, usable on
    runs too large to trace."""
    t0 = s_to_ns(t0_s)
    if t1_ns <= t0:
        raise EmptyWindow("window must have positive length")
    if station.completions == 0:
        raise EmptyWindow(f"no completions at {station.node_id}")
    big_l = station.time_average_occupancy(t1_ns, t0)
    lam = station.completions / ns_to_s(t1_ns - t0)
    w = station.mean_sojourn_s()
    err = abs(big_l - lam * w) / big_l if big_l > 0 else math.inf
    return {"L": big_l, "lambda": lam, "W": w, "relative_error": err}


def utilization_from_trace(
    trace: EventTrace, station_id: str, servers: int, window: tuple[float, float]
) -> float:
    """Busy fraction replayed from ServiceStart/ServiceEnd records; the
    independent check against Station.utilization."""
    t0, t1 = s_to_ns(window[0]), s_to_ns(window[1])
    busy = 0
    area = 0
    last = t0
    ends: dict[int, int] = {}
    for time_ns, _seq, kind, summary in trace.records:
        if kind not in ("ServiceStart", "ServiceEnd"):
            continue
        fields = dict(p.split("=") for p in summary.split() if "=" in p)
        if fields.get("station") != station_id or time_ns > t1:
            continue
        area += busy * (time_ns - last)
        last = time_ns
        if kind == "ServiceStart":
            busy += 1
            ends[int(fields["task"])] = time_ns
        else:
            busy -= 1
    area += busy * (t1 - last)
    return area / ((t1 - t0) * servers)


@dataclass
class UtilizationSeries:
    resource_id: str
    busy_fraction: float
    window_s: tuple[float, float]


# -- energy --------------------------------------------------------------------


class EnergyLedger:
    """Per-node integral of a piecewise-constant power draw."""

    def __init__(self):
        self._power_w: dict[str, float] = {}
        self._since_ns: dict[str, int] = {}
        self._joules: dict[str, float] = {}
        self.change_log: list[tuple[str, int, float]] = []

    def set_power(self, node_id: str, now_ns: int, watts: float) -> None:
        prev = self._power_w.get(node_id)
        if prev is not None:
            self._joules[node_id] = self._joules.get(node_id, 0.0) + prev * ns_to_s(
                now_ns - self._since_ns[node_id]
            )
        else:
            self._joules.setdefault(node_id, 0.0)
        self._power_w[node_id] = watts
        self._since_ns[node_id] = now_ns
        self.change_log.append((node_id, now_ns, watts))

    def energy_j(self, node_id: str, now_ns: int) -> float:
        total = self._joules.get(node_id, 0.0)
        if node_id in self._power_w:
            total += self._power_w[node_id] * ns_to_s(now_ns - self._since_ns[node_id])
        return total

    def total_j(self, now_ns: int) -> float:
        return sum(self.energy_j(n, now_ns) for n in sorted(self._power_w))

    def per_node_j(self, now_ns: int) -> dict[str, float]:
        return {n: self.energy_j(n, now_ns) for n in sorted(self._power_w)}


def replay_energy(change_log: Iterable[tuple[str, int, float]], end_ns: int) -> dict[str, float]:
    """Oracle recomputation of the ledger from its change log."""
    power: dict[str, float] = {}
    since: dict[str, int] = {}
    joules: dict[str, float] = {}
    for node, t, watts in change_log:
        if node in power:
            joules[node] = joules.get(node, 0.0) + power[node] * ns_to_s(t - since[node])
        joules.setdefault(node, 0.0)
        power[node] = watts
        since[node] = t
    for node in power:
        joules[node] += power[node] * ns_to_s(end_ns - since[node])
    return joules


# -- export -------------------------------------------------------------------


@dataclass
class RunResults:
    config_echo: dict
    summary: dict
    samples: list[LatencySample] = field(default_factory=list)
    trace: Optional[EventTrace] = None
    resources: dict = field(default_factory=dict)


SAMPLE_COLUMNS = ["task_id", "class", "created_at_s", "finished_at_s", "latency_s", "deadline_met"]

EXPORT_FORMATS = ("csv", "json")


def _flatten(prefix: str, value, out: list[tuple[str, object]]) -> None:
    if isinstance(value, dict):
        for key in value:
            _flatten(f"{prefix}.{key}" if prefix else str(key), value[key], out)
    elif isinstance(value, (list, tuple)):
        out.append((prefix, json.dumps(value)))
    else:
        out.append((prefix, value))


def _sample_row(s: LatencySample) -> list:
    met = "" if s.deadline_met is None else str(s.deadline_met).lower()
    return [s.task_id, s.klass, repr(s.created_at_s), repr(s.finished_at_s), repr(s.latency_s), met]


def export(results: RunResults, fmt: str, outdir: str) -> list[str]:
    """Write summary/samples/trace/resources/config files; byte-stable
    across re-exports of the same results."""
    if fmt not in EXPORT_FORMATS:
        raise ValueError(f"unknown format {fmt!r}; expected one of {EXPORT_FORMATS}")
    os.makedirs(outdir, exist_ok=True)
    written: list[str] = []

    def path(name: str) -> str:
        p = os.path.join(outdir, name)
        written.append(p)
        return p

    if fmt == "csv":
        with open(path("summary.csv"), "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["metric", "value"])
            flat: list[tuple[str, object]] = []
            _flatten("", results.summary, flat)
            for key, value in flat:
                writer.writerow([key, "" if value is None else value])
    else:
        payload = {
            "config": results.config_echo,
            "summary": results.summary,
            "samples": [
                {
                    "task_id": s.task_id,
                    "class": s.klass,
                    "created_at_s": s.created_at_s,
                    "finished_at_s": s.finished_at_s,
                    "latency_s": s.latency_s,
                    "deadline_met": s.deadline_met,
                }
                for s in results.samples
            ],
        }
        with open(path("summary.json"), "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")

    with open(path("samples.csv"), "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(SAMPLE_COLUMNS)
        for s in results.samples:
            writer.writerow(_sample_row(s))

    if results.trace is not None:
        results.trace.write(path("trace.log"))

    with open(path("resources.json"), "w", encoding="utf-8") as fh:
        json.dump(results.resources, fh, indent=2, sort_keys=True)
        fh.write("\n")

    with open(path("config-echo.json"), "w", encoding="utf-8") as fh:
        json.dump(results.config_echo, fh, indent=2, sort_keys=True)
        fh.write("\n")

    return written
