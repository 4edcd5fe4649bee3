"""Closed-form queueing solvers: M/M/1, M/M/c (Erlang C), open Jackson
networks, and the centralized-vs-localized placement latency tradeoff.

Pure functions over immutable specs; used both from the `analyze` CLI and
as the independent oracle the event-driven simulator is checked against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import SingularRouting, Unstable

# Loads this close to saturation are rejected rather than producing
# astronomically large finite sojourns.
STABILITY_MARGIN = 1e-9

# Direct linear solve up to this node count; fixed-point iteration above.
_DIRECT_SOLVE_MAX_NODES = 64
_FIXED_POINT_TOL = 1e-12
_FIXED_POINT_MAX_ITER = 100_000


@dataclass(frozen=True)
class AnalyticNodeSpec:
    """One queueing node: Poisson arrivals, exponential service, c servers."""

    mu_per_s: float
    c: int = 1
    lambda_per_s: float = 0.0

    def __post_init__(self) -> None:
        if self.mu_per_s <= 0:
            raise ValueError("mu must be positive")
        if self.c < 1:
            raise ValueError("c must be >= 1")
        if self.lambda_per_s < 0:
            raise ValueError("lambda must be non-negative")


@dataclass(frozen=True)
class JacksonNetworkSpec:
    """Open network: per-node service specs, external Poisson injections,
    and a substochastic routing matrix P[i][j]."""

    nodes: tuple[AnalyticNodeSpec, ...]
    external_rates: tuple[float, ...]
    routing: tuple[tuple[float, ...], ...]

    def __post_init__(self) -> None:
        n = len(self.nodes)
        if len(self.external_rates) != n or len(self.routing) != n:
            raise ValueError("spec dimensions disagree")
        for row in self.routing:
            if len(row) != n:
                raise ValueError("routing matrix must be square")
            if any(p < 0 for p in row) or sum(row) > 1 + 1e-12:
                raise ValueError("routing rows must be substochastic")


@dataclass(frozen=True)
class PlacementSpec:
    """Per-site arrivals that can be served locally or pooled centrally."""

    task_rate_per_s: float
    n_sites: int
    local: AnalyticNodeSpec
    central: AnalyticNodeSpec
    fronthaul_one_way_s: float = 0.0

    def __post_init__(self) -> None:
        if self.n_sites < 1:
            raise ValueError("n_sites must be >= 1")
        if self.task_rate_per_s < 0 or not math.isfinite(self.task_rate_per_s):
            raise ValueError("task rate must be finite and non-negative")
        if self.fronthaul_one_way_s < 0:
            raise ValueError("fronthaul delay must be non-negative")


@dataclass(frozen=True)
class MmcMetrics:
    erlang_c: float
    wq_s: float
    w_s: float


@dataclass
class JacksonSolution:
    lambda_eff: list[float]
    w_s: list[float]
    mean_sojourn_s: float
    per_node: list[MmcMetrics] = field(default_factory=list)


def _require_stable(lam: float, mu: float, c: int) -> None:
    if lam >= c * mu * (1.0 - STABILITY_MARGIN):
        raise Unstable(f"lambda={lam} vs c*mu={c * mu}")


def mm1_sojourn(lam: float, mu: float) -> float:
    """Mean time in system of an M/M/1 queue: 1 / (mu - lambda)."""
    if mu <= 0:
        raise ValueError("mu must be positive")
    _require_stable(lam, mu, 1)
    return 1.0 / (mu - lam)


def erlang_c(lam: float, mu: float, c: int) -> float:
    """Probability an arrival waits in M/M/c, evaluated in log space so
    server counts up to ~1e4 do not overflow the factorials."""
    if lam == 0:
        return 0.0
    _require_stable(lam, mu, c)
    a = lam / mu
    rho = a / c
    log_a = math.log(a)
    # log of a^k / k! for k = 0..c-1, plus the waiting term at k = c
    log_terms = [k * log_a - math.lgamma(k + 1) for k in range(c)]
    log_wait = c * log_a - math.lgamma(c + 1) - math.log1p(-rho)
    m = max(max(log_terms), log_wait)
    denom = sum(math.exp(t - m) for t in log_terms) + math.exp(log_wait - m)
    return math.exp(log_wait - m) / denom


def mmc_metrics(lam: float, mu: float, c: int) -> MmcMetrics:
    """Erlang-C wait probability plus mean wait and sojourn for M/M/c."""
    if mu <= 0:
        raise ValueError("mu must be positive")
    if c < 1:
        raise ValueError("c must be >= 1")
    _require_stable(lam, mu, c)
    ec = erlang_c(lam, mu, c)
    wq = ec / (c * mu - lam)
    return MmcMetrics(erlang_c=ec, wq_s=wq, w_s=wq + 1.0 / mu)


def _solve_traffic_equations(spec: JacksonNetworkSpec) -> list[float]:
    n = len(spec.nodes)
    ext = np.array(spec.external_rates, dtype=float)
    p = np.array(spec.routing, dtype=float)
    if n <= _DIRECT_SOLVE_MAX_NODES:
        try:
            lam = np.linalg.solve(np.eye(n) - p.T, ext)
        except np.linalg.LinAlgError as exc:
            raise SingularRouting(str(exc)) from None
    else:
        lam = ext.copy()
        for _ in range(_FIXED_POINT_MAX_ITER):
            nxt = ext + p.T @ lam
            denom = np.maximum(np.abs(nxt), 1.0)
            if np.max(np.abs(nxt - lam) / denom) < _FIXED_POINT_TOL:
                lam = nxt
                break
            lam = nxt
        else:
            raise SingularRouting("traffic equations did not converge")
    if np.any(lam < -1e-9) or not np.all(np.isfinite(lam)):
        raise SingularRouting("traffic equations yield invalid rates")
    return [float(x) for x in lam]


def jackson_solve(spec: JacksonNetworkSpec) -> JacksonSolution:
    """Solve the traffic equations and evaluate each node as an independent
    M/M/c at its effective rate (product form).

    Network mean sojourn is the visit-weighted sum of per-node sojourns
    divided by the total external arrival rate.
    """
    lam_eff = _solve_traffic_equations(spec)
    per_node = []
    for node, lam in zip(spec.nodes, lam_eff):
        per_node.append(mmc_metrics(lam, node.mu_per_s, node.c))
    total_ext = sum(spec.external_rates)
    if total_ext <= 0:
        raise ValueError("network has no external arrivals")
    mean = sum(l * m.w_s for l, m in zip(lam_eff, per_node)) / total_ext
    return JacksonSolution(
        lambda_eff=lam_eff,
        w_s=[m.w_s for m in per_node],
        mean_sojourn_s=mean,
        per_node=per_node,
    )


class PlacementMode:
    ALL_LOCAL = "AllLocal"
    ALL_CENTRAL = "AllCentral"


def placement_latency(spec: PlacementSpec, mode: str) -> float:
    """Mean end-to-end latency under fully local or fully central placement.

    Central placement pays the fronthaul round trip (samples up, result
    back) on top of the pooled queue's sojourn.
    """
    if mode == PlacementMode.ALL_LOCAL:
        return mmc_metrics(spec.task_rate_per_s, spec.local.mu_per_s, spec.local.c).w_s
    if mode == PlacementMode.ALL_CENTRAL:
        total = spec.n_sites * spec.task_rate_per_s
        w = mmc_metrics(total, spec.central.mu_per_s, spec.central.c).w_s
        return 2.0 * spec.fronthaul_one_way_s + w
    raise ValueError(f"unknown placement mode {mode!r}")


def crossover_delay(spec: PlacementSpec) -> Optional[float]:
    """One-way fronthaul delay at which central placement stops paying off.

    Both modes are evaluated at zero fronthaul; since central latency is
    affine in the delay with slope 2, the crossover is
    (w_local - w_central) / 2, or None when central already loses at zero.
    """
    base = PlacementSpec(
        task_rate_per_s=spec.task_rate_per_s,
        n_sites=spec.n_sites,
        local=spec.local,
        central=spec.central,
        fronthaul_one_way_s=0.0,
    )
    w_local = placement_latency(base, PlacementMode.ALL_LOCAL)
    w_central = placement_latency(base, PlacementMode.ALL_CENTRAL)
    if w_central >= w_local:
        return None
    return (w_local - w_central) / 2.0
