"""Network experiment metrics: routing cost, throughput, and connectivity.

All three metrics are functions of the installed capacity vector, one entry
per directed edge.  Routing cost is a multi-commodity flow LP where demand
exceeding the installed capacity can be covered by renting extra capacity at
a premium.  Throughput is a single-pair maximum flow.  Connectivity is the
second-smallest eigenvalue of the weighted graph Laplacian, with capacities
as weights.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .geometry import Mono, Norm, Sense, dual_norm_value, norm_value
from .lp import LpProblem, LpStatus, solve_lp
from .model import LipschitzNorm, MetricRef

METRIC_ROUTING = "routing-cost"
METRIC_THROUGHPUT = "throughput"
METRIC_CONNECTIVITY = "connectivity"


@dataclass(eq=False)
class NetworkInstance:
    """Directed graph with per-edge routing costs and installed capacities.

    ``price_pre`` and ``price_in`` are the per-unit capacity prices paid
    up front and in service (rental), when the instance carries them.
    """

    node_count: int
    edges: tuple[tuple[int, int], ...]
    flow_cost: np.ndarray
    base_capacity: np.ndarray
    price_pre: np.ndarray | None = None
    price_in: np.ndarray | None = None

    def __post_init__(self):
        if self.node_count < 2:
            raise ValueError("need at least two nodes")
        self.edges = tuple((int(u), int(v)) for u, v in self.edges)
        self.flow_cost = np.asarray(self.flow_cost, dtype=float)
        self.base_capacity = np.asarray(self.base_capacity, dtype=float)
        n = len(self.edges)
        if n == 0:
            raise ValueError("need at least one edge")
        for u, v in self.edges:
            if not (0 <= u < self.node_count and 0 <= v < self.node_count):
                raise ValueError(f"edge ({u},{v}) out of range for {self.node_count} nodes")
            if u == v:
                raise ValueError(f"self-loop at node {u}")
        if self.flow_cost.shape != (n,) or np.any(self.flow_cost < 0) or not np.all(np.isfinite(self.flow_cost)):
            raise ValueError("flow costs must be nonnegative finite, one per edge")
        if self.base_capacity.shape != (n,) or np.any(self.base_capacity < 0) or not np.all(np.isfinite(self.base_capacity)):
            raise ValueError("capacities must be nonnegative finite, one per edge")
        for name in ("price_pre", "price_in"):
            p = getattr(self, name)
            if p is None:
                continue
            p = np.asarray(p, dtype=float)
            setattr(self, name, p)
            if p.shape != (n,) or np.any(p <= 0) or not np.all(np.isfinite(p)):
                raise ValueError(f"{name} must be positive finite, one per edge")
        if self.price_pre is not None and self.price_in is not None:
            if np.any(self.price_in < self.price_pre - 1e-12):
                raise ValueError("rental prices must not undercut up-front prices")

    @property
    def edge_count(self) -> int:
        return len(self.edges)


@dataclass(eq=False)
class DemandMatrix:
    """Sparse source/target demand, stored as (source, target, amount) triples."""

    node_count: int
    triples: tuple[tuple[int, int, float], ...]

    def __post_init__(self):
        seen = set()
        cleaned = []
        for s, t, f in self.triples:
            s, t, f = int(s), int(t), float(f)
            if not (0 <= s < self.node_count and 0 <= t < self.node_count):
                raise ValueError(f"demand pair ({s},{t}) out of range")
            if s == t:
                raise ValueError(f"demand from node {s} to itself")
            if not (f > 0 and np.isfinite(f)):
                raise ValueError(f"demand amount must be positive finite, got {f}")
            if (s, t) in seen:
                raise ValueError(f"duplicate demand pair ({s},{t})")
            seen.add((s, t))
            cleaned.append((s, t, f))
        self.triples = tuple(cleaned)

    def dense(self) -> np.ndarray:
        d = np.zeros((self.node_count, self.node_count))
        for s, t, f in self.triples:
            d[s, t] = f
        return d

    def __len__(self) -> int:
        return len(self.triples)


def incidence(net: NetworkInstance) -> np.ndarray:
    """Node-edge incidence matrix: +1 at the tail, -1 at the head of each edge."""
    a = np.zeros((net.node_count, net.edge_count))
    for e, (u, v) in enumerate(net.edges):
        a[u, e] = 1.0
        a[v, e] = -1.0
    return a


def demand_to_supply(demand: DemandMatrix) -> np.ndarray:
    """Per-commodity net supply at every node, one column per source node.

    Column s carries the flow-conservation right-hand side for the commodity
    originating at s: the total demand it sends on the diagonal entry, and
    the negated amounts at its targets.
    """
    d = demand.dense()
    return np.diag(d.sum(axis=1)) - d.T


def routing_cost(net: NetworkInstance, demand: DemandMatrix, capacity) -> float:
    """Cheapest way to route all demand, renting capacity beyond ``capacity``.

    One commodity per demand-bearing source node; flow on an edge beyond the
    installed capacity is paid for at the rental price.  Raises when the
    instance has no rental prices or the LP cannot be certified optimal.
    """
    if net.price_in is None:
        raise ValueError("routing cost needs rental prices on the instance")
    capacity = np.asarray(capacity, dtype=float)
    n = net.edge_count
    if capacity.shape != (n,):
        raise ValueError(f"capacity vector must have one entry per edge ({n})")
    supply = demand_to_supply(demand)
    sources = [s for s in range(net.node_count) if supply[s, s] > 0]
    if not sources:
        return 0.0
    k = net.node_count
    a = incidence(net)
    n_commod = len(sources)
    n_var = n_commod * n + n  # per-commodity flows, then rented capacity
    a_eq = np.zeros((n_commod * k, n_var))
    b_eq = np.zeros(n_commod * k)
    for ci, s in enumerate(sources):
        a_eq[ci * k:(ci + 1) * k, ci * n:(ci + 1) * n] = a
        b_eq[ci * k:(ci + 1) * k] = supply[:, s]
    a_ub = np.zeros((n, n_var))
    for ci in range(n_commod):
        a_ub[:, ci * n:(ci + 1) * n] = np.eye(n)
    a_ub[:, n_commod * n:] = -np.eye(n)
    c = np.concatenate([np.tile(net.flow_cost, n_commod), net.price_in])
    sol = solve_lp(LpProblem(c=c, a_ub=a_ub, b_ub=capacity.copy(), a_eq=a_eq, b_eq=b_eq))
    if sol.status != LpStatus.OPTIMAL:
        raise RuntimeError(f"routing LP ended with status {sol.status.value}")
    return sol.value


def routing_cost_lipschitz(net: NetworkInstance, norm: Norm) -> float:
    """Sensitivity bound of the routing cost to capacity changes in ``norm``."""
    if net.price_in is None:
        raise ValueError("routing sensitivity needs rental prices on the instance")
    return dual_norm_value(net.price_in, norm)


def max_flow(net: NetworkInstance, capacity, source: int, target: int,
             eps: float = 1e-12) -> float:
    """Maximum s-t flow under ``capacity``, by blocking flows on level graphs."""
    if source == target:
        raise ValueError("source and target must differ")
    k = net.node_count
    if not (0 <= source < k and 0 <= target < k):
        raise ValueError("source/target out of range")
    capacity = np.asarray(capacity, dtype=float)
    if capacity.shape != (net.edge_count,) or np.any(capacity < 0):
        raise ValueError("capacity vector must be nonnegative, one entry per edge")
    # arc list with paired reverse arcs at even/odd indices
    to: list[int] = []
    cap: list[float] = []
    adj: list[list[int]] = [[] for _ in range(k)]
    for e, (u, v) in enumerate(net.edges):
        adj[u].append(len(to)); to.append(v); cap.append(float(capacity[e]))
        adj[v].append(len(to)); to.append(u); cap.append(0.0)
    total = 0.0
    while True:
        level = [-1] * k
        level[source] = 0
        queue = [source]
        for u in queue:
            for aid in adj[u]:
                if cap[aid] > eps and level[to[aid]] < 0:
                    level[to[aid]] = level[u] + 1
                    queue.append(to[aid])
        if level[target] < 0:
            return total
        it = [0] * k

        def augment(u: int, limit: float) -> float:
            if u == target:
                return limit
            while it[u] < len(adj[u]):
                aid = adj[u][it[u]]
                v = to[aid]
                if cap[aid] > eps and level[v] == level[u] + 1:
                    pushed = augment(v, min(limit, cap[aid]))
                    if pushed > eps:
                        cap[aid] -= pushed
                        cap[aid ^ 1] += pushed
                        return pushed
                it[u] += 1
            level[u] = -1
            return 0.0

        while True:
            pushed = augment(source, np.inf)
            if pushed <= eps:
                break
            total += pushed


def max_flow_lp(net: NetworkInstance, capacity, source: int, target: int) -> float:
    """Same value as `max_flow`, posed as a circulation LP for cross-checking."""
    if source == target:
        raise ValueError("source and target must differ")
    capacity = np.asarray(capacity, dtype=float)
    n = net.edge_count
    a = incidence(net)
    a_eq = np.zeros((net.node_count, n + 1))
    a_eq[:, :n] = a
    a_eq[source, n] = -1.0  # the extracted flow re-enters at the source
    a_eq[target, n] = 1.0
    c = np.zeros(n + 1)
    c[n] = -1.0
    lower = np.zeros(n + 1)
    upper = np.concatenate([capacity, [np.inf]])
    sol = solve_lp(LpProblem(c=c, a_eq=a_eq, b_eq=np.zeros(net.node_count),
                             lower=lower, upper=upper))
    if sol.status != LpStatus.OPTIMAL:
        raise RuntimeError(f"max-flow LP ended with status {sol.status.value}")
    return -sol.value


def max_flow_lipschitz(norm: Norm, edge_count: int) -> float:
    """Sensitivity of any s-t max flow to capacity changes, per ``norm``."""
    if edge_count < 1:
        raise ValueError("edge count must be positive")
    if norm == Norm.L1:
        return 1.0
    if norm == Norm.L2:
        return float(np.sqrt(edge_count))
    return float(edge_count)


def capacity_weights(net: NetworkInstance, capacity) -> np.ndarray:
    """Symmetric node-by-node weight matrix; parallel and opposite arcs add up."""
    capacity = np.asarray(capacity, dtype=float)
    w = np.zeros((net.node_count, net.node_count))
    for e, (u, v) in enumerate(net.edges):
        w[u, v] += capacity[e]
        w[v, u] += capacity[e]
    return w


def laplacian(weights: np.ndarray) -> np.ndarray:
    weights = np.asarray(weights, dtype=float)
    return np.diag(weights.sum(axis=1)) - weights


def jacobi_eigenvalues(sym: np.ndarray, sweep_tol: float = 1e-12,
                       max_sweeps: int = 100) -> np.ndarray:
    """All eigenvalues of a symmetric matrix by cyclic Jacobi rotations."""
    a = np.array(sym, dtype=float)
    k = a.shape[0]
    if a.shape != (k, k):
        raise ValueError("matrix must be square")
    if not np.allclose(a, a.T, atol=1e-10 * (1.0 + np.abs(a).max())):
        raise ValueError("matrix must be symmetric")
    a = 0.5 * (a + a.T)
    if k == 1:
        return a[0].copy()
    scale = max(1.0, float(np.linalg.norm(a)))
    for _ in range(max_sweeps):
        off = float(np.sqrt(np.sum(np.tril(a, -1) ** 2) * 2.0))
        if off <= sweep_tol * scale:
            break
        for p in range(k - 1):
            for q in range(p + 1, k):
                apq = a[p, q]
                if abs(apq) <= 1e-300:
                    continue
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(tau) / (abs(tau) + np.sqrt(1.0 + tau * tau)) if tau != 0 else 1.0
                cth = 1.0 / np.sqrt(1.0 + t * t)
                sth = t * cth
                rp, rq = a[p].copy(), a[q].copy()
                a[p] = cth * rp - sth * rq
                a[q] = sth * rp + cth * rq
                cp, cq = a[:, p].copy(), a[:, q].copy()
                a[:, p] = cth * cp - sth * cq
                a[:, q] = sth * cp + cth * cq
                a[p, q] = 0.0
                a[q, p] = 0.0
    return np.sort(np.diag(a))


def algebraic_connectivity(weights: np.ndarray) -> float:
    """Second-smallest Laplacian eigenvalue of the weighted graph.

    The smallest eigenvalue is asserted to sit at zero (it always does for a
    valid Laplacian; a violation means the weights were malformed).
    """
    weights = np.asarray(weights, dtype=float)
    if np.any(weights < -1e-12):
        raise ValueError("weights must be nonnegative")
    if weights.shape[0] < 2:
        raise ValueError("need at least two nodes")
    lap = laplacian(weights)
    eigs = jacobi_eigenvalues(lap)
    scale = max(1.0, float(np.abs(lap).max()))
    if abs(eigs[0]) > 1e-8 * scale:
        raise RuntimeError(f"Laplacian smallest eigenvalue not at zero: {eigs[0]:.3e}")
    return float(eigs[1])


def connectivity_lipschitz(norm: Norm, edge_count: int) -> float:
    """Sensitivity of algebraic connectivity to capacity changes, per ``norm``."""
    if edge_count < 1:
        raise ValueError("edge count must be positive")
    if norm == Norm.L1:
        return 2.0
    if norm == Norm.L2:
        return float(2.0 * np.sqrt(edge_count))
    return float(2.0 * edge_count)


# ---------------------------------------------------------------------------
# Scenario history -> metric references


@dataclass(eq=False)
class Scenario:
    """One historical operating point: installed capacities, the demand they
    served, and the realized metric values keyed by metric id."""

    capacity: np.ndarray
    demand: DemandMatrix
    values: dict[str, float]

    def __post_init__(self):
        self.capacity = np.asarray(self.capacity, dtype=float)
        if np.any(self.capacity < 0) or not np.all(np.isfinite(self.capacity)):
            raise ValueError("scenario capacities must be nonnegative finite")
        for key, v in self.values.items():
            if not np.isfinite(v):
                raise ValueError(f"scenario value {key!r} must be finite")


@dataclass(eq=False)
class ScenarioHistory:
    scenarios: tuple[Scenario, ...]

    def __post_init__(self):
        self.scenarios = tuple(self.scenarios)

    def __len__(self) -> int:
        return len(self.scenarios)

    def __iter__(self):
        return iter(self.scenarios)


def throughput_metric_id(source: int, target: int) -> str:
    return f"{METRIC_THROUGHPUT}:{source}->{target}"


def parse_throughput_id(metric_id: str) -> tuple[int, int]:
    pair = metric_id.split(":", 1)[1]
    s, t = pair.split("->")
    return int(s), int(t)


def evaluate_scenario(net: NetworkInstance, capacity, demand: DemandMatrix,
                      metrics: Sequence[str], flow_pairs=()) -> dict[str, float]:
    """Realized metric values at one operating point, keyed by metric id."""
    values: dict[str, float] = {}
    for metric in metrics:
        if metric == METRIC_ROUTING:
            values[METRIC_ROUTING] = routing_cost(net, demand, capacity)
        elif metric == METRIC_THROUGHPUT:
            for s, t in flow_pairs:
                values[throughput_metric_id(s, t)] = max_flow(net, capacity, s, t)
        elif metric == METRIC_CONNECTIVITY:
            values[METRIC_CONNECTIVITY] = algebraic_connectivity(capacity_weights(net, capacity))
        else:
            raise ValueError(f"unknown metric {metric!r}")
    return values


def scenario_evaluator(net: NetworkInstance, scenario: Scenario, metric_id: str):
    """Callable mapping a capacity vector to the named realized metric."""
    if metric_id == METRIC_ROUTING:
        demand = scenario.demand
        return lambda b: routing_cost(net, demand, b)
    if metric_id.startswith(METRIC_THROUGHPUT + ":"):
        s, t = parse_throughput_id(metric_id)
        return lambda b: max_flow(net, b, s, t)
    if metric_id == METRIC_CONNECTIVITY:
        return lambda b: algebraic_connectivity(capacity_weights(net, b))
    raise ValueError(f"unknown metric id {metric_id!r}")


def build_metric_refs(net: NetworkInstance, history: ScenarioHistory,
                      norm: Norm) -> list[MetricRef]:
    """Turn every recorded scenario value into a metric reference.

    Routing cost falls when capacity grows, so it is decreasing in every
    coordinate and minimized; throughput and connectivity grow with capacity
    and are maximized.  A nonpositive recorded value cannot anchor a relative
    guarantee and raises.
    """
    refs: list[MetricRef] = []
    n = net.edge_count
    dec = np.full(n, Mono.DECREASING, dtype=np.int8)
    inc = np.full(n, Mono.INCREASING, dtype=np.int8)
    for idx, sc in enumerate(history):
        for metric_id in sorted(sc.values):
            v = float(sc.values[metric_id])
            if v <= 0:
                raise ValueError(
                    f"scenario {idx}: metric {metric_id!r} value {v} is not positive")
            if metric_id == METRIC_ROUTING:
                bound = routing_cost_lipschitz(net, norm)
                sense, mono = Sense.MINIMIZE, dec
            elif metric_id.startswith(METRIC_THROUGHPUT + ":"):
                bound = max_flow_lipschitz(norm, n)
                sense, mono = Sense.MAXIMIZE, inc
            elif metric_id == METRIC_CONNECTIVITY:
                bound = connectivity_lipschitz(norm, n)
                sense, mono = Sense.MAXIMIZE, inc
            else:
                raise ValueError(f"scenario {idx}: unknown metric id {metric_id!r}")
            refs.append(MetricRef(
                id=f"{metric_id}@s{idx}",
                x_ref=sc.capacity,
                value=v,
                sense=sense,
                models=(LipschitzNorm(bound=bound, norm=norm, mono=mono),)))
    return refs


def ref_evaluator(net: NetworkInstance, history: ScenarioHistory, ref_id: str):
    """Evaluator for a reference id of the form ``<metric-id>@s<index>``."""
    metric_id, _, tag = ref_id.rpartition("@s")
    scenario = history.scenarios[int(tag)]
    return scenario_evaluator(net, scenario, metric_id)
