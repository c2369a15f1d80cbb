"""Benchmark harness: synthetic instances, budget sweeps, CSV output.

The experiment mirrors a capacity-planning story: a history of operating
points is recorded on one network, then a single new capacity vector is
bought under a budget that is swept from tight to generous.  Every sweep
cell re-solves the tolerance problem and reports, per historical metric,
how the bought point compares to the recorded value.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .geometry import Norm
from .model import FeasibleSet
from .network import (
    METRIC_CONNECTIVITY,
    METRIC_ROUTING,
    METRIC_THROUGHPUT,
    DemandMatrix,
    NetworkInstance,
    Scenario,
    ScenarioHistory,
    build_metric_refs,
    evaluate_scenario,
    ref_evaluator,
)
from .solver import SolveConfig, SolveError, solve_caolf, verify_competitiveness

CSV_HEADER = "budget_mult,norm,gamma,metric_id,ratio,wall_ms,iters"

DEFAULT_METRICS = (METRIC_ROUTING, METRIC_THROUGHPUT, METRIC_CONNECTIVITY)


@dataclass
class ExperimentConfig:
    node_count: int = 12
    edge_count: int = 30
    scenario_count: int = 5
    demand_pairs: int = 36
    demand_low: float = 1.0
    demand_high: float = 5.0
    sparsify_probability: float = 0.4
    budget_multipliers: tuple = tuple(np.linspace(0.1, 1.6, 10))
    norms: tuple = (Norm.L1, Norm.L2, Norm.LINF)
    metrics: tuple = DEFAULT_METRICS
    seed: int = 0
    cost_scale: float = 10.0
    flow_pair_fraction: float = 0.05
    capacity_low: float = 5.0
    capacity_high: float = 15.0
    cost_low: float = 1.0
    cost_high: float = 10.0
    jitter_low: float = 0.8
    jitter_high: float = 1.2
    gamma_tolerance: float = 1e-6
    feasibility_tolerance: float = 1e-7
    max_projection_iters: int = 5000
    network_path: str | None = None
    demand_paths: tuple = ()

    def __post_init__(self):
        if self.node_count < 2 or self.edge_count < self.node_count:
            raise ValueError("need >= 2 nodes and at least one edge per node (spanning cycle)")
        if self.edge_count > self.node_count * (self.node_count - 1):
            raise ValueError("more edges than ordered node pairs")
        if not 0.0 <= self.sparsify_probability <= 1.0:
            raise ValueError("sparsification probability must be in [0, 1]")
        if self.scenario_count < 1:
            raise ValueError("need at least one scenario")
        mults = tuple(float(m) for m in self.budget_multipliers)
        if not mults or any(m <= 0 for m in mults):
            raise ValueError("budget multipliers must be positive")
        if list(mults) != sorted(mults):
            raise ValueError("budget multipliers must be ascending")
        self.budget_multipliers = mults
        self.norms = tuple(Norm(n) for n in self.norms)
        if not (1 <= self.demand_pairs <= self.node_count * (self.node_count - 1)):
            raise ValueError("demand pair count out of range")
        if not 0.0 < self.flow_pair_fraction <= 1.0:
            raise ValueError("flow pair fraction must be in (0, 1]")


@dataclass
class SweepRow:
    budget_mult: float
    norm: Norm
    gamma: float
    metric_id: str
    ratio: float
    wall_ms: float
    iterations: int


def generate_costs(flow_cost, scale: float, rng) -> tuple[np.ndarray, np.ndarray]:
    """Up-front and rental capacity prices from routing costs.

    Expensive-to-route edges get cheap capacity (inverse square-root
    coupling with a +/-10% jitter) and renting always costs 5-15% more
    than buying up front.
    """
    flow_cost = np.asarray(flow_cost, dtype=float)
    if np.any(flow_cost <= 0):
        raise ValueError("routing costs must be positive to derive capacity prices")
    if scale <= 0:
        raise ValueError("price scale must be positive")
    price_pre = (scale / np.sqrt(flow_cost)) * rng.uniform(9.0, 11.0, flow_cost.size)
    price_in = price_pre * rng.uniform(1.05, 1.15, flow_cost.size)
    return price_pre, price_in


def sparsify(demand: DemandMatrix, probability: float, rng) -> DemandMatrix:
    """Drop each demand pair independently with the given probability."""
    if not 0.0 <= probability <= 1.0:
        raise ValueError("drop probability must be in [0, 1]")
    draws = rng.random(len(demand.triples))
    kept = tuple(t for t, u in zip(demand.triples, draws) if u >= probability)
    return DemandMatrix(node_count=demand.node_count, triples=kept)


def select_flow_pairs(demand: DemandMatrix, fraction: float = 0.05) -> list[tuple[int, int]]:
    """The largest demand pairs: a ``fraction`` share, at least one.

    Ties are broken by node ids so the selection never depends on input
    order.
    """
    if len(demand.triples) == 0:
        raise ValueError("demand matrix is empty")
    if not 0.0 < fraction <= 1.0:
        raise ValueError("fraction must be in (0, 1]")
    count = max(1, int(np.ceil(fraction * len(demand.triples))))
    ranked = sorted(demand.triples, key=lambda t: (-t[2], t[0], t[1]))
    return [(s, t) for s, t, _ in ranked[:count]]


def _random_edges(node_count: int, edge_count: int, rng) -> tuple[tuple[int, int], ...]:
    """A spanning directed cycle (strong connectivity) plus random extra arcs."""
    perm = rng.permutation(node_count)
    edges = [(int(perm[i]), int(perm[(i + 1) % node_count])) for i in range(node_count)]
    seen = set(edges)
    while len(edges) < edge_count:
        u = int(rng.integers(node_count))
        v = int(rng.integers(node_count))
        if u == v or (u, v) in seen:
            continue
        seen.add((u, v))
        edges.append((u, v))
    return tuple(edges)


def _random_demand(node_count: int, pair_count: int, low: float, high: float,
                   rng) -> DemandMatrix:
    all_pairs = [(s, t) for s in range(node_count) for t in range(node_count) if s != t]
    pair_count = min(pair_count, len(all_pairs))
    chosen = rng.choice(len(all_pairs), size=pair_count, replace=False)
    amounts = rng.uniform(low, high, pair_count)
    triples = tuple((all_pairs[int(i)][0], all_pairs[int(i)][1], float(a))
                    for i, a in zip(chosen, amounts))
    return DemandMatrix(node_count=node_count, triples=triples)


def build_experiment(cfg: ExperimentConfig) -> tuple[NetworkInstance, DemandMatrix, ScenarioHistory]:
    """Instantiate the network, base demand, and scenario history.

    Draw order is part of the contract (it pins the seed semantics):
    topology, routing costs, base capacities, demand pairs and amounts,
    capacity prices, then per scenario a demand sparsification (redrawn if it
    comes up empty) followed by the capacity jitter.
    """
    rng = np.random.default_rng(cfg.seed)
    if cfg.network_path is not None:
        loaded = load_network(cfg.network_path)
        edges, flow_cost, base_capacity = loaded.edges, loaded.flow_cost, loaded.base_capacity
        k, n = loaded.node_count, loaded.edge_count
    else:
        k, n = cfg.node_count, cfg.edge_count
        edges = _random_edges(k, n, rng)
        flow_cost = rng.uniform(cfg.cost_low, cfg.cost_high, n)
        base_capacity = rng.uniform(cfg.capacity_low, cfg.capacity_high, n)
    if cfg.demand_paths:
        scenario_demands = [load_demands(p, k) for p in cfg.demand_paths]
        base_demand = scenario_demands[0]
    else:
        base_demand = _random_demand(k, cfg.demand_pairs, cfg.demand_low,
                                     cfg.demand_high, rng)
        scenario_demands = None
    price_pre, price_in = generate_costs(flow_cost, cfg.cost_scale, rng)
    net = NetworkInstance(node_count=k, edges=edges, flow_cost=flow_cost,
                          base_capacity=base_capacity,
                          price_pre=price_pre, price_in=price_in)
    scenarios = []
    count = len(scenario_demands) if scenario_demands is not None else cfg.scenario_count
    for i in range(count):
        if scenario_demands is not None:
            demand_i = scenario_demands[i]
            capacity_i = base_capacity.copy()
        else:
            demand_i = sparsify(base_demand, cfg.sparsify_probability, rng)
            for _ in range(100):
                if len(demand_i):
                    break
                demand_i = sparsify(base_demand, cfg.sparsify_probability, rng)
            else:
                raise RuntimeError("could not draw a non-empty sparsified demand")
            capacity_i = base_capacity * rng.uniform(cfg.jitter_low, cfg.jitter_high, n)
        pairs = select_flow_pairs(demand_i, cfg.flow_pair_fraction) \
            if METRIC_THROUGHPUT in cfg.metrics else ()
        values = evaluate_scenario(net, capacity_i, demand_i, cfg.metrics, pairs)
        scenarios.append(Scenario(capacity=capacity_i, demand=demand_i, values=values))
    return net, base_demand, ScenarioHistory(tuple(scenarios))


def reference_budget(net: NetworkInstance, history: ScenarioHistory) -> float:
    """Mean up-front cost of the historical capacity vectors."""
    if net.price_pre is None:
        raise ValueError("instance has no up-front prices")
    return float(np.mean([float(net.price_pre @ sc.capacity) for sc in history]))


def run_sweep(cfg: ExperimentConfig | None = None) -> list[SweepRow]:
    """Solve every (budget multiplier, norm) cell and report per-metric rows.

    A solver failure in one cell is recorded as NaN rows for that cell and
    does not abort the sweep.
    """
    cfg = cfg or ExperimentConfig()
    net, _, history = build_experiment(cfg)
    budget = reference_budget(net, history)
    rows: list[SweepRow] = []
    for mult in cfg.budget_multipliers:
        region = FeasibleSet.nonnegative(
            net.edge_count, [(net.price_pre.copy(), mult * budget)])
        for norm in cfg.norms:
            refs = build_metric_refs(net, history, norm)
            solve_cfg = SolveConfig(norm=norm,
                                    gamma_tolerance=cfg.gamma_tolerance,
                                    feasibility_tolerance=cfg.feasibility_tolerance,
                                    max_projection_iters=cfg.max_projection_iters)
            started = time.perf_counter()
            try:
                sol = solve_caolf(refs, region, solve_cfg)
            except (SolveError, RuntimeError):
                wall = (time.perf_counter() - started) * 1000.0
                for ref in refs:
                    rows.append(SweepRow(mult, norm, float("nan"), ref.id,
                                         float("nan"), wall, 0))
                continue
            wall = (time.perf_counter() - started) * 1000.0
            for ref in refs:
                realized = ref_evaluator(net, history, ref.id)(sol.x)
                rows.append(SweepRow(mult, norm, sol.gamma, ref.id,
                                     realized / ref.value, wall,
                                     sol.diagnostics.iterations))
    return rows


def verify_sweep_cell(cfg: ExperimentConfig, mult: float, norm: Norm,
                      slack: float = 1e-6) -> bool:
    """Re-solve one cell and check the realized metrics against its gamma."""
    net, _, history = build_experiment(cfg)
    budget = reference_budget(net, history)
    region = FeasibleSet.nonnegative(net.edge_count, [(net.price_pre.copy(), mult * budget)])
    refs = build_metric_refs(net, history, norm)
    sol = solve_caolf(refs, region, SolveConfig(norm=norm,
                                                gamma_tolerance=cfg.gamma_tolerance,
                                                feasibility_tolerance=cfg.feasibility_tolerance,
                                                max_projection_iters=cfg.max_projection_iters))
    metrics = [(ref_evaluator(net, history, r.id), r.value, r.sense) for r in refs]
    _, ok = verify_competitiveness(sol.x, sol.gamma + slack, metrics)
    return ok


def format_row(row: SweepRow, include_timing: bool = True) -> str:
    wall = row.wall_ms if include_timing else 0.0
    return (f"{row.budget_mult:.10g},{row.norm.value},{row.gamma:.12g},"
            f"{row.metric_id},{row.ratio:.12g},{wall:.3f},{row.iterations}")


def emit_csv(rows, path, include_timing: bool = True) -> None:
    """Write sweep rows; with timing off the output is byte-reproducible."""
    lines = [CSV_HEADER]
    lines.extend(format_row(r, include_timing) for r in rows)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Plain-text instance files


def load_network(path) -> NetworkInstance:
    """Read a network file: ``k n`` on line 1, then ``tail head cost capacity``."""
    with open(path) as fh:
        raw = fh.read().splitlines()
    lines = [(i + 1, ln.strip()) for i, ln in enumerate(raw)
             if ln.strip() and not ln.strip().startswith("#")]
    if not lines:
        raise ValueError(f"{path}: empty network file")
    lineno, head = lines[0]
    parts = head.split()
    if len(parts) != 2:
        raise ValueError(f"{path}:{lineno}: expected 'node_count edge_count'")
    try:
        k, n = int(parts[0]), int(parts[1])
    except ValueError:
        raise ValueError(f"{path}:{lineno}: node and edge counts must be integers") from None
    if len(lines) - 1 != n:
        raise ValueError(f"{path}: header promises {n} edges, file has {len(lines) - 1}")
    edges, cost, cap = [], [], []
    for lineno, ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 4:
            raise ValueError(f"{path}:{lineno}: expected 'tail head cost capacity'")
        try:
            u, v = int(parts[0]), int(parts[1])
            c, b = float(parts[2]), float(parts[3])
        except ValueError:
            raise ValueError(f"{path}:{lineno}: malformed edge line") from None
        edges.append((u, v))
        cost.append(c)
        cap.append(b)
    try:
        return NetworkInstance(node_count=k, edges=tuple(edges),
                               flow_cost=np.array(cost), base_capacity=np.array(cap))
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None


def save_network(net: NetworkInstance, path) -> None:
    lines = [f"{net.node_count} {net.edge_count}"]
    for e, (u, v) in enumerate(net.edges):
        lines.append(f"{u} {v} {net.flow_cost[e]:.12g} {net.base_capacity[e]:.12g}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_demands(path, node_count: int) -> DemandMatrix:
    """Read a demand file: one ``source target amount`` triple per line."""
    with open(path) as fh:
        raw = fh.read().splitlines()
    triples = []
    for i, ln in enumerate(raw):
        ln = ln.strip()
        if not ln or ln.startswith("#"):
            continue
        parts = ln.split()
        if len(parts) != 3:
            raise ValueError(f"{path}:{i + 1}: expected 'source target amount'")
        try:
            triples.append((int(parts[0]), int(parts[1]), float(parts[2])))
        except ValueError:
            raise ValueError(f"{path}:{i + 1}: malformed demand line") from None
    try:
        return DemandMatrix(node_count=node_count, triples=tuple(triples))
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None


def save_demands(demand: DemandMatrix, path) -> None:
    lines = [f"{s} {t} {f:.12g}" for s, t, f in demand.triples]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n" if lines else "")
