"""Solvers for the competitive-tolerance problem and its verification oracles.

The decision problem at a fixed tolerance gamma is convex feasibility: stay
inside the decision region while keeping each metric's clipped displacement
norm within a radius proportional to gamma.  The optimal gamma is found by
bisection, which is sound because enlarging gamma only enlarges every
radius.  Euclidean instances use alternating projections; L1 and LINF
instances have polyhedral radius constraints and go through the simplex
kernel as one epigraph linear program instead.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .geometry import (
    BallSet,
    ClippedBallSet,
    HalfspaceSet,
    Norm,
    Sense,
    clip,
    dykstra,
    max_violation,
    norm_value,
    quadratic_cap_ball,
)
from .lp import LpProblem, LpStatus, solve_lp
from .model import (
    CompetitiveSolution,
    ConcaveLinear,
    ConvexQuadratic,
    FeasibleSet,
    LipschitzNorm,
    MetricRef,
    SolveDiagnostics,
)


class SolveError(RuntimeError):
    """Raised when a solver cannot certify an answer."""


@dataclass
class SolveConfig:
    norm: Norm = Norm.L2
    gamma_tolerance: float = 1e-6
    feasibility_tolerance: float = 1e-7
    max_projection_iters: int = 5000
    gamma_upper_init: float | None = None

    def __post_init__(self):
        if self.gamma_tolerance <= 0 or self.feasibility_tolerance <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_projection_iters < 1:
            raise ValueError("iteration budget must be at least 1")


@dataclass
class FeasibilityResult:
    feasible: bool
    x: np.ndarray
    residual: float
    iterations: int


def feasibility_check(sets, config: SolveConfig, start) -> FeasibilityResult:
    """Decide whether the intersection of ``sets`` is (numerically) reachable.

    Wraps the alternating-projection loop: a residual at or below the
    feasibility tolerance certifies a point; a stalled residual is reported
    as infeasible at that tolerance, with the best residual attained.
    """
    run = dykstra(sets, start, tol=config.feasibility_tolerance,
                  max_iters=config.max_projection_iters)
    return FeasibilityResult(feasible=run.converged, x=run.x,
                             residual=run.residual, iterations=run.iterations)


def _accelerated_feasibility(sets, config: SolveConfig, start,
                             jump_every: int = 8, stall_window: int = 100,
                             stall_rtol: float = 1e-4) -> FeasibilityResult:
    """Cyclic projections with a safeguarded extrapolation accelerator.

    Thin intersections make plain alternating projections crawl: the cycle map
    is asymptotically a contraction with factor close to one, so the iterates
    form a near-geometric sequence.  Every few cycles the crawl direction and
    its decay ratio are estimated from consecutive cycle deltas and the limit
    is extrapolated in one jump; the jump is adopted only when it actually
    lowers the residual, so the safeguard keeps plain-projection behavior on
    anything the model does not fit.  Used for the bisection probes, where
    only a yes/no answer plus a witness point is needed.
    """
    tol = config.feasibility_tolerance
    x = np.array(start, dtype=float)
    sets = list(sets)
    if not sets:
        return FeasibilityResult(feasible=True, x=x, residual=0.0, iterations=0)
    best = max_violation(sets, x)
    if best <= tol:
        return FeasibilityResult(feasible=True, x=x, residual=best, iterations=0)
    best_x = x.copy()
    prev_delta = None
    history = []
    frozen = max(stall_window // 4, 1)
    for it in range(1, config.max_projection_iters + 1):
        x_prev = x.copy()
        for s in sets:
            x = s.project(x)
        res = max_violation(sets, x)
        if res < best:
            best = res
            best_x = x.copy()
        if best <= tol:
            return FeasibilityResult(feasible=True, x=best_x, residual=best, iterations=it)
        if it % jump_every == 0:
            delta = x - x_prev
            adopted = False
            if prev_delta is not None:
                den = float(prev_delta @ prev_delta)
                rho = float(delta @ prev_delta) / den if den > 0 else 0.0
                if 0.1 < rho < 0.9999:
                    cand = x + delta * (rho / (1.0 - rho))
                    cand_res = max_violation(sets, cand)
                    if cand_res < best:
                        x = cand
                        best = cand_res
                        best_x = cand.copy()
                        if best <= tol:
                            return FeasibilityResult(feasible=True, x=best_x,
                                                     residual=best, iterations=it)
                        # the delta across a jump is not a plain cycle delta,
                        # so the ratio estimate restarts
                        prev_delta = None
                        adopted = True
            if not adopted:
                prev_delta = delta
        history.append(best)
        if it > frozen and history[-frozen - 1] - best <= 0.0:
            break
        if it > stall_window:
            gained = history[-stall_window - 1] - best
            if gained <= stall_rtol * max(best, tol):
                break
    return FeasibilityResult(feasible=False, x=best_x, residual=best,
                             iterations=len(history))


def _certify(x: np.ndarray, constraints) -> float:
    """Smallest gamma for which ``x`` satisfies every surrogate constraint."""
    worst = 0.0
    for need in constraints:
        worst = max(worst, need(x))
    return worst


def _bisect(build_sets, needed_gamma, x0, region: FeasibleSet, config: SolveConfig,
            method: str) -> CompetitiveSolution:
    """Shared bisection driver over the gamma axis.

    ``build_sets(gamma)`` yields the projectable constraint sets at that
    tolerance and ``needed_gamma`` maps a point to the smallest tolerance it
    certifies; the latter is also the reported gamma, so the answer is always
    a value the returned point actually achieves.
    """
    region_sets = region.sets()
    hi = config.gamma_upper_init
    total_iters = 0
    if hi is None:
        hi = _certify(x0, needed_gamma)
    else:
        for _ in range(64):
            probe = _accelerated_feasibility(build_sets(hi) + region_sets, config, x0)
            total_iters += probe.iterations
            if probe.feasible:
                break
            hi *= 2.0
        else:
            raise SolveError("no feasible upper bound for the tolerance search")
    if hi <= config.gamma_tolerance:
        x_final = np.maximum(x0, region.lower)
        gamma = _certify(x_final, needed_gamma)
        diag = SolveDiagnostics(iterations=total_iters, residual=region.violation(x_final),
                                method=method)
        return CompetitiveSolution(x=x_final, gamma=gamma, diagnostics=diag)
    x_best = x0
    lo = 0.0
    while hi - lo > config.gamma_tolerance:
        mid = 0.5 * (lo + hi)
        probe = _accelerated_feasibility(build_sets(mid) + region_sets, config, x_best)
        total_iters += probe.iterations
        if probe.feasible:
            x_best = probe.x
            # projections land on the active constraint surface, so the point
            # usually certifies a tolerance well below mid; shrink the bracket
            # to that certified value instead of mid
            hi = min(mid, _certify(probe.x, needed_gamma))
            if hi <= lo:
                break
        else:
            lo = mid
    # hard lower bounds hold exactly so downstream metric evaluation never
    # sees a tolerance-scale negative capacity
    x_best = np.maximum(x_best, region.lower)
    gamma = _certify(x_best, needed_gamma)
    diag = SolveDiagnostics(iterations=total_iters, residual=region.violation(x_best), method=method)
    return CompetitiveSolution(x=x_best, gamma=gamma, diagnostics=diag)


def solve_caolf(refs, region: FeasibleSet, config: SolveConfig | None = None) -> CompetitiveSolution:
    """Minimize the tolerance gamma subject to one clipped-norm radius per metric.

    Each metric contributes the constraint that the clipped displacement from
    its reference, measured in the configured norm, stays within
    gamma * value / bound.  The reported gamma is certified at the returned
    point, so it never understates what the point achieves.
    """
    config = config or SolveConfig()
    refs = list(refs)
    if not refs:
        raise ValueError("need at least one metric reference")
    dim = region.dim
    for r in refs:
        if r.dim != dim:
            raise ValueError(f"metric {r.id!r} has dimension {r.dim}, region has {dim}")
    prepared = []
    for r in refs:
        m = r.lipschitz_model(config.norm)
        prepared.append((r.geometry(m), m.bound / r.value))
    if config.norm == Norm.L2:
        return _solve_caolf_projection(prepared, region, config)
    return _solve_caolf_lp(prepared, region, config)


def _solve_caolf_projection(prepared, region, config) -> CompetitiveSolution:
    def build_sets(gamma):
        return [ClippedBallSet(geom, gamma / rate) for geom, rate in prepared]

    needed = [
        (lambda x, geom=geom, rate=rate: rate * norm_value(clip(x, geom), Norm.L2))
        for geom, rate in prepared
    ]
    centroid = np.mean([geom.x_ref for geom, _ in prepared], axis=0)
    x0 = region.find_point(start=centroid, tol=min(1e-9, config.feasibility_tolerance),
                           max_iters=max(config.max_projection_iters, 10000))
    return _bisect(build_sets, needed, x0, region, config, method="bisection-projection-l2")


def _solve_caolf_lp(prepared, region, config) -> CompetitiveSolution:
    """Epigraph linear program for the L1 and LINF radius constraints.

    Layout: decision coordinates, then (L1 only) one magnitude variable per
    non-safe coordinate of each metric, then gamma last.  Increasing and
    decreasing coordinates need one inequality each; non-monotone
    coordinates bound the displacement from both sides.
    """
    dim = region.dim
    norm = config.norm
    aux_offsets = []
    n_aux = 0
    if norm == Norm.L1:
        for geom, _ in prepared:
            aux_offsets.append(dim + n_aux)
            n_aux += dim
    n_var = dim + n_aux + 1
    g_col = n_var - 1

    rows_a: list[np.ndarray] = []
    rows_b: list[float] = []

    def add_row(cols: dict[int, float], rhs: float):
        row = np.zeros(n_var)
        for j, v in cols.items():
            row[j] = v
        rows_a.append(row)
        rows_b.append(rhs)

    for idx, (geom, rate) in enumerate(prepared):
        eff = geom.effective_mono()
        ref = geom.x_ref
        if norm == Norm.L1:
            off = aux_offsets[idx]
            for j in range(dim):
                if eff[j] >= 0:
                    add_row({j: 1.0, off + j: -1.0}, float(ref[j]))
                if eff[j] <= 0:
                    add_row({j: -1.0, off + j: -1.0}, float(-ref[j]))
            add_row({off + j: 1.0 for j in range(dim)} | {g_col: -1.0 / rate}, 0.0)
        else:
            for j in range(dim):
                if eff[j] >= 0:
                    add_row({j: 1.0, g_col: -1.0 / rate}, float(ref[j]))
                if eff[j] <= 0:
                    add_row({j: -1.0, g_col: -1.0 / rate}, float(-ref[j]))
    for a, b in region.halfspaces:
        row = np.zeros(n_var)
        row[:dim] = a
        rows_a.append(row)
        rows_b.append(b)

    lower = np.full(n_var, -np.inf)
    lower[:dim] = region.lower
    lower[dim:] = 0.0
    c = np.zeros(n_var)
    c[g_col] = 1.0
    problem = LpProblem(c=c, a_ub=np.array(rows_a), b_ub=np.array(rows_b), lower=lower)
    sol = solve_lp(problem, max_iters=200000)
    if sol.status != LpStatus.OPTIMAL:
        raise SolveError(f"epigraph LP ended with status {sol.status.value}")
    x = sol.x[:dim]
    gamma = max((rate * norm_value(clip(x, geom), norm) for geom, rate in prepared), default=0.0)
    diag = SolveDiagnostics(iterations=sol.iterations, residual=region.violation(x),
                            method=f"epigraph-lp-{norm.value}")
    return CompetitiveSolution(x=x, gamma=gamma, diagnostics=diag)


def solve_approx(refs, region: FeasibleSet, config: SolveConfig | None = None) -> CompetitiveSolution:
    """Mixed-model variant: metrics may carry clipped-norm radii (Euclidean),
    supporting-hyperplane caps, or curvature-augmented tangent caps, in any
    combination; all of a metric's models constrain simultaneously.
    """
    config = config or SolveConfig()
    if config.norm != Norm.L2:
        raise ValueError("the mixed-model solver works in the l2 norm")
    refs = list(refs)
    if not refs:
        raise ValueError("need at least one metric reference")
    dim = region.dim
    builders = []
    needed = []
    for r in refs:
        if r.dim != dim:
            raise ValueError(f"metric {r.id!r} has dimension {r.dim}, region has {dim}")
        for m in r.models:
            if isinstance(m, LipschitzNorm):
                if m.norm != Norm.L2:
                    raise ValueError(
                        f"metric {r.id!r}: only l2 Lipschitz models are usable here, got {m.norm.value}")
                geom = r.geometry(m)
                rate = m.bound / r.value
                builders.append(lambda g, geom=geom, rate=rate: ClippedBallSet(geom, g / rate))
                needed.append(lambda x, geom=geom, rate=rate: rate * norm_value(clip(x, geom), Norm.L2))
            elif isinstance(m, ConcaveLinear):
                grad, ref, v = m.grad, r.x_ref, r.value
                if float(np.dot(grad, grad)) == 0.0:
                    continue  # satisfied by every x at any gamma >= 0
                builders.append(lambda g, grad=grad, ref=ref, v=v:
                                HalfspaceSet(grad, g * v + float(np.dot(grad, ref))))
                needed.append(lambda x, grad=grad, ref=ref, v=v:
                              float(np.dot(grad, x - ref)) / v)
            elif isinstance(m, ConvexQuadratic):
                grad, ref, v, lip = m.grad, r.x_ref, r.value, m.curvature
                builders.append(lambda g, grad=grad, ref=ref, v=v, lip=lip:
                                BallSet(*quadratic_cap_ball(ref, grad, lip, g * v)))
                needed.append(lambda x, grad=grad, ref=ref, v=v, lip=lip:
                              (lip * float(np.dot(x - ref, x - ref)) + float(np.dot(grad, x - ref))) / v)
            else:
                raise TypeError(f"unknown constraint model {type(m).__name__}")
    if not builders:
        raise ValueError("no usable constraint models")

    def build_sets(gamma):
        return [b(gamma) for b in builders]

    centroid = np.mean([r.x_ref for r in refs], axis=0)
    x0 = region.find_point(start=centroid, tol=min(1e-9, config.feasibility_tolerance),
                           max_iters=max(config.max_projection_iters, 10000))
    return _bisect(build_sets, needed, x0, region, config, method="bisection-projection-mixed")


def stability_probe(refs, region: FeasibleSet, config: SolveConfig, kappas) -> CompetitiveSolution:
    """Re-solve with every metric's Lipschitz bound scaled by its kappa.

    Models the situation where the true sensitivity constants were misjudged
    by known factors; the solution degrades by at most max(kappa)/kappa_i
    per metric, which the stability tests assert.
    """
    refs = list(refs)
    kappas = np.asarray(kappas, dtype=float)
    if kappas.shape != (len(refs),):
        raise ValueError(f"need one scale factor per metric, got {kappas.shape} for {len(refs)}")
    scaled = [r.scaled(float(k)) for r, k in zip(refs, kappas)]
    return solve_caolf(scaled, region, config)


def verify_competitiveness(x, gamma: float, metrics, rel_tolerance: float = 1e-9):
    """Check realized metric values against the (1 +/- gamma) envelope.

    ``metrics`` is an iterable of (evaluator, reference_value, sense).
    Returns (slacks, ok): slack is the relative excess f(x)/v - 1 for
    minimized metrics and 1 - f(x)/v for maximized ones, so ``ok`` means
    every slack is at most gamma (plus the relative tolerance).
    """
    x = np.asarray(x, dtype=float)
    slacks = []
    for evaluate, value, sense in metrics:
        if not (value > 0 and np.isfinite(value)):
            raise ValueError(f"reference value must be positive, got {value}")
        f = float(evaluate(x))
        if sense == Sense.MINIMIZE:
            slacks.append(f / value - 1.0)
        else:
            slacks.append(1.0 - f / value)
    slacks = np.asarray(slacks)
    ok = bool(np.all(slacks <= gamma + rel_tolerance))
    return slacks, ok


def _grid_axes(region: FeasibleSet, resolution: int, box):
    if region.dim > 3:
        raise ValueError("grid oracles are for dimensions up to 3")
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    if box is None:
        raise ValueError("grid oracles need an explicit bounding box per dimension")
    box = [(float(lo), float(hi)) for lo, hi in box]
    if len(box) != region.dim:
        raise ValueError("bounding box dimension mismatch")
    for lo, hi in box:
        if not (np.isfinite(lo) and np.isfinite(hi) and hi > lo):
            raise ValueError("bounding box must have finite, increasing endpoints")
    return [np.linspace(lo, hi, resolution) for lo, hi in box]


def grid_oracle_swcm(metrics, region: FeasibleSet, resolution: int, box=None,
                     membership_tol: float = 1e-9):
    """Brute-force the smallest worst-case relative slack on a dense grid.

    ``metrics`` is an iterable of (evaluator, reference_value, sense).
    Independent of the solvers by construction: it evaluates the metrics
    themselves, not any surrogate model.  Returns (gamma, point).
    """
    metrics = list(metrics)
    if not metrics:
        raise ValueError("need at least one metric")
    axes = _grid_axes(region, resolution, box)
    best = np.inf
    best_point = None
    for coords in itertools.product(*axes):
        p = np.asarray(coords)
        if region.violation(p) > membership_tol:
            continue
        worst = 0.0
        for evaluate, value, sense in metrics:
            f = float(evaluate(p))
            slack = f / value - 1.0 if sense == Sense.MINIMIZE else 1.0 - f / value
            worst = max(worst, slack)
        if worst < best:
            best = worst
            best_point = p
    if best_point is None:
        raise ValueError("no grid point fell inside the region; enlarge the box or resolution")
    return max(best, 0.0), best_point


def grid_oracle_caolf(refs, region: FeasibleSet, resolution: int, box=None,
                      norm: Norm = Norm.L2, membership_tol: float = 1e-9):
    """Brute-force the smallest radius-scaled clipped norm on a dense grid.

    Same search as `grid_oracle_swcm` but over the surrogate objective
    max_i bound_i * ||clip(x, ref_i)|| / value_i, vectorized over the grid.
    Returns (gamma, point).
    """
    refs = list(refs)
    if not refs:
        raise ValueError("need at least one metric reference")
    axes = _grid_axes(region, resolution, box)
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)  # (P, dim)
    keep = np.ones(len(pts), dtype=bool)
    for s in region.sets():
        keep &= np.array([s.violation(p) <= membership_tol for p in pts])
    pts = pts[keep]
    if len(pts) == 0:
        raise ValueError("no grid point fell inside the region; enlarge the box or resolution")
    worst = np.zeros(len(pts))
    for r in refs:
        m = r.lipschitz_model(norm)
        geom = r.geometry(m)
        eff = geom.effective_mono()
        d = pts - geom.x_ref
        clipped = np.where(eff > 0, np.maximum(d, 0.0),
                           np.where(eff < 0, np.maximum(-d, 0.0), d))
        if norm == Norm.L1:
            g = np.sum(np.abs(clipped), axis=1)
        elif norm == Norm.L2:
            g = np.sqrt(np.sum(clipped * clipped, axis=1))
        else:
            g = np.max(np.abs(clipped), axis=1)
        worst = np.maximum(worst, g * (m.bound / r.value))
    i = int(np.argmin(worst))
    return float(worst[i]), pts[i]
