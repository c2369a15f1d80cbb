"""Norms, the monotonicity-aware clip operator, and projection primitives.

Every metric carries a reference point together with per-coordinate
monotonicity tags.  The clip operator turns the displacement from that
reference into a vector of *harmful* movement only: movement in a direction
that cannot increase a minimized metric (or decrease a maximized one) is
zeroed out.  Norms of clipped displacements are what the solvers bound.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum, IntEnum
from typing import Iterable, Sequence

import numpy as np


class Norm(str, Enum):
    """Which norm a Lipschitz bound is stated in."""

    L1 = "l1"
    L2 = "l2"
    LINF = "linf"


_DUAL = {Norm.L1: Norm.LINF, Norm.L2: Norm.L2, Norm.LINF: Norm.L1}


def norm_value(v, kind: Norm) -> float:
    """Evaluate ``kind`` on vector ``v``."""
    v = np.asarray(v, dtype=float)
    if kind == Norm.L1:
        return float(np.sum(np.abs(v)))
    if kind == Norm.L2:
        return float(np.sqrt(np.dot(v, v)))
    if kind == Norm.LINF:
        return float(np.max(np.abs(v))) if v.size else 0.0
    raise ValueError(f"unknown norm kind: {kind!r}")


def dual_norm_value(v, kind: Norm) -> float:
    """Evaluate the dual norm of ``kind`` on vector ``v``."""
    return norm_value(v, _DUAL[kind])


class Mono(IntEnum):
    """Per-coordinate monotonicity of a metric."""

    DECREASING = -1
    NON_MONOTONE = 0
    INCREASING = 1


def as_mono_array(mono, dim: int | None = None) -> np.ndarray:
    """Coerce a monotonicity signature into an int8 array of -1/0/+1 entries.

    Accepts Mono members, ints, or the strings "inc"/"dec"/"none".
    A scalar is broadcast to ``dim``.
    """
    names = {"inc": 1, "dec": -1, "none": 0}
    if isinstance(mono, (Mono, int, str)) and not isinstance(mono, bool):
        if dim is None:
            raise ValueError("scalar monotonicity signature needs an explicit dimension")
        mono = [mono] * dim
    out = np.empty(len(mono), dtype=np.int8)
    for j, m in enumerate(mono):
        if isinstance(m, str):
            if m not in names:
                raise ValueError(f"bad monotonicity tag {m!r}")
            out[j] = names[m]
        else:
            val = int(m)
            if val not in (-1, 0, 1):
                raise ValueError(f"monotonicity entries must be -1, 0 or +1, got {val}")
            out[j] = val
    if dim is not None and out.size != dim:
        raise ValueError(f"monotonicity signature has length {out.size}, expected {dim}")
    return out


class Sense(str, Enum):
    """Whether a metric is to be kept low or kept high."""

    MINIMIZE = "min"
    MAXIMIZE = "max"


@dataclass(frozen=True, eq=False)
class RefGeometry:
    """A reference point plus the monotonicity pattern of one metric.

    ``sense`` flips the harmful direction: for a maximized metric, moving a
    coordinate the metric increases in can only help, so the roles of
    increasing and decreasing coordinates swap.
    """

    x_ref: np.ndarray
    mono: np.ndarray
    sense: Sense = Sense.MINIMIZE

    def __post_init__(self):
        object.__setattr__(self, "x_ref", np.asarray(self.x_ref, dtype=float))
        object.__setattr__(self, "mono", as_mono_array(self.mono, dim=self.x_ref.size))
        if self.x_ref.ndim != 1 or self.x_ref.size == 0:
            raise ValueError("reference point must be a non-empty 1-D vector")
        if not np.all(np.isfinite(self.x_ref)):
            raise ValueError("reference point must be finite")

    @property
    def dim(self) -> int:
        return self.x_ref.size

    def effective_mono(self) -> np.ndarray:
        """Monotonicity after folding in the optimization sense."""
        if self.sense == Sense.MAXIMIZE:
            return (-self.mono).astype(np.int8)
        return self.mono


def clip(x, geom: RefGeometry) -> np.ndarray:
    """Harmful part of the displacement from ``geom.x_ref`` to ``x``.

    Coordinates the metric (effectively) increases in keep only positive
    displacement, decreasing coordinates keep only negative displacement
    (sign-flipped), and non-monotone coordinates keep the displacement as is.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != geom.x_ref.shape:
        raise ValueError(f"point has shape {x.shape}, reference has {geom.x_ref.shape}")
    d = x - geom.x_ref
    eff = geom.effective_mono()
    return np.where(eff > 0, np.maximum(d, 0.0), np.where(eff < 0, np.maximum(-d, 0.0), d))


def safe_region_bounds(geom: RefGeometry) -> tuple[np.ndarray, np.ndarray]:
    """Per-coordinate interval [lo, hi] on which the clipped displacement is 0."""
    eff = geom.effective_mono()
    lo = np.where(eff > 0, -np.inf, geom.x_ref)
    hi = np.where(eff < 0, np.inf, geom.x_ref)
    return lo, hi


def project_safe_region(x, geom: RefGeometry) -> np.ndarray:
    """Nearest point (any p-norm: the clamp is per coordinate) with zero clip."""
    x = np.asarray(x, dtype=float)
    if x.shape != geom.x_ref.shape:
        raise ValueError(f"point has shape {x.shape}, reference has {geom.x_ref.shape}")
    lo, hi = safe_region_bounds(geom)
    return np.minimum(np.maximum(x, lo), hi)


def project_clipped_ball(x, geom: RefGeometry, radius: float, norm: Norm = Norm.L2) -> np.ndarray:
    """Project ``x`` onto {y : ||clip(y, geom)||_2 <= radius}.

    The set is the safe region fattened by ``radius``, so the projection moves
    straight toward the nearest safe point until the clipped norm equals the
    radius.  Only the Euclidean case is supported; the bisection solver never
    needs the others because L1/LINF instances go through the LP path.
    """
    if norm != Norm.L2:
        raise NotImplementedError("clipped-ball projection is only available for the l2 norm")
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    x = np.asarray(x, dtype=float)
    g = clip(x, geom)
    gn = norm_value(g, Norm.L2)
    if gn <= radius:
        return x.copy()
    p = project_safe_region(x, geom)
    # ||x - p||_2 == gn coordinate by coordinate, and gn > radius >= 0 here.
    return p + (radius / gn) * (x - p)


def project_halfspace(x, a, b: float) -> np.ndarray:
    """Project ``x`` onto {y : a.y <= b}."""
    x = np.asarray(x, dtype=float)
    a = np.asarray(a, dtype=float)
    nrm2 = float(np.dot(a, a))
    if nrm2 <= 0.0:
        raise ValueError("halfspace normal must be nonzero")
    excess = float(np.dot(a, x)) - b
    if excess <= 0.0:
        return x.copy()
    return x - (excess / nrm2) * a


def quadratic_cap_ball(x_ref, grad, lip: float, rhs: float) -> tuple[np.ndarray, float]:
    """Center and radius of {y : lip*||y-x_ref||^2 + grad.(y-x_ref) <= rhs}.

    Completing the square turns the cap into a Euclidean ball.  Raises if the
    cap is empty (rhs below the attainable minimum of the left-hand side).
    """
    x_ref = np.asarray(x_ref, dtype=float)
    grad = np.asarray(grad, dtype=float)
    if lip <= 0:
        raise ValueError("curvature constant must be positive")
    center = x_ref - grad / (2.0 * lip)
    rad_sq = rhs / lip + float(np.dot(grad, grad)) / (4.0 * lip * lip)
    if rad_sq < 0:
        raise ValueError("quadratic cap is empty: right-hand side below the minimum")
    return center, float(np.sqrt(rad_sq))


def project_quadratic_cap(x, x_ref, grad, lip: float, rhs: float) -> np.ndarray:
    """Project ``x`` onto {y : lip*||y-x_ref||^2 + grad.(y-x_ref) <= rhs}."""
    center, radius = quadratic_cap_ball(x_ref, grad, lip, rhs)
    return _project_ball(np.asarray(x, dtype=float), center, radius)


def _project_ball(x: np.ndarray, center: np.ndarray, radius: float) -> np.ndarray:
    d = x - center
    dn = norm_value(d, Norm.L2)
    if dn <= radius:
        return x.copy()
    if dn == 0.0:
        return center.copy()
    return center + (radius / dn) * d


# ---------------------------------------------------------------------------
# Projectable sets and the alternating-projection feasibility routine.


class LowerBoundSet:
    """{x : x >= lower} with -inf entries allowed."""

    def __init__(self, lower):
        self.lower = np.asarray(lower, dtype=float)

    def project(self, x: np.ndarray) -> np.ndarray:
        return np.maximum(x, self.lower)

    def violation(self, x: np.ndarray) -> float:
        return norm_value(np.maximum(self.lower - x, 0.0), Norm.L2)

    def anchor(self) -> np.ndarray:
        return np.where(np.isfinite(self.lower), np.maximum(self.lower, 0.0), 0.0)


class HalfspaceSet:
    """{x : a.x <= b}."""

    def __init__(self, a, b: float):
        self.a = np.asarray(a, dtype=float)
        self.b = float(b)
        if float(np.dot(self.a, self.a)) <= 0.0:
            raise ValueError("halfspace normal must be nonzero")

    def project(self, x: np.ndarray) -> np.ndarray:
        return project_halfspace(x, self.a, self.b)

    def violation(self, x: np.ndarray) -> float:
        excess = float(np.dot(self.a, x)) - self.b
        return max(0.0, excess) / norm_value(self.a, Norm.L2)

    def anchor(self):
        return None


class ClippedBallSet:
    """{x : ||clip(x, geom)||_2 <= radius}."""

    def __init__(self, geom: RefGeometry, radius: float):
        if radius < 0:
            raise ValueError("radius must be nonnegative")
        self.geom = geom
        self.radius = float(radius)

    def project(self, x: np.ndarray) -> np.ndarray:
        return project_clipped_ball(x, self.geom, self.radius)

    def violation(self, x: np.ndarray) -> float:
        return max(0.0, norm_value(clip(x, self.geom), Norm.L2) - self.radius)

    def anchor(self) -> np.ndarray:
        return self.geom.x_ref


class BallSet:
    """{x : ||x - center||_2 <= radius}; quadratic caps reduce to this."""

    def __init__(self, center, radius: float):
        if radius < 0:
            raise ValueError("radius must be nonnegative")
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)

    def project(self, x: np.ndarray) -> np.ndarray:
        return _project_ball(x, self.center, self.radius)

    def violation(self, x: np.ndarray) -> float:
        return max(0.0, norm_value(x - self.center, Norm.L2) - self.radius)

    def anchor(self) -> np.ndarray:
        return self.center


@dataclass
class ProjectionRun:
    """Outcome of an alternating-projection pass over a family of sets."""

    x: np.ndarray
    residual: float
    iterations: int
    converged: bool


def max_violation(sets: Sequence, x: np.ndarray) -> float:
    return max((s.violation(x) for s in sets), default=0.0)


def dykstra(sets: Sequence, start, tol: float = 1e-9, max_iters: int = 5000,
            stall_window: int = 100, stall_rtol: float = 1e-4) -> ProjectionRun:
    """Dykstra's alternating projections onto the intersection of ``sets``.

    Keeps one correction increment per set so the limit is the true projection
    of ``start`` when the intersection is non-empty.  The loop exits early when
    the best residual seen has stopped improving over ``stall_window``
    iterations, which is the practical signal for an empty intersection (or a
    tangency too slow to be worth chasing).
    """
    x = np.array(start, dtype=float)
    sets = list(sets)
    if not sets:
        return ProjectionRun(x=x, residual=0.0, iterations=0, converged=True)
    start_res = max_violation(sets, x)
    if start_res <= tol:
        return ProjectionRun(x=x, residual=start_res, iterations=0, converged=True)
    increments = [np.zeros_like(x) for _ in sets]
    best = np.inf  # best cycle-end residual; the raw start does not count
    best_x = x.copy()
    history = []
    for it in range(1, max_iters + 1):
        for k, s in enumerate(sets):
            shifted = x + increments[k]
            y = s.project(shifted)
            increments[k] = shifted - y
            x = y
        res = max_violation(sets, x)
        if res < best:
            best = res
            best_x = x.copy()
        if best <= tol:
            return ProjectionRun(x=best_x, residual=best, iterations=it, converged=True)
        history.append(best)
        # a best residual frozen to the last bit for a quarter window means the
        # iteration is periodic (disjoint sets); no need to wait out the full
        # relative-progress window
        frozen = stall_window // 4
        if it > frozen and history[-frozen - 1] - best <= 0.0:
            break
        if it > stall_window:
            gained = history[-stall_window - 1] - best
            if gained <= stall_rtol * max(best, tol):
                break
    return ProjectionRun(x=best_x, residual=best, iterations=len(history), converged=False)
