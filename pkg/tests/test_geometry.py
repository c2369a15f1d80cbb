"""Units and property checks for norms, clipping, and projections."""

import numpy as np
import pytest

from caolf.geometry import (
    BallSet,
    ClippedBallSet,
    HalfspaceSet,
    LowerBoundSet,
    Mono,
    Norm,
    RefGeometry,
    Sense,
    clip,
    dual_norm_value,
    dykstra,
    norm_value,
    project_clipped_ball,
    project_halfspace,
    project_quadratic_cap,
    project_safe_region,
    quadratic_cap_ball,
)


def test_norm_values_on_fixed_vector():
    v = [3.0, -4.0, 0.0]
    assert norm_value(v, Norm.L1) == 7.0
    assert norm_value(v, Norm.L2) == 5.0
    assert norm_value(v, Norm.LINF) == 4.0


def test_dual_norm_pairing():
    v = [3.0, -4.0, 0.0]
    assert dual_norm_value(v, Norm.L1) == norm_value(v, Norm.LINF)
    assert dual_norm_value(v, Norm.LINF) == norm_value(v, Norm.L1)
    assert dual_norm_value(v, Norm.L2) == norm_value(v, Norm.L2)


def test_norms_are_coordinate_monotone():
    rng = np.random.default_rng(11)
    for _ in range(200):
        w = rng.normal(size=4) * 3
        shrink = rng.uniform(0, 1, 4)
        u = w * shrink
        for kind in Norm:
            assert norm_value(u, kind) <= norm_value(w, kind) + 1e-12


def test_clip_minimize_cases():
    geom = RefGeometry([1.0, 1.0, 1.0], [Mono.INCREASING, Mono.DECREASING, Mono.NON_MONOTONE])
    # moving up hurts increasing coords, moving down hurts decreasing ones,
    # non-monotone coords keep the signed displacement
    np.testing.assert_allclose(clip([3.0, 3.0, 3.0], geom), [2.0, 0.0, 2.0])
    np.testing.assert_allclose(clip([0.5, 0.5, 0.5], geom), [0.0, 0.5, -0.5])
    np.testing.assert_allclose(clip([1.0, 1.0, 1.0], geom), [0.0, 0.0, 0.0])


def test_clip_maximize_swaps_directions():
    g_min = RefGeometry([1.0, 1.0], [Mono.INCREASING, Mono.DECREASING], Sense.MINIMIZE)
    g_max = RefGeometry([1.0, 1.0], [Mono.INCREASING, Mono.DECREASING], Sense.MAXIMIZE)
    x = [3.0, 0.5]
    np.testing.assert_allclose(clip(x, g_min), [2.0, 0.5])
    np.testing.assert_allclose(clip(x, g_max), [0.0, 0.0])
    np.testing.assert_allclose(clip([0.5, 3.0], g_max), [0.5, 2.0])


def test_clip_zero_iff_in_safe_region():
    rng = np.random.default_rng(5)
    for _ in range(100):
        geom = RefGeometry(rng.normal(size=3),
                           rng.integers(-1, 2, size=3),
                           Sense.MAXIMIZE if rng.random() < 0.5 else Sense.MINIMIZE)
        x = rng.normal(size=3) * 2
        p = project_safe_region(x, geom)
        assert norm_value(clip(p, geom), Norm.LINF) <= 1e-15
        if norm_value(clip(x, geom), Norm.LINF) == 0.0:
            np.testing.assert_allclose(p, x)


def test_safe_region_projection_is_idempotent_and_nonexpansive():
    rng = np.random.default_rng(7)
    for _ in range(100):
        geom = RefGeometry(rng.normal(size=4), rng.integers(-1, 2, size=4))
        x = rng.normal(size=4) * 3
        y = rng.normal(size=4) * 3
        px, py = project_safe_region(x, geom), project_safe_region(y, geom)
        np.testing.assert_allclose(project_safe_region(px, geom), px)
        assert np.all(np.abs(px - py) <= np.abs(x - y) + 1e-15)


def test_clip_norm_is_distance_to_safe_region():
    # ||clip(x)|| == min ||x - y|| over the zero-clip set, by dense grid in 2-D
    geom = RefGeometry([0.5, -0.25], [Mono.INCREASING, Mono.NON_MONOTONE])
    rng = np.random.default_rng(3)
    ax1 = np.linspace(0.5 - 10.0, 0.5, 5001)  # increasing coord: safe at or below ref
    for kind in Norm:
        for _ in range(20):
            x = rng.normal(size=2) * 2
            best = np.inf
            for y1 in ax1:
                cand = norm_value([x[0] - y1, x[1] - (-0.25)], kind)
                best = min(best, cand)
            assert norm_value(clip(x, geom), kind) == pytest.approx(best, abs=3e-3)


def test_clipped_ball_projection_one_dim_frozen():
    # derived by hand: safe set {0}, radius 1, so -3 lands at -1
    geom = RefGeometry([0.0], [Mono.NON_MONOTONE])
    np.testing.assert_allclose(project_clipped_ball([-3.0], geom, 1.0), [-1.0])
    np.testing.assert_allclose(project_clipped_ball([0.5], geom, 1.0), [0.5])


def test_clipped_ball_projection_matches_grid_argmin():
    geom = RefGeometry([1.0, 2.0], [Mono.INCREASING, Mono.NON_MONOTONE])
    x = np.array([3.0, 5.0])
    r = 1.0
    out = project_clipped_ball(x, geom, r)
    # frozen closed form: safe point (1, 2), distance sqrt(13)
    expect = np.array([1.0, 2.0]) + (r / np.sqrt(13.0)) * np.array([2.0, 3.0])
    np.testing.assert_allclose(out, expect, atol=1e-12)
    # independent grid argmin over the constraint set
    best, best_d = None, np.inf
    for y1 in np.linspace(-1, 4, 251):
        for y2 in np.linspace(0, 6, 301):
            y = np.array([y1, y2])
            if norm_value(clip(y, geom), Norm.L2) <= r:
                d = norm_value(x - y, Norm.L2)
                if d < best_d:
                    best, best_d = y, d
    np.testing.assert_allclose(out, best, atol=3e-2)


def test_clipped_ball_output_feasible_and_fixed_points():
    rng = np.random.default_rng(19)
    for _ in range(200):
        geom = RefGeometry(rng.normal(size=3), rng.integers(-1, 2, size=3))
        r = float(rng.uniform(0, 2))
        x = rng.normal(size=3) * 4
        out = project_clipped_ball(x, geom, r)
        assert norm_value(clip(out, geom), Norm.L2) <= r + 1e-9
        if norm_value(clip(x, geom), Norm.L2) <= r:
            np.testing.assert_allclose(out, x)


def test_clipped_ball_rejects_other_norms():
    geom = RefGeometry([0.0], [Mono.NON_MONOTONE])
    with pytest.raises(NotImplementedError):
        project_clipped_ball([1.0], geom, 1.0, norm=Norm.L1)


def test_halfspace_projection():
    out = project_halfspace([2.0, 2.0], [1.0, 0.0], 1.0)
    np.testing.assert_allclose(out, [1.0, 2.0])
    inside = project_halfspace([0.0, 0.0], [1.0, 0.0], 1.0)
    np.testing.assert_allclose(inside, [0.0, 0.0])
    with pytest.raises(ValueError):
        project_halfspace([1.0], [0.0], 1.0)


def test_quadratic_cap_ball_reduction():
    # lip*||y||^2 - 2*y1 <= 3 with ref 0: center (1/lip... ) derived for lip=1:
    # center (1, 0), radius sqrt(3 + 1) = 2
    center, radius = quadratic_cap_ball([0.0, 0.0], [-2.0, 0.0], 1.0, 3.0)
    np.testing.assert_allclose(center, [1.0, 0.0])
    assert radius == pytest.approx(2.0)
    with pytest.raises(ValueError):
        quadratic_cap_ball([0.0], [0.0], 1.0, -1.0)  # empty: min of lhs is 0 > -1


def test_quadratic_cap_projection_satisfies_inequality():
    rng = np.random.default_rng(23)
    for _ in range(200):
        ref = rng.normal(size=2)
        grad = rng.normal(size=2)
        lip = float(rng.uniform(0.2, 3.0))
        lhs_min = -float(grad @ grad) / (4 * lip)
        rhs = float(lhs_min + rng.uniform(0.01, 4.0))
        x = rng.normal(size=2) * 3
        out = project_quadratic_cap(x, ref, grad, lip, rhs)
        val = lip * float((out - ref) @ (out - ref)) + float(grad @ (out - ref))
        assert val <= rhs + 1e-9
        if lip * float((x - ref) @ (x - ref)) + float(grad @ (x - ref)) <= rhs:
            np.testing.assert_allclose(out, x)


def test_all_projections_are_nonexpansive():
    rng = np.random.default_rng(31)
    geom = RefGeometry([0.3, -0.7], [Mono.DECREASING, Mono.NON_MONOTONE])
    sets = [
        ClippedBallSet(geom, 0.8),
        HalfspaceSet([1.0, 2.0], 0.5),
        LowerBoundSet([0.0, -np.inf]),
        BallSet([1.0, 1.0], 1.5),
    ]
    for s in sets:
        for _ in range(100):
            x, y = rng.normal(size=2) * 3, rng.normal(size=2) * 3
            px, py = s.project(x), s.project(y)
            assert norm_value(px - py, Norm.L2) <= norm_value(x - y, Norm.L2) + 1e-12


def test_violation_is_euclidean_distance():
    rng = np.random.default_rng(37)
    geom = RefGeometry([0.0, 0.0], [Mono.NON_MONOTONE, Mono.NON_MONOTONE])
    sets = [
        ClippedBallSet(geom, 1.0),
        HalfspaceSet([0.0, 1.0], 0.0),
        LowerBoundSet([1.0, 2.0]),
        BallSet([0.0, 0.0], 2.0),
    ]
    for s in sets:
        for _ in range(50):
            x = rng.normal(size=2) * 4
            assert s.violation(x) == pytest.approx(
                norm_value(x - s.project(x), Norm.L2), abs=1e-9)


def test_dykstra_disjoint_balls_reports_gap():
    sets = [BallSet([0.0, 0.0], 0.9), BallSet([2.0, 0.0], 0.9)]
    run = dykstra(sets, [1.0, 0.0], tol=1e-7, max_iters=3000)
    assert not run.converged
    # the centers are 2 apart and radii sum to 1.8, so the gap is 0.2
    assert run.residual >= 0.2 * (1 - 1e-7)
    assert run.residual == pytest.approx(0.2, abs=1e-3)


def test_dykstra_tangent_balls_meet_at_the_touch_point():
    sets = [BallSet([0.0, 0.0], 1.0), BallSet([2.0, 0.0], 1.0)]
    run = dykstra(sets, [1.0, 0.0], tol=1e-7, max_iters=3000)
    assert run.converged
    np.testing.assert_allclose(run.x, [1.0, 0.0], atol=1e-6)
    assert run.iterations == 0  # the start already lies in both


def test_dykstra_ball_and_halfspace():
    sets = [BallSet([0.0, 0.0], 1.0), HalfspaceSet([1.0, 0.0], 0.0)]
    run = dykstra(sets, [3.0, 3.0], tol=1e-9, max_iters=3000)
    assert run.converged
    assert sets[0].violation(run.x) <= 1e-9
    assert sets[1].violation(run.x) <= 1e-9


def test_dykstra_projects_rather_than_just_reaches():
    # with correction increments the limit is the projection of the start
    sets = [HalfspaceSet([1.0, 0.0], 0.0), HalfspaceSet([0.0, 1.0], 0.0)]
    start = np.array([2.0, 3.0])
    run = dykstra(sets, start, tol=1e-10, max_iters=3000)
    assert run.converged
    np.testing.assert_allclose(run.x, [0.0, 0.0], atol=1e-8)


def test_dykstra_no_sets_returns_start():
    run = dykstra([], [1.5, 2.5], tol=1e-9)
    assert run.converged
    np.testing.assert_allclose(run.x, [1.5, 2.5])


def test_mono_spec_validation():
    with pytest.raises(ValueError):
        RefGeometry([0.0], [2])
    with pytest.raises(ValueError):
        RefGeometry([0.0, 1.0], [Mono.INCREASING])
    with pytest.raises(ValueError):
        RefGeometry([np.inf], [0])
    geom = RefGeometry([0.0, 0.0], ["inc", "dec"])
    assert list(geom.mono) == [1, -1]
