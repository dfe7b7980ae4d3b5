import numpy as np
import pytest

from humanaware.bernstein import BernsteinCurve, derivative_curve, sample_curve
from humanaware.model import ArousalModel, Standardization, basis_index
from humanaware.planner import (
    Circle,
    PlanInfeasibleError,
    PlannerConfig,
    PlanningScenario,
    build_features,
    constraint_eval,
    min_human_distance,
    plan,
    running_cost,
    seed_family_min_time,
    straight_line_curve,
    sweep_ba,
    total_cost,
)


def distance_model(level=0.25, slope=-0.55):
    """Arousal that falls off with standardized distance to the human."""
    std = Standardization(
        mean=np.array([18.0, 0.0, 0.0, 0.0, 1.6, 0.0, 0.0, 0.0]),
        scale=np.array([11.0, 2.0, 15.0, 15.0, 1.0, 2.0, 2.0, 1.0]))
    beta = np.zeros(25)
    beta[0] = level
    beta[basis_index(0, 1)] = slope
    return ArousalModel(beta, std)


def base_scenario(**overrides):
    defaults = dict(
        human_position=np.array([0.0, 0.0, 1.7]),
        start=np.array([-18.0, -6.0]),
        goal=np.array([18.0, 6.0]),
        v_max=3.0,
        a_max=2.0,
        gamma=0.0,
        b_a=0.3,
        obstacles=[],
        degree=8,
        t_min=0.5,
        t_max=120.0,
    )
    defaults.update(overrides)
    return PlanningScenario(**defaults)


class TestBuildFeatures:
    def test_pythagorean_offset_stationary(self):
        scen = base_scenario(human_position=np.array([0.0, 0.0, 1.6]),
                             flight_altitude=1.6)
        fv = build_features(np.array([3.0, 4.0]), np.zeros(2), scen)
        assert fv.d == pytest.approx(5.0, abs=1e-12)
        assert fv.d_dot == 0.0
        assert fv.z == 1.6 and fv.z_dot == 0.0

    def test_radial_recession_sign(self):
        scen = base_scenario(human_position=np.array([0.0, 0.0, 1.6]),
                             flight_altitude=1.6)
        speed = 2.5
        fv = build_features(np.array([4.0, 0.0]), np.array([speed, 0.0]), scen)
        assert fv.d_dot == pytest.approx(speed, rel=1e-12)

    def test_zero_range_convention(self):
        scen = base_scenario(human_position=np.array([1.0, 2.0, 1.6]),
                             flight_altitude=1.6)
        fv = build_features(np.array([1.0, 2.0]), np.array([3.0, 4.0]), scen)
        assert fv.d == 0.0
        assert fv.d_dot == pytest.approx(5.0)

    def test_matches_finite_differences_along_straight_motion(self):
        scen = base_scenario()
        rng = np.random.default_rng(0)
        h = 1e-5
        for _ in range(20):
            p = rng.normal(0, 8, size=2)
            v = rng.normal(0, 2, size=2)
            fv = build_features(p, v, scen)
            d_plus = build_features(p + h * v, v, scen).d
            d_minus = build_features(p - h * v, v, scen).d
            assert fv.d_dot == pytest.approx((d_plus - d_minus) / (2 * h),
                                             abs=1e-6)


class TestRunningCost:
    def test_below_threshold_is_one(self):
        model = distance_model()
        scen = base_scenario()
        fv = build_features(np.array([40.0, 0.0]), np.zeros(2), scen)
        assert model.predict_one(fv) < 0.3
        assert running_cost(model, fv, gamma=5.0, b_a=0.3) == 1.0

    def test_zero_gamma_is_one(self):
        model = distance_model()
        scen = base_scenario()
        fv = build_features(np.array([0.5, 0.0]), np.zeros(2), scen)
        assert running_cost(model, fv, gamma=0.0, b_a=0.0) == 1.0

    def test_frozen_value(self):
        # excess of 2 with gamma 3: 1 + 3 * 4 = 13
        model = distance_model(level=2.5)
        scen = base_scenario()
        fv = build_features(np.array([10.0, 0.0]), np.zeros(2), scen)
        b_a = model.predict_one(fv) - 2.0
        assert b_a > 0
        assert running_cost(model, fv, gamma=3.0, b_a=b_a) == pytest.approx(
            13.0, rel=1e-12)

    def test_never_below_one(self):
        model = distance_model()
        scen = base_scenario()
        rng = np.random.default_rng(1)
        for _ in range(50):
            fv = build_features(rng.normal(0, 10, 2), rng.normal(0, 3, 2), scen)
            assert running_cost(model, fv, 2.0, 0.1) >= 1.0


class TestTotalCost:
    def test_zero_gamma_gives_final_time(self):
        scen = base_scenario(gamma=0.0)
        curve = straight_line_curve(scen, 14.0)
        assert total_cost(curve, scen, distance_model()) == 14.0

    def test_inactive_penalty_below_threshold(self):
        scen = base_scenario(gamma=8.0, b_a=5.0)  # threshold above any prediction
        curve = straight_line_curve(scen, 14.0)
        assert total_cost(curve, scen, distance_model()) == pytest.approx(14.0)

    def test_matches_dense_trapezoid_integration(self):
        rng = np.random.default_rng(2)
        model = distance_model()
        for _ in range(10):
            scen = base_scenario(gamma=float(rng.uniform(1, 20)),
                                 b_a=float(rng.uniform(0.0, 0.5)))
            ctrl = rng.normal(0, 5, size=(9, 2))
            curve = BernsteinCurve(ctrl, float(rng.uniform(8, 20)))
            times = np.linspace(0, curve.t_f, 10_001)
            pts = sample_curve(curve, times)
            vel = sample_curve(derivative_curve(curve), times)
            excess = np.array([
                max(0.0, model.predict_one(build_features(p, v, scen)) - scen.b_a)
                for p, v in zip(pts, vel)
            ])
            dense = curve.t_f + scen.gamma * np.trapezoid(excess**2, times)
            quad = total_cost(curve, scen, model)
            assert quad == pytest.approx(dense, rel=0.01)


class TestConstraintEval:
    def test_easy_straight_line_feasible(self):
        scen = base_scenario(obstacles=[Circle(np.array([30.0, -30.0]), 2.0)])
        curve = straight_line_curve(scen, 30.0)
        report = constraint_eval(curve, scen)
        assert report.collision <= 0
        assert report.velocity <= 0
        assert report.acceleration <= 0
        assert report.feasible()

    def test_path_through_obstacle_center(self):
        obstacle = Circle(np.array([0.0, 0.0]), 2.0)
        scen = base_scenario(obstacles=[obstacle])
        curve = straight_line_curve(scen, 30.0)  # runs through the center
        report = constraint_eval(curve, scen)
        assert report.collision >= obstacle.radius + scen.safety_margin - 1e-12

    def test_velocity_boundary_exact(self):
        scen = base_scenario()
        dist = float(np.linalg.norm(scen.goal - scen.start))
        t_f = dist / scen.v_max
        curve = straight_line_curve(scen, t_f)  # constant speed exactly v_max
        report = constraint_eval(curve, scen)
        assert report.velocity == pytest.approx(0.0, abs=1e-9)
        assert report.acceleration == pytest.approx(-scen.a_max, abs=1e-9)


class TestPlan:
    def test_min_time_without_penalty(self):
        scen = base_scenario(gamma=0.0)
        result = plan(scen, distance_model(), seed=0)
        t_opt = seed_family_min_time(scen)
        assert result.curve.t_f <= 1.02 * t_opt
        assert result.cost == pytest.approx(result.curve.t_f)
        # near-straight: every point close to the segment
        times = np.linspace(0, result.curve.t_f, 200)
        pts = sample_curve(result.curve, times)
        direction = (scen.goal - scen.start)
        direction /= np.linalg.norm(direction)
        normal = np.array([-direction[1], direction[0]])
        offsets = (pts - scen.start) @ normal
        assert np.max(np.abs(offsets)) < 0.5

    def test_endpoints_pinned_exactly(self):
        scen = base_scenario(gamma=10.0, b_a=0.2)
        result = plan(scen, distance_model(), seed=1,
                      config=PlannerConfig(restarts=2, maxiter_per_stage=30))
        np.testing.assert_array_equal(result.curve.control_points[0], scen.start)
        np.testing.assert_array_equal(result.curve.control_points[-1], scen.goal)

    def test_blocked_line_goes_around(self):
        scen = base_scenario(obstacles=[Circle(np.array([0.0, 0.0]), 2.5)])
        result = plan(scen, distance_model(), seed=2)
        assert result.report.feasible()
        assert result.report.collision <= 0.0
        # dense sampling stays clear of the obstacle itself
        times = np.linspace(0, result.curve.t_f, 1001)
        pts = sample_curve(result.curve, times)
        dists = np.linalg.norm(pts, axis=1)
        assert np.min(dists) >= 2.5 - 1e-6

    def test_cost_lower_bound(self):
        scen = base_scenario(gamma=15.0, b_a=0.1, t_min=5.0)
        result = plan(scen, distance_model(), seed=3,
                      config=PlannerConfig(restarts=3, maxiter_per_stage=40))
        assert result.cost >= result.curve.t_f >= scen.t_min

    def test_infeasible_seed_time_window(self):
        scen = base_scenario(t_max=5.0)  # needs ~12.65 s at v_max
        with pytest.raises(PlanInfeasibleError, match="t_max"):
            plan(scen, distance_model(), seed=4)

    def test_no_feasible_path_carries_best_candidate(self):
        # the detour around a huge obstacle cannot fit inside t_max
        scen = base_scenario(obstacles=[Circle(np.array([0.0, 0.0]), 14.0)],
                             t_max=13.2)
        with pytest.raises(PlanInfeasibleError) as excinfo:
            plan(scen, distance_model(), seed=5,
                 config=PlannerConfig(restarts=3, maxiter_per_stage=40))
        err = excinfo.value
        assert err.best_candidate is not None
        assert err.report.max_violation() > 0

    def test_deterministic_per_seed(self):
        scen = base_scenario(gamma=5.0, b_a=0.25)
        cfg = PlannerConfig(restarts=2, maxiter_per_stage=25)
        a = plan(scen, distance_model(), seed=6, config=cfg)
        b = plan(scen, distance_model(), seed=6, config=cfg)
        np.testing.assert_array_equal(a.curve.control_points,
                                      b.curve.control_points)
        assert a.cost == b.cost

    def test_reported_cost_matches_recomputation(self):
        scen = base_scenario(gamma=8.0, b_a=0.2)
        result = plan(scen, distance_model(), seed=7,
                      config=PlannerConfig(restarts=2, maxiter_per_stage=25))
        recomputed = total_cost(result.curve, scen, distance_model())
        assert result.cost == pytest.approx(recomputed, rel=1e-8)


class TestSweep:
    def test_lower_threshold_pushes_path_away(self):
        scen = base_scenario(gamma=25.0)
        results = sweep_ba(scen, distance_model(), [0.4, 0.2], seed=8,
                           config=PlannerConfig(restarts=4,
                                                maxiter_per_stage=50))
        dist_hi, dist_lo = results[0][1], results[1][1]
        assert dist_lo.min_human_distance >= dist_hi.min_human_distance - 1e-6
        assert dist_hi.min_human_distance > min_human_distance(
            straight_line_curve(scen, 13.0), scen)
