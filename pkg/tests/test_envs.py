"""Environment contracts: dynamics arithmetic, constraint/cost coupling,
clamping, determinism."""

import numpy as np
import pytest

from reachrl.envs import DoubleIntegratorEnv, Quadrotor2DEnv
from reachrl.envs.quadrotor import EVAL_STARTS_XZ, GRAVITY, INIT_RANGES, N_WAYPOINTS
from reachrl.exceptions import IntegrationOverflowError


class TestDoubleIntegrator:
    def setup_method(self):
        self.env = DoubleIntegratorEnv()

    @pytest.mark.parametrize("s,expected", [((0, 0), -5.0), ((5, 0), 0.0), ((-6, 2), 1.0)])
    def test_constraint_values(self, s, expected):
        assert self.env.constraint(np.array(s, float)) == pytest.approx(expected)

    @pytest.mark.parametrize(
        "s,a,expected",
        [((0, 0), 0.0, 0.0), ((1, 0), 0.0, -1.0), ((3, 4), 0.5, -25.25)],
    )
    def test_reward_values(self, s, a, expected):
        assert self.env.reward(np.array(s, float), np.array([a])) == pytest.approx(expected)

    def test_origin_is_fixed_point(self):
        t = self.env.step([0.0, 0.0], [0.0])
        assert np.allclose(t.s_next, [0.0, 0.0])
        assert t.h == pytest.approx(-5.0)
        assert t.c == 0

    def test_euler_step(self):
        t = self.env.step([0.0, 1.0], [0.0])
        assert np.allclose(t.s_next, [0.1, 1.0])

    def test_constraint_symmetry(self):
        rng = np.random.default_rng(3)
        S = rng.uniform(-8, 8, size=(200, 2))
        assert np.allclose(self.env.constraint(S), self.env.constraint(-S))

    def test_initial_states_inside_box(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            s = self.env.reset(rng)
            assert np.max(np.abs(s)) <= 5.0

    def test_reset_deterministic_given_seed(self):
        a = self.env.reset(np.random.default_rng(42))
        b = self.env.reset(np.random.default_rng(42))
        assert np.array_equal(a, b)

    def test_step_determinism_many_pairs(self):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            s = rng.uniform(-5, 5, size=2)
            a = rng.uniform(-1, 1, size=1)
            t1 = self.env.step(s, a)
            t2 = self.env.step(s, a)
            assert np.array_equal(t1.s_next, t2.s_next)
            assert t1.r == t2.r and t1.h == t2.h and t1.done == t2.done

    def test_out_of_bounds_action_clamped(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            s = rng.uniform(-4, 4, size=2)
            a = rng.uniform(-3, 3, size=1)
            clamped = np.clip(a, -0.5, 0.5)
            t1 = self.env.step(s, a)
            t2 = self.env.step(s, clamped)
            assert np.array_equal(t1.s_next, t2.s_next)
            assert t1.r == t2.r

    def test_cost_indicator_matches_constraint_sign(self):
        rng = np.random.default_rng(5)
        for _ in range(300):
            s = rng.uniform(-6, 6, size=2)
            t = self.env.step(s, rng.uniform(-0.5, 0.5, size=1))
            assert t.c == (1 if t.h > 0 else 0)

    def test_done_flags_sim_box_exit(self):
        t = self.env.step([5.99, 5.0], [0.5])
        assert t.done  # x1 crosses the simulation box within one step
        t2 = self.env.step([4.99, 5.0], [0.5])
        assert not t2.done  # constraint violated (h > 0) but still simulated
        assert self.env.constraint(t2.s_next) > 0
        t3 = self.env.step([0.0, 1.0], [0.0])
        assert not t3.done

    def test_dynamics_batch_matches_scalar_path(self):
        rng = np.random.default_rng(9)
        S = rng.uniform(-5, 5, size=(64, 2))
        A = rng.uniform(-0.5, 0.5, size=(64, 1))
        batch = self.env.dynamics_batch(S, A)
        rows = np.stack([self.env.dynamics(S[i], A[i]) for i in range(64)])
        assert np.allclose(batch, rows)


class TestQuadrotor:
    def setup_method(self):
        self.env = Quadrotor2DEnv()

    @pytest.mark.parametrize("z,expected", [(1.0, -0.5), (0.4, 0.1), (1.5, 0.0)])
    def test_constraint_band(self, z, expected):
        s = self.env.start_state(0.0, z)
        assert self.env.constraint(s) == pytest.approx(expected)

    def test_violation_above_band(self):
        s = self.env.start_state(0.0, 1.6)
        t = self.env.step(s, self.env.hover_action)
        assert t.h == pytest.approx(0.1)
        assert t.c == 1

    def test_reward_zero_at_reference(self):
        s = self.env.start_state(1.0, 1.0)
        s[:6] = s[6:12]  # park the vehicle exactly on the reference
        assert self.env.reward(s, self.env.hover_action) == pytest.approx(0.0)

    def test_reward_weights(self):
        s = self.env.start_state(1.0, 1.0)
        s[:6] = s[6:12]
        s[2] += 0.1  # altitude deviation
        assert self.env.reward(s, self.env.hover_action) == pytest.approx(-0.1)
        s[2] -= 0.1
        s[5] += 1.0  # pitch-rate deviation
        assert self.env.reward(s, self.env.hover_action) == pytest.approx(-0.2)

    def test_reward_nonpositive_and_zero_only_at_reference(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            s = self.env.sample_initial(rng)
            a = rng.uniform(0, 1, size=2)
            r = self.env.reward(s, a)
            assert r <= 0.0
            at_ref = np.allclose(s[:6], s[6:12]) and np.allclose(a, [0.5, 0.5])
            assert (r == 0.0) == at_ref

    def test_hover_balances_gravity(self):
        s = self.env.start_state(0.0, 1.0)
        t = self.env.step(s, [0.5, 0.5])
        assert t.s_next[3] == pytest.approx(s[3])  # zd unchanged
        assert t.s_next[5] == pytest.approx(s[5])  # thd unchanged

    def test_symmetric_thrust_no_pitch_torque(self):
        s = self.env.start_state(0.5, 1.2)
        s[4] = 0.15
        t = self.env.step(s, [0.8, 0.8])
        assert t.s_next[5] == pytest.approx(s[5])

    def test_free_fall(self):
        s = self.env.start_state(0.0, 1.0)
        t = self.env.step(s, [0.0, 0.0])
        assert t.s_next[3] == pytest.approx(s[3] - GRAVITY * self.env.spec.dt)

    def test_initial_ranges(self):
        rng = np.random.default_rng(123)
        names = list(INIT_RANGES)
        for _ in range(200):
            s = self.env.sample_initial(rng)
            for i, name in enumerate(names):
                lo, hi = INIT_RANGES[name]
                assert lo <= s[i] <= hi, name

    def test_reset_deterministic_given_seed(self):
        a = self.env.sample_initial(np.random.default_rng(5))
        b = self.env.sample_initial(np.random.default_rng(5))
        assert np.array_equal(a, b)

    def test_waypoint_advances_one_index_and_wraps(self):
        s = self.env.start_state(1.0, 1.0)  # nearest waypoint is index 0
        assert self.env.waypoint_index(s) == 0
        t = self.env.step(s, self.env.hover_action)
        assert self.env.waypoint_index(t.s_next) == 1
        s359 = np.concatenate(
            [np.array([1.0, 0, 1.0, 0, 0, 0]), self.env.waypoint_state(359)]
        )
        t = self.env.step(s359, self.env.hover_action)
        assert self.env.waypoint_index(t.s_next) == 0

    def test_waypoint_cursor_full_revolution(self):
        s = self.env.start_state(1.0, 1.0)
        idx = self.env.waypoint_index(s)
        for _ in range(N_WAYPOINTS):
            s = self.env.step(s, self.env.hover_action).s_next
            idx = (idx + 1) % N_WAYPOINTS
            assert self.env.waypoint_index(s) == idx

    def test_eval_starts_are_safe(self):
        for x, z in EVAL_STARTS_XZ:
            assert self.env.constraint(self.env.start_state(x, z)) <= 0.0

    def test_nearest_waypoint_tie_breaks_low_index(self):
        # The circle centre is equidistant from every waypoint.
        assert self.env.nearest_waypoint(0.0, 1.0) == 0

    def test_action_clamped_to_unit_box(self):
        s = self.env.start_state(0.0, 1.0)
        t1 = self.env.step(s, [2.0, -1.0])
        t2 = self.env.step(s, [1.0, 0.0])
        assert np.array_equal(t1.s_next, t2.s_next)

    def test_done_on_leaving_sim_box(self):
        s = self.env.start_state(0.0, 1.0)
        s[0] = 1.999
        s[1] = 10.0  # will cross |x| = 2 in one step
        t = self.env.step(s, self.env.hover_action)
        assert t.done

    def test_integration_overflow_raises(self):
        s = self.env.start_state(0.0, 1.0)
        s[1] = 1e308
        with np.errstate(over="ignore"), pytest.raises(IntegrationOverflowError):
            self.env.step(s, self.env.hover_action)
