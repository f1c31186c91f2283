"""Quantitative exit criteria, one test per criterion.

Each test asserts its stated tolerance and prints one PASS line. The
multi-seed training batteries dominate the runtime; they are marked
`slow` so `-m "not slow"` gives a quick pass over everything else.

Training hyperparameters come from the shipped preset configs so the
certified numbers and the documented presets cannot drift apart.
"""

import json
import time
from pathlib import Path

import numpy as np
import pytest
from scipy import ndimage
from scipy.stats import qmc

from reachrl.config import estimator_kwargs, load_config
from reachrl.envs import DoubleIntegratorEnv, Quadrotor2DEnv
from reachrl.envs.quadrotor import (
    ACTION_WEIGHTS,
    EVAL_STARTS_XZ,
    INIT_RANGES,
    STATE_WEIGHTS,
)
from reachrl.grids import GridSpec
from reachrl.nets import MlpSpec
from reachrl.oracle import (
    PolicySafetyEvaluation,
    SafetyValueIteration,
    contraction_check,
    kernel_agreement,
    mask_iou,
)
from reachrl.replay import Batch
from reachrl.trainer import ConstrainedActorCritic, evaluate_policy
from reachrl.updates import (
    NetBundle,
    actor_update,
    critic_update,
    multiplier_update,
    safety_critic_update,
)

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"
GRID201 = GridSpec(lows=(-5.0, -5.0), highs=(5.0, 5.0), counts=(201, 201))
SEEDS = (0, 1, 2, 3, 4)


def _passline(n, text):
    print(f"\nACCEPTANCE {n}: PASS — {text}")


@pytest.fixture(scope="session")
def di_env():
    return DoubleIntegratorEnv()


@pytest.fixture(scope="session")
def dp_oracle(di_env):
    """The pinned 201x201 solve, timed for the runtime bound."""
    t0 = time.perf_counter()
    svi = SafetyValueIteration(gamma=0.99, action_samples=21, tol=1e-6,
                               max_sweeps=5000).fit(di_env, GRID201)
    elapsed = time.perf_counter() - t0
    return svi, elapsed


def _train_preset(preset, seed, env):
    cfg = load_config(CONFIG_DIR / preset)
    kwargs = estimator_kwargs(cfg)
    kwargs["seed"] = seed
    est = ConstrainedActorCritic(**kwargs)
    t0 = time.perf_counter()
    est.fit(env)
    return est, time.perf_counter() - t0


@pytest.fixture(scope="session")
def rcrl_runs(di_env, dp_oracle):
    svi, _ = dp_oracle
    dp_mask = svi.feasible_mask()
    runs = []
    for seed in SEEDS:
        est, elapsed = _train_preset("di_rcrl.toml", seed, di_env)
        mask = est.learned_feasible_mask(GRID201)
        stats = evaluate_policy(di_env, est.bundle_, 100,
                                np.random.default_rng([seed, 1000]))
        runs.append({
            "seed": seed,
            "est": est,
            "elapsed": elapsed,
            "mask": mask,
            "iou": mask_iou(mask, dp_mask),
            "episodes_violating": stats["episodes_violating"],
        })
    return runs


@pytest.fixture(scope="session")
def cbf_runs(di_env):
    runs = []
    for seed in SEEDS:
        est, elapsed = _train_preset("di_cbf.toml", seed, di_env)
        runs.append({
            "seed": seed,
            "est": est,
            "mask": est.learned_feasible_mask(GRID201),
        })
    return runs


class TestCriterion1DualOracleAgreement:
    def test_dp_kernel_matches_braking_curve(self, dp_oracle):
        from reachrl.oracle import analytic_kernel_mask

        svi, elapsed = dp_oracle
        agreement = kernel_agreement(svi.feasible_mask(),
                                     analytic_kernel_mask(GRID201))
        assert agreement >= 0.98, f"agreement {agreement:.4f} < 0.98"
        assert elapsed < 60.0, f"solve took {elapsed:.1f}s (budget 60s)"
        _passline(1, f"201x201 sign agreement {agreement:.4f} "
                     f"in {elapsed:.1f}s ({svi.n_sweeps_} sweeps)")


class TestCriterion2Contraction:
    def test_backup_is_gamma_contraction(self, di_env):
        grid = GridSpec(lows=(-5, -5), highs=(5, 5), counts=(101, 101))
        ratio = contraction_check(di_env, grid, trials=100,
                                  rng=np.random.default_rng(202),
                                  gamma=0.99, action_samples=21)
        assert ratio <= 0.99 + 1e-12, f"ratio {ratio!r} exceeds gamma"
        _passline(2, f"max contraction ratio {ratio:.6f} <= 0.99 over 100 pairs")


class TestCriterion3SelfConsistencyNesting:
    def test_policy_kernels_nest_inside_optimal(self, di_env, dp_oracle):
        svi, _ = dp_oracle
        dp_mask = svi.feasible_mask()
        grown = ndimage.binary_dilation(dp_mask)  # one-node boundary band

        null = PolicySafetyEvaluation().fit(
            di_env, lambda S: np.zeros((len(S), 1)), GRID201
        )
        assert np.all(~null.feasible_mask() | grown), "null-policy kernel escapes"

        greedy = PolicySafetyEvaluation().fit(di_env, svi.greedy_policy(), GRID201)
        assert np.all(~greedy.feasible_mask() | grown), "greedy kernel escapes"
        agreement = kernel_agreement(greedy.feasible_mask(), dp_mask)
        assert agreement >= 0.99, f"greedy agreement {agreement:.4f} < 0.99"
        _passline(3, f"nesting holds; greedy/optimal agreement {agreement:.4f}")


class TestCriterion4GradientFidelity:
    """Central finite differences on random widths 8-16, 50 trials/op."""

    @staticmethod
    def _bundle_and_batch(rng):
        width = int(rng.integers(8, 17))
        sdim, adim = 2, 1
        q_spec = MlpSpec((sdim + adim, width, width, 1))
        actor_spec = MlpSpec((sdim, width, width, adim), output="tanh_box",
                             out_low=(-0.5,), out_high=(0.5,))
        lam_spec = MlpSpec((sdim, width, width, 1), output="softplus")
        from reachrl.constraints import Reachability

        g = q_spec.init(rng)
        bundle = NetBundle(
            kind=Reachability(), gamma=0.99, dt=0.1,
            q_spec=q_spec, q=q_spec.init(rng), q_target=q_spec.init(rng),
            actor_spec=actor_spec, actor=actor_spec.init(rng),
            g_spec=q_spec, g=g, g_target=q_spec.init(rng),
            lam_spec=lam_spec, lam=lam_spec.init(rng),
        )
        n = 8
        s = rng.uniform(-5, 5, size=(n, sdim))
        a = rng.uniform(-0.5, 0.5, size=(n, adim))
        s_next = s + 0.1 * rng.normal(size=(n, sdim))
        h = np.max(np.abs(s), axis=1) - 5
        batch = Batch(
            s=s, a=a, r=rng.normal(size=n), s_next=s_next, h=h,
            h_next=np.max(np.abs(s_next), axis=1) - 5,
            c=(h > 0).astype(float),
            done=(rng.uniform(size=n) < 0.25).astype(float),
            r_stuck=rng.uniform(-30, 0, size=n),
        )
        return bundle, batch

    @staticmethod
    def _fd(loss, params, eps=1e-5):
        g = np.zeros_like(params)
        for i in range(params.size):
            orig = params[i]
            params[i] = orig + eps
            hi = loss()
            params[i] = orig - eps
            lo = loss()
            params[i] = orig
            g[i] = (hi - lo) / (2 * eps)
        return g

    def test_all_four_updates_match_finite_differences(self):
        rng = np.random.default_rng(4)
        worst = {"critic": 0.0, "safety": 0.0, "actor": 0.0, "multiplier": 0.0}
        for _ in range(50):
            bundle, batch = self._bundle_and_batch(rng)

            grad, _ = critic_update(batch, bundle)
            fd = self._fd(lambda: critic_update(batch, bundle)[1], bundle.q)
            worst["critic"] = max(worst["critic"], np.max(
                np.abs(grad - fd) / np.maximum(np.abs(fd), 1e-8)))

            grad, _ = safety_critic_update(batch, bundle)
            fd = self._fd(lambda: safety_critic_update(batch, bundle)[1], bundle.g)
            worst["safety"] = max(worst["safety"], np.max(
                np.abs(grad - fd) / np.maximum(np.abs(fd), 1e-8)))

            grad, _ = actor_update(batch, bundle)
            fd = self._fd(lambda: actor_update(batch, bundle)[1], bundle.actor)
            worst["actor"] = max(worst["actor"], np.max(
                np.abs(grad - fd) / np.maximum(np.abs(fd), 1e-8)))

            grad, _ = multiplier_update(batch, bundle)

            def ascent():
                g = bundle.g_value(batch.s, bundle.act(batch.s))
                return float(np.mean(g * bundle.lam_value(batch.s)))

            fd = self._fd(ascent, bundle.lam)
            worst["multiplier"] = max(worst["multiplier"], np.max(
                np.abs(grad - fd) / np.maximum(np.abs(fd), 1e-8)))
        assert max(worst.values()) <= 1e-4, worst
        _passline(4, "max relative errors over 50 trials each: "
                     + ", ".join(f"{k}={v:.2e}" for k, v in worst.items()))


@pytest.mark.slow
class TestCriterion5EndToEndTraining:
    def test_three_of_five_seeds_reach_kernel(self, rcrl_runs):
        for run in rcrl_runs:
            assert run["est"].total_steps <= 200_000
            assert run["elapsed"] < 1800, f"seed {run['seed']} exceeded 30 min"
        passing = [r for r in rcrl_runs
                   if r["iou"] >= 0.85 and r["episodes_violating"] <= 0.05]
        detail = "; ".join(
            f"seed {r['seed']}: IoU={r['iou']:.3f}, "
            f"violating={r['episodes_violating']:.2f}"
            for r in rcrl_runs
        )
        assert len(passing) >= 3, detail
        _passline(5, f"{len(passing)}/5 seeds at IoU >= 0.85 and <= 5% "
                     f"violating episodes ({detail})")


@pytest.mark.slow
class TestCriterion6MultiplierSaturation:
    def test_multiplier_splits_by_feasibility(self, rcrl_runs, dp_oracle):
        svi, _ = dp_oracle
        dp_mask = svi.feasible_mask()
        deep = ndimage.binary_erosion(dp_mask, iterations=2)
        infeasible = ~dp_mask
        sampler = qmc.Halton(d=2, scramble=False)
        pts = qmc.scale(sampler.random(40_000), [-5, -5], [5, 5])
        steps = GRID201.steps
        idx0 = np.clip(np.rint((pts[:, 0] + 5) / steps[0]), 0, 200).astype(int)
        idx1 = np.clip(np.rint((pts[:, 1] + 5) / steps[1]), 0, 200).astype(int)
        deep_pts = pts[deep[idx0, idx1]][:1000]
        inf_pts = pts[infeasible[idx0, idx1]][:1000]
        assert len(deep_pts) == 1000 and len(inf_pts) == 1000

        ratios = []
        for run in rcrl_runs:
            lam = run["est"].bundle_.lam_value
            ratio = float(np.mean(lam(inf_pts)) / np.mean(lam(deep_pts)))
            ratios.append((run["seed"], ratio))
        passing = [s for s, r in ratios if r >= 10.0]
        detail = ", ".join(f"seed {s}: {r:.1f}x" for s, r in ratios)
        assert len(passing) >= 3, detail
        _passline(6, f"multiplier ratio >= 10 on {len(passing)}/5 seeds ({detail})")


@pytest.mark.slow
class TestCriterion7BaselineConservativeness:
    """The barrier-constrained policy's usable region is not larger.

    The conservativeness claim compares what each controller can
    actually keep safe. For the barrier baseline that is the feasible
    set of its trained policy, computed exactly by the grid policy
    evaluation (the barrier functional's own sub-zero set is reported
    alongside but is not the comparison object: on this benchmark
    hdot + mu*h <= 0 holds across most of the interior under any
    braking-competent policy, so its area is structurally ~0.75
    regardless of training).
    """

    def test_cbf_policy_keeps_smaller_region(self, di_env, rcrl_runs, cbf_runs):
        pairs = []
        for rcrl, cbf in zip(rcrl_runs, cbf_runs):
            assert rcrl["seed"] == cbf["seed"]
            actual = PolicySafetyEvaluation().fit(
                di_env, cbf["est"].predict, GRID201
            )
            pairs.append((
                rcrl["seed"],
                float(actual.feasible_mask().mean()),
                float(rcrl["mask"].mean()),
                float(cbf["mask"].mean()),
            ))
        ok = [s for s, cbf_area, rcrl_area, _ in pairs if cbf_area <= rcrl_area]
        detail = "; ".join(
            f"seed {s}: cbf-policy={a:.3f} vs rcrl-learned={b:.3f} "
            f"(barrier functional sub-zero {f:.3f})"
            for s, a, b, f in pairs
        )
        # Documented tolerance: one stochastic-training seed may fail.
        assert len(ok) >= len(pairs) - 1, detail
        _passline(7, f"barrier-constrained region smaller on {len(ok)}/5 seeds "
                     f"({detail})")


class TestCriterion8EnvironmentExactness:
    def test_quad_reward_matches_matrix_oracle(self):
        env = Quadrotor2DEnv()
        Q = np.diag(STATE_WEIGHTS)
        R = np.diag(ACTION_WEIGHTS)
        rng = np.random.default_rng(8)
        lo = np.array([r[0] for r in INIT_RANGES.values()])
        hi = np.array([r[1] for r in INIT_RANGES.values()])
        worst = 0.0
        for _ in range(1000):
            x = rng.uniform(lo, hi)
            ref = rng.uniform(lo, hi)
            a = rng.uniform(0, 1, size=2)
            s = np.concatenate([x, ref])
            dx = x - ref
            da = a - env.hover_action
            expected = -(dx @ Q @ dx) - (da @ R @ da)
            worst = max(worst, abs(env.reward(s, a) - expected))
        assert worst <= 1e-12, worst
        _passline(8, f"quadratic tracking reward exact to {worst:.2e}; ")

    def test_protocol_uses_paper_starts_and_horizon(self):
        env = Quadrotor2DEnv()
        assert EVAL_STARTS_XZ == ((1.0, 1.0), (-1.0, 1.0), (0.0, 0.53),
                                  (0.0, 1.47))
        assert env.spec.max_episode_len == 360

    @pytest.mark.slow
    def test_quadrotor_smoke_run_emits_artifacts(self, tmp_path):
        from reachrl.cli import main as cli_main

        code = cli_main([
            "train", "--config", str(CONFIG_DIR / "quad_smoke.toml"),
            "--override", f'out_dir="{tmp_path / "quad"}"',
        ])
        assert code == 0
        out = tmp_path / "quad"
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["status"] == "ok" and manifest["env"] == "quadrotor"
        lines = (out / "metrics.csv").read_text().splitlines()
        assert len(lines) >= 2  # header + at least one evaluation row
        from reachrl.trainer import ConstrainedActorCritic as CAC

        restored = CAC.load(out / "final.ckpt", Quadrotor2DEnv())
        acts = restored.predict([restored.env_.start_state(1.0, 1.0)])
        assert np.all((acts >= 0.0) & (acts <= 1.0))
        _passline(8, "5k-step quadrotor smoke run completed with well-formed "
                     "artifacts")


@pytest.mark.slow
class TestCriterion9Determinism:
    def test_identical_runs_byte_identical_metrics(self, tmp_path):
        from reachrl.cli import main as cli_main

        blobs = []
        for run in range(2):
            out = tmp_path / f"run{run}"
            code = cli_main([
                "train", "--config", str(CONFIG_DIR / "di_rcrl.toml"),
                "--override", "train.total_steps=3000",
                "--override", "train.eval_interval=1000",
                "--override", "train.eval_episodes=5",
                "--override", "seed=12",
                "--override", f'out_dir="{out}"',
            ])
            assert code == 0
            blobs.append((out / "metrics.csv").read_bytes())
        assert blobs[0] == blobs[1]
        _passline(9, "identical config+seed reproduced metrics.csv byte for byte")
