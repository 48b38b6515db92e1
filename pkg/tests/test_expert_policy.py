import numpy as np
import pytest

from biasbench.core import BiasSettings
from biasbench.env import BiasAction
from biasbench.tuner.controller import ControllerAction, RuleControllerConfig, rule_controller_step
from biasbench.tuner.expert import (
    Demonstration,
    OptimalRange,
    load_demonstrations,
    save_demonstrations,
    scripted_expert,
)
from biasbench.tuner.features import FeatureVector
from biasbench.tuner.policy import (
    BCPolicy,
    gradient_check,
    load_policy,
    policy_act,
    save_policy,
    train_bc,
)

GREY_RANGE = OptimalRange(diff_off=(15, 65), diff_on=(40, 90))


class TestScriptedExpert:
    def test_inadequate_start_steps_to_interval_middle(self):
        a = scripted_expert(BiasSettings(diff_on=-35, diff_off=-10), GREY_RANGE)
        assert a.d_off > 0 and a.d_on > 0
        landed = a.apply_to(BiasSettings(diff_on=-35, diff_off=-10))
        assert GREY_RANGE.contains(landed)
        assert (landed.diff_off, landed.diff_on) == (40, 65)  # interval midpoints

    def test_inside_range_zero_action(self):
        a = scripted_expert(BiasSettings(diff_on=55, diff_off=30), GREY_RANGE)
        assert a.as_tuple() == (0, 0, 0, 0, 0)

    def test_far_start_clamped_to_max_step(self):
        a = scripted_expert(BiasSettings(diff_on=50, diff_off=300), GREY_RANGE, max_step=125)
        assert a.d_off == -125
        assert a.d_on == 0

    def test_idempotent_inside_strictly_closer_outside(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            b = BiasSettings(diff_on=int(rng.integers(-300, 400)), diff_off=int(rng.integers(-300, 400)))
            a = scripted_expert(b, GREY_RANGE)
            landed = a.apply_to(b)
            if GREY_RANGE.contains(b):
                assert a.as_tuple() == (0, 0, 0, 0, 0)
            else:
                def dist(x):
                    d_off = max(GREY_RANGE.diff_off[0] - x.diff_off, x.diff_off - GREY_RANGE.diff_off[1], 0)
                    d_on = max(GREY_RANGE.diff_on[0] - x.diff_on, x.diff_on - GREY_RANGE.diff_on[1], 0)
                    return d_off + d_on

                assert dist(landed) < dist(b)

    def test_bad_range_rejected(self):
        with pytest.raises(ValueError):
            OptimalRange(diff_off=(65, 15), diff_on=(40, 90))


def _demo(values, action, biases):
    return Demonstration(
        features=FeatureVector(np.asarray(values, float), (4, 4), "pooled-stats", 8000),
        action=action,
        biases=biases,
        scene_id="spinning-dot",
    )


class TestDemonstrationIo:
    def test_jsonl_roundtrip(self, tmp_path):
        demos = [
            _demo(np.arange(6), BiasAction(25, 75), BiasSettings(diff_on=-35, diff_off=-10)),
            _demo(np.ones(6), BiasAction(0, 0), BiasSettings(diff_on=40, diff_off=40)),
        ]
        save_demonstrations(demos, tmp_path / "demos.jsonl")
        lines = (tmp_path / "demos.jsonl").read_text().splitlines()
        assert len(lines) == 2
        back = load_demonstrations(tmp_path / "demos.jsonl")
        assert back[0].action == BiasAction(25, 75)
        assert np.array_equal(back[0].features.values, np.arange(6, dtype=float))
        assert back[1].biases == BiasSettings(diff_on=40, diff_off=40)
        assert back[0].annotator == "scripted"


class TestTrainBc:
    def _single_pair_dataset(self, copies=32):
        rng = np.random.default_rng(0)
        feat = rng.random(10)
        return [
            _demo(feat, BiasAction(25, 75), BiasSettings(diff_on=-35, diff_off=-10))
            for _ in range(copies)
        ]

    def test_single_pair_reaches_low_loss_within_200_epochs(self):
        policy, history = train_bc(self._single_pair_dataset(), epochs=200, batch_size=32, seed=1)
        assert min(h["val"] for h in history) < 0.01
        # broad descent: late-phase average far below early-phase average
        tr = [h["train"] for h in history]
        assert np.mean(tr[-20:]) < 0.2 * np.mean(tr[:20])

    def test_training_is_deterministic(self):
        demos = self._single_pair_dataset()
        p1, h1 = train_bc(demos, epochs=20, seed=7)
        p2, h2 = train_bc(demos, epochs=20, seed=7)
        assert h1 == h2
        for (w1, b1), (w2, b2) in zip(p1.layers_, p2.layers_):
            assert np.array_equal(w1, w2)
            assert np.array_equal(b1, b2)

    def test_empty_dataset_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            train_bc([])

    def test_gradient_check_against_finite_differences(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(10, 6))
        y = rng.uniform(-100, 100, size=(10, 2))
        policy = BCPolicy(hidden=(8, 8), epochs=1, seed=0, batch_size=10, val_frac=0.0)
        policy.fit(x, y)
        assert gradient_check(policy, x, y) <= 1e-4

    def test_nonfinite_features_abort_with_diagnostics(self):
        x = np.ones((8, 4))
        x[3, 2] = np.nan
        y = np.zeros((8, 2))
        with pytest.raises(RuntimeError, match="non-finite"):
            BCPolicy(hidden=(8,), epochs=2, seed=0, batch_size=8, val_frac=0.0).fit(x, y)


class TestPolicyAct:
    def _trained(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(64, 12))
        y = rng.uniform(-100, 100, size=(64, 2))
        return BCPolicy(hidden=(16, 16), epochs=30, seed=0, batch_size=16).fit(x, y)

    def test_zero_weight_model_zero_action(self):
        policy = self._trained()
        for layer in policy.layers_:
            layer[0][:] = 0.0
            layer[1][:] = 0.0
        act = policy_act(policy, np.ones(12))
        assert act.as_tuple() == (0, 0, 0, 0, 0)

    def test_outputs_bounded_by_action_scale(self):
        policy = self._trained()
        rng = np.random.default_rng(1)
        for _ in range(50):
            act = policy_act(policy, rng.normal(scale=100, size=12))
            assert abs(act.d_off) <= policy.action_scale
            assert abs(act.d_on) <= policy.action_scale

    def test_dimension_mismatch_rejected(self):
        policy = self._trained()
        with pytest.raises(ValueError, match="dimension"):
            policy_act(policy, np.ones(5))

    def test_action_has_zero_fixed_components(self):
        act = policy_act(self._trained(), np.ones(12))
        assert act.as_tuple()[2:] == (0, 0, 0)


class TestModelFile:
    def test_save_load_roundtrip_predictions(self, tmp_path):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(32, 6))
        y = rng.uniform(-50, 50, size=(32, 2))
        policy = BCPolicy(hidden=(8, 8), epochs=10, seed=2).fit(x, y)
        save_policy(policy, tmp_path / "m.bbm")
        back = load_policy(tmp_path / "m.bbm")
        assert np.array_equal(back.predict(x), policy.predict(x))
        assert back.action_scale == policy.action_scale
        assert back.hidden == (8, 8)

    def test_magic_checked(self, tmp_path):
        (tmp_path / "m.bbm").write_bytes(b"NOPE" + b"\0" * 20)
        with pytest.raises(ValueError, match="magic"):
            load_policy(tmp_path / "m.bbm")


class TestRuleController:
    CFG = RuleControllerConfig(er_lo=1000.0, er_hi=50_000.0, noise_max=0.5, step=25)

    def test_in_band_zero_action(self):
        act = rule_controller_step(er=10_000, noise_frac=0.1, cfg=self.CFG)
        assert act.is_zero()

    def test_er_too_high_raises_both_thresholds(self):
        act = rule_controller_step(er=100_000, noise_frac=0.1, cfg=self.CFG)
        assert (act.d_on, act.d_off) == (25, 25)
        assert act.d_refr == 0 and act.d_fo == 0

    def test_saturated_er_also_lengthens_refractory(self):
        act = rule_controller_step(er=100_000, noise_frac=0.1, cfg=self.CFG, er_saturated=True)
        assert (act.d_on, act.d_off) == (25, 25)
        assert act.d_refr == -25  # lower refr bias = longer dead time

    def test_er_too_low_lowers_both_thresholds(self):
        act = rule_controller_step(er=10, noise_frac=0.1, cfg=self.CFG)
        assert (act.d_on, act.d_off) == (-25, -25)

    def test_noise_branch_reduces_bandwidth(self):
        act = rule_controller_step(er=10_000, noise_frac=0.9, cfg=self.CFG)
        assert act.d_fo == -25
        assert act.d_on == act.d_off == 0

    def test_er_regulation_has_priority_over_noise(self):
        act = rule_controller_step(er=100_000, noise_frac=0.9, cfg=self.CFG)
        assert act.d_fo == 0
        assert (act.d_on, act.d_off) == (25, 25)

    def test_apply_to_biases(self):
        act = ControllerAction(d_on=25, d_off=25, d_refr=-25)
        b = act.apply_to(BiasSettings(0, 0, 0, 0, 0))
        assert b == BiasSettings(25, 25, 0, 0, -25)
