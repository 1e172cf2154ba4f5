import numpy as np
import pytest

from flipattack import (CampaignConfig, CampaignState, Dataset, GdConfig, Model, ModelSpec,
                        StructuralError, ValidationError, build_init, load_checkpoint,
                        maybe_refresh, mix_rows, predict, reduce_best, run_campaign, run_round,
                        sample_step, save_checkpoint, step_bounds)
from flipattack.attack import CandidateBatch

FAST = GdConfig(steps=30, followup_steps=3)


def batch(x_adv, flipped, l1, run):
    x_adv = np.asarray(x_adv, float)
    return CandidateBatch(x_adv, x_adv.copy(), np.asarray(flipped, bool), np.asarray(l1, float), run)


def state_with(best_l1, flipped, d=2):
    n = len(best_l1)
    return CampaignState(0, np.zeros((n, d)), np.asarray(best_l1, float),
                         np.asarray(flipped, bool), [])


class TestSchedule:
    @pytest.mark.parametrize("n,lo,hi", [(1, 44.5721947, 445.721947), (45, 0.1, 1.0),
                                         (150, 4.76837e-8, 4.76837e-7)])
    def test_bounds(self, n, lo, hi):
        got = step_bounds(n)
        assert got[1] == pytest.approx(2.0 ** (9 - n / 5), rel=1e-9)
        assert got[0] == pytest.approx(2.0 ** (9 - n / 5) / 10, rel=1e-9)
        assert got == pytest.approx((lo, hi), rel=1e-6)

    def test_invalid_round(self):
        with pytest.raises(ValidationError):
            step_bounds(0)

    def test_sample_range_and_mean(self):
        r = np.random.default_rng(0)
        s = np.array([sample_step(45, r) for _ in range(10_000)])
        assert s.min() >= 0.1 and s.max() < 1.0
        assert abs(s.mean() - 0.55) <= 0.02

    def test_sample_deterministic(self):
        a = [sample_step(3, np.random.default_rng(5)) for _ in range(3)]
        assert a[0] == a[1] == a[2]


class TestMixing:
    def test_forced_weights(self, rng):
        a, b = rng.normal(size=5), rng.normal(size=5)
        np.testing.assert_array_equal(mix_rows(a, b, w=1.0), a)
        np.testing.assert_array_equal(mix_rows(a, b, w=0.0), b)
        np.testing.assert_array_equal(mix_rows(np.zeros(4), np.ones(4), w=0.5), np.full(4, 0.5))

    def test_length_mismatch(self):
        with pytest.raises(StructuralError):
            mix_rows(np.zeros(3), np.zeros(4), w=0.5)

    def test_row_weights_in_segment(self, rng):
        a, b = np.zeros((50, 3)), np.ones((50, 3))
        m = mix_rows(a, b, rng)
        assert np.all((m >= 0) & (m <= 1))
        np.testing.assert_array_equal(m, m[:, :1].repeat(3, axis=1))


class TestBuildInit:
    def test_first_runs(self, small_data, rng):
        st = CampaignState.initial(small_data, 20)
        X, y = small_data.features, small_data.labels
        np.testing.assert_array_equal(build_init(1, 3, X, y, st, rng), X[3])
        np.testing.assert_array_equal(build_init(2, 3, X, y, st, rng), X[3])

    def test_opposite_partner(self, small_data, monkeypatch):
        X, y = small_data.features, small_data.labels
        st = CampaignState.initial(small_data, 20)

        class ZeroW:
            def random(self, size=None):
                return 0.0 if size is None else np.zeros(size)
        init = build_init(15, 0, X, y, st, ZeroW())
        k = int(np.flatnonzero(np.all(X == init, axis=1))[0])
        assert y[k] != y[0]

    def test_mix_with_best_on_segment(self, small_data, rng):
        X, y = small_data.features, small_data.labels
        st = CampaignState.initial(small_data, 20)
        st.x_best = X + 1.0
        v = build_init(5, 2, X, y, st, rng)
        t = v - X[2]
        assert np.allclose(t, t[0]) and 0.0 <= t[0] <= 1.0

    def test_bad_run_index(self, small_data, rng):
        st = CampaignState.initial(small_data, 20)
        with pytest.raises(ValidationError):
            build_init(0, 0, small_data.features, small_data.labels, st, rng)


class TestRefresh:
    def test_extremes(self, rng):
        assert all(maybe_refresh("c", "f", rng, 1.0) == "f" for _ in range(100))
        assert all(maybe_refresh("c", "f", rng, 0.0) == "c" for _ in range(100))

    def test_fraction(self):
        r = np.random.default_rng(1)
        frac = np.mean([maybe_refresh(0, 1, r, 0.5) for _ in range(10_000)])
        assert 0.48 <= frac <= 0.52


class TestReduceBest:
    def test_takes_minimum(self):
        st = state_with([0.005], [True])
        out = reduce_best(st, [batch([[1, 1]], [True], [0.004], 1), batch([[2, 2]], [True], [0.007], 2)])
        assert out.best_l1[0] == 0.004
        np.testing.assert_array_equal(out.x_best[0], [1, 1])

    def test_unflipped_ignored(self):
        st = state_with([0.005], [True])
        out = reduce_best(st, [batch([[1, 1]], [False], [0.001], 1)])
        assert out.best_l1[0] == 0.005 and out.best_flipped[0]

    def test_first_flip(self):
        st = state_with([np.inf], [False])
        out = reduce_best(st, [batch([[1, 1]], [True], [0.9], 3)])
        assert out.best_l1[0] == 0.9 and out.best_flipped[0]

    def test_tie_lowest_run(self):
        st = state_with([np.inf], [False])
        out = reduce_best(st, [batch([[2, 2]], [True], [0.5], 4), batch([[1, 1]], [True], [0.5], 2)])
        np.testing.assert_array_equal(out.x_best[0], [1, 1])

    def test_input_untouched(self):
        st = state_with([1.0], [True])
        reduce_best(st, [batch([[1, 1]], [True], [0.1], 1)])
        assert st.best_l1[0] == 1.0


def zero_model(d):
    return Model.zeros(ModelSpec(d, (3,)))


class TestCampaign:
    def test_zero_model_invariant(self, small_data):
        cfg = CampaignConfig(rounds=3, runs_per_round=12, gd=FAST)
        labels = np.r_[np.ones(11, np.int64), 0]
        res = run_campaign(zero_model(5), Dataset(small_data.features, labels), cfg)
        assert all(r.fooling_ratio == 0 and r.score == 0 for r in res.metrics)
        np.testing.assert_array_equal(res.x_adv, small_data.features)

    def test_zero_rounds(self, small_data, rng):
        m = Model.random(ModelSpec(5, (4,)), rng)
        res = run_campaign(m, small_data, CampaignConfig(rounds=0))
        np.testing.assert_array_equal(res.x_adv, small_data.features)
        assert res.metrics == []

    def test_monotone_and_consistent(self, small_data):
        m = Model(ModelSpec(5, ()), ((np.array([[3.0, 0.5, 0, 0, 0]]), np.zeros(1)),))
        data = Dataset(small_data.features, predict(m, small_data.features))
        seen = []
        res = run_campaign(m, data, CampaignConfig(rounds=6, runs_per_round=12, gd=FAST),
                           on_round=lambda s: seen.append(s.best_l1.copy()))
        for a, b in zip(seen, seen[1:]):
            assert np.all(b <= a)
        # with an unchanged fooled set the score can only rise; newly fooled far rows may lower it
        for a, b in zip(res.metrics, res.metrics[1:]):
            if a.n_fooled == b.n_fooled:
                assert b.score >= a.score
        st = res.state
        ok = st.best_flipped
        np.testing.assert_allclose(st.best_l1[ok], np.abs(st.x_best - data.features).sum(axis=1)[ok],
                                   rtol=0, atol=0)
        assert np.all(np.isinf(st.best_l1[~ok]))

    def test_deterministic_and_workers(self, small_data):
        m = Model(ModelSpec(5, ()), ((np.array([[3.0, 0.5, 0, 0, 0]]), np.zeros(1)),))
        data = Dataset(small_data.features, predict(m, small_data.features))
        cfg = CampaignConfig(rounds=3, runs_per_round=12, gd=FAST, base_seed=4)
        a = run_campaign(m, data, cfg)
        b = run_campaign(m, data, CampaignConfig(rounds=3, runs_per_round=12, gd=FAST, base_seed=4,
                                                 workers=3))
        np.testing.assert_array_equal(a.x_adv, b.x_adv)
        assert a.metrics == b.metrics

    def test_resume_equals_straight(self, small_data, tmp_path):
        m = Model(ModelSpec(5, ()), ((np.array([[3.0, 0.5, 0, 0, 0]]), np.zeros(1)),))
        data = Dataset(small_data.features, predict(m, small_data.features))
        full = run_campaign(m, data, CampaignConfig(rounds=4, runs_per_round=12, gd=FAST))
        ck = tmp_path / "ck.json"
        run_campaign(m, data, CampaignConfig(rounds=2, runs_per_round=12, gd=FAST), checkpoint=ck)
        st, meta = load_checkpoint(ck)
        assert st.round == 2 and meta["runs_per_round"] == 12
        rest = run_campaign(m, data, CampaignConfig(rounds=4, runs_per_round=12, gd=FAST), state=st)
        np.testing.assert_array_equal(full.x_adv, rest.x_adv)
        assert full.metrics == rest.metrics

    def test_checkpoint_round_trip_inf(self, small_data, tmp_path):
        st = CampaignState.initial(small_data, 3)
        save_checkpoint(st, CampaignConfig(runs_per_round=3), tmp_path / "c.json")
        back, _ = load_checkpoint(tmp_path / "c.json")
        assert np.all(np.isinf(back.best_l1))
        np.testing.assert_array_equal(back.x_best, st.x_best)

    def test_bad_checkpoint(self, tmp_path):
        (tmp_path / "x.json").write_text("{}")
        with pytest.raises(StructuralError):
            load_checkpoint(tmp_path / "x.json")

    def test_round_order_enforced(self, small_data, rng):
        m = Model.random(ModelSpec(5, (4,)), rng)
        st = CampaignState.initial(small_data, 20)
        with pytest.raises(ValidationError):
            run_round(m, small_data, st, CampaignConfig(gd=FAST), n=3)

    def test_needs_both_labels(self, rng):
        m = Model.random(ModelSpec(2, (2,)), rng)
        data = Dataset(rng.normal(size=(4, 2)), np.ones(4, dtype=np.int64))
        with pytest.raises(ValidationError):
            run_campaign(m, data, CampaignConfig(rounds=1))

    def test_dim_mismatch(self, small_data, rng):
        m = Model.random(ModelSpec(3, (2,)), rng)
        with pytest.raises(StructuralError):
            run_campaign(m, small_data, CampaignConfig(rounds=1))

    @pytest.mark.parametrize("kw", [dict(rounds=-1), dict(runs_per_round=0), dict(reduction="max"),
                                    dict(refresh_probability=1.5), dict(workers=0)])
    def test_config_invalid(self, kw):
        with pytest.raises(ValidationError):
            CampaignConfig(**kw)
