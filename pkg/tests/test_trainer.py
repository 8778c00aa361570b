import csv

import numpy as np
import pytest

from polarbp.binarizer import read_checkpoint
from polarbp.trainer import (AdamState, PhaseSpec, TrainConfig, Trainer, adam_step, extract_code,
                             initial_logits, project_rate, train)


def tiny(**kw):
    base = dict(N=8, k=4, n_it=2, batch_size=16, steps=(20, 30, 30), train_snrs=(1.0, 3.0), seed=3)
    base.update(kw)
    return TrainConfig(**base)


class TestAdam:
    def test_zero_gradient(self):
        st = AdamState.zeros(4)
        for _ in range(5):
            assert not adam_step(st, np.zeros(4)).any()

    def test_first_step(self):
        st = AdamState.zeros(3, lr=1e-3)
        g = np.array([0.5, -2.0, 1e-3])
        d = adam_step(st, g)
        assert np.allclose(d, -1e-3 * np.sign(g) / (1 + 1e-8 / np.abs(g)), rtol=1e-12)

    def test_constant_gradient_limit(self):
        st = AdamState.zeros(2, lr=1e-3)
        for _ in range(1000):
            d = adam_step(st, np.array([3.0, -0.1]))
        assert np.allclose(d, [-1e-3, 1e-3], rtol=1e-6)

    def test_reference_update(self):
        # hand-rolled two steps
        st = AdamState.zeros(1, lr=0.1)
        adam_step(st, np.array([1.0]))
        d = adam_step(st, np.array([-1.0]))
        m = 0.9 * 0.1 - 0.1
        v = 0.999 * 0.001 + 0.001
        m_hat, v_hat = m / (1 - 0.81), v / (1 - 0.999 ** 2)
        assert d[0] == pytest.approx(-0.1 * m_hat / (np.sqrt(v_hat) + 1e-8))

    def test_shape_checked(self):
        with pytest.raises(ValueError):
            adam_step(AdamState.zeros(2), np.zeros(3))


class TestPhases:
    def test_default_plan(self):
        plan = TrainConfig().phases()
        assert [p.name for p in plan] == ["Initialization", "Optimization", "Saturation"]
        assert [p.steps for p in plan] == [200, 2000, 2000]
        assert plan[1].lambda1 == 1.0 and plan[1].lambda2_end == 0.0
        assert plan[2].lambda2_at(0) == 0.0 and plan[2].lambda2_at(1999) == 1.0

    def test_merged_plan(self):
        plan = TrainConfig(merge_phases=True).phases()
        assert [p.name for p in plan] == ["Initialization", "Saturation"]
        assert plan[1].steps == 4000

    @pytest.mark.parametrize("kw", [
        dict(name="Initialization", steps=5, lambda1=1.0),
        dict(name="Optimization", steps=5, lambda1=1.0, lambda2_end=0.5),
        dict(name="Warmup", steps=5),
        dict(name="Saturation", steps=-1),
    ])
    def test_phase_rules(self, kw):
        with pytest.raises(ValueError):
            PhaseSpec(**kw)

    @pytest.mark.parametrize("kw", [dict(N=12), dict(k=0), dict(a_init="ones"),
                                    dict(train_snrs=()), dict(channel="bsc"), dict(steps=(1, 2))])
    def test_config_validated(self, kw):
        with pytest.raises(ValueError):
            TrainConfig(**kw)


class TestExtraction:
    def test_top_k(self):
        assert extract_code(np.array([-5.0, 1.0, 3.0, -2.0]), 2).info_set_1based() == [2, 3]

    def test_tie_break(self):
        assert extract_code(np.array([1.0, 1.0, 0.0, 0.0]), 1).info_set_1based() == [1]

    def test_k_equals_n(self):
        assert extract_code(np.random.default_rng(0).normal(size=8), 8).info_set == tuple(range(8))

    def test_literal(self):
        assert extract_code(np.array([-5.0, 1.0, 3.0, -2.0]), 2, literal=True).info_set_1based() == [1, 4]


class TestProjection:
    def test_saturated(self):
        a = project_rate(np.full(8, 30.0), 0.5)
        # shift b is about -30, bringing every logit back to 0
        assert np.allclose(a, 0.0, atol=1e-4)
        assert abs((1 / (1 + np.exp(-a))).mean() - 0.5) < 1e-6

    def test_preserves_order(self):
        a0 = np.random.default_rng(1).normal(0, 3, 16)
        a = project_rate(a0, 0.25)
        assert np.array_equal(np.argsort(a), np.argsort(a0))
        assert abs((1 / (1 + np.exp(-a))).mean() - 0.25) < 1e-6


class TestTraining:
    def test_init_modes(self):
        assert not initial_logits(tiny()).any()
        warm = initial_logits(tiny(a_init="bhattacharyya"))
        assert sorted(set(warm.tolist())) == [-2.0, 2.0]
        assert (warm > 0).sum() == 4

    def test_phase1_breaks_symmetry(self):
        tr = Trainer(tiny())
        tr.run_phase(PhaseSpec("Initialization", 60))
        assert np.var(tr.a.a_soft) > 0

    def test_deterministic(self):
        a = train(tiny())
        b = train(tiny())
        assert np.array_equal(a.a_soft.a_soft, b.a_soft.a_soft)
        assert a.code == b.code
        c = train(tiny(seed=4))
        assert not np.array_equal(a.a_soft.a_soft, c.a_soft.a_soft)

    def test_k_equals_n(self):
        out = train(tiny(k=8, steps=(3, 3, 3)))
        assert out.code.info_set == tuple(range(8))

    def test_outputs(self, tmp_path):
        out = train(tiny(), out_dir=tmp_path, log_path=tmp_path / "log.csv")
        rows = list(csv.DictReader((tmp_path / "log.csv").open()))
        assert len(rows) == 80
        assert [r["phase"] for r in rows[19:21]] == ["Initialization", "Optimization"]
        assert float(rows[0]["l_rate"]) == pytest.approx(0.0)
        for name, step in [("initialization", 20), ("optimization", 50), ("saturation", 80)]:
            a, header = read_checkpoint(tmp_path / f"checkpoint_{name}.txt")
            assert header["step"] == step
        assert np.array_equal(a.a_soft, out.a_soft.a_soft)
        assert out.code.k == 4
        assert set(out.phase_ends) == {"Initialization", "Optimization", "Saturation"}

    def test_random_payload_and_projection(self):
        out = train(tiny(payload="random", rate_projection=True, steps=(5, 20, 5)))
        assert abs(out.a_soft.probs.mean() - 0.5) < 1e-5

    def test_logits_stay_clamped(self):
        out = train(tiny(lr=5.0, steps=(5, 5, 20)))
        assert np.all(np.abs(out.a_soft.a_soft) <= 30.0)

    def test_strong_rate_penalty_controls_rate(self):
        cfg = tiny(N=16, k=8, steps=(50, 400, 0), lambda1=1e4, lr=1e-2, seed=0)
        out = train(cfg)
        assert abs(out.a_soft.probs.mean() - 0.5) < 0.05


def test_projection_on_target_is_identity():
    a0 = np.array([-3.0, -1.0, 1.0, 3.0])
    assert np.allclose(project_rate(a0, 0.5), a0, atol=1e-6)


def test_full_scale_config_accepted():
    cfg = TrainConfig(N=256, k=128, n_it=5, train_snrs=(2.0, 4.0, 5.0), lr=1e-3)
    assert cfg.R_target == 0.5
    assert Trainer(cfg).graph.layer_count == 90
