"""
优化器测试：各规则的闭式结果、方向平行、LALC 步长上限、默认参数表与学习率调度
"""


import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from src.errors import ConfigError, DomainError, PreconditionError, ShapeError
from src.network import BatchNormSpec, DenseSpec, InitScheme, init_network
from src.optimizers import (
    ZERO_NORM_SENTINEL,
    LayerOptimizerState,
    LayerwiseOptimizer,
    OptimizerKind,
    OptimizerSpec,
    ScheduleSpec,
    agc_trust_ratios,
    clars_trust_ratio,
    default_eps,
    default_eta,
    lalc_lambda,
    lalc_step_size,
    lambc_trust_ratio,
    lars_trust_ratio,
    momentum_update,
    schedule_lr,
    step_agc,
    step_clars,
    step_clars_norms,
    step_lalc,
    step_lamb,
    step_lambc,
    step_lars,
    step_sgd,
)
from src.tensor_core import RngStream, gaussian


def _cosine(a, b):
    a, b = np.ravel(a), np.ravel(b)
    return float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))


class TestMomentum:

    def test_coupled_weight_decay(self):
        w = np.array([1.0, -2.0])
        state = LayerOptimizerState.zeros_like(w)
        g = np.array([0.5, 0.5])
        m = momentum_update(state, g, w, 0.9, 0.1)
        assert_allclose(m, [0.6, 0.3])
        m = momentum_update(state, g, w, 0.9, 0.1)
        assert_allclose(m, [0.9 * 0.6 + 0.6, 0.9 * 0.3 + 0.3])
        assert state.t == 2

    def test_shape_mismatch(self):
        state = LayerOptimizerState.zeros_like(np.zeros(3))
        with pytest.raises(ShapeError):
            momentum_update(state, np.zeros(2), np.zeros(3), 0.9, 0.0)


class TestRules:

    def setup_method(self):
        self.w = np.ones((2, 2))            # ‖w‖ = 2
        self.m = np.full((2, 2), 0.25)      # ‖m‖ = 0.5
        self.g = np.full((2, 2), 0.5)       # ‖g‖ = 1

    def test_sgd(self):
        new, step = step_sgd(self.w, self.m, 0.1)
        assert_allclose(new, self.w - 0.025)
        assert step == 0.1

    def test_sgd_quadratic_step(self):
        # ½(w−1)² 在 w = 0 处的梯度为 −1
        new, _ = step_sgd(np.zeros(1), np.array([-1.0]), 0.5)
        assert_array_equal(new, [0.5])

    def test_lars(self):
        tau = 1e-3 * 2.0 / (1.0 + 5e-4 * 2.0 + 1e-8)
        assert_allclose(lars_trust_ratio(2.0, 1.0, 1e-3, 1e-8, 5e-4), tau)
        new, step = step_lars(self.w, self.m, self.g, 0.5, 1e-3, 1e-8, 5e-4)
        assert_allclose(new, self.w - 0.5 * tau * self.m)
        assert_allclose(step, 0.5 * tau)

    def test_lars_zero_denominator(self):
        assert lars_trust_ratio(0.0, 0.0, 1e-3, 0.0) == 0.0

    def test_lars_step_norm_independent_of_gradient_scale(self, rng):
        w = gaussian(rng, 0.0, 1.0, 5, 4)
        g = gaussian(rng, 0.0, 1.0, 5, 4)
        for c in (1.0, 10.0, 1e3):
            # momentum 0：m = g
            new, _ = step_lars(w, c * g, c * g, 0.1, 1e-2, 1e-12, 0.0)
            expected = 0.1 * 1e-2 * np.linalg.norm(w)
            assert_allclose(np.linalg.norm(w - new), expected, rtol=1e-9)

    def test_lamb_and_lambc(self):
        assert_allclose(step_lamb(self.w, self.m, 0.1, 0.0)[0], self.w - 0.1 * 4.0 * self.m)
        # 2 / 0.5 = 4 被 μ = 0.01 截断
        assert_allclose(step_lambc(self.w, self.m, 0.1, 0.0, 1e-2)[0], self.w - 0.1 * 1e-2 * self.m)
        clipped, _ = step_lambc(self.w, self.m, 0.1, 0.0, 1e-2, phi=lambda z: min(z, 1e-3))
        assert_allclose(clipped, self.w - 0.1 * 2e-3 * self.m)
        with pytest.raises(DomainError):
            step_lambc(self.w, self.m, 0.1, 0.0, 0.0)

    @pytest.mark.parametrize("w_norm, m_norm, expected", [(5.0, 1.0, 2.0), (5.0, 10.0, 0.5)])
    def test_lambc_trust_ratio_examples(self, w_norm, m_norm, expected):
        assert lambc_trust_ratio(w_norm, m_norm, 0.0, 2.0) == expected

    def test_lambc_zero_momentum(self):
        assert_array_equal(step_lambc(self.w, np.zeros((2, 2)), 0.1, 0.0, 1e-2)[0], self.w)

    def test_clars(self):
        samples = [np.full((2, 2), 0.5), np.full((2, 2), 1.5)]   # 范数 1 与 3
        tau = 1e-3 * 2.0 / (2.0 + 1e-8)
        new, step = step_clars(self.w, self.m, samples, 1.0, 1e-3, 1e-8)
        assert_allclose(new, self.w - tau * self.m)
        assert_allclose(step, tau)
        with pytest.raises(DomainError):
            step_clars(self.w, self.m, [], 1.0, 1e-3, 1e-8)
        with pytest.raises(ShapeError):
            step_clars(self.w, self.m, [np.zeros(3)], 1.0, 1e-3, 1e-8)

    def test_clars_from_norms_matches_per_sample_tensors(self):
        samples = [np.full((2, 2), 0.5), np.full((2, 2), 1.5)]
        by_tensor = step_clars(self.w, self.m, samples, 1.0, 1e-3, 1e-8)
        by_norm = step_clars_norms(self.w, self.m, np.array([1.0, 3.0]), 1.0, 1e-3, 1e-8)
        assert_array_equal(by_tensor[0], by_norm[0])
        assert by_tensor[1] == by_norm[1]

    def test_clars_opposite_samples_give_zero_step(self):
        g = np.full((2, 2), 0.5)
        new, _ = step_clars(self.w, np.zeros((2, 2)), [g, -g], 1.0, 1e-3, 1e-8)
        assert_array_equal(new, self.w)

    def test_clars_never_exceeds_lars(self, rng):
        for _ in range(100):
            w = gaussian(rng, 0.0, 1.0, 8, 4)
            samples = [gaussian(rng, 0.3, 1.0, 8, 4) for _ in range(8)]
            mean_grad = np.mean(samples, axis=0)
            clars = clars_trust_ratio(np.linalg.norm(w), [np.linalg.norm(s) for s in samples], 1e-3, 1e-8)
            lars = lars_trust_ratio(np.linalg.norm(w), np.linalg.norm(mean_grad), 1e-3, 1e-8)
            assert clars <= lars * (1 + 1e-12)

    def test_agc_per_column(self):
        w = np.array([[3.0, 0.0], [4.0, 0.0]])
        m = np.array([[1.0, 1.0], [0.0, 1.0]])
        ratios = agc_trust_ratios(w, m, 0.1, 1e-3)
        assert_allclose(ratios, [0.5 / 1.001, 0.0])
        new, step = step_agc(w, m, 2.0, 0.1, 1e-3)
        assert_allclose(new[:, 0], w[:, 0] - 2.0 * ratios[0] * m[:, 0])
        assert_array_equal(new[:, 1], w[:, 1])
        assert_allclose(step, 2.0 * ratios.mean())

    def test_agc_matches_scalar_column_oracle(self, rng):
        w = gaussian(rng, 0.0, 1.0, 6, 5)
        m = gaussian(rng, 0.0, 1.0, 6, 5)
        m[:, 1] *= 100.0    # 这一列被裁剪
        new, _ = step_agc(w, m, 0.3, 1e-1, 1e-3)
        for j in range(5):
            tau = min(1e-1 * np.linalg.norm(w[:, j]) / (np.linalg.norm(m[:, j]) + 1e-3), 1.0)
            assert_allclose(new[:, j], w[:, j] - 0.3 * tau * m[:, j], rtol=1e-12)

    def test_agc_caps_at_one_and_vector_params(self):
        w = np.array([10.0, 0.0])
        m = np.array([0.1, 0.0])
        ratios = agc_trust_ratios(w, m, 0.1, 1e-3)
        assert ratios.shape == (1,)
        assert ratios[0] == 1.0
        assert_allclose(step_agc(w, m, 0.5, 0.1, 1e-3)[0], w - 0.5 * m)

    def test_lalc_step_is_min_of_lr_and_lambda(self):
        lam = 1.0 / (1e3 * (0.5 / 2.0) ** 2 + 1.0)
        new, step = step_lalc(self.w, self.m, 10.0, 1e3, 1.0)
        assert_allclose(step, lam)
        assert_allclose(new, self.w - lam * self.m)
        _, small = step_lalc(self.w, self.m, 1e-4, 1e3, 1.0)
        assert small == 1e-4

    def test_lalc_hand_examples(self):
        # ‖w‖ = 2, ‖m‖ = 1, η = 1, ε = 0：λ = 4
        assert lalc_lambda(2.0, 1.0, 1.0, 0.0) == 4.0
        assert lalc_step_size(2.0, 1.0, 10.0, 1.0, 0.0) == 4.0
        assert lalc_step_size(2.0, 1.0, 0.1, 1.0, 0.0) == 0.1

    def test_lalc_default_hyperparameters_example(self):
        # η = 1e3, ε = 1, ‖m‖/‖w‖ = 0.01
        assert_allclose(lalc_lambda(1.0, 0.01, 1e3, 1.0), 1.0 / 1.1, rtol=1e-12)
        assert round(lalc_lambda(1.0, 0.01, 1e3, 1.0), 3) == 0.909

    def test_lalc_scalar_chain_step_ratio(self):
        # y = w₂·w₁·x：w₁ = 100, w₂ = 1 时两层的梯度为 200 与 2e4
        w1, w2 = np.array([100.0]), np.array([1.0])
        m1, m2 = np.array([200.0]), np.array([2e4])
        _, step1 = step_lalc(w1, m1, 1e30, 1e3, 0.0)
        _, step2 = step_lalc(w2, m2, 1e30, 1e3, 0.0)
        expected = (200.0 ** 2 / 100.0 ** 2) / (2e4 ** 2 / 1.0)
        assert_allclose(step2 / step1, expected, rtol=1e-9)

    def test_lalc_zero_weight_uses_sentinel(self):
        lam = lalc_lambda(0.0, 1.0, 1e3, 1.0)
        assert_allclose(lam, 1.0 / (1e3 * ZERO_NORM_SENTINEL + 1.0))
        assert lalc_lambda(0.0, 1.0, 1e3, 0.0) > 0.0

    def test_lalc_step_bounded_by_weight_norm(self, rng):
        for _ in range(1000):
            w = gaussian(rng, 0.0, 1.0, 4, 3)
            m = gaussian(rng, 0.0, float(np.exp(rng.uniform(-5.0, 5.0, 1)[0])), 4, 3)
            gamma_t = float(np.exp(rng.uniform(-5.0, 5.0, 1)[0]))
            new, step = step_lalc(w, m, gamma_t, 1e3, 1.0)
            assert step <= gamma_t
            moved = np.linalg.norm(new - w)
            bound = np.linalg.norm(w) ** 2 / (1e3 * np.linalg.norm(m))
            assert moved <= bound * (1 + 1e-12)

    def test_lalc_step_decreases_with_ratio(self):
        steps = [lalc_step_size(1.0, r, 1e9, 1e3, 1.0) for r in (1e-3, 1e-2, 1e-1, 1.0, 10.0, 1e3)]
        assert all(a > b for a, b in zip(steps, steps[1:]))
        assert steps[-1] < 1e-8

    def test_lalc_survives_huge_learning_rate(self, rng):
        w = gaussian(rng, 0.0, 0.1, 8, 8)
        state = LayerOptimizerState.zeros_like(w)
        for _ in range(200):
            g = gaussian(rng, 0.0, 1e3, 8, 8) + 10.0 * w
            m = momentum_update(state, g, w, 0.9, 5e-4)
            w, _ = step_lalc(w, m, 1e12, 1e3, 1.0)
        assert np.all(np.isfinite(w))

    def test_clipped_scalar_unchanged_by_rescaling(self, rng):
        w = gaussian(rng, 0.0, 1.0, 6, 5)
        m = gaussian(rng, 0.0, 1e-3, 6, 5)
        for c in (2.0, 10.0):
            # LAMBC：τ 已被 μ 截断
            new, step = step_lambc(w, m, 0.1, 0.0, 1e-2)
            new_c, step_c = step_lambc(w, c * m, 0.1, 0.0, 1e-2)
            assert step_c == step
            assert_allclose(w - new_c, c * (w - new), rtol=1e-8)
            # LALC：λ 放大后仍大于 γ_t
            new, step = step_lalc(w, m, 1e-3, 1e3, 1.0)
            new_c, step_c = step_lalc(w, c * m, 1e-3, 1e3, 1.0)
            assert step == step_c == 1e-3
            assert_allclose(w - new_c, c * (w - new), rtol=1e-8)

    @pytest.mark.parametrize("rule", ["sgd", "lars", "lamb", "lambc", "clars", "lalc"])
    def test_update_parallel_to_momentum(self, rng, rule):
        for _ in range(1000):
            w = gaussian(rng, 0.0, 1.0, 3, 2)
            m = gaussian(rng, 0.0, 1.0, 3, 2)
            g = gaussian(rng, 0.0, 1.0, 3, 2)
            new, _ = {
                "sgd": lambda: step_sgd(w, m, 0.1),
                "lars": lambda: step_lars(w, m, g, 0.1, 1e-2, 1e-8, 5e-4),
                "lamb": lambda: step_lamb(w, m, 0.1, 1e-8),
                "lambc": lambda: step_lambc(w, m, 0.1, 1e-8, 1e-2),
                "clars": lambda: step_clars(w, m, [g, 2 * g], 0.1, 1e-2, 1e-8),
                "lalc": lambda: step_lalc(w, m, 0.1, 1e3, 1.0),
            }[rule]()
            assert_allclose(_cosine(w - new, m), 1.0, rtol=1e-12)

    def test_agc_columns_parallel(self, rng):
        w = gaussian(rng, 0.0, 1.0, 6, 5)
        m = gaussian(rng, 0.0, 1.0, 6, 5)
        delta = w - step_agc(w, m, 0.1, 1e-1, 1e-3)[0]
        for j in range(5):
            assert_allclose(_cosine(delta[:, j], m[:, j]), 1.0, rtol=1e-12)


class TestDefaults:

    @pytest.mark.parametrize("kind, batch, expected", [
        ("lars", 128, 1e-2),
        ("lars", 3000, 1e-3),
        ("clars", 4096, 1e-3),
        ("clars", 8192, 1e-4),
        ("clars", 32768, 1e-4),
        ("lambc", 64, 1e-2),
        ("agc", 2048, 1e-1),
        ("agc", 4096, 1e-2),
        ("lalc", 4096, 1e3),
        ("lalc", 8192, 2e3),
        ("sgd", 4096, 1.0),
    ])
    def test_eta_table(self, kind, batch, expected):
        assert default_eta(OptimizerKind(kind), batch) == expected

    def test_eps(self):
        assert default_eps(OptimizerKind.AGC) == 1e-3
        assert default_eps(OptimizerKind.LALC) == 1.0
        assert default_eps(OptimizerKind.LARS) == 1e-8

    def test_resolve(self):
        spec = OptimizerSpec(OptimizerKind.LAMBC).resolve(4096)
        assert spec.eta == 1e-2
        assert spec.eps == 1e-8
        assert spec.clip_mu == 1e-2
        explicit = OptimizerSpec(OptimizerKind.LALC, eta=5.0).resolve(8192)
        assert explicit.eta == 5.0
        assert explicit.eps == 1.0

    def test_spec_validation(self):
        with pytest.raises(DomainError):
            OptimizerSpec(OptimizerKind.LARS, clip_mu=1e-2)
        with pytest.raises(DomainError):
            OptimizerSpec(OptimizerKind.SGD, momentum=1.0)
        with pytest.raises(ConfigError):
            OptimizerSpec.from_dict({'kind': 'adam'})
        with pytest.raises(ConfigError):
            OptimizerSpec.from_dict({'kind': 'lars', 'lr': 0.1})
        spec = OptimizerSpec.from_dict({'kind': 'lalc', 'eta': 2000})
        assert OptimizerSpec.from_dict(spec.to_dict()) == spec

    def test_phi_clamp(self):
        spec = OptimizerSpec(OptimizerKind.LAMB, phi_lo=0.5, phi_hi=2.0)
        assert spec.phi(0.1) == 0.5
        assert spec.phi(1.0) == 1.0
        assert spec.phi(9.0) == 2.0


class TestSchedule:

    def test_linear_scaling_and_warmup(self):
        spec = ScheduleSpec(base_lr=0.1, batch_size=4096, warmup_steps=5, total_steps=25)
        assert_allclose(spec.effective_base_lr, 3.2)
        assert_allclose(schedule_lr(spec, 0), 3.2 / 5)
        assert_allclose(schedule_lr(spec, 4), 3.2)
        assert_allclose(schedule_lr(spec, 5), 3.2)
        assert_allclose(schedule_lr(spec, 15), 1.6)
        lrs = [schedule_lr(spec, t) for t in range(5, 25)]
        assert all(a > b for a, b in zip(lrs, lrs[1:]))
        assert lrs[-1] > 0

    def test_constant(self):
        spec = ScheduleSpec(base_lr=0.1, batch_size=128, total_steps=3, decay='constant')
        assert [schedule_lr(spec, t) for t in range(3)] == [0.1, 0.1, 0.1]

    def test_out_of_range(self):
        spec = ScheduleSpec(base_lr=0.1, batch_size=128, total_steps=3)
        with pytest.raises(DomainError):
            schedule_lr(spec, 3)
        with pytest.raises(DomainError):
            schedule_lr(spec, -1)

    def test_validation(self):
        with pytest.raises(DomainError):
            ScheduleSpec(base_lr=0.1, batch_size=128, warmup_steps=10, total_steps=10)
        with pytest.raises(ConfigError):
            ScheduleSpec.from_dict({'base_lr': 0.1, 'batch_size': 128})
        with pytest.raises(ConfigError):
            ScheduleSpec.from_dict({'base_lr': 0.1, 'batch_size': 128, 'total_steps': 4, 'warmup_steps': 4})


class TestLayerwiseOptimizer:

    def _net(self):
        specs = [DenseSpec(3, 4), BatchNormSpec(4), DenseSpec(4, 2)]
        return init_network(specs, InitScheme('he'), RngStream(0))

    def _grads(self, net, value=0.1):
        return {name: np.full_like(w, value) for name, _, w in net.named_parameters()}

    def _schedule(self, batch=128, lr=0.1):
        return ScheduleSpec(base_lr=lr, batch_size=batch, total_steps=10, decay='constant')

    def test_plain_sgd(self):
        net = self._net()
        before = {name: w.copy() for name, _, w in net.named_parameters()}
        opt = LayerwiseOptimizer(OptimizerSpec(OptimizerKind.SGD, momentum=0.0, weight_decay=0.0), self._schedule())
        applied = opt.step(net, self._grads(net), 0)
        for name, _, w in net.named_parameters():
            assert_allclose(w, before[name] - 0.1 * 0.1)
            assert applied[name] == 0.1

    def test_bias_and_bn_use_sgd(self):
        net = self._net()
        spec = OptimizerSpec(OptimizerKind.LALC, momentum=0.0, weight_decay=0.0)
        applied = LayerwiseOptimizer(spec, self._schedule(lr=100.0)).step(net, self._grads(net), 0)
        assert applied['0.b'] == 100.0
        assert applied['1.gamma'] == 100.0
        assert applied['0.W'] < 100.0

        adapted = LayerwiseOptimizer(
            OptimizerSpec(OptimizerKind.LALC, momentum=0.0, weight_decay=0.0, adapt_bn_bias=True),
            self._schedule(lr=100.0),
        ).step(self._net(), self._grads(net), 0)
        assert adapted['1.gamma'] < 100.0

    def test_agc_logs_mean_ratio(self):
        net = self._net()
        w = net.layer('0').W.copy()
        grads = self._grads(net)
        opt = LayerwiseOptimizer(OptimizerSpec(OptimizerKind.AGC, momentum=0.0, weight_decay=0.0), self._schedule())
        applied = opt.step(net, grads, 0)
        ratios = agc_trust_ratios(w, grads['0.W'], 1e-1, 1e-3)
        assert_allclose(applied['0.W'], 0.1 * ratios.mean())

    def test_clars_requires_sample_norms(self):
        net = self._net()
        opt = LayerwiseOptimizer(OptimizerSpec(OptimizerKind.CLARS), self._schedule())
        assert opt.needs_per_sample_norms
        with pytest.raises(PreconditionError):
            opt.step(net, self._grads(net), 0)
        norms = {name: np.array([1.0, 2.0]) for name, _, _ in net.named_parameters()}
        applied = opt.step(net, self._grads(net), 0, per_sample_norms=norms)
        assert applied['0.W'] > 0

    def test_missing_gradient(self):
        net = self._net()
        grads = self._grads(net)
        del grads['2.W']
        opt = LayerwiseOptimizer(OptimizerSpec(OptimizerKind.SGD), self._schedule())
        with pytest.raises(ShapeError):
            opt.step(net, grads, 0)
