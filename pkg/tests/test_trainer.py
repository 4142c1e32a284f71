"""Online SGD: gradient correctness, stream equivalence, determinism."""

import math

import numpy as np
import pytest

from prunelab.netcore import InputSample, TwoLayerNet, activation, activation_deriv, forward, make_student, make_teacher
from prunelab.trainer import TrainConfig, convergence_threshold, replay_train_steps, sgd_step, train


def small_pair(seed=0, N=40, M=2, K=4, v_star=2.0):
    rng = np.random.default_rng(seed)
    return make_teacher(N, M, v_star, rng), make_student(N, K, rng)


class TestSgdStep:
    def test_zero_error_leaves_parameters(self):
        rng = np.random.default_rng(0)
        net = make_student(20, 3, rng)
        x = rng.standard_normal(20)
        stepped = sgd_step(net, InputSample(x=x, y=forward(net, x)), eta=0.5)
        assert np.array_equal(stepped.w, net.w)
        assert np.array_equal(stepped.v, net.v)

    def test_single_unit_hand_gradient(self):
        N = 9
        rng = np.random.default_rng(1)
        w = rng.standard_normal((1, N))
        v = np.array([1.5])
        net = TwoLayerNet(w, v)
        x = rng.standard_normal(N)
        y = 0.2
        eta = 0.3
        lam = float(w[0] @ x) / math.sqrt(N)
        e = v[0] * activation(lam) - y
        w_expect = w[0] - eta / math.sqrt(N) * e * v[0] * activation_deriv(lam) * x
        v_expect = v[0] - eta / N * e * activation(lam)
        stepped = sgd_step(net, InputSample(x=x, y=y), eta)
        assert np.allclose(stepped.w[0], w_expect, atol=1e-10)
        assert abs(stepped.v[0] - v_expect) < 1e-10

    def test_simultaneous_update_uses_prestep_values(self):
        # the v update must use g(lambda) of the *pre-step* weights
        rng = np.random.default_rng(2)
        net = make_student(15, 2, rng)
        x = rng.standard_normal(15)
        sample = InputSample(x=x, y=1.0)
        stepped = sgd_step(net, sample, eta=0.9)
        lam = net.w @ x / math.sqrt(15)
        e = float(activation(lam) @ net.v) - 1.0
        assert np.allclose(stepped.v, net.v - 0.9 / 15 * e * activation(lam), atol=1e-12)

    def test_gradient_matches_finite_differences(self):
        # every parameter of a small net, central differences of the loss
        N, K = 10, 3
        rng = np.random.default_rng(3)
        net = make_student(N, K, rng)
        x = rng.standard_normal(N)
        y = -0.4
        eta = 0.7
        step = 1e-5

        def loss(w, v):
            return 0.5 * (forward(TwoLayerNet(w, v), x) - y) ** 2

        stepped = sgd_step(net, InputSample(x=x, y=y), eta)
        grad_w = (net.w - stepped.w) / eta
        grad_v = (net.v - stepped.v) * N / eta
        for idx in np.ndindex(net.w.shape):
            bump = np.zeros_like(net.w)
            bump[idx] = step
            fd = (loss(net.w + bump, net.v) - loss(net.w - bump, net.v)) / (2 * step)
            assert abs(fd - grad_w[idx]) <= 1e-6 * max(abs(fd), 1e-9)
        for i in range(K):
            bump = np.zeros_like(net.v)
            bump[i] = step
            fd = (loss(net.w, net.v + bump) - loss(net.w, net.v - bump)) / (2 * step)
            assert abs(fd - grad_v[i]) <= 1e-6 * max(abs(fd), 1e-9)


class TestTrain:
    def test_perfect_student_stays_put(self):
        teacher, _ = small_pair()
        cfg = TrainConfig(eta=0.5, steps=2_000, sigma=0.0, seed=5, ge_log_interval=500)
        trace = train(teacher, teacher.copy(), cfg)
        assert all(g <= 1e-20 for _, g in trace.ge_log)
        assert np.array_equal(np.abs(trace.final_student.w), np.abs(teacher.w))

    @pytest.mark.parametrize("sigma", [0.0, 0.25])
    def test_chunked_loop_matches_stepwise_replay(self, sigma):
        from prunelab.analytics import canonicalize_signs

        teacher, student0 = small_pair(seed=7)
        n = 50
        cfg = TrainConfig(eta=0.5, steps=n, sigma=sigma, seed=11, ge_log_interval=200)
        fast = train(teacher, student0, cfg).final_student
        slow = canonicalize_signs(replay_train_steps(teacher, student0, cfg, n), teacher)
        # same stream and update rule; only float associativity differs
        assert np.allclose(fast.w, slow.w, atol=1e-12)
        assert np.allclose(fast.v, slow.v, atol=1e-12)

    def test_determinism(self):
        teacher, student0 = small_pair(seed=9)
        cfg = TrainConfig(eta=0.5, steps=3_000, sigma=0.25, seed=13, ge_log_interval=1_000)
        t1 = train(teacher, student0, cfg)
        t2 = train(teacher, student0, cfg)
        assert np.array_equal(t1.final_student.w, t2.final_student.w)
        assert np.array_equal(t1.final_student.v, t2.final_student.v)
        assert t1.ge_log == t2.ge_log
        assert t1.converged == t2.converged

    def test_log_steps_strictly_increasing(self):
        teacher, student0 = small_pair(seed=10)
        cfg = TrainConfig(eta=0.5, steps=2_500, seed=1, ge_log_interval=1_000)
        trace = train(teacher, student0, cfg)
        steps = [s for s, _ in trace.ge_log]
        assert steps == sorted(set(steps))
        assert steps[-1] == 2_500

    def test_trace_json_keys(self):
        teacher, student0 = small_pair(seed=12)
        cfg = TrainConfig(eta=0.5, steps=500, seed=2, ge_log_interval=250)
        doc = train(teacher, student0, cfg).to_json()
        assert set(doc) == {"seed", "converged", "ge_log"}
        assert all(set(entry) == {"step", "ge"} for entry in doc["ge_log"])

    def test_dimension_mismatch(self):
        teacher, _ = small_pair()
        bad = make_student(teacher.input_dim + 1, 4, np.random.default_rng(0))
        with pytest.raises(ValueError):
            train(teacher, bad, TrainConfig(steps=10))

    def test_stop_at_threshold_halts_early(self):
        teacher, student0 = small_pair(seed=21)
        cfg = TrainConfig(eta=0.5, steps=10_000, seed=3, ge_log_interval=100, stop_at_threshold=True)
        trace = train(teacher, teacher.copy(), cfg)
        # already below threshold at step 0: no training chunks run
        assert trace.ge_log[-1][0] == 0

    def test_threshold_value(self):
        teacher, _ = small_pair(v_star=4.0)
        assert abs(convergence_threshold(teacher) - 1e-3 * 2 * 16.0) < 1e-12
