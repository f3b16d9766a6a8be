import math

import numpy as np
import pytest

from conftest import rel_err
from dropcae.concrete import (AnnealSchedule, SelectorParams,
                              binary_concrete_grad, gumbel_noise,
                              logistic_noise, sample_binary_concrete,
                              sample_concrete_softmax, temperature_at)
from dropcae.errors import ParameterError


class TestBinaryConcreteSample:
    def test_symmetric_at_zero(self):
        for tau in (1.0, 0.3, 0.01):
            assert sample_binary_concrete(0.0, tau, 0.0) == 0.5

    def test_exponent_cancels(self):
        assert sample_binary_concrete(2.0, 1.0, -2.0) == 0.5

    def test_keep_probability_limit(self):
        # P(X > 0.5) = alpha/(1+alpha) regardless of tau; checked empirically
        rng = np.random.default_rng(99)
        noise = logistic_noise(rng, 100_000)
        x = sample_binary_concrete(math.log(3.0), 0.01, noise)
        assert abs(np.mean(x > 0.5) - 0.75) < 0.01

    def test_open_interval(self):
        rng = np.random.default_rng(3)
        x = sample_binary_concrete(0.4, 0.7, logistic_noise(rng, 1000))
        assert np.all(x > 0) and np.all(x < 1)

    def test_invalid_tau(self):
        for tau in (0.0, -1.0):
            with pytest.raises(ParameterError):
                sample_binary_concrete(0.0, tau, 0.0)

    def test_increasing_in_log_alpha(self):
        grid = np.linspace(-4, 4, 33)
        vals = [sample_binary_concrete(la, 0.5, 0.3) for la in grid]
        assert all(a < b for a, b in zip(vals, vals[1:]))

    def test_low_temperature_limit_monotone(self):
        taus = (1.0, 0.1, 0.01, 0.001)
        up = [sample_binary_concrete(0.8, t, 0.1) for t in taus]  # la+noise > 0
        assert all(a <= b for a, b in zip(up, up[1:]))
        assert up[-1] > 1 - 1e-9
        down = [sample_binary_concrete(-0.8, t, 0.1) for t in taus]  # < 0
        assert all(a >= b for a, b in zip(down, down[1:]))
        assert down[-1] < 1e-9


class TestBinaryConcreteGrad:
    def test_quarter_at_unit_tau(self):
        assert binary_concrete_grad(0.0, 1.0, 0.0) == 0.25

    def test_closed_form_over_tau(self):
        assert binary_concrete_grad(0.0, 0.5, 0.0) == 0.5

    def test_matches_finite_difference(self):
        rng = np.random.default_rng(17)
        for _ in range(50):
            la = rng.normal()
            tau = rng.uniform(0.3, 2.0)
            noise = rng.normal() * 2
            g = binary_concrete_grad(la, tau, noise)
            h = 1e-6
            fd = (sample_binary_concrete(la + h, tau, noise)
                  - sample_binary_concrete(la - h, tau, noise)) / (2 * h)
            assert rel_err(g, fd) < 1e-5

    def test_invalid_tau(self):
        with pytest.raises(ParameterError):
            binary_concrete_grad(0.0, -0.5, 0.0)


class TestConcreteSoftmax:
    def test_uniform_for_equal_logits(self):
        out = sample_concrete_softmax(np.zeros(5), 1.0, np.zeros(5))
        assert np.allclose(out, 0.2, atol=1e-15)

    def test_sums_to_one(self, rng):
        for _ in range(20):
            la = rng.normal(size=7)
            out = sample_concrete_softmax(la, rng.uniform(0.05, 2.0),
                                          gumbel_noise(rng, 7))
            assert np.all(out >= 0)
            assert abs(out.sum() - 1.0) < 1e-12

    def test_low_temperature_approaches_argmax(self):
        la = np.array([0.1, 1.4, -0.3, 0.9])
        out = sample_concrete_softmax(la, 0.01, np.zeros(4))
        assert out[1] > 0.999
        assert np.argmax(out) == np.argmax(la)

    def test_invalid_tau(self):
        with pytest.raises(ParameterError):
            sample_concrete_softmax(np.zeros(3), 0.0, np.zeros(3))


class TestSelectorParams:
    def test_probabilities(self):
        sel = SelectorParams(np.array([0.0, 2.0, -2.0]))
        keep = sel.keep_probability()
        assert keep[0] == 0.5
        assert np.all((keep > 0) & (keep < 1))
        assert np.allclose(sel.dropout_rate(), 1 - keep)

    def test_zeros_start_at_half(self):
        assert np.all(SelectorParams.zeros(4).keep_probability() == 0.5)


class TestAnnealSchedule:
    def test_endpoints_exact(self):
        sched = AnnealSchedule.for_run(1.0, 0.001, n_samples=4000, epochs=40,
                                       batch_size=1)
        assert temperature_at(sched, 0) == 1.0
        assert temperature_at(sched, sched.total_steps) == 0.001

    def test_midpoint_closed_form(self):
        sched = AnnealSchedule(1.0, 0.001, total_steps=1000)
        mid = temperature_at(sched, 500)
        assert mid == pytest.approx(math.sqrt(0.001), rel=1e-12)

    def test_strictly_decreasing(self):
        sched = AnnealSchedule(1.0, 0.001, total_steps=2000)
        vals = [temperature_at(sched, s) for s in range(2001)]
        assert all(a > b for a, b in zip(vals, vals[1:]))

    def test_total_steps_rounds_up(self):
        sched = AnnealSchedule.for_run(1.0, 0.01, n_samples=10, epochs=3,
                                       batch_size=4)
        assert sched.total_steps == 8  # ceil(30/4)

    def test_step_out_of_range(self):
        sched = AnnealSchedule(1.0, 0.1, total_steps=10)
        for step in (-1, 11):
            with pytest.raises(ParameterError):
                temperature_at(sched, step)

    def test_invalid_parameters(self):
        with pytest.raises(ParameterError):
            AnnealSchedule(0.001, 1.0, total_steps=10)  # tau0 < tauC
        with pytest.raises(ParameterError):
            AnnealSchedule(1.0, 0.0, total_steps=10)
        with pytest.raises(ParameterError):
            AnnealSchedule(1.0, 0.1, total_steps=0)

    def test_advance_clamps_at_total(self):
        sched = AnnealSchedule(1.0, 0.1, total_steps=3)
        for _ in range(10):
            sched.advance()
        assert sched.current_step == 3
        assert sched.temperature() == 0.1

    def test_constant_schedule_allowed(self):
        sched = AnnealSchedule(0.5, 0.5, total_steps=5)
        assert temperature_at(sched, 2) == 0.5
