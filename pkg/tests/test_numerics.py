"""Tape autodiff, softmax, Glorot init, Adam, and the finite-difference checker."""

import math

import numpy as np
import pytest

from graphzsl.errors import ContractError, DimensionError
from graphzsl.numerics import (
    AdamState,
    Tape,
    adam_step,
    finite_difference_check,
    glorot_uniform_init,
    seeded_rng,
    softmax,
)


class TestSoftmax:
    def test_two_element_oracle(self):
        # softmax([1, 2]) = [1, e] / (1 + e)
        want = np.array([1.0, math.e]) / (1.0 + math.e)
        np.testing.assert_allclose(softmax(np.array([1.0, 2.0])), want, rtol=1e-12)
        np.testing.assert_allclose(want, [0.2689414213699951, 0.7310585786300049], rtol=1e-12)

    def test_sums_to_one(self):
        rng = seeded_rng(0, "softmax")
        for _ in range(20):
            x = rng.normal(size=rng.integers(1, 40))
            y = softmax(x)
            assert abs(y.sum() - 1.0) < 1e-12
            assert (y > 0.0).all()

    def test_shift_invariance_handles_large_scores(self):
        y = softmax(np.array([1000.0, 1001.0]))
        np.testing.assert_allclose(y, softmax(np.array([0.0, 1.0])), rtol=1e-12)
        assert np.isfinite(y).all()

    def test_empty_rejected(self):
        with pytest.raises(DimensionError):
            softmax(np.array([]))


class TestGlorotInit:
    def test_bound_and_shape(self):
        rng = seeded_rng(3, "glorot")
        w = glorot_uniform_init(50, 30, rng)
        bound = math.sqrt(6.0 / 80.0)
        assert w.shape == (50, 30) and w.dtype == np.float64
        assert np.abs(w).max() <= bound

    def test_mean_near_zero_for_square_matrix(self):
        # For 200x200 the sample mean of 40k uniforms on [-b, b] stays
        # within 3 standard errors of zero: b / sqrt(3 * 40000).
        w = glorot_uniform_init(200, 200, seeded_rng(7, "glorot"))
        bound = math.sqrt(6.0 / 400.0)
        assert abs(w.mean()) < 3.0 * bound / math.sqrt(3.0 * w.size)

    def test_zero_dim_rejected(self):
        with pytest.raises(DimensionError):
            glorot_uniform_init(0, 5, seeded_rng(0))


class TestSeededRng:
    def test_same_seed_same_stream(self):
        a = seeded_rng(11, "init", "conv_w").normal(size=8)
        b = seeded_rng(11, "init", "conv_w").normal(size=8)
        np.testing.assert_array_equal(a, b)

    def test_tags_separate_streams(self):
        a = seeded_rng(11, "init", "conv_w").normal(size=8)
        b = seeded_rng(11, "init", "conv_b").normal(size=8)
        assert not np.array_equal(a, b)


def _fd(build, params, tol=1e-4, eps=1e-5):
    err = finite_difference_check(build, {k: np.asarray(v, dtype=np.float64) for k, v in params.items()}, eps=eps)
    assert err < tol, f"finite-difference relative error {err:.3e}"


class TestBackwardBasics:
    def test_sum_of_param_gives_ones(self):
        tape = Tape()
        w = tape.param("w", np.arange(6.0).reshape(2, 3))
        loss = tape.sum(w)
        grads = tape.backward(loss)
        np.testing.assert_array_equal(grads["w"], np.ones((2, 3)))

    def test_sigmoid_slope_at_zero(self):
        tape = Tape()
        x = tape.param("x", np.array([0.0]))
        loss = tape.sum(tape.sigmoid(x))
        np.testing.assert_allclose(tape.backward(loss)["x"], [0.25], rtol=1e-12)

    def test_unreachable_param_gets_zero_grad(self):
        tape = Tape()
        tape.param("unused", np.ones((2, 2)))
        x = tape.param("x", np.array([1.0, 2.0]))
        grads = tape.backward(tape.sum(x))
        np.testing.assert_array_equal(grads["unused"], np.zeros((2, 2)))

    def test_nonscalar_loss_rejected(self):
        tape = Tape()
        x = tape.param("x", np.array([1.0, 2.0]))
        with pytest.raises(ContractError):
            tape.backward(x)

    def test_duplicate_param_name_rejected(self):
        tape = Tape()
        tape.param("w", np.ones(2))
        with pytest.raises(ContractError):
            tape.param("w", np.ones(2))

    def test_fanout_accumulates(self):
        # loss = sum(x * x) so dloss/dx = 2x.
        tape = Tape()
        x = tape.param("x", np.array([1.5, -2.0, 3.0]))
        loss = tape.sum(tape.mul(x, x))
        np.testing.assert_allclose(tape.backward(loss)["x"], [3.0, -4.0, 6.0], rtol=1e-12)


class TestFiniteDifferenceChecker:
    def test_square_at_three(self):
        # d/dx x^2 at 3 is 6; central differences are exact for quadratics
        # up to roundoff.
        def build(params):
            tape = Tape()
            x = tape.param("x", params["x"])
            return tape, tape.sum(tape.mul(x, x))

        params = {"x": np.array([3.0])}
        err = finite_difference_check(build, params, eps=1e-5)
        assert err < 1e-6
        tape, loss = build(params)
        np.testing.assert_allclose(tape.backward(loss)["x"], [6.0], rtol=1e-12)

    def test_bce_at_half(self):
        # At pred 0.5 with target 1 the single-element mean BCE slope is -2;
        # sigma(0) = 0.5 chains to d/dz = -0.5.
        def build(params):
            tape = Tape()
            z = tape.param("z", params["z"])
            return tape, tape.bce(tape.sigmoid(z), np.array([1.0]))

        params = {"z": np.array([0.0])}
        tape, loss = build(params)
        np.testing.assert_allclose(tape.backward(loss)["z"], [-0.5], rtol=1e-10)
        _fd(build, params)


class TestPrimitiveGradients:
    """Central-difference sweep over each op, away from kinks."""

    def test_matmul_2d_2d(self):
        rng = seeded_rng(1, "fd")
        def build(p):
            tape = Tape()
            a = tape.param("a", p["a"])
            b = tape.param("b", p["b"])
            return tape, tape.sum(tape.matmul(a, b))
        _fd(build, {"a": rng.normal(size=(3, 4)), "b": rng.normal(size=(4, 2))})

    def test_matmul_2d_1d(self):
        rng = seeded_rng(2, "fd")
        def build(p):
            tape = Tape()
            a = tape.param("a", p["a"])
            b = tape.param("b", p["b"])
            return tape, tape.sum(tape.matmul(a, b))
        _fd(build, {"a": rng.normal(size=(3, 4)), "b": rng.normal(size=4)})

    def test_matmul_1d_2d(self):
        rng = seeded_rng(3, "fd")
        def build(p):
            tape = Tape()
            a = tape.param("a", p["a"])
            b = tape.param("b", p["b"])
            return tape, tape.sum(tape.matmul(a, b))
        _fd(build, {"a": rng.normal(size=3), "b": rng.normal(size=(3, 2))})

    def test_matmul_1d_1d(self):
        rng = seeded_rng(4, "fd")
        def build(p):
            tape = Tape()
            a = tape.param("a", p["a"])
            b = tape.param("b", p["b"])
            return tape, tape.matmul(a, b)
        _fd(build, {"a": rng.normal(size=5), "b": rng.normal(size=5)})

    def test_matmul_ta_and_tb(self):
        rng = seeded_rng(5, "fd")
        def build_ta(p):
            tape = Tape()
            a = tape.param("a", p["a"])
            b = tape.param("b", p["b"])
            return tape, tape.sum(tape.matmul_ta(a, b))
        def build_tb(p):
            tape = Tape()
            a = tape.param("a", p["a"])
            b = tape.param("b", p["b"])
            return tape, tape.sum(tape.matmul_tb(a, b))
        _fd(build_ta, {"a": rng.normal(size=(4, 3)), "b": rng.normal(size=(4, 2))})
        _fd(build_tb, {"a": rng.normal(size=(3, 4)), "b": rng.normal(size=(2, 4))})

    def test_add_add_row_mul(self):
        rng = seeded_rng(6, "fd")
        def build(p):
            tape = Tape()
            a = tape.param("a", p["a"])
            b = tape.param("b", p["b"])
            r = tape.param("r", p["r"])
            return tape, tape.sum(tape.mul(tape.add(a, b), tape.add_row(a, r)))
        _fd(build, {"a": rng.normal(size=(3, 4)), "b": rng.normal(size=(3, 4)), "r": rng.normal(size=4)})

    def test_tanh_sigmoid(self):
        rng = seeded_rng(7, "fd")
        def build(p):
            tape = Tape()
            x = tape.param("x", p["x"])
            return tape, tape.sum(tape.mul(tape.tanh(x), tape.sigmoid(x)))
        _fd(build, {"x": rng.normal(size=(2, 5))})

    def test_relu_away_from_kink(self):
        rng = seeded_rng(8, "fd")
        x = rng.normal(size=12)
        x[np.abs(x) < 0.2] = 0.5  # keep every coordinate off the kink
        def build(p):
            tape = Tape()
            return tape, tape.sum(tape.relu(tape.param("x", p["x"])))
        _fd(build, {"x": x})

    def test_softmax_vector(self):
        rng = seeded_rng(9, "fd")
        def build(p):
            tape = Tape()
            x = tape.param("x", p["x"])
            w = tape.param("w", p["w"])
            return tape, tape.matmul(tape.softmax(x), w)
        _fd(build, {"x": rng.normal(size=6), "w": rng.normal(size=6)})

    def test_softmax_cols(self):
        rng = seeded_rng(10, "fd")
        def build(p):
            tape = Tape()
            x = tape.param("x", p["x"])
            w = tape.param("w", p["w"])
            return tape, tape.sum(tape.mul(tape.softmax_cols(x), w))
        _fd(build, {"x": rng.normal(size=(4, 3)), "w": rng.normal(size=(4, 3))})

    def test_concat_and_stack(self):
        rng = seeded_rng(11, "fd")
        def build(p):
            tape = Tape()
            a = tape.param("a", p["a"])
            b = tape.param("b", p["b"])
            cat = tape.concat([a, b])
            stacked = tape.stack_rows([a, a])
            return tape, tape.add(tape.sum(tape.mul(cat, cat)), tape.sum(stacked))
        _fd(build, {"a": rng.normal(size=4), "b": rng.normal(size=3)})

    def test_concat_cols_and_row_select(self):
        rng = seeded_rng(12, "fd")
        def build(p):
            tape = Tape()
            a = tape.param("a", p["a"])
            b = tape.param("b", p["b"])
            cat = tape.concat_cols([a, b])
            row = tape.row_select(cat, 1)
            return tape, tape.matmul(row, row)
        _fd(build, {"a": rng.normal(size=(3, 2)), "b": rng.normal(size=(3, 4))})

    def test_mean_and_rowdot(self):
        rng = seeded_rng(13, "fd")
        def build(p):
            tape = Tape()
            a = tape.param("a", p["a"])
            b = tape.param("b", p["b"])
            return tape, tape.mean(tape.rowdot(a, b))
        _fd(build, {"a": rng.normal(size=(4, 3)), "b": rng.normal(size=(4, 3))})

    def test_dropout_mask_is_replayed_not_resampled(self):
        # With a fixed mask the op is elementwise scaling, so gradients
        # must use the recorded mask.
        def build(p):
            tape = Tape()
            x = tape.param("x", p["x"])
            dropped = tape.dropout(x, 0.6, seeded_rng(21, "mask"))
            return tape, tape.sum(dropped)
        rng = seeded_rng(14, "fd")
        _fd(build, {"x": rng.normal(size=(5, 4))})

    def test_bce_random_points(self):
        rng = seeded_rng(15, "fd")
        target = (rng.random(8) < 0.5).astype(np.float64)
        def build(p):
            tape = Tape()
            z = tape.param("z", p["z"])
            return tape, tape.bce(tape.sigmoid(z), target)
        _fd(build, {"z": rng.normal(size=8)})

    def test_composite_three_layer(self):
        rng = seeded_rng(16, "fd")
        x = rng.normal(size=(5, 4))
        def build(p):
            tape = Tape()
            xc = tape.constant(x)
            w1 = tape.param("w1", p["w1"])
            w2 = tape.param("w2", p["w2"])
            b = tape.param("b", p["b"])
            h = tape.tanh(tape.add_row(tape.matmul(xc, w1), b))
            return tape, tape.sum(tape.matmul(h, w2))
        _fd(build, {"w1": rng.normal(size=(4, 3)), "w2": rng.normal(size=(3, 2)), "b": rng.normal(size=3)})


class TestBceOracle:
    def test_frozen_value(self):
        # Mean over [-ln 0.9, -ln 0.8] = 0.164252033486018
        tape = Tape()
        p = tape.param("p", np.array([0.9, 0.2]))
        loss = tape.bce(p, np.array([1.0, 0.0]))
        np.testing.assert_allclose(float(loss.value), 0.16425203348601826, rtol=1e-12)

    def test_clamp_keeps_loss_finite(self):
        tape = Tape()
        p = tape.param("p", np.array([0.0, 1.0]))
        loss = tape.bce(p, np.array([1.0, 0.0]))
        assert np.isfinite(loss.value)
        assert np.isfinite(tape.backward(loss)["p"]).all()


class TestReplay:
    def test_replay_reproduces_values_bitwise(self):
        rng = seeded_rng(17, "replay")
        tape = Tape()
        x = tape.param("x", rng.normal(size=(6, 5)))
        w = tape.param("w", rng.normal(size=(5, 3)))
        h = tape.dropout(tape.tanh(tape.matmul(x, w)), 0.8, seeded_rng(18, "mask"))
        att = tape.softmax_cols(h)
        loss = tape.bce(tape.sigmoid(tape.concat([tape.row_select(att, 0), tape.row_select(att, 2)])),
                        np.array([1.0, 0.0, 1.0, 0.0, 0.0, 1.0]))
        before = [n.value.copy() for n in tape.nodes]
        tape.replay()
        for old, node in zip(before, tape.nodes):
            np.testing.assert_array_equal(old, node.value)

    def test_replay_propagates_edited_leaf(self):
        tape = Tape()
        x = tape.param("x", np.array([1.0, 2.0]))
        y = tape.sum(tape.mul(x, x))
        x.value = np.array([3.0, 4.0])
        tape.replay()
        assert float(y.value) == 25.0


class TestAdam:
    def test_first_step_oracle(self):
        # theta 1, grad 2, lr 1e-3: bias-corrected step is lr * g/(|g|+eps).
        params = {"w": np.array([1.0])}
        state = AdamState(params)
        adam_step(state, params, {"w": np.array([2.0])})
        np.testing.assert_allclose(params["w"], [1.0 - 0.001 * (2.0 / (2.0 + 1e-8))], rtol=1e-15)
        np.testing.assert_allclose(params["w"], [0.999], atol=1e-8)

    def test_zero_grad_is_fixed_point(self):
        params = {"w": np.array([[1.0, -2.0]])}
        state = AdamState(params)
        for _ in range(3):
            adam_step(state, params, {"w": np.zeros((1, 2))})
        np.testing.assert_array_equal(params["w"], [[1.0, -2.0]])

    def test_descends_quadratic(self):
        params = {"w": np.array([5.0])}
        state = AdamState(params, learning_rate=0.1)
        for _ in range(200):
            adam_step(state, params, {"w": 2.0 * params["w"]})
        assert abs(params["w"][0]) < 0.5

    def test_deterministic_across_runs(self):
        def run():
            params = {"w": np.array([1.0, 2.0, 3.0])}
            state = AdamState(params)
            rng = seeded_rng(19, "adam")
            for _ in range(10):
                adam_step(state, params, {"w": rng.normal(size=3)})
            return params["w"]
        np.testing.assert_array_equal(run(), run())

    def test_shape_mismatch_rejected(self):
        params = {"w": np.ones(3)}
        state = AdamState(params)
        with pytest.raises(DimensionError):
            adam_step(state, params, {"w": np.ones(4)})
