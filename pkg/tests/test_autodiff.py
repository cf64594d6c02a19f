import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

import graphlens.autodiff as ad
from graphlens.autodiff import (
    OptimizerState,
    Tape,
    Tensor,
    adam_step,
    backward,
    cross_entropy,
    finite_difference_check,
    kl_divergence,
    softmax_with_temperature,
)

finite_rows = hnp.arrays(
    np.float64, hnp.array_shapes(min_dims=2, max_dims=2, min_side=1, max_side=6),
    elements=st.floats(min_value=-30, max_value=30),
)


class TestSoftmaxTemperature:
    def test_symmetric_logits(self):
        for tau in (0.5, 1.0, 7.0):
            out = softmax_with_temperature(Tensor([[0.0, 0.0]]), tau)
            np.testing.assert_allclose(out.data, [[0.5, 0.5]])

    def test_hand_computed_value(self):
        # exp(0.5)/(exp(0.5)+exp(1.0)) = 0.3775406...
        out = softmax_with_temperature(Tensor([[1.0, 2.0]]), 2.0)
        np.testing.assert_allclose(out.data, [[0.37754, 0.62246]], atol=1e-4)

    def test_large_tau_flattens(self):
        out = softmax_with_temperature(Tensor([[1.0, 2.0]]), 1000.0)
        np.testing.assert_allclose(out.data, [[0.5, 0.5]], atol=1e-3)

    def test_tau_must_be_positive(self):
        with pytest.raises(ValueError):
            softmax_with_temperature(Tensor([[1.0, 2.0]]), 0.0)

    @given(finite_rows, st.floats(min_value=0.05, max_value=50.0))
    @settings(max_examples=50, deadline=None)
    def test_rows_sum_to_one(self, rows, tau):
        out = softmax_with_temperature(Tensor(rows), tau)
        np.testing.assert_allclose(out.data.sum(axis=1), 1.0, atol=1e-9)

    @given(finite_rows, st.floats(min_value=0.05, max_value=50.0),
           st.floats(min_value=-10, max_value=10))
    @settings(max_examples=50, deadline=None)
    def test_shift_invariance(self, rows, tau, shift):
        a = softmax_with_temperature(Tensor(rows), tau).data
        b = softmax_with_temperature(Tensor(rows + shift), tau).data
        np.testing.assert_allclose(a, b, atol=1e-9)

    @given(finite_rows, st.floats(min_value=0.05, max_value=50.0))
    @settings(max_examples=50, deadline=None)
    def test_argmax_preserved(self, rows, tau):
        # ties below float resolution are excluded: the invariant is about order,
        # and exp() cannot separate gaps of ~1e-16 at large tau
        sorted_rows = np.sort(rows, axis=1)
        if rows.shape[1] > 1 and (sorted_rows[:, -1] - sorted_rows[:, -2] < 1e-3).any():
            return
        out = softmax_with_temperature(Tensor(rows), tau)
        np.testing.assert_array_equal(out.data.argmax(axis=1), rows.argmax(axis=1))


class TestCrossEntropy:
    def test_confident_logits_approach_zero(self):
        logits = Tensor([[40.0, 0.0], [0.0, 40.0]])
        loss = cross_entropy(logits, np.array([0, 1]))
        assert loss.item() < 1e-12

    def test_uniform_logits_give_log_k(self):
        for k in (2, 5, 9):
            logits = Tensor(np.zeros((4, k)))
            loss = cross_entropy(logits, np.zeros(4, dtype=int))
            np.testing.assert_allclose(loss.item(), np.log(k), atol=1e-12)

    def test_doubling_class_weight_doubles_its_term(self):
        logits = Tensor(np.array([[1.0, -1.0], [0.4, 0.2], [-0.3, 0.8]]))
        labels = np.array([0, 1, 1])
        base_w = np.array([1.0, 1.0])
        double_w = np.array([1.0, 2.0])
        base = cross_entropy(logits, labels, base_w).item()
        doubled = cross_entropy(logits, labels, double_w).item()
        class0 = cross_entropy(logits, labels, np.array([1.0, 0.0])).item()
        class1 = base - class0
        np.testing.assert_allclose(doubled, class0 + 2 * class1, atol=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            cross_entropy(Tensor(np.zeros((3, 2))), np.array([0, 1]))


class TestKL:
    def test_identical_is_zero(self):
        p = np.array([[0.2, 0.3, 0.5]])
        assert kl_divergence(Tensor(p), Tensor(p.copy())).item() == 0.0

    def test_hand_computed_ln2(self):
        loss = kl_divergence(Tensor([[1.0, 0.0]]), Tensor([[0.5, 0.5]]))
        np.testing.assert_allclose(loss.item(), np.log(2.0), atol=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            kl_divergence(Tensor([[1.0, 0.0]]), Tensor([[0.5, 0.25, 0.25]]))

    @given(finite_rows.filter(lambda r: r.shape[1] >= 2), st.integers(0, 2**31 - 1))
    @settings(max_examples=50, deadline=None)
    def test_nonnegative(self, logits, seed):
        rng = np.random.default_rng(seed)
        p = ad._softmax_rows(logits)
        q = ad._softmax_rows(rng.normal(size=logits.shape))
        assert kl_divergence(Tensor(p), Tensor(q)).item() >= -1e-12


class TestBackward:
    def test_sum_of_linear_map(self):
        w = ad.parameter(np.array([[1.0, 2.0], [3.0, 4.0]]))
        x = np.array([[5.0], [7.0]])
        with Tape() as tape:
            loss = ad.reduce_sum(ad.matmul(w, Tensor(x)))
            backward(tape, loss)
        expected = np.ones((2, 1)) @ x.T  # d/dW sum(Wx) = 1 x^T
        np.testing.assert_allclose(w.grad, expected)

    def test_unused_parameter_gets_no_gradient(self):
        used = ad.parameter(np.array([2.0]))
        unused = ad.parameter(np.array([3.0]))
        with Tape() as tape:
            loss = ad.reduce_sum(ad.mul(used, used))
            backward(tape, loss)
        assert unused.grad is None

    def test_non_scalar_loss_rejected(self):
        w = ad.parameter(np.ones((2, 2)))
        with Tape() as tape:
            out = ad.mul(w, w)
            with pytest.raises(ValueError):
                backward(tape, out)

    def test_detached_loss_rejected(self):
        with Tape() as tape:
            loss = Tensor(1.0)
            with pytest.raises(ValueError):
                backward(tape, loss)

    def test_three_layer_network_matches_finite_differences(self):
        rng = np.random.default_rng(0)
        sizes = [(5, 8), (8, 6), (6, 3)]
        params = [ad.parameter(rng.normal(size=s) * 0.4) for s in sizes]
        x = rng.normal(size=(7, 5))
        y = rng.integers(0, 3, size=7)

        def fn(ps):
            h = Tensor(x)
            for i, w in enumerate(ps):
                h = ad.matmul(h, w)
                if i < len(ps) - 1:
                    h = ad.elu(h)
            return cross_entropy(h, y)

        result = finite_difference_check(fn, params, eps=1e-5)
        assert result.max_rel_error < 1e-4
        assert result.checked > 0


PRIMITIVE_CASES = [
    ("matmul", lambda p: ad.reduce_sum(ad.matmul(p[0], p[1])), [(3, 4), (4, 2)]),
    ("add_broadcast", lambda p: ad.reduce_sum(ad.add(p[0], p[1])), [(3, 4), (4,)]),
    ("sub", lambda p: ad.reduce_sum(ad.sub(p[0], p[1])), [(3, 4), (3, 4)]),
    ("mul", lambda p: ad.reduce_sum(ad.mul(p[0], p[1])), [(3, 4), (3, 4)]),
    ("elu", lambda p: ad.reduce_sum(ad.elu(p[0])), [(4, 4)]),
    ("exp", lambda p: ad.reduce_sum(ad.exp(p[0])), [(3, 3)]),
    ("log", lambda p: ad.reduce_sum(ad.log(ad.add(ad.mul(p[0], p[0]), 1.0))), [(3, 3)]),
    ("softmax", lambda p: ad.reduce_sum(ad.mul(ad.softmax_rows(p[0]), p[0])), [(3, 5)]),
    ("log_softmax", lambda p: ad.reduce_sum(ad.mul(ad.log_softmax_rows(p[0]), p[0])), [(3, 5)]),
    ("softmax_tau", lambda p: ad.reduce_sum(ad.mul(softmax_with_temperature(p[0], 3.0), p[0])), [(3, 5)]),
    ("concat", lambda p: ad.reduce_sum(ad.mul(ad.concat([p[0], p[1]], axis=1),
                                              ad.concat([p[1], p[0]], axis=1))), [(3, 2), (3, 2)]),
    ("mean_axis", lambda p: ad.reduce_sum(ad.mul(ad.reduce_mean(p[0], axis=1), p[1])), [(3, 4), (3,)]),
    ("gather", lambda p: ad.reduce_sum(ad.mul(ad.gather_rows(p[0], np.array([0, 2, 2])), 2.0)), [(3, 4)]),
    ("take_per_row", lambda p: ad.reduce_sum(ad.take_per_row(p[0], np.array([1, 0, 2]))), [(3, 3)]),
    ("reshape", lambda p: ad.reduce_sum(ad.mul(ad.reshape(p[0], (2, 6)), 1.5)), [(3, 4)]),
    ("clamp_min", lambda p: ad.reduce_sum(ad.clamp_min(p[0], 0.3)), [(4, 4)]),
]


@pytest.mark.parametrize("name,fn,shapes", PRIMITIVE_CASES, ids=[c[0] for c in PRIMITIVE_CASES])
def test_primitive_backward_matches_finite_differences(name, fn, shapes):
    rng = np.random.default_rng(hash(name) % 2**32)
    params = [ad.parameter(rng.normal(size=s)) for s in shapes]
    result = finite_difference_check(fn, params, eps=1e-6)
    assert result.max_rel_error < 1e-4


def test_segment_ops_backward():
    rng = np.random.default_rng(4)
    seg = np.array([0, 0, 1, 1, 1, 2])
    src = np.array([1, 2, 0, 2, 3, 3])
    values = ad.parameter(rng.normal(size=6))
    h = ad.parameter(rng.normal(size=(4, 3)))

    def fn(ps):
        att = ad.segment_softmax(ps[0], seg, 3)
        mixed = ad.edge_aggregate(att, ps[1], src, seg, 3)
        return ad.reduce_sum(ad.mul(mixed, mixed))

    result = finite_difference_check(fn, [values, h], eps=1e-6)
    assert result.max_rel_error < 1e-4


def test_dropout_scales_and_masks():
    rng = np.random.default_rng(0)
    x = Tensor(np.ones((200, 10)))
    out = ad.dropout(x, 0.4, rng)
    kept = out.data != 0
    assert abs(kept.mean() - 0.6) < 0.05
    np.testing.assert_allclose(out.data[kept], 1.0 / 0.6)


class TestFiniteDifferenceCheck:
    def test_quadratic_is_tight(self):
        w = ad.parameter(np.array([1.5, -2.0, 0.25]))

        def fn(ps):
            return ad.reduce_sum(ad.mul(ps[0], ps[0]))

        result = finite_difference_check(fn, [w], eps=1e-4)
        assert result.max_rel_error < 1e-6

    def test_linear_is_exact_to_float(self):
        w = ad.parameter(np.array([1.0, 2.0]))

        def fn(ps):
            return ad.reduce_sum(ad.mul(ps[0], np.array([3.0, -1.0])))

        result = finite_difference_check(fn, [w], eps=1e-4)
        assert result.max_rel_error < 1e-10

    def test_kink_adjacent_coordinates_skipped(self):
        # relu input sits exactly on the kink for the first coordinate
        w = ad.parameter(np.array([0.0, 1.0]))

        def fn(ps):
            return ad.reduce_sum(ad.relu(ps[0]))

        result = finite_difference_check(fn, [w], eps=1e-3)
        assert (0, 0) in result.skipped
        assert result.checked == 1
        assert result.max_rel_error < 1e-8


class TestAdam:
    def test_zero_gradient_no_decay_is_identity(self):
        p = ad.parameter(np.array([1.0, -2.0]))
        state = OptimizerState(learning_rate=0.1, weight_decay=0.0)
        adam_step([p], [np.zeros(2)], state)
        np.testing.assert_array_equal(p.data, [1.0, -2.0])

    def test_first_step_magnitude_near_learning_rate(self):
        p = ad.parameter(np.array([5.0]))
        state = OptimizerState(learning_rate=0.01, weight_decay=0.0)
        adam_step([p], [np.array([3.7])], state)
        np.testing.assert_allclose(abs(5.0 - p.data[0]), 0.01, rtol=1e-6)

    def test_weight_decay_shrinks_norm(self):
        p = ad.parameter(np.array([2.0, -2.0]))
        state = OptimizerState(learning_rate=0.1, weight_decay=0.5)
        adam_step([p], [np.zeros(2)], state)
        assert np.linalg.norm(p.data) < np.linalg.norm([2.0, -2.0])

    def test_shape_mismatch(self):
        p = ad.parameter(np.zeros(3))
        with pytest.raises(ValueError):
            adam_step([p], [np.zeros(2)], OptimizerState())


class TestSegmentOpsAgainstDenseOracle:
    @given(st.integers(0, 2**31 - 1), st.integers(min_value=2, max_value=8),
           st.integers(min_value=1, max_value=5))
    @settings(max_examples=30, deadline=None)
    def test_edge_aggregate_matches_dense_matmul(self, seed, n, d):
        rng = np.random.default_rng(seed)
        # random edge pattern with at least one in-edge per node
        src = np.concatenate([rng.integers(0, n, size=2 * n), np.arange(n)])
        dst = np.concatenate([rng.integers(0, n, size=2 * n), np.arange(n)])
        values = rng.normal(size=src.size)
        h = rng.normal(size=(n, d))
        dense = np.zeros((n, n))
        np.add.at(dense, (dst, src), values)
        expected = dense @ h
        out = ad.edge_aggregate(Tensor(values), Tensor(h), src, dst, n)
        np.testing.assert_allclose(out.data, expected, atol=1e-12)

    @given(st.integers(0, 2**31 - 1), st.integers(min_value=2, max_value=8))
    @settings(max_examples=30, deadline=None)
    def test_segment_softmax_rows_sum_to_one(self, seed, n):
        rng = np.random.default_rng(seed)
        seg = np.sort(rng.integers(0, n, size=4 * n))
        present = np.unique(seg)
        values = rng.normal(size=seg.size) * 10
        out = ad.segment_softmax(Tensor(values), seg, n)
        sums = np.bincount(seg, weights=out.data, minlength=n)
        np.testing.assert_allclose(sums[present], 1.0, atol=1e-9)
        assert out.data.min() >= 0
