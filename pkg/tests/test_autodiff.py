import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

import infomotif.autodiff as ad
from infomotif.autodiff import (Adam, AdamState, CheckpointError, ContractError, ExprGraph,
                                ShapeError, Tensor, adam_step, grad_check, gradients, parameter)

RNG = np.random.default_rng(1234)


def numeric_grad(f, x, eps=1e-6):
    """Central differences of the scalar ``f()`` with respect to array ``x`` (in place)."""
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + eps
        up = f()
        x[i] = old - eps
        down = f()
        x[i] = old
        g[i] = (up - down) / (2 * eps)
    return g


def check_op(build, *shapes, positive=False, tol=1e-6):
    """Finite-difference check of ``sum(w * build(*params))`` for a random projection ``w``."""
    arrays = [RNG.normal(size=s) for s in shapes]
    if positive:
        arrays = [np.abs(a) + 0.5 for a in arrays]
    params = {f"x{i}": parameter(a) for i, a in enumerate(arrays)}
    out = build(*params.values())
    w = RNG.normal(size=out.shape)
    loss_of = lambda: float(np.sum(w * build(*params.values()).data))  # noqa: E731
    analytic = gradients(ad.sum(ad.mul(build(*params.values()), w)), params)
    for name, p in params.items():
        num = numeric_grad(loss_of, p.data)
        err = np.abs(analytic[name] - num) / np.maximum(np.maximum(np.abs(num), np.abs(analytic[name])), 1e-6)
        assert err.max() < tol, (name, err.max())


class TestPrimitiveAdjoints:
    def test_add_broadcast(self):
        check_op(lambda a, b: a + b, (4, 3), (3,))

    def test_sub_broadcast(self):
        check_op(lambda a, b: a - b, (4, 3), (4, 1))

    def test_mul_broadcast(self):
        check_op(lambda a, b: a * b, (4, 3), (1, 3))

    def test_matmul(self):
        check_op(ad.matmul, (4, 3), (3, 5))

    def test_matvec(self):
        check_op(ad.matmul, (4, 3), (3,))

    def test_spmm(self):
        s = sp.random(5, 4, density=0.5, random_state=1, format="csr")
        check_op(lambda x: ad.spmm(s, x), (4, 3))

    def test_sigmoid(self):
        check_op(ad.sigmoid, (3, 4))

    def test_relu(self):
        arrays = RNG.normal(size=(5, 4))
        arrays[np.abs(arrays) < 1e-3] = 0.1  # keep away from the kink
        p = parameter(arrays)
        g = gradients(ad.sum(ad.relu(p)), {"p": p})["p"]
        np.testing.assert_array_equal(g, (arrays > 0).astype(float))

    def test_exp(self):
        check_op(ad.exp, (3, 3))

    def test_log(self):
        check_op(ad.log, (3, 3), positive=True)

    def test_transpose_reshape(self):
        check_op(lambda x: ad.reshape(ad.transpose(x), (2, 6)), (4, 3))

    def test_getitem(self):
        check_op(lambda x: x[1:3, ::2], (4, 5))

    def test_gather_rows_with_repeats(self):
        idx = np.array([[0, 2, 2], [3, 0, 1]])
        check_op(lambda x: ad.gather_rows(x, idx), (4, 3))

    def test_gather_rows_vector(self):
        check_op(lambda x: ad.gather_rows(x, np.array([1, 1, 0])), (3,))

    def test_mix_rows(self):
        idx = np.array([[0, 2, 2], [3, 0, 1]])
        check_op(lambda x, w: ad.mix_rows(x, idx, w), (4, 3), (2, 3))

    def test_rowdot(self):
        check_op(ad.rowdot, (4, 3), (4, 3))

    def test_concat(self):
        check_op(lambda a, b: ad.concat([a, b], axis=1), (3, 2), (3, 4))
        check_op(lambda a, b: ad.concat([a, b], axis=0), (2, 3), (1, 3))

    def test_sum_and_mean(self):
        check_op(lambda x: ad.sum(x, axis=0), (3, 4))
        check_op(lambda x: ad.mean(x, axis=1, keepdims=True), (3, 4))
        check_op(lambda x: ad.reshape(ad.mean(x), (1,)), (3, 4))

    def test_row_softmax(self):
        check_op(ad.row_softmax, (4, 5))

    def test_bce(self):
        p = np.array([0.1, 0.4, 0.7, 0.95])
        for target in (0.0, 1.0):
            x = parameter(p.copy())
            g = gradients(ad.sum(ad.bce_from_prob(x, target)), {"x": x})["x"]
            num = numeric_grad(lambda: float(ad.sum(ad.bce_from_prob(Tensor(x.data), target)).data),
                               x.data)
            np.testing.assert_allclose(g, num, rtol=1e-6)

    def test_cross_entropy_weighted(self):
        labels = np.array([0, 2, 1, 2])
        w = np.array([0.1, 0.5, 0.2, 0.2])
        check_op(lambda z: ad.reshape(ad.cross_entropy_logits(z, labels, w), (1,)), (4, 3))

    def test_dropout_backward_uses_mask(self):
        x = parameter(RNG.normal(size=(50, 4)))
        y = ad.dropout(x, 0.5, np.random.default_rng(0))
        g = gradients(ad.sum(y), {"x": x})["x"]
        np.testing.assert_array_equal(g, y.data / np.where(x.data == 0, 1, x.data))

    def test_composite_three_layer_expression(self):
        x = RNG.normal(size=(6, 4))
        p = {k: parameter(RNG.normal(size=s) * 0.5)
             for k, s in [("W1", (4, 5)), ("W2", (5, 5)), ("W3", (5, 3))]}

        def loss():
            h = ad.relu(ad.matmul(Tensor(x), p["W1"]))
            h = ad.sigmoid(ad.matmul(h, p["W2"]))
            return ad.cross_entropy_logits(ad.matmul(h, p["W3"]), np.array([0, 1, 2, 0, 1, 2]))

        assert grad_check(loss, p, eps=1e-4).max_rel_error < 1e-4


class TestForwardExamples:
    def test_sigmoid_zero(self):
        np.testing.assert_array_equal(ad.sigmoid(np.zeros((2, 3))).data, 0.5)

    def test_softmax_equal_logits(self):
        np.testing.assert_allclose(ad.row_softmax(np.ones((3, 4))).data, 0.25)

    def test_sparse_identity(self):
        x = RNG.normal(size=(4, 3))
        np.testing.assert_array_equal(ad.spmm(sp.identity(4, format="csr"), x).data, x)

    def test_half_squared_norm(self):
        w = parameter(RNG.normal(size=(3, 3)))
        loss = ad.mul(ad.sum(ad.mul(w, w)), 0.5)
        np.testing.assert_allclose(gradients(loss, {"w": w})["w"], w.data)

    def test_sigmoid_slope_at_zero(self):
        x = parameter(np.zeros(5))
        np.testing.assert_allclose(gradients(ad.sum(ad.sigmoid(x)), {"x": x})["x"], 0.25)

    def test_softmax_gradient_rows_sum_to_zero(self):
        x = parameter(RNG.normal(size=(4, 6)))
        y = ad.row_softmax(x)
        upstream = np.repeat(RNG.normal(size=(4, 1)), 6, axis=1) + RNG.normal(size=(4, 6))
        g = ad.backward(y, upstream)[id(x)]
        np.testing.assert_allclose(g.sum(axis=1), 0.0, atol=1e-12)

    def test_log_clamp(self):
        assert np.isfinite(ad.log(np.array([0.0, 1.0]), clamp=1e-12).data).all()
        assert np.isfinite(ad.bce_from_prob(np.array([0.0, 1.0]), np.array([1.0, 0.0])).data).all()


class TestContracts:
    def test_shape_errors_name_the_operation(self):
        with pytest.raises(ShapeError, match="matmul"):
            ad.matmul(np.ones((2, 3)), np.ones((2, 3)))
        with pytest.raises(ShapeError, match="add"):
            ad.add(np.ones((2, 3)), np.ones((4,)))
        with pytest.raises(ShapeError, match="spmm"):
            ad.spmm(sp.identity(3, format="csr"), np.ones((2, 2)))
        with pytest.raises(ShapeError, match="gather_rows"):
            ad.gather_rows(np.ones((2, 2)), [5])
        with pytest.raises(ShapeError, match="cross_entropy"):
            ad.cross_entropy_logits(np.ones((2, 3)), [0])

    def test_spmm_needs_sparse_left_operand(self):
        with pytest.raises(ContractError):
            ad.spmm(np.eye(2), np.ones((2, 2)))

    def test_non_scalar_loss(self):
        x = parameter(np.ones(3))
        with pytest.raises(ContractError):
            gradients(ad.mul(x, 2.0), {"x": x})
        with pytest.raises(ContractError):
            ad.backward(ad.mul(x, 2.0))

    def test_unreached_parameter_gets_zero(self):
        x, y = parameter(np.ones(3)), parameter(np.ones((2, 2)))
        g = gradients(ad.sum(x), {"x": x, "y": y})
        np.testing.assert_array_equal(g["y"], np.zeros((2, 2)))

    def test_grad_check_refuses_dropout_and_float32(self):
        x = parameter(np.ones(4))
        with pytest.raises(ContractError, match="dropout"):
            grad_check(lambda: ad.sum(ad.dropout(x, 0.5, np.random.default_rng(0))), {"x": x})
        try:
            ad.set_default_dtype("float32")
            y = parameter(np.ones(2))
        finally:
            ad.set_default_dtype("float64")
        with pytest.raises(ContractError, match="float64"):
            grad_check(lambda: ad.sum(y), {"y": y})

    def test_grad_check_linear_map(self):
        w = parameter(RNG.normal(size=(3, 2)))
        x = RNG.normal(size=(4, 3))
        report = grad_check(lambda: ad.sum(ad.matmul(Tensor(x), w)), {"w": w})
        assert report.max_rel_error < 1e-10
        assert report.coords_checked == 6

    def test_float32_mode(self):
        try:
            ad.set_default_dtype("float32")
            x = parameter(np.ones((2, 2)))
            y = ad.sigmoid(ad.matmul(x, x))
            assert y.data.dtype == np.float32
            g = gradients(ad.sum(y), {"x": x})["x"]
            assert g.dtype == np.float32
        finally:
            ad.set_default_dtype("float64")
        with pytest.raises(ValueError):
            ad.set_default_dtype("int32")


class TestExprGraph:
    def test_evaluate_by_name(self):
        w = parameter(np.eye(2))
        expr = ExprGraph(lambda x: {"y": ad.matmul(x, w), "s": ad.sum(x)}, {"w": w})
        out = ad.evaluate(expr, {"x": np.array([[1.0, 2.0]])})
        np.testing.assert_array_equal(out["y"], [[1.0, 2.0]])
        assert out["s"] == 3.0
        g = gradients(ad.sum(expr(x=np.array([[1.0, 2.0]]))["y"]), expr.parameters)
        np.testing.assert_array_equal(g["w"], [[1.0, 1.0], [2.0, 2.0]])

    def test_dropout_deterministic_for_seed(self):
        x = np.ones((10, 10))
        a = ad.dropout(x, 0.5, np.random.default_rng(3)).data
        b = ad.dropout(x, 0.5, np.random.default_rng(3)).data
        np.testing.assert_array_equal(a, b)
        assert set(np.unique(a)) <= {0.0, 2.0}


class TestAdam:
    def test_first_step_magnitude(self):
        p = {"w": parameter(np.zeros(5))}
        adam_step(p, {"w": np.full(5, 3.7)}, AdamState(), lr=0.01)
        np.testing.assert_allclose(p["w"].data, -0.01, rtol=1e-6)

    def test_zero_gradient_keeps_parameters(self):
        p = {"w": parameter(np.arange(3.0))}
        adam_step(p, {"w": np.zeros(3)}, AdamState(), lr=0.1)
        np.testing.assert_array_equal(p["w"].data, np.arange(3.0))

    def test_nan_names_parameter(self):
        p = {"enc.W": parameter(np.zeros(2))}
        with pytest.raises(FloatingPointError, match="enc.W"):
            adam_step(p, {"enc.W": np.array([np.nan, 0.0])}, AdamState(), lr=0.1)

    def test_shape_mismatch(self):
        p = {"w": parameter(np.zeros(2))}
        with pytest.raises(ValueError, match="shape"):
            adam_step(p, {"w": np.zeros(3)}, AdamState(), lr=0.1)

    def test_quadratic_bowl(self):
        target = RNG.normal(size=4)
        w = parameter(np.zeros(4))
        opt = Adam({"w": w}, lr=1e-2)
        losses = []
        for _ in range(200):
            d = ad.sub(w, target)
            loss = ad.sum(ad.mul(d, d))
            losses.append(float(loss.data))
            opt.step(gradients(loss, {"w": w}))
        tail = np.array(losses[10:])
        assert (np.diff(tail) < 0).all()
        assert losses[-1] < 0.1 * losses[0]

    @settings(max_examples=30, deadline=None)
    @given(lr=st.sampled_from([1e-4, 1e-3, 1e-2]), steps=st.integers(1, 20),
           seed=st.integers(0, 1000))
    def test_matches_reference_formula(self, lr, steps, seed):
        rng = np.random.default_rng(seed)
        grads = rng.normal(size=(steps, 3))
        w = parameter(np.zeros(3))
        state = AdamState()
        m = v = np.zeros(3)
        ref = np.zeros(3)
        for t, g in enumerate(grads, 1):
            adam_step({"w": w}, {"w": g}, state, lr)
            m = 0.9 * m + 0.1 * g
            v = 0.999 * v + 0.001 * g * g
            ref = ref - lr * (m / (1 - 0.9 ** t)) / (np.sqrt(v / (1 - 0.999 ** t)) + 1e-8)
        np.testing.assert_allclose(w.data, ref, rtol=1e-12, atol=1e-15)
        assert state.step == steps


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        t = {"a": RNG.normal(size=(3, 2)), "b.c": np.arange(4.0)}
        ad.save_checkpoint(tmp_path / "c.npz", t, {"k": 1})
        back, meta = ad.load_checkpoint(tmp_path / "c.npz")
        assert meta == {"k": 1}
        for k in t:
            np.testing.assert_array_equal(back[k], t[k])

    def test_rejects_foreign_file(self, tmp_path):
        np.savez(tmp_path / "x.npz", a=np.ones(2))
        with pytest.raises(CheckpointError):
            ad.load_checkpoint(tmp_path / "x.npz")


class TestDeterminism:
    def test_repeatable_reduction(self):
        x = RNG.normal(size=(300, 200))
        with ad.deterministic():
            a = (x @ x.T).sum()
            b = (x @ x.T).sum()
        assert a == b

    def test_switch(self):
        ad.set_deterministic(True)
        ad.set_deterministic(True)
        ad.set_deterministic(False)
