import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from crisisspot import core
from crisisspot.core import BatchNormState, ParameterStore, Tensor, grad_check
from crisisspot.errors import NumericError, ParameterError, ShapeError


def fd_grad(f, x, eps=1e-6):
    """Central differences of scalar f over every entry of x (float64)."""
    g = np.zeros_like(x)
    for i in np.ndindex(x.shape):
        old = x[i]
        x[i] = old + eps
        up = f(x)
        x[i] = old - eps
        down = f(x)
        x[i] = old
        g[i] = (up - down) / (2 * eps)
    return g


def check_op(op, *shapes, seed=0, positive=False, tol=1e-5):
    rng = np.random.default_rng(seed)
    xs = [rng.standard_normal(s) for s in shapes]
    if positive:
        xs = [np.abs(x) + 0.5 for x in xs]
    w = rng.standard_normal(op(*[Tensor(x) for x in xs]).shape)
    ts = [Tensor(x.copy(), requires_grad=True) for x in xs]
    out = op(*ts)
    core.reduce_sum(core.mul(out, w)).backward()
    for k, x in enumerate(xs):
        def f(v, k=k):
            args = [Tensor(v if j == k else xs[j]) for j in range(len(xs))]
            return float((op(*args).data * w).sum())
        num = fd_grad(f, x.copy())
        np.testing.assert_allclose(ts[k].grad, num, rtol=tol, atol=1e-8)


# ---------------------------------------------------------------- dense_forward

def test_dense_identity():
    out = core.dense_forward(np.eye(2), np.eye(2), np.zeros(2))
    np.testing.assert_array_equal(out.data, np.eye(2))


def test_dense_analytic():
    out = core.dense_forward(np.array([[1.0, 2.0]]), np.array([[1.0], [1.0]]), np.array([1.0]))
    np.testing.assert_array_equal(out.data, [[4.0]])


def test_dense_tanh_matches_loop_oracle():
    rng = np.random.default_rng(1)
    X, W, b = rng.standard_normal((3, 4)), rng.standard_normal((4, 2)), rng.standard_normal(2)
    want = np.zeros((3, 2))
    for i in range(3):
        for j in range(2):
            want[i, j] = np.tanh(sum(X[i, k] * W[k, j] for k in range(4)) + b[j])
    np.testing.assert_allclose(core.dense_forward(X, W, b, "tanh").data, want, atol=1e-6)


def test_dense_shape_error():
    with pytest.raises(ShapeError):
        core.dense_forward(np.ones((2, 3)), np.ones((4, 2)))


def test_dense_homogeneous_linearity():
    rng = np.random.default_rng(2)
    X1, X2, W = rng.standard_normal((3, 4)), rng.standard_normal((3, 4)), rng.standard_normal((4, 5))
    a, b = 1.7, -0.3
    lhs = core.dense_forward(a * X1 + b * X2, W).data
    rhs = a * core.dense_forward(X1, W).data + b * core.dense_forward(X2, W).data
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_unknown_activation():
    with pytest.raises(ParameterError):
        core.dense_forward(np.ones((1, 1)), np.ones((1, 1)), activation="gelu")


# ---------------------------------------------------------------- batch norm

def test_batch_norm_identical_rows_zero():
    st_ = BatchNormState.create(3, dtype=np.float64)
    out = core.batch_norm(np.tile([[1.0, -2.0, 5.0]], (4, 1)), st_, "train")
    np.testing.assert_array_equal(out.data, 0.0)


def test_batch_norm_train_moments():
    x = np.random.default_rng(3).normal(5, 3, size=(64, 6))
    out = core.batch_norm(x, BatchNormState.create(6, dtype=np.float64), "train").data
    assert np.abs(out.mean(axis=0)).max() < 1e-6
    assert np.abs(out.var(axis=0) - 1).max() < 1e-4


def test_batch_norm_eval_analytic():
    st_ = BatchNormState.create(1, dtype=np.float64)
    st_.gamma.data[:] = 2.0
    st_.beta.data[:] = 1.0
    out = core.batch_norm(np.array([[3.0]]), st_, "eval").data
    assert out[0, 0] == pytest.approx(2 * 3 / np.sqrt(1 + 1e-5) + 1, abs=1e-12)


def test_batch_norm_running_stats_momentum():
    st_ = BatchNormState.create(2, dtype=np.float64)
    x = np.array([[1.0, 2.0], [3.0, 6.0]])
    core.batch_norm(x, st_, "train")
    np.testing.assert_allclose(st_.running_mean, 0.9 * 0 + 0.1 * x.mean(axis=0))
    np.testing.assert_allclose(st_.running_var, 0.9 * 1 + 0.1 * x.var(axis=0))
    core.batch_norm(x, st_, "train", update_stats=False)
    np.testing.assert_allclose(st_.running_mean, 0.1 * x.mean(axis=0))


def test_batch_norm_3d_shares_stats_across_leading_axes():
    x = np.random.default_rng(4).standard_normal((3, 5, 2))
    out = core.batch_norm(x, BatchNormState.create(2, dtype=np.float64), "train").data
    flat = x.reshape(-1, 2)
    np.testing.assert_allclose(out.reshape(-1, 2), (flat - flat.mean(0)) / np.sqrt(flat.var(0) + 1e-5))


def test_batch_norm_state_validation():
    with pytest.raises(ParameterError):
        BatchNormState.create(2, epsilon=0.0)
    with pytest.raises(ParameterError):
        BatchNormState.create(2, momentum=1.0)


# ---------------------------------------------------------------- softmax / l2

def test_softmax_uniform_row():
    for T in (0.3, 1.0, 4.0):
        np.testing.assert_allclose(core.softmax_temp(np.full((1, 5), 2.5), T).data, 0.2)


def test_softmax_analytic():
    np.testing.assert_allclose(core.softmax_temp(np.array([[np.log(2), 0.0]]), 1.0).data, [[2 / 3, 1 / 3]])


def test_softmax_rejects_nonpositive_temperature():
    for T in (0.0, -1.0):
        with pytest.raises(ParameterError):
            core.softmax_temp(np.zeros((1, 2)), T)


def test_softmax_entropy_decreases_with_sharper_temperature():
    row = np.random.default_rng(5).standard_normal((1, 7))

    def entropy(p):
        return float(-(p * np.log(p)).sum())
    assert entropy(core.softmax_temp(row, 1.65).data) >= entropy(core.softmax_temp(row, 0.75).data)


def test_softmax_rows_sum_to_one_1000_matrices():
    rng = np.random.default_rng(6)
    for _ in range(1000):
        S = rng.standard_normal(tuple(rng.integers(1, 9, 2))) * rng.uniform(0.1, 50)
        out = core.softmax_temp(S, rng.uniform(0.1, 3)).data
        assert np.abs(out.sum(axis=-1) - 1).max() < 1e-6


def test_softmax_stable_for_large_inputs():
    out = core.softmax_temp(np.array([[1000.0, 999.0]]), 1.0).data
    assert np.isfinite(out).all()


def test_l2_normalize_cases():
    np.testing.assert_allclose(core.l2_normalize(np.array([[3.0, 4.0]])).data, [[0.6, 0.8]])
    u = np.array([[0.0, 1.0, 0.0]])
    np.testing.assert_array_equal(core.l2_normalize(u).data, u)
    np.testing.assert_array_equal(core.l2_normalize(np.zeros((1, 3))).data, 0.0)


@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 10_000))
@settings(max_examples=50, deadline=None)
def test_l2_normalize_idempotent(n, d, seed):
    x = np.random.default_rng(seed).standard_normal((n, d))
    once = core.l2_normalize(x).data
    np.testing.assert_allclose(core.l2_normalize(once).data, once, atol=1e-12)


# ---------------------------------------------------------------- dropout

def test_dropout_inverted_and_eval_identity():
    x = Tensor(np.ones((200, 50)))
    assert core.dropout(x, 0.2, None, train=False) is x
    out = core.dropout(x, 0.2, np.random.default_rng(0), train=True).data
    assert set(np.unique(out)) <= {0.0, 1.25}
    assert abs(out.mean() - 1) < 0.02


def test_dropout_needs_rng_and_valid_p():
    with pytest.raises(ParameterError):
        core.dropout(Tensor(np.ones(3)), 0.2, None, train=True)
    with pytest.raises(ParameterError):
        core.dropout(Tensor(np.ones(3)), 1.0, np.random.default_rng(0), train=True)


# ---------------------------------------------------------------- backward vs finite differences

@pytest.mark.parametrize("name,op,shapes,positive", [
    ("add_broadcast", core.add, [(3, 4), (4,)], False),
    ("mul_broadcast", core.mul, [(3, 4), (3, 1)], False),
    ("matmul", core.matmul, [(3, 4), (4, 2)], False),
    ("batched_matmul", core.matmul, [(2, 3, 4), (4, 5)], False),
    ("tanh", core.tanh, [(3, 4)], False),
    ("relu", core.relu, [(3, 4)], False),
    ("sigmoid", core.sigmoid, [(3, 4)], False),
    ("log", core.log, [(3, 4)], True),
    ("softmax_T", lambda s: core.softmax_temp(s, 0.75), [(3, 5)], False),
    ("l2_normalize", core.l2_normalize, [(4, 3)], False),
    ("concat", lambda a, b: core.concat([a, b]), [(2, 3), (2, 4)], False),
    ("mean_pool", core.mean_pool, [(2, 5, 3)], False),
    ("transpose", core.transpose, [(2, 3, 4)], False),
    ("reduce_mean", lambda a: core.reduce_mean(a, axis=0), [(4, 3)], False),
    ("take_rows", lambda a: core.take_rows(a, np.array([2, 0, 2])), [(4, 3)], False),
    ("dense_sigmoid", lambda x, w, b: core.dense_forward(x, w, b, "sigmoid"), [(3, 4), (4, 2), (2,)], False),
])
def test_backward_matches_finite_differences(name, op, shapes, positive):
    check_op(op, *shapes, positive=positive)


def test_batch_norm_backward_train_and_eval():
    for mode in ("train", "eval"):
        st_ = BatchNormState.create(3, dtype=np.float64)
        st_.running_mean[:] = [0.1, -0.2, 0.3]
        st_.running_var[:] = [1.5, 0.7, 2.0]
        st_.gamma.data[:] = [1.3, 0.6, -0.9]
        check_op(lambda x: core.batch_norm(x, st_, mode, update_stats=False), (5, 3))


def test_sparse_matmul_backward():
    import scipy.sparse as sp
    M = sp.random(5, 5, density=0.4, random_state=0, format="csr")
    check_op(lambda h: core.sparse_matmul(M, h), (5, 3))


def test_unused_parameter_gradient_is_exactly_zero():
    store = ParameterStore()
    a = store.add("a", np.array([1.0, 2.0]))
    store.add("unused", np.array([3.0]))
    store.zero_grad()
    core.reduce_sum(core.mul(a, a)).backward()
    grad = store["unused"].grad
    assert grad is None or not grad.any()


def test_backward_visits_shared_node_once():
    x = Tensor(np.array([2.0]), requires_grad=True)
    y = core.mul(x, x)
    z = core.add(y, y)
    z.backward()
    np.testing.assert_allclose(x.grad, [8.0])


def test_nonfinite_values_raise():
    with pytest.raises(NumericError):
        core.log(Tensor(np.array([0.0])))


# ---------------------------------------------------------------- grad_check

def test_grad_check_quadratic():
    store = ParameterStore()
    store.add("w", np.random.default_rng(0).standard_normal(6))
    err = grad_check(lambda s: core.reduce_sum(core.mul(s["w"], s["w"])), store, probe_count=6)
    assert err < 1e-8


def test_grad_check_dense_tanh_layer():
    rng = np.random.default_rng(1)
    store = ParameterStore()
    W, b = store.dense("layer", 4, 3, rng, np.float64)
    b.data[:] = rng.standard_normal(3)
    X = rng.standard_normal((5, 4))
    err = grad_check(lambda s: core.reduce_sum(core.dense_forward(X, s["layer.W"], s["layer.b"], "tanh")),
                     store, probe_count=15)
    assert err < 1e-5


def test_grad_check_rejects_nonfinite_loss():
    store = ParameterStore()
    store.add("w", np.ones(2))
    with pytest.raises(NumericError):
        grad_check(lambda s: core.reduce_sum(core.log(core.mul(s["w"], 0.0))), store)


def test_grad_check_detects_wrong_gradient():
    store = ParameterStore()
    store.add("w", np.array([1.0, -2.0]))

    def bad(s):
        w = s["w"]
        out = core._result(w.data ** 3, (w,), lambda g: (g * 2 * w.data,), "bad_cube")
        return core.reduce_sum(out)
    assert grad_check(bad, store, probe_count=2) > 0.1


def test_parameter_store_astype_is_deep():
    store = ParameterStore()
    store.add("w", np.ones(3, dtype=np.float32))
    store.batch_norm("bn", 3)
    copy = store.astype(np.float64)
    copy["w"].data[0] = 5
    assert store["w"].data[0] == 1
    assert copy.bn["bn"].gamma is copy["bn.gamma"]
    with pytest.raises(ParameterError):
        store.add("w", np.ones(1))
