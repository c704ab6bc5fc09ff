"""Finite-difference checks for every differentiable op in the engine."""

import numpy as np
import pytest

from refdrift.tensor import (
    BatchNormState,
    RngStream,
    Tensor,
    batchnorm2d,
    concat,
    conv2d,
    dropout,
    embedding,
    gather_last,
    gumbel_softmax,
    maxpool2d,
    slice_last,
    softmax,
    stack,
)

from gradcheck_util import assert_grad_close, numeric_grad


def _rand(rng, shape, low=-1.0, high=1.0):
    return rng.uniform_range(low, high, shape)


def _weighted(out, w):
    return (out * Tensor(w)).sum()


def check_op(build, arrays, tol=1e-4, name=""):
    """build(tensors) -> scalar loss Tensor; arrays are the leaf buffers."""
    tensors = [Tensor(a, requires_grad=True) for a in arrays]
    loss = build(tensors)
    loss.backward()
    for i, (t, a) in enumerate(zip(tensors, arrays)):
        def recompute():
            fresh = [Tensor(arr) for arr in arrays]
            return build(fresh).item()

        numeric = numeric_grad(recompute, a)
        assert_grad_close(t.grad, numeric, tol=tol, what=f"{name} input {i}")


def test_add_broadcast():
    rng = RngStream(11)
    w = _rand(rng, (3, 4, 5))
    check_op(lambda ts: _weighted(ts[0] + ts[1], w),
             [_rand(rng, (3, 4, 5)), _rand(rng, (4, 1))], name="add")


def test_sub_mul_div():
    rng = RngStream(12)
    w = _rand(rng, (4, 3))
    a = _rand(rng, (4, 3))
    b = _rand(rng, (4, 3), 0.5, 2.0)
    check_op(lambda ts: _weighted(ts[0] - ts[1], w), [a, b], name="sub")
    check_op(lambda ts: _weighted(ts[0] * ts[1], w), [a, b], name="mul")
    check_op(lambda ts: _weighted(ts[0] / ts[1], w), [a, b], name="div")


def test_matmul_2d_and_batched():
    rng = RngStream(13)
    w2 = _rand(rng, (3, 5))
    check_op(lambda ts: _weighted(ts[0] @ ts[1], w2),
             [_rand(rng, (3, 4)), _rand(rng, (4, 5))], name="matmul2d")
    wb = _rand(rng, (2, 3, 5))
    check_op(lambda ts: _weighted(ts[0] @ ts[1], wb),
             [_rand(rng, (2, 3, 4)), _rand(rng, (2, 4, 5))], name="matmul batched")
    # stacked lhs against a shared rhs exercises broadcast unreduction
    check_op(lambda ts: _weighted(ts[0] @ ts[1], wb),
             [_rand(rng, (2, 3, 4)), _rand(rng, (4, 5))], name="matmul broadcast")


def test_pointwise():
    rng = RngStream(14)
    w = _rand(rng, (3, 7))
    x = _rand(rng, (3, 7))
    x_pos = _rand(rng, (3, 7), 0.2, 2.0)
    x_off = x + np.sign(x) * 0.1  # keep clear of the relu kink
    check_op(lambda ts: _weighted(ts[0].relu(), w), [x_off], name="relu")
    check_op(lambda ts: _weighted(ts[0].sigmoid(), w), [x], name="sigmoid")
    check_op(lambda ts: _weighted(ts[0].tanh(), w), [x], name="tanh")
    check_op(lambda ts: _weighted(ts[0].exp(), w), [x], name="exp")
    check_op(lambda ts: _weighted(ts[0].log(), w), [x_pos], name="log")
    check_op(lambda ts: _weighted(ts[0] ** 2, w), [x], name="pow")
    check_op(lambda ts: _weighted(-ts[0], w), [x], name="neg")


def test_reductions_and_views():
    rng = RngStream(15)
    x = _rand(rng, (2, 3, 4))
    check_op(lambda ts: ts[0].sum(), [x], name="sum all")
    check_op(lambda ts: _weighted(ts[0].sum(axis=1), _rand(RngStream(1), (2, 4))),
             [x], name="sum axis")
    check_op(lambda ts: _weighted(ts[0].mean(axis=2), _rand(RngStream(2), (2, 3))),
             [x], name="mean axis")
    check_op(lambda ts: _weighted(ts[0].reshape(6, 4), _rand(RngStream(3), (6, 4))),
             [x], name="reshape")
    check_op(lambda ts: _weighted(ts[0].transpose(2, 0, 1), _rand(RngStream(4), (4, 2, 3))),
             [x], name="transpose")
    check_op(lambda ts: _weighted(slice_last(ts[0], 1, 3), _rand(RngStream(5), (2, 3, 2))),
             [x], name="slice_last")


def test_concat_stack():
    rng = RngStream(16)
    a = _rand(rng, (2, 3))
    b = _rand(rng, (2, 5))
    w = _rand(rng, (2, 8))
    check_op(lambda ts: _weighted(concat(ts, axis=1), w), [a, b], name="concat")
    c = _rand(rng, (2, 3))
    ws = _rand(rng, (2, 2, 3))
    check_op(lambda ts: _weighted(stack(ts, axis=0), ws), [a, c], name="stack")


def test_gather_and_embedding():
    rng = RngStream(17)
    x = _rand(rng, (4, 6))
    ids = rng.integers(0, 6, (4,))
    w = _rand(rng, (4,))
    check_op(lambda ts: _weighted(gather_last(ts[0], ids), w), [x], name="gather_last")
    table = _rand(rng, (9, 5))
    lookup = rng.integers(0, 9, (3, 4))
    wt = _rand(rng, (3, 4, 5))
    check_op(lambda ts: _weighted(embedding(ts[0], lookup), wt), [table], name="embedding")


def test_softmax():
    rng = RngStream(18)
    x = _rand(rng, (3, 5), -2.0, 2.0)
    w = _rand(rng, (3, 5))
    check_op(lambda ts: _weighted(softmax(ts[0]), w), [x], name="softmax")


def test_conv2d():
    rng = RngStream(19)
    x = _rand(rng, (2, 3, 6, 6))
    wgt = _rand(rng, (4, 3, 3, 3))
    b = _rand(rng, (4,))
    w_out = _rand(rng, (2, 4, 6, 6))
    check_op(lambda ts: _weighted(conv2d(ts[0], ts[1], ts[2], stride=1, pad=1), w_out),
             [x, wgt, b], name="conv2d pad1")
    w_out2 = _rand(rng, (2, 4, 2, 2))
    check_op(lambda ts: _weighted(conv2d(ts[0], ts[1], ts[2], stride=2, pad=0), w_out2),
             [x, wgt, b], name="conv2d stride2")


def test_maxpool2d():
    rng = RngStream(20)
    # strictly distinct values keep max differentiable at the sample point
    base = np.arange(2 * 3 * 4 * 4, dtype=np.float64)
    x = (base * 0.37 % 7.01).reshape(2, 3, 4, 4) + _rand(rng, (2, 3, 4, 4), 0.0, 1e-3)
    w = _rand(rng, (2, 3, 2, 2))
    check_op(lambda ts: _weighted(maxpool2d(ts[0], 2), w), [x], name="maxpool2d")


def test_batchnorm_train_and_eval():
    rng = RngStream(21)
    x = _rand(rng, (3, 2, 4, 4))
    gamma = _rand(rng, (2,), 0.5, 1.5)
    beta = _rand(rng, (2,))
    w = _rand(rng, (3, 2, 4, 4))

    def build_train(ts):
        return _weighted(batchnorm2d(ts[0], ts[1], ts[2], BatchNormState(2), training=True), w)

    check_op(build_train, [x, gamma, beta], name="batchnorm train")

    state = BatchNormState(2)
    state.running_mean = _rand(rng, (2,))
    state.running_var = _rand(rng, (2,), 0.5, 1.5)

    def build_eval(ts):
        return _weighted(batchnorm2d(ts[0], ts[1], ts[2], state, training=False), w)

    check_op(build_eval, [x, gamma, beta], name="batchnorm eval")


def test_dropout_fixed_mask():
    rng = RngStream(22)
    x = _rand(rng, (4, 6))
    w = _rand(rng, (4, 6))
    check_op(lambda ts: _weighted(dropout(ts[0], 0.3, RngStream(99)), w),
             [x], name="dropout")


def test_gumbel_soft_sample():
    rng = RngStream(23)
    logits = _rand(rng, (3, 5), -1.0, 1.0)
    w = _rand(rng, (3, 5))
    check_op(
        lambda ts: _weighted(gumbel_softmax(ts[0], 0.7, False, RngStream(7)), w),
        [logits], name="gumbel soft")


def test_spec_quadratic_example():
    x = Tensor([1.0, 2.0, 3.0], requires_grad=True)
    loss = (x * x).sum()
    loss.backward()
    assert np.array_equal(x.grad, [2.0, 4.0, 6.0])


def test_backward_errors():
    x = Tensor([1.0, 2.0], requires_grad=True)
    with pytest.raises(ValueError):
        (x * x).backward()
    loss = (x * x).sum()
    loss.backward()
    with pytest.raises(RuntimeError):
        loss.backward()


def test_constant_loss_no_grads():
    c = Tensor(3.0)
    loss = (c * c).sum()
    loss.backward()
    assert c.grad is None and loss.grad is None
