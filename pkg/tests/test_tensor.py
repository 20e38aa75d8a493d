"""Tape engine: values against loop oracles, gradients against differences."""

import numpy as np
import numpy.testing as npt
import pytest

from listengen import tensor
from listengen.errors import ShapeError
from listengen.tensor import Tensor, backward, concat, no_grad

from oracles import fd_input_grads, loop_matmul, max_rel_err


def test_add_mul_values():
    a = Tensor([1.0, 2.0, 3.0])
    b = Tensor([10.0, 20.0, 30.0])
    npt.assert_array_equal(tensor.add(a, b).data, [11, 22, 33])
    npt.assert_array_equal(tensor.sub(a, b).data, [-9, -18, -27])
    npt.assert_array_equal(tensor.mul(a, b).data, [10, 40, 90])
    npt.assert_array_equal(tensor.scale(a, -2.0).data, [-2, -4, -6])


def test_matmul_matches_loop_oracle():
    rng = np.random.default_rng(3)
    for _ in range(5):
        a = rng.standard_normal((3, 4))
        b = rng.standard_normal((4, 2))
        got = tensor.matmul(Tensor(a), Tensor(b)).data
        npt.assert_allclose(got, loop_matmul(a, b), rtol=0, atol=1e-12)


def test_matmul_shape_errors():
    with pytest.raises(ShapeError):
        tensor.matmul(Tensor(np.zeros((2, 3))), Tensor(np.zeros((4, 2))))
    with pytest.raises(ShapeError):
        tensor.matmul(Tensor(np.zeros(3)), Tensor(np.zeros((3, 2))))


@pytest.mark.parametrize("seed", range(4))
def test_elementwise_grads_match_differences(seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((3, 4))
    b = rng.standard_normal((3, 4))

    def f(ta, tb):
        return tensor.mean(tensor.mul(tensor.add(ta, tb), tensor.sub(ta, tb)))

    analytic, numeric = fd_input_grads(f, [a, b])
    for an, nu in zip(analytic, numeric):
        assert max_rel_err(an, nu) < 1e-7


@pytest.mark.parametrize("seed", range(4))
def test_broadcast_grads_match_differences(seed):
    rng = np.random.default_rng(100 + seed)
    a = rng.standard_normal((4, 5))
    b = rng.standard_normal((1, 5))  # broadcast over rows
    c = rng.standard_normal((4, 1))  # broadcast over cols

    def f(ta, tb, tc):
        return tensor.total(tensor.mul(tensor.add(ta, tb), tc))

    analytic, numeric = fd_input_grads(f, [a, b, c])
    for an, nu in zip(analytic, numeric):
        assert max_rel_err(an, nu) < 1e-7


@pytest.mark.parametrize("shapes", [((3, 4), (4, 2)), ((2, 3, 4), (2, 4, 2)),
                                    ((2, 3, 4), (4, 2))])
def test_matmul_grads_match_differences(shapes):
    rng = np.random.default_rng(7)
    a = rng.standard_normal(shapes[0])
    b = rng.standard_normal(shapes[1])

    def f(ta, tb):
        return tensor.mean(tensor.matmul(ta, tb))

    analytic, numeric = fd_input_grads(f, [a, b])
    for an, nu in zip(analytic, numeric):
        assert max_rel_err(an, nu) < 1e-6


def test_reshape_swapaxes_concat_grads():
    rng = np.random.default_rng(11)
    a = rng.standard_normal((2, 6))
    b = rng.standard_normal((3, 4))

    def f(ta, tb):
        ra = tensor.reshape(ta, (3, 4))
        s = tensor.swapaxes(concat([ra, tb], axis=0), 0, 1)
        return tensor.mean(tensor.mul(s, s))

    analytic, numeric = fd_input_grads(f, [a, b])
    for an, nu in zip(analytic, numeric):
        assert max_rel_err(an, nu) < 1e-7


def test_transpose_value_and_grad():
    a = np.arange(6.0).reshape(2, 3)
    npt.assert_array_equal(tensor.transpose(Tensor(a)).data, a.T)
    analytic, numeric = fd_input_grads(
        lambda t: tensor.total(tensor.mul(tensor.transpose(t), tensor.transpose(t))), [a])
    assert max_rel_err(analytic[0], numeric[0]) < 1e-7


def test_mean_and_total():
    a = Tensor(np.arange(8.0).reshape(2, 4), requires_grad=True)
    m = tensor.mean(a)
    assert float(m.data) == 3.5
    backward(m)
    npt.assert_allclose(a.grad, np.full((2, 4), 1 / 8))
    a.zero_grad()
    s = tensor.total(a)
    assert float(s.data) == 28.0
    backward(s)
    npt.assert_allclose(a.grad, np.ones((2, 4)))


def test_diamond_graph_visits_each_node_once():
    # y = (a + a) * (a + a): d/da = 8a; double-visiting a node would inflate it
    a = Tensor(np.array([[3.0]]), requires_grad=True)
    twice = tensor.add(a, a)
    y = tensor.mean(tensor.mul(twice, twice))
    backward(y)
    npt.assert_allclose(a.grad, [[24.0]])


def test_deep_chain_does_not_recurse():
    a = Tensor(np.array([[1.0]]), requires_grad=True)
    x = a
    for _ in range(5000):
        x = tensor.scale(x, 1.0)
    backward(tensor.mean(x))
    npt.assert_allclose(a.grad, [[1.0]])


def test_no_grad_suppresses_tape():
    a = Tensor(np.ones((2, 2)), requires_grad=True)
    with no_grad():
        out = tensor.mul(a, a)
    assert not out.requires_grad and out._backward is None


def test_backward_requires_scalar_root():
    a = Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(ShapeError):
        backward(tensor.mul(a, a))


def test_unused_parameter_grad_is_zero_via_paramset():
    from listengen.nn import ParamSet
    ps = ParamSet()
    used = ps.add("used", np.ones((2, 2)))
    ps.add("unused", np.ones(3))
    backward(tensor.mean(tensor.mul(used, used)))
    grads = ps.grads()
    npt.assert_allclose(grads["used"], np.full((2, 2), 0.5))
    npt.assert_array_equal(grads["unused"], np.zeros(3))


def test_forward_is_deterministic():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((4, 4))
    b = rng.standard_normal((4, 4))
    r1 = tensor.matmul(Tensor(a), Tensor(b)).data
    r2 = tensor.matmul(Tensor(a), Tensor(b)).data
    assert np.array_equal(r1, r2)
