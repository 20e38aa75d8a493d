"""Finite-difference checker: correct on knowns, strict on misuse."""

import numpy as np
import pytest

from listengen.errors import ConfigError, NumericError
from listengen.gradcheck import FULL_CHECK_LIMIT, grad_check
from listengen.nn import ParamSet
from listengen.tensor import constant, make_node, matmul, mean, mul


def test_linear_function_checks_to_machine_precision():
    ps = ParamSet()
    ps.add("w", np.array([1.0, -2.0, 0.5]))
    coeff = constant(np.array([3.0, 1.0, -1.0]))

    def f(params):
        return mean(mul(params["w"], coeff))

    assert grad_check(f, ps) < 1e-9


def test_quadratic_form_checks_tightly():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((4, 4))
    ps = ParamSet()
    ps.add("x", rng.standard_normal((1, 4)))

    def f(params):
        x = params["x"]
        y = matmul(x, constant(a))      # [1, 4]
        return mean(mul(y, x))          # sum_i (xA)_i x_i / 4

    assert grad_check(f, ps) < 1e-7


def test_nondeterministic_loss_is_refused():
    ps = ParamSet()
    ps.add("w", np.ones(2))
    state = {"calls": 0}

    def f(params):
        state["calls"] += 1
        return mean(mul(params["w"], constant(np.full(2, float(state["calls"])))))

    with pytest.raises(NumericError) as exc:
        grad_check(f, ps)
    assert "non-deterministic" in str(exc.value)


@pytest.mark.parametrize("h", [1e-7, 1e-3, 0.0, -1e-5])
def test_step_size_outside_trust_range_rejected(h):
    ps = ParamSet()
    ps.add("w", np.ones(1))
    with pytest.raises(ConfigError):
        grad_check(lambda p: mean(mul(p["w"], p["w"])), ps, h=h)


def test_non_scalar_target_rejected():
    ps = ParamSet()
    ps.add("w", np.ones(3))
    with pytest.raises(ConfigError):
        grad_check(lambda p: mul(p["w"], p["w"]), ps)


def test_large_parameters_use_coordinate_sampling():
    # a param bigger than the full-check limit still verifies, via sampling
    n = FULL_CHECK_LIMIT + 56
    rng = np.random.default_rng(1)
    coeff = constant(rng.standard_normal(n))
    ps = ParamSet()
    ps.add("big", rng.standard_normal(n))

    calls = {"n": 0}

    def f(params):
        calls["n"] += 1
        return mean(mul(params["big"], coeff))

    err = grad_check(f, ps, rng=np.random.default_rng(2))
    assert err < 1e-6
    # 2 determinism evals + 2 per sampled coordinate, far fewer than 2n
    assert calls["n"] <= 2 + 2 * 64


def test_detects_a_wrong_gradient():
    ps = ParamSet()
    ps.add("w", np.array([0.3, -0.7]))

    def f(params):
        w = params["w"]
        out = mean(mul(w, w))

        def bad_back(g):
            w.accumulate(np.full(2, 123.0))

        return make_node(out.data, (w,), bad_back)

    assert grad_check(f, ps) > 0.5
