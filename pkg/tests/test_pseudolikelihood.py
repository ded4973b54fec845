import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from conftest import random_instance
from hyperising.errors import OutOfBox
from hyperising.hypergraph import WeightedHypergraph
from hyperising.model import ModelParameters, ParameterBox, conditional_prob, local_fields
from hyperising.pseudolikelihood import (
    LplObjective,
    log_cosh,
    lpl,
    lpl_evaluate,
    lpl_gradient,
    lpl_neg_hessian,
    sandwich_check,
    sech2,
)


def fd_gradient(fun, v, h=1e-5):
    out = np.empty_like(v)
    for k in range(len(v)):
        e = np.zeros_like(v)
        e[k] = h
        out[k] = (fun(v + e) - fun(v - e)) / (2 * h)
    return out


def sample_y(rng, n):
    return rng.choice([-1.0, 1.0], size=n)


def test_log_cosh_and_sech2_stable():
    z = np.array([-1000.0, -3.0, 0.0, 0.5, 800.0])
    with np.errstate(over="raise"):
        lc = log_cosh(z)
        s2 = sech2(z)
    assert_allclose(lc[1:4], np.log(np.cosh(z[1:4])), rtol=1e-14)
    assert lc[0] == pytest.approx(1000 - math.log(2))
    assert_allclose(s2[1:4], 1 / np.cosh(z[1:4]) ** 2, rtol=1e-14)
    assert s2[0] == 0.0 and s2[-1] == 0.0


def test_lpl_at_zero(rng):
    g, x, _, _ = random_instance(rng, 9, 2, 3)
    assert lpl(g, x, ModelParameters.zeros(2), sample_y(rng, 9)) == -math.log(2)


def test_lpl_beta_zero_is_logistic_loglik(rng):
    g, x, _, _ = random_instance(rng, 12, 3, 3)
    theta = rng.standard_normal(3)
    y = sample_y(rng, 12)
    expected = np.mean(np.log(1 / (1 + np.exp(-2 * y * (x @ theta)))))
    assert lpl(g, x, ModelParameters(theta, 0.0), y) == pytest.approx(expected, rel=1e-13)


def test_lpl_equals_mean_log_conditional(rng):
    g, x, p, _ = random_instance(rng, 8, 2, 3)
    y = sample_y(rng, 8)
    expected = np.mean([math.log(conditional_prob(g, x, p, y, i, int(y[i]))) for i in range(8)])
    assert lpl(g, x, p, y) == pytest.approx(expected, abs=1e-12)


def test_gradient_at_zero(rng):
    g, x, _, _ = random_instance(rng, 10, 2, 3)
    y = sample_y(rng, 10)
    f = local_fields(g, y)
    expected = np.append(y @ x / 10, y @ f / 10)
    assert_allclose(lpl_gradient(g, x, ModelParameters.zeros(2), y), expected, atol=1e-15)


def test_gradient_matches_formula(rng):
    g, x, p, _ = random_instance(rng, 15, 3, 4)
    y = sample_y(rng, 15)
    f = local_fields(g, y)
    t = np.tanh(x @ p.theta + p.beta * f)
    expected = np.append(((y - t)[:, None] * x).mean(axis=0), np.mean(y * f - f * t))
    assert_allclose(lpl_gradient(g, x, p, y), expected, atol=1e-15)


@pytest.mark.parametrize("seed", range(5))
def test_gradient_and_hessian_finite_differences(seed):
    rng = np.random.default_rng(seed)
    g, x, p, _ = random_instance(rng, 20, 3, 3)
    y = sample_y(rng, 20)
    obj = LplObjective(g, x, y)
    v = p.as_vector()
    grad = obj.gradient(v)
    fd = fd_gradient(obj.value, v)
    assert np.all(np.abs(fd - grad) <= 1e-6 * np.abs(grad))
    neg_h = obj.neg_hessian(v)
    fd_h = -np.array([fd_gradient(lambda u: obj.gradient(u)[k], v) for k in range(len(v))])
    assert_allclose(neg_h, fd_h, atol=1e-5)


def test_hessian_single_vertex_contribution():
    g = WeightedHypergraph(3, 2, [((1, 2), 1.0)])
    x = np.array([[2.0], [0.0], [0.0]])
    y = np.array([1.0, 1.0, -1.0])
    neg_h = lpl_neg_hessian(g, x, ModelParameters([0.0], 0.0), y)
    f = local_fields(g, y)
    rows = np.column_stack([x, f])
    assert_allclose(neg_h, rows.T @ rows / 3, atol=1e-15)


def test_hessian_psd_and_smooth(rng):
    for _ in range(10):
        g, x, p, box = random_instance(rng, 25, 2, 3)
        neg_h = lpl_neg_hessian(g, x, p, sample_y(rng, 25))
        eig = np.linalg.eigvalsh(neg_h)
        assert eig[0] >= -1e-10
        assert eig[-1] <= box.smoothness + 1e-9


def test_evaluate_bundle(rng):
    g, x, p, box = random_instance(rng, 12, 2, 3)
    y = sample_y(rng, 12)
    ev = lpl_evaluate(g, x, p, y, hessian=True)
    assert ev.value == pytest.approx(lpl(g, x, p, y))
    assert_allclose(ev.gradient, lpl_gradient(g, x, p, y))
    assert ev.neg_hessian_min_eig == pytest.approx(np.linalg.eigvalsh(lpl_neg_hessian(g, x, p, y))[0])
    assert ev.value <= -math.log(2) + box.field_bound
    assert lpl_evaluate(g, x, p, y).neg_hessian_min_eig is None


def test_sandwich_at_zero_is_tight(rng):
    g, x, _, box = random_instance(rng, 10, 2, 3)
    y = sample_y(rng, 10)
    res = sandwich_check(g, x, ModelParameters.zeros(2), y, box)
    assert res.lhs_ok and res.rhs_ok
    obj = LplObjective(g, x, y)
    assert_allclose(obj.neg_hessian(np.zeros(3)), obj.gram(), atol=1e-15)


def test_sandwich_random_and_boundary(rng):
    g, x, p, box = random_instance(rng, 50, 2, 3)
    y = sample_y(rng, 50)
    assert sandwich_check(g, x, p, y, box)[:2] == (True, True)
    theta = rng.standard_normal(2)
    edge = ModelParameters(box.theta_bound * theta / np.linalg.norm(theta), -box.beta_bound)
    res = sandwich_check(g, x, edge, y, box)
    assert res.lhs_ok and res.rhs_ok
    assert res.lambda_min >= -1e-12


def test_sandwich_outside_box(rng):
    g, x, _, box = random_instance(rng, 10, 2, 3)
    with pytest.raises(OutOfBox):
        sandwich_check(g, x, ModelParameters([0.0, 0.0], 2 * box.beta_bound), sample_y(rng, 10), box)


def test_objective_rejects_batch(rng):
    g, x, _, _ = random_instance(rng, 6, 1, 3)
    with pytest.raises(ValueError):
        LplObjective(g, x, np.ones((2, 6)))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.sampled_from([0.25, 0.5, 0.75]))
def test_concavity_along_segments(seed, t):
    rng = np.random.default_rng(seed)
    g, x, _, box = random_instance(rng, 12, 2, 3, box=ParameterBox(3.0, 3.0, 2.0))
    obj = LplObjective(g, x, sample_y(rng, 12))
    a, b = rng.uniform(-3, 3, size=3), rng.uniform(-3, 3, size=3)
    mid = obj.value(t * a + (1 - t) * b)
    assert mid >= t * obj.value(a) + (1 - t) * obj.value(b) - 1e-9
