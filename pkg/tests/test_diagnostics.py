import itertools
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from conftest import random_instance
from hyperising.covariates import build_projection
from hyperising.diagnostics import (
    build_reduction_matrix,
    concavity_analysis,
    concavity_lower_bound,
    index_selection,
    parity_check,
    tower_property_check,
    validate_assumptions,
    verify_energy_lower_bound,
    verify_gradient_variance,
)
from hyperising.errors import DimensionMismatch, NoTopEdges
from hyperising.experiments import ExperimentSpec, generate_instance
from hyperising.hypergraph import WeightedHypergraph
from hyperising.model import ModelParameters, ParameterBox

BOX = ParameterBox(1.0, 1.0, 1.0)


# -- oracles ----------------------------------------------------------------------------


def selection_oracle(w):
    """The zero-out process, recomputing every row norm from scratch at each step."""
    w = np.array(w, float)
    n = len(w)
    work = w.copy()
    h = [None] * n
    rows, cols = set(range(n)), set(range(n))
    for _ in range(n):
        norms = {i: math.fsum(v * v for v in work[i]) for i in rows}
        i = min(rows, key=lambda r: (-norms[r], r))
        j = min(cols, key=lambda c: (-abs(work[i, c]), c))
        h[i] = j
        rows.discard(i)
        cols.discard(j)
        work[i, :] = 0
        work[:, j] = 0
    h = np.array(h)
    return h, float(sum(w[i, h[i]] ** 2 for i in range(n)))


def reduction_oracle(g):
    """Scan every (m-2)-subset of the other vertices; lexicographic ties."""
    n, m = g.n, g.m
    a = np.zeros((n, n))
    for i in range(n):
        best, best_sq = None, 0.0
        others = [v for v in range(n) if v != i]
        for z in itertools.combinations(others, m - 2):
            vec = np.array([g.weight_of(z + (i, j)) if len(set(z + (i, j))) == m else 0.0
                            for j in range(n)]) if m > 2 else \
                np.array([g.weight_of((i, j)) if j != i else 0.0 for j in range(n)])
            sq = float(vec @ vec)
            if sq > best_sq:
                best, best_sq = vec, sq
        if best is not None:
            a[:, i] = best
    return a


# -- assumptions ------------------------------------------------------------------------


def test_degree_violation_reported():
    g = WeightedHypergraph(3, 2, [((0, 1), 0.6), ((0, 2), 0.6)])
    rep = validate_assumptions(g, np.eye(3)[:, :1] + 1, BOX)
    assert rep.max_degree == pytest.approx(1.2)
    assert not rep.degree_ok
    assert not rep.all_ok


def test_mass_ratio_three_uniform(rng):
    n = 100
    edges = set()
    while len(edges) < 100:
        edges.add(tuple(sorted(rng.choice(n, 3, replace=False).tolist())))
    g = WeightedHypergraph(n, 3, [(e, 0.3) for e in edges])
    rep = validate_assumptions(g, rng.standard_normal((n, 2)) * 0.3, BOX, cap=10.0)
    assert rep.top_mass == pytest.approx(9.0)
    assert rep.mass_ratio == pytest.approx(0.09)


def test_all_ones_spectrum():
    g = WeightedHypergraph(5, 2, [((0, 1), 0.5)])
    rep = validate_assumptions(g, np.ones((5, 1)), BOX, mass_floor=0.0)
    assert rep.lambda_min_q == pytest.approx(1.0)
    assert rep.lambda_max_q == pytest.approx(1.0)
    assert rep.spectrum_ok and rep.row_norm_ok and rep.box_ok is None
    assert rep.all_ok


def test_box_and_row_norm_checks():
    g = WeightedHypergraph(4, 2, [((0, 1), 0.5), ((2, 3), 0.5)])
    x = np.array([[1.0], [-1.0], [2.0], [0.5]])
    rep = validate_assumptions(g, x, BOX, truth=ModelParameters([0.5], 1.0))
    assert not rep.row_norm_ok
    assert rep.box_ok is False
    with pytest.raises(DimensionMismatch):
        validate_assumptions(g, x, BOX, truth=ModelParameters([0.5, 0.1], 0.0))


def test_singular_covariates_reported_not_raised():
    g = WeightedHypergraph(3, 2, [((0, 1), 0.5)])
    x = np.array([[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]])
    rep = validate_assumptions(g, x, ParameterBox(1, 1, 10))
    assert not rep.spectrum_ok
    assert rep.f_norm_ok is False


# -- reduction matrix -------------------------------------------------------------------


def test_pairwise_reduction_is_weight_matrix():
    g = WeightedHypergraph(4, 2, [((0, 1), 0.5), ((1, 2), -0.3), ((0, 3), 0.2)])
    red = build_reduction_matrix(g)
    w = np.zeros((4, 4))
    for (i, j), wt in zip(g.edges, g.weights):
        w[i, j] = w[j, i] = wt
    assert_allclose(red.a, w)
    assert red.chosen_tuples[0] == ()


def test_three_uniform_hand_example():
    g = WeightedHypergraph(4, 3, [((0, 1, 2), 0.5), ((0, 1, 3), 0.4)])
    red = build_reduction_matrix(g)
    assert red.chosen_tuples[0] == (1,)
    assert red.a[2, 0] == 0.5 and red.a[3, 0] == 0.4
    assert red.a[1, 0] == 0.0
    assert red.frobenius_sq == pytest.approx(float(np.sum(red.a ** 2)))


def test_reduction_requires_top_edges():
    with pytest.raises(NoTopEdges):
        build_reduction_matrix(WeightedHypergraph(4, 3, [((0, 1), 1.0)]))


@pytest.mark.parametrize("m", [2, 3, 4])
def test_reduction_matches_exhaustive_scan(rng, m):
    for _ in range(5):
        g, *_ = random_instance(rng, 9, 1, m)
        red = build_reduction_matrix(g)
        assert_allclose(red.a, reduction_oracle(g))
        assert np.all(np.diag(red.a) == 0)
        assert red.inf_norm <= m - 1 + 1e-12
        assert red.one_norm <= m - 1 + 1e-12


# -- index selection --------------------------------------------------------------------


def test_selection_diagonal():
    sel = index_selection(np.diag([3.0, 2.0, 1.0]))
    assert_array_equal(sel.h, [0, 1, 2])
    assert sel.selected_sq_sum == 14.0


def test_selection_permutation():
    perm = np.array([2, 0, 3, 1])
    w = np.zeros((4, 4))
    w[np.arange(4), perm] = [1.0, -2.0, 0.5, 3.0]
    assert_array_equal(index_selection(w).h, perm)


def test_selection_zero_matrix_is_bijection():
    sel = index_selection(np.zeros((5, 5)))
    assert sel.is_bijection()
    assert sel.selected_sq_sum == 0.0


def test_selection_ties_take_smallest_index():
    sel = index_selection(np.ones((3, 3)))
    assert_array_equal(sel.h, [0, 1, 2])


def test_selection_matches_oracle(rng):
    for _ in range(50):
        w = rng.standard_normal((8, 8))
        sel = index_selection(w)
        h, total = selection_oracle(w)
        assert sel.is_bijection()
        assert_array_equal(sel.h, h)
        assert sel.selected_sq_sum == pytest.approx(total, rel=1e-12)


def test_selection_requires_square():
    with pytest.raises(DimensionMismatch):
        index_selection(np.ones((2, 3)))


# -- concavity bound --------------------------------------------------------------------


def test_concavity_bound_needs_top_edges():
    g = WeightedHypergraph(4, 3, [((0, 1), 1.0)])
    with pytest.raises(NoTopEdges):
        concavity_lower_bound(g, np.ones((4, 1)), BOX)


def test_concavity_bound_pairwise_direct():
    g = WeightedHypergraph(4, 2, [((1, 2), 1.0)])
    x = np.ones((4, 1))
    box = ParameterBox(0.5, 0.5, 1.0)
    f = np.eye(4) - np.ones((4, 4)) / 4
    w = np.zeros((4, 4))
    w[1, 2] = w[2, 1] = 1.0
    fw = f @ w
    h, total = selection_oracle(fw)
    expected = math.exp(-(0.5 + 1.0 * 0.5)) / 2 * total
    assert concavity_lower_bound(g, x, box) == pytest.approx(expected, rel=1e-12)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_concavity_analysis_consistency(rng):
    g, x, p, box = random_instance(rng, 12, 2, 3)
    ca = concavity_analysis(g, x, box)
    fa = build_projection(x).f @ build_reduction_matrix(g).a
    assert ca.selection.is_bijection()
    assert ca.fa_frobenius_sq == pytest.approx(float(np.sum(fa ** 2)))
    assert ca.bound == pytest.approx(ca.factor * ca.selection.selected_sq_sum)
    assert ca.bound >= 0


def experiment_family(n, seed=0, d=2):
    spec = ExperimentSpec(family="random_uniform_m", n_values=(n,), d=d, m=3,
                          box=ParameterBox(1.0, 1.0, 2 * math.sqrt(d)), trials_per_n=1)
    return spec, generate_instance(spec, n, seed)


def test_scaled_sweep_bounds_do_not_degrade():
    per_vertex, frob = {}, {}
    for n in (100, 200, 400, 800):
        spec, (g, x, truth) = experiment_family(n)
        ca = concavity_analysis(g, x, spec.box)
        per_vertex[n] = ca.bound / n
        frob[n] = ca.reduction.frobenius_sq / n
        assert ca.reduction.inf_norm <= 2 + 1e-12 and ca.reduction.one_norm <= 2 + 1e-12
        assert ca.frobenius_gap_ok(x.shape[1], 3)
    assert min(per_vertex.values()) >= 0.5 * per_vertex[100] > 0
    assert min(frob.values()) >= 0.5 * frob[100] > 0


# -- Monte-Carlo checks -----------------------------------------------------------------


def test_variance_trivial_no_edges():
    g = WeightedHypergraph(5, 2)
    res = verify_gradient_variance(g, np.ones((5, 1)), ModelParameters([0.0], 0.0), BOX,
                                   trials=200, seed=1)
    assert res.empirical_beta_var == 0.0
    assert res.holds


def test_variance_bounds_small_instance(rng):
    g, x, p, box = random_instance(rng, 10, 2, 3)
    res = verify_gradient_variance(g, x, p, box, trials=20000, seed=2)
    assert res.method == "exact"
    assert res.empirical_beta_var <= res.bound_beta
    assert res.empirical_theta_var <= res.bound_theta
    assert res.bound_beta == pytest.approx((12 + 4 * box.beta_bound) * 2 * 10)
    assert res.bound_theta == pytest.approx((1 + box.beta_bound) * 4 * box.feature_bound ** 2 * 2 * 2 * 10)


def test_variance_with_glauber(rng):
    from hyperising.sampler import ChainConfig
    g, x, p, box = random_instance(rng, 30, 2, 3)
    res = verify_gradient_variance(g, x, p, box, trials=2000, seed=3, chain=ChainConfig(seed=3))
    assert res.method.startswith("glauber")
    assert res.holds


def test_energy_no_edges():
    g = WeightedHypergraph(5, 2)
    res = verify_energy_lower_bound(g, np.ones((5, 1)), ModelParameters([0.0], 0.0), BOX,
                                    trials=50, seed=1)
    assert res.empirical_min_ff == 0.0
    assert res.bound is None


def test_energy_against_bound():
    spec, (g, x, truth) = experiment_family(60)
    res = verify_energy_lower_bound(g, x, truth, spec.box, trials=100, seed=4)
    assert res.bound > 0
    assert res.fraction_above >= 0.95
    assert res.mean_ff >= res.empirical_min_ff


# -- exact conditional checks -----------------------------------------------------------


@pytest.mark.parametrize("seed", range(8))
def test_parity_check_exact(seed):
    rng = np.random.default_rng(seed)
    n, m, d = int(rng.integers(6, 11)), int(rng.integers(2, 5)), int(rng.integers(1, 3))
    g, x, p, box = random_instance(rng, n, d, m, box=BOX)
    res = parity_check(g, x, p, box)
    assert res.checked > 0
    assert res.violations == 0


def test_tower_equals_parity_for_pairs(rng):
    g, x, p, box = random_instance(rng, 8, 1, 2, box=BOX)
    a, b = parity_check(g, x, p, box), tower_property_check(g, x, p, box)
    assert (a.checked, a.violations) == (b.checked, b.violations)
    assert a.min_margin == pytest.approx(b.min_margin)


def test_tower_single_spin_variant_can_fail():
    # Conditioning on y_{-v} alone fixes the other tuple spins, and the coefficient of
    # y_v then depends on their values; this seeded m=3 instance has violations.
    rng = np.random.default_rng(0)
    n, m, d = int(rng.integers(6, 11)), int(rng.integers(2, 5)), int(rng.integers(1, 3))
    g, x, p, box = random_instance(rng, n, d, m, box=BOX)
    assert g.m == 3
    res = tower_property_check(g, x, p, box)
    assert res.violations > 0
    assert parity_check(g, x, p, box).violations == 0


def test_exact_checks_need_top_edges():
    g = WeightedHypergraph(5, 3, [((0, 1), 0.5)])
    with pytest.raises(NoTopEdges):
        parity_check(g, np.ones((5, 1)), ModelParameters([0.0], 0.0), BOX)
