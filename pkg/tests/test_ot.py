"""Optimal-transport core: cost matrices, exact and entropic solvers,
mixtures, and the weight gradient."""

import numpy as np
import pytest

from scbounds.ot import (
    AtomSet,
    DiscreteDistribution,
    SchemaViolationError,
    align_to_union,
    l1_cost_matrix,
    mixture,
    w1_entropic,
    w1_exact,
    w1_weight_gradient,
    _w1_exact_core,
)

from oracles import lp_transport_value, l1_costs_double_loop, w1_1d_cdf


def random_instance(rng, max_atoms=5, dim=None, allow_zero_mass=False):
    m = int(rng.integers(1, max_atoms + 1))
    n = int(rng.integers(1, max_atoms + 1))
    d = int(dim or rng.integers(1, 4))
    src = AtomSet(rng.uniform(0, 1, (m, d)) + np.arange(m)[:, None] * 1e-9)
    tgt = AtomSet(rng.uniform(0, 1, (n, d)) + np.arange(n)[:, None] * 1e-9)
    pm = rng.uniform(0.05, 1, m)
    qm = rng.uniform(0.05, 1, n)
    if allow_zero_mass:
        pm[rng.uniform(size=m) < 0.25] = 0.0
        qm[rng.uniform(size=n) < 0.25] = 0.0
        if pm.sum() == 0:
            pm[0] = 1.0
        if qm.sum() == 0:
            qm[0] = 1.0
    p = DiscreteDistribution(src, pm)
    q = DiscreteDistribution(tgt, qm)
    return p, q, l1_cost_matrix(src, tgt)


# ---------------------------------------------------------------------------
# AtomSet / DiscreteDistribution
# ---------------------------------------------------------------------------


def test_atom_set_rejects_duplicates():
    with pytest.raises(ValueError, match="duplicate"):
        AtomSet([[0.0, 1.0], [0.0, 1.0]])


def test_atom_set_dimension_and_length():
    a = AtomSet([[0.0, 1.0], [2.0, 3.0], [4.0, 5.0]])
    assert len(a) == 3
    assert a.dimension == 2


def test_from_points_merges_duplicates_summing_masses():
    d = DiscreteDistribution.from_points(
        [[0.0], [1.0], [0.0]], [0.2, 0.5, 0.3]
    )
    assert len(d) == 2
    assert np.allclose(d.atom_set.points[:, 0], [0.0, 1.0])
    assert np.allclose(d.probs, [0.5, 0.5])


def test_distribution_renormalizes_and_validates():
    a = AtomSet([[0.0], [1.0]])
    d = DiscreteDistribution(a, [2.0, 6.0])
    assert abs(d.probs.sum() - 1.0) < 1e-12
    assert np.allclose(d.probs, [0.25, 0.75])
    with pytest.raises(ValueError):
        DiscreteDistribution(a, [-0.1, 1.1])
    with pytest.raises(ValueError):
        DiscreteDistribution(a, [0.0, 0.0])
    with pytest.raises(ValueError):
        DiscreteDistribution(a, [0.5])


# ---------------------------------------------------------------------------
# Cost matrix
# ---------------------------------------------------------------------------


def test_cost_identical_single_atom():
    a = AtomSet([[0.0]])
    assert l1_cost_matrix(a, a).entries[0, 0] == 0.0


def test_cost_coordinate_sum():
    src = AtomSet([[0.0, 0.0]])
    tgt = AtomSet([[1.0, 2.0]])
    assert l1_cost_matrix(src, tgt).entries[0, 0] == pytest.approx(3.0)


def test_cost_matches_double_loop():
    rng = np.random.default_rng(1)
    src = AtomSet(rng.uniform(-3, 3, (3, 5)))
    tgt = AtomSet(rng.uniform(-3, 3, (4, 5)))
    got = l1_cost_matrix(src, tgt).entries
    want = l1_costs_double_loop(src.points, tgt.points)
    assert np.array_equal(got, want)


def test_cost_dimension_mismatch_rejected():
    with pytest.raises(SchemaViolationError, match="dimension"):
        l1_cost_matrix(AtomSet([[0.0]]), AtomSet([[0.0, 1.0]]))


def test_cost_symmetric_on_shared_set_and_zero_diagonal():
    rng = np.random.default_rng(2)
    a = AtomSet(rng.uniform(0, 1, (6, 2)))
    C = l1_cost_matrix(a, a).entries
    assert np.array_equal(C, C.T)
    assert np.all(np.diag(C) == 0)
    off = C[~np.eye(6, dtype=bool)]
    assert np.all(off > 0)


# ---------------------------------------------------------------------------
# Exact solver
# ---------------------------------------------------------------------------


def test_w1_exact_identical_distributions_zero():
    rng = np.random.default_rng(3)
    a = AtomSet(rng.uniform(0, 1, (5, 2)))
    p = DiscreteDistribution(a, rng.uniform(0.1, 1, 5))
    sol = w1_exact(p, p, l1_cost_matrix(a, a))
    assert sol.value == pytest.approx(0.0, abs=1e-12)


def test_w1_exact_point_masses():
    src = AtomSet([[0.0]])
    tgt = AtomSet([[3.0]])
    p = DiscreteDistribution(src, [1.0])
    q = DiscreteDistribution(tgt, [1.0])
    sol = w1_exact(p, q, l1_cost_matrix(src, tgt))
    assert sol.value == pytest.approx(3.0)


def test_w1_exact_half_mass_shift():
    a = AtomSet([[0.0], [1.0]])
    p = DiscreteDistribution(a, [0.5, 0.5])
    q = DiscreteDistribution(a, [0.0, 1.0])
    sol = w1_exact(p, q, l1_cost_matrix(a, a))
    assert sol.value == pytest.approx(0.5)
    assert sol.value == pytest.approx(w1_1d_cdf([0.0, 1.0], p.probs, q.probs))


def test_w1_exact_matches_lp_oracle_on_random_instances():
    rng = np.random.default_rng(4)
    for _ in range(100):
        p, q, cost = random_instance(rng, allow_zero_mass=True)
        sol = w1_exact(p, q, cost)
        ref = lp_transport_value(p.probs, q.probs, cost.entries)
        assert abs(sol.value - ref) < 1e-9


def test_transport_solution_invariants():
    rng = np.random.default_rng(5)
    for _ in range(30):
        p, q, cost = random_instance(rng, allow_zero_mass=True)
        sol = w1_exact(p, q, cost)
        assert np.abs(sol.plan.sum(axis=1) - p.probs).max() < 1e-8
        assert np.abs(sol.plan.sum(axis=0) - q.probs).max() < 1e-8
        assert sol.plan.min() >= 0
        assert abs((sol.plan * cost.entries).sum() - sol.value) < 1e-8
        feas = sol.dual_source[:, None] + sol.dual_target[None, :] - cost.entries
        assert feas.max() <= 1e-8
        gap = sol.dual_source @ p.probs + sol.dual_target @ q.probs - sol.value
        assert abs(gap) < 1e-6


def test_dual_target_anchored_at_first_positive_mass_atom():
    a = AtomSet([[0.0], [1.0], [2.0]])
    p = DiscreteDistribution(a, [1.0, 1.0, 1.0])
    q = DiscreteDistribution(a, [0.0, 1.0, 1.0])
    sol = w1_exact(p, q, l1_cost_matrix(a, a))
    assert sol.dual_target[1] == 0.0


def test_w1_exact_unbalanced_rejected():
    C = np.zeros((1, 1))
    with pytest.raises(ValueError, match="unbalanced"):
        _w1_exact_core(np.array([1.0]), np.array([0.5]), C)


def test_w1_exact_deterministic():
    rng = np.random.default_rng(6)
    p, q, cost = random_instance(rng)
    a = w1_exact(p, q, cost)
    b = w1_exact(p, q, cost)
    assert a.value == b.value
    assert np.array_equal(a.plan, b.plan)
    assert np.array_equal(a.dual_source, b.dual_source)
    assert np.array_equal(a.dual_target, b.dual_target)


def test_metric_axioms_on_shared_atom_set():
    rng = np.random.default_rng(7)
    a = AtomSet(rng.uniform(0, 2, (6, 2)))
    C = l1_cost_matrix(a, a)
    dists = [
        DiscreteDistribution(a, rng.uniform(0.05, 1, 6)) for _ in range(9)
    ]

    def w1(x, y):
        return w1_exact(x, y, C).value

    for p in dists[:3]:
        assert w1(p, p) == pytest.approx(0.0, abs=1e-12)
    for p, q in zip(dists[:4], dists[4:8]):
        assert w1(p, q) >= 0
        assert abs(w1(p, q) - w1(q, p)) < 1e-9
    for p, q, r in zip(dists[:3], dists[3:6], dists[6:9]):
        assert w1(p, r) <= w1(p, q) + w1(q, r) + 1e-8


def test_1d_exact_matches_cdf_formula():
    rng = np.random.default_rng(8)
    for _ in range(50):
        n = int(rng.integers(2, 25))
        x = np.sort(rng.uniform(0, 10, n)) + np.arange(n) * 1e-9
        a = AtomSet(x)
        p = DiscreteDistribution(a, rng.uniform(0, 1, n) + 1e-3)
        q = DiscreteDistribution(a, rng.uniform(0, 1, n) + 1e-3)
        sol = w1_exact(p, q, l1_cost_matrix(a, a))
        assert abs(sol.value - w1_1d_cdf(x, p.probs, q.probs)) < 1e-8


# ---------------------------------------------------------------------------
# Entropic solver
# ---------------------------------------------------------------------------


def test_entropic_self_transport_bias_bounded():
    rng = np.random.default_rng(9)
    a = AtomSet(rng.uniform(0, 1, (6, 2)))
    p = DiscreteDistribution(a, rng.uniform(0.1, 1, 6))
    C = l1_cost_matrix(a, a)
    values = []
    for eps in (0.5, 0.1, 0.02):
        sol = w1_entropic(p, p, C, epsilon=eps, max_iter=20000, tol=1e-12)
        entropy = -np.sum(p.probs * np.log(p.probs))
        assert sol.value <= eps * entropy + 1e-9
        assert entropy <= np.log(6)
        values.append(sol.value)
    assert values[0] >= values[-1]  # bias shrinks with epsilon


def test_entropic_close_to_exact_at_small_epsilon():
    rng = np.random.default_rng(10)
    a = AtomSet(rng.uniform(0, 1, (4, 1)))
    p = DiscreteDistribution(a, rng.uniform(0.1, 1, 4))
    q = DiscreteDistribution(a, rng.uniform(0.1, 1, 4))
    C = l1_cost_matrix(a, a)
    exact = w1_exact(p, q, C).value
    ent = w1_entropic(p, q, C, epsilon=1e-3, max_iter=200000, tol=1e-11)
    assert abs(ent.value - exact) < 1e-2


def test_entropic_marginals_within_tol():
    rng = np.random.default_rng(11)
    p, q, cost = random_instance(rng, max_atoms=6)
    tol = 1e-9
    sol = w1_entropic(p, q, cost, epsilon=0.05, max_iter=50000, tol=tol)
    assert sol.converged
    assert np.abs(sol.plan.sum(axis=1) - p.probs).max() <= tol * 1.01
    assert np.abs(sol.plan.sum(axis=0) - q.probs).max() <= tol * 1.01
    assert sol.marginal_error <= tol


def test_entropic_duals_feasible_and_finite_with_zero_mass():
    a = AtomSet([[0.0], [1.0], [2.0]])
    p = DiscreteDistribution(a, [0.5, 0.5, 0.0])
    q = DiscreteDistribution(a, [0.0, 0.4, 0.6])
    C = l1_cost_matrix(a, a)
    sol = w1_entropic(p, q, C, epsilon=0.05)
    assert np.all(np.isfinite(sol.dual_source))
    assert np.all(np.isfinite(sol.dual_target))
    feas = sol.dual_source[:, None] + sol.dual_target[None, :] - C.entries
    assert feas.max() <= 1e-8
    assert sol.regularized_value is not None


def test_entropic_rejects_bad_epsilon():
    a = AtomSet([[0.0]])
    p = DiscreteDistribution(a, [1.0])
    with pytest.raises(ValueError, match="epsilon"):
        w1_entropic(p, p, l1_cost_matrix(a, a), epsilon=0.0)


# ---------------------------------------------------------------------------
# Mixtures
# ---------------------------------------------------------------------------


def _shared_donors(rng, J=3, n=5):
    a = AtomSet(rng.uniform(0, 1, (n, 2)))
    return a, [DiscreteDistribution(a, rng.uniform(0.05, 1, n)) for _ in range(J)]


def test_mixture_vertex_returns_donor():
    rng = np.random.default_rng(12)
    _, donors = _shared_donors(rng)
    w = np.array([0.0, 1.0, 0.0])
    assert np.allclose(mixture(donors, w).probs, donors[1].probs, atol=1e-15)


def test_mixture_of_identical_donors_is_idempotent():
    a = AtomSet([[0.0], [1.0]])
    d = DiscreteDistribution(a, [0.3, 0.7])
    mix = mixture([d, d], np.array([0.5, 0.5]))
    assert np.allclose(mix.probs, d.probs)


def test_mixture_definition():
    a = AtomSet([[0.0], [1.0]])
    d0 = DiscreteDistribution(a, [1.0, 0.0])
    d1 = DiscreteDistribution(a, [0.0, 1.0])
    mix = mixture([d0, d1], np.array([0.3, 0.7]))
    assert np.allclose(mix.probs, [0.3, 0.7])


def test_mixture_atom_set_mismatch_rejected():
    d0 = DiscreteDistribution(AtomSet([[0.0]]), [1.0])
    d1 = DiscreteDistribution(AtomSet([[1.0]]), [1.0])
    with pytest.raises(SchemaViolationError, match="atom set"):
        mixture([d0, d1], np.array([0.5, 0.5]))


def test_w1_convex_in_weights_midpoint_inequality():
    rng = np.random.default_rng(13)
    a, donors = _shared_donors(rng, J=3, n=6)
    p0 = DiscreteDistribution(a, rng.uniform(0.05, 1, 6))
    C = l1_cost_matrix(a, a)

    def value(w):
        return w1_exact(p0, mixture(donors, w), C).value

    for _ in range(20):
        w1v = rng.dirichlet(np.ones(3))
        w2v = rng.dirichlet(np.ones(3))
        mid = 0.5 * (w1v + w2v)
        assert value(mid) <= 0.5 * value(w1v) + 0.5 * value(w2v) + 1e-8


def test_align_to_union_pads_missing_atoms():
    d0 = DiscreteDistribution(AtomSet([[0.0], [1.0]]), [0.5, 0.5])
    d1 = DiscreteDistribution(AtomSet([[1.0], [2.0]]), [0.25, 0.75])
    a0, a1 = align_to_union([d0, d1])
    assert a0.atom_set.same_as(a1.atom_set)
    assert len(a0) == 3
    assert np.allclose(a0.probs, [0.5, 0.5, 0.0])
    assert np.allclose(a1.probs, [0.0, 0.25, 0.75])
    # already shared: returned as-is
    b0, b1 = align_to_union([a0, a1])
    assert b0 is a0 and b1 is a1


# ---------------------------------------------------------------------------
# Weight gradient
# ---------------------------------------------------------------------------


def test_gradient_shifts_uniformly_with_dual_shift():
    rng = np.random.default_rng(14)
    a, donors = _shared_donors(rng)
    P = np.stack([d.probs for d in donors])
    psi = rng.normal(size=len(a))
    g = P @ psi
    g_shifted = P @ (psi + 2.5)
    assert np.allclose(g_shifted, g + 2.5, atol=1e-12)


def test_gradient_requires_fresh_solution():
    rng = np.random.default_rng(15)
    a, donors = _shared_donors(rng)
    p0 = DiscreteDistribution(a, rng.uniform(0.05, 1, 5))
    C = l1_cost_matrix(a, a)
    w = np.array([0.2, 0.3, 0.5])
    sol = w1_exact(p0, mixture(donors, w), C)
    g = w1_weight_gradient(p0, donors, w, sol)
    assert g.shape == (3,)
    with pytest.raises(ValueError, match="stale"):
        w1_weight_gradient(p0, donors, np.array([0.6, 0.2, 0.2]), sol)


def test_gradient_matches_finite_differences_entropic():
    rng = np.random.default_rng(16)
    eps = 1e-2
    worst = 0.0
    for _ in range(10):
        a, donors = _shared_donors(rng, J=3, n=5)
        p0 = DiscreteDistribution(a, rng.uniform(0.1, 1, 5))
        C = l1_cost_matrix(a, a)
        P = np.stack([d.probs for d in donors])
        w = rng.dirichlet(np.ones(3))

        def reg_value(wv):
            sol = w1_entropic(
                p0, mixture(donors, wv), C, epsilon=eps, max_iter=50000, tol=1e-12
            )
            return sol.regularized_value, sol

        _, sol = reg_value(w)
        grad = w1_weight_gradient(p0, donors, w, sol)
        h = 1e-5
        for j in range(3):
            wp = w.copy()
            wp[j] += h
            wp /= wp.sum()
            wm = w.copy()
            wm[j] -= h
            wm /= wm.sum()
            fd = (reg_value(wp)[0] - reg_value(wm)[0]) / (2 * h)
            analytic = grad[j] - w @ grad  # simplex-tangent projection
            worst = max(worst, abs(analytic - fd))
    assert worst <= 1e-3


def test_single_donor_projected_step_is_fixed():
    from scbounds.simplex import project_simplex

    a = AtomSet([[0.0], [1.0]])
    donor = DiscreteDistribution(a, [0.4, 0.6])
    p0 = DiscreteDistribution(a, [0.9, 0.1])
    C = l1_cost_matrix(a, a)
    w = np.array([1.0])
    sol = w1_exact(p0, mixture([donor], w), C)
    g = w1_weight_gradient(p0, [donor], w, sol)
    stepped = project_simplex(w - 0.1 * g)
    assert np.array_equal(stepped.values, w)
