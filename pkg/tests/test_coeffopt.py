import itertools

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.optimize import minimize

from hypercloud.coeffopt import (InfeasibleWithinBudget, build_smoothness_system,
                                 default_candidates, estimate_coefficients,
                                 most_violated_triples, solve_qp_fixed_max,
                                 triple_count)
from hypercloud.pointcloud import PointCloud, generate_shape
from hypercloud.rng import make_rng
from hypercloud.spectral import SpectrumBasis, estimate_spectrum


def all_triples(n):
    return list(itertools.combinations_with_replacement(range(n), 3))


def triple_value(V, sigma, t):
    i1, i2, i3 = t
    return float(np.sum(sigma * V[i1] * V[i2] * V[i3]))


def brute_force_violations(V, sigma, tol=1e-8):
    out = []
    for t in all_triples(V.shape[0]):
        v = triple_value(V, sigma, t)
        if v < -tol:
            out.append((*t, v))
    out.sort(key=lambda r: (r[3], r[0], r[1], r[2]))
    return out


def slsqp_oracle(system, basis, forced, alpha, beta):
    """All-triple-constraint solve through an independent NLP solver."""
    n = system.n
    V = basis.vectors
    triples = all_triples(n)
    G = np.array([V[i] * V[j] * V[k] for (i, j, k) in triples])

    def objective(s):
        return alpha * system.smoothness(s) + beta * float(s @ s)

    bounds = [(0.0, 1.0)] * n
    bounds[forced] = (1.0, 1.0)
    x0 = np.full(n, 0.5)
    x0[forced] = 1.0
    res = minimize(objective, x0, method="SLSQP", bounds=bounds,
                   constraints=[{"type": "ineq", "fun": lambda s: G @ s}],
                   options={"maxiter": 800, "ftol": 1e-14})
    return res


def feasible_random_cloud(n, seed):
    rng = make_rng(seed)
    return PointCloud(rng.normal(size=(n, 3)))


class TestSmoothnessSystem:
    def test_zero_data(self):
        cloud = PointCloud(np.zeros((4, 3)))
        basis = SpectrumBasis(vectors=np.eye(4), source_rank=0)
        system = build_smoothness_system(cloud, basis)
        for i in range(3):
            assert_allclose(system.w_matrix(i), 0.0)
        for sigma in (np.zeros(4), np.ones(4), np.linspace(0, 1, 4)):
            assert system.smoothness(sigma) == 0.0

    def test_identity_basis_diagonal_w(self):
        rng = make_rng(3)
        cloud = PointCloud(rng.normal(size=(5, 3)))
        basis = SpectrumBasis(vectors=np.eye(5), source_rank=5)
        system = build_smoothness_system(cloud, basis)
        for i in range(3):
            assert_allclose(system.w_matrix(i), np.diag(cloud.coords[:, i]))
        sigma = rng.uniform(size=5)
        expected = float(np.sum(cloud.coords ** 2 * (1.0 - sigma[:, None]) ** 2))
        assert_allclose(system.smoothness(sigma), expected, rtol=1e-12)

    def test_complete_sigma_annihilates(self):
        cloud = feasible_random_cloud(8, seed=4)
        basis = estimate_spectrum(cloud)
        system = build_smoothness_system(cloud, basis)
        assert system.smoothness(np.ones(8)) <= 1e-18

    def test_w_columns_scale(self):
        cloud = feasible_random_cloud(6, seed=5)
        basis = estimate_spectrum(cloud)
        system = build_smoothness_system(cloud, basis)
        W0 = system.w_matrix(0)
        norms = np.linalg.norm(W0, axis=0)
        assert_allclose(norms, np.abs(system.coeffs[:, 0]), atol=1e-12)

    def test_dimension_mismatch(self):
        cloud = feasible_random_cloud(5, seed=6)
        basis = SpectrumBasis(vectors=np.eye(4), source_rank=4)
        with pytest.raises(ValueError):
            build_smoothness_system(cloud, basis)


class TestMostViolatedTriples:
    def test_identity_basis_clean(self):
        basis = SpectrumBasis(vectors=np.eye(5), source_rank=5)
        sigma = np.linspace(0.0, 1.0, 5)
        assert most_violated_triples(basis, sigma, budget=10) == []

    def test_zero_sigma_clean(self):
        cloud = feasible_random_cloud(6, seed=7)
        basis = estimate_spectrum(cloud)
        assert most_violated_triples(basis, np.zeros(6), budget=10) == []

    def test_matches_brute_force(self):
        for seed in range(5):
            cloud = feasible_random_cloud(4 + seed, seed=20 + seed)
            basis = estimate_spectrum(cloud)
            rng = make_rng(30 + seed)
            sigma = rng.uniform(size=basis.n)
            expected = brute_force_violations(basis.vectors, sigma)
            got = most_violated_triples(basis, sigma, budget=10 ** 6)
            assert [g[:3] for g in got] == [e[:3] for e in expected]
            assert_allclose([g[3] for g in got], [e[3] for e in expected],
                            atol=1e-14)

    def test_budget_truncates(self):
        cloud = feasible_random_cloud(7, seed=8)
        basis = estimate_spectrum(cloud)
        sigma = np.ones(7)
        full = most_violated_triples(basis, sigma, budget=10 ** 6)
        if len(full) > 2:
            cut = most_violated_triples(basis, sigma, budget=2)
            assert cut == full[:2]

    def test_screened_scan_is_sound(self):
        # force the screened path and confirm every reported triple is a
        # true violation
        cloud = feasible_random_cloud(12, seed=9)
        basis = estimate_spectrum(cloud)
        sigma = np.ones(12)
        got = most_violated_triples(basis, sigma, budget=50, scan_cap=10)
        for (i1, i2, i3, v) in got:
            assert i1 <= i2 <= i3
            assert_allclose(v, triple_value(basis.vectors, sigma, (i1, i2, i3)),
                            atol=1e-12)
            assert v < -1e-8


class TestSolveQpFixedMax:
    def test_zero_data_identity_basis(self):
        cloud = PointCloud(np.zeros((4, 3)))
        basis = SpectrumBasis(vectors=np.eye(4), source_rank=0)
        system = build_smoothness_system(cloud, basis)
        for alpha, beta in ((1e-3, 1.0), (2.0, 0.5)):
            sol = solve_qp_fixed_max(system, basis, 1, alpha, beta)
            expected = np.zeros(4)
            expected[1] = 1.0
            assert_allclose(sol.sigma, expected, atol=1e-12)
            assert_allclose(sol.objective, beta, rtol=1e-12)
            assert sol.feasible_within_budget

    def test_box_and_forced_exact(self):
        cloud = feasible_random_cloud(8, seed=10)
        basis = estimate_spectrum(cloud)
        system = build_smoothness_system(cloud, basis)
        sol = solve_qp_fixed_max(system, basis, 2, 0.5, 1.0)
        assert sol.sigma[2] == 1.0
        assert sol.sigma.min() >= 0.0
        assert sol.sigma.max() <= 1.0

    def test_final_iterate_satisfies_cuts(self):
        for seed in range(4):
            cloud = feasible_random_cloud(6, seed=40 + seed)
            basis = estimate_spectrum(cloud)
            system = build_smoothness_system(cloud, basis)
            sol = solve_qp_fixed_max(system, basis, 0, 1.0, 1.0)
            if not sol.feasible_within_budget:
                continue
            viol = brute_force_violations(basis.vectors, sol.sigma)
            assert viol == []
            for t in sol.active_cuts:
                assert triple_value(basis.vectors, sol.sigma, t) >= -1e-8

    def test_oracle_equivalence(self):
        # compare the winning candidate's solve with an independent
        # all-constraints NLP solve at the same forced index
        matched = 0
        for seed in range(8):
            n = 4 + (seed % 5)
            cloud = feasible_random_cloud(n, seed=60 + seed)
            basis = estimate_spectrum(cloud)
            system = build_smoothness_system(cloud, basis)
            try:
                sol = estimate_coefficients(cloud, basis, alpha=1.0, beta=1.0)
            except InfeasibleWithinBudget:
                continue
            res = slsqp_oracle(system, basis, sol.forced_index, 1.0, 1.0)
            if not res.success:
                continue
            ref = float(res.fun)
            assert abs(sol.objective - ref) <= 1e-6 * max(1.0, abs(ref))
            matched += 1
        assert matched >= 4

    def test_round_objectives_monotone(self):
        # small cut budget forces several rounds; each added constraint can
        # only raise the constrained optimum
        for seed in range(8):
            cloud = feasible_random_cloud(8, seed=80 + seed)
            basis = estimate_spectrum(cloud)
            system = build_smoothness_system(cloud, basis)
            sol = solve_qp_fixed_max(system, basis, 0, 1.0, 1.0, cut_budget=2)
            if not sol.feasible_within_budget or sol.cut_rounds < 2:
                continue
            objs = sol.round_objectives
            for a, b in zip(objs, objs[1:]):
                assert b >= a - 1e-6 * max(1.0, abs(a))

    def test_enforcement_off_skips_cuts(self):
        cloud = feasible_random_cloud(6, seed=11)
        basis = estimate_spectrum(cloud)
        system = build_smoothness_system(cloud, basis)
        sol = solve_qp_fixed_max(system, basis, 0, 1.0, 1.0, enforce_cuts=False)
        assert sol.cut_rounds == 0
        assert sol.active_cuts == []

    def test_invalid_weights(self):
        cloud = feasible_random_cloud(4, seed=12)
        basis = estimate_spectrum(cloud)
        system = build_smoothness_system(cloud, basis)
        with pytest.raises(ValueError):
            solve_qp_fixed_max(system, basis, 0, -1.0, 1.0)
        with pytest.raises(ValueError):
            solve_qp_fixed_max(system, basis, 9, 1.0, 1.0)


class TestEstimateCoefficients:
    def test_zero_data_tie_break(self):
        cloud = PointCloud(np.zeros((3, 3)))
        basis = SpectrumBasis(vectors=np.eye(3), source_rank=0)
        sol = estimate_coefficients(cloud, basis, alpha=1.0, beta=2.0,
                                    candidates=[0, 1, 2])
        assert sol.forced_index == 0
        assert_allclose(sol.objective, 2.0)

    def test_singleton_matches_fixed_solve(self):
        cloud = feasible_random_cloud(6, seed=13)
        basis = estimate_spectrum(cloud)
        system = build_smoothness_system(cloud, basis)
        direct = solve_qp_fixed_max(system, basis, 3, 0.7, 1.3)
        via = estimate_coefficients(cloud, basis, alpha=0.7, beta=1.3,
                                    candidates=[3])
        assert_allclose(via.sigma, direct.sigma, atol=1e-12)
        assert via.objective == direct.objective

    def test_minimizes_over_candidates(self):
        cloud = feasible_random_cloud(5, seed=14)
        basis = estimate_spectrum(cloud)
        system = build_smoothness_system(cloud, basis)
        best = estimate_coefficients(cloud, basis, alpha=1.0, beta=1.0)
        for k in range(5):
            sol = solve_qp_fixed_max(system, basis, k, 1.0, 1.0)
            if sol.feasible_within_budget:
                assert best.objective <= sol.objective + 1e-12

    def test_normalized_maximum(self):
        cloud = feasible_random_cloud(7, seed=15)
        basis = estimate_spectrum(cloud)
        sol = estimate_coefficients(cloud, basis)
        assert sol.sigma.max() == 1.0
        assert sol.sigma[sol.forced_index] == 1.0

    def test_scaling_invariance(self):
        cloud = feasible_random_cloud(6, seed=16)
        basis = estimate_spectrum(cloud)
        a = estimate_coefficients(cloud, basis, alpha=0.4, beta=0.9)
        b = estimate_coefficients(cloud, basis, alpha=4.0, beta=9.0)
        assert a.forced_index == b.forced_index
        assert_allclose(a.sigma, b.sigma, atol=1e-8)

    def test_default_candidates_policy(self):
        small = build_smoothness_system(
            feasible_random_cloud(10, seed=17),
            estimate_spectrum(feasible_random_cloud(10, seed=17)))
        assert default_candidates(small) == list(range(10))
        big_cloud = generate_shape("cube", 100, seed=18)
        big = build_smoothness_system(big_cloud, estimate_spectrum(big_cloud))
        cands = default_candidates(big)
        assert len(cands) == 16
        energy = big.component_energy
        cutoff = np.sort(energy)[::-1][15]
        assert all(energy[c] >= cutoff - 1e-12 for c in cands)

    def test_empty_candidates_rejected(self):
        cloud = feasible_random_cloud(4, seed=19)
        basis = estimate_spectrum(cloud)
        with pytest.raises(ValueError):
            estimate_coefficients(cloud, basis, candidates=[])

    def test_infeasible_raises(self):
        # a basis whose forced component has a strictly negative cube on
        # some entry cannot satisfy the sign constraints with that index
        # forced; with every candidate sharing the defect the solve fails
        v = np.array([[np.sqrt(0.5), -np.sqrt(0.5)],
                      [np.sqrt(0.5), np.sqrt(0.5)]]).T
        basis = SpectrumBasis(vectors=v, source_rank=2)
        cloud = PointCloud(np.zeros((2, 3)))
        with pytest.raises(InfeasibleWithinBudget):
            estimate_coefficients(cloud, basis, alpha=1.0, beta=1.0,
                                  candidates=[1])


def test_triple_count():
    assert triple_count(1) == 1
    assert triple_count(2) == 4
    assert triple_count(4) == 20
    assert triple_count(8) == len(all_triples(8))
