import numpy as np
import pytest

from polysmith.detadj import adjoint
from polysmith.gcdkit import distance_lower_bound
from polysmith.lmsolve import LmConfig, Termination
from polysmith.matpoly import MatPoly, PerturbStructure, Poly
from polysmith.snf_opt import (
    SnfProblem,
    _Workspace,
    certify,
    initial_guess,
    kkt_hessian,
    kkt_residual,
    solve,
    solve_best_degree,
)

from oracles import diagonal_projection_distance, diagonal_snf_instance, fd_columns


def nontrivial_2x2():
    # diag(t-1, t-1) times a unimodular factor, so the divisor t-1 is exact.
    base = MatPoly.from_entries([[[-1, 1], [0]], [[0], [-1, 1]]])
    uni = MatPoly.from_entries([[[1], [0, 1]], [[0], [1]]])
    return base @ uni


def test_kkt_residual_zero_at_exact_solution():
    a = nontrivial_2x2()
    problem = SnfProblem(a, PerturbStructure.degree(a), deg_h=1)
    z0 = initial_guess(problem)
    g = kkt_residual(problem, z0)
    assert np.linalg.norm(g) <= 1e-9


def test_kkt_residual_matches_finite_differences():
    mat, _, _ = diagonal_snf_instance(0)
    problem = SnfProblem(mat, PerturbStructure.degree(mat), deg_h=1)
    ws = _Workspace(problem)
    rng = np.random.default_rng(11)
    z = initial_guess(problem) + 0.02 * rng.normal(size=ws.n_x + ws.n_c)

    def lagrangian(v):
        p, f_vec, h, lam = ws.unpack(v)
        c = ws.constraint(ws.system_at(p), f_vec, h)
        return np.array([p @ p + lam @ c])

    fd = fd_columns(lagrangian, z, eps=1e-6).ravel()
    g = kkt_residual(problem, z)
    assert np.linalg.norm(g - fd) / max(1.0, np.linalg.norm(fd)) <= 1e-5


def test_kkt_hessian_blocks_and_symmetry():
    mat, _, _ = diagonal_snf_instance(1)
    problem = SnfProblem(mat, PerturbStructure.degree(mat), deg_h=1)
    ws = _Workspace(problem)
    z0 = initial_guess(problem)
    # Zero multipliers at the initial point: the perturbation block is 2I.
    h_full = kkt_hessian(problem, z0)
    block = h_full[: ws.m_p, : ws.m_p]
    assert np.allclose(block, 2.0 * np.eye(ws.m_p), atol=1e-7)
    assert np.array_equal(h_full, h_full.T)


def test_kkt_hessian_matches_finite_differences():
    mat, _, _ = diagonal_snf_instance(2)
    problem = SnfProblem(mat, PerturbStructure.degree(mat), deg_h=1)
    ws = _Workspace(problem)
    rng = np.random.default_rng(12)
    z = initial_guess(problem) + 0.02 * rng.normal(size=ws.n_x + ws.n_c)
    h_full = kkt_hessian(problem, z)
    fd = fd_columns(lambda v: kkt_residual(problem, v), z, eps=1e-6)
    assert np.linalg.norm(h_full - fd) / np.linalg.norm(fd) <= 1e-4


def test_initial_guess_near_planted_solution():
    rng = np.random.default_rng(13)
    base = nontrivial_2x2()
    noise = 1e-3 * rng.normal(size=base.coeff.shape)
    noisy = MatPoly(base.coeff + noise)
    problem = SnfProblem(noisy, PerturbStructure.full(noisy), deg_h=1)
    g = kkt_residual(problem, initial_guess(problem))
    assert np.linalg.norm(g) <= 10.0 * np.linalg.norm(noise) * 10.0


def test_solve_exact_nontrivial_distance_zero():
    a = nontrivial_2x2()
    report = solve(SnfProblem(a, PerturbStructure.degree(a), deg_h=1), LmConfig())
    assert report.distance <= 1e-10
    assert np.all(report.delta_a.coeff == 0.0) or report.distance <= 1e-10
    assert report.certified


def test_solve_diagonal_instances_match_projection_oracle():
    for seed in (3, 4):
        mat, f, g = diagonal_snf_instance(seed)
        report = solve(SnfProblem(mat, PerturbStructure.degree(mat), deg_h=1), LmConfig())
        assert report.trace.termination in (Termination.GRAD_TOL, Termination.STEP_TOL)
        want = diagonal_projection_distance(f, g)
        assert report.distance == pytest.approx(want, abs=1e-6)
        _assert_report_invariants(mat, report)


def _assert_report_invariants(mat, report):
    # Mask respect: off-diagonals of the diagonal instances stay exactly zero.
    assert np.all(report.delta_a.coeff[0, 1] == 0.0)
    assert np.all(report.delta_a.coeff[1, 0] == 0.0)
    # Rank drop of at least two at the divisor root.
    solved = mat + report.delta_a
    s = np.linalg.svd(solved.evaluate(report.omega), compute_uv=False)
    assert s[-2] <= 1e-8 * max(1.0, s[0])
    # Constraint residual against the recomputed adjoint.
    adj = adjoint(solved)
    fitted = report.cofactors * report.h
    residual = (adj - fitted.with_degree_bound(adj.degree_bound)).frobenius_norm()
    assert residual <= 1e-8 * (1.0 + adj.frobenius_norm())
    # Merit decreases monotonically along accepted iterations.
    merits = report.trace.merits
    assert all(b < a for a, b in zip(merits, merits[1:]))
    # Distance dominates the Sylvester lower bound.
    bound, _ = distance_lower_bound(mat)
    assert report.distance >= bound - 1e-12


def test_solve_distance_dominates_lower_bound():
    mat, _, _ = diagonal_snf_instance(5)
    report = solve(SnfProblem(mat, PerturbStructure.degree(mat), deg_h=1), LmConfig())
    bound, _ = distance_lower_bound(mat)
    assert bound <= report.distance


def test_certify_rejects_non_stationary_point():
    mat, _, _ = diagonal_snf_instance(6)
    problem = SnfProblem(mat, PerturbStructure.degree(mat), deg_h=1)
    report = solve(problem, LmConfig())
    rng = np.random.default_rng(14)
    report.final_grad_norm = 1.0
    report.z = report.z + 0.5 * rng.normal(size=report.z.size)
    certified, _ = certify(problem, report)
    assert not certified


def test_solve_reversal_mode_on_unattainable_input():
    z = [0.0]
    c = MatPoly.from_entries(
        [
            [[0, 1], [-1, 1], z, z],
            [[1, 1], [0, 1], z, z],
            [z, z, [0, 1], [-1, 1]],
            [z, z, [1, 1], [0, 1]],
        ],
        degree_bound=1,
    )
    structure = PerturbStructure.support(c)
    from polysmith.errors import UnattainableProblem

    with pytest.raises(UnattainableProblem):
        solve(SnfProblem(c, structure, deg_h=2), LmConfig())
    report = solve(SnfProblem(c, structure, deg_h=2, use_reversal=True), LmConfig())
    # The reversed adjoint has the exact common divisor t^2, so the infimum 0
    # is attained in reversal coordinates and omega sits at infinity.
    assert report.distance <= 1e-8
    assert report.omega == np.inf


def test_solve_support_mask_respects_zero_coefficients():
    rng = np.random.default_rng(15)
    mat, _, _ = diagonal_snf_instance(8)
    mat.coeff[0, 1, 1] = 0.4  # one off-diagonal linear term joins the support
    structure = PerturbStructure.support(mat)
    report = solve(SnfProblem(mat, structure, deg_h=1), LmConfig())
    assert report.trace.termination in (Termination.GRAD_TOL, Termination.STEP_TOL)
    zeros = mat.coeff == 0.0
    assert np.all(report.delta_a.coeff[zeros] == 0.0)
    solved = mat + report.delta_a
    s = np.linalg.svd(solved.evaluate(report.omega), compute_uv=False)
    assert s[-2] <= 1e-8 * max(1.0, s[0])


def test_solve_best_degree_picks_smaller_distance():
    mat, f, g = diagonal_snf_instance(7)
    report = solve_best_degree(mat, PerturbStructure.degree(mat))
    direct = solve(SnfProblem(mat, PerturbStructure.degree(mat), deg_h=1), LmConfig())
    assert report.distance <= direct.distance + 1e-9
