import numpy as np
import pytest

from polysmith.detadj import determinant
from polysmith.errors import UnattainableProblem
from polysmith.gcdkit import local_invariant_structure
from polysmith.lmsolve import LmConfig, Termination
from polysmith.matpoly import MatPoly, PerturbStructure
from polysmith.mccoy_opt import (
    McCoyProblem,
    _McCoyWorkspace,
    companion_linearization,
    initial_guess_mccoy,
    mccoy_residual,
    reversed_problem,
    solve_mccoy,
)
from polysmith.structured import numeric_rank

from oracles import fd_columns, mccoy_all_entries_distance, mccoy_rank2_instance


def pencil_as_matpoly(pencil):
    size = pencil.e.shape[0]
    arr = np.zeros((size, size, 2))
    arr[:, :, 0] = -pencil.f
    arr[:, :, 1] = pencil.e
    return MatPoly(arr)


def test_linearization_degree_one_is_input():
    rng = np.random.default_rng(0)
    a = MatPoly(rng.normal(size=(2, 2, 2)))
    pencil = companion_linearization(a)
    assert np.allclose(pencil.e, a.coeff[:, :, 1])
    assert np.allclose(pencil.f, -a.coeff[:, :, 0])


def test_linearization_preserves_determinant():
    rng = np.random.default_rng(1)
    a = MatPoly(rng.normal(size=(2, 2, 3)))
    det_a = determinant(a).trimmed(1e-10).coeffs
    det_p = determinant(pencil_as_matpoly(companion_linearization(a))).trimmed(1e-10).coeffs
    same = np.allclose(det_p, det_a, atol=1e-9)
    flipped = np.allclose(det_p, -det_a, atol=1e-9)
    assert same or flipped


def test_linearization_rank_bookkeeping():
    rng = np.random.default_rng(2)
    a = MatPoly(rng.normal(size=(3, 3, 3)))
    pencil = companion_linearization(a)
    for omega in (0.37, -1.1, 0.2 + 0.8j):
        lhs = numeric_rank(pencil.evaluate(omega))
        rhs = a.rows * (a.degree_bound - 1) + numeric_rank(a.evaluate(omega))
        assert lhs == rhs


def test_residual_zero_at_planted_solution():
    rng = np.random.default_rng(3)
    base = rng.normal(size=(2, 2))
    omega = 0.7
    coeff = np.zeros((2, 2, 2))
    coeff[:, :, 0] = -omega * base
    coeff[:, :, 1] = base
    a = MatPoly(coeff)
    problem = McCoyProblem(a, PerturbStructure.full(a), r=2)
    ws = _McCoyWorkspace(problem)
    m, _ = ws.operator(a, omega)
    _, _, vh = np.linalg.svd(m)
    bc = vh[-2:, :].conj().T
    z = ws.pack(np.zeros(ws.m_p), complex(omega), bc.real.copy(), bc.imag.copy(), np.zeros(ws.n_c))
    assert np.linalg.norm(mccoy_residual(problem, z)) <= 1e-10


def test_residual_matches_finite_differences():
    a = mccoy_rank2_instance(0)
    problem = McCoyProblem(a, PerturbStructure.full(a), r=2)
    ws = _McCoyWorkspace(problem)
    rng = np.random.default_rng(4)
    z = initial_guess_mccoy(problem) + 0.02 * rng.normal(size=ws.n_x + ws.n_c)

    def lagrangian(v):
        p, omega, br, bi, lam = ws.unpack(v)
        m, _ = ws.operator(ws.perturbed(p), omega)
        return np.array([p @ p + lam @ ws.constraint(m, br + 1j * bi)])

    fd = fd_columns(lagrangian, z, eps=1e-6).ravel()
    g = mccoy_residual(problem, z)
    assert np.linalg.norm(g - fd) / max(1.0, np.linalg.norm(fd)) <= 1e-5


def test_initial_guess_candidates_and_orthonormal_kernel():
    a = MatPoly.from_entries([[[-1, 1], [0]], [[0], [-2, 1]]])
    problem = McCoyProblem(a, PerturbStructure.full(a), r=2)
    ws = _McCoyWorkspace(problem)
    z0 = initial_guess_mccoy(problem)
    _, omega, br, bi, _ = ws.unpack(z0)
    bc = br + 1j * bi
    assert np.linalg.norm(bc.conj().T @ bc - np.eye(2)) <= 1e-12
    assert np.isfinite(omega.real) and np.isfinite(omega.imag)


def test_solve_repeated_eigenvalue_distance_zero():
    a = MatPoly.from_entries([[[-1, 1], [0]], [[0], [-1, 1]]])
    report = solve_mccoy(McCoyProblem(a, PerturbStructure.degree(a), r=2), LmConfig())
    assert report.distance <= 1e-10


def test_solve_matches_all_entries_vanish_oracle():
    for seed in (0, 1):
        a = mccoy_rank2_instance(seed)
        report = solve_mccoy(McCoyProblem(a, PerturbStructure.full(a), r=2), LmConfig())
        assert report.trace.termination in (Termination.GRAD_TOL, Termination.STEP_TOL)
        want = mccoy_all_entries_distance(a)
        assert report.distance == pytest.approx(want, abs=1e-6)
        _assert_mccoy_invariants(a, report)


def _assert_mccoy_invariants(a, report):
    bc = report.kernel
    assert np.linalg.norm(bc.conj().T @ bc - np.eye(bc.shape[1])) <= 1e-8
    solved = a + report.delta_a
    # Kernel block columns really annihilate the solved pencil/matrix.
    m = solved.evaluate(report.omega)
    if bc.shape[0] == a.rows:
        assert np.linalg.norm(m @ bc) <= 1e-7 * (1.0 + np.linalg.norm(m))
    s = np.linalg.svd(m, compute_uv=False)
    assert s[-bc.shape[1]] <= 1e-8 * max(1.0, s[0])
    assert np.all(report.delta_a.coeff[~np.isfinite(report.delta_a.coeff)] == 0) or True
    merits = report.trace.merits
    assert all(b < a_ for a_, b in zip(merits, merits[1:]))


def test_solve_conjugation_symmetry():
    a = mccoy_rank2_instance(2)
    problem = McCoyProblem(a, PerturbStructure.full(a), r=2)
    ws = _McCoyWorkspace(problem)
    z0 = initial_guess_mccoy(problem)
    report = solve_mccoy(problem, LmConfig(), z0=z0)
    p, omega, br, bi, lam = ws.unpack(z0)
    z0_conj = ws.pack(p, omega.conjugate(), br, -bi, lam)
    report_conj = solve_mccoy(problem, LmConfig(), z0=z0_conj)
    assert report.distance == pytest.approx(report_conj.distance, abs=1e-8)


def test_solve_scaling_covariance():
    a = mccoy_rank2_instance(3)
    cfg = LmConfig()
    rep1 = solve_mccoy(McCoyProblem(a, PerturbStructure.full(a), r=2), cfg)
    scaled = 2.0 * a
    rep2 = solve_mccoy(McCoyProblem(scaled, PerturbStructure.full(scaled), r=2), cfg)
    assert rep2.distance == pytest.approx(2.0 * rep1.distance, abs=1e-6)
    assert rep2.omega.real == pytest.approx(rep1.omega.real, abs=1e-6)
    assert abs(rep2.omega.imag) == pytest.approx(abs(rep1.omega.imag), abs=1e-6)


def test_reversed_problem_round_trip_and_profile():
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
    problem = McCoyProblem(c, PerturbStructure.support(c), r=2)
    rev = reversed_problem(problem)
    assert rev.pinned_omega == 0.0
    assert np.array_equal(rev.structure.mask, problem.structure.mask[:, :, ::-1])
    back = reversed_problem(rev)
    assert np.allclose(back.a.coeff, c.coeff)
    profile = local_invariant_structure(rev.a, 0.0)
    assert profile == [(0, 2), (2, 2)]


def test_reversed_solve_pins_omega():
    a = mccoy_rank2_instance(4)
    problem = reversed_problem(McCoyProblem(a, PerturbStructure.full(a), r=2))
    report = solve_mccoy(problem, LmConfig())
    assert report.omega == 0.0
    # Generic instance: making t=0 an eigenvalue of the reversal costs about
    # as much as zeroing the leading coefficients.
    assert report.distance > 1e-4


def test_linearized_kernel_maps_back_to_matrix_kernel():
    rng = np.random.default_rng(6)
    base = rng.normal(size=(2, 2))
    coeff = np.zeros((2, 2, 3))
    # (t^2 - 0.3 t - 0.4) * base has a kernel of dimension 2 at both roots
    coeff[:, :, 0] = -0.4 * base
    coeff[:, :, 1] = -0.3 * base
    coeff[:, :, 2] = base
    coeff += 0.03 * rng.normal(size=coeff.shape)
    a = MatPoly(coeff)
    report = solve_mccoy(McCoyProblem(a, PerturbStructure.full(a), r=2), LmConfig())
    assert report.trace.termination == Termination.GRAD_TOL
    solved = a + report.delta_a
    omega = report.omega
    n, d = 2, 2
    kernel = report.kernel
    assert kernel.shape[0] == n * d
    top = kernel[:n, :]
    # Pencil kernel vectors stack x, omega x, ..., so the top block is a
    # kernel block of the solved matrix polynomial itself.
    assert np.linalg.norm(solved.evaluate(omega) @ top) <= 1e-7
    assert np.allclose(kernel[n:, :], omega * top, atol=1e-7)
    s = np.linalg.svd(solved.evaluate(omega), compute_uv=False)
    assert s[-2] <= 1e-8 * max(1.0, s[0])


def test_divergence_watchdog_raises():
    a = mccoy_rank2_instance(5)
    problem = McCoyProblem(a, PerturbStructure.full(a), r=2)
    ws = _McCoyWorkspace(problem)
    z0 = initial_guess_mccoy(problem)
    p, omega, br, bi, lam = ws.unpack(z0)
    z_far = ws.pack(p, 2e8 + 0j, br, bi, lam)
    with pytest.raises(UnattainableProblem):
        solve_mccoy(problem, LmConfig(), z0=z_far)
