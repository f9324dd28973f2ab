"""Nearest matrix polynomial with a non-trivial Smith form.

The constraint Adj(A + dA) = F h, with h monic of prescribed degree, forces
the adjoint entries to share the divisor h, which is equivalent to the last
two invariant factors being non-trivial.  The first-order optimality system
of the Lagrangian is driven to zero with the regularized Newton solver.

State layout: z = (p, vec(F), h, lam) where p holds the masked perturbation
parameters, F is the cofactor matrix (degree bound (n-1)d - deg_h), h holds
all deg_h + 1 coefficients (the monic normalization is a constraint), and
lam stacks one multiplier per adjoint coefficient plus one for the
normalization row.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .detadj import _AdjointSystem, adjoint
from .errors import DimensionMismatch, RankDeficientInput, UnattainableProblem
from .gcdkit import approx_gcd_candidates, detect_unattainable, local_invariant_structure
from .lmsolve import LmConfig, LmTrace, Termination, lm_minimize
from .matpoly import MatPoly, PerturbStructure, Poly
from .structured import conv_matrix, numeric_rank


@dataclass
class SnfProblem:
    a: MatPoly
    structure: PerturbStructure
    deg_h: int = 2
    deg_cofactor: int | None = None
    use_reversal: bool = False

    def __post_init__(self):
        if self.a.rows != self.a.cols:
            raise DimensionMismatch("the input matrix polynomial must be square")
        if not self.structure.matches(self.a):
            raise DimensionMismatch("perturbation mask does not match the matrix")
        n, d = self.a.rows, self.a.degree_bound
        if self.deg_cofactor is None:
            self.deg_cofactor = (n - 1) * d - self.deg_h
        if self.deg_h < 1 or self.deg_cofactor < 0:
            raise DimensionMismatch(
                f"divisor degree {self.deg_h} is infeasible for n={n}, d={d}"
            )


@dataclass
class SnfReport:
    delta_a: MatPoly
    distance: float
    h: Poly
    cofactors: MatPoly
    iterations: int
    final_grad_norm: float
    omega: complex
    invariant_structure: list
    certified: bool
    trace: LmTrace
    z: np.ndarray = field(repr=False, default=None)


class _Workspace:
    """Index bookkeeping and constant blocks for one problem instance."""

    def __init__(self, problem: SnfProblem):
        self.problem = problem
        a = problem.a
        self.n = a.rows
        self.d = a.degree_bound
        self.dadj = (self.n - 1) * self.d
        self.deg_f = problem.deg_cofactor
        self.deg_h = problem.deg_h
        if self.deg_f + self.deg_h != self.dadj:
            # Cofactor and divisor degrees must tile the adjoint degree bound.
            raise DimensionMismatch(
                f"deg_cofactor {self.deg_f} + deg_h {self.deg_h} != {self.dadj}"
            )
        self.m_p = problem.structure.num_params
        self.n_entries = self.n * self.n
        self.n_f = self.n_entries * (self.deg_f + 1)
        self.n_h = self.deg_h + 1
        self.n_c = self.n_entries * (self.dadj + 1) + 1
        self.n_x = self.m_p + self.n_f + self.n_h
        self.sl_p = slice(0, self.m_p)
        self.sl_f = slice(self.m_p, self.m_p + self.n_f)
        self.sl_h = slice(self.m_p + self.n_f, self.n_x)
        self.sl_lam = slice(self.n_x, self.n_x + self.n_c)
        self.param_idx = problem.structure.param_indices()
        self._cache_key = None
        self._cache = None

    def pack(self, p, f_vec, h, lam) -> np.ndarray:
        return np.concatenate([p, f_vec, h, lam])

    def unpack(self, z):
        z = np.asarray(z, dtype=float)
        if z.size != self.n_x + self.n_c:
            raise DimensionMismatch(f"state has size {z.size}, expected {self.n_x + self.n_c}")
        return z[self.sl_p], z[self.sl_f], z[self.sl_h], z[self.sl_lam]

    def perturbed(self, p) -> MatPoly:
        return self.problem.structure.apply(self.problem.a, p)

    def _maybe_reverse_vec(self, v):
        if not self.problem.use_reversal:
            return v
        return v.reshape(self.n_entries, self.dadj + 1)[:, ::-1].reshape(-1)

    def _maybe_reverse_rows(self, m):
        if not self.problem.use_reversal:
            return m
        shape = m.shape
        return m.reshape(self.n_entries, self.dadj + 1, shape[1])[:, ::-1, :].reshape(shape)

    def system_at(self, p) -> _AdjointSystem:
        """Adjoint system at A + delta(p); one-slot cache shared by g and H."""
        key = np.asarray(p, dtype=float).tobytes()
        if self._cache_key != key:
            system = _AdjointSystem(self.perturbed(p))
            system.require_full_rank()
            self._cache_key = key
            self._cache = system
        return self._cache

    def adjoint_vec(self, system: _AdjointSystem) -> np.ndarray:
        return self._maybe_reverse_vec(system.adj.vec(self.dadj))

    def adjoint_jacobian(self, system: _AdjointSystem) -> np.ndarray:
        return self._maybe_reverse_rows(system.jacobian()[:, self.param_idx])

    def adjoint_gradient(self, system: _AdjointSystem, lam_c) -> np.ndarray:
        """(R J_adj E)^T lam without forming the Jacobian."""
        lam_eff = self._maybe_reverse_vec(lam_c)
        return system.jacobian_transpose_apply(lam_eff)[self.param_idx]

    def product_vec(self, f_vec, h) -> np.ndarray:
        conv = conv_matrix(Poly(h), self.deg_f)
        blocks = f_vec.reshape(self.n_entries, self.deg_f + 1)
        return (blocks @ conv.T).reshape(-1)

    def divisor_blocks(self, h) -> np.ndarray:
        """Block diagonal matrix mapping vec(F) to vec(F h)."""
        return np.kron(np.eye(self.n_entries), conv_matrix(Poly(h), self.deg_f))

    def cofactor_blocks(self, f_vec) -> np.ndarray:
        """Stacked matrix mapping h to vec(F h)."""
        blocks = f_vec.reshape(self.n_entries, self.deg_f + 1)
        return np.vstack([conv_matrix(Poly(b), self.deg_h) for b in blocks])

    def constraint(self, system, f_vec, h) -> np.ndarray:
        residual = self.adjoint_vec(system) - self.product_vec(f_vec, h)
        return np.concatenate([residual, [h[-1] - 1.0]])

    def constraint_jacobian(self, system, f_vec, h) -> np.ndarray:
        j = np.zeros((self.n_c, self.n_x))
        j[:-1, self.sl_p] = self.adjoint_jacobian(system)
        j[:-1, self.sl_f] = -self.divisor_blocks(h)
        j[:-1, self.sl_h] = -self.cofactor_blocks(f_vec)
        j[-1, self.n_x - 1] = 1.0
        return j


def kkt_residual(problem: SnfProblem, z) -> np.ndarray:
    """Gradient of the Lagrangian at the packed state z."""
    return _kkt_residual(_Workspace(problem), z)


def _kkt_residual(ws: _Workspace, z) -> np.ndarray:
    p, f_vec, h, lam = ws.unpack(z)
    system = ws.system_at(p)
    lam_c, lam_n = lam[:-1], lam[-1]
    grad_p = 2.0 * p + ws.adjoint_gradient(system, lam_c)
    lam_blocks = lam_c.reshape(ws.n_entries, ws.dadj + 1)
    conv_h = conv_matrix(Poly(h), ws.deg_f)
    grad_f = -(lam_blocks @ conv_h).reshape(-1)
    grad_h = -(ws.cofactor_blocks(f_vec).T @ lam_c)
    grad_h[-1] += lam_n
    c = ws.constraint(system, f_vec, h)
    return np.concatenate([grad_p, grad_f, grad_h, c])


def kkt_hessian(problem: SnfProblem, z) -> np.ndarray:
    ws = _Workspace(problem)
    return _kkt_hessian(ws, z)


def _kkt_hessian(ws: _Workspace, z) -> np.ndarray:
    """Hessian of the Lagrangian: exact except the adjoint curvature block.

    The (p, p) curvature of the adjoint constraint term is differenced from
    the exact gradient; everything else (the quadratic objective, the
    bilinear F h coupling, the constraint Jacobian) is assembled exactly.
    The result is symmetrized.
    """
    p, f_vec, h, lam = ws.unpack(z)
    system = ws.system_at(p)
    lam_c = lam[:-1]
    j = ws.constraint_jacobian(system, f_vec, h)

    h_xx = np.zeros((ws.n_x, ws.n_x))
    h_xx[ws.sl_p, ws.sl_p] = 2.0 * np.eye(ws.m_p) + _adjoint_curvature(ws, p, lam_c, z)

    # Cross block between cofactors and divisor: bilinear, hence exact.
    lam_blocks = lam_c.reshape(ws.n_entries, ws.dadj + 1)
    cross = np.zeros((ws.n_f, ws.n_h))
    for e in range(ws.n_entries):
        for k in range(ws.deg_f + 1):
            cross[e * (ws.deg_f + 1) + k, :] = -lam_blocks[e, k : k + ws.n_h]
    h_xx[ws.sl_f, ws.sl_h] = cross
    h_xx[ws.sl_h, ws.sl_f] = cross.T

    full = np.zeros((ws.n_x + ws.n_c, ws.n_x + ws.n_c))
    full[: ws.n_x, : ws.n_x] = h_xx
    full[: ws.n_x, ws.n_x :] = j.T
    full[ws.n_x :, : ws.n_x] = j
    return 0.5 * (full + full.T)


def _adjoint_curvature(ws: _Workspace, p, lam_c, z) -> np.ndarray:
    """Central difference of the adjoint part of grad_p in each parameter.

    Central differencing keeps this block accurate enough that the terminal
    iterations stay quadratic; a probe that lands on a rank deficiency falls
    back to a one-sided difference.
    """
    if ws.m_p == 0:
        return np.zeros((0, 0))
    step = np.cbrt(np.finfo(float).eps) * (1.0 + float(np.linalg.norm(z)))

    def adj_grad(q):
        system = _AdjointSystem(ws.perturbed(q))
        system.require_full_rank()
        return ws.adjoint_gradient(system, lam_c)

    out = np.empty((ws.m_p, ws.m_p))
    for k in range(ws.m_p):
        plus, minus = p.copy(), p.copy()
        plus[k] += step
        minus[k] -= step
        try:
            out[:, k] = (adj_grad(plus) - adj_grad(minus)) / (2.0 * step)
        except RankDeficientInput:
            base = ws.adjoint_gradient(ws.system_at(p), lam_c)
            try:
                out[:, k] = (adj_grad(plus) - base) / step
            except RankDeficientInput:
                out[:, k] = (base - adj_grad(minus)) / step
    return 0.5 * (out + out.T)


def initial_guess(problem: SnfProblem) -> np.ndarray:
    """Zero perturbation, divisor and cofactors from an approximate GCD.

    Among the candidate divisor fits, the one whose root comes closest to
    dropping the rank of A by two wins: the selection score is the
    second-smallest singular value of A at the candidate root.
    """
    ws = _Workspace(problem)
    adj = adjoint(problem.a)
    entries = adj.pvec()
    if problem.use_reversal:
        entries = [q.reversed(ws.dadj) for q in entries]
    fits = approx_gcd_candidates(entries, problem.deg_h, [ws.dadj] * len(entries))
    fit = min(fits, key=lambda cand: _rank_drop_score(ws, cand))
    f_vec = np.concatenate([u.padded(ws.deg_f).coeffs for u in fit.cofactors])
    h = fit.h.padded(ws.deg_h).coeffs
    p = np.zeros(ws.m_p)
    j = ws.constraint_jacobian(ws.system_at(p), f_vec, h)
    rhs = np.zeros(ws.n_x)
    rhs[ws.sl_p] = 2.0 * p
    lam, *_ = np.linalg.lstsq(j.T, -rhs, rcond=None)
    return ws.pack(p, f_vec, h, lam)


def _rank_drop_score(ws: _Workspace, fit) -> float:
    """Second-smallest singular value at the divisor roots (min over roots).

    In reversal mode the reversed matrix polynomial is evaluated at the raw
    roots, so a root at zero scores the eigenvalue at infinity.
    """
    h = fit.h.trimmed(1e-12)
    if h.degree() < 1:
        return np.inf
    roots = np.roots(h.coeffs[::-1])
    target = ws.problem.a.reversed() if ws.problem.use_reversal else ws.problem.a
    best = np.inf
    for root in roots:
        s = np.linalg.svd(target.evaluate(root), compute_uv=False)
        score = s[-2] if s.size >= 2 else s[-1]
        best = min(best, float(score))
    return best


def solve(problem: SnfProblem, cfg: LmConfig | None = None) -> SnfReport:
    """Run the constrained iteration and extract the solution record."""
    cfg = cfg or LmConfig()
    if not problem.use_reversal and detect_unattainable(problem.a, problem.structure):
        raise UnattainableProblem(
            "the nearest non-trivial Smith form is at infinity; rerun with use_reversal"
        )
    ws = _Workspace(problem)
    z0 = initial_guess(problem)
    z, trace = lm_minimize(lambda v: _kkt_residual(ws, v), lambda v: _kkt_hessian(ws, v), z0, cfg)
    return _extract_report(ws, z, trace, cfg)


def _extract_report(ws: _Workspace, z, trace, cfg: LmConfig) -> SnfReport:
    problem = ws.problem
    p, f_vec, h_coeffs, _ = ws.unpack(z)
    delta = problem.structure.delta(p)
    h = Poly(h_coeffs)
    if abs(h.coeffs[-1]) > 1e-8:
        h = Poly(h.coeffs / h.coeffs[-1])
    cofactors = MatPoly.unvec(f_vec, ws.n, ws.n, ws.deg_f)
    omega = _divisor_root(ws, h, problem.a + delta)
    a_solved = problem.a + delta
    target = a_solved.reversed(problem.a.degree_bound) if problem.use_reversal else a_solved
    probe = omega if not problem.use_reversal else (0.0 if omega == np.inf else 1.0 / omega)
    try:
        structure = local_invariant_structure(target, probe)
    except (ValueError, np.linalg.LinAlgError):
        structure = []
    report = SnfReport(
        delta_a=delta,
        distance=float(np.linalg.norm(p)),
        h=h,
        cofactors=cofactors,
        iterations=trace.iterations,
        final_grad_norm=trace.merits[-1],
        omega=omega,
        invariant_structure=structure,
        certified=False,
        trace=trace,
        z=np.asarray(z, dtype=float),
    )
    if trace.termination in (Termination.GRAD_TOL, Termination.STEP_TOL):
        report.certified = certify(problem, report, cfg)[0]
    return report


def _divisor_root(ws: _Workspace, h: Poly, a_solved: MatPoly):
    trimmed = h.trimmed(1e-12)
    roots = np.roots(trimmed.coeffs[::-1]) if trimmed.degree() >= 1 else np.array([])
    if roots.size == 0:
        return complex(0.0)
    complex_roots = roots[np.abs(roots.imag) > 1e-10]
    if complex_roots.size:
        root = complex_roots[np.argmax(complex_roots.imag)]
    else:
        # Several real roots: report the one where the rank actually drops.
        scores = []
        for r in roots:
            s = np.linalg.svd(a_solved.evaluate(r.real), compute_uv=False)
            scores.append(s[-2] if s.size >= 2 else s[-1])
        root = complex(roots[int(np.argmin(scores))].real)
    if ws.problem.use_reversal:
        # A double root at zero is only accurate to sqrt(eps), so anything
        # below that maps to the eigenvalue at infinity.
        return np.inf if abs(root) < 1e-6 else 1.0 / root
    return root


def certify(problem: SnfProblem, report: SnfReport, cfg: LmConfig | None = None):
    """Second-order check: Hessian positive semidefinite on the constraint kernel.

    Returns (certified, sigma_min) where sigma_min is the smallest singular
    value of the stacked [H_xx; J], the computable part of the local error
    bound constant.
    """
    cfg = cfg or LmConfig()
    ws = _Workspace(problem)
    if report.z is None:
        raise DimensionMismatch("the report carries no solver state to certify")
    z = report.z
    p, f_vec, h, lam = ws.unpack(z)
    j = ws.constraint_jacobian(ws.system_at(p), f_vec, h)
    h_full = _kkt_hessian(ws, z)
    h_xx = h_full[: ws.n_x, : ws.n_x]

    u, s, vt = np.linalg.svd(j)
    rank = int(np.count_nonzero(s > s[0] * max(j.shape) * 1e-12)) if s.size and s[0] else 0
    kernel = vt[rank:].T
    if kernel.shape[1]:
        eigs = np.linalg.eigvalsh(kernel.T @ h_xx @ kernel)
        kernel_ok = bool(eigs.min() > -1e-8)
    else:
        kernel_ok = True
    grad_ok = report.final_grad_norm <= cfg.grad_tol
    sigma_min = float(np.linalg.svd(np.vstack([h_xx, j]), compute_uv=False)[-1])
    return bool(kernel_ok and grad_ok), sigma_min


def solve_best_degree(a: MatPoly, structure: PerturbStructure, cfg: LmConfig | None = None,
                      use_reversal: bool = False) -> SnfReport:
    """Try divisor degrees 1 and 2 and keep the smaller distance."""
    n, d = a.rows, a.degree_bound
    reports = []
    errors = []
    for deg_h in (1, 2):
        if (n - 1) * d - deg_h < 0:
            continue
        try:
            problem = SnfProblem(a, structure, deg_h=deg_h, use_reversal=use_reversal)
            reports.append(solve(problem, cfg))
        except (RankDeficientInput, UnattainableProblem) as exc:
            errors.append(exc)
    if not reports:
        raise errors[0] if errors else UnattainableProblem("no feasible divisor degree")
    converged = [r for r in reports if r.trace.termination
                 in (Termination.GRAD_TOL, Termination.STEP_TOL)]
    pool = converged or reports
    return min(pool, key=lambda r: r.distance)
