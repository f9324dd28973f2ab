"""Lower McCoy rank approximation through an eigenvalue kernel formulation.

A rank drop of r at some omega is enforced as (P + dP)(omega) B = 0 with
B'B = I_r, where P is the companion pencil of the matrix polynomial (or the
matrix polynomial itself when linearization is off).  Complex quantities are
split into real and imaginary parts so the whole state is real and the
perturbation stays real by construction.

State layout: z = (p, Re w, Im w, Re B, Im B, lam); the two eigenvalue
coordinates are dropped when the problem pins omega (reversal mode).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .detadj import determinant
from .errors import DimensionMismatch, RankDeficientInput, UnattainableProblem
from .gcdkit import TRIM_TOL, eigenvalue_candidates
from .lmsolve import LmConfig, LmTrace, lm_minimize
from .matpoly import NEG_INF, MatPoly, PerturbStructure, Poly

# |omega| beyond this means the eigenvalue is running off to infinity.
_OMEGA_DIVERGENCE = 1e8


@dataclass
class Pencil:
    """Degree-one form P(t) = E t - F encoding the finite spectral structure."""

    e: np.ndarray
    f: np.ndarray

    def evaluate(self, omega) -> np.ndarray:
        return self.e * complex(omega) - self.f


def companion_linearization(a: MatPoly) -> Pencil:
    """Block companion pencil; for degree one this is the input itself."""
    if a.rows != a.cols:
        raise DimensionMismatch("the matrix polynomial must be square")
    n, d = a.rows, a.degree_bound
    if d < 1:
        raise DimensionMismatch("linearization needs degree at least 1")
    size = n * d
    e = np.eye(size)
    e[(d - 1) * n :, (d - 1) * n :] = a.coeff[:, :, d]
    f = np.zeros((size, size))
    for i in range(d - 1):
        f[i * n : (i + 1) * n, (i + 1) * n : (i + 2) * n] = np.eye(n)
    for j in range(d):
        f[(d - 1) * n :, j * n : (j + 1) * n] = -a.coeff[:, :, j]
    return Pencil(e=e, f=f)


@dataclass
class McCoyProblem:
    a: MatPoly
    structure: PerturbStructure
    r: int = 2
    use_linearization: bool | None = None
    pinned_omega: complex | None = None

    def __post_init__(self):
        if self.a.rows != self.a.cols:
            raise DimensionMismatch("the input matrix polynomial must be square")
        if not self.structure.matches(self.a):
            raise DimensionMismatch("perturbation mask does not match the matrix")
        if not 2 <= self.r <= self.a.rows:
            raise DimensionMismatch(f"rank drop {self.r} is out of range for n={self.a.rows}")
        if self.use_linearization is None:
            self.use_linearization = self.a.degree_bound > 1


@dataclass
class McCoyReport:
    delta_a: MatPoly
    distance: float
    omega: complex
    kernel: np.ndarray
    iterations: int
    final_grad_norm: float
    invariant_factor: Poly
    trace: LmTrace
    z: np.ndarray = field(repr=False, default=None)


class _McCoyWorkspace:
    def __init__(self, problem: McCoyProblem):
        self.problem = problem
        a = problem.a
        self.n, self.d = a.rows, a.degree_bound
        self.r = problem.r
        self.linearized = bool(problem.use_linearization) and self.d >= 1
        self.size = self.n * self.d if self.linearized else self.n
        self.m_p = problem.structure.num_params
        self.has_omega = problem.pinned_omega is None
        self.n_w = 2 if self.has_omega else 0
        self.nr = self.size * self.r
        self.n_x = self.m_p + self.n_w + 2 * self.nr
        self.n_c = 2 * self.nr + 2 * self.r * self.r
        self.sl_p = slice(0, self.m_p)
        self.sl_w = slice(self.m_p, self.m_p + self.n_w)
        self.sl_br = slice(self.m_p + self.n_w, self.m_p + self.n_w + self.nr)
        self.sl_bi = slice(self.m_p + self.n_w + self.nr, self.n_x)
        self.sl_lam = slice(self.n_x, self.n_x + self.n_c)
        self.triples = self._param_triples()

    def _param_triples(self):
        n, width = self.n, self.problem.a.degree_bound + 1
        out = []
        for idx in self.problem.structure.param_indices():
            entry, coef = divmod(int(idx), width)
            j, i = divmod(entry, n)
            out.append((i, j, coef))
        return out

    def unpack(self, z):
        z = np.asarray(z, dtype=float)
        if z.size != self.n_x + self.n_c:
            raise DimensionMismatch(f"state has size {z.size}, expected {self.n_x + self.n_c}")
        p = z[self.sl_p]
        if self.has_omega:
            omega = complex(z[self.sl_w][0], z[self.sl_w][1])
        else:
            omega = complex(self.problem.pinned_omega)
        br = z[self.sl_br].reshape(self.size, self.r)
        bi = z[self.sl_bi].reshape(self.size, self.r)
        return p, omega, br, bi, z[self.sl_lam]

    def pack(self, p, omega, br, bi, lam):
        parts = [p]
        if self.has_omega:
            parts.append(np.array([omega.real, omega.imag]))
        parts.extend([br.ravel(), bi.ravel(), lam])
        return np.concatenate(parts)

    def perturbed(self, p) -> MatPoly:
        return self.problem.structure.apply(self.problem.a, p)

    def operator(self, a_pert: MatPoly, omega):
        """Evaluated constraint matrix and its omega derivative."""
        if self.linearized:
            pencil = companion_linearization(a_pert)
            return pencil.evaluate(omega), pencil.e.astype(complex)
        powers = np.array([omega**k for k in range(self.d + 1)])
        m = np.tensordot(a_pert.coeff, powers, axes=([2], [0]))
        dpowers = np.array([k * omega ** (k - 1) if k else 0.0 for k in range(self.d + 1)])
        dm = np.tensordot(a_pert.coeff, dpowers, axes=([2], [0]))
        return m, dm

    def _param_weight(self, i, j, coef, omega):
        """Row, column, and weight of a unit perturbation inside the operator."""
        if not self.linearized:
            return i, j, omega**coef
        base = (self.d - 1) * self.n
        if coef < self.d:
            return base + i, coef * self.n + j, 1.0 + 0.0j
        return base + i, base + j, complex(omega)

    def constraint(self, m, bc) -> np.ndarray:
        mb = m @ bc
        gram = bc.conj().T @ bc
        return np.concatenate(
            [
                mb.real.ravel(),
                mb.imag.ravel(),
                (gram.real - np.eye(self.r)).ravel(),
                gram.imag.ravel(),
            ]
        )

    def constraint_jacobian(self, m, dm, bc, omega) -> np.ndarray:
        size, r, nr = self.size, self.r, self.nr
        j = np.zeros((self.n_c, self.n_x))
        cols = np.arange(r)
        for k, (pi, pj, coef) in enumerate(self.triples):
            row, col, w = self._param_weight(pi, pj, coef, omega)
            contrib = w * bc[col, :]
            j[row * r + cols, k] = contrib.real
            j[nr + row * r + cols, k] = contrib.imag
        if self.has_omega:
            dmb = dm @ bc
            j[:nr, self.sl_w.start] = dmb.real.ravel()
            j[nr : 2 * nr, self.sl_w.start] = dmb.imag.ravel()
            j[:nr, self.sl_w.start + 1] = -dmb.imag.ravel()
            j[nr : 2 * nr, self.sl_w.start + 1] = dmb.real.ravel()
        eye_r = np.eye(r)
        j[:nr, self.sl_br] = np.kron(m.real, eye_r)
        j[:nr, self.sl_bi] = -np.kron(m.imag, eye_r)
        j[nr : 2 * nr, self.sl_br] = np.kron(m.imag, eye_r)
        j[nr : 2 * nr, self.sl_bi] = np.kron(m.real, eye_r)

        br, bi = bc.real, bc.imag
        off3 = 2 * nr
        off4 = 2 * nr + r * r
        unit = np.arange(size) * r
        for a in range(r):
            for b in range(r):
                row3 = off3 + a * r + b
                row4 = off4 + a * r + b
                j[row3, self.sl_br.start + unit + a] += br[:, b]
                j[row3, self.sl_br.start + unit + b] += br[:, a]
                j[row3, self.sl_bi.start + unit + a] += bi[:, b]
                j[row3, self.sl_bi.start + unit + b] += bi[:, a]
                j[row4, self.sl_br.start + unit + a] += bi[:, b]
                j[row4, self.sl_br.start + unit + b] -= bi[:, a]
                j[row4, self.sl_bi.start + unit + b] += br[:, a]
                j[row4, self.sl_bi.start + unit + a] -= br[:, b]
        return j


def mccoy_residual(problem: McCoyProblem, z) -> np.ndarray:
    """Gradient of the Lagrangian of the rank-drop constraints."""
    return _mccoy_residual(_McCoyWorkspace(problem), z)


def _mccoy_residual(ws: _McCoyWorkspace, z) -> np.ndarray:
    p, omega, br, bi, lam = ws.unpack(z)
    bc = br + 1j * bi
    m, dm = ws.operator(ws.perturbed(p), omega)
    jc = ws.constraint_jacobian(m, dm, bc, omega)
    grad_x = jc.T @ lam
    grad_x[ws.sl_p] += 2.0 * p
    return np.concatenate([grad_x, ws.constraint(m, bc)])


def mccoy_hessian(problem: McCoyProblem, z) -> np.ndarray:
    return _mccoy_hessian(_McCoyWorkspace(problem), z)


def _mccoy_hessian(ws: _McCoyWorkspace, z) -> np.ndarray:
    """Exact constraint Jacobian plus a differenced curvature block."""
    z = np.asarray(z, dtype=float)
    p, omega, br, bi, lam = ws.unpack(z)
    bc = br + 1j * bi
    m, dm = ws.operator(ws.perturbed(p), omega)
    jc = ws.constraint_jacobian(m, dm, bc, omega)

    step = np.sqrt(np.finfo(float).eps) * (1.0 + float(np.linalg.norm(z)))
    h_xx = np.empty((ws.n_x, ws.n_x))
    base = _grad_x(ws, z, lam)
    for k in range(ws.n_x):
        probe = z.copy()
        probe[k] += step
        h_xx[:, k] = (_grad_x(ws, probe, lam) - base) / step

    full = np.zeros((ws.n_x + ws.n_c, ws.n_x + ws.n_c))
    full[: ws.n_x, : ws.n_x] = h_xx
    full[: ws.n_x, ws.n_x :] = jc.T
    full[ws.n_x :, : ws.n_x] = jc
    return 0.5 * (full + full.T)


def _grad_x(ws: _McCoyWorkspace, z, lam) -> np.ndarray:
    p, omega, br, bi, _ = ws.unpack(z)
    bc = br + 1j * bi
    m, dm = ws.operator(ws.perturbed(p), omega)
    jc = ws.constraint_jacobian(m, dm, bc, omega)
    grad = jc.T @ lam
    grad[ws.sl_p] += 2.0 * p
    return grad


def initial_guess_mccoy(problem: McCoyProblem) -> np.ndarray:
    """Eigenvalue candidate scoring plus singular vectors of the pencil.

    Candidates are the numeric roots of the determinant together with local
    minima of |det| on a Chebyshev grid; the winner minimizes the singular
    value that must vanish for the requested rank drop.  The kernel block
    comes out orthonormal by construction.
    """
    ws = _McCoyWorkspace(problem)
    a = problem.a
    if problem.pinned_omega is not None:
        omega = complex(problem.pinned_omega)
    else:
        candidates = list(eigenvalue_candidates(a))
        candidates.extend(_grid_extrema(a))
        if not candidates:
            candidates = [0.0 + 0.0j]
        drop_idx = a.rows - problem.r
        best, best_score = None, np.inf
        for cand in candidates:
            s = np.linalg.svd(a.evaluate(cand), compute_uv=False)
            score = s[drop_idx] if drop_idx >= 0 else s[0]
            if score < best_score:
                best, best_score = complex(cand), score
        omega = best
    m, _ = ws.operator(a, omega)
    _, _, vh = np.linalg.svd(m)
    bc = vh[-problem.r :, :].conj().T
    p = np.zeros(ws.m_p)
    lam = np.zeros(ws.n_c)
    return ws.pack(p, omega, bc.real.copy(), bc.imag.copy(), lam)


def _grid_extrema(a: MatPoly):
    """Local minima of |det| on a Chebyshev grid, used as extra candidates."""
    det = determinant(a).trimmed(TRIM_TOL)
    if det.degree() in (NEG_INF, 0):
        return []
    radius = 1.0 + float(np.max(np.abs(a.coeff)))
    grid = radius * np.cos(np.pi * (np.arange(512) + 0.5) / 512)
    grid = np.sort(grid)
    vals = np.abs(det(grid))
    inner = (vals[1:-1] <= vals[:-2]) & (vals[1:-1] <= vals[2:])
    return [complex(x) for x in grid[1:-1][inner]]


def solve_mccoy(problem: McCoyProblem, cfg: LmConfig | None = None, z0=None) -> McCoyReport:
    """Drive the rank-drop system to stationarity and extract the record."""
    cfg = cfg or LmConfig()
    det = determinant(problem.a).trimmed(TRIM_TOL)
    if det.degree() == NEG_INF:
        raise RankDeficientInput("matrix polynomial is singular over the rational functions")
    ws = _McCoyWorkspace(problem)
    if z0 is None:
        z0 = initial_guess_mccoy(problem)

    def guarded_residual(z):
        if ws.has_omega:
            w = z[ws.sl_w]
            if np.hypot(w[0], w[1]) > _OMEGA_DIVERGENCE:
                raise UnattainableProblem(
                    "the eigenvalue is diverging; rerun on the reversed problem"
                )
        return _mccoy_residual(ws, z)

    z, trace = lm_minimize(guarded_residual, lambda v: _mccoy_hessian(ws, v), z0, cfg)
    return _extract_mccoy_report(ws, z, trace)


def _extract_mccoy_report(ws: _McCoyWorkspace, z, trace) -> McCoyReport:
    p, omega, br, bi, _ = ws.unpack(z)
    delta = ws.problem.structure.delta(p)
    if abs(omega.imag) <= 1e-8 * (1.0 + abs(omega.real)):
        factor = Poly([-omega.real, 1.0])
    else:
        factor = Poly([abs(omega) ** 2, -2.0 * omega.real, 1.0])
    return McCoyReport(
        delta_a=delta,
        distance=float(np.linalg.norm(p)),
        omega=omega,
        kernel=br + 1j * bi,
        iterations=trace.iterations,
        final_grad_norm=trace.merits[-1],
        invariant_factor=factor,
        trace=trace,
        z=np.asarray(z, dtype=float),
    )


def reversed_problem(problem: McCoyProblem) -> McCoyProblem:
    """Same search on the coefficient-reversed input with omega pinned to zero."""
    d = problem.a.degree_bound
    return replace(
        problem,
        a=problem.a.reversed(d),
        structure=PerturbStructure(problem.structure.mask[:, :, ::-1].copy()),
        pinned_omega=0.0 + 0.0j,
    )
