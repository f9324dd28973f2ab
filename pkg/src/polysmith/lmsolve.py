"""Regularized Newton (Levenberg-Marquardt) solver for nonlinear systems.

Solves g(z) = 0 by repeatedly solving (H^T H + nu I) dz = -H^T g with
H the Jacobian of g, using ||g||_2 as the merit function.  The shift nu
tracks the merit, which yields quadratic local convergence on systems
satisfying a local error bound while keeping every step a descent
direction for the merit.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import LinearSolveFailure, RankDeficientInput


class Termination(str, enum.Enum):
    GRAD_TOL = "GradTol"
    STEP_TOL = "StepTol"
    MAX_ITER = "MaxIter"
    STALLED = "Stalled"


@dataclass
class LmConfig:
    max_iter: int = 500
    grad_tol: float = 1e-12
    step_tol: float = 1e-14
    nu_floor: float = 1e-14
    nu_scale: float = 1.0

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        for name in ("grad_tol", "step_tol", "nu_floor", "nu_scale"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class LmTrace:
    """Accepted-iterate history: merits[0] is the merit at the initial point."""

    merits: list = field(default_factory=list)
    nus: list = field(default_factory=list)
    step_norms: list = field(default_factory=list)
    termination: Termination = Termination.MAX_ITER

    @property
    def iterations(self) -> int:
        return len(self.step_norms)


def lm_step(g, h, nu: float) -> np.ndarray:
    """Solve the shifted normal equations (H^T H + nu I) dz = -H^T g."""
    g = np.asarray(g, dtype=float)
    h = np.asarray(h, dtype=float)
    if h.shape[0] != g.size:
        raise LinearSolveFailure(f"Jacobian has {h.shape[0]} rows for {g.size} residuals")
    if nu <= 0:
        raise LinearSolveFailure("the shift must be positive")
    rhs = -(h.T @ g)
    m = h.T @ h + nu * np.eye(h.shape[1])
    try:
        dz = np.linalg.solve(m, rhs)
        residual = m @ dz - rhs
        if np.linalg.norm(residual) > 1e-10 * (1.0 + np.linalg.norm(rhs)):
            dz = dz - np.linalg.solve(m, residual)
            residual = m @ dz - rhs
    except np.linalg.LinAlgError as exc:
        raise LinearSolveFailure(str(exc)) from exc
    if np.linalg.norm(residual) > 1e-10 * (1.0 + np.linalg.norm(rhs)):
        raise LinearSolveFailure("shifted normal equations solved inaccurately")
    return dz


def lm_minimize(g_fn, h_fn, z0, cfg: LmConfig | None = None):
    """Drive g to zero from z0; returns (z, trace).

    Steps are accepted only when they strictly decrease ||g||; a rejected
    step inflates nu tenfold and retries, giving up as Stalled after 20
    retries.  A RankDeficientInput raised by g_fn during a trial step is
    treated as a rejection, so the iterate backs away from the wall.
    """
    cfg = cfg or LmConfig()
    z = np.asarray(z0, dtype=float).copy()
    g = np.asarray(g_fn(z), dtype=float)
    merit = float(np.linalg.norm(g))
    trace = LmTrace(merits=[merit])

    for _ in range(cfg.max_iter):
        if merit <= cfg.grad_tol:
            trace.termination = Termination.GRAD_TOL
            return z, trace
        h = np.asarray(h_fn(z), dtype=float)
        nu = max(cfg.nu_floor, cfg.nu_scale * merit)
        accepted = False
        for _ in range(21):
            dz = lm_step(g, h, nu)
            z_trial = z + dz
            try:
                g_trial = np.asarray(g_fn(z_trial), dtype=float)
            except RankDeficientInput:
                nu *= 10.0
                continue
            merit_trial = float(np.linalg.norm(g_trial))
            if merit_trial < merit:
                accepted = True
                break
            nu *= 10.0
        if not accepted:
            trace.termination = Termination.STALLED
            return z, trace
        z, g, merit = z_trial, g_trial, merit_trial
        trace.merits.append(merit)
        trace.nus.append(nu)
        trace.step_norms.append(float(np.linalg.norm(dz)))
        if merit <= cfg.grad_tol:
            trace.termination = Termination.GRAD_TOL
            return z, trace
        if np.linalg.norm(dz) <= cfg.step_tol:
            trace.termination = Termination.STEP_TOL
            return z, trace

    trace.termination = Termination.MAX_ITER
    return z, trace
