"""Built-in oracle suite: independent checks of the core identities.

Each check recomputes an expected value through a route that does not share
code with the operation under test (exact rational arithmetic, finite
differences, brute-force search) and compares.  Used by the `selftest` CLI
subcommand.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .detadj import adjoint, determinant, jacobian_adj, jacobian_det
from .gcdkit import approx_gcd
from .lmsolve import LmConfig, lm_minimize
from .matpoly import MatPoly, PerturbStructure, Poly
from .snf_opt import SnfProblem, solve
from .structured import conv_matrix, generalized_sylvester, kronecker, numeric_rank


def exact_determinant(grid):
    """Cofactor-expansion determinant over Fraction coefficient lists."""
    n = len(grid)
    if n == 1:
        return grid[0][0]
    total = [Fraction(0)]
    for j in range(n):
        minor = [row[:j] + row[j + 1 :] for row in grid[1:]]
        term = _poly_mul(grid[0][j], exact_determinant(minor))
        if j % 2:
            term = [-c for c in term]
        total = _poly_add(total, term)
    return total


def _poly_mul(a, b):
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            out[i + j] += x * y
    return out


def _poly_add(a, b):
    out = [Fraction(0)] * max(len(a), len(b))
    for i, x in enumerate(a):
        out[i] += x
    for i, x in enumerate(b):
        out[i] += x
    return out


def exact_gcd_degree(polys):
    """Degree of the GCD of Fraction coefficient lists via Euclid."""

    def trim(p):
        while len(p) > 1 and p[-1] == 0:
            p = p[:-1]
        return p

    def rem(a, b):
        a, b = trim(a[:]), trim(b[:])
        while len(a) >= len(b) and any(a):
            factor = a[-1] / b[-1]
            shift = len(a) - len(b)
            for i, c in enumerate(b):
                a[shift + i] -= factor * c
            a = trim(a)
            if not any(a):
                break
        return a

    acc = None
    for p in polys:
        p = trim(list(p))
        if not any(p):
            continue
        acc = p if acc is None else _euclid(acc, p, rem)
    if acc is None:
        return -1
    return len(trim(acc)) - 1


def _euclid(a, b, rem):
    def trim(p):
        while len(p) > 1 and p[-1] == 0:
            p = p[:-1]
        return p

    a, b = trim(a), trim(b)
    while any(b):
        a, b = b, rem(a, b)
        b = trim(b)
    return a


def _random_rational_matpoly(rng, n, d):
    ints = rng.integers(-6, 7, size=(n, n, d + 1))
    grid = [[[Fraction(int(v)) for v in ints[i, j]] for j in range(n)] for i in range(n)]
    return MatPoly(ints.astype(float)), grid


def run_selftest(seed: int = 0):
    """Yield (name, ok, detail) for each oracle check."""
    rng = np.random.default_rng(seed)

    a = Poly(rng.normal(size=4))
    b = Poly(rng.normal(size=3))
    lhs = conv_matrix(a, b.declared_degree) @ b.coeffs
    rhs = np.convolve(a.coeffs, b.coeffs)
    yield "convolution matrix vs direct product", np.allclose(lhs, rhs, atol=1e-12), ""

    x = rng.normal(size=(2, 3))
    y = rng.normal(size=(3, 2))
    m = rng.normal(size=(2, 2))
    lhs = kronecker(y.T, m) @ x.reshape(-1, order="F")
    rhs = (m @ x @ y).reshape(-1, order="F")
    yield "kronecker vec identity", np.allclose(lhs, rhs, atol=1e-12), ""

    mat, grid = _random_rational_matpoly(rng, 3, 2)
    exact = np.array([float(c) for c in exact_determinant(grid)])
    got = determinant(mat).coeffs
    ok = np.allclose(got[: exact.size], exact, atol=1e-9 * (1 + np.abs(exact).max()))
    yield "determinant vs exact cofactor expansion", ok, ""

    adj = adjoint(mat)
    det = determinant(mat)
    prod = mat @ adj
    err = 0.0
    for i in range(3):
        for j in range(3):
            want = det.padded(prod.degree_bound).coeffs if i == j else 0.0
            err = max(err, float(np.max(np.abs(prod.entry(i, j).coeffs - want))))
    yield "adjoint identity A adj(A) = det(A) I", err <= 1e-9 * (1 + mat.frobenius_norm() ** 3), f"err={err:.2e}"

    small = MatPoly(rng.normal(size=(2, 2, 2)))
    for name, fn in (("det", jacobian_det), ("adj", jacobian_adj)):
        jac = fn(small)
        eps = 1e-6
        cols = []
        for k in range(small.rows * small.cols * (small.degree_bound + 1)):
            e = np.zeros(small.rows * small.cols * (small.degree_bound + 1))
            e[k] = eps
            bump = MatPoly.unvec(e, small.rows, small.cols, small.degree_bound)
            if name == "det":
                plus, minus = determinant(small + bump), determinant(small - bump)
                cols.append((plus - minus).coeffs[: jac.shape[0]] / (2 * eps))
            else:
                plus, minus = adjoint(small + bump), adjoint(small - bump)
                cols.append((plus - minus).vec(small.degree_bound) / (2 * eps))
        fd = np.array(cols).T
        rel = np.linalg.norm(jac - fd) / np.linalg.norm(fd)
        yield f"jacobian_{name} vs central differences", rel <= 1e-5, f"rel={rel:.2e}"

    ints = rng.integers(-5, 6, size=(2, 4))
    common = [Fraction(1), Fraction(1)]  # t + 1
    polys = []
    for row in ints:
        polys.append(_poly_mul([Fraction(int(v)) for v in row], common))
    gdeg = exact_gcd_degree(polys)
    fs = [Poly([float(c) for c in p]) for p in polys]
    syl = generalized_sylvester(fs, [p.declared_degree for p in fs])
    nullity = syl.shape[1] - numeric_rank(syl)
    yield "sylvester nullity vs exact gcd degree", nullity == gdeg, f"nullity={nullity} gcd_deg={gdeg}"

    z, trace = lm_minimize(
        lambda v: np.array([v[0] ** 2 - 2.0]),
        lambda v: np.array([[2.0 * v[0]]]),
        np.array([1.0]),
        LmConfig(),
    )
    yield "regularized newton on z^2 = 2", abs(z[0] - np.sqrt(2)) < 1e-9, f"z={z[0]!r}"

    # Quadratics with close-by real roots, so the nearest common root is
    # interior and the global search basin is unambiguous.
    f = [0.594, -1.53, 0.9]  # 0.9 (t - 0.6)(t - 1.1)
    g = [-0.56, 0.13, 0.7]   # 0.7 (t - 0.8)(t + 1.0)
    diag = MatPoly.from_entries([[f, [0, 0, 0]], [[0, 0, 0], g]])
    report = solve(SnfProblem(diag, PerturbStructure.degree(diag), deg_h=1), LmConfig())
    grid_r = np.linspace(-8.0, 8.0, 400001)
    fv = np.polynomial.polynomial.polyval(grid_r, np.array(f))
    gv = np.polynomial.polynomial.polyval(grid_r, np.array(g))
    weight = 1.0 + grid_r**2 + grid_r**4
    best = float(np.sqrt(np.min((fv**2 + gv**2) / weight)))
    ok = abs(report.distance - best) <= 1e-4 * (1 + best)
    yield "snf solve vs diagonal projection search", ok, f"solver={report.distance:.8f} grid={best:.8f}"
