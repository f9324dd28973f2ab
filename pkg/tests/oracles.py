"""Independent oracles used across the test suite.

Everything here recomputes expected values through routes that share no code
with the library: exact rational arithmetic, finite differences, and brute
force searches.
"""

from fractions import Fraction

import numpy as np

from polysmith.matpoly import MatPoly


def frac_poly_mul(a, b):
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            out[i + j] += x * y
    return out


def frac_poly_add(a, b):
    out = [Fraction(0)] * max(len(a), len(b))
    for i, x in enumerate(a):
        out[i] += x
    for i, x in enumerate(b):
        out[i] += x
    return out


def frac_trim(p):
    while len(p) > 1 and p[-1] == 0:
        p = p[:-1]
    return p


def exact_determinant(grid):
    """Cofactor expansion over grids of Fraction coefficient lists."""
    n = len(grid)
    if n == 1:
        return list(grid[0][0])
    total = [Fraction(0)]
    for j in range(n):
        minor = [row[:j] + row[j + 1 :] for row in grid[1:]]
        term = frac_poly_mul(grid[0][j], exact_determinant(minor))
        if j % 2:
            term = [-c for c in term]
        total = frac_poly_add(total, term)
    return total


def exact_poly_rem(a, b):
    a, b = frac_trim(list(a)), frac_trim(list(b))
    while len(a) >= len(b) and any(a):
        factor = a[-1] / b[-1]
        shift = len(a) - len(b)
        for i, c in enumerate(b):
            a[shift + i] -= factor * c
        a = frac_trim(a)
        if not any(a):
            break
    return a


def exact_gcd(a, b):
    a, b = frac_trim(list(a)), frac_trim(list(b))
    while any(b):
        a, b = b, exact_poly_rem(a, b)
        b = frac_trim(b)
    return frac_trim(a)


def exact_gcd_degree(polys):
    """Degree of the monic GCD of Fraction coefficient lists (zero entries skipped)."""
    acc = None
    for p in polys:
        p = frac_trim(list(p))
        if not any(p):
            continue
        acc = p if acc is None else exact_gcd(acc, p)
    if acc is None:
        return None
    return len(frac_trim(acc)) - 1


def int_grid_to_fractions(arr):
    """Integer coefficient array (n, n, d+1) to Fraction coefficient lists."""
    n = arr.shape[0]
    return [
        [[Fraction(int(c)) for c in arr[i, j]] for j in range(arr.shape[1])]
        for i in range(n)
    ]


def random_integer_matpoly(rng, n, d, low=-6, high=7):
    """Matrix polynomial with small integer coefficients (exactly representable)."""
    ints = rng.integers(low, high, size=(n, n, d + 1))
    return MatPoly(ints.astype(float)), int_grid_to_fractions(ints)


def random_full_rank_matpoly(rng, n, d, scale=1.0):
    """Dense Gaussian matrix polynomial, resampled until clearly full rank."""
    while True:
        a = MatPoly(scale * rng.normal(size=(n, n, d + 1)))
        dets = [np.linalg.det(a.evaluate(z)) for z in (0.31, -0.77, 1.23j)]
        if max(abs(v) for v in dets) > 1e-6:
            return a


def fd_columns(fn, x0, eps=1e-6):
    """Central-difference Jacobian of a vector function, one column per coordinate."""
    x0 = np.asarray(x0, dtype=float)
    cols = []
    for k in range(x0.size):
        step = np.zeros_like(x0)
        step[k] = eps
        cols.append((fn(x0 + step) - fn(x0 - step)) / (2 * eps))
    return np.array(cols).T


def golden_minimize(fn, lo, hi, iters=120):
    for _ in range(iters):
        m1 = lo + 0.381966011 * (hi - lo)
        m2 = hi - 0.381966011 * (hi - lo)
        if fn(m1) < fn(m2):
            hi = m2
        else:
            lo = m1
    mid = 0.5 * (lo + hi)
    return mid, fn(mid)


def grid_then_golden(fn, lo, hi, samples=4001):
    grid = np.linspace(lo, hi, samples)
    vals = np.array([fn(x) for x in grid])
    i = int(np.argmin(vals))
    a = grid[max(i - 1, 0)]
    b = grid[min(i + 1, samples - 1)]
    return golden_minimize(fn, a, b)


def diagonal_snf_instance(seed):
    """Seeded 2x2 diagonal instance with an interior nearest-common-root."""
    rng = np.random.default_rng(100 + seed)
    r1, r2 = rng.uniform(-1.5, 1.5, 2)
    f = np.polynomial.polynomial.polyfromroots([r1, r2]) * rng.uniform(0.5, 1.5)
    r3, r4 = r1 + rng.uniform(-0.5, 0.5), rng.uniform(-1.5, 1.5)
    g = np.polynomial.polynomial.polyfromroots([r3, r4]) * rng.uniform(0.5, 1.5)
    mat = MatPoly.from_entries([[list(f), [0, 0, 0]], [[0, 0, 0], list(g)]])
    return mat, f, g


def diagonal_projection_distance(f, g):
    """Smallest coefficient change giving the two quadratics a common real root."""

    def cost(r):
        fr = np.polynomial.polynomial.polyval(r, f)
        gr = np.polynomial.polynomial.polyval(r, g)
        return (fr**2 + gr**2) / (1.0 + r**2 + r**4)

    _, val = grid_then_golden(cost, -4.0, 4.0, 8001)
    return float(np.sqrt(val))


def mccoy_rank2_instance(seed):
    """Seeded 2x2 instance with a planted near rank-drop-2 point."""
    rng = np.random.default_rng(300 + seed)
    omega = rng.uniform(-1.2, 1.2)
    base = rng.normal(size=(2, 2))
    d = 1
    coeff = np.zeros((2, 2, d + 1))
    # (t - omega) * base plus a small generic perturbation
    coeff[:, :, 0] = -omega * base
    coeff[:, :, 1] = base
    coeff += 0.05 * rng.normal(size=coeff.shape)
    return MatPoly(coeff)


def mccoy_all_entries_distance(a):
    """Brute-force distance for a full rank drop of a 2x2 at a real point."""
    d = a.degree_bound

    def cost(w):
        num = 0.0
        for i in range(a.rows):
            for j in range(a.cols):
                num += abs(np.polynomial.polynomial.polyval(w, a.coeff[i, j])) ** 2
        return num / sum(w ** (2 * k) for k in range(d + 1))

    _, val = grid_then_golden(cost, -5.0, 5.0, 20001)
    return float(np.sqrt(val))
