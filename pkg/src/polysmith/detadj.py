"""Determinant and adjoint of matrix polynomials, their Jacobians, and bounds.

Both the determinant and the adjoint are computed by evaluation at scaled
roots of unity followed by inverse-FFT interpolation.  The point set is
conjugate symmetric, so real inputs give real coefficients up to rounding,
and the Vandermonde system is perfectly conditioned.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch, RankDeficientInput
from .matpoly import MatPoly, Poly
from .structured import block_conv_matrix, kronecker, numeric_rank


def _require_square(a: MatPoly):
    if a.rows != a.cols:
        raise DimensionMismatch(f"matrix is {a.rows}x{a.cols}, expected square")


def _eval_radius(a: MatPoly) -> float:
    # Plain roots of unity: value growth on the unit circle is bounded by the
    # coefficient 1-norm, so interpolated coefficients keep full relative
    # accuracy regardless of the input scale.  Scaling the radius with the
    # coefficient magnitude amplifies high-degree values catastrophically.
    return 1.0


def _interp_nodes(count: int, radius: float) -> np.ndarray:
    return radius * np.exp(-2j * np.pi * np.arange(count) / count)


def _batch_evaluate(a: MatPoly, nodes: np.ndarray) -> np.ndarray:
    """A(z) for every node at once; shape (len(nodes), rows, cols)."""
    vals = np.polynomial.polynomial.polyval(nodes, a.coeff.transpose(2, 0, 1))
    return vals.transpose(2, 0, 1)


def _coeffs_from_values(values: np.ndarray, radius: float) -> np.ndarray:
    """Interpolate values taken at the standard node set; first axis is the node."""
    count = values.shape[0]
    coeff = np.fft.ifft(values, axis=0)
    scale = radius ** np.arange(count)
    return (coeff.T / scale).T


def _det_batch(values: np.ndarray) -> np.ndarray:
    """Determinants of a stack of square matrices, closed form up to 3x3."""
    n = values.shape[-1]
    if n == 1:
        return values[..., 0, 0]
    if n == 2:
        return values[..., 0, 0] * values[..., 1, 1] - values[..., 0, 1] * values[..., 1, 0]
    if n == 3:
        a, b, c = values[..., 0, 0], values[..., 0, 1], values[..., 0, 2]
        d, e, f = values[..., 1, 0], values[..., 1, 1], values[..., 1, 2]
        g, h, i = values[..., 2, 0], values[..., 2, 1], values[..., 2, 2]
        return a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g)
    return np.linalg.det(values)


def _adjugate_batch(values: np.ndarray) -> np.ndarray:
    """Adjugates of a stack of square matrices via batched minors.

    All n^2 complementary minors are gathered in one advanced-indexing step
    and their determinants taken in one batched call.
    """
    m, n, _ = values.shape
    if n == 1:
        return np.ones_like(values)
    keep = np.array([[r for r in range(n) if r != k] for k in range(n)])
    rows = keep[None, :, :, None]  # delete row j of the input
    cols = keep[:, None, None, :]  # delete column i of the input
    minors = values[:, rows, cols]
    signs = (-1.0) ** (np.arange(n)[:, None] + np.arange(n)[None, :])
    return signs * _det_batch(minors)


def determinant(a: MatPoly) -> Poly:
    """Determinant as a polynomial of degree at most n * degree_bound."""
    _require_square(a)
    n, d = a.rows, a.degree_bound
    count = n * d + 1
    radius = _eval_radius(a)
    values = np.linalg.det(_batch_evaluate(a, _interp_nodes(count, radius)))
    return Poly(_coeffs_from_values(values, radius).real)


def adjoint(a: MatPoly) -> MatPoly:
    """Adjugate matrix with declared degree bound (n-1) * degree_bound."""
    _require_square(a)
    if a.rows < 2:
        raise DimensionMismatch("adjoint needs a matrix of size at least 2")
    n, d = a.rows, a.degree_bound
    count = (n - 1) * d + 1
    radius = _eval_radius(a)
    values = _adjugate_batch(_batch_evaluate(a, _interp_nodes(count, radius)))
    coeff = _coeffs_from_values(values, radius).real
    return MatPoly(coeff.transpose(1, 2, 0))


def _pvec_row(a: MatPoly) -> MatPoly:
    """The entries of a, column-major, as a 1 x (rows*cols) matrix polynomial."""
    arr = a.coeff.transpose(1, 0, 2).reshape(1, a.rows * a.cols, a.degree_bound + 1)
    return MatPoly(arr)


def jacobian_det(a: MatPoly) -> np.ndarray:
    """Jacobian of vec(det(A)) with respect to vec(A); shape (nd+1) x n^2(d+1)."""
    _require_square(a)
    adj_t = MatPoly.identity(1, 0) if a.rows == 1 else adjoint(a).transpose()
    return block_conv_matrix(_pvec_row(adj_t), a.degree_bound)


class _AdjointSystem:
    """Shared factorization of the linear system defining the adjoint.

    The convolution system of I kron A is block diagonal with n identical
    copies of the convolution matrix of A, so one small SVD serves as the
    pseudo-inverse of the whole thing.
    """

    def __init__(self, a: MatPoly, adj: MatPoly | None = None):
        _require_square(a)
        self.a = a
        self.n, self.d = a.rows, a.degree_bound
        self.dadj = (self.n - 1) * self.d
        self.block = block_conv_matrix(a, self.dadj)
        self.u, self.s, self.vt = np.linalg.svd(self.block, full_matrices=False)
        big = max(self.block.shape) * self.n
        self.full_rank = bool(
            self.s.size
            and self.s[0] > 0.0
            and np.count_nonzero(self.s > self.s[0] * big * 1e-12) == self.block.shape[1]
        )
        self.adj = adjoint(a) if adj is None else adj
        self._rhs = None
        self._jacobian = None

    def require_full_rank(self):
        if not self.full_rank:
            raise RankDeficientInput("I kron A convolution system is rank deficient")

    def smallest_singular_value(self) -> float:
        return float(self.s[self.block.shape[1] - 1])

    def rhs(self) -> np.ndarray:
        if self._rhs is not None:
            return self._rhs
        n, d = self.n, self.d
        adj_t = self.adj.transpose()
        eye = MatPoly.identity(n, 0)
        outer = MatPoly.zeros(n * n, n * n, adj_t.degree_bound)
        adj_row = _pvec_row(adj_t)
        for j in range(n):
            outer.coeff[j * n + j, :, :] = adj_row.coeff[0]
        self._rhs = block_conv_matrix(outer, d) - block_conv_matrix(kronecker(adj_t, eye), d)
        return self._rhs

    def apply_pinv(self, stacked: np.ndarray) -> np.ndarray:
        """Pseudo-inverse of the full block diagonal system applied blockwise."""
        rows, cols = self.block.shape
        pieces = stacked.reshape(self.n, rows, -1)
        solved = np.einsum("ki,ni...->nk...", self.vt.T / self.s, self.u.T @ pieces)
        return solved.reshape(self.n * cols, *stacked.shape[1:])

    def jacobian(self) -> np.ndarray:
        self.require_full_rank()
        if self._jacobian is None:
            self._jacobian = self.apply_pinv(self.rhs())
        return self._jacobian

    def jacobian_transpose_apply(self, lam: np.ndarray) -> np.ndarray:
        """J_adj^T @ lam without forming the Jacobian."""
        self.require_full_rank()
        rows, cols = self.block.shape
        lam_blocks = lam.reshape(self.n, cols)
        back = np.einsum("ik,nk->ni", self.u @ (self.vt.T / self.s).T, lam_blocks)
        return self.rhs().T @ back.reshape(-1)


def jacobian_adj(a: MatPoly) -> np.ndarray:
    """Jacobian of vec(Adj(A)) with respect to vec(A).

    Shape n^2((n-1)d+1) x n^2(d+1).  Requires A to have full rank over the
    rational functions; the defining linear system is then pseudo-invertible.
    """
    return _AdjointSystem(a).jacobian()


def adjoint_perturbation_bound(a: MatPoly) -> float:
    """First-order Lipschitz factor for the adjoint under coefficient changes."""
    system = _AdjointSystem(a)
    system.require_full_rank()
    n, d = a.rows, a.degree_bound
    c_hat = 1.0 / system.smallest_singular_value()
    return c_hat * (n + np.sqrt(n)) * (d + 1) * system.adj.frobenius_norm()


def hadamard_gradient_bound(a: MatPoly) -> float:
    """Hadamard-type upper bound on the adjoint Jacobian spectral norm."""
    _require_square(a)
    n, d = a.rows, a.degree_bound
    if n < 2:
        raise DimensionMismatch("bound is defined for matrices of size at least 2")
    a_inf = float(np.max(np.abs(a.coeff)))
    return (
        n**3
        * (d + 1) ** 2.5
        * a_inf ** (n - 2)
        * (d + 1) ** (n - 2)
        * n ** ((n - 2) / 2.0)
    )
