"""L2-orthonormal modal bases on reference simplices.

The basis of total degree k is obtained by Gram-Schmidt orthonormalization
of the graded-lexicographic monomial basis with respect to the L2 inner
product on the reference simplex.  The Gram matrix has exact rational
entries (x^a y^b integrates to a! b! / (a+b+2)! on the unit triangle, and
analogously with a third factor on the tetrahedron), so the triangular
factor is computed exactly with Fraction arithmetic; the only roundoff in
the resulting coefficients is the final square root and float conversion.
The first basis function is the normalized constant, which makes element
mass matrices diagonal with entry |det J| per mode.
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache

import numpy as np

__all__ = ["BasisSet", "basis_size", "monomial_exponents"]

MAX_ORDER = 4


def basis_size(dim: int, order: int) -> int:
    """Dimension of P_k on a simplex: C(order + dim, dim)."""
    _validate(dim, order)
    return math.comb(order + dim, dim)


def _validate(dim: int, order: int) -> None:
    if dim not in (2, 3):
        raise ValueError(f"dim must be 2 or 3, got {dim}")
    if not 0 <= order <= MAX_ORDER:
        raise ValueError(f"order must be in 0..{MAX_ORDER}, got {order}")


def monomial_exponents(dim: int, order: int) -> list[tuple[int, ...]]:
    """Graded-lexicographic exponent tuples for P_k monomials."""
    _validate(dim, order)
    out: list[tuple[int, ...]] = []
    for g in range(order + 1):
        if dim == 2:
            out.extend((a, g - a) for a in range(g, -1, -1))
        else:
            for a in range(g, -1, -1):
                out.extend((a, b, g - a - b) for b in range(g - a, -1, -1))
    return out


def _monomial_integral(exps: tuple[int, ...]) -> Fraction:
    # int over the unit simplex of prod x_i^a_i  =  prod a_i! / (sum a_i + dim)!
    num = 1
    for a in exps:
        num *= math.factorial(a)
    return Fraction(num, math.factorial(sum(exps) + len(exps)))


@lru_cache(maxsize=None)
def _coefficients(dim: int, order: int) -> tuple[tuple[tuple[int, ...], ...], np.ndarray]:
    exps = tuple(monomial_exponents(dim, order))
    n = len(exps)
    gram = [[_monomial_integral(tuple(a + b for a, b in zip(exps[i], exps[j])))
             for j in range(n)] for i in range(n)]
    # exact LDL^T of the (SPD) Gram matrix
    L = [[Fraction(0)] * n for _ in range(n)]
    D = [Fraction(0)] * n
    for j in range(n):
        D[j] = gram[j][j] - sum(L[j][k] * L[j][k] * D[k] for k in range(j))
        L[j][j] = Fraction(1)
        for i in range(j + 1, n):
            L[i][j] = (gram[i][j]
                       - sum(L[i][k] * L[j][k] * D[k] for k in range(j))) / D[j]
    # invert the unit lower-triangular factor exactly
    Linv = [[Fraction(0)] * n for _ in range(n)]
    for i in range(n):
        Linv[i][i] = Fraction(1)
        for j in range(i - 1, -1, -1):
            Linv[i][j] = -sum(L[i][k] * Linv[k][j] for k in range(j, i))
    coeff = np.array([[float(Linv[i][j]) / math.sqrt(float(D[i]))
                       for j in range(n)] for i in range(n)])
    return exps, coeff


class BasisSet:
    """Orthonormal modal basis of total degree `order` on the reference
    simplex of dimension `dim`.

    eval/grad return dense tables over point batches; the basis functions
    are indexed consistently across both, mode 0 being the constant.
    """

    def __init__(self, dim: int, order: int):
        _validate(dim, order)
        self.dim = dim
        self.order = order
        self._exps, self._coeff = _coefficients(dim, order)
        self.size = len(self._exps)

    def eval(self, points: np.ndarray) -> np.ndarray:
        """Basis values at reference points; shape (npts, size)."""
        pts = np.asarray(points, dtype=float)
        mono = self._monomials(pts)
        return mono @ self._coeff.T

    def grad(self, points: np.ndarray) -> np.ndarray:
        """Reference-coordinate gradients; shape (npts, size, dim)."""
        pts = np.asarray(points, dtype=float)
        npts = pts.shape[0]
        out = np.empty((npts, self.size, self.dim))
        for axis in range(self.dim):
            dmono = np.empty((npts, len(self._exps)))
            for m, e in enumerate(self._exps):
                shifted = list(e)
                a = shifted[axis]
                if a == 0:
                    dmono[:, m] = 0.0
                    continue
                shifted[axis] = a - 1
                dmono[:, m] = a * self._power(pts, shifted)
            out[:, :, axis] = dmono @ self._coeff.T
        return out

    def _monomials(self, pts: np.ndarray) -> np.ndarray:
        mono = np.empty((pts.shape[0], len(self._exps)))
        for m, e in enumerate(self._exps):
            mono[:, m] = self._power(pts, e)
        return mono

    @staticmethod
    def _power(pts: np.ndarray, exps) -> np.ndarray:
        acc = np.ones(pts.shape[0])
        for axis, a in enumerate(exps):
            if a:
                acc = acc * pts[:, axis] ** a
        return acc
