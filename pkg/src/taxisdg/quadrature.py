r"""Quadrature rules on reference simplices.

Volume rules use the Grundmann-Moeller family: fully symmetric rules of
any odd degree on the unit simplex in any dimension, constructed in exact
rational arithmetic so the weights carry no roundoff beyond the final
conversion to float.  For an integer s >= 0 the rule

.. math::

    \int_{T_n} f \approx \sum_{i=0}^{s} (-1)^i\, 2^{-2s}
        \frac{(d + n - 2i)^d}{i!\,(d + n - i)!}
        \sum_{|\beta| = s - i} f\Bigl(\frac{2\beta + 1}{d + n - 2i}\Bigr),
    \qquad d = 2s + 1,

is exact for polynomials of total degree <= d (Grundmann & Moeller,
SIAM J. Numer. Anal. 15 (1978) 282-290).  The inner sum runs over
multi-indices beta with n+1 components; (2 beta + 1)/(d + n - 2i) is the
barycentric coordinate vector of the quadrature point.

Face rules live on the face's own reference domain: the unit interval
[0, 1] for triangle edges (Gauss-Legendre) and the unit triangle for
tetrahedron faces (Grundmann-Moeller again).

Weights sum to the reference measure: 1 for the segment, 1/2 for the
triangle, 1/6 for the tetrahedron.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

__all__ = ["QuadRule", "volume_rule", "face_rule", "gauss_segment",
           "grundmann_moeller"]


@dataclass(frozen=True)
class QuadRule:
    """A quadrature rule on a reference domain.

    Attributes
    ----------
    points : ndarray, shape (n, dim)
        Quadrature nodes in reference coordinates.  dim = 1 for the unit
        segment, 2 for the unit triangle, 3 for the unit tetrahedron.
    weights : ndarray, shape (n,)
        Quadrature weights; they sum to the reference measure.
    degree : int
        Total polynomial degree integrated exactly.
    """

    points: np.ndarray
    weights: np.ndarray
    degree: int

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]


def _compositions(total: int, parts: int):
    """Yield all tuples of `parts` nonnegative ints summing to `total`."""
    if parts == 1:
        yield (total,)
        return
    for bars in itertools.combinations(range(total + parts - 1), parts - 1):
        comp = []
        prev = -1
        for b in bars:
            comp.append(b - prev - 1)
            prev = b
        comp.append(total + parts - 2 - prev)
        yield tuple(comp)


@lru_cache(maxsize=None)
def grundmann_moeller(dim: int, s: int) -> QuadRule:
    """Grundmann-Moeller rule of degree 2s+1 on the unit simplex."""
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    if s < 0:
        raise ValueError(f"s must be >= 0, got {s}")
    d = 2 * s + 1
    n = dim
    pts: list[list[Fraction]] = []
    wts: list[Fraction] = []
    for i in range(s + 1):
        denom = d + n - 2 * i
        w = (Fraction((-1) ** i) * Fraction(denom) ** d
             / (Fraction(2) ** (2 * s)
                * math.factorial(i) * math.factorial(d + n - i)))
        for beta in _compositions(s - i, n + 1):
            # barycentric -> cartesian: drop the first coordinate
            bary = [Fraction(2 * b + 1, denom) for b in beta]
            pts.append(bary[1:])
            wts.append(w)
    points = np.array([[float(c) for c in p] for p in pts])
    weights = np.array([float(w) for w in wts])
    return QuadRule(points=points, weights=weights, degree=d)


@lru_cache(maxsize=None)
def gauss_segment(degree: int) -> QuadRule:
    """Gauss-Legendre rule on [0, 1] exact for the given degree."""
    if degree < 0:
        raise ValueError(f"degree must be >= 0, got {degree}")
    npts = degree // 2 + 1
    x, w = np.polynomial.legendre.leggauss(npts)
    points = (0.5 * (x + 1.0)).reshape(-1, 1)
    weights = 0.5 * w
    return QuadRule(points=points, weights=weights, degree=2 * npts - 1)


def volume_rule(dim: int, degree: int) -> QuadRule:
    """Rule on the unit simplex of dimension `dim` exact for `degree`."""
    if dim not in (2, 3):
        raise ValueError(f"dim must be 2 or 3, got {dim}")
    s = max(0, degree // 2)  # smallest s with 2s+1 >= degree
    return grundmann_moeller(dim, s)


def face_rule(dim: int, degree: int) -> QuadRule:
    """Rule on the reference face of a `dim`-simplex exact for `degree`.

    For dim = 2 the face is the unit segment, for dim = 3 the unit
    triangle.
    """
    if dim == 2:
        return gauss_segment(degree)
    if dim == 3:
        return volume_rule(2, degree)
    raise ValueError(f"dim must be 2 or 3, got {dim}")
