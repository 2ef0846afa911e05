"""Hermitian positive definite plumbing: factorization, whitening, projection.

Every detector statistic in this package reduces to inner products taken in a
whitened space. This module owns the single triangular-factor route used for
that, so all consumers agree on one factor convention (lower Cholesky) and on
one set of failure modes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import (
    DimensionMismatch,
    NotHermitian,
    NotPositiveDefinite,
    NumericalInconsistency,
    ZeroVector,
)

HERMITIAN_RTOL = 1e-10   # asymmetry tolerance, relative to max |entry|
PIVOT_FLOOR = 1e-300     # absolute floor on Cholesky pivots L[i,i]^2
IMAG_CLAMP_RTOL = 1e-8   # imaginary leakage allowed in real quadratic forms
ZERO_NORM_FLOOR = 1e-30  # ||u||^2 below this counts as the zero vector


def as_vector(x, n: int | None = None) -> np.ndarray:
    """Validate x as a 1-D finite complex vector, optionally of length n."""
    v = np.asarray(x, dtype=complex)
    if v.ndim != 1:
        raise DimensionMismatch(f"expected a vector, got shape {v.shape}")
    if n is not None and v.shape[0] != n:
        raise DimensionMismatch(f"expected length {n}, got {v.shape[0]}")
    if not np.all(np.isfinite(v)):
        raise NumericalInconsistency("vector has non-finite entries")
    return v


@dataclass(frozen=True)
class HermitianPD:
    """Hermitian positive definite matrix with its cached lower Cholesky factor.

    matrix = factor @ factor.conj().T, factor lower triangular with positive
    real diagonal. Construct through factorize(); the constructor trusts its
    arguments.
    """

    matrix: np.ndarray
    factor: np.ndarray

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def whiten(self, x) -> np.ndarray:
        """Solve factor @ y = x.

        Maps data into the space where this matrix acts as identity. Accepts a
        vector or an (n, m) stack of columns.
        """
        arr = np.asarray(x, dtype=complex)
        if arr.ndim not in (1, 2) or arr.shape[0] != self.n:
            raise DimensionMismatch(
                f"cannot whiten shape {arr.shape} against {self.n}x{self.n}"
            )
        if not np.all(np.isfinite(arr)):
            raise NumericalInconsistency("whiten input has non-finite entries")
        return solve_triangular(self.factor, arr, lower=True, check_finite=False)

    def quad_form(self, x, y):
        """x^H M^{-1} y through the whitened inner product.

        Returns a float when x and y are the same vector (tiny imaginary part
        clamped, larger ones raise NumericalInconsistency), complex otherwise.
        """
        same = x is y or np.array_equal(np.asarray(x), np.asarray(y))
        xw = self.whiten(x)
        yw = xw if same else self.whiten(y)
        val = np.vdot(xw, yw)
        if same:
            if abs(val.imag) > IMAG_CLAMP_RTOL * max(1.0, abs(val.real)):
                raise NumericalInconsistency(
                    f"quadratic form of a vector with itself came out complex: {val}"
                )
            return float(val.real)
        return complex(val)


def factorize(m) -> HermitianPD:
    """Check Hermitian symmetry, symmetrize, and Cholesky-factor m."""
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NumericalInconsistency("matrix has non-finite entries")
    scale = float(np.abs(a).max())
    if scale == 0.0:
        raise NotPositiveDefinite("zero matrix")
    asym = float(np.abs(a - a.conj().T).max())
    if asym > HERMITIAN_RTOL * scale:
        raise NotHermitian(
            f"asymmetry {asym:.3e} exceeds {HERMITIAN_RTOL:g} * max|entry| = "
            f"{HERMITIAN_RTOL * scale:.3e}"
        )
    h = 0.5 * (a + a.conj().T)
    try:
        lower = np.linalg.cholesky(h)
    except np.linalg.LinAlgError:
        raise NotPositiveDefinite("Cholesky failed: non-positive pivot") from None
    pivots = np.abs(np.diagonal(lower)) ** 2
    if float(pivots.min()) <= PIVOT_FLOOR:
        raise NotPositiveDefinite(
            f"pivot {pivots.min():.3e} at or below floor {PIVOT_FLOOR:g}"
        )
    return HermitianPD(matrix=h, factor=lower)


def proj_perp(u, x) -> np.ndarray:
    """Component of x orthogonal to u: x - u (u^H x) / ||u||^2."""
    uv = np.asarray(u, dtype=complex)
    xv = np.asarray(x, dtype=complex)
    if uv.ndim != 1 or uv.shape != xv.shape:
        raise DimensionMismatch(
            f"projection operands must be equal-length vectors, got {uv.shape} and {xv.shape}"
        )
    nrm2 = np.vdot(uv, uv).real
    if nrm2 < ZERO_NORM_FLOOR:
        raise ZeroVector("cannot project against a zero vector")
    return xv - uv * (np.vdot(uv, xv) / nrm2)
