"""Dense symmetric linear algebra primitives and the normalized Frobenius metric.

Everything downstream (samplers, estimators, the experiment harness) consumes
these helpers, so their contracts are deliberately strict: symmetric storage is
enforced on construction, eigenvalues always come back ascending, and
eigenvector signs follow a fixed convention so repeated runs are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

__all__ = [
    "EigenSolverError",
    "Spectrum",
    "symmetrize",
    "normalized_trace",
    "frobenius_error",
    "eigh_ascending",
    "diag_quadratic",
    "recompose",
]


class EigenSolverError(ValueError):
    """Raised when the symmetric eigensolver cannot produce a decomposition."""

    def __init__(self, n: int, diagnostic: str):
        self.n = n
        self.diagnostic = diagnostic
        super().__init__(f"eigendecomposition failed for n={n}: {diagnostic}")


def symmetrize(a: NDArray[np.float64], name: str = "matrix") -> NDArray[np.float64]:
    """Validate a square 2-d array and return an exactly symmetric float64 copy.

    Symmetry is enforced by averaging with the transpose, so the result
    satisfies ``out[i, j] == out[j, i]`` exactly regardless of round-off in
    the input.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square 2-d, got shape {a.shape}")
    if a.shape[0] < 1:
        raise ValueError(f"{name} must have dimension >= 1")
    return 0.5 * (a + a.T)


def normalized_trace(a: NDArray[np.float64]) -> float:
    """Return the per-dimension trace (1/n) * sum_i a[i, i]."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected square matrix, got shape {a.shape}")
    return float(np.trace(a) / a.shape[0])


def frobenius_error(a: NDArray[np.float64], b: NDArray[np.float64]) -> float:
    """Normalized squared Frobenius distance (1/n) * sum_ij (a - b)[i, j]**2.

    Parameters
    ----------
    a, b : ndarray
        Square matrices of identical shape.

    Returns
    -------
    float
        Non-negative per-dimension squared error.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    d = a - b
    return float(np.sum(d * d) / a.shape[0])


@dataclass(frozen=True)
class Spectrum:
    """Eigendecomposition with eigenvalues ascending.

    Attributes
    ----------
    eigenvalues : ndarray, shape (n,)
        Sorted non-decreasing.
    eigenvectors : ndarray, shape (n, n)
        Orthonormal columns; column ``i`` pairs with ``eigenvalues[i]``.
    """

    eigenvalues: NDArray[np.float64]
    eigenvectors: NDArray[np.float64]

    @property
    def n(self) -> int:
        return self.eigenvalues.shape[0]


def _fix_signs(v: NDArray[np.float64]) -> NDArray[np.float64]:
    # Sign convention: the largest-magnitude component of each column is
    # positive.  Ties cannot flip the choice because argmax picks the first
    # maximal index deterministically.
    idx = np.argmax(np.abs(v), axis=0)
    signs = np.sign(v[idx, np.arange(v.shape[1])])
    signs[signs == 0] = 1.0
    return v * signs


def eigh_ascending(a: NDArray[np.float64]) -> Spectrum:
    """Symmetric eigendecomposition with ascending eigenvalues and fixed signs.

    Parameters
    ----------
    a : ndarray
        Symmetric matrix.

    Returns
    -------
    Spectrum

    Raises
    ------
    EigenSolverError
        If the solver does not converge or the input is not finite; carries
        the dimension and a condition diagnostic.
    """
    a = symmetrize(a)
    try:
        eigenvalues, eigenvectors = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        finite = bool(np.isfinite(a).all())
        diag = f"{exc}; finite={finite}"
        if finite:
            scale = float(np.abs(a).max())
            diag += f", max|entry|={scale:g}"
        raise EigenSolverError(a.shape[0], diag) from exc
    return Spectrum(eigenvalues=eigenvalues, eigenvectors=_fix_signs(eigenvectors))


def diag_quadratic(v: NDArray[np.float64], a: NDArray[np.float64]) -> NDArray[np.float64]:
    """Quadratic forms d_i = v_i' A v_i for each column v_i of an orthonormal V.

    For positive semidefinite ``a`` every entry is >= 0 and the entries sum to
    trace(a) exactly up to round-off (the map preserves the trace).
    """
    v = np.asarray(v, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    if v.ndim != 2 or a.shape != (v.shape[0], v.shape[0]):
        raise ValueError(f"dimension mismatch: V {v.shape} vs A {a.shape}")
    return np.einsum("ij,ij->j", v, a @ v)


def recompose(v: NDArray[np.float64], d: NDArray[np.float64]) -> NDArray[np.float64]:
    """Assemble V diag(d) V' as an exactly symmetric matrix."""
    v = np.asarray(v, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    rebuilt = (v * d) @ v.T
    return 0.5 * (rebuilt + rebuilt.T)
