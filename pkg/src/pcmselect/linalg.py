"""Sum-of-squares algebra shared by every estimator.

All estimators in this package work on sums of squares and cross-products of
standardized observation columns.  The helpers here compute those objects,
their conditional (partialled) versions, gram matrices, and Moore-Penrose
pseudoinverses.  Everything is a pure function of ndarray inputs.

Conventions
-----------
* Standardization uses the population (1/n) variance, so a standardized
  column of length n has sum of squares exactly n.  Penalty bookkeeping in
  the estimator modules relies on this.
* Conditional cross-products use the partialling identity
  ``S_ab.z = S_ab - S_az S_zz^+ S_zb`` with a pseudoinverse, so rank-deficient
  conditioning sets are handled without raising.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConstantColumn, DecompositionFailure

__all__ = [
    "StandardizationRecord",
    "as_matrix",
    "standardize",
    "cross_products",
    "conditional_cross_products",
    "pseudo_inverse",
    "gram",
]


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce to a finite 2-D float64 array; raise ValueError otherwise."""
    m = np.asarray(a, dtype=float)
    if m.ndim == 1:
        m = m[:, None]
    if m.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got ndim={m.ndim}")
    if m.size and not np.all(np.isfinite(m)):
        raise ValueError(f"{name} contains NaN or Inf entries")
    return m


@dataclass(frozen=True)
class StandardizationRecord:
    """Per-column mean and scale (population standard deviation).

    ``apply`` reproduces the standardized data from raw data; ``invert``
    undoes it.  Scales are strictly positive for every retained column.
    """

    mean: np.ndarray
    scale: np.ndarray

    def apply(self, raw: np.ndarray) -> np.ndarray:
        return (np.asarray(raw, dtype=float) - self.mean) / self.scale

    def invert(self, standardized: np.ndarray) -> np.ndarray:
        return np.asarray(standardized, dtype=float) * self.scale + self.mean


def standardize(raw, names=None) -> tuple[np.ndarray, StandardizationRecord]:
    """Center and scale each column to mean 0 and population variance 1.

    Parameters
    ----------
    raw : array_like, shape (n, q)
        Observation matrix, n >= 2 rows.
    names : sequence of str, optional
        Column names used in error messages.

    Returns
    -------
    (standardized, record)

    Raises
    ------
    ConstantColumn
        If any column has zero variance.
    """
    m = as_matrix(raw, "raw data")
    if m.shape[0] < 2:
        raise ValueError("standardize needs at least 2 rows")
    mean = m.mean(axis=0)
    scale = m.std(axis=0)  # population convention (ddof=0)
    bad = np.nonzero(scale == 0.0)[0]
    if bad.size:
        j = int(bad[0])
        label = names[j] if names is not None else str(j)
        raise ConstantColumn(label)
    return (m - mean) / scale, StandardizationRecord(mean=mean, scale=scale)


def cross_products(data: np.ndarray, a, b) -> np.ndarray:
    """Sum-of-cross-products matrix between column sets ``a`` and ``b``.

    Returns ``data[:, a].T @ data[:, b]``; symmetric when ``a == b``.
    """
    a = np.asarray(a, dtype=int)
    b = np.asarray(b, dtype=int)
    return data[:, a].T @ data[:, b]


def conditional_cross_products(data: np.ndarray, a, b, given) -> np.ndarray:
    """Cross-products of ``a`` and ``b`` after partialling out ``given``.

    Equals the cross-products of the residuals from the least-squares
    projection of the a-columns and b-columns on the given-columns.  A
    pseudoinverse handles rank-deficient conditioning blocks.
    """
    a = np.asarray(a, dtype=int)
    b = np.asarray(b, dtype=int)
    given = np.asarray(given, dtype=int)
    s_ab = cross_products(data, a, b)
    if given.size == 0:
        return s_ab
    s_zz = cross_products(data, given, given)
    s_az = cross_products(data, a, given)
    s_zb = cross_products(data, given, b)
    return s_ab - s_az @ pseudo_inverse(s_zz) @ s_zb


def pseudo_inverse(m, tol: float | None = None) -> np.ndarray:
    """Moore-Penrose pseudoinverse by SVD.

    Singular values at or below ``tol * (largest singular value)`` are
    treated as zero.  The default tolerance is ``1e-10 * max(rows, cols)``,
    a standard numerical-rank cutoff.

    Raises
    ------
    DecompositionFailure
        If the SVD does not converge.
    """
    m = as_matrix(m)
    if m.size == 0:
        return np.zeros((m.shape[1], m.shape[0]))
    try:
        u, s, vt = np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - numpy rarely fails
        raise DecompositionFailure(str(exc)) from exc
    if tol is None:
        tol = 1e-10 * max(m.shape)
    cutoff = tol * (s[0] if s.size else 0.0)
    inv = np.where(s > cutoff, np.divide(1.0, s, out=np.zeros_like(s), where=s > 0), 0.0)
    return (vt.T * inv) @ u.T


def gram(m) -> np.ndarray:
    """Gram matrix ``m.T @ m`` (symmetric positive semidefinite)."""
    m = np.asarray(m, dtype=float)
    if m.ndim == 1:
        m = m[:, None]
    return m.T @ m
