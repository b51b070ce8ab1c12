"""Regression dataset container and standardization.

Model fitting operates on standardized data: each predictor column is
centered and rescaled so its squared norm equals the sample size n, and the
response is centered.  The standardization records are kept on the dataset so
predictions can be mapped back to the original scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DataError


@dataclass
class Dataset:
    """Design matrix and response with standardization records.

    Attributes
    ----------
    x : ndarray of shape (n, p)
    y : ndarray of shape (n,)
    column_means, column_scales : ndarray of shape (p,)
        Per-column shift and scale already applied to ``x`` (identity for raw
        datasets).
    y_mean : float
        Shift already applied to ``y``.
    standardized : bool
        True when ``x``/``y`` hold standardized values.
    """

    x: np.ndarray
    y: np.ndarray
    column_means: np.ndarray
    column_scales: np.ndarray
    y_mean: float
    standardized: bool

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    @classmethod
    def from_arrays(cls, x, y) -> "Dataset":
        """Wrap raw arrays without transforming them (identity records)."""
        x, y = _coerce(x, y)
        return cls(
            x=x,
            y=y,
            column_means=np.zeros(x.shape[1]),
            column_scales=np.ones(x.shape[1]),
            y_mean=0.0,
            standardized=False,
        )


def _coerce(x, y):
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.ndim != 2:
        raise DataError(f"x must be a 2-d matrix, got ndim={x.ndim}")
    if x.shape[0] != y.shape[0]:
        raise DataError(
            f"x has {x.shape[0]} rows but y has {y.shape[0]} entries"
        )
    if not np.all(np.isfinite(x)) or not np.all(np.isfinite(y)):
        raise DataError("x and y must be finite")
    return x, y


def standardize(x, y) -> Dataset:
    """Center/rescale columns to squared norm n and center the response.

    Columns with zero variance cannot be rescaled and are rejected.
    """
    x, y = _coerce(x, y)
    n = x.shape[0]
    means = x.mean(axis=0)
    xc = x - means
    scales = np.sqrt(np.einsum("ij,ij->j", xc, xc) / n)
    dead = np.flatnonzero(scales <= 0)
    if dead.size:
        cols = ", ".join(str(int(j) + 1) for j in dead[:10])
        raise DataError(f"zero-variance column(s): {cols} (1-based)")
    xc /= scales
    y_mean = float(y.mean())
    return Dataset(
        # Column-major layout: the coordinate-descent solver walks columns.
        x=np.asfortranarray(xc),
        y=y - y_mean,
        column_means=means,
        column_scales=scales,
        y_mean=y_mean,
        standardized=True,
    )


def ensure_standardized(data: Dataset) -> Dataset:
    """Return ``data`` if already standardized, else a standardized copy."""
    if data.standardized:
        return data
    return standardize(data.x, data.y)
