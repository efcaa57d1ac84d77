"""Linear models fitted from augmented triangular factors."""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DegenerateDof, ShapeError
from .linalg import (
    TriangularFactor,
    append_row,
    back_substitute,
    thin_r,
    unscaled_cov_diagonal,
)


@dataclass(frozen=True, eq=False)
class FitResult:
    beta: np.ndarray
    rss: float
    std_errors: Optional[np.ndarray]
    n: int
    p: int
    iterations: int = 0
    converged: bool = True
    dispersion: Optional[float] = None
    names: Optional[tuple] = field(default=None, compare=False)

    def with_names(self, names) -> "FitResult":
        names = tuple(names)
        if len(names) != self.p:
            raise ShapeError(f"{len(names)} names for {self.p} coefficients")
        return FitResult(**{**self.__dict__, "names": names})


def std_errors(f: TriangularFactor, n_total: int, dispersion: Optional[float] = None):
    """Standard errors sqrt(diag((R'R)^-1) * dispersion).

    The dispersion defaults to the unbiased residual variance rss/(n - p).
    """
    if n_total <= f.p:
        raise DegenerateDof(n_total, f.p)
    if dispersion is None:
        dispersion = f.rss / (n_total - f.p)
    return np.sqrt(unscaled_cov_diagonal(f.r) * dispersion)


def fit_from_factor(f: TriangularFactor, n_total: int) -> FitResult:
    beta = back_substitute(f.r, f.theta)
    se = std_errors(f, n_total) if n_total > f.p else None
    return FitResult(beta=beta, rss=f.rss, std_errors=se, n=n_total, p=f.p,
                     iterations=0, converged=True)


def fit_lm(x, y) -> FitResult:
    """Centralized least-squares fit via a single augmented QR."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(-1, 1)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    if y.shape[0] != x.shape[0]:
        raise ShapeError(f"x has {x.shape[0]} rows but y has {y.shape[0]}")
    return fit_from_factor(thin_r(np.hstack([x, y])), x.shape[0])


@dataclass(frozen=True)
class StreamState:
    factor: TriangularFactor
    n_seen: int = 0


def stream_new(p: int) -> StreamState:
    if p < 1:
        raise ShapeError("p must be at least 1")
    return StreamState(TriangularFactor.zeros(p), 0)


def stream_update(s: StreamState, x_row, y: float) -> StreamState:
    x_row = np.asarray(x_row, dtype=np.float64).ravel()
    if x_row.size != s.factor.p:
        raise ShapeError(f"x_row has length {x_row.size}, expected {s.factor.p}")
    row = np.append(x_row, float(y))
    return StreamState(append_row(s.factor, row), s.n_seen + 1)


def stream_fit(s: StreamState) -> FitResult:
    return fit_from_factor(s.factor, s.n_seen)
