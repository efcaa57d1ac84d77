"""Dense QR machinery for augmented ``[X Y]`` blocks.

Block factorizations use Householder reflections, single-row updates use
Givens rotations. Every triangular result is normalized to a nonnegative
diagonal so that factors of full-rank input are unique and can be compared
entrywise across nodes.
"""
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import EmptyInput, ShapeError, SingularDesign

RANK_TOL = 1e-10


def as_dense(a) -> np.ndarray:
    """Validate and copy ``a`` into a C-contiguous 2-D float64 array."""
    arr = np.array(a, dtype=np.float64, order="C")
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got {arr.ndim} dimensions")
    if not np.all(np.isfinite(arr)):
        raise ValueError("matrix contains NaN or Inf entries")
    return arr


def _triu_index(m):
    return np.triu_indices(m)


@dataclass(frozen=True, eq=False)
class TriangularFactor:
    """Packed upper triangle of the ``(p+1) x (p+1)`` augmented factor.

    The leading ``p x p`` block is R, the last column above the corner is
    theta = Q'y and the corner entry is sqrt(RSS).
    """

    p: int
    packed: np.ndarray

    def __post_init__(self):
        packed = np.array(self.packed, dtype=np.float64).ravel()
        if self.p < 0:
            raise ShapeError("p must be nonnegative")
        m = self.p + 1
        if packed.size != m * (m + 1) // 2:
            raise ShapeError(
                f"packed length {packed.size} does not match p={self.p} "
                f"(expected {m * (m + 1) // 2})"
            )
        if not np.all(np.isfinite(packed)):
            raise ValueError("factor contains NaN or Inf entries")
        packed.flags.writeable = False
        object.__setattr__(self, "packed", packed)
        if np.any(self.diagonal < 0):
            raise ValueError("factor diagonal must be nonnegative")

    @classmethod
    def from_full(cls, full) -> "TriangularFactor":
        full = np.asarray(full, dtype=np.float64)
        m = full.shape[0]
        if full.ndim != 2 or full.shape[1] != m or m < 1:
            raise ShapeError(f"expected a square matrix, got shape {full.shape}")
        return cls(m - 1, full[_triu_index(m)])

    @classmethod
    def zeros(cls, p: int) -> "TriangularFactor":
        m = p + 1
        return cls(p, np.zeros(m * (m + 1) // 2))

    @property
    def size(self) -> int:
        return self.p + 1

    def full(self) -> np.ndarray:
        m = self.size
        out = np.zeros((m, m))
        out[_triu_index(m)] = self.packed
        return out

    @property
    def diagonal(self) -> np.ndarray:
        m = self.p + 1
        # row-major packing: row i starts at i*m - i*(i-1)/2
        idx = [i * m - i * (i - 1) // 2 for i in range(m)]
        return self.packed[idx]

    @property
    def r(self) -> np.ndarray:
        return self.full()[: self.p, : self.p]

    @property
    def theta(self) -> np.ndarray:
        return self.full()[: self.p, self.p]

    @property
    def sqrt_rss(self) -> float:
        return float(self.packed[-1])

    @property
    def rss(self) -> float:
        return self.sqrt_rss ** 2

    def __eq__(self, other):
        if not isinstance(other, TriangularFactor):
            return NotImplemented
        return self.p == other.p and np.array_equal(self.packed, other.packed)

    def __hash__(self):
        return hash((self.p, self.packed.tobytes()))

    def allclose(self, other: "TriangularFactor", rtol=1e-12, atol=0.0) -> bool:
        if self.p != other.p:
            return False
        scale = max(np.max(np.abs(self.packed)), np.max(np.abs(other.packed)), 1e-300)
        return bool(np.all(np.abs(self.packed - other.packed) <= atol + rtol * scale))


class QrResult(NamedTuple):
    q: np.ndarray
    r: np.ndarray


def _householder(a: np.ndarray, want_q: bool):
    """In-place Householder triangularization of ``a`` (n x m, n >= m).

    Returns (r, reflectors) where reflectors holds (k, v, beta) for every
    reflection actually applied. Columns whose subdiagonal part is already
    zero are left untouched, so triangular input passes through exactly.
    """
    n, m = a.shape
    reflectors = []
    for k in range(m):
        x = a[k:, k]
        tail = np.linalg.norm(x[1:]) if x.size > 1 else 0.0
        if tail == 0.0:
            continue
        x0 = x[0]
        norm = np.hypot(x0, tail)
        v = x.copy()
        sign = 1.0 if x0 >= 0 else -1.0
        v[0] = x0 + sign * norm
        beta = 2.0 / np.dot(v, v)
        block = a[k:, k + 1:]
        if block.size:
            block -= np.outer(beta * v, v @ block)
        a[k, k] = -sign * norm
        a[k + 1:, k] = 0.0
        if want_q:
            reflectors.append((k, v, beta))
    r = np.triu(a[:m, :])
    return r, reflectors


def _flip_signs(r: np.ndarray):
    signs = np.where(np.diag(r) < 0, -1.0, 1.0)
    r *= signs[:, None]
    # -0.0 on the diagonal would compare fine but would not round-trip bytes
    r += 0.0
    return signs


def householder_qr(a) -> QrResult:
    """Thin QR decomposition ``a = q @ r`` with ``diag(r) >= 0``."""
    work = as_dense(a)
    n, m = work.shape
    if n < m:
        raise ShapeError(f"need rows >= cols, got {n}x{m}")
    r, reflectors = _householder(work, want_q=True)
    q = np.eye(n, m)
    for k, v, beta in reversed(reflectors):
        q[k:, :] -= np.outer(beta * v, v @ q[k:, :])
    signs = _flip_signs(r)
    q *= signs[None, :]
    return QrResult(q, r)


def thin_r(a) -> TriangularFactor:
    """Triangular factor of an augmented block ``[X y]``; Q is discarded."""
    work = as_dense(a)
    n, m = work.shape
    if n < m:
        raise ShapeError(f"need rows >= cols, got {n}x{m}")
    r, _ = _householder(work, want_q=False)
    _flip_signs(r)
    return TriangularFactor.from_full(r)


def thin_r_any(a, p: int) -> TriangularFactor:
    """Like :func:`thin_r` but accepts blocks with fewer rows than columns.

    Short blocks are padded with zero rows, which leaves the Gram matrix
    unchanged. Nodes holding fewer than ``p + 1`` observations need this.
    """
    work = as_dense(a) if np.size(a) else np.zeros((0, p + 1))
    if work.shape[1] != p + 1:
        raise ShapeError(f"expected {p + 1} columns, got {work.shape[1]}")
    if work.shape[0] < p + 1:
        work = np.vstack([work, np.zeros((p + 1 - work.shape[0], p + 1))])
    return thin_r(work)


def append_row(f: TriangularFactor, row) -> TriangularFactor:
    """Fold one observation row into ``f`` with Givens rotations, O(p^2)."""
    row = np.array(row, dtype=np.float64).ravel()
    m = f.size
    if row.size != m:
        raise ShapeError(f"row has length {row.size}, factor expects {m}")
    if not np.all(np.isfinite(row)):
        raise ValueError("row contains NaN or Inf entries")
    full = f.full()
    for k in range(m):
        b = row[k]
        if b == 0.0:
            continue
        a = full[k, k]
        h = np.hypot(a, b)
        c, s = a / h, b / h
        top = full[k, k:].copy()
        full[k, k:] = c * top + s * row[k:]
        row[k:] = -s * top + c * row[k:]
        full[k, k] = h
        row[k] = 0.0
    return TriangularFactor.from_full(full)


def merge_factors(factors: Sequence[TriangularFactor]) -> TriangularFactor:
    """Re-triangularize the vertical stack of ``factors`` (in list order)."""
    factors = list(factors)
    if not factors:
        raise EmptyInput("cannot merge an empty list of factors")
    p = factors[0].p
    if any(f.p != p for f in factors):
        raise ShapeError(f"mixed p in merge: {sorted({f.p for f in factors})}")
    if len(factors) == 1:
        return factors[0]
    return thin_r(np.vstack([f.full() for f in factors]))


def rank_tolerance(r: np.ndarray) -> float:
    d = np.abs(np.diag(r))
    return RANK_TOL * (d.max() if d.size else 0.0)


def check_rank(r: np.ndarray) -> None:
    tol = rank_tolerance(r)
    for j, d in enumerate(np.abs(np.diag(r))):
        if d <= tol:
            raise SingularDesign(j)


def back_substitute(r, theta) -> np.ndarray:
    """Solve ``r @ beta = theta`` for upper-triangular ``r``."""
    r = np.asarray(r, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64).ravel()
    p = r.shape[0]
    if r.shape != (p, p) or theta.size != p:
        raise ShapeError(f"incompatible shapes {r.shape} and {theta.shape}")
    check_rank(r)
    beta = np.zeros(p)
    for j in range(p - 1, -1, -1):
        beta[j] = (theta[j] - r[j, j + 1:] @ beta[j + 1:]) / r[j, j]
    return beta


def forward_substitute(r, b) -> np.ndarray:
    """Solve ``r.T @ u = b`` for upper-triangular ``r``."""
    r = np.asarray(r, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64).ravel()
    p = r.shape[0]
    check_rank(r)
    u = np.zeros(p)
    for j in range(p):
        u[j] = (b[j] - r[:j, j] @ u[:j]) / r[j, j]
    return u


def unscaled_cov_diagonal(r) -> np.ndarray:
    """diag((R'R)^-1), one forward and one back solve per column."""
    r = np.asarray(r, dtype=np.float64)
    p = r.shape[0]
    out = np.empty(p)
    for j in range(p):
        e = np.zeros(p)
        e[j] = 1.0
        out[j] = back_substitute(r, forward_substitute(r, e))[j]
    return out
