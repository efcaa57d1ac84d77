"""Deliberately simple centralized solvers used to cross-check the QR path.

Nothing here touches :mod:`fedglm.linalg`; the normal equations are solved
by Gaussian elimination and the GLM pieces are coded from scratch, so
agreement with the main path is independent evidence.
"""
import math

import numpy as np

from .errors import DomainError, NotConverged, SingularDesign

PIVOT_TOL = 1e-14


def gauss_solve(a, b):
    """Solve ``a @ x = b`` by Gaussian elimination with partial pivoting."""
    a = np.array(a, dtype=np.float64)
    b = np.array(b, dtype=np.float64)
    vector = b.ndim == 1
    if vector:
        b = b[:, None]
    n = a.shape[0]
    scale = np.max(np.abs(a)) if a.size else 0.0
    for k in range(n):
        piv = k + int(np.argmax(np.abs(a[k:, k])))
        if abs(a[piv, k]) <= PIVOT_TOL * scale:
            raise SingularDesign(k, f"normal equations are singular at column {k}")
        if piv != k:
            a[[k, piv]] = a[[piv, k]]
            b[[k, piv]] = b[[piv, k]]
        f = a[k + 1:, k] / a[k, k]
        a[k + 1:, k:] -= np.outer(f, a[k, k:])
        b[k + 1:] -= np.outer(f, b[k])
    x = np.zeros_like(b)
    for k in range(n - 1, -1, -1):
        x[k] = (b[k] - a[k, k + 1:] @ x[k + 1:]) / a[k, k]
    return x[:, 0] if vector else x


def normal_equations_fit(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    return gauss_solve(x.T @ x, x.T @ y)


def _mean(family, link, eta):
    if link == "identity":
        mu = eta.copy()
    elif link == "logit":
        with np.errstate(over="ignore"):
            mu = 1.0 / (1.0 + np.exp(-eta))
    elif link == "log":
        mu = np.exp(eta)
    else:
        mu = 1.0 / eta
    if family == "binomial":
        mu = np.clip(mu, 1e-10, 1 - 1e-10)
    elif family in ("poisson", "gamma"):
        mu = np.maximum(mu, 1e-10)
    return mu


def _derivs(family, link, mu):
    dmu = {"identity": np.ones_like(mu), "logit": mu * (1 - mu), "log": mu,
           "inverse": -mu * mu}[link]
    var = {"gaussian": np.ones_like(mu), "binomial": mu * (1 - mu), "poisson": mu,
           "gamma": mu * mu}[family]
    return dmu, var


def _working(x, y, family, link, beta, first):
    if link == "inverse" and first:
        eta = 1.0 / np.maximum(y, 1e-10)
    else:
        eta = x @ beta
    mu = _mean(family, link, eta)
    dmu, var = _derivs(family, link, mu)
    z = eta + (y - mu) / dmu
    w = np.maximum(dmu ** 2 / var, 1e-10)
    return z, w


def summation_irls_fit(partitions, family: str, link: str, maxit: int = 25,
                       tol: float = 1e-8):
    """IRLS where each partition contributes X'WX and X'Wz and the sums are
    solved by elimination, the way summation-based parallel IRLS works."""
    parts = [(np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64).ravel())
             for x, y in partitions]
    p = parts[0][0].shape[1]
    n_total = sum(y.size for _, y in parts)
    beta = np.zeros(p)
    for it in range(maxit + 1):
        work = [(x, *_working(x, y, family, link, beta, it == 0)) for x, y in parts]
        xtwx = sum(x.T @ (w[:, None] * x) for x, _, w in work)
        xtwz = sum(x.T @ (w * z) for x, z, w in work)
        new = gauss_solve(xtwx, xtwz)
        if family in ("binomial", "poisson") or n_total <= p:
            disp = 1.0
        else:
            disp = sum(float(np.sum(w * (z - x @ new) ** 2)) for x, z, w in work) / (n_total - p)
        se = np.sqrt(np.diag(gauss_solve(xtwx, np.eye(p))) * disp)
        delta = np.abs(new - beta)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(delta == 0, 0.0, delta / se)
        beta = new
        if np.max(ratio) < tol:
            return beta
    raise NotConverged(maxit)


def loglik(x, y, family: str, link: str, beta) -> float:
    """Log-likelihood up to terms that do not depend on beta (unit dispersion)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    eta = x @ np.asarray(beta, dtype=np.float64)
    mu = _mean(family, link, eta)
    if family == "gaussian":
        return float(-0.5 * np.sum((y - mu) ** 2))
    if family == "binomial":
        return float(np.sum(y * np.log(mu) + (1 - y) * np.log1p(-mu)))
    if family == "poisson":
        return float(np.sum(y * np.log(mu) - mu) - sum(math.lgamma(v + 1) for v in y))
    if family == "gamma":
        return float(np.sum(-y / mu - np.log(mu)))
    raise DomainError(f"unknown family {family!r}")


def loglik_gradient_fd(x, y, family: str, link: str, beta, rel_step: float = 1e-6):
    """Central finite-difference gradient of :func:`loglik`."""
    beta = np.asarray(beta, dtype=np.float64)
    if not np.all(np.isfinite(beta)):
        raise DomainError("beta must be finite")
    grad = np.empty_like(beta)
    for j in range(beta.size):
        h = rel_step * max(abs(beta[j]), 1.0)
        up, down = beta.copy(), beta.copy()
        up[j] += h
        down[j] -= h
        grad[j] = (loglik(x, y, family, link, up) - loglik(x, y, family, link, down)) / (2 * h)
    return grad


def fisher_step(x, y, family: str, link: str, beta):
    """One Newton/Fisher-scoring step built from the analytic score and
    expected information, solved by elimination."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    beta = np.asarray(beta, dtype=np.float64)
    mu = _mean(family, link, x @ beta)
    dmu, var = _derivs(family, link, mu)
    score = x.T @ ((y - mu) * dmu / var)
    info = x.T @ ((dmu ** 2 / var)[:, None] * x)
    return beta + gauss_solve(info, score)
