"""Exponential families and the IRLS round that turns a GLM into weighted OLS.

Each round maps local data to ``sqrt(W) X`` and ``sqrt(W) z``, factors the
augmented block, lets the caller aggregate factors across nodes, and then
back-solves the merged factor. With a pass-through exchange this is plain
centralized IRLS.
"""
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from .errors import ConfigError, DomainError, NotConverged, ShapeError
from .linalg import TriangularFactor, back_substitute, thin_r_any, unscaled_cov_diagonal
from .lm import FitResult

MU_EPS = 1e-10
WEIGHT_FLOOR = 1e-10
DEFAULT_MAXIT = 25
DEFAULT_TOL = 1e-8

CANONICAL_LINKS = {
    "gaussian": "identity",
    "binomial": "logit",
    "poisson": "log",
    "gamma": "inverse",
}
SUPPORTED = {
    ("gaussian", "identity"),
    ("binomial", "logit"),
    ("poisson", "log"),
    ("gamma", "inverse"),
    ("gamma", "log"),
}


@dataclass(frozen=True)
class Family:
    name: str
    link: Optional[str] = None

    def __post_init__(self):
        if self.name not in CANONICAL_LINKS:
            raise ConfigError(f"unknown family {self.name!r}")
        if self.link is None:
            object.__setattr__(self, "link", CANONICAL_LINKS[self.name])
        if (self.name, self.link) not in SUPPORTED:
            raise ConfigError(f"unsupported family/link pair {self.name}/{self.link}")

    @property
    def fixed_dispersion(self) -> bool:
        return self.name in ("binomial", "poisson")

    def clamp(self, mu):
        mu = np.asarray(mu, dtype=np.float64)
        if self.name == "binomial":
            return np.clip(mu, MU_EPS, 1.0 - MU_EPS)
        if self.name in ("poisson", "gamma"):
            return np.maximum(mu, MU_EPS)
        return mu

    def linkfun(self, mu):
        """g(mu)."""
        mu = np.asarray(mu, dtype=np.float64)
        if self.link == "identity":
            return mu
        if self.link == "logit":
            if np.any((mu <= 0) | (mu >= 1)):
                raise DomainError("logit link needs 0 < mu < 1")
            return np.log(mu / (1.0 - mu))
        if np.any(mu <= 0):
            raise DomainError(f"{self.link} link needs mu > 0")
        if self.link == "log":
            return np.log(mu)
        return 1.0 / mu

    def linkinv(self, eta):
        """g^-1(eta), clamped into the family's mean domain."""
        eta = np.asarray(eta, dtype=np.float64)
        with np.errstate(over="ignore", divide="ignore"):
            if self.link == "identity":
                mu = eta
            elif self.link == "logit":
                mu = 1.0 / (1.0 + np.exp(-eta))
            elif self.link == "log":
                mu = np.exp(eta)
            else:
                if np.any(eta <= 0):
                    raise DomainError("inverse link produced a nonpositive mean")
                mu = 1.0 / eta
        if not np.all(np.isfinite(mu)):
            raise DomainError(f"mean overflowed under the {self.link} link")
        return self.clamp(mu)

    def mu_eta(self, mu):
        """d mu / d eta, written in terms of the (clamped) mean."""
        mu = np.asarray(mu, dtype=np.float64)
        if self.link == "identity":
            return np.ones_like(mu)
        if self.link == "logit":
            return mu * (1.0 - mu)
        if self.link == "log":
            return mu
        return -(mu ** 2)

    def variance(self, mu):
        mu = np.asarray(mu, dtype=np.float64)
        if self.name == "gaussian":
            return np.ones_like(mu)
        if self.name == "binomial":
            return mu * (1.0 - mu)
        if self.name == "poisson":
            return mu
        return mu ** 2

    def check_response(self, y):
        y = np.asarray(y, dtype=np.float64)
        if self.name == "binomial" and np.any((y < 0) | (y > 1)):
            raise DomainError("binomial response must lie in [0, 1]")
        if self.name == "poisson" and np.any(y < 0):
            raise DomainError("poisson response must be nonnegative")
        if self.name == "gamma" and np.any(y <= 0):
            raise DomainError("gamma response must be positive")

    def starting_eta(self, x, y, beta):
        """Linear predictor for the first round.

        Every link except ``inverse`` accepts eta = X beta for beta = 0.
        The inverse link does not, so that case starts from mu = y.
        """
        if self.link == "inverse" and not np.any(beta):
            return self.linkfun(self.clamp(y))
        return x @ beta


@dataclass(frozen=True)
class IrlsState:
    beta: np.ndarray
    eta: np.ndarray
    mu: np.ndarray
    round: int
    converged: bool = False
    factor: Optional[TriangularFactor] = None


def working_quantities(x, y, fam: Family, eta):
    mu = fam.linkinv(eta)
    if fam.link == "identity":
        # eta + (y - mu)/1 with mu = eta is y; skip the rounding
        return mu, np.asarray(y, dtype=np.float64), np.ones_like(mu)
    dmu = fam.mu_eta(mu)
    z = eta + (y - mu) / dmu
    w = np.maximum(dmu ** 2 / fam.variance(mu), WEIGHT_FLOOR)
    if not (np.all(np.isfinite(z)) and np.all(np.isfinite(w))):
        raise DomainError("working response or weights are not finite")
    return mu, z, w


def irls_local_transform(x_local, y_local, beta, fam: Family, eta=None):
    """Return ``(sqrt(W) X, sqrt(W) z)`` for one IRLS round on local data."""
    x = np.asarray(x_local, dtype=np.float64)
    y = np.asarray(y_local, dtype=np.float64).ravel()
    beta = np.asarray(beta, dtype=np.float64).ravel()
    if x.ndim != 2 or x.shape[0] != y.size or x.shape[1] != beta.size:
        raise ShapeError(f"shapes disagree: x {x.shape}, y {y.shape}, beta {beta.shape}")
    if eta is None:
        eta = x @ beta
    _, z, w = working_quantities(x, y, fam, eta)
    sw = np.sqrt(w)
    return x * sw[:, None], sw * z


def convergence_ratio(beta_old, beta_new, f_global: TriangularFactor, dispersion=1.0) -> float:
    se = np.sqrt(unscaled_cov_diagonal(f_global.r) * dispersion)
    delta = np.abs(np.asarray(beta_old) - np.asarray(beta_new))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(delta == 0, 0.0, delta / se)
    return float(np.max(ratio)) if ratio.size else 0.0


def check_convergence(beta_old, beta_new, f_global: TriangularFactor, tol: float,
                      dispersion: float = 1.0) -> bool:
    """True iff max_j |beta_old_j - beta_new_j| / se_j < tol (strict)."""
    return convergence_ratio(beta_old, beta_new, f_global, dispersion) < tol


# (local factor, local row count, round) -> (merged factor, total row count)
Exchange = Callable[[TriangularFactor, int, int], Tuple[TriangularFactor, int]]


def pass_through(factor: TriangularFactor, n_local: int, round: int):
    return factor, n_local


def working_dispersion(fam: Family, f_global: TriangularFactor, n_total: int) -> float:
    if fam.fixed_dispersion or n_total <= f_global.p:
        return 1.0
    return f_global.rss / (n_total - f_global.p)


def fit_glm_local_loop(x_local, y_local, fam: Family, maxit: int = DEFAULT_MAXIT,
                       tol: float = DEFAULT_TOL, exchange: Optional[Exchange] = None,
                       on_round: Optional[Callable[[IrlsState], None]] = None) -> FitResult:
    """Run distributed IRLS from this node's point of view.

    ``exchange`` must return the same merged factor on every node in a
    round; then every node sees the same iterates and stops together.
    The reported ``iterations`` is the loop counter at exit, so a Gaussian
    fit that confirms on its second round reports 1.
    """
    if maxit < 1:
        raise ConfigError("maxit must be at least 1")
    if tol <= 0:
        raise ConfigError("tol must be positive")
    exchange = exchange or pass_through
    x = np.asarray(x_local, dtype=np.float64)
    y = np.asarray(y_local, dtype=np.float64).ravel()
    if x.ndim != 2 or x.shape[0] != y.size:
        raise ShapeError(f"x has shape {x.shape} but y has {y.size} rows")
    fam.check_response(y)
    n_local, p = x.shape
    beta = np.zeros(p)
    eta = fam.starting_eta(x, y, beta)

    i = 0
    result = None
    while i <= maxit:
        mu, z, w = working_quantities(x, y, fam, eta)
        sw = np.sqrt(w)
        local = thin_r_any(np.column_stack([x * sw[:, None], sw * z]), p)
        glob, n_total = exchange(local, n_local, i)
        beta_old = beta
        beta = back_substitute(glob.r, glob.theta)
        dispersion = working_dispersion(fam, glob, n_total)
        converged = check_convergence(beta_old, beta, glob, tol, dispersion)
        if on_round is not None:
            on_round(IrlsState(beta, eta, mu, i, converged, glob))
        se = np.sqrt(unscaled_cov_diagonal(glob.r) * dispersion)
        result = FitResult(beta=beta, rss=glob.rss, std_errors=se, n=n_total, p=p,
                           iterations=i, converged=converged, dispersion=dispersion)
        if converged:
            return result
        eta = x @ beta
        i += 1
    raise NotConverged(maxit, result)


def fit_glm(x, y, fam: Family, maxit: int = DEFAULT_MAXIT, tol: float = DEFAULT_TOL,
            on_round=None) -> FitResult:
    """Centralized IRLS: the local loop with a pass-through exchange."""
    return fit_glm_local_loop(x, y, fam, maxit, tol, None, on_round)
