import numpy as np
import pytest

from fedglm.errors import ConfigError, DomainError, NotConverged
from fedglm.glm import (
    Family,
    check_convergence,
    fit_glm,
    fit_glm_local_loop,
    irls_local_transform,
)
from fedglm.linalg import TriangularFactor
from fedglm.lm import fit_lm
from fedglm.oracle import fisher_step, loglik, loglik_gradient_fd

FAMILIES = [
    Family("gaussian"),
    Family("binomial"),
    Family("poisson"),
    Family("gamma", "log"),
    Family("gamma", "inverse"),
]


def simulate(fam: Family, seed=0, n=150, p=3):
    rng = np.random.default_rng(seed)
    x = np.column_stack([np.ones(n), rng.standard_normal((n, p - 1))])
    if fam.name == "gaussian":
        y = x @ np.array([1.0, -2.0, 0.5]) + rng.standard_normal(n)
    elif fam.name == "binomial":
        prob = 1 / (1 + np.exp(-(x @ np.array([0.3, 1.0, -0.8]))))
        y = (rng.random(n) < prob).astype(float)
    elif fam.name == "poisson":
        y = rng.poisson(np.exp(x @ np.array([0.5, 0.4, -0.3]))).astype(float)
    elif fam.link == "log":
        y = rng.gamma(2.0, np.exp(x @ np.array([0.5, 0.4, -0.3])) / 2.0)
    else:
        mu = 1 / (x @ np.array([1.0, 0.1, -0.1]))
        y = rng.gamma(2.0, mu / 2.0)
    return x, y


def test_canonical_links():
    assert Family("gaussian").link == "identity"
    assert Family("binomial").link == "logit"
    assert Family("poisson").link == "log"
    assert Family("gamma").link == "inverse"


@pytest.mark.parametrize("name,link", [("binomial", "log"), ("poisson", "identity"),
                                       ("gaussian", "logit"), ("weibull", None)])
def test_unsupported_pairs(name, link):
    with pytest.raises(ConfigError):
        Family(name, link)


def test_logit_symmetry_point():
    fam = Family("binomial")
    assert fam.linkfun(0.5) == 0.0
    mu = fam.linkinv(0.0)
    assert mu == 0.5
    assert fam.mu_eta(mu) == 0.25
    assert fam.variance(mu) == 0.25


def test_poisson_log_at_zero():
    fam = Family("poisson")
    mu = fam.linkinv(0.0)
    assert mu == 1.0 and fam.variance(mu) == 1.0 and fam.mu_eta(mu) == 1.0


def test_gamma_variance_and_inverse_link():
    fam = Family("gamma")
    assert fam.variance(3.0) == 9.0
    assert fam.linkfun(4.0) == 0.25
    assert fam.linkinv(0.25) == 4.0
    assert fam.mu_eta(2.0) == -4.0


def test_link_domain_errors():
    with pytest.raises(DomainError):
        Family("binomial").linkfun(1.5)
    with pytest.raises(DomainError):
        Family("poisson").linkfun(-1.0)
    with pytest.raises(DomainError):
        Family("poisson").linkinv(1e4)
    with pytest.raises(DomainError):
        Family("gamma").linkinv(-0.5)


def test_binomial_mean_is_clamped():
    fam = Family("binomial")
    assert fam.linkinv(-800.0) == 1e-10
    assert fam.linkinv(800.0) == 1 - 1e-10


def test_gaussian_transform_is_identity():
    x, y = simulate(Family("gaussian"))
    xt, zt = irls_local_transform(x, y, np.array([0.3, -1.0, 2.0]), Family("gaussian"))
    np.testing.assert_array_equal(xt, x)
    np.testing.assert_array_equal(zt, y)


def test_binomial_transform_at_zero():
    x, y = simulate(Family("binomial"), n=20)
    xt, zt = irls_local_transform(x, y, np.zeros(3), Family("binomial"))
    np.testing.assert_allclose(xt, 0.5 * x, rtol=1e-15)  # sqrt(0.25)
    np.testing.assert_allclose(zt, 0.5 * 4 * (y - 0.5), rtol=1e-15)


def fd_newton_step(x, y, family, link, beta, h=1e-3):
    """Newton step from finite-difference score and Hessian of the oracle
    log-likelihood."""
    p = beta.size
    f = lambda b: loglik(x, y, family, link, b)
    g = loglik_gradient_fd(x, y, family, link, beta)
    hess = np.empty((p, p))
    e = np.eye(p) * h
    for j in range(p):
        for k in range(p):
            hess[j, k] = (f(beta + e[j] + e[k]) - f(beta + e[j] - e[k])
                          - f(beta - e[j] + e[k]) + f(beta - e[j] - e[k])) / (4 * h * h)
    return beta - np.linalg.solve(hess, g)


def test_poisson_round_is_newton_step():
    fam = Family("poisson")
    x, y = simulate(fam, seed=3, n=40)
    beta0 = np.array([0.2, 0.1, -0.1])
    xt, zt = irls_local_transform(x, y, beta0, fam)
    step = fit_lm(xt, zt).beta
    np.testing.assert_allclose(step, fd_newton_step(x, y, "poisson", "log", beta0), atol=1e-5)


@pytest.mark.parametrize("fam", FAMILIES[1:], ids=lambda f: f"{f.name}-{f.link}")
def test_iterates_are_fisher_steps(fam):
    x, y = simulate(fam, seed=4, n=200)
    states = []
    fit_glm(x, y, fam, on_round=states.append)
    # the inverse link starts from mu = y rather than beta = 0
    start = 1 if fam.link == "inverse" else 0
    prev = states[0].beta if start else np.zeros(3)
    for s in states[start:]:
        np.testing.assert_allclose(s.beta, fisher_step(x, y, fam.name, fam.link, prev),
                                   rtol=0, atol=1e-8)
        prev = s.beta
    assert len(states) >= 3


def test_convergence_equal_betas():
    f = TriangularFactor.from_full(np.diag([2.0, 3.0, 1.0]))
    assert check_convergence(np.array([1.0, 2.0]), np.array([1.0, 2.0]), f, 1e-12)


def test_convergence_strict_boundary():
    f = TriangularFactor.from_full(np.eye(3))  # se = 1 with unit dispersion
    assert not check_convergence(np.zeros(2), np.array([0.5, -0.5]), f, 0.5)
    assert check_convergence(np.zeros(2), np.array([0.25, -0.5]), f, 0.5 + 2 ** -20)


def test_gaussian_converges_in_one_iteration():
    fam = Family("gaussian")
    x, y = simulate(fam)
    fit = fit_glm(x, y, fam)
    assert fit.converged and fit.iterations == 1
    lm = fit_lm(x, y)
    np.testing.assert_array_equal(fit.beta, lm.beta)
    np.testing.assert_allclose(fit.std_errors, lm.std_errors, rtol=1e-12)


def test_intercept_only_binomial():
    fit = fit_glm(np.ones((2, 1)), np.array([0.0, 1.0]), Family("binomial"))
    assert fit.beta[0] == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("fam", FAMILIES, ids=lambda f: f"{f.name}-{f.link}")
def test_score_vanishes_at_optimum(fam):
    x, y = simulate(fam, seed=5, n=300)
    fit = fit_glm(x, y, fam)
    assert fit.converged
    grad = loglik_gradient_fd(x, y, fam.name, fam.link, fit.beta)
    assert np.max(np.abs(grad)) <= 1e-6


def test_gamma_dispersion_is_pearson():
    fam = Family("gamma", "log")
    x, y = simulate(fam, seed=6, n=400)
    fit = fit_glm(x, y, fam)
    mu = np.exp(x @ fit.beta)
    pearson = np.sum((y - mu) ** 2 / mu ** 2) / (len(y) - 3)
    assert fit.dispersion == pytest.approx(pearson, rel=1e-6)


def test_binomial_standard_errors_are_unscaled():
    fam = Family("binomial")
    x, y = simulate(fam, seed=7, n=300)
    fit = fit_glm(x, y, fam)
    mu = 1 / (1 + np.exp(-(x @ fit.beta)))
    info = x.T @ ((mu * (1 - mu))[:, None] * x)
    np.testing.assert_allclose(fit.std_errors, np.sqrt(np.diag(np.linalg.inv(info))),
                               rtol=1e-6)
    assert fit.dispersion == 1.0


def test_not_converged_carries_last_iterate():
    fam = Family("binomial")
    x, y = simulate(fam)
    with pytest.raises(NotConverged) as info:
        fit_glm(x, y, fam, maxit=1)
    assert info.value.maxit == 1
    assert info.value.result is not None and not info.value.result.converged


def test_bad_response_for_family():
    x = np.ones((3, 1))
    with pytest.raises(DomainError):
        fit_glm(x, np.array([0.0, 2.0, 1.0]), Family("binomial"))
    with pytest.raises(DomainError):
        fit_glm(x, np.array([1.0, 0.0, 1.0]), Family("gamma"))


def test_loop_validates_controls():
    x, y = simulate(Family("binomial"))
    with pytest.raises(ConfigError):
        fit_glm_local_loop(x, y, Family("binomial"), maxit=0)
    with pytest.raises(ConfigError):
        fit_glm_local_loop(x, y, Family("binomial"), tol=0.0)


def test_exchange_callback_sees_every_round():
    fam = Family("binomial")
    x, y = simulate(fam)
    calls = []

    def exchange(factor, n_local, rnd):
        calls.append((rnd, n_local))
        return factor, n_local

    fit = fit_glm_local_loop(x, y, fam, exchange=exchange)
    assert [c[0] for c in calls] == list(range(fit.iterations + 1))
    assert all(n == len(y) for _, n in calls)
