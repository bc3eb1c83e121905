import numpy as np
import pytest

from zrplab.env import Environment
from zrplab.jackson import (
    JacksonError,
    check_recurrent,
    invariant_product,
    lambda_profile,
    perturbed_residual,
    stationarity_residual,
    truncate_environment,
    verification_report,
)
from zrplab.measures import MM1, marginal, sample_marginal
from zrplab.sim import Configuration, CoupledState, simulate


def test_lambda_constant_boundaries():
    prof = lambda_profile(np.array([0.5, 1.0, 1.0, 0.5]), 0, 0.7)
    assert np.allclose(prof.lam, 0.5, atol=1e-12)


def test_lambda_worked_value():
    prof = lambda_profile(np.array([0.4, 0.9, 0.8]), 0, 0.75)
    assert prof.value(1) == pytest.approx(0.5, abs=1e-12)
    assert prof.value(0) == pytest.approx(0.4, abs=1e-12)
    assert prof.value(2) == pytest.approx(0.8, abs=1e-12)


def test_lambda_p1_collapse():
    prof = lambda_profile(np.array([0.3, 1.0, 1.0, 0.9]), -1, 1.0)
    assert np.allclose(prof.lam[:-1], 0.3, atol=1e-15)
    assert prof.lam[-1] == pytest.approx(0.9)


def test_lambda_range_and_monotone():
    rng = np.random.default_rng(5)
    for _ in range(50):
        kl, kr = rng.uniform(0.2, 1.0, 2)
        kappa = np.concatenate([[kl], rng.uniform(0.2, 1.0, 6), [kr]])
        p = rng.uniform(0.55, 1.0)
        lam = lambda_profile(kappa, 0, p).lam
        assert lam.min() >= min(kl, kr) - 1e-12
        assert lam.max() <= max(kl, kr) + 1e-12
        d = np.diff(lam)
        assert np.all(d >= -1e-12) or np.all(d <= 1e-12)


def test_check_recurrent():
    assert check_recurrent(np.array([0.5, 1.0, 1.0, 1.0, 0.5]), -2, 0.7)
    assert not check_recurrent(np.array([0.5, 0.4, 0.5]), 0, 0.7)
    rng = np.random.default_rng(9)
    for _ in range(100):
        kl, kr = rng.uniform(0.2, 0.8, 2)
        interior = rng.uniform(max(kl, kr) + 0.01, 1.0, 5)
        kappa = np.concatenate([[kl], interior, [kr]])
        assert check_recurrent(kappa, 0, rng.uniform(0.55, 1.0))


def test_invariant_product_geometric():
    kappa = np.array([0.5, 1.0, 1.0, 0.5])
    mu = invariant_product(kappa, 0, 0.7, MM1)
    for x in (1, 2):
        m = mu.marginal_at(x)
        rho = m.beta  # fugacity lambda/kappa
        for n in range(6):
            assert m.prob(n) == pytest.approx((1 - rho) * rho ** n, abs=1e-12)


def test_invariant_product_requires_recurrence():
    with pytest.raises(JacksonError):
        invariant_product(np.array([0.9, 0.5, 0.9]), 0, 0.7, MM1)


def test_stationarity_residual_small_and_sensitive():
    kappa = np.array([0.5, 1.0, 1.0, 1.0, 0.5])
    for x in (-1, 0, 1):
        for k in (0, 1, 3, 7):
            assert abs(stationarity_residual(kappa, -2, 0.7, MM1, x, k)) < 1e-8
    assert abs(perturbed_residual(kappa, -2, 0.7, MM1, 0, 3)) > 1e-3


def test_residual_other_rate_function():
    g2 = type(MM1)(values=(0.0, 0.5, 1.0))
    kappa = np.array([0.4, 0.9, 1.0, 0.9, 0.4])
    for x in (-1, 0, 1):
        assert abs(stationarity_residual(kappa, -2, 0.8, g2, x, 2)) < 1e-8


def test_verification_report():
    rep = verification_report(np.array([0.5, 1.0, 1.0, 0.5]), 0, 0.7, MM1, k_max=10)
    assert rep["recurrent"] is True
    assert rep["max_residual"] < 1e-8
    assert set(rep["lambda"]) == {"0", "1", "2", "3"}


def test_truncate_finite_a_eps():
    vals = np.array([0.55, 1.0, 1.0, 0.6, 1.0])
    env = Environment(window=(-2, 2), alpha=vals, c=0.5)
    l, r_prime, at = truncate_environment(env, 0.1, 0.8)
    assert l == -2 and r_prime == 1
    assert np.array_equal(at, vals[: r_prime + 3])


def test_truncate_fallback():
    vals = np.full(21, 0.9)
    vals[2] = 0.55  # A_eps = -8
    env = Environment(window=(-10, 10), alpha=vals, c=0.5)
    l, r_prime, at = truncate_environment(env, 0.1, 0.8)
    assert l == -8
    assert r_prime == 10  # floor(1/eps)
    assert at[-1] == 0.9


def test_truncate_consistency_identity():
    """Replacing the right end rate with the lambda value there leaves the
    profile on the shortened window unchanged."""
    rng = np.random.default_rng(11)
    for _ in range(25):
        n = 14
        vals = rng.uniform(0.6, 1.0, n)
        vals[0] = 0.55
        env = Environment(window=(-3, n - 4), alpha=vals, c=0.5)
        p = rng.uniform(0.55, 1.0)
        eps = 0.1
        l, r_prime, at = truncate_environment(env, eps, p)
        r = min(int(np.floor(1.0 / eps)), n - 4)
        full = lambda_profile(env.values(l, r), l, p)
        trunc = lambda_profile(at, l, p)
        for x in range(l, r_prime + 1):
            assert trunc.value(x) == pytest.approx(full.value(x), abs=1e-12)


def test_simulated_marginals_match_invariant():
    kappa = np.array([0.5, 1.0, 1.0, 1.0, 0.5])
    window = (-2, 2)
    env = Environment(window=window, alpha=kappa, c=0.5)
    mu = invariant_product(kappa, -2, 0.7, MM1)
    m = mu.marginal_at(0)
    samples = []
    for seed in range(600):
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([21, seed])))
        occ = sample_marginal(m, rng, 5)
        st = CoupledState([Configuration(window, occ, boundary_mode="reservoir")], [env])
        st, _ = simulate(st, 40.0, rng, MM1, 0.7)
        samples.append(st.configs[0].occ[2])
    s = np.array(samples)
    pmf = np.bincount(s) / s.size
    ref = np.array([m.prob(n) for n in range(len(pmf))])
    tv = 0.5 * (np.abs(pmf - ref).sum() + max(0.0, 1.0 - ref.sum()))
    assert tv < 0.05
