from __future__ import annotations

import json
import math

import jsonschema
import numpy as np
import pytest
from oracles import fd_hardy, polar_angle

from conehardy.classifier import ScalarParams, SystemParams
from conehardy.cli import load_schema
from conehardy.errors import DomainError, NoFeasibleGamma, NoFeasiblePair
from conehardy.geometry import ConeDomain, ConePoint, OmegaSpec
from conehardy.quadrature import Profile
from conehardy.spectral import gamma_roots, principal_eigenvalue
from conehardy.verifier import (
    LOG_POWER,
    POWER_LAW,
    AprioriProbe,
    MarginGrid,
    a_interval,
    apriori_check,
    check_csys,
    cond1_slacks,
    construct_scalar_candidate,
    construct_system_candidate,
    coupled_amplitudes,
    eta,
    eta_prime,
    lhs_hardy,
    scalar_margin,
    system_margin,
    system_slacks,
    worker_count,
)


def _setup(n, omega=None, mu=0.0, rho=1.0):
    dom = ConeDomain(n, omega or OmegaSpec.full(), rho)
    sp = principal_eigenvalue(dom.omega, n)
    if mu == "critical":
        mu = sp.hardy_constant
    return dom, sp, gamma_roots(sp, mu)


@pytest.fixture(scope="module")
def full3():
    return _setup(3)


@pytest.fixture(scope="module")
def scalar3(full3):
    dom, sp, roots = full3
    params = ScalarParams(3.0, 3.0, 1.0, 0.0)
    cand = construct_scalar_candidate(dom, sp, roots, params)
    return params, cand, scalar_margin(dom, sp, roots, params, cand)


def test_power_law_candidate(full3):
    dom, sp, roots = full3
    cand = construct_scalar_candidate(dom, sp, roots, ScalarParams(3.0, 3.0, 1.0, 0.0))
    assert cand.kind == POWER_LAW and cand.amplitude == 1.0
    # the first scan step t = 0.05 is already feasible; gamma = -0.95 (t = 0.1) is feasible too
    np.testing.assert_allclose([cand.t, cand.gamma], [0.05, -0.975])
    assert min(cond1_slacks(3, 1.0, 3.0, 3.0, -0.95)) > 0
    assert roots.gamma_star_minus < cand.gamma < -0.5


def test_decay_ordering_of_candidates():
    for n, mu, alpha, p, q in [(3, 0.0, 1.0, 3.0, 3.0), (3, 0.0, 0.0, 3.5, 3.5), (4, 0.5, 2.0, 1.8, 1.8),
                               (5, 1.0, 1.5, 2.0, 2.5)]:
        dom, sp, roots = _setup(n, mu=mu)
        g = construct_scalar_candidate(dom, sp, roots, ScalarParams(p, q, alpha, mu)).gamma
        assert g - 2 > n - alpha + (p + q) * g
        assert g - 2 > -alpha + q * g
        assert abs(p * abs(g) - n) >= 1e-3


def test_log_candidate():
    dom, sp, roots = _setup(3, OmegaSpec.cap(1.2), "critical", rho=2.0)
    cand = construct_scalar_candidate(dom, sp, roots, ScalarParams(6.0, 6.0, 1.0, sp.hardy_constant))
    assert cand.kind == LOG_POWER
    assert cand.profile.tau == 0.5 and cand.profile.sigma * dom.rho == 8.0
    assert cand.gamma == roots.gamma_star_minus == -0.5


def test_no_feasible_gamma_near_thresholds(full3):
    dom, sp, roots = full3
    with pytest.raises(NoFeasibleGamma):
        construct_scalar_candidate(dom, sp, roots, ScalarParams(2.001, 4.0, 1.0, 0.0))
    with pytest.raises(NoFeasibleGamma):
        construct_scalar_candidate(dom, sp, roots, ScalarParams(3.0, 2.0005, 1.0, 0.0))


def test_lhs_power_law_example():
    dom, sp, roots = _setup(3)
    val = lhs_hardy(Profile(1.0, 1.0, -0.8), sp, roots, ConePoint.on_meridian(3, 2.0, 0.4))
    np.testing.assert_allclose(val, 0.16 * 2**-2.8, rtol=1e-14)


@pytest.mark.parametrize("n,theta0,mu", [(3, None, 0.0), (4, 1.1, 0.7), (5, 2.5, -3.0), (2, 0.4, 1.0)])
def test_indicial_annihilation(n, theta0, mu):
    dom, sp, roots = _setup(n, OmegaSpec.cap(theta0) if theta0 else None, mu)
    rng = np.random.default_rng(3)
    r = rng.uniform(1, 100, 100)
    t = rng.uniform(0, dom.omega.theta_max, 100)
    for g in (roots.gamma_star_minus, roots.gamma_star_plus):
        scale = np.abs(sp.lambda1 - mu) + g * g + 1
        v = lhs_hardy(Profile(1.0, 1.0, g), sp, roots, (r, t)) / (sp.phi(t) * r ** (g - 2))
        assert np.all(np.abs(np.nan_to_num(v)) < 1e-12 * scale)


def test_lhs_log_example():
    dom, sp, roots = _setup(3, mu="critical")
    assert roots.mu == 0.25
    x = ConePoint.on_meridian(3, math.e, 0.0)
    val = lhs_hardy(Profile(1.0, 1.0, roots.gamma_star_minus, 0.5, 1.0), sp, roots, x)
    np.testing.assert_allclose(val, 0.25 * math.e**-2.5, rtol=1e-14)
    with pytest.raises(DomainError):
        lhs_hardy(Profile(1.0, 1.0, -0.7, 0.5, 1.0), sp, roots, x)


def _fd_check(dom, sp, roots, profile, rng, npts):
    n = dom.n
    worst = 0.0
    for _ in range(npts):
        r = rng.uniform(2 * dom.rho, 50 * dom.rho)
        t = rng.uniform(0.05, 0.9) * dom.omega.theta_max
        x = ConePoint.on_meridian(n, r, t).cart
        u = lambda y: float(profile(sp, np.linalg.norm(y), polar_angle(y)))  # noqa: E731
        fd = fd_hardy(u, x, roots.mu, 5e-3 * r)
        exact = float(lhs_hardy(profile, sp, roots, (r, t)))
        worst = max(worst, abs(fd / exact - 1))
    return worst


@pytest.mark.parametrize("n,theta0", [(3, None), (3, 1.2), (5, 2.0)])
def test_finite_difference_oracle(n, theta0):
    rng = np.random.default_rng(11)
    omega = OmegaSpec.cap(theta0) if theta0 else None
    dom, sp, roots = _setup(n, omega, 0.1)
    g = roots.gamma_star_minus + 0.3 * (-(n - 2) / 2 - roots.gamma_star_minus)
    assert _fd_check(dom, sp, roots, Profile(2.0, 1.0, g), rng, 20) < 1e-5
    dom, sp, roots = _setup(n, omega, "critical")
    prof = Profile(1.0, 1.0, roots.gamma_star_minus, 0.5, 8.0 / dom.rho)
    assert _fd_check(dom, sp, roots, prof, rng, 20) < 1e-5


def test_scalar_margin_running_example(scalar3):
    params, cand, rep = scalar3
    assert rep.ok and rep.min_ratio > 0
    np.testing.assert_allclose([rep.radii[0], rep.radii[-1]], [2.0, 200.0])
    assert rep.decade_spread < 20 and rep.trend_free
    np.testing.assert_allclose(rep.amplitude, rep.min_ratio ** (1 / 5), rtol=1e-15)
    assert rep.worst_scaled_margin >= 1 - 1e-12
    jsonschema.validate(json.loads(rep.to_json()), load_schema("margin_report"))


def test_homogeneity(full3, scalar3):
    dom, sp, roots = full3
    params, cand, rep = scalar3
    grid = MarginGrid(shells_per_decade=6)
    base = scalar_margin(dom, sp, roots, params, cand, grid)
    for t in (0.3, 4.0):
        scaled = scalar_margin(dom, sp, roots, params, cand.with_amplitude(t), grid)
        np.testing.assert_allclose(scaled.lhs, t * np.asarray(base.lhs), rtol=1e-14)
        np.testing.assert_allclose(scaled.rhs, t**6 * np.asarray(base.rhs), rtol=1e-13)
        np.testing.assert_allclose(scaled.min_ratio, t**-5 * base.min_ratio, rtol=1e-13)


def test_alpha_zero_margin():
    dom, sp, roots = _setup(3)
    params = ScalarParams(3.5, 3.5, 0.0, 0.0)
    cand = construct_scalar_candidate(dom, sp, roots, params)
    rep = scalar_margin(dom, sp, roots, params, cand, MarginGrid(shells_per_decade=12))
    # with alpha = 0 the convolution is the total mass of u^p
    conv = np.asarray(rep.rhs)[:, 0] / cand(sp, np.asarray(rep.radii), 0.0) ** params.q
    np.testing.assert_allclose(conv, conv[0], rtol=1e-6)
    assert rep.min_ratio > 0 and rep.decade_spread < 20


def test_margin_grid_validation():
    dom = ConeDomain(3, OmegaSpec.cap(1.0), 1.0)
    g = MarginGrid(decades=2, shells_per_decade=4, n_angles=4)
    np.testing.assert_allclose(g.radii(dom), 2 * 10 ** (np.arange(9) / 4))
    np.testing.assert_allclose(g.angles(dom), [0, 0.25, 0.5, 0.75])
    with pytest.raises(DomainError):
        MarginGrid(r_min=1.5).radii(dom)


def test_system_a_interval_example(full3):
    dom, sp, roots = full3
    lo, hi = a_interval(3, 1.0, 3.0, 3.0, 4.0, -0.95, roots)
    np.testing.assert_allclose([lo, hi], [-0.95, -0.7375])
    np.testing.assert_allclose(0.5 * (lo + hi), -0.84375)
    assert check_csys(3, 1.0, 3.0, 3.0, 4.0, -0.84375, -0.95)
    assert min(system_slacks(3, 1.0, 3.0, 3.0, 4.0, -0.95)) > 0


def test_system_candidate(full3):
    dom, sp, roots = full3
    cand = construct_system_candidate(dom, sp, roots, SystemParams(3.0, 3.0, 1.0, 0.0, 4.0))
    assert cand.kind == POWER_LAW
    assert min(system_slacks(3, 1.0, 3.0, 3.0, 4.0, cand.b)) >= 1e-3
    assert check_csys(3, 1.0, 3.0, 3.0, 4.0, cand.a, cand.b)
    assert roots.gamma_star_minus < cand.a < 0 and roots.gamma_star_minus < cand.b < -0.5


def test_system_infeasible(full3):
    dom, sp, roots = full3
    with pytest.raises(NoFeasiblePair):
        construct_system_candidate(dom, sp, roots, SystemParams(3.0, 3.0, 1.0, 0.0, 2.0))
    dom, sp, roots = _setup(3, mu="critical")
    with pytest.raises(NoFeasiblePair):
        construct_system_candidate(dom, sp, roots, SystemParams(6.0, 6.0, 1.0, 0.25, 5.0))
    cand = construct_system_candidate(dom, sp, roots, SystemParams(6.0, 6.0, 1.0, 0.25, 6.0))
    assert cand.kind == LOG_POWER and cand.u == cand.v


def test_system_margin(full3):
    dom, sp, roots = full3
    params = SystemParams(3.0, 3.0, 1.0, 0.0, 4.0)
    cand = construct_system_candidate(dom, sp, roots, params)
    res = system_margin(dom, sp, roots, params, cand, MarginGrid(shells_per_decade=12))
    assert res.first.ok and res.second.ok and res.first.trend_free and res.second.trend_free
    # second report is local: compare with the closed forms directly
    r = np.asarray(res.second.radii)
    lhs_v = (0 - cand.b * (cand.b + 1)) * r ** (cand.b - 2)
    np.testing.assert_allclose(np.asarray(res.second.ratios)[:, 0], lhs_v / r ** (4 * cand.a), rtol=1e-10)
    assert max(res.coupling_residuals(3.0, 3.0, 4.0)) < 1e-12
    assert res.first.worst_scaled_margin >= 1 - 1e-12 and res.second.worst_scaled_margin >= 1 - 1e-12
    np.testing.assert_allclose(res.c, min(res.first.min_ratio, res.second.min_ratio))
    jsonschema.validate(json.loads(res.first.to_json()), load_schema("margin_report"))


def test_coupled_amplitudes_identity():
    for c, p, q, s in [(0.01, 3.0, 3.0, 4.0), (7.0, 1.8, 1.8, 3.0), (0.2, 1.6, 1.6, 3.0)]:
        c1, c2 = coupled_amplitudes(c, p, q, s)
        np.testing.assert_allclose(c1 * c, c2 ** (p + q), rtol=1e-12)
        np.testing.assert_allclose(c2 * c, c1**s, rtol=1e-12)


def test_eta():
    np.testing.assert_allclose(eta([1.0, 2.0, 2.5, 3.0, 4.0]), [0, 1, 1, 1, 0])
    np.testing.assert_allclose(eta_prime([1.0, 2.5, 4.0]), [0, 0, 0])
    t = np.linspace(0.5, 4.5, 4001)
    v = eta(t)
    assert v.min() >= 0 and v.max() <= 1
    # derivative matches a central difference and has no jumps
    fd = (eta(t + 1e-6) - eta(t - 1e-6)) / 2e-6
    np.testing.assert_allclose(fd, eta_prime(t), atol=1e-5)
    assert np.abs(np.diff(eta_prime(t))).max() < 1e-2


def test_apriori_probe_validation():
    with pytest.raises(DomainError):
        AprioriProbe(lambda_c=4.0)
    with pytest.raises(DomainError):
        AprioriProbe(m=1.0)
    with pytest.raises(DomainError):
        AprioriProbe(radii=(10.0,))


@pytest.mark.parametrize("m", [0.5, 0.0])
def test_apriori_bounded(full3, scalar3, m):
    dom, sp, roots = full3
    params, cand, rep = scalar3
    sol = cand.with_amplitude(rep.amplitude)
    out = apriori_check(dom, sp, params, sol, AprioriProbe(5.0, m, (10.0, 30.0, 100.0)))
    assert out.ok and out.spread < 1e3 and not out.monotone_growth
    assert abs(out.slope_measured - out.slope_predicted) < 0.1
    jsonschema.validate(json.loads(out.to_json()), load_schema("apriori"))


def test_worker_count(monkeypatch):
    monkeypatch.setenv("CONEHARDY_THREADS", "3")
    assert worker_count() == 3
    monkeypatch.setenv("CONEHARDY_THREADS", "0")
    with pytest.raises(DomainError):
        worker_count()
    monkeypatch.delenv("CONEHARDY_THREADS")
    assert worker_count() >= 1


def test_threads_do_not_change_results(full3, scalar3, monkeypatch):
    dom, sp, roots = full3
    params, cand, _ = scalar3
    grid = MarginGrid(shells_per_decade=3)
    monkeypatch.setenv("CONEHARDY_THREADS", "1")
    a = scalar_margin(dom, sp, roots, params, cand, grid)
    monkeypatch.setenv("CONEHARDY_THREADS", "4")
    b = scalar_margin(dom, sp, roots, params, cand, grid)
    assert a.rhs == b.rhs
