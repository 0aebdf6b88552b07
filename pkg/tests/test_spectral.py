from __future__ import annotations

import json
import math

import jsonschema
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import fd_cap_eigenvalue, gegenbauer_cap_eigenvalue

from conehardy.cli import load_schema
from conehardy.errors import DomainError, SupercriticalMu
from conehardy.geometry import OmegaSpec
from conehardy.spectral import SpectralData, hardy_constant, indicial_roots, principal_eigenvalue


@pytest.mark.parametrize("n", range(2, 7))
def test_hemisphere_closed_form(n):
    sp = principal_eigenvalue(OmegaSpec.cap(math.pi / 2), n)
    np.testing.assert_allclose(sp.lambda1, n - 1, rtol=1e-8)
    t = np.linspace(0, math.pi / 2, 101)
    np.testing.assert_allclose(sp.phi(t), np.cos(t), atol=1e-9)
    np.testing.assert_allclose(sp.phi(t, 1), -np.sin(t), atol=1e-8)


@pytest.mark.parametrize("theta0", [0.05, 0.3, 0.7, 1.3, 2.0, 2.9])
def test_arc_eigenvalue(theta0):
    sp = principal_eigenvalue(OmegaSpec.cap(theta0), 2)
    np.testing.assert_allclose(sp.lambda1, (math.pi / (2 * theta0)) ** 2, rtol=1e-10)


@pytest.mark.parametrize("n,theta0", [(3, 0.4), (3, 1.0), (4, 2.2), (5, 2.5), (6, 1.7), (4, 0.3)])
def test_cap_eigenvalue_against_hypergeometric_root(n, theta0):
    lam = principal_eigenvalue(OmegaSpec.cap(theta0), n).lambda1
    np.testing.assert_allclose(lam, gegenbauer_cap_eigenvalue(n, theta0), rtol=1e-10)


@pytest.mark.parametrize("n,theta0", [(3, math.pi / 2), (3, 1.0), (5, 2.5)])
def test_cap_eigenvalue_against_finite_volumes(n, theta0):
    lam = principal_eigenvalue(OmegaSpec.cap(theta0), n).lambda1
    np.testing.assert_allclose(lam, fd_cap_eigenvalue(n, theta0), rtol=1e-7)


def test_full_sphere():
    for n in (2, 3, 5):
        sp = principal_eigenvalue(OmegaSpec.full(), n)
        assert sp.lambda1 == 0.0
        np.testing.assert_allclose(sp.phi(np.linspace(0, math.pi, 5)), 1.0)
        np.testing.assert_allclose(sp.hardy_constant, ((n - 2) / 2) ** 2)


def test_domain_monotonicity():
    angles = np.linspace(0.2, 2.9, 10)
    lams = [principal_eigenvalue(OmegaSpec.cap(float(t)), 4).lambda1 for t in angles]
    assert all(b < a for a, b in zip(lams, lams[1:]))


@pytest.mark.parametrize("n,theta0", [(3, 1.0), (5, 2.5), (4, 0.3), (2, 0.05), (6, 3.1), (3, math.pi / 2)])
def test_ode_residual_of_the_table(n, theta0):
    sp = principal_eigenvalue(OmegaSpec.cap(theta0), n)
    theta = np.linspace(1e-3 * theta0, theta0, 10_000)
    rel = np.abs(sp.ode_residual(theta, relative=True)).max()
    assert rel < 1e-6
    if theta0 >= 1.0 and n <= 5:
        # absolute residual where the end nodes are not excessively crowded
        assert np.abs(sp.ode_residual(theta)).max() < 1e-6


def test_phi_normalisation_and_sign():
    sp = principal_eigenvalue(OmegaSpec.cap(1.2), 3)
    t = np.linspace(0, 1.2, 2001)
    v = sp.phi(t)
    np.testing.assert_allclose(v.max(), 1.0, rtol=1e-12)
    assert np.all(v >= 0) and v[-1] == 0.0
    assert np.all(np.diff(v) <= 1e-14)


def test_json_round_trip():
    sp = principal_eigenvalue(OmegaSpec.cap(0.9), 4)
    text = sp.to_json()
    jsonschema.validate(json.loads(text), load_schema("spectral"))
    back = SpectralData.from_json(text)
    assert back.lambda1 == sp.lambda1
    t = np.linspace(0, 0.9, 50)
    np.testing.assert_array_equal(back.phi(t), sp.phi(t))
    with pytest.raises(DomainError):
        SpectralData.from_json(json.dumps({"schema": "other"}))


def test_hardy_constant():
    assert hardy_constant(2.0, 3) == 2.25
    with pytest.raises(DomainError):
        hardy_constant(-1.0, 3)


def test_indicial_examples():
    r = indicial_roots(3, 0.0, 0.0)
    assert (r.gamma_star_minus, r.gamma_star_plus) == (-1.0, 0.0)
    r = indicial_roots(4, 2.0, 1.0)
    np.testing.assert_allclose(r.gamma_star_minus, -1 - math.sqrt(2), rtol=1e-15)
    r = indicial_roots(5, 0.0, 2.25)
    assert r.gamma_star_minus == r.gamma_star_plus == -1.5
    with pytest.raises(SupercriticalMu):
        indicial_roots(3, 0.0, 0.3)


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 8), st.floats(0, 100), st.floats(0, 1))
def test_indicial_residuals(n, lam, frac):
    ch = hardy_constant(lam, n)
    mu = ch - frac * (ch + 50)
    r = indicial_roots(n, lam, mu)
    bound = 1e-12 * (1 + abs(lam - mu))
    assert max(abs(v) for v in r.residuals()) < bound
    assert r.gamma_star_minus <= -(n - 2) / 2 <= r.gamma_star_plus


def test_gamma_star_monotonicity():
    lams = np.linspace(0, 10, 5)
    mus = np.linspace(-5, 0.9, 5)
    g = np.array([[indicial_roots(4, lam, mu).gamma_star_minus for mu in mus] for lam in lams])
    assert np.all(np.diff(g, axis=0) <= 0)  # nonincreasing in lambda1
    assert np.all(np.diff(g, axis=1) >= 0)  # nondecreasing in mu


def test_invalid_dimension():
    with pytest.raises(DomainError):
        principal_eigenvalue(OmegaSpec.full(), 1)
