"""First Dirichlet eigenpair of the Laplace-Beltrami operator on a cap,
the Hardy constant of the cone and the roots of gamma(gamma+N-2) = lambda1 - mu.

On a cap the first eigenfunction is axisymmetric and solves

    phi'' + (N-2) cot(theta) phi' + lambda phi = 0,  phi'(0) = 0, phi(theta0) = 0,

which has a regular singular point at theta = 0. We start the integration
slightly off the pole with the series 1 - lambda theta^2 / (2(N-1)) and shoot
on lambda.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import BPoly
from scipy.optimize import brentq

from conehardy.errors import DomainError, NumericalError, SupercriticalMu
from conehardy.geometry import OmegaSpec

SCHEMA_VERSION = 1
N_TABLE = 2048
SERIES_START = 1e-4
ODE_TOL = 1e-12
# the table is differentiated twice, so it is integrated more tightly
TABLE_TOL = 2.5e-14
# residual budget for the indicial quadratic; see mu_tolerance
MU_TOL = 1e-12


def hardy_constant(lambda1: float, n: int) -> float:
    if lambda1 < 0:
        raise DomainError(f"lambda1 must be >= 0, got {lambda1}")
    return lambda1 + ((n - 2) / 2) ** 2


@dataclass(frozen=True, eq=False)
class SpectralData:
    n: int
    omega: OmegaSpec
    lambda1: float
    phi_nodes: np.ndarray = field(repr=False)
    phi_values: np.ndarray = field(repr=False)
    phi_slopes: np.ndarray = field(repr=False)

    @property
    def hardy_constant(self) -> float:
        return hardy_constant(self.lambda1, self.n)

    @cached_property
    def _spline(self):
        if self.omega.is_full:
            return None
        # quintic Hermite data: the ODE itself supplies phi''
        t, v, d1 = self.phi_nodes, self.phi_values, self.phi_slopes
        d2 = np.empty_like(v)
        d2[0] = -self.lambda1 / (self.n - 1) * v[0]
        d2[1:] = -(self.n - 2) / np.tan(t[1:]) * d1[1:] - self.lambda1 * v[1:]
        return BPoly.from_derivatives(t, np.column_stack([v, d1, d2]))

    def phi(self, theta, nu: int = 0):
        """Eigenfunction (or its nu-th derivative) at polar angle theta.

        Values outside [0, theta0] are clipped to the nearest end; the
        function itself is clipped at zero so roundoff never makes it negative.
        """
        theta = np.asarray(theta, dtype=float)
        if self._spline is None:
            return np.ones_like(theta) if nu == 0 else np.zeros_like(theta)
        t = np.clip(theta, 0.0, self.omega.theta_max)
        out = self._spline(t, nu)
        if nu == 0:
            out = np.maximum(out, 0.0)
        return out

    def ode_residual(self, theta, relative: bool = False) -> np.ndarray:
        """phi'' + (N-2) cot(theta) phi' + lambda1 phi on the interpolant.

        With relative=True the values are divided by the largest magnitude
        any of the three terms reaches on the given angles. Near theta0 the table nodes are ~1e-6 apart, so
        float64 roundoff in the values alone shows up in phi'' at the 1e-5
        level for narrow caps; the relative form is insensitive to that.
        """
        theta = np.asarray(theta, dtype=float)
        d0, d1, d2 = self.phi(theta), self.phi(theta, 1), self.phi(theta, 2)
        t1 = (self.n - 2) / np.tan(theta) * d1
        t0 = self.lambda1 * d0
        res = d2 + t1 + t0
        if relative:
            scale = max(np.abs(d2).max(), np.abs(t1).max(), np.abs(t0).max())
            if scale > 0:
                res = res / scale
        return res

    def to_json(self) -> str:
        return json.dumps({
            "schema": "conehardy.spectral",
            "version": SCHEMA_VERSION,
            "n": self.n,
            "omega": self.omega.to_dict(),
            "lambda1": self.lambda1,
            "hardy_constant": self.hardy_constant,
            "phi_nodes": [float(v) for v in self.phi_nodes],
            "phi_values": [float(v) for v in self.phi_values],
            "phi_slopes": [float(v) for v in self.phi_slopes],
        })

    @classmethod
    def from_json(cls, text: str) -> SpectralData:
        d = json.loads(text)
        if d.get("schema") != "conehardy.spectral" or d.get("version") != SCHEMA_VERSION:
            raise DomainError("not a conehardy spectral record of a supported version")
        return cls(int(d["n"]), OmegaSpec.from_dict(d["omega"]), float(d["lambda1"]),
                   np.asarray(d["phi_nodes"], dtype=float), np.asarray(d["phi_values"], dtype=float),
                   np.asarray(d["phi_slopes"], dtype=float))


def _series(lam: float, n: int, t):
    # phi = 1 - a t^2 + b t^4, the t^4 term only sharpens the start values
    a = lam / (2 * (n - 1))
    b = lam * (lam - 2 * (n - 2) / 3) / (8 * (n - 1) * (n + 1))
    return 1 - a * t**2 + b * t**4, -2 * a * t + 4 * b * t**3


def _rhs(n):
    def f(t, y):
        return [y[1], -(n - 2) * math.cos(t) / math.sin(t) * y[1] - f.lam * y[0]]
    return f


def _shoot(lam: float, n: int, theta0: float, stop_at_zero: bool, t_eval=None, tol=ODE_TOL):
    t_start = min(SERIES_START, 1e-3 * theta0)
    y0 = list(_series(lam, n, t_start))
    rhs = _rhs(n)
    rhs.lam = lam
    events = None
    if stop_at_zero:
        def crossing(t, y):
            return y[0]
        crossing.terminal = True
        crossing.direction = -1
        events = crossing
    sol = solve_ivp(rhs, (t_start, theta0), y0, method="DOP853", rtol=tol, atol=tol,
                    events=events, t_eval=t_eval)
    if sol.status < 0:
        raise NumericalError(f"ODE integration failed at lambda={lam}: {sol.message}")
    return sol


def _has_zero_inside(lam, n, theta0) -> bool:
    sol = _shoot(lam, n, theta0, stop_at_zero=True)
    return sol.status == 1 or sol.y[0, -1] <= 0.0


def _endpoint_value(lam, n, theta0) -> float:
    return float(_shoot(lam, n, theta0, stop_at_zero=False).y[0, -1])


def _cap_eigenvalue(n: int, theta0: float, max_iter: int = 200) -> float:
    lo, hi = 0.0, 4 * (math.pi / theta0) ** 2
    it = 0
    while not _has_zero_inside(hi, n, theta0):
        lo, hi = hi, 2 * hi
        it += 1
        if it > 60:
            raise NumericalError(f"could not bracket lambda1 for theta0={theta0}, N={n}")
    # bisect on the oscillation predicate until only the first mode is bracketed
    while hi - lo > 1e-3 * hi:
        mid = 0.5 * (lo + hi)
        if _has_zero_inside(mid, n, theta0):
            hi = mid
        else:
            lo = mid
        it += 1
        if it > max_iter:
            raise NumericalError(f"bisection for lambda1 did not converge: bracket [{lo}, {hi}]")
    g_lo, g_hi = _endpoint_value(lo, n, theta0), _endpoint_value(hi, n, theta0)
    if not (g_lo > 0 >= g_hi):
        raise NumericalError(f"lambda1 bracket lost its sign change: phi(theta0) = {g_lo}, {g_hi} "
                             f"on [{lo}, {hi}]")
    lam, info = brentq(_endpoint_value, lo, hi, args=(n, theta0), xtol=1e-15, rtol=1e-15,
                       maxiter=max_iter, full_output=True)
    if not info.converged:
        raise NumericalError(f"root polish for lambda1 failed: {info.flag}")
    return float(lam)


def chebyshev_nodes(a: float, b: float, m: int) -> np.ndarray:
    j = np.arange(m)
    return a + (b - a) * 0.5 * (1 - np.cos(np.pi * j / (m - 1)))


@lru_cache(maxsize=64)
def principal_eigenvalue(omega: OmegaSpec, n: int) -> SpectralData:
    if int(n) != n or n < 2:
        raise DomainError(f"dimension must be an integer >= 2, got {n!r}")
    if omega.is_full:
        return SpectralData(n, omega, 0.0, np.array([0.0, math.pi]), np.array([1.0, 1.0]), np.zeros(2))
    theta0 = omega.theta_max
    lam = _cap_eigenvalue(n, theta0)
    nodes = chebyshev_nodes(0.0, theta0, N_TABLE)
    t_start = min(SERIES_START, 1e-3 * theta0)
    inner = nodes < t_start
    vals = np.empty_like(nodes)
    slopes = np.empty_like(nodes)
    vals[inner], slopes[inner] = _series(lam, n, nodes[inner])
    outer = nodes[~inner]
    sol = _shoot(lam, n, theta0, stop_at_zero=False, t_eval=outer, tol=TABLE_TOL)
    if sol.y.shape[1] != outer.size:
        raise NumericalError("eigenfunction tabulation returned an incomplete table")
    vals[~inner], slopes[~inner] = sol.y
    vals[-1] = 0.0
    scale = vals.max()
    return SpectralData(n, omega, lam, nodes, vals / scale, slopes / scale)


@dataclass(frozen=True)
class GammaRoots:
    gamma_star_minus: float
    gamma_star_plus: float
    mu: float
    discriminant: float
    n: int
    lambda1: float

    @property
    def abs_minus(self) -> float:
        return abs(self.gamma_star_minus)

    def residuals(self) -> tuple[float, float]:
        c = self.lambda1 - self.mu
        return tuple(g * (g + self.n - 2) - c for g in (self.gamma_star_minus, self.gamma_star_plus))


def mu_tolerance(lambda1: float, mu: float) -> float:
    """Width of the band around C_H in which mu counts as equal to it.

    Snapping to the double root changes the residual of the quadratic by
    |mu - C_H|, so the band is half the residual budget 1e-12 (1 + |lambda1 - mu|).
    """
    return 0.5 * MU_TOL * (1 + abs(lambda1 - mu))


def is_supercritical(lambda1: float, n: int, mu: float) -> bool:
    return mu - hardy_constant(lambda1, n) > mu_tolerance(lambda1, mu)


def indicial_roots(n: int, lambda1: float, mu: float) -> GammaRoots:
    """Roots of gamma^2 + (N-2) gamma - (lambda1 - mu) = 0, smaller one first."""
    ch = hardy_constant(lambda1, n)
    if is_supercritical(lambda1, n, mu):
        raise SupercriticalMu(f"mu={mu} exceeds the Hardy constant {ch}")
    b = n - 2
    c = lambda1 - mu
    disc = b * b + 4 * c
    if abs(mu - ch) <= mu_tolerance(lambda1, mu):
        disc = 0.0
    if disc == 0.0:
        g = -b / 2
        return GammaRoots(g, g, mu, 0.0, n, lambda1)
    sq = math.sqrt(disc)
    if b == 0:
        lo, hi = -sq / 2, sq / 2
    else:
        # b > 0: the minus root has no cancellation, the other follows from Vieta
        lo = -(b + sq) / 2
        hi = -c / lo if lo != 0 else sq - b
    return GammaRoots(lo, hi, mu, disc, n, lambda1)


def gamma_roots(spectral: SpectralData, mu: float) -> GammaRoots:
    return indicial_roots(spectral.n, spectral.lambda1, mu)
