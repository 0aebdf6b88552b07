"""Cone-like domains C_Omega^rho = {x = r*omega : r > rho, omega in Omega}.

Omega is either the whole unit sphere S^{N-1} or a geodesic cap of half
angle theta0 around the north pole e_N. Points are stored with their
radius, polar angle from e_N and Cartesian coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import betainc, betaln, gammaln

from conehardy.errors import DomainError


def sphere_area(k: int) -> float:
    """Surface measure of the unit sphere S^k in R^{k+1}."""
    if k < 0:
        raise DomainError(f"sphere dimension must be >= 0, got {k}")
    return float(2.0 * math.exp((k + 1) / 2 * math.log(math.pi) - gammaln((k + 1) / 2)))


@dataclass(frozen=True)
class OmegaSpec:
    kind: str = "full"
    half_angle: float | None = None

    def __post_init__(self):
        if self.kind == "full":
            if self.half_angle is not None:
                raise DomainError("full sphere takes no half angle")
        elif self.kind == "cap":
            t = self.half_angle
            if t is None or not (0.0 < t < math.pi) or not math.isfinite(t):
                raise DomainError(f"cap half angle must lie in (0, pi), got {t!r}")
        else:
            raise DomainError(f"unknown Omega kind {self.kind!r}")

    @classmethod
    def full(cls) -> OmegaSpec:
        return cls("full")

    @classmethod
    def cap(cls, half_angle: float) -> OmegaSpec:
        return cls("cap", float(half_angle))

    @property
    def is_full(self) -> bool:
        return self.kind == "full"

    @property
    def theta_max(self) -> float:
        """Largest polar angle covered by Omega."""
        return math.pi if self.is_full else float(self.half_angle)

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if not self.is_full:
            d["half_angle"] = self.half_angle
        return d

    @classmethod
    def from_dict(cls, d: dict) -> OmegaSpec:
        if d["kind"] == "full":
            return cls.full()
        return cls.cap(float(d["half_angle"]))


@dataclass(frozen=True)
class ConeDomain:
    n: int
    omega: OmegaSpec = field(default_factory=OmegaSpec.full)
    rho: float = 1.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise DomainError(f"dimension must be an integer >= 2, got {self.n!r}")
        if not (self.rho > 0) or not math.isfinite(self.rho):
            raise DomainError(f"rho must be positive, got {self.rho!r}")

    def boundary_distance(self, r: float, polar: float) -> float:
        """Euclidean distance from (r, polar) to the boundary of the cone."""
        d = r - self.rho
        if not self.omega.is_full:
            gap = self.omega.theta_max - polar
            lateral = r * math.sin(gap) if gap < math.pi / 2 else r
            d = min(d, lateral)
        return d

    def to_dict(self) -> dict:
        return {"n": self.n, "omega": self.omega.to_dict(), "rho": self.rho}


def spherical_to_cartesian(r: float, angles) -> np.ndarray:
    """Map (r, theta_1, ..., theta_{N-1}) to R^N.

    x_1 = r sin(t_1)...sin(t_{N-1}), x_k = r cos(t_{k-1}) prod_{j>=k} sin(t_j)
    for 2 <= k <= N, so x_N = r cos(t_{N-1}) and t_{N-1} is the polar angle
    measured from e_N. t_1 is periodic, the others lie in [0, pi].
    """
    if not r > 0:
        raise DomainError(f"radius must be positive, got {r!r}")
    t = np.atleast_1d(np.asarray(angles, dtype=float))
    n = t.size + 1
    s = np.sin(t)
    c = np.cos(t)
    x = np.empty(n)
    # tail[k] = prod_{j >= k} sin(t_j), 0-based over angles
    tail = np.ones(n)
    for k in range(n - 2, -1, -1):
        tail[k] = tail[k + 1] * s[k]
    x[0] = r * tail[0]
    for k in range(1, n):
        x[k] = r * c[k - 1] * tail[k]
    return x


def cartesian_to_spherical(x) -> tuple[float, np.ndarray]:
    """Inverse of spherical_to_cartesian; t_1 is returned in [0, 2*pi)."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 2:
        raise DomainError("need at least two coordinates")
    r = float(np.linalg.norm(x))
    if not r > 0:
        raise DomainError("the origin has no spherical coordinates")
    angles = np.empty(n - 1)
    partial = np.sqrt(np.cumsum(x * x))  # partial[k] = |(x_1..x_{k+1})|
    for k in range(n - 1, 1, -1):
        angles[k - 1] = math.atan2(partial[k - 1], x[k])
    angles[0] = math.atan2(x[0], x[1]) % (2 * math.pi)
    return r, angles


@dataclass(frozen=True, eq=False)
class ConePoint:
    r: float
    polar: float
    azimuth: tuple = ()
    cart: np.ndarray = None

    @classmethod
    def from_spherical(cls, r: float, angles) -> ConePoint:
        angles = np.atleast_1d(np.asarray(angles, dtype=float))
        cart = spherical_to_cartesian(r, angles)
        if angles.size == 1:
            t = (angles[0] + math.pi) % (2 * math.pi) - math.pi
            polar = abs(t)
        else:
            polar = float(angles[-1])
        return cls(float(r), float(polar), tuple(float(a) for a in angles[:-1]), cart)

    @classmethod
    def from_cartesian(cls, x) -> ConePoint:
        r, angles = cartesian_to_spherical(x)
        x = np.array(x, dtype=float)
        if angles.size == 1:
            polar = math.acos(max(-1.0, min(1.0, x[-1] / r)))
            return cls(r, polar, (), x)
        return cls(r, float(angles[-1]), tuple(float(a) for a in angles[:-1]), x)

    @classmethod
    def on_meridian(cls, n: int, r: float, polar: float) -> ConePoint:
        """Point at radius r and polar angle `polar` in the (e_1, e_N) half plane."""
        if not r > 0:
            raise DomainError(f"radius must be positive, got {r!r}")
        x = np.zeros(n)
        x[0] = r * math.sin(polar)
        x[-1] = r * math.cos(polar)
        az = (math.pi / 2,) * (n - 2) if n > 2 else ()
        return cls(float(r), float(polar), az, x)


def contains(domain: ConeDomain, x: ConePoint) -> bool:
    if not x.r > domain.rho:
        return False
    return domain.omega.is_full or x.polar < domain.omega.theta_max


@lru_cache(maxsize=256)
def angular_measure(omega: OmegaSpec, n: int) -> float:
    """Surface measure of Omega as a subset of S^{N-1}."""
    if omega.is_full:
        return sphere_area(n - 1)
    if n == 2:
        return 2.0 * omega.theta_max
    # int_0^t sin^k = B(a, 1/2) I_{sin^2 t}(a, 1/2) / 2 for t <= pi/2, a = (k+1)/2
    a = (n - 1) / 2
    t = omega.theta_max
    full = math.exp(betaln(a, 0.5))
    half = 0.5 * full * betainc(a, 0.5, math.sin(min(t, math.pi - t)) ** 2)
    val = half if t <= math.pi / 2 else full - half
    return sphere_area(n - 2) * val


def truncated_measure(domain: ConeDomain, r1: float, r2: float) -> float:
    """Volume of C_Omega^{r1, r2}."""
    if not r1 < r2:
        raise DomainError(f"need r1 < r2, got ({r1}, {r2})")
    if r1 < domain.rho * (1 - 1e-12):
        raise DomainError(f"r1={r1} lies below the vertex cutoff rho={domain.rho}")
    n = domain.n
    return angular_measure(domain.omega, n) * (r2**n - r1**n) / n


def gauss_panels(breaks, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre rule over consecutive breakpoints."""
    b = np.asarray(breaks, dtype=float)
    xg, wg = np.polynomial.legendre.leggauss(order)
    lo, hi = b[:-1, None], b[1:, None]
    half = 0.5 * (hi - lo)
    nodes = (lo + half * (xg + 1.0)).ravel()
    weights = (half * wg).ravel()
    return nodes, weights


def radial_angular_rule(domain: ConeDomain, r1: float, r2: float, n_r: int, n_ang: int):
    """Tensor rule (r, theta, weight) for axisymmetric integrands on C^{r1,r2}.

    Radial nodes are Gauss-Legendre in log r, polar nodes Gauss-Legendre in
    theta carrying sin^{N-2}(theta) and the area of the azimuthal sphere.
    """
    if n_r < 2 or n_ang < 2:
        raise DomainError("need at least two nodes per direction")
    if not r1 < r2:
        raise DomainError(f"need r1 < r2, got ({r1}, {r2})")
    if r1 < domain.rho * (1 - 1e-12):
        raise DomainError(f"r1={r1} lies below the vertex cutoff rho={domain.rho}")
    n = domain.n
    s, ws = gauss_panels([math.log(r1), math.log(r2)], n_r)
    r = np.exp(s)
    wr = ws * r**n  # dr r^{N-1} = r^N ds
    t, wt = gauss_panels([0.0, domain.omega.theta_max], n_ang)
    wt = wt * np.sin(t) ** (n - 2) * sphere_area(n - 2)
    return r, t, np.outer(wr, wt)


def sample_grid(domain: ConeDomain, r1: float, r2: float, n_r: int, n_ang: int) -> list[tuple[ConePoint, float]]:
    r, t, w = radial_angular_rule(domain, r1, r2, n_r, n_ang)
    n = domain.n
    return [
        (ConePoint.on_meridian(n, float(ri), float(tj)), float(w[i, j]))
        for i, ri in enumerate(r)
        for j, tj in enumerate(t)
    ]
