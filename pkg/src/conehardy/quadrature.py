"""Riesz-type convolutions (|x|^{-alpha} * f)(x) over a cone C_Omega^rho for
separable profiles f(y) = C phi(omega)^k |y|^gamma log^tau(sigma |y|).

The integral is split with a smooth cutoff chi(|y-x|/eps) (chi = 1 on [0, 1/2],
chi = 0 on [1, inf)):

* near field, int chi K f, in polar coordinates centred at x. The radial
  factor t^{N-1-alpha} is absorbed into a Gauss-Jacobi rule so the remaining
  integrand is smooth.
* far field, int (1-chi) K f, over C^{rho, r_max} in the cone's own spherical
  coordinates (r, theta, psi) with composite Gauss panels graded towards x.
* tail beyond r_max, bounded from above using |x-y| >= (1 - |x|/r_max)|y|.

Because f and the domain are axisymmetric, a point y is described by its
radius r, polar angle theta and the angle psi between the azimuthal parts of
x and y. The psi-sphere S^{N-2} contributes |S^{N-3}| sin^{N-3}(psi) dpsi.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, replace

import numpy as np
from scipy.special import gamma as gamma_fn
from scipy.special import gammaincc, roots_jacobi

from conehardy.errors import DivergentTail, DomainError
from conehardy.geometry import ConeDomain, ConePoint, gauss_panels, sphere_area
from conehardy.spectral import SpectralData

DEFAULT_ORDER = 10
R_MAX_FACTOR = 100.0
KERNEL_BAND = 50.0


@dataclass(frozen=True)
class Profile:
    amplitude: float = 1.0
    phi_power: float = 0.0
    gamma: float = 0.0
    tau: float = 0.0
    sigma: float = 1.0

    def __post_init__(self):
        if not self.amplitude > 0:
            raise DomainError(f"amplitude must be positive, got {self.amplitude}")
        if self.phi_power < 0 or self.tau < 0:
            raise DomainError("phi_power and tau must be nonnegative")
        if not self.sigma > 0:
            raise DomainError(f"sigma must be positive, got {self.sigma}")

    def __call__(self, spectral: SpectralData, r, theta):
        r = np.asarray(r, dtype=float)
        out = self.amplitude * r**self.gamma
        if self.phi_power != 0:
            out = out * spectral.phi(theta) ** self.phi_power
        elif np.ndim(theta) > np.ndim(out):
            out = out * np.ones_like(np.asarray(theta, dtype=float))
        if self.tau != 0:
            out = out * np.log(self.sigma * r) ** self.tau
        return out

    def radial(self, r):
        """The profile without its angular factor."""
        r = np.asarray(r, dtype=float)
        out = self.amplitude * r**self.gamma
        if self.tau != 0:
            out = out * np.log(self.sigma * r) ** self.tau
        return out

    def scaled(self, c: float) -> Profile:
        return replace(self, amplitude=self.amplitude * c)

    def check_domain(self, domain: ConeDomain) -> None:
        if self.tau != 0 and not self.sigma * domain.rho > 1:
            raise DomainError(f"log profile needs sigma*rho > 1, got {self.sigma * domain.rho}")


def profile_pow(f: Profile, e: float) -> Profile:
    if not e > 0:
        raise DomainError(f"exponent must be positive, got {e}")
    return Profile(f.amplitude**e, f.phi_power * e, f.gamma * e, f.tau * e, f.sigma)


@dataclass(frozen=True)
class ConvolutionResult:
    value: float
    quadrature: float
    singular_correction: float
    truncation_tail_estimate: float
    relative_error_estimate: float
    r_max: float
    eps_excl: float
    order: int

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def _bump(t):
    with np.errstate(divide="ignore", over="ignore"):
        return np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)


def cutoff(s):
    """C-infinity step: 1 for s <= 1/2, 0 for s >= 1."""
    u = 2.0 * np.asarray(s, dtype=float) - 1.0
    a, b = _bump(1.0 - u), _bump(u)
    return a / (a + b)


def _graded(center: float, lo: float, hi: float, h0: float, reach: float) -> list[float]:
    """center +- h0 * 2^k, kept inside [lo, hi] and within `reach` of center."""
    pts = [center]
    h = h0
    while h < reach:
        pts.extend([center - h, center + h])
        h *= 2.0
    return [p for p in pts if lo < p < hi]


def _clean_breaks(pts, lo: float, hi: float) -> np.ndarray:
    b = np.unique(np.clip(np.asarray(list(pts) + [lo, hi], dtype=float), lo, hi))
    keep = np.concatenate([[True], np.diff(b) > 1e-12 * max(1.0, abs(hi))])
    b = b[keep]
    b[-1] = hi
    return b


def _psi_rule(n: int, order: int, psi_breaks=None):
    """Nodes and weights over the azimuthal sphere S^{N-2} as a function of psi."""
    if n == 2:
        return np.array([0.0, math.pi]), np.array([1.0, 1.0])
    if psi_breaks is None:
        psi_breaks = [0.0, math.pi / 2, math.pi]
    psi, w = gauss_panels(psi_breaks, order)
    return psi, w * sphere_area(n - 3) * np.sin(psi) ** (n - 3)


def _far_field(domain, spectral, f, alpha, xr, xt, eps, r_max, order, on_axis):
    n = domain.n
    rho = domain.rho
    tmax = domain.omega.theta_max

    m = max(1, math.ceil(math.log2(r_max / rho)))
    rb = list(np.geomspace(rho, r_max, m + 1))
    rb += _graded(xr, rho, r_max, eps / 4, xr)
    r_breaks = _clean_breaks(rb, rho, r_max)

    tb = list(np.linspace(0.0, tmax, max(2, math.ceil(tmax / (math.pi / 8))) + 1))
    tb += _graded(xt, 0.0, tmax, eps / (4 * xr), math.pi)
    if not domain.omega.is_full and f.phi_power != 0:
        # phi^k is only Holder at the lateral boundary when k is not an integer
        tb += [tmax - tmax / 8 * 4.0**-j for j in range(6)]
    t_breaks = _clean_breaks(tb, 0.0, tmax)

    r, wr = gauss_panels(r_breaks, order)
    t, wt = gauss_panels(t_breaks, order)
    wr = wr * r ** (n - 1)
    wt = wt * np.sin(t) ** (n - 2)
    fv = f(spectral, r[:, None], t[None, :]) * wr[:, None] * wt[None, :]

    if on_axis:
        cosang = np.cos(t)[None, :]
        d = np.sqrt(np.maximum(xr * xr + r[:, None] ** 2 - 2 * xr * r[:, None] * cosang, 0.0))
        kern = (1.0 - cutoff(d / eps)) * _kpow(d, alpha)
        return float(np.sum(fv * kern) * sphere_area(n - 2))

    if n > 2:
        width = eps / (4 * xr * math.sin(xt))
        pb = _clean_breaks([math.pi / 2] + _graded(0.0, 0.0, math.pi, width, math.pi), 0.0, math.pi)
        psi, wpsi = _psi_rule(n, order, pb)
    else:
        psi, wpsi = _psi_rule(n, order)
    ct, st = np.cos(t), np.sin(t)
    cp = np.cos(psi)
    cx, sx = math.cos(xt), math.sin(xt)
    total = 0.0
    # chunk over r to bound memory
    step = max(1, 400_000 // (t.size * psi.size))
    for i0 in range(0, r.size, step):
        rr = r[i0:i0 + step, None, None]
        cosang = cx * ct[None, :, None] + sx * st[None, :, None] * cp[None, None, :]
        d = np.sqrt(np.maximum(xr * xr + rr * rr - 2 * xr * rr * cosang, 0.0))
        kern = (1.0 - cutoff(d / eps)) * _kpow(d, alpha)
        total += float(np.einsum("ij,ijk,k->", fv[i0:i0 + step], kern, wpsi))
    return total


def _kpow(d, alpha):
    if alpha == 0:
        return np.ones_like(d)
    with np.errstate(divide="ignore"):
        return np.where(d > 0, np.power(np.where(d > 0, d, 1.0), -alpha), 0.0)


def _near_field(domain, spectral, f, alpha, xr, xt, eps, order):
    n = domain.n
    beta = n - 1 - alpha
    xj, wj = roots_jacobi(order, 0.0, beta)
    t1 = eps / 4 * (1 + xj)
    w1 = wj * (eps / 4) ** (beta + 1)
    t2, w2 = gauss_panels([eps / 2, eps], order)
    w2 = w2 * t2**beta * cutoff(t2 / eps)
    t = np.concatenate([t1, t2])
    wt = np.concatenate([w1, w2])

    na = 2 * order
    a, wa = gauss_panels([0.0, math.pi / 2, math.pi], order)
    wa = wa * np.sin(a) ** (n - 2)
    b, wb = _psi_rule(n, na // 2 if n > 2 else 0)
    T = t[:, None, None]
    ca, sa = np.cos(a)[None, :, None], np.sin(a)[None, :, None]
    cb = np.cos(b)[None, None, :]
    along = xr + T * ca
    ry = np.sqrt(np.maximum(along**2 + (T * sa) ** 2, 0.0))
    if domain.omega.is_full:
        vals = f.radial(ry)
        vals = np.broadcast_to(vals, (t.size, a.size, b.size))
    else:
        yn = math.cos(xt) * along - math.sin(xt) * T * sa * cb
        ty = np.arccos(np.clip(yn / ry, -1.0, 1.0))
        vals = f(spectral, ry, ty)
    return float(np.einsum("ijk,i,j,k->", vals, wt, wa, wb))


def angular_moment(domain: ConeDomain, spectral: SpectralData, k: float, order: int = 64) -> float:
    """int_Omega phi^k d(omega)."""
    n = domain.n
    tmax = domain.omega.theta_max
    if domain.omega.is_full or k == 0:
        from conehardy.geometry import angular_measure
        return angular_measure(domain.omega, n)
    breaks = _clean_breaks([tmax - tmax / 2 * 4.0**-j for j in range(8)], 0.0, tmax)
    t, w = gauss_panels(breaks, order)
    return float(np.sum(w * np.sin(t) ** (n - 2) * spectral.phi(t) ** k) * sphere_area(n - 2))


def radial_tail_integral(e: float, tau: float, sigma: float, r0: float) -> float:
    """int_{r0}^inf r^{e-1} log^tau(sigma r) dr for e < 0 and sigma*r0 > 1 (or tau = 0)."""
    if not e < 0:
        raise DivergentTail(f"tail exponent {e} must be negative")
    if tau == 0:
        return r0**e / -e
    s0 = math.log(sigma * r0)
    k = -e
    return sigma**-e * k ** -(tau + 1) * gammaincc(tau + 1, k * s0) * gamma_fn(tau + 1)


def tail_bound(domain, spectral, f, alpha, r_max, x_norm: float | None = None,
               lower: bool = False) -> float:
    """Bound on the part of the convolution with |y| > r_max.

    For |y| >= r_max >= 2|x| one has (1 - d)|y| <= |x - y| <= (1 + d)|y| with
    d = |x|/r_max (d = 1/2 when |x| is not given). The upper bound uses the
    first inequality, the lower bound (lower=True) the second.
    """
    e = domain.n - alpha + f.gamma
    d = 0.5 if x_norm is None else x_norm / r_max
    factor = (1.0 + d) ** -alpha if lower else (1.0 - d) ** -alpha
    return (factor * f.amplitude * angular_moment(domain, spectral, f.phi_power)
            * radial_tail_integral(e, f.tau, f.sigma, r_max))


def _check(domain, f, alpha, x):
    n = domain.n
    if not (0 <= alpha < n):
        raise DomainError(f"alpha must lie in [0, N={n}), got {alpha}")
    if n - alpha + f.gamma >= 0:
        raise DivergentTail(f"N - alpha + gamma_f = {n - alpha + f.gamma} >= 0: the convolution diverges")
    if x.r < 2 * domain.rho * (1 - 1e-12):
        raise DomainError(f"|x| = {x.r} is below 2*rho = {2 * domain.rho}")
    if not domain.omega.is_full and not x.polar < domain.omega.theta_max:
        raise DomainError("x lies outside the cone")
    f.check_domain(domain)


def convolve(domain: ConeDomain, spectral: SpectralData, f: Profile, alpha: float, x: ConePoint,
             r_max: float | None = None, eps_excl: float | None = None,
             order: int = DEFAULT_ORDER, error_estimate: bool = True) -> ConvolutionResult:
    _check(domain, f, alpha, x)
    xr = x.r
    # a radial profile on the full sphere is rotation invariant: put x on the axis
    xt = 0.0 if domain.omega.is_full else x.polar
    if r_max is None:
        r_max = max(R_MAX_FACTOR * xr, R_MAX_FACTOR * domain.rho)
    if r_max < 2 * xr:
        raise DomainError(f"r_max={r_max} must be at least 2|x| = {2 * xr}")
    dist = domain.boundary_distance(xr, xt)
    if eps_excl is None:
        eps_excl = min(xr / 4, dist / 2)
    if not (0 < eps_excl < dist):
        raise DomainError(f"exclusion radius {eps_excl} must lie in (0, {dist})")
    on_axis = xt == 0.0

    def run(k):
        far = _far_field(domain, spectral, f, alpha, xr, xt, eps_excl, r_max, k, on_axis)
        near = _near_field(domain, spectral, f, alpha, xr, xt, eps_excl, k)
        return far, near

    far, near = run(order)
    tail = tail_bound(domain, spectral, f, alpha, r_max, xr)
    tail_lo = tail_bound(domain, spectral, f, alpha, r_max, xr, lower=True)
    value = far + near + tail
    err = 0.0
    if error_estimate:
        far2, near2 = run(max(3, order // 2))
        err = abs(far + near - far2 - near2)
    rel = (err + tail - tail_lo) / value if value > 0 else math.inf
    return ConvolutionResult(value, far, near, tail, rel, float(r_max), float(eps_excl), order)


def convolve_oracle_radial(gamma_f: float, rho: float, x_norm: float, amplitude: float = 1.0) -> float:
    """Exact |y|^{-1} * (C|y|^gamma_f) on the exterior of B_rho in R^3.

    By the shell theorem the spherical mean of |x-y|^{-1} over |y| = r is
    1/max(|x|, r), leaving 4 pi int_rho^inf r^{2+gamma}/max(|x|, r) dr.
    """
    g = gamma_f
    if 2 + g >= 0:
        raise DivergentTail(f"need gamma_f < -2, got {g}")
    if not x_norm >= rho > 0:
        raise DomainError("need |x| >= rho > 0")
    if g == -3:
        inner = math.log(x_norm / rho)
    else:
        inner = (x_norm ** (3 + g) - rho ** (3 + g)) / (3 + g)
    outer = x_norm ** (2 + g) / -(2 + g)
    return 4 * math.pi * amplitude * (inner / x_norm + outer)


@dataclass
class KernelBoundReport:
    branch: str
    radii: list
    values: list
    forms: list
    ratios: list
    lower_ratios: list
    spread: float
    lower_spread: float
    lower_drop: float
    log_form: str
    ok: bool

    def to_dict(self) -> dict:
        return asdict(self)


def asymptotic_form(n: int, alpha: float, beta: float, tau: float, r):
    r = np.asarray(r, dtype=float)
    lg = np.log1p(r)
    if beta < n and not math.isclose(beta, n, rel_tol=1e-12):
        return r ** (n - alpha - beta) * lg**tau, "beta<N"
    if math.isclose(beta, n, rel_tol=1e-12):
        return r**-alpha * lg ** (1 + tau), "beta=N"
    return r**-alpha * lg**tau, "beta>N"


def verify_kernel_bounds(domain: ConeDomain, spectral: SpectralData, f: Profile, alpha: float,
                         sample_radii, order: int = DEFAULT_ORDER, band: float = KERNEL_BAND) -> KernelBoundReport:
    """Compare quadrature values with the three-branch upper bound and the
    C|x|^{-alpha} lower bound over a sweep of radii (points on the cap axis).

    The constants in these bounds are not explicit, so the check is that the
    ratio value/form stays within a factor `band` across the sweep, and that
    value*|x|^alpha never drops below 1/band of its value at the first radius.
    """
    n = domain.n
    beta = -f.gamma
    radii = np.asarray(sample_radii, dtype=float)
    if radii.min() < 4 * domain.rho * (1 - 1e-12) or radii.max() > 1e3 * domain.rho * (1 + 1e-12):
        raise DomainError("sample radii must lie in [4 rho, 1000 rho]")
    if not beta > n - alpha:
        raise DivergentTail(f"beta={beta} must exceed N - alpha = {n - alpha}")
    vals = np.array([
        convolve(domain, spectral, f, alpha, ConePoint.on_meridian(n, float(r), 0.0),
                 order=order, error_estimate=False).value
        for r in radii
    ])
    forms, branch = asymptotic_form(n, alpha, beta, f.tau, radii)
    ratios = vals / forms
    lower = vals * radii**alpha
    spread = float(ratios.max() / ratios.min())
    lower_spread = float(lower.max() / lower.min())
    lower_drop = float(lower[0] / lower.min())
    ok = bool(np.all(vals > 0) and spread < band and lower_drop < band)
    return KernelBoundReport(branch, radii.tolist(), vals.tolist(), forms.tolist(), ratios.tolist(),
                             lower.tolist(), spread, lower_spread, lower_drop,
                             "log(1+|x|)", ok)
