"""Explicit positive solutions and their numerical certification.

Below the Hardy constant the scalar candidate is u = phi(omega)|x|^gamma with
gamma slightly above gamma_*; at mu = C_H it is phi(omega)|x|^gamma_* log^tau(sigma|x|).
For both, L_H u = -Delta u - mu|x|^{-2} u has a closed form, so only the
convolution side of the inequality needs quadrature. A margin report samples
L_H u / ((|x|^{-alpha} * u^p) u^q) on a grid and fits the amplitude that turns
u into a solution on that grid.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from conehardy.classifier import EPS_B, ScalarParams, SystemParams
from conehardy.errors import DomainError, NoFeasibleGamma, NoFeasiblePair, NonpositiveLHS
from conehardy.geometry import ConeDomain, ConePoint, gauss_panels
from conehardy.quadrature import DEFAULT_ORDER, Profile, angular_moment, convolve, profile_pow
from conehardy.spectral import GammaRoots, SpectralData

POWER_LAW = "PowerLaw"
LOG_POWER = "LogPower"

SCAN_STEP = 0.05
SLACK = 1e-3
LOG_TAU = 0.5
LOG_SIGMA_RHO = 8.0


def worker_count() -> int:
    """Thread cap from CONEHARDY_THREADS, defaulting to the CPU count."""
    env = os.environ.get("CONEHARDY_THREADS")
    if env:
        try:
            k = int(env)
        except ValueError:
            raise DomainError(f"CONEHARDY_THREADS must be an integer, got {env!r}") from None
        if k < 1:
            raise DomainError(f"CONEHARDY_THREADS must be >= 1, got {k}")
        return k
    return os.cpu_count() or 1


def _rel_slack(value: float, threshold: float) -> float:
    """(value - threshold) relative to |threshold|; absolute if threshold is 0."""
    return (value - threshold) / abs(threshold) if threshold != 0 else value - threshold


def _at_critical(roots: GammaRoots) -> bool:
    return roots.discriminant == 0.0


# -- scalar candidates --------------------------------------------------------

@dataclass(frozen=True)
class ScalarCandidate:
    kind: str
    profile: Profile
    t: float | None = None

    @property
    def gamma(self) -> float:
        return self.profile.gamma

    @property
    def amplitude(self) -> float:
        return self.profile.amplitude

    def with_amplitude(self, c: float) -> ScalarCandidate:
        return replace(self, profile=replace(self.profile, amplitude=float(c)))

    def __call__(self, spectral: SpectralData, r, theta):
        return self.profile(spectral, r, theta)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "profile": asdict(self.profile), "t": self.t}


def cond1_slacks(n: int, alpha: float, p: float, q: float, gamma: float) -> tuple[float, float, float]:
    """Relative slacks of p|g| > N-alpha, q > 1+(2-alpha)/|g| and
    p+q > 1+(N-alpha+2)/|g|; all three must be positive for a power-law solution."""
    g = abs(gamma)
    if g == 0:
        return -math.inf, -math.inf, -math.inf
    return (_rel_slack(p * g, n - alpha),
            _rel_slack(q, 1 + (2 - alpha) / g),
            _rel_slack(p + q, 1 + (n - alpha + 2) / g))


def _log_profile(domain: ConeDomain, roots: GammaRoots) -> Profile:
    return Profile(1.0, 1.0, roots.gamma_star_minus, LOG_TAU, LOG_SIGMA_RHO / domain.rho)


def construct_scalar_candidate(domain: ConeDomain, spectral: SpectralData, roots: GammaRoots,
                               params: ScalarParams) -> ScalarCandidate:
    n = domain.n
    params.check(n)
    p, q, alpha = params.p, params.q, params.alpha
    g_star = roots.gamma_star_minus
    if _at_critical(roots):
        if min(cond1_slacks(n, alpha, p, q, g_star)) <= EPS_B:
            raise NoFeasibleGamma(f"(p, q) = ({p}, {q}) is not in the existence region at mu = C_H")
        return ScalarCandidate(LOG_POWER, _log_profile(domain, roots))
    top = -(n - 2) / 2
    k = 1
    while k * SCAN_STEP < 1 - 1e-12:
        t = k * SCAN_STEP
        g = g_star + t * (top - g_star)
        if min(cond1_slacks(n, alpha, p, q, g)) >= SLACK and abs(p * abs(g) - n) >= SLACK:
            return ScalarCandidate(POWER_LAW, Profile(1.0, 1.0, g, 0.0, 1.0), t)
        k += 1
    raise NoFeasibleGamma(f"no gamma in (gamma_*, -(N-2)/2) satisfies the existence conditions "
                          f"with slack {SLACK} for p={p}, q={q}, alpha={alpha}")


def _lhs_profile(profile: Profile, spectral: SpectralData, roots: GammaRoots, r, theta):
    """L_H applied to C phi |x|^g log^tau(sigma|x|) with tau = 0 or g = gamma_*."""
    r = np.asarray(r, dtype=float)
    phi = spectral.phi(theta)
    g = profile.gamma
    if profile.tau == 0:
        coef = spectral.lambda1 - roots.mu - g * (g + spectral.n - 2)
        return profile.amplitude * coef * phi * r ** (g - 2)
    tau = profile.tau
    lg = np.log(profile.sigma * r)
    return profile.amplitude * tau * (1 - tau) * phi * r ** (g - 2) * lg ** (tau - 2)


def lhs_hardy(candidate, spectral: SpectralData, roots: GammaRoots, x):
    """Closed-form L_H u at x, which is a ConePoint or an (r, theta) pair of arrays."""
    if isinstance(x, ConePoint):
        r, theta = x.r, x.polar
    else:
        r, theta = x
    profile = candidate.profile if isinstance(candidate, ScalarCandidate) else candidate
    if profile.tau != 0 and not math.isclose(profile.gamma, roots.gamma_star_minus, rel_tol=1e-12,
                                             abs_tol=1e-14):
        raise DomainError("log profiles are only handled at gamma = gamma_*")
    return _lhs_profile(profile, spectral, roots, r, theta)


# -- margin grids and reports -------------------------------------------------

@dataclass(frozen=True)
class MarginGrid:
    """Radii log-spaced over `decades` decades from r_min (2 rho by default),
    and polar angles j*theta0/n_angles for j < n_angles, which stays one
    angular cell away from the lateral boundary. The full sphere uses a
    single direction since every quantity is then radial."""
    decades: float = 2.0
    shells_per_decade: int = 48
    n_angles: int = 48
    r_min: float | None = None
    order: int = DEFAULT_ORDER

    def radii(self, domain: ConeDomain) -> np.ndarray:
        if self.decades <= 0 or self.shells_per_decade < 1:
            raise DomainError("margin grid needs a positive extent and at least one shell per decade")
        r0 = 2 * domain.rho if self.r_min is None else self.r_min
        if r0 < 2 * domain.rho * (1 - 1e-12):
            raise DomainError(f"margin grid must start at or above 2 rho = {2 * domain.rho}")
        m = int(round(self.decades * self.shells_per_decade))
        return r0 * 10.0 ** (self.decades * np.arange(m + 1) / m)

    def angles(self, domain: ConeDomain) -> np.ndarray:
        if domain.omega.is_full:
            return np.array([0.0])
        if self.n_angles < 1:
            raise DomainError("need at least one angle")
        return domain.omega.theta_max * np.arange(self.n_angles) / self.n_angles

    def to_dict(self, domain: ConeDomain) -> dict:
        d = asdict(self)
        d["r_min"] = float(self.radii(domain)[0])
        return d


@dataclass
class MarginReport:
    label: str
    grid: dict
    radii: list
    angles: list
    lhs: list
    rhs: list
    ratios: list
    min_ratio: float
    shell_min: list
    shell_max: list
    decade_min: list
    decade_spread: float
    half_decade_min: list
    trend_free: bool
    amplitude: float = 1.0
    worst_scaled_margin: float = math.nan
    ok: bool = True
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def _bin_minima(radii: np.ndarray, shell_min: np.ndarray, width: float) -> list[float]:
    """Minimum of shell_min over consecutive bins of `width` decades."""
    lr = np.log10(radii / radii[0])
    nb = max(1, int(round(lr[-1] / width)))
    idx = np.minimum((lr / width * (1 - 1e-12)).astype(int), nb - 1)
    return [float(shell_min[idx == k].min()) for k in range(nb)]


def _build_report(label, grid_dict, radii, angles, lhs, rhs) -> MarginReport:
    lhs = np.asarray(lhs, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    ok = bool(np.all(lhs > 0) and np.all(rhs > 0))
    ratios = lhs / rhs
    shell_min = ratios.min(axis=1)
    shell_max = ratios.max(axis=1)
    dec = _bin_minima(radii, shell_min, 1.0)
    half = _bin_minima(radii, shell_min, 0.5)
    decreasing = len(half) > 1 and all(b < a for a, b in zip(half, half[1:]))
    return MarginReport(
        label=label, grid=grid_dict, radii=radii.tolist(), angles=angles.tolist(),
        lhs=lhs.tolist(), rhs=rhs.tolist(), ratios=ratios.tolist(),
        min_ratio=float(ratios.min()), shell_min=shell_min.tolist(), shell_max=shell_max.tolist(),
        decade_min=dec, decade_spread=float(max(dec) / min(dec)) if min(dec) > 0 else math.inf,
        half_decade_min=half, trend_free=not decreasing, ok=ok and float(ratios.min()) > 0,
    )


def _convolution_grid(domain, spectral, f: Profile, alpha, radii, angles, order):
    pts = [(i, j, ConePoint.on_meridian(domain.n, float(r), float(t)))
           for i, r in enumerate(radii) for j, t in enumerate(angles)]
    out = np.empty((radii.size, angles.size))

    def one(item):
        i, j, x = item
        return i, j, convolve(domain, spectral, f, alpha, x, order=order, error_estimate=False).value

    workers = min(worker_count(), len(pts))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(one, pts))
    else:
        results = [one(item) for item in pts]
    for i, j, v in results:
        out[i, j] = v
    return out


def _nonlocal_rhs(domain, spectral, v: Profile, p, q, alpha, radii, angles, order):
    conv = _convolution_grid(domain, spectral, profile_pow(v, p), alpha, radii, angles, order)
    return conv * v(spectral, radii[:, None], angles[None, :]) ** q


def _require_positive(lhs, what: str):
    if np.any(lhs <= 0):
        k = int(np.argmin(lhs))
        raise NonpositiveLHS(f"{what}: L_H u <= 0 at grid point {k} (value {np.ravel(lhs)[k]})")


def scalar_margin(domain: ConeDomain, spectral: SpectralData, roots: GammaRoots, params: ScalarParams,
                  candidate: ScalarCandidate, grid: MarginGrid | None = None) -> MarginReport:
    grid = grid or MarginGrid()
    p, q, alpha = params.p, params.q, params.alpha
    radii, angles = grid.radii(domain), grid.angles(domain)
    lhs = lhs_hardy(candidate, spectral, roots, (radii[:, None], angles[None, :]))
    lhs = np.broadcast_to(lhs, (radii.size, angles.size))
    _require_positive(lhs, "scalar margin")
    rhs = _nonlocal_rhs(domain, spectral, candidate.profile, p, q, alpha, radii, angles, grid.order)
    rep = _build_report("scalar", grid.to_dict(domain), radii, angles, lhs, rhs)
    c = rep.min_ratio ** (1.0 / (p + q - 1))
    rep.amplitude = c
    # U = c u multiplies the lhs by c and the right side by c^(p+q)
    rep.worst_scaled_margin = float(np.min(c * np.asarray(rep.lhs) / (c ** (p + q) * np.asarray(rep.rhs))))
    rep.extra = {"candidate": candidate.to_dict(), "p": p, "q": q, "alpha": alpha, "mu": params.mu}
    return rep


# -- system candidates --------------------------------------------------------

@dataclass(frozen=True)
class SystemCandidate:
    kind: str
    u: Profile
    v: Profile
    t: float | None = None
    c1: float = 1.0
    c2: float = 1.0

    @property
    def a(self) -> float:
        return self.u.gamma

    @property
    def b(self) -> float:
        return self.v.gamma

    def to_dict(self) -> dict:
        return {"kind": self.kind, "u": asdict(self.u), "v": asdict(self.v), "t": self.t,
                "a": self.a, "b": self.b, "c1": self.c1, "c2": self.c2}


def system_slacks(n, alpha, p, q, s, b) -> tuple[float, float, float, float]:
    """Relative slacks of s > 1+2/|b|, q > 1+(2-alpha)/|b|, p|b| > N-alpha and
    (p+q-1/s)|b| > N-alpha+2+2/s."""
    g = abs(b)
    if g == 0:
        return (-math.inf,) * 4
    return (_rel_slack(s, 1 + 2 / g),
            _rel_slack(q, 1 + (2 - alpha) / g),
            _rel_slack(p * g, n - alpha),
            _rel_slack((p + q - 1 / s) * g, n - alpha + 2 + 2 / s))


def a_interval(n, alpha, p, q, s, b, roots: GammaRoots) -> tuple[float, float]:
    """Open interval of admissible u-exponents a for a given b.

    a must satisfy 0 > (b-2)/s > a > max{b, N-alpha+2+(p+q)b}, and also
    gamma_* < a < gamma^* so that L_H |x|^a phi stays positive.
    """
    lo = max(b, n - alpha + 2 + (p + q) * b, roots.gamma_star_minus)
    hi = min((b - 2) / s, 0.0, roots.gamma_star_plus)
    return lo, hi


def check_csys(n, alpha, p, q, s, a, b) -> bool:
    return 0 > (b - 2) / s > a > max(b, n - alpha + 2 + (p + q) * b)


def construct_system_candidate(domain: ConeDomain, spectral: SpectralData, roots: GammaRoots,
                               params: SystemParams) -> SystemCandidate:
    n = domain.n
    params.check(n)
    p, q, alpha, s = params.p, params.q, params.alpha, params.s
    g_star = roots.gamma_star_minus
    if _at_critical(roots):
        g = abs(g_star)
        if g == 0 or _rel_slack(s, 1 + 2 / g) <= EPS_B:
            raise NoFeasiblePair(f"s={s} does not exceed 1+2/|gamma_*| at mu = C_H")
        # u = v: the first inequality is the scalar one, which needs the scalar curve
        if min(cond1_slacks(n, alpha, p, q, g_star)) <= EPS_B:
            raise NoFeasiblePair(f"(p, q) = ({p}, {q}) is outside the region where the log pair works")
        prof = _log_profile(domain, roots)
        return SystemCandidate(LOG_POWER, prof, prof)
    top = -(n - 2) / 2
    k = 1
    while k * SCAN_STEP < 1 - 1e-12:
        t = k * SCAN_STEP
        b = g_star + t * (top - g_star)
        k += 1
        if min(system_slacks(n, alpha, p, q, s, b)) < SLACK or abs(p * abs(b) - n) < SLACK:
            continue
        lo, hi = a_interval(n, alpha, p, q, s, b, roots)
        if not hi - lo > SLACK * max(1.0, abs(hi)):
            continue
        a = 0.5 * (lo + hi)
        if not check_csys(n, alpha, p, q, s, a, b):
            continue
        return SystemCandidate(POWER_LAW, Profile(1.0, 1.0, a), Profile(1.0, 1.0, b), t)
    raise NoFeasiblePair(f"no exponent pair (a, b) found for p={p}, q={q}, s={s}, alpha={alpha}")


def coupled_amplitudes(c: float, p: float, q: float, s: float) -> tuple[float, float]:
    """C1, C2 with C1^(s-1/(p+q)) = C^(1+1/(p+q)) and C2^(p+q-1/s) = C^(1+1/s)."""
    pq = p + q
    c1 = c ** ((1 + 1 / pq) / (s - 1 / pq))
    c2 = c ** ((1 + 1 / s) / (pq - 1 / s))
    return c1, c2


@dataclass
class SystemMargins:
    first: MarginReport
    second: MarginReport
    c: float
    c1: float
    c2: float
    candidate: SystemCandidate

    def coupling_residuals(self, p: float, q: float, s: float) -> tuple[float, float]:
        """Relative residuals of the two coupling equations, in log form."""
        pq = p + q
        r1 = (s - 1 / pq) * math.log(self.c1) - (1 + 1 / pq) * math.log(self.c)
        r2 = (pq - 1 / s) * math.log(self.c2) - (1 + 1 / s) * math.log(self.c)
        scale = max(1.0, abs(math.log(self.c)))
        return abs(r1) / scale, abs(r2) / scale

    def to_dict(self) -> dict:
        return {"first": self.first.to_dict(), "second": self.second.to_dict(), "c": self.c,
                "c1": self.c1, "c2": self.c2, "candidate": self.candidate.to_dict()}

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def system_margin(domain: ConeDomain, spectral: SpectralData, roots: GammaRoots, params: SystemParams,
                  candidate: SystemCandidate, grid: MarginGrid | None = None) -> SystemMargins:
    grid = grid or MarginGrid()
    p, q, alpha, s = params.p, params.q, params.alpha, params.s
    radii, angles = grid.radii(domain), grid.angles(domain)
    R, T = radii[:, None], angles[None, :]
    shape = (radii.size, angles.size)
    lhs_u = np.broadcast_to(lhs_hardy(candidate.u, spectral, roots, (R, T)), shape)
    lhs_v = np.broadcast_to(lhs_hardy(candidate.v, spectral, roots, (R, T)), shape)
    _require_positive(lhs_u, "system margin (u)")
    _require_positive(lhs_v, "system margin (v)")
    rhs1 = _nonlocal_rhs(domain, spectral, candidate.v, p, q, alpha, radii, angles, grid.order)
    rhs2 = np.broadcast_to(candidate.u(spectral, R, T) ** s, shape)
    gd = grid.to_dict(domain)
    first = _build_report("system_first", gd, radii, angles, lhs_u, rhs1)
    second = _build_report("system_second", gd, radii, angles, lhs_v, rhs2)
    c = min(first.min_ratio, second.min_ratio)
    c1, c2 = coupled_amplitudes(c, p, q, s)
    # (U, V) = (c1 u, c2 v): L_H U / rhs = c1 L_H u / (c2^(p+q) rhs1), and c2 L_H v / (c1^s u^s)
    first.amplitude, second.amplitude = c1, c2
    first.worst_scaled_margin = float(np.min(c1 * lhs_u / (c2 ** (p + q) * rhs1)))
    second.worst_scaled_margin = float(np.min(c2 * lhs_v / (c1**s * rhs2)))
    info = {"candidate": candidate.to_dict(), "p": p, "q": q, "s": s, "alpha": alpha, "mu": params.mu}
    first.extra = second.extra = info
    return SystemMargins(first, second, c, c1, c2, replace(candidate, c1=c1, c2=c2))


# -- a priori estimate --------------------------------------------------------

def smoothstep(t):
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    return t * t * (3 - 2 * t)


def eta(t):
    """C^1 cutoff on [1, 4] equal to 1 on [2, 3]."""
    t = np.asarray(t, dtype=float)
    return np.where(t <= 2.5, smoothstep(t - 1), smoothstep(4 - t))


def eta_prime(t):
    t = np.asarray(t, dtype=float)
    up = np.clip(t - 1, 0, 1)
    down = np.clip(4 - t, 0, 1)
    return np.where(t <= 2.5, 6 * up * (1 - up), -6 * down * (1 - down))


@dataclass(frozen=True)
class AprioriProbe:
    lambda_c: float = 5.0
    m: float = 0.5
    radii: tuple = (10.0, 30.0, 100.0, 300.0)
    order: int = 24

    def __post_init__(self):
        if not self.lambda_c > 4:
            raise DomainError(f"cutoff exponent must exceed 4, got {self.lambda_c}")
        if not 0 <= self.m < 1:
            raise DomainError(f"m must lie in [0, 1), got {self.m}")
        if len(self.radii) < 2:
            raise DomainError("need at least two radii")


@dataclass
class AprioriReport:
    radii: list
    lhs: list
    rhs: list
    q: list
    slope_measured: float
    slope_predicted: float
    spread: float
    monotone_growth: bool
    lambda_c: float
    m: float
    ok: bool

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def _radial_eta_integral(radial, big_r: float, power: float, n: int, order: int) -> float:
    """int_R^{4R} radial(r) eta(r/R)^power r^(N-1) dr with panels at the eta breaks."""
    r, w = gauss_panels(big_r * np.array([1.0, 1.5, 2.0, 3.0, 3.5, 4.0]), order)
    return float(np.sum(w * radial(r) * eta(r / big_r) ** power * r ** (n - 1)))


def apriori_check(domain: ConeDomain, spectral: SpectralData, params: ScalarParams,
                  solution: ScalarCandidate, probe: AprioriProbe | None = None) -> AprioriReport:
    """Ratio of the two sides of the weighted integral estimate

        (int u^((p+q-m)/2) phi^(1/2) eta_R^(lambda/2))^2  <=  C R^(alpha-2) int u^(1-m) phi eta_R^(lambda-2)

    for each probe radius R. Both integrands are separable, so each integral is
    an angular moment of phi times a one-dimensional radial integral.
    """
    probe = probe or AprioriProbe()
    n = domain.n
    p, q, alpha = params.p, params.q, params.alpha
    lam, m = probe.lambda_c, probe.m
    f = solution.profile
    e1 = (p + q - m) / 2
    e2 = 1 - m
    radii = np.asarray(probe.radii, dtype=float)
    if radii.min() <= domain.rho:
        raise DomainError(f"probe radii must exceed rho = {domain.rho}")
    ang1 = angular_moment(domain, spectral, e1 * f.phi_power + 0.5)
    ang2 = angular_moment(domain, spectral, e2 * f.phi_power + 1.0)
    lhs, rhs = [], []
    for big_r in radii:
        i1 = _radial_eta_integral(lambda r: f.radial(r) ** e1, big_r, lam / 2, n, probe.order)
        i2 = _radial_eta_integral(lambda r: f.radial(r) ** e2, big_r, lam - 2, n, probe.order)
        lhs.append((ang1 * i1) ** 2)
        rhs.append(big_r ** (alpha - 2) * ang2 * i2)
    lhs, rhs = np.array(lhs), np.array(rhs)
    qv = lhs / rhs
    slope = float(np.polyfit(np.log(radii), np.log(qv), 1)[0])
    g = f.gamma
    predicted = (2 * n + (p + q - m) * g) - (alpha - 2 + n + (1 - m) * g)
    spread = float(qv.max() / qv.min())
    growth = bool(np.all(np.diff(qv) > 0))
    return AprioriReport(radii.tolist(), lhs.tolist(), rhs.tolist(), qv.tolist(), slope, predicted,
                         spread, growth, lam, m, bool(spread < 1e3 and not growth))


__all__ = [
    "POWER_LAW", "LOG_POWER", "ScalarCandidate", "SystemCandidate", "MarginGrid", "MarginReport",
    "SystemMargins", "AprioriProbe", "AprioriReport", "construct_scalar_candidate", "lhs_hardy",
    "scalar_margin", "construct_system_candidate", "system_margin", "apriori_check", "cond1_slacks",
    "system_slacks", "a_interval", "check_csys", "coupled_amplitudes", "eta", "eta_prime",
    "smoothstep", "worker_count",
]
