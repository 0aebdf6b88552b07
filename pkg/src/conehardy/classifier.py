"""Existence / nonexistence verdicts for the scalar inequality

    -Delta u - mu |x|^{-2} u >= (|x|^{-alpha} * u^p) u^q   in C_Omega^rho

and for the system with the second equation -Delta v - mu |x|^{-2} v >= u^s.

Every threshold is a function of N, alpha and the smaller indicial root
gamma_*, so no verdict depends on rho. Rules are evaluated as a cascade and
the first one that fires decides.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from conehardy.errors import DomainError, SupercriticalMu
from conehardy.geometry import ConeDomain
from conehardy.spectral import GammaRoots, SpectralData, gamma_roots, is_supercritical

EXISTS = "Exists"
NOT_EXISTS = "NotExists"
UNDETERMINED = "Undetermined"

# relative tolerance for sitting on a critical line
EPS_B = 1e-12

RULES = {
    "thm1a": "Theorem 1(a): mu > C_H rules out positive solutions",
    "thm1b_i": "Theorem 1(b)(i): p <= (N-alpha)/|gamma_*|",
    "thm1b_ii": "Theorem 1(b)(ii): p+q < 1+(N-alpha+2)/|gamma_*|",
    "thm1b_iii": "Theorem 1(b)(iii): p+q = 1+(N-alpha+2)/|gamma_*| and q > 1",
    "thm2": "Theorem 2: q > q_min, p > (N-alpha)/|gamma_*| and p+q > 1+(N-alpha+2)/|gamma_*|",
    "thm4a": "Theorem 1.4(a): mu > C_H rules out positive solutions of the system",
    "thm4b_i": "Theorem 1.4(b)(i): p+q >= 2 and (p <= (N-alpha)/|gamma_*| or p+q below the system curve)",
    "thm4b_ii": "Theorem 1.4(b)(ii): s > 1+2/|gamma_*|, q > q_min, p > (N-alpha)/|gamma_*|, "
                "p+q above the system curve",
}


@dataclass(frozen=True)
class ScalarParams:
    p: float
    q: float
    alpha: float
    mu: float

    def check(self, n: int) -> None:
        if not (self.p > 0 and self.q > 0):
            raise DomainError(f"p and q must be positive, got p={self.p}, q={self.q}")
        if not (0 <= self.alpha < n):
            raise DomainError(f"alpha must lie in [0, N={n}), got {self.alpha}")
        if not math.isfinite(self.mu):
            raise DomainError("mu must be finite")


@dataclass(frozen=True)
class SystemParams(ScalarParams):
    s: float = 2.0

    def check(self, n: int) -> None:
        super().check(n)
        if not self.s > 1:
            raise DomainError(f"s must exceed 1, got {self.s}")


@dataclass(frozen=True)
class CriticalThresholds:
    p_crit: float
    pq_crit: float
    q_min: float
    s_min: float
    gamma_abs: float
    alpha: float
    n: int

    def system_curve(self, s: float) -> float:
        g = self.gamma_abs
        if g == 0:
            return math.inf
        return (1 + 2 / g) / s + (self.n - self.alpha + 2) / g


def critical_thresholds(roots: GammaRoots, alpha: float, n: int) -> CriticalThresholds:
    g = abs(roots.gamma_star_minus)
    if g == 0:
        inf = math.inf
        return CriticalThresholds(inf, inf, inf, inf, 0.0, alpha, n)
    return CriticalThresholds(
        p_crit=(n - alpha) / g,
        pq_crit=1 + (n - alpha + 2) / g,
        q_min=1 + max(0.0, (2 - alpha) / g),
        s_min=1 + 2 / g,
        gamma_abs=g,
        alpha=alpha,
        n=n,
    )


def _eq(a: float, b: float) -> bool:
    if math.isinf(b):
        return False
    return abs(a - b) <= EPS_B * max(1.0, abs(b))


def _lt(a, b):
    return a < b and not _eq(a, b)


def _gt(a, b):
    return a > b and not _eq(a, b)


def _le(a, b):
    return a < b or _eq(a, b)


def _jsonable(v: float):
    if math.isinf(v):
        return "+inf" if v > 0 else "-inf"
    return v


@dataclass
class Verdict:
    outcome: str
    rules: list = field(default_factory=list)
    thresholds: dict = field(default_factory=dict)
    boundary: bool = False

    @property
    def rule_ids(self) -> list[str]:
        return [r["id"] for r in self.rules]

    def to_dict(self) -> dict:
        return {
            "outcome": self.outcome,
            "rules": list(self.rules),
            "thresholds": {k: _jsonable(v) for k, v in self.thresholds.items()},
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def _rule(rid: str) -> dict:
    return {"id": rid, "citation": RULES[rid]}


def _mu_supercritical(spectral: SpectralData, mu: float) -> bool:
    return is_supercritical(spectral.lambda1, spectral.n, mu)


def _scalar_thresholds(th: CriticalThresholds) -> dict:
    return {"p_crit": th.p_crit, "pq_crit": th.pq_crit, "q_min": th.q_min}


def classify_scalar(domain: ConeDomain, spectral: SpectralData, params: ScalarParams) -> Verdict:
    n = domain.n
    params.check(n)
    p, q, alpha, mu = params.p, params.q, params.alpha, params.mu
    if _mu_supercritical(spectral, mu):
        return Verdict(NOT_EXISTS, [_rule("thm1a")], {"hardy_constant": spectral.hardy_constant})
    th = critical_thresholds(gamma_roots(spectral, mu), alpha, n)
    thr = _scalar_thresholds(th)
    on_line = _eq(p, th.p_crit) or _eq(p + q, th.pq_crit) or _eq(q, th.q_min)
    if _le(p, th.p_crit):
        return Verdict(NOT_EXISTS, [_rule("thm1b_i")], thr, on_line)
    if _lt(p + q, th.pq_crit):
        return Verdict(NOT_EXISTS, [_rule("thm1b_ii")], thr, on_line)
    if _eq(p + q, th.pq_crit) and q > 1:
        return Verdict(NOT_EXISTS, [_rule("thm1b_iii")], thr, on_line)
    if _gt(q, th.q_min) and _gt(p, th.p_crit) and _gt(p + q, th.pq_crit):
        return Verdict(EXISTS, [_rule("thm2")], thr, on_line)
    return Verdict(UNDETERMINED, [], thr, on_line)


def classify_system(domain: ConeDomain, spectral: SpectralData, params: SystemParams) -> Verdict:
    n = domain.n
    params.check(n)
    p, q, alpha, mu, s = params.p, params.q, params.alpha, params.mu, params.s
    if _mu_supercritical(spectral, mu):
        return Verdict(NOT_EXISTS, [_rule("thm4a")], {"hardy_constant": spectral.hardy_constant})
    th = critical_thresholds(gamma_roots(spectral, mu), alpha, n)
    curve = th.system_curve(s)
    thr = {"p_crit": th.p_crit, "q_min": th.q_min, "s_min": th.s_min, "system_curve": curve}
    on_line = _eq(p, th.p_crit) or _eq(p + q, curve) or _eq(q, th.q_min)
    if (p + q >= 2 or _eq(p + q, 2.0)) and (_le(p, th.p_crit) or _lt(p + q, curve)):
        return Verdict(NOT_EXISTS, [_rule("thm4b_i")], thr, on_line)
    if _gt(s, th.s_min) and _gt(q, th.q_min) and _gt(p, th.p_crit) and _gt(p + q, curve):
        return Verdict(EXISTS, [_rule("thm4b_ii")], thr, on_line)
    return Verdict(UNDETERMINED, [], thr, on_line)


@dataclass
class RegionScan:
    p: np.ndarray
    q: np.ndarray
    outcome: np.ndarray  # shape (n_p, n_q), strings
    boundary: np.ndarray  # shape (n_p, n_q), bool
    thresholds: dict
    system_s: float | None = None

    def count(self, outcome: str) -> int:
        return int(np.sum(self.outcome == outcome))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["p", "q", "outcome", "boundary_flag"])
        for i, p in enumerate(self.p):
            for j, q in enumerate(self.q):
                w.writerow([repr(float(p)), repr(float(q)), self.outcome[i, j], int(self.boundary[i, j])])
        return buf.getvalue()


def region_scan(domain: ConeDomain, spectral: SpectralData, mu: float, alpha: float,
                p_range, q_range, n_p: int, n_q: int, system_s: float | None = None) -> RegionScan:
    """Classify every node of the grid linspace(p_range) x linspace(q_range).

    Ranges are (lo, hi] when lo == 0 so that only positive exponents appear.
    """
    (p0, p1), (q0, q1) = p_range, q_range
    if not (0 <= p0 < p1 and 0 <= q0 < q1) or n_p < 1 or n_q < 1:
        raise DomainError("ranges must be positive and increasing with at least one node")
    ps = _axis(p0, p1, n_p)
    qs = _axis(q0, q1, n_q)
    out = np.empty((n_p, n_q), dtype=object)
    flag = np.zeros((n_p, n_q), dtype=bool)
    thresholds = {}
    for i, p in enumerate(ps):
        for j, q in enumerate(qs):
            if system_s is None:
                v = classify_scalar(domain, spectral, ScalarParams(float(p), float(q), alpha, mu))
            else:
                v = classify_system(domain, spectral, SystemParams(float(p), float(q), alpha, mu, system_s))
            out[i, j] = v.outcome
            flag[i, j] = v.boundary
            thresholds = v.thresholds
    return RegionScan(ps, qs, out.astype(str), flag, thresholds, system_s)


def _axis(lo: float, hi: float, m: int) -> np.ndarray:
    if lo == 0:
        # drop the origin: nodes hi/m, 2hi/m, ..., hi
        return hi * np.arange(1, m + 1) / m
    return np.linspace(lo, hi, m)


__all__ = [
    "EXISTS", "NOT_EXISTS", "UNDETERMINED", "EPS_B", "ScalarParams", "SystemParams",
    "CriticalThresholds", "Verdict", "RegionScan", "critical_thresholds", "classify_scalar",
    "classify_system", "region_scan", "SupercriticalMu",
]
