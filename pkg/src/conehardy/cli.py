"""Command-line front end.

    conehardy eigen    --n 3 --omega cap --theta0 1.2 --mu 0
    conehardy classify --n 3 --omega full --mu 0 --alpha 1 --p 3 --q 3 [--system --s 4]
    conehardy region   --n 3 --omega full --mu 0 --alpha 1 --p-range 0,8 --q-range 0,8 --format svg
    conehardy convolve --n 3 --omega full --alpha 1 --gamma-f -6 --x-radius 2
    conehardy verify   --n 3 --omega full --mu 0 --alpha 1 --p 3 --q 3 [--apriori]

Flags override values read from --config (a JSON object keyed by the long
flag names with dashes replaced by underscores). Exit codes: 0 success,
2 invalid configuration, 3 numerical failure, 4 verification refused because
the classifier did not report existence.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, fields
from importlib import resources

from conehardy.classifier import (
    EXISTS,
    NOT_EXISTS,
    ScalarParams,
    SystemParams,
    classify_scalar,
    classify_system,
    critical_thresholds,
    region_scan,
)
from conehardy.errors import DomainError, NumericalError
from conehardy.geometry import ConeDomain, ConePoint, OmegaSpec
from conehardy.quadrature import DEFAULT_ORDER, Profile, convolve
from conehardy.spectral import gamma_roots, principal_eigenvalue
from conehardy.verifier import (
    AprioriProbe,
    MarginGrid,
    apriori_check,
    construct_scalar_candidate,
    construct_system_candidate,
    scalar_margin,
    system_margin,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_REFUSED = 4


@dataclass
class RunConfig:
    n: int = 3
    omega: str = "full"
    theta0: float | None = None
    rho: float = 1.0
    mu: float = 0.0
    alpha: float = 1.0
    p: float | None = None
    q: float | None = None
    system: bool = False
    s: float = 2.0
    # region
    p_range: str = "0,8"
    q_range: str = "0,8"
    n_p: int = 200
    n_q: int = 200
    # convolve
    gamma_f: float | None = None
    phi_power: float = 0.0
    tau: float = 0.0
    sigma: float = 1.0
    amplitude: float = 1.0
    x_radius: float | None = None
    x_polar: float = 0.0
    r_max: float | None = None
    eps: float | None = None
    order: int = DEFAULT_ORDER
    # verify
    decades: float = 2.0
    shells: int = 48
    angles: int = 48
    apriori: bool = False
    m: float = 0.5
    lambda_c: float = 5.0
    radii: str = "10,30,100,300"
    # output
    out: str | None = None
    format: str | None = None

    def domain(self) -> ConeDomain:
        if self.omega == "full":
            om = OmegaSpec.full()
        elif self.omega == "cap":
            if self.theta0 is None:
                raise DomainError("--omega cap needs --theta0")
            om = OmegaSpec.cap(self.theta0)
        else:
            raise DomainError(f"--omega must be full or cap, got {self.omega!r}")
        return ConeDomain(int(self.n), om, float(self.rho))

    def need(self, *names: str) -> None:
        missing = [k for k in names if getattr(self, k) is None]
        if missing:
            raise DomainError("missing required option(s): " + ", ".join("--" + k.replace("_", "-")
                                                                          for k in missing))

    def scalar_params(self) -> ScalarParams:
        self.need("p", "q")
        return ScalarParams(float(self.p), float(self.q), float(self.alpha), float(self.mu))

    def system_params(self) -> SystemParams:
        self.need("p", "q")
        return SystemParams(float(self.p), float(self.q), float(self.alpha), float(self.mu), float(self.s))


def load_schema(name: str) -> dict:
    """JSON schema shipped with the package, e.g. load_schema("verdict")."""
    text = resources.files("conehardy").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


def _floats(text: str, what: str, count: int | None = None) -> list[float]:
    try:
        vals = [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise DomainError(f"{what} must be a comma separated list of numbers, got {text!r}") from None
    if count is not None and len(vals) != count:
        raise DomainError(f"{what} needs exactly {count} numbers, got {text!r}")
    return vals


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("domain and parameters")
    g.add_argument("--config", help="JSON file with default values for any option")
    g.add_argument("--n", type=int, help="dimension N >= 2 (default 3)")
    g.add_argument("--omega", choices=["full", "cap"], help="angular domain (default full)")
    g.add_argument("--theta0", type=float, help="cap half angle in (0, pi)")
    g.add_argument("--rho", type=float, help="vertex cutoff radius (default 1)")
    g.add_argument("--mu", type=float, help="Hardy coefficient (default 0)")
    g.add_argument("--alpha", type=float, help="Riesz exponent in [0, N) (default 1)")
    g.add_argument("--p", type=float, help="convolution power")
    g.add_argument("--q", type=float, help="local power")
    g.add_argument("--system", action="store_const", const=True, help="use the system criteria")
    g.add_argument("--s", type=float, help="system exponent s > 1 (default 2)")
    o = common.add_argument_group("output")
    o.add_argument("--out", help="write to this file instead of stdout")
    o.add_argument("--format", choices=["json", "csv", "svg"], help="output format")

    ap = argparse.ArgumentParser(prog="conehardy", description=__doc__.split("\n\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("eigen", parents=[common], help="lambda1, Hardy constant and indicial roots")
    sub.add_parser("classify", parents=[common], help="existence verdict for (p, q)")

    rg = sub.add_parser("region", parents=[common], help="verdicts over a (p, q) grid as CSV or SVG")
    rg.add_argument("--p-range", help="lo,hi for p (default 0,8; lo=0 is excluded)")
    rg.add_argument("--q-range", help="lo,hi for q (default 0,8)")
    rg.add_argument("--n-p", type=int, help="grid nodes in p (default 200)")
    rg.add_argument("--n-q", type=int, help="grid nodes in q (default 200)")

    cv = sub.add_parser("convolve", parents=[common], help="(|x|^-alpha * f)(x) for a separable profile")
    cv.add_argument("--gamma-f", type=float, help="radial exponent of f")
    cv.add_argument("--phi-power", type=float, help="power of phi in f (default 0)")
    cv.add_argument("--tau", type=float, help="log power (default 0)")
    cv.add_argument("--sigma", type=float, help="log scale (default 1)")
    cv.add_argument("--amplitude", type=float, help="amplitude of f (default 1)")
    cv.add_argument("--x-radius", type=float, help="|x|, at least 2 rho")
    cv.add_argument("--x-polar", type=float, help="polar angle of x (default 0)")
    cv.add_argument("--r-max", type=float, help="truncation radius (default max(100|x|, 100 rho))")
    cv.add_argument("--eps", type=float, help="near-field radius (default min(|x|/4, dist/2))")
    cv.add_argument("--order", type=int, help=f"Gauss order per panel (default {DEFAULT_ORDER})")

    vf = sub.add_parser("verify", parents=[common], help="construct a solution and certify it on a grid")
    vf.add_argument("--decades", type=float, help="radial extent of the margin grid (default 2)")
    vf.add_argument("--shells", type=int, help="radial shells per decade (default 48)")
    vf.add_argument("--angles", type=int, help="polar angles for caps (default 48)")
    vf.add_argument("--order", type=int, help=f"Gauss order per panel (default {DEFAULT_ORDER})")
    vf.add_argument("--apriori", action="store_const", const=True, help="also run the integral estimate")
    vf.add_argument("--m", type=float, help="moment m in [0, 1) (default 0.5)")
    vf.add_argument("--lambda-c", type=float, help="cutoff exponent > 4 (default 5)")
    vf.add_argument("--radii", help="probe radii R (default 10,30,100,300)")
    return ap


def load_config(argv=None) -> tuple[str, RunConfig]:
    args = vars(_parser().parse_args(argv))
    command = args.pop("command")
    cfg = RunConfig()
    known = {f.name for f in fields(RunConfig)}
    path = args.pop("config", None)
    if path:
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise DomainError(f"cannot read config {path}: {exc}") from None
        if not isinstance(data, dict):
            raise DomainError("config file must hold a JSON object")
        unknown = set(data) - known
        if unknown:
            raise DomainError("unknown config keys: " + ", ".join(sorted(unknown)))
        for k, v in data.items():
            setattr(cfg, k, v)
    for k, v in args.items():
        if v is not None:
            setattr(cfg, k, v)
    return command, cfg


def _emit(cfg: RunConfig, text: str) -> None:
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _jnum(v):
    if isinstance(v, float) and math.isinf(v):
        return "+inf" if v > 0 else "-inf"
    return v


def cmd_eigen(cfg: RunConfig) -> dict:
    dom = cfg.domain()
    sp = principal_eigenvalue(dom.omega, dom.n)
    roots = gamma_roots(sp, float(cfg.mu))
    return {
        "n": dom.n,
        "omega": dom.omega.to_dict(),
        "lambda1": sp.lambda1,
        "hardy_constant": sp.hardy_constant,
        "mu": roots.mu,
        "gamma_star_minus": roots.gamma_star_minus,
        "gamma_star_plus": roots.gamma_star_plus,
    }


def _classify(cfg: RunConfig, dom, sp):
    if cfg.system:
        return classify_system(dom, sp, cfg.system_params())
    return classify_scalar(dom, sp, cfg.scalar_params())


def cmd_classify(cfg: RunConfig) -> dict:
    dom = cfg.domain()
    sp = principal_eigenvalue(dom.omega, dom.n)
    out = _classify(cfg, dom, sp).to_dict()
    out["input"] = _input_record(cfg, dom)
    return out


def _input_record(cfg: RunConfig, dom) -> dict:
    rec = {"domain": dom.to_dict(), "mu": cfg.mu, "alpha": cfg.alpha, "p": cfg.p, "q": cfg.q}
    if cfg.system:
        rec["s"] = cfg.s
    return rec


def cmd_region(cfg: RunConfig):
    dom = cfg.domain()
    sp = principal_eigenvalue(dom.omega, dom.n)
    pr = _floats(cfg.p_range, "--p-range", 2)
    qr = _floats(cfg.q_range, "--q-range", 2)
    return region_scan(dom, sp, float(cfg.mu), float(cfg.alpha), pr, qr, int(cfg.n_p), int(cfg.n_q),
                       system_s=float(cfg.s) if cfg.system else None)


_COLORS = {EXISTS: "#4a6fa5", NOT_EXISTS: "#c9d6ea", "Undetermined": "#f2f2f2"}


def region_svg(scan, width: int = 480, height: int = 480, pad: int = 48) -> str:
    """Shaded verdict map with the critical lines drawn on top."""
    ps, qs = scan.p, scan.q
    dp = (ps[-1] - ps[0]) / max(1, len(ps) - 1) if len(ps) > 1 else ps[0]
    dq = (qs[-1] - qs[0]) / max(1, len(qs) - 1) if len(qs) > 1 else qs[0]
    p0, p1 = ps[0] - dp / 2, ps[-1] + dp / 2
    q0, q1 = qs[0] - dq / 2, qs[-1] + dq / 2

    def X(p):
        return pad + (p - p0) / (p1 - p0) * width

    def Y(q):
        return pad + height - (q - q0) / (q1 - q0) * height

    cw, ch = width / len(ps), height / len(qs)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width + 2 * pad}" height="{height + 2 * pad}" '
        f'font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{width + 2 * pad}" height="{height + 2 * pad}" fill="white"/>',
    ]
    for i, p in enumerate(ps):
        for j, q in enumerate(qs):
            color = _COLORS.get(str(scan.outcome[i, j]), "#ffffff")
            parts.append(f'<rect x="{X(p) - cw / 2:.3f}" y="{Y(q) - ch / 2:.3f}" width="{cw + 0.05:.3f}" '
                         f'height="{ch + 0.05:.3f}" fill="{color}"/>')
    clip = f'<clipPath id="plot"><rect x="{pad}" y="{pad}" width="{width}" height="{height}"/></clipPath>'
    parts.append(clip)
    lines = []
    th = scan.thresholds
    if "p_crit" in th and math.isfinite(th["p_crit"]):
        lines.append(("p = p_crit", (th["p_crit"], q0), (th["p_crit"], q1)))
    total = th.get("pq_crit", th.get("system_curve"))
    if total is not None and math.isfinite(total):
        label = "p + q = pq_crit" if "pq_crit" in th else "p + q = system curve"
        lines.append((label, (total - q0, q0), (total - q1, q1)))
    if "q_min" in th and math.isfinite(th["q_min"]):
        lines.append(("q = q_min", (p0, th["q_min"]), (p1, th["q_min"])))
    for label, (xa, ya), (xb, yb) in lines:
        parts.append(f'<line x1="{X(xa):.3f}" y1="{Y(ya):.3f}" x2="{X(xb):.3f}" y2="{Y(yb):.3f}" '
                     f'stroke="black" stroke-width="1.5" clip-path="url(#plot)"><title>{label}</title></line>')
    parts.append(f'<rect x="{pad}" y="{pad}" width="{width}" height="{height}" fill="none" stroke="black"/>')
    parts.append(f'<text x="{pad + width / 2}" y="{height + 1.7 * pad}" text-anchor="middle">p</text>')
    parts.append(f'<text x="{pad / 3}" y="{pad + height / 2}" text-anchor="middle">q</text>')
    for k, (name, color) in enumerate(_COLORS.items()):
        y = 14 + 14 * k
        parts.append(f'<rect x="{pad}" y="{y - 10}" width="10" height="10" fill="{color}" stroke="black"/>')
        parts.append(f'<text x="{pad + 16}" y="{y}">{name}</text>')
    parts.append("</svg>")
    return "\n".join(parts)


def cmd_convolve(cfg: RunConfig) -> dict:
    cfg.need("gamma_f", "x_radius")
    dom = cfg.domain()
    sp = principal_eigenvalue(dom.omega, dom.n)
    f = Profile(float(cfg.amplitude), float(cfg.phi_power), float(cfg.gamma_f), float(cfg.tau), float(cfg.sigma))
    x = ConePoint.on_meridian(dom.n, float(cfg.x_radius), float(cfg.x_polar))
    res = convolve(dom, sp, f, float(cfg.alpha), x, r_max=cfg.r_max, eps_excl=cfg.eps, order=int(cfg.order))
    out = res.to_dict()
    out["input"] = {"domain": dom.to_dict(), "alpha": cfg.alpha, "profile": {
        "amplitude": f.amplitude, "phi_power": f.phi_power, "gamma": f.gamma, "tau": f.tau, "sigma": f.sigma},
        "x_radius": x.r, "x_polar": x.polar}
    return out


class Refused(Exception):
    def __init__(self, record: dict):
        super().__init__(record.get("outcome"))
        self.record = record


def cmd_verify(cfg: RunConfig) -> dict:
    dom = cfg.domain()
    sp = principal_eigenvalue(dom.omega, dom.n)
    verdict = _classify(cfg, dom, sp)
    if verdict.outcome != EXISTS:
        rec = verdict.to_dict()
        rec["input"] = _input_record(cfg, dom)
        raise Refused(rec)
    if cfg.apriori and cfg.system:
        raise DomainError("--apriori applies to the scalar inequality only")
    grid = MarginGrid(decades=float(cfg.decades), shells_per_decade=int(cfg.shells),
                      n_angles=int(cfg.angles), order=int(cfg.order))
    roots = gamma_roots(sp, float(cfg.mu))
    out = {"verdict": verdict.to_dict(), "input": _input_record(cfg, dom)}
    if cfg.system:
        params = cfg.system_params()
        cand = construct_system_candidate(dom, sp, roots, params)
        res = system_margin(dom, sp, roots, params, cand, grid)
        out.update({"candidate": res.candidate.to_dict(), "margins": [res.first.to_dict(), res.second.to_dict()],
                    "amplitude": res.c, "c1": res.c1, "c2": res.c2})
        return out
    params = cfg.scalar_params()
    probe = None
    if cfg.apriori:
        # validate the probe before the expensive margin run
        probe = AprioriProbe(float(cfg.lambda_c), float(cfg.m), tuple(_floats(cfg.radii, "--radii")))
    cand = construct_scalar_candidate(dom, sp, roots, params)
    rep = scalar_margin(dom, sp, roots, params, cand, grid)
    out.update({"candidate": cand.to_dict(), "margins": [rep.to_dict()], "amplitude": rep.amplitude})
    if probe is not None:
        out["apriori"] = apriori_check(dom, sp, params, cand.with_amplitude(rep.amplitude), probe).to_dict()
    return out


def _dumps(obj) -> str:
    def clean(v):
        if isinstance(v, dict):
            return {k: clean(x) for k, x in v.items()}
        if isinstance(v, (list, tuple)):
            return [clean(x) for x in v]
        return _jnum(v)
    return json.dumps(clean(obj), indent=2, allow_nan=False)


def main(argv=None) -> int:
    try:
        command, cfg = load_config(argv)
        if command == "region":
            scan = cmd_region(cfg)
            fmt = cfg.format or "csv"
            if fmt == "csv":
                _emit(cfg, scan.to_csv())
            elif fmt == "svg":
                _emit(cfg, region_svg(scan))
            else:
                _emit(cfg, _dumps({"p": scan.p.tolist(), "q": scan.q.tolist(),
                                   "outcome": scan.outcome.tolist(), "boundary": scan.boundary.tolist(),
                                   "thresholds": scan.thresholds}))
            return EXIT_OK
        handlers = {"eigen": cmd_eigen, "classify": cmd_classify, "convolve": cmd_convolve,
                    "verify": cmd_verify}
        if cfg.format not in (None, "json"):
            raise DomainError(f"{command} only writes JSON")
        _emit(cfg, _dumps(handlers[command](cfg)))
        return EXIT_OK
    except Refused as exc:
        sys.stdout.write(_dumps(exc.record) + "\n")
        print("verification refused: classifier verdict is " + str(exc.record.get("outcome")), file=sys.stderr)
        return EXIT_REFUSED
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (TypeError, ValueError) as exc:
        # malformed values coming from a config file
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def critical_lines(cfg: RunConfig) -> dict:
    """Thresholds for the configured domain, used by the region legend and tests."""
    dom = cfg.domain()
    sp = principal_eigenvalue(dom.omega, dom.n)
    th = critical_thresholds(gamma_roots(sp, float(cfg.mu)), float(cfg.alpha), dom.n)
    return {"p_crit": th.p_crit, "pq_crit": th.pq_crit, "q_min": th.q_min, "s_min": th.s_min,
            "system_curve": th.system_curve(float(cfg.s))}


if __name__ == "__main__":
    sys.exit(main())
