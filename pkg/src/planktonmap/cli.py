"""Command-line front end.

Every subcommand resolves a :class:`RunConfig` (flags override an optional
``--config`` key=value file), writes its artifact to ``--output`` (stdout by
default) and records the resolved config next to it as ``<output>.config.json``
(or on stderr when writing to stdout).

Exit codes: 0 success, 1 usage or I/O error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__
from .audit import run_audit
from .control import Gains, is_stabilizing, resolve_target, stability_triangle
from .dynamics import (PreconditionError, classify_attractor, descent_hypotheses, invariant_set_check,
                       iterate, lyapunov_descent, sample_set, sweep_theta)
from .equilibria import CountMismatchError, classify_region, find_fixed_points, predict_fp_count
from .model import Params
from .nsbif import NotNSApplicable, SingularTransformError, cross_check, normal_form, ns_critical, report_summary

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2
COMMANDS = ("classify", "ns", "orbit", "sweep", "control", "invariance", "audit", "repro")
DEFAULT_SEED = 12345


class UsageError(Exception):
    pass


def fmt(x) -> str:
    """17 significant digits, enough to round-trip any float64."""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return f"{float(x):.17g}"


@dataclass
class RunConfig:
    command: str = "classify"
    r: float | None = None
    beta: float | None = None
    theta: float | None = None
    gamma: float | None = None
    theta_lo: float = 0.01
    theta_hi: float = 2.0
    steps: int = 400
    init: tuple[float, float] = (0.32, 0.82)
    n: int = 10_000
    burn_in: float = 0.5
    record: int = 200
    s1: float = 0.0
    s2: float = 0.0
    target: str | None = None
    which: str = "M1"
    samples: int = 10_000
    starts: int = 0
    per_stratum: int = 80
    variant: str = "printed"
    emit_triangle: bool = False
    seed: int = DEFAULT_SEED
    output: str = "-"
    format: str = "json"

    def params(self, need_theta: bool = True) -> Params:
        missing = [k for k in ("r", "beta", "gamma") if getattr(self, k) is None]
        if need_theta and self.theta is None:
            missing.append("theta")
        if missing:
            raise UsageError(f"missing parameter(s): {', '.join(missing)}")
        theta = self.theta if self.theta is not None else 1.0
        try:
            return Params(r=self.r, beta=self.beta, theta=theta, gamma=self.gamma)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            lines.append(f"{f.name}={_encode(value)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        kw = {}
        names = {f.name: f for f in fields(cls)}
        for raw in text.splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            key = key.strip().replace("-", "_")
            if not sep or key not in names:
                raise UsageError(f"bad config line: {raw!r}")
            kw[key] = _decode(key, value.strip())
        return cls(**kw)

    def as_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["init"] = list(self.init)
        return d


_FLOATS = {"r", "beta", "theta", "gamma", "theta_lo", "theta_hi", "burn_in", "s1", "s2"}
_INTS = {"steps", "n", "record", "samples", "starts", "per_stratum", "seed"}


def _encode(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return fmt(value)
    if isinstance(value, tuple):
        return ",".join(fmt(x) for x in value)
    return str(value)


def _decode(key: str, text: str):
    if text.lower() == "none":
        return None
    try:
        if key in _FLOATS:
            return float(text)
        if key in _INTS:
            return int(text)
        if key == "init":
            return _pair(text)
        if key == "emit_triangle":
            if text.lower() not in ("true", "false"):
                raise ValueError(text)
            return text.lower() == "true"
    except ValueError as exc:
        raise UsageError(f"bad value for {key}: {text!r}") from exc
    return text


def _pair(text: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise ValueError(f"expected 'u,v', got {text!r}")
    return float(parts[0]), float(parts[1])


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="key=value file; flags override its entries")
    for name in ("r", "beta", "theta", "gamma"):
        common.add_argument(f"--{name}", type=float, default=argparse.SUPPRESS)
    common.add_argument("--output", "-o", default=argparse.SUPPRESS, help="file path or '-' for stdout")
    common.add_argument("--format", choices=("csv", "json"), default=argparse.SUPPRESS)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)

    parser = _Parser(prog="planktonmap", description="Analyses of the phytoplankton-zooplankton map.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("classify", parents=[common], help="region, fixed points and their stability")
    ns = sub.add_parser("ns", parents=[common], help="Neimark-Sacker threshold and normal form")
    ns.add_argument("--variant", choices=("printed", "exact"), default=argparse.SUPPRESS)
    ns.add_argument("--target", choices=("E1", "E3"), default=argparse.SUPPRESS)

    orbit = sub.add_parser("orbit", parents=[common], help="iterate one orbit, CSV step,u,v")
    orbit.add_argument("--init", type=_pair_arg, default=argparse.SUPPRESS)
    orbit.add_argument("--n", type=int, default=argparse.SUPPRESS)
    _gain_args(orbit)

    sweep = sub.add_parser("sweep", parents=[common], help="theta sweep, CSV theta,u_tail,verdict")
    sweep.add_argument("--theta-lo", dest="theta_lo", type=float, default=argparse.SUPPRESS)
    sweep.add_argument("--theta-hi", dest="theta_hi", type=float, default=argparse.SUPPRESS)
    sweep.add_argument("--steps", type=int, default=argparse.SUPPRESS)
    sweep.add_argument("--init", type=_pair_arg, default=argparse.SUPPRESS)
    sweep.add_argument("--n", type=int, default=argparse.SUPPRESS)
    sweep.add_argument("--burn-in", dest="burn_in", type=float, default=argparse.SUPPRESS)
    sweep.add_argument("--record", type=int, default=argparse.SUPPRESS)

    control = sub.add_parser("control", parents=[common], help="stability triangle in gain space")
    _gain_args(control)
    control.add_argument("--emit-triangle", dest="emit_triangle", action="store_true", default=argparse.SUPPRESS,
                         help="write the triangle as a closed CSV polyline s1,s2")

    inv = sub.add_parser("invariance", parents=[common], help="sampled invariant-set and descent checks")
    inv.add_argument("--which", choices=("M1", "M2"), default=argparse.SUPPRESS)
    inv.add_argument("--samples", type=int, default=argparse.SUPPRESS)
    inv.add_argument("--starts", type=int, default=argparse.SUPPRESS, help="orbits for the descent check")
    inv.add_argument("--n", type=int, default=argparse.SUPPRESS)

    audit = sub.add_parser("audit", parents=[common], help="randomized region/count and E2 audit")
    audit.add_argument("--per-stratum", dest="per_stratum", type=int, default=argparse.SUPPRESS)

    repro = sub.add_parser("repro", parents=[common], help="regenerate the worked examples, orbits, sweeps and branch tables")
    repro.add_argument("--n", type=int, default=argparse.SUPPRESS)
    return parser


def _gain_args(p):
    p.add_argument("--s1", type=float, default=argparse.SUPPRESS)
    p.add_argument("--s2", type=float, default=argparse.SUPPRESS)
    p.add_argument("--target", choices=("E1", "E2", "E3"), default=argparse.SUPPRESS)


def _pair_arg(text):
    try:
        return _pair(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def resolve_config(argv) -> RunConfig:
    ns = vars(build_parser().parse_args(argv))
    base = RunConfig()
    path = ns.pop("config", None)
    if path:
        try:
            base = RunConfig.from_text(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from exc
    cfg = dataclasses.replace(base, **ns)
    if cfg.command in ("orbit", "sweep") and "format" not in ns and not path:
        cfg.format = "csv"
    return cfg


# ---------------------------------------------------------------- writers

def _jsonable(obj):
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=False) + "\n"


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([x if isinstance(x, str) else fmt(x) for x in row])
    return buf.getvalue()


def _emit(cfg: RunConfig, text: str, stdout) -> None:
    sidecar = dumps(cfg.as_dict())
    if cfg.output in ("-", "", None):
        stdout.write(text)
        sys.stderr.write("config: " + json.dumps(cfg.as_dict(), sort_keys=True) + "\n")
        return
    out = Path(cfg.output)
    try:
        out.write_text(text, encoding="utf-8", newline="\n")
        Path(str(out) + ".config.json").write_text(sidecar, encoding="utf-8", newline="\n")
    except OSError as exc:
        raise UsageError(f"cannot write output: {exc}") from exc


# ---------------------------------------------------------------- commands

def cmd_classify(cfg: RunConfig) -> dict:
    p = cfg.params()
    region = classify_region(p)
    count = predict_fp_count(p, region)
    fps = find_fixed_points(p)
    return {
        "params": p.as_dict(),
        "region": region.tag,
        "boundary_with": list(region.boundary_with),
        "predicted_count": count.count,
        "branch": count.branch,
        "fixed_points": [fp.as_dict() for fp in fps],
    }


def cmd_ns(cfg: RunConfig) -> dict:
    p = cfg.params(need_theta=False)
    points = ns_critical(p, cfg.target)
    if not points:
        return {"params": {"r": p.r, "beta": p.beta, "gamma": p.gamma}, "status": "none found", "points": []}
    reports = []
    for pt in points:
        rep = normal_form(pt.u_bar, pt.theta0, p, cfg.variant, kind=pt.kind)
        d = report_summary(rep)
        d["cross_check"] = cross_check(rep)
        reports.append(d)
    return {"params": {"r": p.r, "beta": p.beta, "gamma": p.gamma}, "status": "found", "points": reports}


def cmd_orbit(cfg: RunConfig) -> str | dict:
    p = cfg.params()
    gains, target = _gains_and_target(cfg, p)
    o = iterate(cfg.init, cfg.n, p, gains, target, check_quadrant=target is None or target.in_quadrant)
    if cfg.format == "json":
        s = classify_attractor(o)
        return {"params": p.as_dict(), "escape_step": o.escape_step, "verdict": s.label,
                "tail_stats": s.tail_stats, "points": o.points}
    return csv_text(("step", "u", "v"), ((k, u, v) for k, (u, v) in enumerate(o.points)))


def _gains_and_target(cfg, p):
    if cfg.s1 == 0.0 and cfg.s2 == 0.0 and cfg.target is None:
        return None, None
    return Gains(cfg.s1, cfg.s2), resolve_target(p, cfg.target)


def cmd_sweep(cfg: RunConfig) -> str | dict:
    p = cfg.params(need_theta=False)
    rows = sweep_theta(p, (cfg.theta_lo, cfg.theta_hi), cfg.steps, cfg.init, cfg.n, cfg.burn_in, cfg.record)
    if cfg.format == "json":
        return {"rows": [{"theta": r.theta, "verdict": r.verdict, "u_tail": r.u_tail} for r in rows]}
    flat = []
    for row in rows:
        values = row.u_tail if len(row.u_tail) else [math.nan]
        flat.extend((row.theta, u, row.verdict) for u in values)
    return csv_text(("theta", "u_tail", "verdict"), flat)


def cmd_control(cfg: RunConfig) -> str | dict:
    p = cfg.params()
    target = resolve_target(p, cfg.target)
    tri = stability_triangle(target, p)
    if cfg.emit_triangle:
        if tri.degenerate:
            raise ArithmeticError("stability region is degenerate")
        return csv_text(("s1", "s2"), tri.polyline())
    g = Gains(cfg.s1, cfg.s2)
    return {"params": p.as_dict(), "target": dataclasses.asdict(target), "triangle": tri.as_dict(),
            "gains": dataclasses.asdict(g), "stabilizing": is_stabilizing(g, target, p)}


def cmd_invariance(cfg: RunConfig) -> dict:
    p = cfg.params()
    rep = invariant_set_check(p, cfg.which, cfg.samples, cfg.seed)
    out = {"params": p.as_dict(), "invariance": rep.as_dict(), "ok": rep.ok}
    if cfg.starts:
        descent_hypotheses(p)
        rng = np.random.default_rng(cfg.seed + 1)
        starts = sample_set(p.gamma, cfg.which, cfg.starts * 2, rng)
        starts = starts[starts[:, 0] > 0][: cfg.starts]
        results = [lyapunov_descent(iterate(tuple(s), cfg.n, p)) for s in starts]
        out["descent"] = {"starts": len(results), "passed": int(sum(results))}
        out["ok"] = out["ok"] and all(results)
    return out


def cmd_audit(cfg: RunConfig) -> dict:
    return run_audit(per_stratum=cfg.per_stratum, seed=cfg.seed).as_dict()


REPRO = {
    "example1_ns": ["ns", "--r", "0.5", "--beta", "2", "--gamma", "1"],
    "example2_ns": ["ns", "--r", "0.5", "--beta", "4", "--gamma", "1"],
    "example2_classify": ["classify", "--r", "0.5", "--beta", "4", "--gamma", "1", "--theta", "5"],
    "example3a_classify": ["classify", "--r", "0.5", "--beta", "3", "--gamma", "0.1", "--theta", "2"],
    "example3b_classify": ["classify", "--r", "0.5", "--beta", "2.1", "--gamma", "0.5", "--theta", "1.1"],
    "example1_sweep": ["sweep", "--r", "0.5", "--beta", "2", "--gamma", "1", "--theta-lo", "0.01",
                   "--theta-hi", "2", "--steps", "400"],
    "example1_attracting_orbit": ["orbit", "--r", "0.5", "--beta", "2", "--gamma", "1", "--theta", "0.36", "--init", "0.32,0.82"],
    "example1_threshold_orbit": ["orbit", "--r", "0.5", "--beta", "2", "--gamma", "1", "--theta", "0.3472", "--init", "0.32,0.82"],
    "example1_curve_orbit": ["orbit", "--r", "0.5", "--beta", "2", "--gamma", "1", "--theta", "0.32", "--init", "0.45,1"],
    "example1_far_curve_orbit": ["orbit", "--r", "0.5", "--beta", "2", "--gamma", "1", "--theta", "0.28", "--init", "0.34,0.85"],
    "example2_attracting_orbit": ["orbit", "--r", "0.5", "--beta", "4", "--gamma", "1", "--theta", "5.02", "--init", "0.3,0.9"],
    "example2_threshold_orbit": ["orbit", "--r", "0.5", "--beta", "4", "--gamma", "1", "--theta", "5", "--init", "0.3,0.9"],
    "example2_curve_orbit": ["orbit", "--r", "0.5", "--beta", "4", "--gamma", "1", "--theta", "4.9", "--init", "0.31,0.99"],
    "example2_escaping_curve_orbit": ["orbit", "--r", "0.5", "--beta", "4", "--gamma", "1", "--theta", "4.9", "--init", "0.33,1.1"],
    "example2_boundary_orbit_low": ["orbit", "--r", "0.5", "--beta", "4", "--gamma", "1", "--theta", "4.5", "--init", "0.2,0.95"],
    "example2_boundary_orbit_high": ["orbit", "--r", "0.5", "--beta", "4", "--gamma", "1", "--theta", "4.5", "--init", "0.45,0.87"],
    "control_triangle": ["control", "--r", "1", "--gamma", "1", "--beta", "3", "--theta", "1.2", "--emit-triangle"],
}


def branch_table(p: Params, lo: float, hi: float, steps: int) -> str:
    """Positive fixed points along a theta grid: theta,kind,u,v,stability."""
    rows = []
    for theta in np.linspace(lo, hi, steps):
        for fp in find_fixed_points(p.with_theta(float(theta)), check=False):
            if fp.is_positive:
                rows.append((theta, fp.kind, fp.u, fp.v, fp.stability.tag))
    return csv_text(("theta", "kind", "u", "v", "stability"), rows)


def cmd_repro(cfg: RunConfig, stdout) -> dict:
    outdir = Path(cfg.output if cfg.output not in ("-", "", None) else "repro_out")
    try:
        outdir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"cannot create {outdir}: {exc}") from exc
    status = {}
    for name, argv in REPRO.items():
        ext = "csv" if argv[0] in ("orbit", "sweep") or "--emit-triangle" in argv else "json"
        extra = ["--n", str(cfg.n)] if argv[0] == "orbit" else []
        code = main(argv + extra + ["--output", str(outdir / f"{name}.{ext}")], stdout=stdout)
        status[name] = code
    # fixed-point branch diagrams are tables of equilibria, not orbit data
    for name, p, lo, hi in (("example2_branches", Params(r=0.5, beta=4.0, theta=1.0, gamma=1.0), 2.5, 5.5),
                            ("example3_branches", Params(r=0.5, beta=3.0, theta=1.0, gamma=0.1), 1.6, 2.8)):
        (outdir / f"{name}.csv").write_text(branch_table(p, lo, hi, 601), encoding="utf-8", newline="\n")
        status[name] = EXIT_OK
    return {"output_dir": str(outdir), "exit_codes": status}


HANDLERS = {
    "classify": cmd_classify, "ns": cmd_ns, "orbit": cmd_orbit, "sweep": cmd_sweep,
    "control": cmd_control, "invariance": cmd_invariance, "audit": cmd_audit,
}


def main(argv=None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    try:
        cfg = resolve_config(sys.argv[1:] if argv is None else argv)
        if cfg.command == "repro":
            result = cmd_repro(cfg, stdout)
            stdout.write(dumps(result))
            return EXIT_OK if all(c == 0 for c in result["exit_codes"].values()) else EXIT_NUMERIC
        result = HANDLERS[cfg.command](cfg)
        _emit(cfg, result if isinstance(result, str) else dumps(result), stdout)
        return EXIT_OK
    except UsageError as exc:
        sys.stderr.write(f"planktonmap: error: {exc}\n")
        return EXIT_USAGE
    except (PreconditionError, LookupError) as exc:
        sys.stderr.write(f"planktonmap: precondition: {exc}\n")
        return EXIT_USAGE
    except (CountMismatchError, SingularTransformError, NotNSApplicable, ArithmeticError) as exc:
        sys.stderr.write(f"planktonmap: numerical failure: {exc}\n")
        return EXIT_NUMERIC
    except ValueError as exc:
        sys.stderr.write(f"planktonmap: error: {exc}\n")
        return EXIT_USAGE


__all__ = ["RunConfig", "build_parser", "main", "resolve_config", "REPRO"]
