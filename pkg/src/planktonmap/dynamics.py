"""Orbits, attractor verdicts, theta sweeps and the global-stability checks.

Attractor classification works from a handful of tail statistics (distances
to each known fixed point, angular sweep around it, tail extent). The same
statistics are accumulated by :func:`iterate` for single orbits and by
:func:`sweep_theta` for a whole grid at once, so the two paths always agree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .control import Gains, controlled_step
from .equilibria import find_fixed_points
from .model import Params, State, map_step

ESCAPE_BOX = 1e6
FP_TOL = 1e-8
CURVE_MIN = 1e-4
CURVE_MAX = 1.0
MIN_SWEEP = 4.0 * math.pi
TAIL_FRACTION = 0.25
FINAL_FRACTION = 0.01
MONOTONE_SLACK = 1e-12
SET_TOL = 1e-12


@dataclass(frozen=True)
class Orbit:
    """``points[0]`` is the initial state; at most ``n + 1`` rows."""

    initial: State
    params: Params
    points: np.ndarray
    gains: Gains | None = None
    escape_step: int | None = None
    target: tuple[float, float] | None = None

    @property
    def n(self) -> int:
        return len(self.points) - 1


@dataclass(frozen=True)
class AttractorSummary:
    verdict: str  # FixedPoint | InvariantCurve | BoundaryFP | Escaped | Undetermined
    which: str | None
    tail_stats: dict
    radius_series: np.ndarray = field(repr=False, default_factory=lambda: np.empty(0))

    @property
    def label(self) -> str:
        if self.verdict == "FixedPoint":
            return f"FixedPoint({self.which})"
        if self.verdict == "BoundaryFP":
            return "BoundaryFP(1,0)"
        return self.verdict


def _escaped(u, v, quadrant=True):
    bad = ~(np.isfinite(u) & np.isfinite(v)) | (np.abs(u) > ESCAPE_BOX) | (np.abs(v) > ESCAPE_BOX)
    if quadrant:
        bad |= (u < 0) | (v < 0)
    return bad


def iterate(initial, n: int, p: Params, g: Gains | None = None, target=None,
            check_quadrant: bool = True) -> Orbit:
    """Iterate ``n`` steps, stopping early when the orbit escapes.

    With gains the feedback acts around ``target`` (any object with ``u``
    and ``v``); ``check_quadrant=False`` allows orbits around equilibria with
    negative coordinates.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    s0 = initial if isinstance(initial, State) else State(*initial)
    pts = np.empty((n + 1, 2))
    pts[0] = (s0.u, s0.v)
    u, v = s0.u, s0.v
    escape = None
    for k in range(1, n + 1):
        if g is None:
            u, v = map_step((u, v), p)
        else:
            u, v = controlled_step((u, v), g, target, p)
        pts[k] = (u, v)
        if _escaped(np.float64(u), np.float64(v), check_quadrant):
            escape = k
            pts = pts[: k + 1]
            break
    tgt = None if target is None else (float(target.u), float(target.v))
    return Orbit(s0, p, pts, g, escape, tgt)


def _angle_sweep(du, dv) -> np.ndarray:
    ang = np.unwrap(np.arctan2(dv, du), axis=0)
    return np.abs(ang[-1] - ang[0])


def tail_statistics(points: np.ndarray, fps: list[tuple[float, float]]) -> dict:
    """Distances and rotation of the tail relative to each candidate point."""
    m = len(points)
    tail = points[int(m * (1 - TAIL_FRACTION)):]
    final = points[-max(10, int(m * FINAL_FRACTION)):]
    stats = {
        "u_min": float(tail[:, 0].min()), "u_max": float(tail[:, 0].max()), "u_mean": float(tail[:, 0].mean()),
        "v_min": float(tail[:, 1].min()), "v_max": float(tail[:, 1].max()), "v_mean": float(tail[:, 1].mean()),
        "targets": [],
    }
    for fu, fv in fps:
        d_tail = np.hypot(tail[:, 0] - fu, tail[:, 1] - fv)
        d_final = np.hypot(final[:, 0] - fu, final[:, 1] - fv)
        stats["targets"].append({
            "d_min": float(d_tail.min()), "d_max": float(d_tail.max()),
            "final_max": float(d_final.max()),
            "sweep": float(_angle_sweep(tail[:, 0] - fu, tail[:, 1] - fv)),
        })
    return stats


def _verdict(stats: dict, fps: list) -> tuple[str, str | None, int | None]:
    for j, fp in enumerate(fps):
        if stats["targets"][j]["final_max"] < FP_TOL:
            if fp.kind == "Boundary":
                return "BoundaryFP", "(1,0)", j
            return "FixedPoint", fp.kind, j
    positive = [j for j, fp in enumerate(fps) if fp.is_positive]
    if not positive:
        return "Undetermined", None, None
    cu, cv = stats["u_mean"], stats["v_mean"]
    j = min(positive, key=lambda k: math.hypot(fps[k].u - cu, fps[k].v - cv))
    t = stats["targets"][j]
    if t["d_min"] >= CURVE_MIN and t["d_max"] <= CURVE_MAX and t["sweep"] > MIN_SWEEP:
        return "InvariantCurve", fps[j].kind, j
    return "Undetermined", None, j


def classify_attractor(o: Orbit, known_fps: list | None = None) -> AttractorSummary:
    """Verdict for an orbit.

    FixedPoint needs the last 1% of the orbit within 1e-8 of a known point;
    InvariantCurve needs the last 25% to stay in ``[1e-4, 1]`` of the nearest
    positive point while winding around it more than twice.
    """
    fps = known_fps if known_fps is not None else find_fixed_points(o.params, check=False, classify=False)
    if o.escape_step is not None:
        return AttractorSummary("Escaped", None, {"escape_step": o.escape_step})
    if o.n < 4:
        return AttractorSummary("Undetermined", None, {})
    stats = tail_statistics(o.points, [(fp.u, fp.v) for fp in fps])
    verdict, which, j = _verdict(stats, fps)
    radius = np.empty(0)
    if j is not None:
        tail = o.points[int(len(o.points) * (1 - TAIL_FRACTION)):]
        radius = np.hypot(tail[:, 0] - fps[j].u, tail[:, 1] - fps[j].v)
    return AttractorSummary(verdict, which, stats, radius)


@dataclass(frozen=True)
class SweepRow:
    theta: float
    u_tail: np.ndarray
    verdict: str
    summary: AttractorSummary


def sweep_theta(p: Params, theta_range: tuple[float, float], steps: int, initial,
                n: int = 10_000, burn_in: float = 0.5, record: int = 200,
                chunk: int = 4096) -> list[SweepRow]:
    """Iterate every theta on an even grid in lockstep.

    Each row keeps the last ``record`` post-burn-in values of ``u`` and the
    attractor verdict from the same tail statistics as
    :func:`classify_attractor`. Memory stays at ``O(steps * chunk)``.
    """
    lo, hi = theta_range
    if not (lo > 0 and hi >= lo):
        raise ValueError("need 0 < theta_lo <= theta_hi")
    if steps < 2:
        raise ValueError("steps must be at least 2")
    if not 0.0 <= burn_in < 1.0:
        raise ValueError("burn_in must be in [0, 1)")
    thetas = np.linspace(lo, hi, steps)
    fps = [find_fixed_points(p.with_theta(t), check=False, classify=False) for t in thetas]
    width = max(len(f) for f in fps)
    fu = np.full((steps, width), np.nan)
    fv = np.full((steps, width), np.nan)
    for i, f in enumerate(fps):
        fu[i, : len(f)] = [x.u for x in f]
        fv[i, : len(f)] = [x.v for x in f]

    s0 = initial if isinstance(initial, State) else State(*initial)
    u = np.full(steps, s0.u)
    v = np.full(steps, s0.v)
    g, r, beta = p.gamma, p.r, p.beta

    tail_start = int((n + 1) * (1 - TAIL_FRACTION))
    final_start = n + 1 - max(10, int((n + 1) * FINAL_FRACTION))
    rec_start = max(int(n * burn_in), n + 1 - record)

    alive = np.ones(steps, bool)
    escape = np.full(steps, -1)
    d_min = np.full((steps, width), np.inf)
    d_max = np.zeros((steps, width))
    f_max = np.zeros((steps, width))
    ang_prev = None
    ang_total = np.zeros((steps, width))
    sums = {k: np.zeros(steps) for k in ("u_sum", "v_sum")}
    ext = {"u_min": np.full(steps, np.inf), "u_max": np.full(steps, -np.inf),
           "v_min": np.full(steps, np.inf), "v_max": np.full(steps, -np.inf)}
    recorded = []

    def absorb(block_u, block_v, k0):
        nonlocal ang_prev
        ks = np.arange(k0, k0 + len(block_u))
        in_tail = ks >= tail_start
        if in_tail.any():
            bu, bv = block_u[in_tail], block_v[in_tail]
            for key, arr, fn in (("u_min", bu, np.min), ("v_min", bv, np.min)):
                ext[key] = np.minimum(ext[key], fn(arr, axis=0))
            for key, arr, fn in (("u_max", bu, np.max), ("v_max", bv, np.max)):
                ext[key] = np.maximum(ext[key], fn(arr, axis=0))
            sums["u_sum"] += bu.sum(axis=0)
            sums["v_sum"] += bv.sum(axis=0)
            du = bu[:, :, None] - fu[None]
            dv = bv[:, :, None] - fv[None]
            dist = np.hypot(du, dv)
            d_min[:] = np.fmin(d_min, dist.min(axis=0))
            d_max[:] = np.fmax(d_max, dist.max(axis=0))
            ang = np.arctan2(dv, du)
            if ang_prev is not None:
                ang = np.concatenate([ang_prev[None], ang])
            step = np.diff(ang, axis=0)
            step = (step + np.pi) % (2 * np.pi) - np.pi
            ang_total[:] += step.sum(axis=0)
            ang_prev = ang[-1]
            in_final = ks[in_tail] >= final_start
            if in_final.any():
                f_max[:] = np.fmax(f_max, dist[in_final].max(axis=0))
        keep = ks >= rec_start
        if keep.any():
            recorded.append(block_u[keep])

    k = 0
    with np.errstate(all="ignore"):
        buf_u = [u.copy()]
        buf_v = [v.copy()]
        while True:
            if len(buf_u) == chunk or k == n:
                absorb(np.array(buf_u), np.array(buf_v), k - len(buf_u) + 1)
                buf_u, buf_v = [], []
                if k == n:
                    break
            graze = u / (g + u)
            toxin = u * u / (g * g + u * u)
            u_next = u * (2.0 - u) - graze * v
            v_next = v * (beta * graze + (1.0 - r) - thetas * toxin)
            k += 1
            out = alive & _escaped(u_next, v_next)
            escape[out] = k
            alive &= ~out
            u = np.where(alive, u_next, u)
            v = np.where(alive, v_next, v)
            buf_u.append(u.copy())
            buf_v.append(v.copy())

    rec = np.concatenate(recorded) if recorded else np.empty((0, steps))
    count = n + 1 - tail_start
    rows = []
    for i, theta in enumerate(thetas):
        if escape[i] >= 0:
            summary = AttractorSummary("Escaped", None, {"escape_step": int(escape[i])})
            rows.append(SweepRow(float(theta), np.empty(0), summary.label, summary))
            continue
        m = len(fps[i])
        stats = {
            "u_min": float(ext["u_min"][i]), "u_max": float(ext["u_max"][i]),
            "u_mean": float(sums["u_sum"][i] / count),
            "v_min": float(ext["v_min"][i]), "v_max": float(ext["v_max"][i]),
            "v_mean": float(sums["v_sum"][i] / count),
            "targets": [{"d_min": float(d_min[i, j]), "d_max": float(d_max[i, j]),
                         "final_max": float(f_max[i, j]), "sweep": float(abs(ang_total[i, j]))}
                        for j in range(m)],
        }
        verdict, which, _ = _verdict(stats, fps[i])
        summary = AttractorSummary(verdict, which, stats)
        rows.append(SweepRow(float(theta), rec[:, i].copy(), summary.label, summary))
    return rows


def transition_theta(rows: list[SweepRow], before: str = "InvariantCurve", after: str = "FixedPoint") -> float | None:
    """Midpoint between the last ``before`` verdict and the first ``after`` verdict that follows it."""
    last = None
    for i, row in enumerate(rows):
        if row.summary.verdict == before:
            last = i
        elif row.summary.verdict == after and last is not None:
            return 0.5 * (rows[last].theta + row.theta)
    return None


# Global stability -----------------------------------------------------------


class PreconditionError(ValueError):
    """Parameters fall outside the hypotheses of the check."""


@dataclass(frozen=True)
class InvarianceReport:
    which: str
    samples: int
    seed: int
    violations: list

    @property
    def ok(self) -> bool:
        return not self.violations

    def as_dict(self) -> dict:
        return {"which": self.which, "samples": self.samples, "seed": self.seed,
                "violations": [list(map(float, x)) for x in self.violations]}


def _f_upper(u, g):
    return (2.0 - u) * (g + u)


def set_hypotheses(p: Params, which: str) -> None:
    if not (p.theta < p.beta <= p.r * (1.0 + p.gamma)):
        raise PreconditionError("need theta < beta <= r (1 + gamma)")
    if not (0.0 < p.r <= 1.0):
        raise PreconditionError("need 0 < r <= 1")
    if which == "M1" and not p.gamma >= 2.0:
        raise PreconditionError("M1 needs gamma >= 2")
    if which == "M2" and not (1.0 <= p.gamma < 2.0):
        raise PreconditionError("M2 needs 1 <= gamma < 2")
    if which not in ("M1", "M2"):
        raise ValueError(f"unknown set {which!r}")


def in_set(u, v, gamma: float, which: str, tol: float = SET_TOL):
    u = np.asarray(u, float)
    v = np.asarray(v, float)
    base = (u >= -tol) & (u <= 1.0 + tol) & (v >= -tol)
    under = v <= _f_upper(np.clip(u, 0.0, 1.0), gamma) + tol
    if which == "M1":
        return base & under
    rect = (u <= 2.0 - gamma + tol) & (v <= 2.0 * gamma + tol)
    right = (u > 2.0 - gamma - tol) & under
    return base & (rect | right)


def sample_set(gamma: float, which: str, count: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform samples from M1 or M2 by rejection from the bounding box."""
    us = np.linspace(0.0, 1.0, 2001)
    top = max(float(_f_upper(us, gamma).max()), 2.0 * gamma)
    out = []
    have = 0
    while have < count:
        batch = rng.uniform((0.0, 0.0), (1.0, top), size=(2 * count, 2))
        batch = batch[in_set(batch[:, 0], batch[:, 1], gamma, which, tol=0.0)]
        out.append(batch)
        have += len(batch)
    return np.concatenate(out)[:count]


def invariant_set_check(p: Params, which: str, samples: int = 10_000, seed: int = 0) -> InvarianceReport:
    """Sample the set, apply the map once and list images that leave it."""
    set_hypotheses(p, which)
    rng = np.random.default_rng(seed)
    pts = sample_set(p.gamma, which, samples, rng)
    g = p.gamma
    corners = [(0.0, 0.0), (1.0, 0.0), (0.0, _f_upper(0.0, g)), (1.0, _f_upper(1.0, g))]
    if which == "M2":
        corners += [(2.0 - g, 2.0 * g), (2.0 - g, 0.0)]
    pts = np.vstack([np.array(corners), pts])
    u1, v1 = map_step((pts[:, 0], pts[:, 1]), p)
    bad = ~in_set(u1, v1, g, which)
    return InvarianceReport(which, len(pts), seed, [tuple(x) for x in pts[bad]])


def lyapunov_descent(o: Orbit, tol: float = 1e-6) -> bool:
    """``v`` never increases along the orbit and the orbit ends near ``(1, 0)``."""
    if o.initial.u <= 0:
        raise PreconditionError("the descent argument needs u0 > 0")
    if o.escape_step is not None:
        return False
    v = o.points[:, 1]
    monotone = bool(np.all(np.diff(v) <= MONOTONE_SLACK))
    end = o.points[-1]
    return monotone and math.hypot(end[0] - 1.0, end[1]) < tol


def descent_hypotheses(p: Params) -> None:
    if not (p.theta <= p.beta <= p.r * (1.0 + p.gamma)):
        raise PreconditionError("need theta <= beta <= r (1 + gamma)")
    if not (0.0 < p.r <= 1.0 and p.gamma >= 1.0):
        raise PreconditionError("need 0 < r <= 1 and gamma >= 1")
