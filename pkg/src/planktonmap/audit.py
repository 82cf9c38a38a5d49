"""Randomized audits of the fixed-point count prediction and of the E2 saddle claim.

Parameters are drawn per stratum (the twelve regions plus the
nonexistence zone) so that thin regions are represented. Each prediction is
compared with an independent sign-change count of ``psi(u) - theta`` on a
dense uniform grid.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from . import equilibria as eq
from .model import Params, pq, psi, psi_at_one

STRATA = (eq.NO_POSITIVE,) + eq.ALL_REGIONS
GRID_POINTS = 100_000
BORDER = 1e-6

# gamma windows that contain each region (tighter windows make rejection cheap)
_GAMMA_WINDOW = {
    eq.NO_POSITIVE: (0.01, 5.0),
    "A0": (0.01, eq.G_C),
    "A1": (1.0, math.sqrt(3.0)),
    "A2": (math.sqrt(3.0), 5.0),
    "A3": (eq.G_B, 1.0),
    "A4": (1.0, 5.0),
    "A5": (0.01, 1.0),
    "A6": (1.0, eq.G_C),
    "A7": (eq.G_C, math.sqrt(3.0)),
    "A8": (eq.G_A, eq.G_B),
    "A9": (eq.G_B, 1.0),
    "A10": (0.01, eq.G_A),
    "A11": (eq.G_A, 1.0),
}


@dataclass(frozen=True)
class AuditCase:
    params: Params
    stratum: str
    predicted: int
    branch: str
    grid_count: int
    borderline: bool
    e2_f_minus_one: float | None = None

    @property
    def agrees(self) -> bool:
        return self.predicted == self.grid_count


@dataclass
class AuditReport:
    cases: list[AuditCase]
    seed: int
    strata: Counter = field(default_factory=Counter)

    @property
    def scored(self) -> list[AuditCase]:
        return [c for c in self.cases if not c.borderline]

    @property
    def mismatches(self) -> list[AuditCase]:
        return [c for c in self.scored if not c.agrees]

    @property
    def agreement(self) -> float:
        scored = self.scored
        return 1.0 if not scored else sum(c.agrees for c in scored) / len(scored)

    @property
    def conjecture_counterexamples(self) -> list[AuditCase]:
        return [c for c in self.cases if c.e2_f_minus_one is not None and not c.e2_f_minus_one > 0]

    def as_dict(self) -> dict:
        def case_dict(c: AuditCase):
            return {"params": c.params.as_dict(), "stratum": c.stratum, "predicted": c.predicted,
                    "branch": c.branch, "grid_count": c.grid_count, "borderline": c.borderline,
                    "e2_f_minus_one": c.e2_f_minus_one}

        e2 = [c for c in self.cases if c.e2_f_minus_one is not None]
        return {
            "seed": self.seed,
            "samples": len(self.cases),
            "scored": len(self.scored),
            "agreement": self.agreement,
            "strata": dict(self.strata),
            "mismatches": [case_dict(c) for c in self.mismatches],
            "conjecture": {
                "e2_found": len(e2),
                "min_f_minus_one": min((c.e2_f_minus_one for c in e2), default=None),
                "counterexamples": [case_dict(c) for c in self.conjecture_counterexamples],
            },
        }


def grid_root_count(p: Params, points: int = GRID_POINTS) -> int:
    """Sign changes of ``psi(u) - theta`` on a uniform grid over ``(0, 1]``."""
    u = np.linspace(0.0, 1.0, points + 1)[1:]
    f = psi(u, p) - p.theta
    s = np.sign(f)
    return int(np.count_nonzero(s[:-1] * s[1:] < 0) + np.count_nonzero(s[:-1] == 0))


def _distance_to_boundaries(p: Params) -> float:
    t = eq.region_thresholds(p.r, p.gamma)
    d = [abs(p.beta - v) / max(1.0, abs(v)) for v in t.values() if math.isfinite(v)]
    d += [abs(p.gamma - gb) / max(1.0, gb) for gb in (eq.G_A, eq.G_B, eq.G_C, 1.0, math.sqrt(3.0))]
    return min(d)


def is_borderline(p: Params, crit: list[float], band: float = BORDER) -> bool:
    """Near a tangency of ``psi = theta``, near ``psi(1)`` or near a region boundary."""
    levels = [float(psi(c, p)) for c in crit] + [psi_at_one(p)]
    if any(abs(p.theta - x) <= band for x in levels):
        return True
    return _distance_to_boundaries(p) <= band


def _draw(stratum: str, rng: np.random.Generator, max_tries: int = 100_000) -> Params:
    glo, ghi = _GAMMA_WINDOW[stratum]
    for _ in range(max_tries):
        r = rng.uniform(0.05, 2.0)
        g = math.exp(rng.uniform(math.log(glo), math.log(ghi)))
        lo = r * (1.0 + g)
        if stratum == eq.NO_POSITIVE:
            b = lo * rng.uniform(0.05, 1.0)
        else:
            b = lo * math.exp(rng.uniform(0.0, math.log(12.0)))
        if eq._region_exact(r, g, b) == stratum:
            return Params(r=r, beta=b, theta=1.0, gamma=g)
    raise RuntimeError(f"could not draw a sample in {stratum}")


def _draw_theta(p: Params, crit: list[float], rng: np.random.Generator) -> float:
    levels = [float(psi(c, p)) for c in crit] + [psi_at_one(p)]
    top = max([x for x in levels if x > 0] + [1.0])
    if crit and rng.random() < 0.5:
        # aim between the critical levels so multi-root branches get exercised
        lo, hi = min(levels), max(levels)
        lo = max(lo, 1e-3)
        if hi > lo:
            return float(rng.uniform(lo, hi))
    return float(rng.uniform(1e-3, 1.3 * top))


def e2_certificate(p: Params) -> float | None:
    """``F(-1, u2) = 1 + p + q`` at E2, or None when E2 does not exist."""
    for fp in eq.positive_fixed_points(p, check=False, classify=False):
        if fp.kind == "E2":
            tr, det = pq(fp.u, p)
            return float(1.0 + tr + det)
    return None


def run_audit(per_stratum: int = 80, seed: int = 20240101, strata=STRATA,
              grid_points: int = GRID_POINTS) -> AuditReport:
    rng = np.random.default_rng(seed)
    cases = []
    counts: Counter = Counter()
    for stratum in strata:
        for _ in range(per_stratum):
            base = _draw(stratum, rng)
            crit = eq.critical_points_of_h(base) if stratum != eq.NO_POSITIVE else []
            p = base.with_theta(_draw_theta(base, crit, rng))
            region = eq.classify_region(p)
            pred = eq.predict_fp_count(p, region, crit if stratum != eq.NO_POSITIVE else None)
            cases.append(AuditCase(
                params=p, stratum=stratum, predicted=pred.count, branch=pred.branch,
                grid_count=grid_root_count(p, grid_points),
                borderline=is_borderline(p, crit),
                e2_f_minus_one=e2_certificate(p) if pred.count >= 2 else None,
            ))
            counts[stratum] += 1
    return AuditReport(cases, seed, counts)
