"""Fixed points: existence regions, counting, location and stability type."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .model import (
    EPS_U,
    Params,
    curve_v,
    h_poly,
    h_prime,
    jacobian_general,
    jacobian_on_curve,
    map_step,
    pq,
    psi,
    psi_at_one,
)

SQRT2 = math.sqrt(2.0)
SQRT3 = math.sqrt(3.0)
SQRT7 = math.sqrt(7.0)

# gamma breakpoints of the (gamma, beta) partition
G_A = SQRT2 - 1.0  # ~0.4142
G_B = SQRT7 - 2.0  # ~0.6458
G_C = (3.0 + 6.0 * SQRT2) / 7.0  # ~1.3408
# beta/r threshold where h' acquires real roots
K_RATIO = (10.0 + 6.0 * SQRT2) / 7.0  # ~2.6408

TANGENT_TOL = 1e-9  # |theta - psi(u_hat)| below this is a double root
Q_BAND = 1e-9  # |q - 1| below this is non-hyperbolic
MODULUS_TOL = 1e-9  # band around |lambda| = 1
REGION_BAND = 1e-12  # relative band for region boundary equalities

MONOTONE_REGIONS = ("A0", "A1", "A2", "A5", "A6", "A7")
ONE_MAX_REGIONS = ("A3", "A4", "A8", "A9")
TWO_CRIT_REGIONS = ("A10", "A11")
ALL_REGIONS = tuple(f"A{i}" for i in range(12))
NO_POSITIVE = "NoPositiveFP"


class CountMismatchError(RuntimeError):
    """Predicted and located numbers of positive fixed points disagree."""

    def __init__(self, params, predicted, found, branch):
        self.params = params
        self.predicted = predicted
        self.found = found
        self.branch = branch
        super().__init__(
            f"predicted {predicted} positive fixed points ({branch}) but located "
            f"{len(found)} at u={[round(fp.u, 12) for fp in found]} for {params}"
        )


class ClassificationWarning(UserWarning):
    pass


@dataclass(frozen=True)
class RegionLabel:
    """Region of the (r, gamma, beta) space.

    ``tag`` follows the closed/open region inequalities exactly. ``boundary_with`` lists every region reachable by an
    arbitrarily small perturbation when the point sits on a boundary.
    """

    tag: str
    boundary_with: tuple[str, ...] = ()

    @property
    def on_boundary(self) -> bool:
        return len(self.boundary_with) > 1

    @property
    def critical_point_count(self) -> int | None:
        if self.tag in MONOTONE_REGIONS:
            return 0
        if self.tag in ONE_MAX_REGIONS:
            return 1
        if self.tag in TWO_CRIT_REGIONS:
            return 2
        return None

    def __str__(self):
        if self.on_boundary:
            return f"{self.tag} (boundary: {'/'.join(self.boundary_with)})"
        return self.tag


@dataclass(frozen=True)
class StabilityClass:
    tag: str  # Attracting | Repelling | Saddle | NonHyperbolic
    eigenvalues: tuple[complex, complex]
    certificates: dict = field(default_factory=dict)
    rule: str = ""
    agrees_with_moduli: bool = True

    def as_dict(self) -> dict:
        return {
            "tag": self.tag,
            "eigenvalues": [{"re": z.real, "im": z.imag} for z in self.eigenvalues],
            "moduli": [abs(z) for z in self.eigenvalues],
            "certificates": dict(self.certificates),
            "rule": self.rule,
            "agrees_with_moduli": self.agrees_with_moduli,
        }


@dataclass(frozen=True)
class FixedPoint:
    u: float
    v: float
    kind: str  # Origin | Boundary | E1 | E2 | E3
    residual: float = 0.0
    stability: StabilityClass | None = None
    borderline: bool = False

    @property
    def is_positive(self) -> bool:
        return self.kind in ("E1", "E2", "E3")

    def as_dict(self) -> dict:
        out = {"kind": self.kind, "u": self.u, "v": self.v, "residual": self.residual,
               "borderline": self.borderline}
        if self.stability is not None:
            out["stability"] = self.stability.as_dict()
        return out


@dataclass(frozen=True)
class FPCount:
    count: int
    branch: str


# ---------------------------------------------------------------- regions

def region_thresholds(r: float, gamma: float) -> dict:
    """beta thresholds that carve up the (gamma, beta) plane for fixed r."""
    g = gamma
    den4 = g * g + 4.0 * g - 3.0
    den2 = g * g + 2.0 * g - 1.0
    return {
        "exist": r * (1.0 + g),
        "disc": K_RATIO * r,
        "four_r": 4.0 * r,
        "u2_at_one": 4.0 * r * g * (1.0 + g) / den4 if den4 != 0 else math.inf,
        "h_one": 2.0 * r * g * (1.0 + g) ** 2 / den2 if den2 != 0 else math.inf,
    }


def _region_exact(r: float, g: float, b: float) -> str | None:
    t = region_thresholds(r, g)
    lo, K, F4, H1 = t["exist"], t["disc"], t["u2_at_one"], t["h_one"]
    if b <= lo:
        return NO_POSITIVE
    if b <= K:
        return "A0" if g < G_C else None
    # A1 degenerates to the single point beta = 4r at gamma = 1, which A5 also
    # contains; the worked example there is filed under A5, so A5 goes first
    if g <= 1.0 and lo < b <= 4.0 * r:
        return "A5"
    if 1.0 <= g <= SQRT3 and F4 <= b <= H1:
        return "A1"
    if g > SQRT3 and lo < b <= H1:
        return "A2"
    if G_B < g <= 1.0 and b >= F4:
        return "A3"
    if g > 1.0 and b > H1:
        return "A4"
    if 1.0 < g <= G_C and K < b < F4:
        return "A6"
    if G_C < g < SQRT3 and lo < b < F4:
        return "A7"
    if G_A < g <= G_B and b >= H1:
        return "A8"
    if G_B < g < 1.0 and H1 <= b < F4:
        return "A9"
    if g <= G_A and b > 4.0 * r:
        return "A10"
    if G_A < g < 1.0 and 4.0 * r < b < H1:
        return "A11"
    return None


def _near_boundary(r: float, g: float, b: float, band: float) -> bool:
    t = region_thresholds(r, g)
    for value in t.values():
        if math.isfinite(value) and abs(b - value) <= band * max(1.0, abs(value)):
            return True
    for gb in (G_A, G_B, G_C, 1.0, SQRT3):
        if abs(g - gb) <= band * max(1.0, gb):
            return True
    return False


def classify_region(p: Params, band: float = REGION_BAND) -> RegionLabel:
    """Region label for ``(r, gamma, beta)``; theta is ignored."""
    r, g, b = p.r, p.gamma, p.beta
    tag = _region_exact(r, g, b)
    neighbours: tuple[str, ...] = ()
    if _near_boundary(r, g, b, band):
        step = max(band * 1e3, 1e-9)
        seen = set()
        for db in (-step, 0.0, step):
            for dg in (-step, 0.0, step):
                label = _region_exact(r, g * (1.0 + dg), b * (1.0 + db))
                if label is not None:
                    seen.add(label)
        if tag is not None:
            seen.add(tag)
        neighbours = tuple(sorted(seen, key=_region_sort_key))
    if tag is None:
        return RegionLabel("BoundaryCase", neighbours)
    return RegionLabel(tag, neighbours)


def _region_sort_key(tag: str):
    if tag.startswith("A"):
        return (1, int(tag[1:]))
    return (0, 0)


# ---------------------------------------------------------------- counting

def critical_points_of_h(p: Params) -> list[float]:
    """Roots of h inside (0, 1), ascending. These are the extrema of psi."""
    b, r, g = p.beta, p.r, p.gamma
    # h is a cubic with h(0) > 0; split [0, 1] at the roots of h' to get monotone pieces
    disc = (4.0 * (r - b) * g) ** 2 - 12.0 * b * (4.0 * r - b) * g * g
    knots = [0.0]
    if disc > 0:
        sq = math.sqrt(disc)
        for x in sorted(((-4.0 * (r - b) * g - sq) / (6.0 * b), (-4.0 * (r - b) * g + sq) / (6.0 * b))):
            if 0.0 < x < 1.0:
                knots.append(x)
    knots.append(1.0)
    roots = []
    for a, c in zip(knots[:-1], knots[1:]):
        ha, hc = h_poly(a, p), h_poly(c, p)
        if ha == 0.0 and a > 0.0:
            roots.append(a)
        if ha * hc < 0:
            roots.append(brentq(h_poly, a, c, args=(p,), xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200))
    return sorted(set(roots))


def h_scale(p: Params) -> float:
    b, r, g = p.beta, p.r, p.gamma
    return b + abs(2.0 * (r - b) * g) + abs((4.0 * r - b) * g * g) + 2.0 * r * g**3


def predict_fp_count(p: Params, region: RegionLabel | None = None,
                     crit: list[float] | None = None) -> FPCount:
    """Number of positive fixed points according to the case analysis.

    Branch ids name the region and the bullet that fired, e.g. ``ii.10:b8``.
    When no bullet applies the count is read off the monotone pieces of psi
    and the branch is ``outside-theorem`` (or ``no-case`` for zero roots).
    """
    region = region or classify_region(p)
    if region.tag == NO_POSITIVE:
        return FPCount(0, "nonexistence")
    if crit is None:
        crit = critical_points_of_h(p)
    th = p.theta
    psi1 = psi_at_one(p)
    case = "i" if region.tag == "A0" else f"ii.{region.tag[1:]}" if region.tag.startswith("A") else region.tag
    expected = region.critical_point_count
    if expected is not None and expected != len(crit):
        return _fallback(p, crit, f"{case}:region-mismatch")

    def eq(x):
        return abs(th - x) <= TANGENT_TOL

    def between(lo, hi):
        return lo < th < hi and not eq(lo) and not eq(hi)

    if region.tag in MONOTONE_REGIONS:
        if between(0.0, psi1):
            return FPCount(1, f"{case}:unique")
    elif region.tag in ONE_MAX_REGIONS:
        m1 = float(psi(crit[0], p))
        if between(0.0, psi1) or eq(m1):
            return FPCount(1, f"{case}:unique")
        if between(psi1, m1):
            return FPCount(2, f"{case}:two")
    elif region.tag in TWO_CRIT_REGIONS:
        m1, m2 = float(psi(crit[0], p)), float(psi(crit[1], p))
        if between(0.0, m2):
            return FPCount(1, f"{case}:b1")
        if eq(m2):
            return FPCount(2, f"{case}:b2")
        if m1 < psi1 and between(m1, psi1):
            return FPCount(1, f"{case}:b3")
        if m1 < psi1 and eq(m1):
            return FPCount(2, f"{case}:b4")
        if m1 <= psi1 and between(m2, m1):
            return FPCount(3, f"{case}:b5")
        if m1 >= psi1 and eq(m1):
            return FPCount(1, f"{case}:b6")
        if m1 > psi1 and between(psi1, m1):
            return FPCount(2, f"{case}:b7")
        if m1 > psi1 and between(m2, psi1):
            return FPCount(3, f"{case}:b8")
    return _fallback(p, crit, f"{case}:outside-theorem")


def _fallback(p: Params, crit: list[float], branch: str) -> FPCount:
    n = len(_piece_roots(p, crit))
    if n == 0 and branch.endswith("outside-theorem"):
        branch = branch.replace("outside-theorem", "no-case")
    return FPCount(n, branch)


def _piece_roots(p: Params, crit: list[float]) -> list[tuple[float, bool]]:
    """Roots of psi(u) = theta on (0, 1) as ``(u, is_tangent)`` pairs."""
    th = p.theta
    knots = [EPS_U] + list(crit) + [1.0]
    values = [float(psi(k, p)) - th for k in knots]
    tangent = [False] + [abs(vk) <= TANGENT_TOL for vk in values[1:-1]] + [False]
    for i, t in enumerate(tangent):
        if t:
            values[i] = 0.0
    roots: list[tuple[float, bool]] = []
    tol = 1e-10 * max(1.0, th)
    for i in range(len(knots) - 1):
        fa, fb = values[i], values[i + 1]
        if fa * fb < 0:
            u = brentq(lambda x: float(psi(x, p)) - th, knots[i], knots[i + 1],
                       xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=300)
            if abs(float(psi(u, p)) - th) > tol:
                u = _polish(p, u, knots[i], knots[i + 1])
            roots.append((u, False))
        if i + 1 < len(knots) - 1 and tangent[i + 1]:
            roots.append((knots[i + 1], True))
    return sorted(roots)


def _polish(p: Params, u: float, lo: float, hi: float) -> float:
    # bisection in extended steps when brentq stops on the tolerance in u first
    th = p.theta
    f_lo = float(psi(lo, p)) - th
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        fm = float(psi(mid, p)) - th
        if (fm < 0) == (f_lo < 0):
            lo, f_lo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------- stability

def classify_moduli(eigenvalues, tol: float = MODULUS_TOL) -> str:
    m = sorted(abs(z) for z in eigenvalues)
    if any(abs(x - 1.0) <= tol for x in m):
        return "NonHyperbolic"
    if m[1] < 1.0:
        return "Attracting"
    if m[0] > 1.0:
        return "Repelling"
    return "Saddle"


def classify_boundary(p: Params) -> tuple[StabilityClass, StabilityClass]:
    """Types of (0, 0) and (1, 0)."""
    lam0 = (complex(2.0), complex(1.0 - p.r))
    if abs(abs(1.0 - p.r) - 1.0) <= MODULUS_TOL:
        tag0 = "NonHyperbolic"
    elif p.r > 2.0:
        tag0 = "Repelling"
    else:
        tag0 = "Saddle"
    origin = StabilityClass(tag0, lam0, {"lambda2": 1.0 - p.r}, rule="origin: r vs 2",
                            agrees_with_moduli=classify_moduli(lam0) == tag0)

    g = p.gamma
    tox = p.theta / (1.0 + g * g)
    lower = (p.r - 2.0 + tox) * (1.0 + g)
    upper = (p.r + tox) * (1.0 + g)
    lam2 = p.beta / (1.0 + g) - tox + 1.0 - p.r
    lam1 = (complex(lam2), complex(0.0))
    if abs(abs(lam2) - 1.0) <= MODULUS_TOL:
        tag1 = "NonHyperbolic"
    elif lower < p.beta < upper:
        tag1 = "Attracting"
    else:
        tag1 = "Saddle"
    boundary = StabilityClass(tag1, lam1, {"beta_lower": lower, "beta_upper": upper, "lambda2": lam2},
                              rule="(1,0): beta window", agrees_with_moduli=classify_moduli(lam1) == tag1)
    return origin, boundary


def classify_positive(fp: FixedPoint, p: Params) -> StabilityClass:
    """Type of a positive fixed point from the sign certificates F(1,u), F(-1,u), q(u)."""
    if not fp.is_positive:
        raise ValueError(f"classify_positive needs E1/E2/E3, got {fp.kind}")
    u = fp.u
    tr, q = pq(u, p)
    f_plus = 1.0 - tr + q
    f_minus = 1.0 + tr + q
    eig = jacobian_on_curve(u, p).eigenvalues()
    certs = {"q": q, "F(1,u)": f_plus, "F(-1,u)": f_minus, "p": tr}
    if fp.borderline:
        tag, rule = "NonHyperbolic", "tangent root: F(1,u)=0"
    elif fp.kind == "E2":
        rule = "E2: sign of F(-1,u)"
        if abs(f_minus) <= Q_BAND:
            tag = "NonHyperbolic"
        else:
            tag = "Saddle" if f_minus > 0 else "Repelling"
    else:
        rule = f"{fp.kind}: q vs 1"
        if abs(q - 1.0) <= Q_BAND:
            tag = "NonHyperbolic"
        else:
            tag = "Attracting" if q < 1.0 else "Repelling"
    by_moduli = classify_moduli(eig)
    agrees = by_moduli == tag
    if not agrees and not _close_to_unit(eig):
        warnings.warn(
            f"{fp.kind} at u={u:.12g}: certificate says {tag}, eigenvalue moduli say {by_moduli}",
            ClassificationWarning,
            stacklevel=2,
        )
    return StabilityClass(tag, eig, certs, rule=rule, agrees_with_moduli=agrees)


def _close_to_unit(eig, band: float = 1e-6) -> bool:
    return any(abs(abs(z) - 1.0) <= band for z in eig)


# ---------------------------------------------------------------- location

def find_fixed_points(p: Params, check: bool = True, classify: bool = True) -> list[FixedPoint]:
    """All nonnegative fixed points: origin, (1, 0), then E1 < E2 < E3.

    With ``check`` the number of positive roots is compared against
    :func:`predict_fp_count` and a :class:`CountMismatchError` is raised on
    disagreement.
    """
    origin_cls, boundary_cls = classify_boundary(p) if classify else (None, None)
    out = [
        FixedPoint(0.0, 0.0, "Origin", 0.0, origin_cls),
        FixedPoint(1.0, 0.0, "Boundary", 0.0, boundary_cls),
    ]
    region = classify_region(p)
    if region.tag == NO_POSITIVE:
        return out
    crit = critical_points_of_h(p)
    positives = []
    for idx, (u, tangent) in enumerate(_piece_roots(p, crit)):
        v = float(curve_v(u, p))
        uu, vv = map_step((u, v), p)
        fp = FixedPoint(u, v, f"E{idx + 1}", max(abs(uu - u), abs(vv - v)), None, tangent)
        positives.append(fp)
    if check:
        pred = predict_fp_count(p, region, crit)
        if pred.count != len(positives):
            raise CountMismatchError(p, pred.count, positives, pred.branch)
    if classify:
        positives = [
            FixedPoint(fp.u, fp.v, fp.kind, fp.residual, classify_positive(fp, p), fp.borderline)
            for fp in positives
        ]
    return out + positives


def positive_fixed_points(p: Params, **kw) -> list[FixedPoint]:
    return [fp for fp in find_fixed_points(p, **kw) if fp.is_positive]


def boundary_eigen_check(p: Params) -> bool:
    """Whether the boundary classification matches moduli of the full Jacobian."""
    origin, boundary = classify_boundary(p)
    ok = True
    for cls, point in ((origin, (0.0, 0.0)), (boundary, (1.0, 0.0))):
        eig = jacobian_general(point, p).eigenvalues()
        ok &= classify_moduli(eig) == cls.tag
    return ok
