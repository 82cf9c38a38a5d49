"""Neimark-Sacker threshold and the normal-form cascade at a positive fixed point.

The pipeline for a critical pair ``(theta0, u_bar)``:

1. Taylor coefficients ``a_ij, b_ij`` of the map shifted to the fixed point.
2. Change of basis ``T = [[m n, -n], [0, 1]]`` that turns the Jacobian into
   a rotation.
3. Quadratic/cubic coefficients ``c_ij, d_ij`` of ``T^-1 H(T X)``.
4. Complex coefficients ``L20, L11, L02, L21`` and the real discriminating
   quantity ``L``; ``L < 0`` means an attracting closed curve is born on the
   side ``theta < theta0``.

Two variants exist. ``"printed"`` uses the closed forms as they are usually
quoted for this model and reproduces the published worked values.
``"exact"`` repairs three slips in those forms: the power of
``gamma^2 + u^2`` in ``b20``, a missing factor 2 on the ``XY`` terms of
``H(T X)``, and the eigenvalue that multiplies ``L11 L20`` and ``L21``. In
the rotation coordinates ``X + iY`` the linear part multiplies by the
eigenvalue with positive imaginary part, so that is the one the formula
needs. With all three repairs ``L`` equals the coordinate-free first
Lyapunov coefficient times ``|q_T|^2`` (see :func:`eigen_scale`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.optimize import brentq

from .equilibria import critical_points_of_h
from .model import Matrix2, Params, curve_v, jacobian_on_curve, pq, psi

VARIANTS = ("printed", "exact")
DEGENERATE_L = 1e-8
SINGULAR_M = 1e-10


class NotNSApplicable(ValueError):
    """Eigenvalues at the point are real, so no Neimark-Sacker analysis applies."""


class SingularTransformError(ArithmeticError):
    """``2 u + gamma - 1`` vanishes and the scaling ``m`` is undefined."""


class NSPoint(NamedTuple):
    theta0: float
    u_bar: float
    kind: str


def _q_on_branch(u, p: Params):
    return pq(u, p.with_theta(float(psi(u, p))))[1] - 1.0


def ns_critical(p: Params, which_fp: str | None = None, grid: int = 4001) -> list[NSPoint]:
    """Solve ``theta = psi(u)``, ``q(u) = 1`` with a complex eigenvalue pair.

    theta in ``p`` is ignored. ``which_fp`` restricts the answer to ``"E1"``
    or ``"E3"``; the kind of each solution is read off its position relative
    to the extrema of psi.
    """
    r, b, g = p.r, p.beta, p.gamma
    if b <= r * (1.0 + g):
        return []
    # psi > 0 exactly when u > r gamma / (beta - r)
    u_lo = r * g / (b - r)
    lo = u_lo + 1e-12 * max(1.0, u_lo)
    hi = 1.0 - 1e-12
    us = np.linspace(lo, hi, grid)
    vals = np.array([_q_on_branch(u, p) for u in us])
    found = []
    for i in range(grid - 1):
        if vals[i] == 0.0:
            found.append(us[i])
        elif vals[i] * vals[i + 1] < 0:
            found.append(brentq(_q_on_branch, us[i], us[i + 1], args=(p,),
                                xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=300))
    crit = critical_points_of_h(p)
    out = []
    for u in found:
        theta0 = float(psi(u, p))
        if theta0 <= 0:
            continue
        tr, _ = pq(u, p.with_theta(theta0))
        if not (tr < 2.0):
            continue
        kind = _kind_from_position(u, crit)
        if kind not in ("E1", "E3"):
            continue
        if which_fp is not None and kind != which_fp:
            continue
        out.append(NSPoint(theta0, float(u), kind))
    return out


def _kind_from_position(u: float, crit: list[float]) -> str:
    if not crit or u < crit[0]:
        return "E1"
    if len(crit) == 1 or u < crit[1]:
        return "E2"
    return "E3"


def eigen_at(u: float, p: Params) -> tuple[complex, complex]:
    """Complex pair ``p/2 -+ i sqrt(4q - p^2)/2`` at ``u`` for the given theta."""
    tr, q = pq(u, p)
    disc = 4.0 * q - tr * tr
    if disc <= 0:
        raise NotNSApplicable(f"real eigenvalues at u={u} (4q - p^2 = {disc:.3e})")
    half = 0.5 * math.sqrt(disc)
    return complex(0.5 * tr, -half), complex(0.5 * tr, half)


def transversality(u_bar: float, p: Params) -> float:
    """d|lambda|/d theta at the critical value; negative on (0, 1)."""
    u, g = u_bar, p.gamma
    num = u * u * (1.0 - u) * (2.0 * u**3 + g * u * u + 4.0 * g * g * u + 3.0 * g**3)
    return -num / (2.0 * (g + u) * (g * g + u * u) ** 2)


def perturbed_jacobian(u_bar: float, theta0: float, theta_star: float, p: Params) -> Matrix2:
    """Jacobian at the frozen point ``(u_bar, v_bar)`` when theta = theta0 + theta_star."""
    u, g, b = u_bar, p.gamma, p.beta
    th = theta0 + theta_star
    den = g * g + u * u
    return Matrix2(
        (1.0 - u) * (g + 2.0 * u) / (g + u),
        -u / (g + u),
        g * (1.0 - u) * (g + u) * (b / (g + u) ** 2 - 2.0 * th * g * u / den**2),
        1.0 - theta_star * u * u / den,
    )


@dataclass(frozen=True)
class TaylorCoeffs:
    """Cubic Taylor coefficients of the shifted map: ``a`` for u, ``b`` for v.

    Keys are ``"10"``, ``"01"``, ``"20"``, ``"11"``, ``"02"``, ``"30"``,
    ``"21"``, ``"12"``, ``"03"``.
    """

    a: dict
    b: dict

    KEYS = ("10", "01", "20", "11", "02", "30", "21", "12", "03")

    def flat(self) -> dict:
        out = {f"a{k}": self.a[k] for k in self.KEYS}
        out.update({f"b{k}": self.b[k] for k in self.KEYS})
        return out

    def zero_nonlinear(self) -> "TaylorCoeffs":
        keep = ("10", "01")
        return TaylorCoeffs(
            {k: (v if k in keep else 0.0) for k, v in self.a.items()},
            {k: (v if k in keep else 0.0) for k, v in self.b.items()},
        )


def taylor_coeffs(u_bar: float, theta0: float, p: Params, variant: str = "printed") -> TaylorCoeffs:
    _check_variant(variant)
    u, g, b, th = u_bar, p.gamma, p.beta, theta0
    gu = g + u
    den = g * g + u * u
    a = {
        "10": (1.0 - u) * (g + 2.0 * u) / gu,
        "01": -u / gu,
        "20": (g * (1.0 - 3.0 * u) - g * g - u * u) / gu**2,
        "11": -g / gu**2,
        "02": 0.0,
        "30": g * (u - 1.0) / gu**3,
        "21": g / gu**3,
        "12": 0.0,
        "03": 0.0,
    }
    b20_power = 2 if variant == "printed" else 3
    bb = {
        "10": g * (1.0 - u) * (b / gu - 2.0 * g * th * u * gu / den**2),
        "01": 1.0,
        "20": -g * (1.0 - u) * (b / gu**2 + g * th * gu * (g * g - 3.0 * u * u) / den**b20_power),
        "11": g * (b / gu**2 - 2.0 * g * th * u / den**2),
        "02": 0.0,
        "30": g * (1.0 - u) * (b / gu**3 + 4.0 * g * th * u * (g - u) * gu**2 / den**4),
        "21": -g * (b / gu**3 + g * th * (g * g - 3.0 * u * u) / den**3),
        "12": 0.0,
        "03": 0.0,
    }
    return TaylorCoeffs(a, bb)


def _check_variant(variant):
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}, got {variant!r}")


def transform_scalars(u_bar: float, a10: float, p: Params) -> tuple[float, float, float]:
    """``(alpha, m, n)`` for the basis change ``T = [[m n, -n], [0, 1]]``."""
    u, g = u_bar, p.gamma
    alpha_sq = 3.0 - a10 * a10 - 2.0 * a10
    if alpha_sq <= 0:
        raise NotNSApplicable(f"1 + a10 = {1 + a10} lies outside (-1, 3); eigenvalues are real")
    alpha = math.sqrt(alpha_sq)
    pole = 2.0 * u + g - 1.0
    if abs(pole) < SINGULAR_M:
        raise SingularTransformError(f"2u + gamma - 1 = {pole:.3e} at u={u}")
    m = alpha * (g + u) / (u * pole)
    n = u / (2.0 * (g + u))
    return alpha, m, n


def cd_coeffs(tc: TaylorCoeffs, m: float, n: float, variant: str = "printed") -> tuple[dict, dict]:
    """Coefficients of ``F`` and ``G`` in ``T^-1 H(T X) = (F, G)``."""
    _check_variant(variant)
    a, b = tc.a, tc.b
    k = 1.0 if variant == "printed" else 2.0  # weight of the XY cross term of x^2
    c = {
        "20": a["20"] * m * n + b["20"] * m * n**2,
        "11": a["11"] - k * a["20"] * n + b["11"] * n - k * b["20"] * n**2,
        "02": (a["20"] * n - a["11"] + b["20"] * n**2 - b["11"] * n) / m,
        "30": a["30"] * m**2 * n**2 + b["30"] * m**2 * n**3,
        "21": a["21"] * m * n - 3.0 * a["30"] * m * n**2 + b["21"] * m * n**2 - 3.0 * b["30"] * m * n**3,
        "12": 3.0 * a["30"] * n**2 - 2.0 * a["21"] * n + 3.0 * b["30"] * n**3 - 2.0 * b["21"] * n**2,
        "03": (a["21"] * n - a["30"] * n**2 + b["21"] * n**2 - b["30"] * n**3) / m,
    }
    d = {
        "20": b["20"] * m**2 * n**2,
        "11": b["11"] * m * n - k * b["20"] * m * n**2,
        "02": b["20"] * n**2 - b["11"] * n,
        "30": b["30"] * m**3 * n**3,
        "21": b["21"] * m**2 * n**2 - 3.0 * b["30"] * m**2 * n**3,
        "12": 3.0 * b["30"] * m * n**3 - 2.0 * b["21"] * m * n**2,
        "03": b["21"] * n**2 - b["30"] * n**3,
    }
    return c, d


def _partials(c: dict, d: dict) -> dict:
    return {
        "Fxx": 2 * c["20"], "Fxy": c["11"], "Fyy": 2 * c["02"],
        "Fxxx": 6 * c["30"], "Fxxy": 2 * c["21"], "Fxyy": 2 * c["12"], "Fyyy": 6 * c["03"],
        "Gxx": 2 * d["20"], "Gxy": d["11"], "Gyy": 2 * d["02"],
        "Gxxx": 6 * d["30"], "Gxxy": 2 * d["21"], "Gxyy": 2 * d["12"], "Gyyy": 6 * d["03"],
    }


def normal_form_coefficients(part: dict) -> tuple[complex, complex, complex, complex]:
    P = part
    L20 = complex(P["Fxx"] - P["Fyy"] + 2 * P["Gxy"], P["Gxx"] - P["Gyy"] - 2 * P["Fxy"]) / 8
    L11 = complex(P["Fxx"] + P["Fyy"], P["Gxx"] + P["Gyy"]) / 4
    L02 = complex(P["Fxx"] - P["Fyy"] - 2 * P["Gxy"], P["Gxx"] - P["Gyy"] + 2 * P["Fxy"]) / 8
    L21 = complex(P["Fxxx"] + P["Fxyy"] + P["Gxxy"] + P["Gyyy"],
                  P["Gxxx"] + P["Gxyy"] - P["Fxxy"] - P["Fyyy"]) / 16
    return L20, L11, L02, L21


def discriminating_quantity(lam1: complex, lam2: complex, L20, L11, L02, L21) -> float:
    """``-Re[(1-2l1) l2^2/(1-l1) L11 L20] - |L11|^2/2 - |L02|^2 + Re(l2 L21)``."""
    first = ((1 - 2 * lam1) * lam2**2 / (1 - lam1) * L11 * L20).real
    return float(-first - 0.5 * abs(L11) ** 2 - abs(L02) ** 2 + (lam2 * L21).real)


@dataclass(frozen=True)
class NSReport:
    theta0: float
    u_bar: float
    v_bar: float
    kind: str
    eigenvalues: tuple[complex, complex]
    alpha: float
    m: float
    n: float
    taylor: TaylorCoeffs
    c: dict
    d: dict
    L20: complex
    L11: complex
    L02: complex
    L21: complex
    L: float
    dmod_dtheta: float
    variant: str = "printed"
    params: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        def cx(z):
            return {"re": z.real, "im": z.imag}

        return {
            "params": self.params,
            "variant": self.variant,
            "kind": self.kind,
            "theta0": self.theta0,
            "u_bar": self.u_bar,
            "v_bar": self.v_bar,
            "eigenvalues": [cx(z) for z in self.eigenvalues],
            "alpha": self.alpha,
            "m": self.m,
            "n": self.n,
            "taylor": self.taylor.flat(),
            "cd": {**{f"c{k}": v for k, v in self.c.items()}, **{f"d{k}": v for k, v in self.d.items()}},
            "L20": cx(self.L20),
            "L11": cx(self.L11),
            "L02": cx(self.L02),
            "L21": cx(self.L21),
            "L": self.L,
            "dmod_dtheta": self.dmod_dtheta,
        }


def normal_form(u_bar: float, theta0: float, p: Params, variant: str = "printed",
                coeffs: TaylorCoeffs | None = None, kind: str = "") -> NSReport:
    """Full normal-form report at a critical pair.

    ``coeffs`` overrides the Taylor table; the eigenvalues and scalings always
    come from its linear part.
    """
    tc = coeffs if coeffs is not None else taylor_coeffs(u_bar, theta0, p, variant)
    a10 = tc.a["10"]
    alpha, m, n = transform_scalars(u_bar, a10, p)
    lam1 = complex((1.0 + a10) / 2.0, -alpha / 2.0)
    lam2 = lam1.conjugate()
    c, d = cd_coeffs(tc, m, n, variant)
    L20, L11, L02, L21 = normal_form_coefficients(_partials(c, d))
    if variant == "printed":
        L = discriminating_quantity(lam1, lam2, L20, L11, L02, L21)
    else:
        L = discriminating_quantity(lam2, lam1, L20, L11, L02, L21)
    return NSReport(
        theta0=theta0, u_bar=u_bar, v_bar=float(curve_v(u_bar, p)), kind=kind,
        eigenvalues=(lam1, lam2), alpha=alpha, m=m, n=n, taylor=tc, c=c, d=d,
        L20=L20, L11=L11, L02=L02, L21=L21, L=L,
        dmod_dtheta=transversality(u_bar, p), variant=variant,
        params={"r": p.r, "beta": p.beta, "gamma": p.gamma},
    )


class NSVerdict(NamedTuple):
    bifurcates: bool
    curve: str | None  # Attracting | Repelling | None when degenerate
    side: str | None  # "theta<theta0" | "theta>theta0"


def ns_verdict(report: NSReport, tol: float = DEGENERATE_L) -> NSVerdict:
    if abs(report.L) <= tol:
        return NSVerdict(False, None, None)
    if report.L < 0:
        return NSVerdict(True, "Attracting", "theta<theta0")
    return NSVerdict(True, "Repelling", "theta>theta0")


def nonresonant(report: NSReport, orders=(1, 2, 3, 4), tol: float = 1e-6) -> bool:
    lam = report.eigenvalues[0]
    return all(abs(lam**k - 1.0) > tol for k in orders)


def first_lyapunov_invariant(u_bar: float, theta0: float, p: Params) -> float:
    """Coordinate-free first Lyapunov coefficient of the fixed point.

    Uses eigenvectors of the Jacobian and the exact second/third derivative
    tensors; only its sign is comparable with ``L``.
    """
    tc = taylor_coeffs(u_bar, theta0, p, "exact")
    A = jacobian_on_curve(u_bar, p.with_theta(theta0)).as_array()
    B = np.zeros((2, 2, 2))
    C = np.zeros((2, 2, 2, 2))
    for row, coef in enumerate((tc.a, tc.b)):
        B[row, 0, 0] = 2 * coef["20"]
        B[row, 0, 1] = B[row, 1, 0] = coef["11"]
        B[row, 1, 1] = 2 * coef["02"]
        C[row, 0, 0, 0] = 6 * coef["30"]
        for idx in ((0, 0, 1), (0, 1, 0), (1, 0, 0)):
            C[(row,) + idx] = 2 * coef["21"]
        for idx in ((0, 1, 1), (1, 0, 1), (1, 1, 0)):
            C[(row,) + idx] = 2 * coef["12"]
        C[row, 1, 1, 1] = 6 * coef["03"]

    return invariant_coefficient(A, B, C)


def invariant_coefficient(A, B, C) -> float:
    """``Re(conj(lambda) c1)`` for a map with Jacobian ``A`` and derivative tensors ``B``, ``C``.

    ``B[i, j, k]`` and ``C[i, j, k, l]`` are second and third partials of
    component ``i``. The eigenvector ``q`` has unit norm and ``<p, q> = 1``.
    """
    A = np.asarray(A, float)
    w, vr = np.linalg.eig(A)
    i = int(np.argmax(w.imag))
    lam, q = w[i], vr[:, i]
    wl, vl = np.linalg.eig(A.T)
    pv = vl[:, int(np.argmin(abs(wl - np.conj(lam))))]
    pv = pv / np.conj(np.vdot(pv, q))

    def bil(x, y):
        return np.einsum("ijk,j,k->i", B, x, y)

    eye = np.eye(2)
    h11 = np.linalg.solve(eye - A, bil(q, np.conj(q)))
    h20 = np.linalg.solve(lam**2 * eye - A, bil(q, q))
    cub = np.einsum("ijkl,j,k,l->i", C, q, q, np.conj(q))
    inner = np.vdot(pv, cub + 2 * bil(q, h11) + bil(np.conj(q), h20))
    return float((0.5 * np.conj(lam) * inner).real)


def eigen_scale(report: NSReport) -> float:
    """``|T (1, -i) / 2|^2``: factor between ``L`` (exact) and the invariant coefficient."""
    mn, n = report.m * report.n, report.n
    return (mn * mn + n * n + 1.0) / 4.0


def cross_check(report: NSReport) -> dict:
    """Exact-variant ``L`` next to the scaled invariant coefficient and the report's own sign."""
    p = Params(r=report.params["r"], beta=report.params["beta"], theta=report.theta0,
               gamma=report.params["gamma"])
    exact = report if report.variant == "exact" else normal_form(report.u_bar, report.theta0, p, "exact")
    inv = first_lyapunov_invariant(report.u_bar, report.theta0, p)
    scaled = inv * eigen_scale(exact)
    return {
        "L_exact": exact.L,
        "lyapunov_invariant": inv,
        "scaled_invariant": scaled,
        "signs_agree": bool(np.sign(report.L) == np.sign(inv)),
    }


def analyze(p: Params, which_fp: str | None = None, variant: str = "printed") -> list[NSReport]:
    return [normal_form(pt.u_bar, pt.theta0, p, variant, kind=pt.kind)
            for pt in ns_critical(p, which_fp)]


def report_summary(report: NSReport) -> dict:
    out = report.as_dict()
    verdict = ns_verdict(report)
    out["verdict"] = verdict._asdict()
    out["nonresonant"] = nonresonant(report)
    return out


__all__ = [
    "NSPoint", "NSReport", "NSVerdict", "NotNSApplicable", "SingularTransformError", "TaylorCoeffs",
    "analyze", "cd_coeffs", "discriminating_quantity", "eigen_at", "first_lyapunov_invariant", "invariant_coefficient",
    "cross_check", "eigen_scale", "normal_form", "nonresonant", "ns_critical", "ns_verdict", "perturbed_jacobian", "report_summary",
    "taylor_coeffs", "transform_scalars", "transversality",
]

