"""Independent reference computations used by the tests.

None of these call into the closed forms under test; they only use
``map_step`` (or re-derive the map from scratch) plus generic numerics.
"""

from __future__ import annotations

import math

import mpmath as mp
import numpy as np

from planktonmap.model import Params, map_step


def map_mp(u, v, p: Params):
    """The map in mpmath arithmetic, written out independently."""
    g, b, th, r = mp.mpf(p.gamma), mp.mpf(p.beta), mp.mpf(p.theta), mp.mpf(p.r)
    un = u * (2 - u) - u * v / (g + u)
    vn = b * u * v / (g + u) + (1 - r) * v - th * u**2 * v / (g**2 + u**2)
    return un, vn


def taylor_mp(u0: float, v0: float, p: Params, dps: int = 40) -> dict:
    """Coefficients of ``x^i y^j`` (i + j <= 3) of the map around ``(u0, v0)``."""
    out = {}
    with mp.workdps(dps):
        for comp, name in ((0, "a"), (1, "b")):
            def f(x, y, comp=comp):
                return map_mp(x, y, p)[comp]

            for i, j in ((1, 0), (0, 1), (2, 0), (1, 1), (0, 2), (3, 0), (2, 1), (1, 2), (0, 3)):
                d = mp.diff(f, (mp.mpf(u0), mp.mpf(v0)), (i, j))
                out[f"{name}{i}{j}"] = float(d / (math.factorial(i) * math.factorial(j)))
    return out


def taylor_fd(u0: float, v0: float, p: Params, h: float = 1e-2) -> dict:
    """Central-difference Taylor coefficients, Richardson-extrapolated once (h, h/2)."""

    def coeffs(step):
        def F(x, y):
            return np.array(map_step((u0 + x, v0 + y), p))

        k = step
        d = {}
        d["10"] = (F(k, 0) - F(-k, 0)) / (2 * k)
        d["01"] = (F(0, k) - F(0, -k)) / (2 * k)
        d["20"] = (F(k, 0) - 2 * F(0, 0) + F(-k, 0)) / k**2 / 2
        d["02"] = (F(0, k) - 2 * F(0, 0) + F(0, -k)) / k**2 / 2
        d["11"] = (F(k, k) - F(k, -k) - F(-k, k) + F(-k, -k)) / (4 * k * k)
        d["30"] = (F(2 * k, 0) - 2 * F(k, 0) + 2 * F(-k, 0) - F(-2 * k, 0)) / (2 * k**3) / 6
        d["03"] = (F(0, 2 * k) - 2 * F(0, k) + 2 * F(0, -k) - F(0, -2 * k)) / (2 * k**3) / 6
        fxx_p = (F(k, k) - 2 * F(0, k) + F(-k, k)) / k**2
        fxx_m = (F(k, -k) - 2 * F(0, -k) + F(-k, -k)) / k**2
        d["21"] = (fxx_p - fxx_m) / (2 * k) / 2
        fyy_p = (F(k, k) - 2 * F(k, 0) + F(k, -k)) / k**2
        fyy_m = (F(-k, k) - 2 * F(-k, 0) + F(-k, -k)) / k**2
        d["12"] = (fyy_p - fyy_m) / (2 * k) / 2
        return d

    coarse, fine = coeffs(h), coeffs(h / 2)
    out = {}
    for key in coarse:
        val = (4 * fine[key] - coarse[key]) / 3
        out[f"a{key}"] = float(val[0])
        out[f"b{key}"] = float(val[1])
    return out


def jacobian_fd(u: float, v: float, p: Params, h: float = 1e-6) -> np.ndarray:
    J = np.empty((2, 2))
    for col, (du, dv) in enumerate(((h, 0.0), (0.0, h))):
        plus = np.array(map_step((u + du, v + dv), p))
        minus = np.array(map_step((u - du, v - dv), p))
        J[:, col] = (plus - minus) / (2 * h)
    return J


def positive_roots_grid(p: Params, points: int = 200_001) -> np.ndarray:
    """Roots of ``psi(u) = theta`` from a fresh formula on a uniform grid (midpoints of sign changes).

    Nodes sit at cell centres so that round-number roots never land on a node.
    """
    u = (np.arange(points) + 0.5) / points
    g = p.gamma
    val = ((p.beta - p.r) * u - p.r * g) * (g * g + u * u) - p.theta * u * u * (g + u)
    idx = np.nonzero(np.sign(val[:-1]) * np.sign(val[1:]) < 0)[0]
    return 0.5 * (u[idx] + u[idx + 1])


def spectral_radius(J) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(np.asarray(J, float)))))
