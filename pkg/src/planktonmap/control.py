"""State feedback ``delta = -s1 (u - u_bar) - s2 (v - v_bar)`` on the prey equation.

The controlled Jacobian at the target differs from the uncontrolled one only
in its first row, so trace and determinant are affine in the gains. Each
stability boundary (``det = 1``, eigenvalue ``+1``, eigenvalue ``-1``) is
therefore a straight line in the ``(s1, s2)`` plane.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .equilibria import positive_fixed_points
from .model import Matrix2, Params, curve_v, jacobian_on_curve, map_step, psi
from .nsbif import ns_critical

STRICT = 1e-12


@dataclass(frozen=True)
class Gains:
    s1: float = 0.0
    s2: float = 0.0

    def __post_init__(self):
        for name in ("s1", "s2"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValueError(f"gain {name} must be finite, got {value!r}")
            object.__setattr__(self, name, value)


@dataclass(frozen=True)
class Line:
    """``a s1 + b s2 + c = 0``."""

    name: str
    a: float
    b: float
    c: float

    def value(self, s1, s2):
        return self.a * s1 + self.b * s2 + self.c

    def as_dict(self) -> dict:
        return {"name": self.name, "a": self.a, "b": self.b, "c": self.c}


@dataclass(frozen=True)
class StabilityTriangle:
    lines: tuple[Line, Line, Line]
    vertices: tuple[tuple[float, float], ...]
    # +1 or -1 per line: sign of Line.value on the stable side
    orientation: tuple[int, int, int]
    degenerate: bool = False

    def contains(self, s1, s2, band: float = 0.0):
        """Strictly inside, with an optional margin in line-normal units."""
        inside = True
        for line, sgn in zip(self.lines, self.orientation):
            norm = math.hypot(line.a, line.b)
            inside = inside & (sgn * line.value(s1, s2) > band * norm)
        return inside

    def centroid(self) -> tuple[float, float]:
        pts = np.array(self.vertices)
        return float(pts[:, 0].mean()), float(pts[:, 1].mean())

    def polyline(self) -> list[tuple[float, float]]:
        """Closed vertex loop for plotting."""
        return list(self.vertices) + [self.vertices[0]]

    def as_dict(self) -> dict:
        return {
            "lines": [ln.as_dict() for ln in self.lines],
            "vertices": [list(v) for v in self.vertices],
            "orientation": list(self.orientation),
            "degenerate": self.degenerate,
        }


def _target(fp) -> tuple[float, float]:
    return float(fp.u), float(fp.v)


def controlled_step(s, g: Gains, fp, p: Params) -> tuple[float, float]:
    u, v = s
    ub, vb = _target(fp)
    u_next, v_next = map_step((u, v), p)
    return u_next - g.s1 * (u - ub) - g.s2 * (v - vb), v_next


def controlled_jacobian(fp, g: Gains, p: Params) -> Matrix2:
    J = jacobian_on_curve(_target(fp)[0], p)
    return Matrix2(J.a - g.s1, J.b - g.s2, J.c, J.d)


def _base_entries(fp, p):
    J = jacobian_on_curve(_target(fp)[0], p)
    return J.a, J.b, J.c


def stability_triangle(fp, p: Params) -> StabilityTriangle:
    """Lines where ``det = 1`` (l1), ``lambda = 1`` (l2), ``lambda = -1`` (l3)."""
    a10, a01, b10 = _base_entries(fp, p)
    u, g = _target(fp)[0], p.gamma
    # trace = 1 + a10 - s1, det = a10 - s1 - a01 b10 + b10 s2
    l1 = Line("l1", 1.0, -b10, 1.0 - a10 + a01 * b10)
    l2 = Line("l2", 0.0, g + u, u)
    l3 = Line("l3", 2.0, -b10, -2.0 - 2.0 * a10 + a01 * b10)
    lines = (l1, l2, l3)

    verts = []
    degenerate = False
    for i, j in ((0, 1), (1, 2), (2, 0)):
        A = np.array([[lines[i].a, lines[i].b], [lines[j].a, lines[j].b]])
        rhs = -np.array([lines[i].c, lines[j].c])
        if abs(np.linalg.det(A)) < 1e-14 * max(1.0, np.abs(A).max() ** 2):
            degenerate = True
            verts.append((math.nan, math.nan))
            continue
        x = np.linalg.solve(A, rhs)
        verts.append((float(x[0]), float(x[1])))

    if not degenerate:
        pts = np.array(verts)
        e1, e2 = pts[1] - pts[0], pts[2] - pts[0]
        area2 = e1[0] * e2[1] - e1[1] * e2[0]
        degenerate = abs(area2) < 1e-14
    if degenerate:
        return StabilityTriangle(lines, tuple(verts), (0, 0, 0), True)

    c1, c2 = np.array(verts).mean(axis=0)
    # the centroid lies strictly inside every edge; read each stable side off it
    orient = tuple(int(np.sign(ln.value(c1, c2))) for ln in lines)
    tri = StabilityTriangle(lines, tuple(verts), orient, False)
    if not is_stabilizing(Gains(c1, c2), fp, p):
        # the enclosed triangle is not the stable set (cannot happen when b10 != 0)
        return StabilityTriangle(lines, tuple(verts), orient, True)
    return tri


def is_stabilizing(g: Gains, fp, p: Params) -> bool:
    lam = controlled_jacobian(fp, g, p).eigenvalues()
    return all(abs(z) < 1.0 - STRICT for z in lam)


def stable_grid(fp, p: Params, s1, s2) -> np.ndarray:
    """Eigenvalue-based stability mask over a mesh of gains, vectorized."""
    a10, a01, b10 = _base_entries(fp, p)
    S1, S2 = np.meshgrid(s1, s2, indexing="ij")
    tr = 1.0 + a10 - S1
    det = a10 - S1 - a01 * b10 + b10 * S2
    disc = tr * tr - 4.0 * det
    root = np.sqrt(np.abs(disc))
    real_max = np.maximum(np.abs(tr + root), np.abs(tr - root)) / 2.0
    complex_mod = np.sqrt(np.abs(det))
    spectral = np.where(disc >= 0, real_max, complex_mod)
    return spectral < 1.0 - STRICT


def controlled_orbit_converges(start, g: Gains, fp, p: Params, n: int = 10_000, tol: float = 1e-8) -> bool:
    ub, vb = _target(fp)
    u, v = start
    for _ in range(n):
        u, v = controlled_step((u, v), g, fp, p)
        if not (math.isfinite(u) and math.isfinite(v)) or abs(u) > 1e6 or abs(v) > 1e6:
            return False
        if math.hypot(u - ub, v - vb) < tol:
            return True
    return False


@dataclass(frozen=True)
class Target:
    """Equilibrium on ``v = (1 - u)(gamma + u)`` to be stabilized."""

    u: float
    v: float
    kind: str
    in_quadrant: bool


def curve_equilibria(p: Params, u_max: float = 1e3, grid: int = 20001) -> list[float]:
    """All ``u > 0`` with ``psi(u) = theta``, including ``u > 1`` where ``v < 0``."""
    us = np.geomspace(1e-9, u_max, grid)
    f = psi(us, p) - p.theta
    roots = []
    for i in np.nonzero(np.sign(f[:-1]) * np.sign(f[1:]) < 0)[0]:
        roots.append(brentq(lambda x: psi(x, p) - p.theta, us[i], us[i + 1], xtol=1e-15))
    roots += [float(us[i]) for i in np.nonzero(f == 0)[0]]
    return sorted(roots)


def resolve_target(p: Params, which: str | None = None) -> Target:
    """Pick the control target.

    Order of preference: the named kind, the positive point that undergoes
    the Neimark-Sacker bifurcation, the first unstable positive point, any
    positive point, and finally an equilibrium on the curve with ``u > 1``.
    """
    pos = positive_fixed_points(p)
    if which is not None:
        for fp in pos:
            if fp.kind == which:
                return Target(fp.u, fp.v, fp.kind, True)
        raise LookupError(f"no positive fixed point of kind {which}")
    if pos:
        ns_kinds = {pt.kind for pt in ns_critical(p)}
        for fp in pos:
            if fp.kind in ns_kinds:
                return Target(fp.u, fp.v, fp.kind, True)
        for fp in pos:
            if fp.stability is not None and fp.stability.tag != "Attracting":
                return Target(fp.u, fp.v, fp.kind, True)
        return Target(pos[0].u, pos[0].v, pos[0].kind, True)
    outside = [u for u in curve_equilibria(p) if u > 1.0]
    if not outside:
        raise LookupError("no equilibrium on the curve to stabilize")
    u = outside[0]
    return Target(u, float(curve_v(u, p)), "OffQuadrant", False)
