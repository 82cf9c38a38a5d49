"""The phytoplankton-zooplankton map and its algebraic building blocks.

State ``(u, v)`` holds scaled phytoplankton and zooplankton densities. One
step of the map is

    u' = u(2 - u) - u v / (gamma + u)
    v' = beta u v / (gamma + u) + (1 - r) v - theta u^2 v / (gamma^2 + u^2)

Positive equilibria lie on the curve ``v = (1 - u)(gamma + u)`` and satisfy
``theta = psi(u)``. Everything here is a pure function of its arguments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

# Left end of the open interval (EPS_U, 1) on which psi is evaluated.
EPS_U = 1e-12


@dataclass(frozen=True)
class Params:
    """Model constants; all four must be strictly positive."""

    r: float
    beta: float
    theta: float
    gamma: float

    def __post_init__(self):
        for name in ("r", "beta", "theta", "gamma"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float, np.floating, np.integer)) and math.isfinite(value)):
                raise ValueError(f"{name} must be a finite real number, got {value!r}")
            if value <= 0:
                raise ValueError(f"{name} must be positive, got {value!r}")
            object.__setattr__(self, name, float(value))

    def with_theta(self, theta: float) -> "Params":
        return replace(self, theta=theta)

    def as_dict(self) -> dict:
        return {"r": self.r, "beta": self.beta, "theta": self.theta, "gamma": self.gamma}


@dataclass(frozen=True)
class State:
    u: float
    v: float

    def __post_init__(self):
        for name in ("u", "v"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
            if value < 0:
                raise ValueError(f"{name} must be nonnegative, got {value!r}")
            object.__setattr__(self, name, value)

    def __iter__(self):
        yield self.u
        yield self.v


@dataclass(frozen=True)
class Matrix2:
    """Real 2x2 matrix ``[[a, b], [c, d]]``."""

    a: float
    b: float
    c: float
    d: float

    @property
    def trace(self) -> float:
        return self.a + self.d

    @property
    def det(self) -> float:
        return self.a * self.d - self.b * self.c

    def eigenvalues(self) -> tuple[complex, complex]:
        """Roots of ``lambda^2 - trace*lambda + det``.

        Complex pairs come back with the negative imaginary part first; real
        pairs are ordered by decreasing value.
        """
        return quadratic_roots(self.trace, self.det)

    def as_array(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]])

    @classmethod
    def from_array(cls, m) -> "Matrix2":
        m = np.asarray(m, dtype=float)
        return cls(float(m[0, 0]), float(m[0, 1]), float(m[1, 0]), float(m[1, 1]))


def quadratic_roots(trace: float, det: float) -> tuple[complex, complex]:
    disc = trace * trace - 4.0 * det
    if disc >= 0:
        root = math.sqrt(disc)
        # avoid cancellation: take the larger-magnitude root first, then det/root
        big = 0.5 * (trace + math.copysign(root, trace)) if trace != 0 else 0.5 * root
        if big == 0:
            return complex(0.0), complex(0.0)
        small = det / big
        hi, lo = max(big, small), min(big, small)
        return complex(hi), complex(lo)
    half = 0.5 * math.sqrt(-disc)
    return complex(0.5 * trace, -half), complex(0.5 * trace, half)


def map_step(s, p: Params) -> tuple[float, float]:
    """One iterate of the map. Accepts a ``State`` or any ``(u, v)`` pair.

    Works elementwise on numpy arrays too. Negative outputs are returned as
    they are; callers decide what leaving the quadrant means.
    """
    u, v = s
    g = p.gamma
    graze = u / (g + u)
    toxin = u * u / (g * g + u * u)
    u_next = u * (2.0 - u) - graze * v
    v_next = v * (p.beta * graze + (1.0 - p.r) - p.theta * toxin)
    return u_next, v_next


def psi(u, p: Params):
    """Toxin rate that makes ``u`` the first coordinate of a positive fixed point."""
    if np.any(np.asarray(u) <= 0):
        raise ValueError("psi is undefined for u <= 0")
    g = p.gamma
    return ((p.beta - p.r) * u - p.r * g) * (g * g + u * u) / (u * u * (g + u))


def psi_at_one(p: Params) -> float:
    g = p.gamma
    return (p.beta - p.r - p.r * g) * (g * g + 1.0) / (g + 1.0)


def h_poly(u, p: Params):
    """Cubic whose sign matches the sign of psi'(u) for u > 0."""
    b, r, g = p.beta, p.r, p.gamma
    return b * u**3 + 2.0 * (r - b) * g * u**2 + (4.0 * r - b) * g * g * u + 2.0 * r * g**3


def h_prime(u, p: Params):
    b, r, g = p.beta, p.r, p.gamma
    return 3.0 * b * u**2 + 4.0 * (r - b) * g * u + (4.0 * r - b) * g * g


def psi_prime(u, p: Params):
    g = p.gamma
    return g * h_poly(u, p) / (u**3 * (u + g) ** 2)


def curve_v(u, p: Params):
    """Second coordinate of the positive fixed point with first coordinate ``u``."""
    return (1.0 - u) * (p.gamma + u)


def jacobian_general(s, p: Params) -> Matrix2:
    u, v = s
    g, b, th = p.gamma, p.beta, p.theta
    gu = g + u
    den = g * g + u * u
    return Matrix2(
        2.0 - 2.0 * u - g * v / gu**2,
        -u / gu,
        b * g * v / gu**2 - 2.0 * th * g * g * u * v / den**2,
        b * u / gu - th * u * u / den + 1.0 - p.r,
    )


def _kernel(u, p: Params):
    # beta/(gamma+u)^2 - 2 theta gamma u/(gamma^2+u^2)^2, shared by the reduced Jacobian
    g = p.gamma
    return p.beta / (g + u) ** 2 - 2.0 * p.theta * g * u / (g * g + u * u) ** 2


def jacobian_on_curve(u: float, p: Params) -> Matrix2:
    """Jacobian at ``(u, (1-u)(gamma+u))`` using the fixed-point relation.

    The lower-right entry is exactly 1 only when ``theta == psi(u)``; the
    reduced form assumes it, so pass parameters whose theta matches ``u``.
    """
    g = p.gamma
    a10 = (1.0 - u) * (g + 2.0 * u) / (g + u)
    return Matrix2(
        a10,
        -u / (g + u),
        g * (1.0 - u) * (g + u) * _kernel(u, p),
        1.0,
    )


def pq(u, p: Params):
    """Trace ``p(u)`` and determinant ``q(u)`` of the reduced Jacobian."""
    g = p.gamma
    a10 = (1.0 - u) * (g + 2.0 * u) / (g + u)
    return 1.0 + a10, a10 + g * u * (1.0 - u) * _kernel(u, p)


def char_poly(lam, u, p: Params):
    """``F(lambda, u) = lambda^2 - p(u) lambda + q(u)``."""
    tr, dt = pq(u, p)
    return lam * lam - tr * lam + dt
