"""Nearest-neighbour interaction potentials W(u) with closed-form derivatives.

Every potential exposes vectorized ``W``, ``dW``, ``d2W`` and ``d3W`` (the
latter may be ``None`` for custom potentials), the increment
``dW_increment(u, d) = W'(u + d) - W'(u)`` evaluated without cancellation,
and ``char_integral(u0, u1)``, the integral of the characteristic speed
``sqrt(W'')`` used by the Riemann solver.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np
from numpy.polynomial import Polynomial
from scipy import integrate

__all__ = [
    "PotentialValues",
    "ConvexityReport",
    "PotentialSpec",
    "Quadratic",
    "PowerLaw",
    "Toda",
    "XQuadratic",
    "Custom",
    "kinked_quadratic",
    "evaluate",
    "verify_convexity",
]


class PotentialValues(NamedTuple):
    W: float
    dW: float
    d2W: float
    d3W: Optional[float]


@dataclass(frozen=True)
class ConvexityReport:
    min_d2W: float
    min_d3W: Optional[float]
    satisfies_convex: bool
    satisfies_sconvex: bool


def _ipow(u, k: int):
    """Integer power by repeated multiplication (much faster than ``**`` on arrays)."""
    if k == 0:
        return np.ones_like(u)
    out = u
    for _ in range(k - 1):
        out = out * u
    return out


class PotentialSpec:
    """Base class. Subclasses are immutable and safe to share between threads."""

    kind: str = "abstract"
    needs_x: bool = False
    domain: Optional[tuple[float, float]] = None

    def W(self, u, x=None):
        raise NotImplementedError

    def dW(self, u, x=None):
        raise NotImplementedError

    def d2W(self, u, x=None):
        raise NotImplementedError

    def d3W(self, u, x=None):
        raise NotImplementedError

    def dW_increment(self, u, d, x=None):
        """W'(u + d) - W'(u), accurate when |d| << |u| (generic fallback)."""
        u = np.asarray(u)
        d = np.asarray(d)
        direct = self.dW(u + d, x) - self.dW(u, x)
        d3 = self.d3W(u, x)
        taylor = d * self.d2W(u, x)
        if d3 is not None:
            taylor = taylor + 0.5 * d * d * d3
        small = np.abs(d) < 1e-5 * (1.0 + np.abs(u))
        return np.where(small, taylor, direct)

    def char_integral(self, u0: float, u1: float) -> float:
        """Integral of sqrt(W''(s)) over s in [u0, u1] (signed)."""
        val, _ = integrate.quad(
            lambda s: math.sqrt(max(float(self.d2W(s)), 0.0)), u0, u1,
            epsabs=1e-14, epsrel=1e-13, limit=200,
        )
        return val

    def describe(self) -> dict:
        return {"kind": self.kind}

    def _check_x(self, x):
        if self.needs_x and x is None:
            raise ValueError(f"potential {self.kind!r} depends on x; pass x")


@dataclass(frozen=True)
class Quadratic(PotentialSpec):
    """W(u) = u^2 / 2."""

    domain: Optional[tuple[float, float]] = None
    kind: str = field(default="quadratic", init=False)

    def W(self, u, x=None):
        return 0.5 * u * u

    def dW(self, u, x=None):
        return 1.0 * u

    def d2W(self, u, x=None):
        return np.ones_like(np.asarray(u, dtype=float))[()]

    def d3W(self, u, x=None):
        return np.zeros_like(np.asarray(u, dtype=float))[()]

    def dW_increment(self, u, d, x=None):
        return 1.0 * np.asarray(d)

    def char_integral(self, u0, u1):
        return float(u1 - u0)


@dataclass(frozen=True)
class PowerLaw(PotentialSpec):
    """W(u) = A |u|^gamma / gamma + B u^2 / 2 (even extension, gamma >= 2)."""

    exponent: float = 6.0
    A: float = 1.0
    B: float = 0.0
    domain: Optional[tuple[float, float]] = None
    kind: str = field(default="power_law", init=False)

    def __post_init__(self):
        if self.exponent < 2:
            raise ValueError("power-law exponent must be >= 2")
        if self.A < 0 or self.B < 0:
            raise ValueError("power-law coefficients A, B must be non-negative")

    @property
    def _even_int(self) -> bool:
        g = self.exponent
        return float(g).is_integer() and int(g) % 2 == 0

    def _pow(self, u, k: float):
        # |u|^k sign(u)^(parity) handled by callers
        if float(k).is_integer() and self._even_int:
            return _ipow(np.asarray(u, dtype=float), int(k))[()]
        return np.abs(u) ** k

    def W(self, u, x=None):
        g = self.exponent
        return self.A * self._pow(u, g) / g + 0.5 * self.B * u * u

    def dW(self, u, x=None):
        g = self.exponent
        if self._even_int:
            core = self._pow(u, g - 1)
        else:
            core = np.abs(u) ** (g - 1) * np.sign(u)
        return self.A * core + self.B * u

    def d2W(self, u, x=None):
        g = self.exponent
        if g == 2:
            core = np.ones_like(np.asarray(u, dtype=float))[()]
        else:
            core = self._pow(u, g - 2)
        return self.A * (g - 1) * core + self.B

    def d3W(self, u, x=None):
        g = self.exponent
        if g == 2:
            return np.zeros_like(np.asarray(u, dtype=float))[()]
        if self._even_int:
            core = self._pow(u, g - 3)
        else:
            core = np.abs(u) ** (g - 3) * np.sign(u)
        return self.A * (g - 1) * (g - 2) * core

    def dW_increment(self, u, d, x=None):
        if not self._even_int:
            return super().dW_increment(u, d, x)
        # binomial expansion of (u + d)^(g-1) - u^(g-1), free of cancellation
        m = int(self.exponent) - 1
        u = np.asarray(u)
        d = np.asarray(d)
        acc = np.zeros(np.broadcast(u, d).shape, dtype=np.result_type(u, d, float))
        dk = np.ones_like(acc)
        for k in range(1, m + 1):
            dk = dk * d
            acc = acc + math.comb(m, k) * _ipow(u, m - k) * dk
        return self.A * acc + self.B * d

    def char_integral(self, u0, u1):
        if self.B == 0.0:
            g = self.exponent
            c = math.sqrt(self.A * (g - 1))

            def prim(s):
                return c * (2.0 / g) * abs(s) ** (g / 2) * math.copysign(1.0, s)

            return prim(u1) - prim(u0)
        return super().char_integral(u0, u1)

    def describe(self):
        return {"kind": self.kind, "exponent": self.exponent, "A": self.A, "B": self.B}


@dataclass(frozen=True)
class Toda(PotentialSpec):
    """W(u) = exp(-u)."""

    domain: Optional[tuple[float, float]] = None
    kind: str = field(default="toda", init=False)

    def W(self, u, x=None):
        return np.exp(-u)

    def dW(self, u, x=None):
        return -np.exp(-u)

    def d2W(self, u, x=None):
        return np.exp(-u)

    def d3W(self, u, x=None):
        return -np.exp(-u)

    def dW_increment(self, u, d, x=None):
        return -np.exp(-np.asarray(u)) * np.expm1(-np.asarray(d))

    def char_integral(self, u0, u1):
        return 2.0 * (math.exp(-u0 / 2) - math.exp(-u1 / 2))


def _as_poly(c) -> Callable:
    if callable(c):
        return c
    return Polynomial(np.atleast_1d(np.asarray(c, dtype=float)))


@dataclass(frozen=True, eq=False)
class XQuadratic(PotentialSpec):
    """W(x, u) = A(x) u^2 / 2 + B(x) u.

    ``A`` and ``B`` are callables of x or polynomial coefficient lists
    (lowest degree first).
    """

    A: object = (1.0,)
    B: object = (0.0,)
    domain: Optional[tuple[float, float]] = None
    kind: str = field(default="x_quadratic", init=False)
    needs_x: bool = field(default=True, init=False)

    def __post_init__(self):
        object.__setattr__(self, "_a", _as_poly(self.A))
        object.__setattr__(self, "_b", _as_poly(self.B))

    def coefficients(self, x):
        self._check_x(x)
        return self._a(x), self._b(x)

    def W(self, u, x=None):
        a, b = self.coefficients(x)
        return 0.5 * a * u * u + b * u

    def dW(self, u, x=None):
        a, b = self.coefficients(x)
        return a * u + b

    def d2W(self, u, x=None):
        a, _ = self.coefficients(x)
        return a + 0.0 * np.asarray(u)

    def d3W(self, u, x=None):
        self._check_x(x)
        return 0.0 * np.asarray(u) + 0.0 * np.asarray(x)

    def dW_increment(self, u, d, x=None):
        a, _ = self.coefficients(x)
        return a * np.asarray(d)

    def min_stiffness(self, samples: int = 2001) -> float:
        xs = np.linspace(-1.0, 1.0, samples)
        return float(np.min(self._a(xs)))

    def describe(self):
        def coeffs(c):
            return list(np.atleast_1d(c.coef)) if isinstance(c, Polynomial) else repr(c)

        return {"kind": self.kind, "A": coeffs(self._a), "B": coeffs(self._b)}


@dataclass(frozen=True, eq=False)
class Custom(PotentialSpec):
    """User-supplied closed forms; no derivative is ever computed automatically."""

    w: Callable = None
    dw: Callable = None
    d2w: Callable = None
    d3w: Optional[Callable] = None
    name: str = "custom"
    domain: Optional[tuple[float, float]] = None
    kind: str = field(default="custom", init=False)

    def __post_init__(self):
        if self.w is None or self.dw is None or self.d2w is None:
            raise ValueError("custom potential needs W, W' and W''")

    def W(self, u, x=None):
        return self.w(u)

    def dW(self, u, x=None):
        return self.dw(u)

    def d2W(self, u, x=None):
        return self.d2w(u)

    def d3W(self, u, x=None):
        return None if self.d3w is None else self.d3w(u)

    def describe(self):
        return {"kind": self.kind, "name": self.name}


def kinked_quadratic(domain=None) -> Custom:
    """W(u) = (|u| - 1)^2, only convex away from u = 0."""
    return Custom(
        w=lambda u: (np.abs(u) - 1.0) ** 2,
        dw=lambda u: 2.0 * (np.abs(u) - 1.0) * np.sign(u),
        d2w=lambda u: 2.0 + 0.0 * np.asarray(u),
        d3w=lambda u: 0.0 * np.asarray(u),
        name="kinked_quadratic",
        domain=domain,
    )


def evaluate(p: PotentialSpec, u: float, x: Optional[float] = None) -> PotentialValues:
    """W and its first three derivatives at a single point."""
    if p.needs_x and x is None:
        raise ValueError(f"potential {p.kind!r} requires x")
    if not math.isfinite(u):
        raise ValueError("u must be finite")
    with np.errstate(over="ignore", invalid="ignore"):
        d3 = p.d3W(u, x)
        vals = PotentialValues(
            float(p.W(u, x)), float(p.dW(u, x)), float(p.d2W(u, x)),
            None if d3 is None else float(d3),
        )
    if not all(math.isfinite(v) for v in vals if v is not None):
        raise OverflowError(f"potential not representable at u={u}")
    return vals


def verify_convexity(p: PotentialSpec, interval: Sequence[float], samples: int = 100) -> ConvexityReport:
    """Minima of W'' and W''' on [a, b], on a uniform grid plus the candidate
    points where built-in kinds attain their closed-form minimum."""
    a, b = float(interval[0]), float(interval[1])
    if not a < b:
        raise ValueError("interval must satisfy a < b")
    if samples < 2:
        raise ValueError("samples must be >= 2")
    us = np.linspace(a, b, samples)
    if a < 0.0 < b:
        us = np.append(us, 0.0)
    us = np.append(us, [a, b])
    if p.needs_x:
        xs = np.linspace(-1.0, 1.0, samples)
        uu, xx = np.meshgrid(us, xs)
        d2 = np.asarray(p.d2W(uu, xx))
        d3 = np.asarray(p.d3W(uu, xx))
    else:
        d2 = np.asarray(p.d2W(us))
        d3v = p.d3W(us)
        d3 = None if d3v is None else np.asarray(d3v)
    min_d2 = float(np.min(d2))
    min_d3 = None if d3 is None else float(np.min(d3))
    return ConvexityReport(
        min_d2W=min_d2,
        min_d3W=min_d3,
        satisfies_convex=min_d2 > 0.0,
        satisfies_sconvex=min_d3 is not None and min_d3 > 0.0,
    )
