"""Obstructions to discrete shock waves X_j(t) = phi(j - c t).

A traveling profile would have to satisfy

    c^2 phi''(x) = W'(phi(x+1) - phi(x)) - W'(phi(x) - phi(x-1)).

Testing this against phi' and integrating over the line forces the
trapezoid value of W' over [u_l, u_r] to equal its mean, so

    R = (W'(u_l) + W'(u_r)) / 2 - (W(u_r) - W(u_l)) / (u_r - u_l)

vanishes for any such wave; R > 0 whenever W' is strictly convex. For
quadratic W the linearized phase condition c^2 xi^2 = 2 (1 - cos xi) is the
remaining constraint, whose positive roots are enumerated here.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .potentials import PotentialSpec

__all__ = [
    "ObstructionReport",
    "rh_speed",
    "obstruction_residual",
    "obstruction_report",
    "dispersion_roots",
    "dispersion_roots_scan",
    "traveling_residual",
    "obstruction_rows",
    "dispersion_rows",
]


@dataclass(frozen=True)
class ObstructionReport:
    u_l: float
    u_r: float
    c_squared: float
    residual: float
    sign_consistent: bool


def rh_speed(p: PotentialSpec, u_l: float, u_r: float) -> float:
    """c^2 = (W'(u_r) - W'(u_l)) / (u_r - u_l)."""
    if u_l == u_r:
        raise ValueError("u_l == u_r: the jump speed is undefined")
    return float((p.dW(u_r) - p.dW(u_l)) / (u_r - u_l))


def obstruction_residual(p: PotentialSpec, u_l: float, u_r: float) -> float:
    if not u_l < u_r:
        raise ValueError("obstruction_residual needs u_l < u_r")
    trap = 0.5 * (float(p.dW(u_l)) + float(p.dW(u_r)))
    mean = (float(p.W(u_r)) - float(p.W(u_l))) / (u_r - u_l)
    return trap - mean


def obstruction_report(p: PotentialSpec, u_l: float, u_r: float) -> ObstructionReport:
    lo, hi = min(u_l, u_r), max(u_l, u_r)
    R = obstruction_residual(p, lo, hi)
    c2 = rh_speed(p, u_l, u_r)
    d3 = p.d3W(np.linspace(lo, hi, 65))
    if d3 is None:
        expected = 0
    else:
        d3 = np.asarray(d3, dtype=float)
        tol = 1e-12 * max(1.0, float(np.max(np.abs(d3))))
        expected = 1 if np.all(d3 > tol) else (0 if np.all(np.abs(d3) <= tol) else -1 if np.all(d3 < -tol) else None)
    scale = 1e-12 * (1.0 + abs(float(p.dW(lo))) + abs(float(p.dW(hi))))
    if expected == 1:
        ok = R > 0
    elif expected == -1:
        ok = R < 0
    elif expected == 0:
        ok = abs(R) <= scale
    else:
        ok = True
    return ObstructionReport(float(u_l), float(u_r), c2, R, bool(ok))


def _disp(theta, c):
    return np.sin(theta) - c * theta


def dispersion_roots(c: float) -> list[float]:
    """Positive roots of c^2 xi^2 = 2 (1 - cos xi).

    With theta = xi / 2 this is |sin theta| = |c| theta. On each arch
    [m pi, (m + 1) pi] the function |sin theta| - |c| theta is concave with
    its peak at m pi + arccos|c|, so the arch holds at most two roots, each
    bracketed on one side of the peak. All roots lie in (0, 2 / |c|].
    """
    a = abs(float(c))
    if a == 0:
        raise ValueError("c = 0 has infinitely many roots (xi in 2 pi Z)")
    if a >= 1:
        return []
    roots = []
    peak_off = math.acos(a)
    m = 0
    while m * math.pi <= 1.0 / a:
        lo, hi = m * math.pi, (m + 1) * math.pi
        pk = lo + peak_off

        def g(th, lo=lo):
            return abs(math.sin(th)) - a * th if th != lo else -a * th

        gp = g(pk)
        if gp > 0:
            if m > 0:
                roots.append(optimize.brentq(g, lo, pk, xtol=1e-15, rtol=1e-15))
            roots.append(optimize.brentq(g, pk, hi, xtol=1e-15, rtol=1e-15))
        elif gp == 0:
            roots.append(pk)
        m += 1
    return [2.0 * r for r in roots]


def dispersion_roots_scan(c: float, step: float = 1e-3) -> list[float]:
    """Oracle: sign changes of c^2 xi^2 - 2 (1 - cos xi) on a uniform xi grid,
    refined by bisection."""
    a = abs(float(c))
    if a >= 1:
        return []
    xmax = 2.0 / a + step
    xs = np.arange(step, xmax + step, step)
    f = a * a * xs * xs - 2.0 * (1.0 - np.cos(xs))
    idx = np.nonzero(np.sign(f[:-1]) * np.sign(f[1:]) < 0)[0]
    h = lambda x: a * a * x * x - 2.0 * (1.0 - math.cos(x))
    out = []
    for i in idx:
        lo, hi = xs[i], xs[i + 1]
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if np.sign(h(mid)) == np.sign(h(lo)):
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-15:
                break
        out.append(0.5 * (lo + hi))
    return out


def traveling_residual(x: np.ndarray, phi: np.ndarray, c: float, p: PotentialSpec) -> float:
    """max over grid points with x +/- 1 inside the grid of
    |c^2 phi'' - W'(phi(x+1) - phi(x)) + W'(phi(x) - phi(x-1))|."""
    x = np.asarray(x, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if x.shape != phi.shape or x.ndim != 1 or x.size < 3:
        raise ValueError("x and phi must be 1-D arrays of equal length >= 3")
    h = x[1] - x[0]
    if not np.allclose(np.diff(x), h, rtol=1e-9, atol=0):
        raise ValueError("grid must be uniform")
    if h > 0.1:
        raise ValueError("grid spacing must be <= 0.1")
    inner = (x - 1 >= x[0] - 1e-12) & (x + 1 <= x[-1] + 1e-12)
    inner[0] = inner[-1] = False
    if not np.any(inner):
        raise ValueError("grid too short to evaluate x +/- 1")
    xi = x[inner]
    ph = phi[inner]
    ip = np.interp(xi + 1, x, phi)
    im = np.interp(xi - 1, x, phi)
    d2 = (phi[2:] - 2 * phi[1:-1] + phi[:-2]) / (h * h)
    d2 = d2[inner[1:-1]]
    res = c * c * d2 - p.dW(ip - ph) + p.dW(ph - im)
    return float(np.max(np.abs(res)))


def obstruction_rows(p: PotentialSpec, pairs) -> list[dict]:
    out = []
    for ul, ur in pairs:
        r = obstruction_report(p, ul, ur)
        out.append({"u_l": r.u_l, "u_r": r.u_r, "c2": r.c_squared, "R": r.residual})
    return out


def dispersion_rows(cs) -> list[dict]:
    return [
        {"c": float(c), "root_index": i, "xi": xi}
        for c in cs
        for i, xi in enumerate(dispersion_roots(c))
    ]
