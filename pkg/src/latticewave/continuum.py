"""Entropy solution of the p-system Riemann problem

    d_tau u = d_x v,    d_tau v = d_x W'(u)      (u = d_x phi, v = d_tau phi)

and related continuum quantities.

Sign convention: wave speeds stored in a :class:`WaveFan` are physical
(signed) speeds ``s`` in the (tau, x) plane, so a shock sits at x = s tau
with the left state for x < s tau and the right state for x >= s tau. The
jump relations then read ``s [u] = -[v]`` and ``s [v] = -[W'(u)]``; in the
form ``[v] = sigma [u]``, ``[W'] = sigma [v]`` one has ``sigma = -s``.

Characteristic speeds are -sqrt(W'') (family 1) and +sqrt(W'') (family 2).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate, optimize

from .lattice import InitialData, Profile
from .potentials import PotentialSpec

__all__ = [
    "RiemannError",
    "Wave",
    "WaveFan",
    "solve_riemann",
    "eval_fan",
    "continuous_energy",
    "weak_residual",
    "bump_test_function",
    "LinearWaveSolution",
    "c_compatible_time",
]

SHOCK = "shock"
RAREFACTION = "rarefaction"


class RiemannError(RuntimeError):
    pass


@dataclass(frozen=True)
class Wave:
    family: int
    type: str
    u_from: float
    v_from: float
    u_to: float
    v_to: float
    speed_lo: float
    speed_hi: float

    @property
    def speed(self) -> float:
        return self.speed_lo

    def rh_residuals(self, p: PotentialSpec) -> tuple[float, float]:
        """|s [u] + [v]| and |s [v] + [W']| (zero for an exact shock)."""
        s = self.speed_lo
        du = self.u_to - self.u_from
        dv = self.v_to - self.v_from
        dw = float(p.dW(self.u_to) - p.dW(self.u_from))
        return abs(s * du + dv), abs(s * dv + dw)


@dataclass(frozen=True, eq=False)
class WaveFan:
    left: tuple[float, float]
    right: tuple[float, float]
    middle: tuple[float, float]
    waves: tuple
    potential: PotentialSpec = field(repr=False)

    @property
    def is_empty(self) -> bool:
        return not self.waves

    @property
    def shocks(self) -> list:
        return [w for w in self.waves if w.type == SHOCK]

    def max_speed(self) -> float:
        if not self.waves:
            return 0.0
        return max(max(abs(w.speed_lo), abs(w.speed_hi)) for w in self.waves)

    def fields(self, tau, x):
        return eval_fan(self, tau, x)

    def phi(self, tau, x, phi_l: float = 0.0):
        """phi(tau, x) = phi_l + integral of u from -1 to x (exact, piecewise)."""
        x = np.asarray(x, dtype=float)
        if tau <= 0:
            u_l, u_r = self.left[0], self.right[0]
            return phi_l + np.where(x < 0, (x + 1.0) * u_l, u_l + x * u_r)
        G = self._xi_primitive
        return phi_l + tau * (G(x / tau) - G(np.asarray(-1.0 / tau)))

    def rows(self) -> list[dict]:
        return [
            {
                "family": w.family, "type": w.type, "speed_lo": w.speed_lo, "speed_hi": w.speed_hi,
                "u_from": w.u_from, "u_to": w.u_to,
            }
            for w in self.waves
        ]

    # -- self-similar machinery ------------------------------------------------
    def _regions(self):
        """Ordered list of (xi_lo, xi_hi, kind, payload) covering the real line."""
        regs = []
        lo = -math.inf
        state = self.left
        for w in self.waves:
            regs.append((lo, w.speed_lo, "const", state))
            if w.type == RAREFACTION:
                regs.append((w.speed_lo, w.speed_hi, "fan", w))
            lo = w.speed_hi
            state = (w.u_to, w.v_to)
        regs.append((lo, math.inf, "const", state))
        return regs

    def _xi_primitive(self, xi):
        """G(xi) = integral of u over [b0, xi], b0 the first finite region start
        (only differences of G are meaningful)."""
        xi = np.asarray(xi, dtype=float)
        p = self.potential
        regs = self._regions()
        ref = regs[1][0] if len(regs) > 1 else 0.0

        def seg(reg, a, b):
            if reg[2] == "const":
                return reg[3][0] * (b - a)
            return _fan_u_integral(p, reg[3], a, b)

        out = np.empty(xi.shape)
        g_start = 0.0
        for i, reg in enumerate(regs):
            lo, hi = reg[0], reg[1]
            m = (xi >= lo) & (xi < hi) if i < len(regs) - 1 else (xi >= lo)
            if i == 0:
                out[m] = reg[3][0] * (xi[m] - ref)
                continue
            if np.any(m):
                if reg[2] == "const":
                    out[m] = g_start + reg[3][0] * (xi[m] - lo)
                else:
                    out[m] = g_start + np.array([seg(reg, lo, float(t)) for t in xi[m]])
            if math.isfinite(hi):
                g_start += seg(reg, lo, hi)
        return out


def _lambda(p: PotentialSpec, family: int, u):
    c = np.sqrt(np.maximum(np.asarray(p.d2W(u), dtype=float), 0.0))
    return -c if family == 1 else c


def _fan_u_integral(p: PotentialSpec, w: Wave, a: float, b: float) -> float:
    """Integral of u over xi in [a, b] inside rarefaction w, by the change of
    variables xi = lambda(u): [u lambda(u)] -/+ integral sqrt(W'')."""
    ua = float(_fan_invert(p, w, np.array([a]))[0])
    ub = float(_fan_invert(p, w, np.array([b]))[0])
    la = float(_lambda(p, w.family, ua))
    lb = float(_lambda(p, w.family, ub))
    I = p.char_integral(ua, ub)
    return ub * lb - ua * la + (I if w.family == 1 else -I)


def _fan_invert(p: PotentialSpec, w: Wave, xi: np.ndarray) -> np.ndarray:
    """u with lambda_family(u) = xi inside rarefaction w (safeguarded Newton)."""
    xi = np.clip(np.asarray(xi, dtype=float), w.speed_lo, w.speed_hi)
    target = xi * xi
    a = np.full_like(xi, min(w.u_from, w.u_to))
    b = np.full_like(xi, max(w.u_from, w.u_to))
    sgn_a = np.sign(np.asarray(p.d2W(a), dtype=float) - target)
    u = 0.5 * (a + b)
    for _ in range(200):
        f = np.asarray(p.d2W(u), dtype=float) - target
        same = np.sign(f) == sgn_a
        a = np.where(same, u, a)
        b = np.where(same, b, u)
        d3 = p.d3W(u)
        if d3 is not None:
            d3 = np.asarray(d3, dtype=float)
            with np.errstate(divide="ignore", invalid="ignore"):
                newton = u - f / d3
            ok = np.isfinite(newton) & (newton > np.minimum(a, b)) & (newton < np.maximum(a, b))
        else:
            newton = u
            ok = np.zeros_like(u, dtype=bool)
        u_new = np.where(ok, newton, 0.5 * (a + b))
        if np.all(np.abs(u_new - u) <= 4e-16 * (1.0 + np.abs(u))):
            u = u_new
            break
        u = u_new
    # exact endpoints
    u = np.where(xi <= w.speed_lo, w.u_from, u)
    u = np.where(xi >= w.speed_hi, w.u_to, u)
    return u


def _char_int_vec(p: PotentialSpec, u0: float, u: np.ndarray) -> np.ndarray:
    return np.array([p.char_integral(u0, float(uu)) for uu in np.atleast_1d(u)])


def _d3_sign(p: PotentialSpec, lo: float, hi: float, samples: int = 257) -> int:
    us = np.linspace(lo, hi, samples)
    d3 = p.d3W(us)
    if d3 is None:
        d2 = np.asarray(p.d2W(us), dtype=float)
        d3 = np.diff(d2)
        scale = max(1e-300, float(np.max(np.abs(d2)))) * 1e-12
    else:
        d3 = np.asarray(d3, dtype=float)
        scale = 1e-14 * max(1.0, float(np.max(np.abs(d3))))
    if np.all(np.abs(d3) <= scale):
        return 0
    if np.all(d3 >= -scale):
        return 1
    if np.all(d3 <= scale):
        return -1
    raise RiemannError(f"W''' changes sign on [{lo}, {hi}]; the flux is not convex or concave there")


def _shock_branch(p, ua, u):
    dw = p.dW(u) - p.dW(ua)
    return np.sign(u - ua) * np.sqrt(np.maximum(dw * (u - ua), 0.0))


def solve_riemann(p: PotentialSpec, u_l: float, u_r: float, v_l: float = 0.0, v_r: float = 0.0) -> WaveFan:
    """Lax-admissible two-wave solution; the middle state is the root of
    v_1(u) - v_2(u), both wave curves being monotone in u because W'' > 0."""
    if p.needs_x:
        raise RiemannError("x-dependent potentials have no self-similar Riemann solution")
    if u_l == u_r and v_l == v_r:
        return WaveFan((u_l, v_l), (u_r, v_r), (u_l, v_l), (), p)

    sgn = _d3_sign(p, min(u_l, u_r), max(u_l, u_r)) if u_l != u_r else _d3_sign(p, u_l - 1e-3, u_l + 1e-3)

    def admissible(lo, hi):
        if p.domain is not None and (lo < p.domain[0] or hi > p.domain[1]):
            return False
        if np.min(np.asarray(p.d2W(np.linspace(lo, hi, 129)), dtype=float)) <= 0:
            return False
        try:
            return sgn == 0 or hi == lo or _d3_sign(p, lo, hi) == sgn
        except RiemannError:
            return False

    def check_hyperbolic(lo, hi):
        if p.domain is not None and (lo < p.domain[0] or hi > p.domain[1]):
            raise RiemannError(f"wave range [{lo}, {hi}] leaves the potential domain {p.domain}")
        if np.min(np.asarray(p.d2W(np.linspace(lo, hi, 129)), dtype=float)) <= 0:
            raise RiemannError(f"W'' not positive on [{lo}, {hi}] (system not strictly hyperbolic)")

    def extend(a, b, step):
        # move endpoint a away from b, backing off while the range is inadmissible
        for _ in range(60):
            c = a + step
            if admissible(min(b, c), max(b, c)):
                return c
            step *= 0.5
        return a

    def curve1(u):
        shock_side = sgn * (u - u_l) >= 0
        if shock_side or sgn == 0:
            return v_l + float(_shock_branch(p, u_l, u))
        return v_l + p.char_integral(u_l, u)

    def curve2(u):
        shock_side = sgn * (u - u_r) >= 0
        if shock_side or sgn == 0:
            return v_r - float(_shock_branch(p, u_r, u))
        return v_r - p.char_integral(u_r, u)

    def f(u):
        return curve1(u) - curve2(u)

    lo, hi = min(u_l, u_r), max(u_l, u_r)
    width = max(hi - lo, 1e-3 * (1.0 + abs(lo)), abs(v_r - v_l))
    check_hyperbolic(lo, hi)
    for _ in range(80):
        flo, fhi = f(lo), f(hi)
        if flo <= 0.0 <= fhi:
            break
        prev = (lo, hi)
        if flo > 0:
            lo = extend(lo, hi, -width)
        if fhi < 0:
            hi = extend(hi, lo, width)
        if (lo, hi) == prev:
            raise RiemannError(
                f"middle state outside the admissible range around [{lo}, {hi}]: the potential "
                "domain, W'' > 0 and a fixed sign of W''' must hold across the fan")
        width *= 2.0
    else:
        raise RiemannError(f"could not bracket the middle state (last bracket [{lo}, {hi}])")
    if flo == 0.0:
        u_m = lo
    elif fhi == 0.0:
        u_m = hi
    else:
        u_m = optimize.brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    hull_lo, hull_hi = min(u_l, u_r, u_m), max(u_l, u_r, u_m)
    check_hyperbolic(hull_lo, hull_hi)
    if hull_hi > hull_lo and _d3_sign(p, hull_lo, hull_hi) != sgn and sgn != 0:
        raise RiemannError("W''' changes sign across the wave range")
    v_m = curve1(u_m)
    # re-evaluate v_m from the second curve and average the (tiny) discrepancy away
    v_m = 0.5 * (v_m + curve2(u_m))

    waves = []
    tol = 1e-14 * (1.0 + abs(u_m))
    if abs(u_m - u_l) > tol:
        if sgn == 0 or sgn * (u_m - u_l) > 0:
            s = -math.sqrt((float(p.dW(u_m)) - float(p.dW(u_l))) / (u_m - u_l))
            waves.append(Wave(1, SHOCK, u_l, v_l, u_m, v_m, s, s))
        else:
            waves.append(Wave(1, RAREFACTION, u_l, v_l, u_m, v_m,
                              float(_lambda(p, 1, u_l)), float(_lambda(p, 1, u_m))))
    if abs(u_r - u_m) > tol:
        if sgn == 0 or sgn * (u_m - u_r) > 0:
            s = math.sqrt((float(p.dW(u_m)) - float(p.dW(u_r))) / (u_m - u_r))
            waves.append(Wave(2, SHOCK, u_m, v_m, u_r, v_r, s, s))
        else:
            waves.append(Wave(2, RAREFACTION, u_m, v_m, u_r, v_r,
                              float(_lambda(p, 2, u_m)), float(_lambda(p, 2, u_r))))
    return WaveFan((u_l, v_l), (u_r, v_r), (u_m, v_m), tuple(waves), p)


def eval_fan(f: WaveFan, tau: float, x):
    """(u, v) = (d_x phi, d_tau phi) at (tau, x); tau = 0 gives the step data."""
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    u = np.empty_like(x)
    v = np.empty_like(x)
    if tau <= 0:
        left = x < 0
        u[:] = np.where(left, f.left[0], f.right[0])
        v[:] = np.where(left, f.left[1], f.right[1])
    else:
        xi = x / tau
        p = f.potential
        for lo, hi, kind, payload in f._regions():
            m = (xi >= lo) & (xi < hi)
            if not np.any(m):
                continue
            if kind == "const":
                u[m], v[m] = payload
            else:
                w = payload
                uu = _fan_invert(p, w, xi[m])
                sign = 1.0 if w.family == 1 else -1.0
                base_u, base_v = w.u_from, w.v_from
                v[m] = base_v + sign * _char_int_vec(p, base_u, uu)
                u[m] = uu
    if scalar:
        return float(u[0]), float(v[0])
    return u, v


def _energy_density(p, u, v):
    return 0.5 * v * v + p.W(u)


def continuous_energy(f: WaveFan, tau: float, interval: Sequence[float] = (-1.0, 1.0)) -> float:
    """E_C(tau) = integral over [a, b] of v^2/2 + W(u), exact on constant
    regions and adaptive quadrature inside rarefactions."""
    a, b = float(interval[0]), float(interval[1])
    p = f.potential
    if tau <= 0:
        (ul, vl), (ur, vr) = f.left, f.right
        left = max(0.0, min(b, 0.0) - a)
        right = max(0.0, b - max(a, 0.0))
        return float(_energy_density(p, ul, vl) * left + _energy_density(p, ur, vr) * right)
    total = []
    for lo, hi, kind, payload in f._regions():
        xa, xb = max(a, lo * tau), min(b, hi * tau)
        if xb <= xa:
            continue
        if kind == "const":
            total.append(float(_energy_density(p, payload[0], payload[1])) * (xb - xa))
        else:
            def dens(xx):
                uu, vv = eval_fan(f, tau, xx)
                return float(_energy_density(p, uu, vv))

            val, _ = integrate.quad(dens, xa, xb, epsabs=1e-11, epsrel=1e-11, limit=200)
            total.append(val)
    return math.fsum(total)


def c_compatible_time(f: WaveFan, delta: float = 0.05) -> float:
    """Largest T with every wave inside [-1 + delta, 1 - delta] up to T."""
    vmax = f.max_speed()
    return math.inf if vmax == 0 else (1.0 - delta) / vmax


def bump_test_function(T: float, half_width: float = 0.9, power: int = 4):
    """g(tau, x) = b(tau / T) b(x / a), b(s) = (1 - s^2)^k on |s| < 1.

    Compactly supported in ]-inf, T[ x ]-1, 1[ (for a < 1); returns a callable
    giving (g, g_tau, g_x).
    """
    a, k = float(half_width), int(power)
    if not 0 < a < 1:
        raise ValueError("half_width must be in (0, 1)")

    def b(s):
        s = np.asarray(s, dtype=float)
        inside = np.abs(s) < 1
        return np.where(inside, (1 - s * s) ** k, 0.0), np.where(inside, -2 * k * s * (1 - s * s) ** (k - 1), 0.0)

    def g(tau, x):
        bt, dbt = b(np.asarray(tau) / T)
        bx, dbx = b(np.asarray(x) / a)
        return bt * bx, dbt / T * bx, bt * dbx / a

    return g


def weak_residual(
    taus: np.ndarray,
    xs: np.ndarray,
    u: np.ndarray,
    v: np.ndarray,
    p: PotentialSpec,
    g: Callable,
    phi0_x: Callable,
    phi0_tau: Callable,
) -> tuple[float, float]:
    """Residuals of the two weak-form identities for sampled fields.

    ``u`` and ``v`` have shape (len(taus), len(xs)); the grid must span the
    support of g, which must vanish on the last time row and both x edges.
    """
    taus = np.asarray(taus, dtype=float)
    xs = np.asarray(xs, dtype=float)
    TT, XX = np.meshgrid(taus, xs, indexing="ij")
    gv, gt, gx = g(TT, XX)
    edge = max(np.max(np.abs(gv[-1])), np.max(np.abs(gv[:, 0])), np.max(np.abs(gv[:, -1])))
    if edge > 1e-12:
        raise ValueError("test function support touches tau = T or the x boundary")
    dwu = p.dW(u)
    i1 = integrate.trapezoid(integrate.trapezoid(gx * dwu - gt * v, xs, axis=1), taus)
    i2 = integrate.trapezoid(integrate.trapezoid(gx * v - gt * u, xs, axis=1), taus)
    g0 = gv[0]
    b1 = integrate.trapezoid(g0 * phi0_tau(xs), xs)
    b2 = integrate.trapezoid(g0 * phi0_x(xs), xs)
    return abs(i1 - b1), abs(i2 - b2)


class LinearWaveSolution:
    """d'Alembert solution for W(u) = u^2 / 2 with constantly extended data.

    Valid in [-1, 1] while no wave has reached the walls (C-compatible window).
    """

    def __init__(self, data: InitialData):
        self.data = data
        self.f: Profile = data.phi0_x
        self.g: Profile = data.phi0_tau
        self.phi_l = data.phi_l

    def fields(self, tau, x):
        x = np.asarray(x, dtype=float)
        fp, fm = self.f(x + tau), self.f(x - tau)
        gp, gm = self.g(x + tau), self.g(x - tau)
        return 0.5 * (fp + fm) + 0.5 * (gp - gm), 0.5 * (gp + gm) + 0.5 * (fp - fm)

    def phi(self, tau, x, phi_l: Optional[float] = None):
        phi_l = self.phi_l if phi_l is None else phi_l
        x = np.atleast_1d(np.asarray(x, dtype=float))
        F, G = self.f.primitive, self.g.primitive
        a = -1.0
        val = 0.5 * (F(x + tau) - F(a + tau) + F(x - tau) - F(a - tau))
        val += 0.5 * (G(x + tau) - G(a + tau) - G(x - tau) + G(a - tau))
        return phi_l + val

    def energy(self, tau, samples: int = 4001) -> float:
        xs = np.linspace(-1.0, 1.0, samples)
        u, v = self.fields(tau, xs)
        return float(integrate.trapezoid(0.5 * v * v + 0.5 * u * u, xs))
