"""Macroscopic initial profiles and their microscopic chain states.

Index conventions (size parameter N):

* gaps ``U_j = X_{j+1} - X_j`` for j in [-N, N-1]  -> array of length 2N,
  array slot ``i`` holds ``j = i - N``;
* Dirichlet velocities ``V_j`` for j in [-N, N] (length 2N+1), with the two
  wall velocities clamped to zero;
* periodic velocities ``V_j`` for j in [-N, N-1] (length 2N), cyclic.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate

__all__ = [
    "DIRICHLET",
    "PERIODIC",
    "Piece",
    "Profile",
    "InitialData",
    "ChainState",
    "build_riemann",
    "build_boundary_riemann",
    "discretize",
    "delta_gap_state",
    "gap_sum_defect",
    "smooth_ramp",
    "bump",
]

DIRICHLET = "dirichlet"
PERIODIC = "periodic"
_BOUNDARIES = (DIRICHLET, PERIODIC)


@dataclass(frozen=True)
class Piece:
    """A continuous closed-form function on [x0, x1].

    ``primitive`` (optional) is an exact antiderivative; when absent one is
    tabulated numerically on first use.
    """

    x0: float
    x1: float
    f: Callable
    primitive: Optional[Callable] = None
    label: str = ""

    def __call__(self, x):
        return self.f(x)

    def integral(self, a: Optional[float] = None, b: Optional[float] = None) -> float:
        a = self.x0 if a is None else a
        b = self.x1 if b is None else b
        if self.primitive is not None:
            return float(self.primitive(b) - self.primitive(a))
        with warnings.catch_warnings():
            # zero-mean pieces trip the roundoff detector at these tolerances
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val, _ = integrate.quad(lambda s: float(self.f(s)), a, b, epsabs=1e-14, epsrel=1e-13, limit=200)
        return val


def _const_piece(x0, x1, c, label="constant"):
    c = float(c)
    return Piece(x0, x1, lambda x: c + 0.0 * np.asarray(x, dtype=float), lambda x: c * np.asarray(x, dtype=float), label)


def _poly_piece(x0, x1, coeffs, label="polynomial"):
    from numpy.polynomial import Polynomial

    p = Polynomial(np.asarray(coeffs, dtype=float))
    P = p.integ()
    return Piece(x0, x1, lambda x: p(np.asarray(x, dtype=float)), lambda x: P(np.asarray(x, dtype=float)), label)


_SAFE_NAMES = {
    name: getattr(np, name)
    for name in ("sin", "cos", "tan", "exp", "log", "sqrt", "tanh", "sinh", "cosh", "arctan", "abs", "pi", "where")
}


def _expr_piece(x0, x1, expression: str):
    code = compile(expression, "<profile expression>", "eval")
    for name in code.co_names:
        if name not in _SAFE_NAMES and name != "x":
            raise ValueError(f"name {name!r} not allowed in profile expression")

    def f(x):
        x = np.asarray(x, dtype=float)
        return np.asarray(eval(code, {"__builtins__": {}}, {**_SAFE_NAMES, "x": x}), dtype=float) + 0.0 * x

    return Piece(x0, x1, f, None, f"expression: {expression}")


@dataclass(frozen=True)
class Profile:
    """Piecewise-continuous function on [-1, 1], extended by constants outside.

    At an interior breakpoint the right-hand piece is used (right limit).
    """

    pieces: tuple
    description: str = ""

    def __post_init__(self):
        pcs = tuple(self.pieces)
        if not pcs:
            raise ValueError("profile needs at least one piece")
        if abs(pcs[0].x0 + 1.0) > 1e-12 or abs(pcs[-1].x1 - 1.0) > 1e-12:
            raise ValueError("profile pieces must cover [-1, 1]")
        for a, b in zip(pcs, pcs[1:]):
            if abs(a.x1 - b.x0) > 1e-12:
                raise ValueError(f"profile pieces are not contiguous at {a.x1} / {b.x0}")
        for p in pcs:
            if not p.x0 < p.x1:
                raise ValueError("empty profile piece")
        object.__setattr__(self, "pieces", pcs)
        object.__setattr__(self, "_breaks", np.array([p.x0 for p in pcs[1:]], dtype=float))

    # -- constructors -------------------------------------------------------
    @classmethod
    def constant(cls, c: float) -> "Profile":
        return cls((_const_piece(-1.0, 1.0, c),), f"constant {c}")

    @classmethod
    def step(cls, left: float, right: float, at: float = 0.0) -> "Profile":
        return cls((_const_piece(-1.0, at, left), _const_piece(at, 1.0, right)), f"step {left}->{right} at {at}")

    @classmethod
    def from_pieces(cls, pieces: Sequence[Piece], description: str = "") -> "Profile":
        return cls(tuple(pieces), description)

    @classmethod
    def from_config(cls, items: Sequence[dict]) -> "Profile":
        """Build from ``[{"interval": [x0, x1], "kind": ..., "params": ...}, ...]``.

        kinds: ``constant`` (params: value), ``linear`` (params: [value at x0,
        value at x1]), ``polynomial`` (params: coefficients in x, lowest degree
        first), ``expression`` (params: numpy expression in ``x``).
        """
        pieces = []
        for item in items:
            x0, x1 = (float(v) for v in item["interval"])
            kind = item["kind"]
            params = item.get("params")
            if kind == "constant":
                value = params[0] if isinstance(params, (list, tuple)) else params
                pieces.append(_const_piece(x0, x1, value))
            elif kind == "linear":
                ya, yb = (float(v) for v in params)
                slope = (yb - ya) / (x1 - x0)
                pieces.append(_poly_piece(x0, x1, [ya - slope * x0, slope], "linear"))
            elif kind == "polynomial":
                pieces.append(_poly_piece(x0, x1, params))
            elif kind == "expression":
                pieces.append(_expr_piece(x0, x1, str(params)))
            else:
                raise ValueError(f"unknown profile piece kind {kind!r}")
        return cls(tuple(pieces), "config")

    # -- evaluation ---------------------------------------------------------
    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        xc = np.clip(x, -1.0, 1.0)
        idx = np.searchsorted(self._breaks, xc, side="right")
        out = np.empty_like(xc)
        for i, piece in enumerate(self.pieces):
            m = idx == i
            if np.any(m):
                out[m] = piece(xc[m])
        return out[()] if out.ndim == 0 else out

    def left_value(self) -> float:
        return float(self.pieces[0](-1.0))

    def right_value(self) -> float:
        return float(self.pieces[-1](1.0))

    def integral(self) -> float:
        return math.fsum(p.integral() for p in self.pieces)

    def primitive(self, x):
        """F(x) = integral of the (constantly extended) profile from -1 to x."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty_like(x)
        cum = [0.0]
        for p in self.pieces:
            cum.append(cum[-1] + p.integral())
        for k, xv in enumerate(x):
            if xv <= -1.0:
                out[k] = (xv + 1.0) * self.left_value()
            elif xv >= 1.0:
                out[k] = cum[-1] + (xv - 1.0) * self.right_value()
            else:
                i = int(np.searchsorted(self._breaks, xv, side="right"))
                p = self.pieces[i]
                out[k] = cum[i] + p.integral(p.x0, xv)
        return out


def _smoothstep(a: float, b: float, x0: float = -0.5, x1: float = 0.5) -> Piece:
    """C^3 polynomial transition from a at x0 to b at x1 (flat derivatives at the ends)."""
    from numpy.polynomial import Polynomial

    # s^4 (35 - 84 s + 70 s^2 - 20 s^3), s = (x - x0) / (x1 - x0)
    s = Polynomial([-x0 / (x1 - x0), 1.0 / (x1 - x0)])
    S = s**4 * (35 - 84 * s + 70 * s**2 - 20 * s**3)
    p = a + (b - a) * S
    P = p.integ()
    return Piece(x0, x1, lambda x: p(np.asarray(x, dtype=float)), lambda x: P(np.asarray(x, dtype=float)), "smoothstep")


@dataclass(frozen=True)
class InitialData:
    phi0_x: Profile
    phi0_tau: Profile
    phi_l: float
    phi_r: float
    boundary: str = DIRICHLET
    whole_line_emulation: bool = False
    description: str = ""

    def __post_init__(self):
        if self.boundary not in _BOUNDARIES:
            raise ValueError(f"boundary must be one of {_BOUNDARIES}")
        if not self.whole_line_emulation:
            defects = self.compatibility_defects()
            bad = {k: v for k, v in defects.items() if v > 1e-10}
            if bad:
                raise ValueError(f"initial data violates boundary compatibility: {bad}")

    def compatibility_defects(self) -> dict:
        if self.boundary == DIRICHLET:
            return {
                "integral_phi0_x": abs(self.phi0_x.integral() - (self.phi_r - self.phi_l)),
                "phi0_tau_left": abs(self.phi0_tau.left_value()),
                "phi0_tau_right": abs(self.phi0_tau.right_value()),
            }
        return {"integral_phi0_tau": abs(self.phi0_tau.integral())}

    def gap_hull(self, samples: int = 2001) -> tuple[float, float]:
        xs = np.linspace(-1.0, 1.0, samples)
        vals = self.phi0_x(xs)
        return float(np.min(vals)), float(np.max(vals))


def build_riemann(u_l: float, u_r: float, v_l: float = 0.0, v_r: float = 0.0) -> InitialData:
    """Step data u_l | u_r, v_l | v_r at x = 0 in the Dirichlet setting.

    phi_l = -u_l and phi_r = u_r, so that phi(0) = 0 and the integral of the
    gap profile equals phi_r - phi_l. Nonzero velocities touch the walls and
    are flagged as whole-line emulation.
    """
    for v in (u_l, u_r, v_l, v_r):
        if not math.isfinite(v):
            raise ValueError("Riemann states must be finite")
    whole_line = v_l != 0.0 or v_r != 0.0
    return InitialData(
        phi0_x=Profile.step(u_l, u_r),
        phi0_tau=Profile.step(v_l, v_r),
        phi_l=-float(u_l),
        phi_r=float(u_r),
        boundary=DIRICHLET,
        whole_line_emulation=whole_line,
        description=f"riemann u=({u_l},{u_r}) v=({v_l},{v_r})",
    )


def build_boundary_riemann(
    u_l: float,
    u_r: float,
    interior_x: Optional[Sequence[Piece]] = None,
    interior_tau: Optional[Sequence[Piece]] = None,
) -> InitialData:
    """u_l on x < -1/2, u_r on x > 1/2, arbitrary interior on [-1/2, 1/2].

    Without an interior gap profile, a linear ramp from u_l to u_r is used;
    the interior velocity defaults to zero.
    """
    def check(pieces):
        pcs = list(pieces)
        if not pcs:
            raise ValueError("empty interior")
        if pcs[0].x0 < -0.5 - 1e-12 or pcs[-1].x1 > 0.5 + 1e-12:
            raise ValueError("interior pieces must lie inside [-1/2, 1/2]")
        if abs(pcs[0].x0 + 0.5) > 1e-12 or abs(pcs[-1].x1 - 0.5) > 1e-12:
            raise ValueError("interior pieces must cover [-1/2, 1/2]")
        return pcs

    if interior_x is None:
        interior_x = [_poly_piece(-0.5, 0.5, [0.5 * (u_l + u_r), u_r - u_l], "linear ramp")]
    if interior_tau is None:
        interior_tau = [_const_piece(-0.5, 0.5, 0.0)]
    px = Profile(
        (_const_piece(-1.0, -0.5, u_l), *check(interior_x), _const_piece(0.5, 1.0, u_r)),
        "boundary riemann gap profile",
    )
    pt = Profile(
        (_const_piece(-1.0, -0.5, 0.0), *check(interior_tau), _const_piece(0.5, 1.0, 0.0)),
        "boundary riemann velocity profile",
    )
    phi_l = -1.0 * px.primitive(0.0)[0]
    phi_r = px.integral() + phi_l
    return InitialData(px, pt, phi_l, phi_r, DIRICHLET, False, f"boundary riemann ({u_l},{u_r})")


def smooth_ramp(u_l: float, u_r: float) -> list[Piece]:
    """Interior pieces for a C^3 ramp u_l -> u_r on [-1/2, 1/2]."""
    return [_smoothstep(u_l, u_r)]


def bump(amplitude: float, width: float = 0.5) -> list[Piece]:
    """Interior pieces for a C^1 cosine bump supported in [-width/2, width/2]."""
    h = 0.5 * width
    pieces = []
    if h < 0.5:
        pieces.append(_const_piece(-0.5, -h, 0.0))

    def f(x, a=amplitude, h=h):
        x = np.asarray(x, dtype=float)
        return 0.5 * a * (1.0 + np.cos(np.pi * x / h))

    def F(x, a=amplitude, h=h):
        x = np.asarray(x, dtype=float)
        return 0.5 * a * (x + h / np.pi * np.sin(np.pi * x / h))

    pieces.append(Piece(-h, h, f, F, "cosine bump"))
    if h < 0.5:
        pieces.append(_const_piece(h, 0.5, 0.0))
    return pieces


@dataclass(frozen=True)
class ChainState:
    """Microscopic state at microscopic time t.

    ``x_anchor`` is the position of particle -N; positions are recovered by
    cumulative sums of the gaps.
    """

    N: int
    t: float
    boundary: str
    U: np.ndarray
    V: np.ndarray
    x_anchor: float = 0.0

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be positive")
        if self.boundary not in _BOUNDARIES:
            raise ValueError(f"boundary must be one of {_BOUNDARIES}")
        U = np.array(self.U, dtype=float)
        V = np.array(self.V, dtype=float)
        nv = 2 * self.N + 1 if self.boundary == DIRICHLET else 2 * self.N
        if U.shape != (2 * self.N,):
            raise ValueError(f"expected {2 * self.N} gaps, got {U.shape}")
        if V.shape != (nv,):
            raise ValueError(f"expected {nv} velocities, got {V.shape}")
        U.setflags(write=False)
        V.setflags(write=False)
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "V", V)

    @property
    def gap_index(self) -> np.ndarray:
        return np.arange(-self.N, self.N)

    @property
    def tau(self) -> float:
        return self.t / self.N

    def positions(self) -> np.ndarray:
        """X_j for j in [-N, N] (Dirichlet) or [-N, N-1] (periodic)."""
        X = self.x_anchor + np.concatenate(([0.0], np.cumsum(self.U)))
        return X if self.boundary == DIRICHLET else X[:-1]

    def Z(self) -> np.ndarray:
        """Z_j = V_{j+1} - V_j = dU_j/dt."""
        if self.boundary == DIRICHLET:
            return self.V[1:] - self.V[:-1]
        return np.roll(self.V, -1) - self.V

    def gap_sum(self) -> float:
        return math.fsum(self.U)

    def is_ordered(self) -> bool:
        return bool(np.all(self.U > 0.0))

    def with_time(self, t: float) -> "ChainState":
        return replace(self, t=t)


def discretize(data: InitialData, N: int) -> ChainState:
    """Sample U_j(0) = phi0_x(j/N) and V_j(0) = phi0_tau(j/N).

    Breakpoints use the right limit. For Dirichlet data the wall velocities
    are clamped to zero and particle -N sits at N * phi_l.
    """
    if N < 2:
        raise ValueError("N must be >= 2")
    j = np.arange(-N, N)
    U = np.asarray(data.phi0_x(j / N), dtype=float)
    if data.boundary == DIRICHLET:
        jv = np.arange(-N, N + 1)
        V = np.asarray(data.phi0_tau(jv / N), dtype=float)
        V[0] = 0.0
        V[-1] = 0.0
    else:
        V = np.asarray(data.phi0_tau(j / N), dtype=float)
    if not (np.all(np.isfinite(U)) and np.all(np.isfinite(V))):
        raise ValueError("profile evaluation produced non-finite values")
    return ChainState(N=N, t=0.0, boundary=data.boundary, U=U, V=V, x_anchor=N * data.phi_l)


def gap_sum_defect(state: ChainState, data: InitialData) -> float:
    """Sum of gaps minus N (phi_r - phi_l); O(1) for sampled smooth profiles."""
    return state.gap_sum() - state.N * (data.phi_r - data.phi_l)


def delta_gap_state(N: int) -> ChainState:
    """Periodic chain with U_j = delta_j^0 and V = 0."""
    U = np.zeros(2 * N)
    U[N] = 1.0
    return ChainState(N=N, t=0.0, boundary=PERIODIC, U=U, V=np.zeros(2 * N))
