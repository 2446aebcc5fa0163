"""Symplectic Verlet integration of the chain in (U, V) variables.

One step of size dt is::

    U_j <- U_j + dt/2 (V_{j+1} - V_j)
    V_j <- V_j + dt (W'(U_j) - W'(U_{j-1}))      interior / cyclic j
    U_j <- U_j + dt/2 (V_{j+1} - V_j)

Since Z_j = V_{j+1} - V_j this is the (U, Z) leapfrog written on velocities.
``run`` fuses the trailing half drift of one step with the leading half drift
of the next between recording points.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .lattice import DIRICHLET, PERIODIC, ChainState
from .potentials import PotentialSpec

__all__ = [
    "IntegratorError",
    "IntegratorParams",
    "Trajectory",
    "auto_dt",
    "step",
    "run",
    "discrete_energy",
    "generalized_energy",
    "steps_for",
]


class IntegratorError(RuntimeError):
    """Non-finite forces, particle inversion, or an unrepresentable step count."""


@dataclass(frozen=True)
class IntegratorParams:
    dt: float
    snapshot_times: Sequence[float] = ()
    ordering_check: bool = False
    energy_every: Optional[int] = None
    track_bounds: bool = True

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        taus = tuple(float(t) for t in self.snapshot_times)
        if any(t < 0 for t in taus):
            raise ValueError("snapshot times must be non-negative")
        object.__setattr__(self, "snapshot_times", tuple(sorted(set(taus))))


@dataclass
class Trajectory:
    """Snapshots are (requested tau, state at the last step boundary <= N tau)."""

    initial: ChainState
    snapshots: list
    energy_series: np.ndarray  # columns: t, tau, E_D
    gap_bounds: np.ndarray  # columns: t, running min U, running max U
    dt: float
    potential: PotentialSpec = field(repr=False, default=None)

    @property
    def N(self) -> int:
        return self.initial.N

    @property
    def taus(self) -> np.ndarray:
        return np.array([s.t / s.N for _, s in self.snapshots])

    def snapshot_at(self, tau: float) -> ChainState:
        for req, s in self.snapshots:
            if math.isclose(req, tau, rel_tol=0, abs_tol=1e-12):
                return s
        raise KeyError(f"no snapshot requested at tau={tau}")

    def final(self) -> ChainState:
        return self.snapshots[-1][1]


def steps_for(N: int, tau: float, dt: float) -> int:
    """Number of whole steps up to microscopic time N tau (last boundary <= N tau)."""
    n = N * tau / dt
    if not math.isfinite(n) or n > 2**53:
        raise IntegratorError(f"step count N*tau/dt = {n} not representable")
    return int(math.floor(n + 1e-9))


def auto_dt(p: PotentialSpec, gap_range: Sequence[float], samples: int = 201, x=None) -> float:
    """min(1e-3, 0.1 / sqrt(max W'' over the gap range))."""
    us = np.linspace(float(gap_range[0]), float(gap_range[1]), samples)
    if p.needs_x:
        xs = np.linspace(-1.0, 1.0, samples)
        uu, xx = np.meshgrid(us, xs)
        k = float(np.max(np.abs(p.d2W(uu, xx))))
    else:
        k = float(np.max(np.abs(p.d2W(us))))
    if k <= 0:
        return 1e-3
    return min(1e-3, 0.1 / math.sqrt(k))


def _x_grid(s: ChainState, p: PotentialSpec):
    return s.gap_index / s.N if p.needs_x else None


def discrete_energy(s: ChainState, p: PotentialSpec) -> float:
    """E_D = (1/2N) sum V_j^2 + (1/N) sum W(U_j) (j in [-N, N-1])."""
    w = p.W(s.U, _x_grid(s, p))
    v = s.V[: 2 * s.N]
    return (0.5 * math.fsum(v * v) + math.fsum(np.atleast_1d(w))) / s.N


def generalized_energy(s: ChainState, p: PotentialSpec) -> float:
    """Unnormalized energy sum_k W(k/N, U_k) + (1/2) sum V_k^2 (= N E_D)."""
    return s.N * discrete_energy(s, p)


class _Stepper:
    """In-place Verlet machinery on work buffers for one chain."""

    def __init__(self, s: ChainState, p: PotentialSpec, dt: float, ordering_check: bool = False):
        self.N = s.N
        self.periodic = s.boundary == PERIODIC
        self.U = np.array(s.U, dtype=float)
        self.V = np.array(s.V, dtype=float)
        self.x_anchor = float(s.x_anchor)
        self.p = p
        self.xg = _x_grid(s, p)
        self.dt = float(dt)
        self.ordering_check = ordering_check
        self.buf = np.empty_like(self.U)
        self.fbuf = np.empty(self.U.size - 1 if not self.periodic else self.U.size)

    def drift(self, h: float):
        U, V, b = self.U, self.V, self.buf
        if self.periodic:
            np.subtract(V[1:], V[:-1], out=b[:-1])
            b[-1] = V[0] - V[-1]
            self.x_anchor += h * V[0]
        else:
            np.subtract(V[1:], V[:-1], out=b)
        b *= h
        U += b

    def kick(self, dt: float):
        U, V = self.U, self.V
        if self.ordering_check and np.min(U) <= 0.0:
            raise IntegratorError("particle inversion: some gap U_j <= 0")
        F = self.p.dW(U, self.xg)
        fb = self.fbuf
        if self.periodic:
            np.subtract(F[1:], F[:-1], out=fb[1:])
            fb[0] = F[0] - F[-1]
            fb *= dt
            V += fb
        else:
            np.subtract(F[1:], F[:-1], out=fb)
            fb *= dt
            V[1:-1] += fb

    def advance(self, nsteps: int, bounds: Optional[list] = None):
        """nsteps fused Verlet steps; optional running [min, max] of the kicked gaps."""
        if nsteps <= 0:
            return
        dt, h = self.dt, 0.5 * self.dt
        self.drift(h)
        for k in range(nsteps):
            if bounds is not None:
                lo = float(np.min(self.U))
                hi = float(np.max(self.U))
                if lo < bounds[0]:
                    bounds[0] = lo
                if hi > bounds[1]:
                    bounds[1] = hi
            self.kick(dt)
            self.drift(h if k == nsteps - 1 else dt)
        if not (math.isfinite(float(np.sum(self.U))) and math.isfinite(float(np.sum(self.V)))):
            raise IntegratorError("non-finite state (potential blow-up or inversion)")

    def state(self, t: float) -> ChainState:
        return ChainState(
            N=self.N, t=t, boundary=PERIODIC if self.periodic else DIRICHLET,
            U=self.U.copy(), V=self.V.copy(), x_anchor=self.x_anchor,
        )


def step(s: ChainState, p: PotentialSpec, dt: float, ordering_check: bool = False) -> ChainState:
    """One unfused Verlet step."""
    st = _Stepper(s, p, dt, ordering_check)
    st.drift(0.5 * dt)
    st.kick(dt)
    st.drift(0.5 * dt)
    return st.state(s.t + dt)


def run(s: ChainState, p: PotentialSpec, params: IntegratorParams, T: float) -> Trajectory:
    """Integrate to microscopic time N T.

    Snapshots land on the last completed step at or before N tau and carry
    the actual time; the initial state is always the first snapshot. The
    energy is sampled every ``energy_every`` steps (default: about 1000
    samples) and the running gap hull is tracked at every kick.
    """
    if T < 0:
        raise ValueError("T must be non-negative")
    N, dt = s.N, params.dt
    n_total = steps_for(N, T, dt)
    snaps = [t for t in params.snapshot_times if t <= T + 1e-12]
    snap_steps = {}
    for tau in snaps:
        snap_steps.setdefault(steps_for(N, tau, dt), []).append(tau)
    every = params.energy_every or max(1, n_total // 1000)
    energy_steps = set(range(0, n_total + 1, every)) | {n_total}
    stops = sorted(set(snap_steps) | energy_steps | {0})

    st = _Stepper(s, p, dt, params.ordering_check)
    lo0, hi0 = float(np.min(s.U)), float(np.max(s.U))
    bounds = [lo0, hi0] if params.track_bounds else None
    snapshots = [(0.0, s)] if 0 not in snap_steps else []
    energy, gb = [], []
    done = 0
    for stop in stops:
        st.advance(stop - done, bounds)
        done = stop
        t = s.t + done * dt
        if done in snap_steps or done in energy_steps:
            cur = st.state(t)
            if bounds is not None:
                bounds[0] = min(bounds[0], float(np.min(cur.U)))
                bounds[1] = max(bounds[1], float(np.max(cur.U)))
            if done in energy_steps:
                energy.append((t, t / N, discrete_energy(cur, p)))
                if bounds is not None:
                    gb.append((t, bounds[0], bounds[1]))
            for tau in snap_steps.get(done, ()):
                snapshots.append((tau, cur))
    return Trajectory(
        initial=s,
        snapshots=snapshots,
        energy_series=np.array(energy, dtype=float).reshape(-1, 3),
        gap_bounds=np.array(gb, dtype=float).reshape(-1, 3),
        dt=dt,
        potential=p,
    )
