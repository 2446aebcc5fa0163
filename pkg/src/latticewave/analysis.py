"""Discrete-to-continuum comparison and diagnostics.

Interpolated fields of a chain state (k = floor(N x), theta = N x - k)::

    phiN   = ((1 - theta) X_k + theta X_{k+1}) / N
    dx_phiN = U_k
    zetaN  = (1 - theta) V_k + theta V_{k+1}      (d_tau phiN)
    xiN    = V_k

All fields are extended by constants outside [-1, 1].
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import integrate

from .continuum import WaveFan
from .integrator import IntegratorParams, Trajectory, steps_for
from .lattice import DIRICHLET, ChainState, InitialData
from .potentials import PotentialSpec

__all__ = [
    "FIELD_KINDS",
    "sample_field",
    "TrajectoryField",
    "FanField",
    "sup_comparison",
    "norms",
    "ConeReport",
    "light_cone_experiment",
    "gronwall_u_bound",
    "gronwall_v_bound",
    "oscillation_amplitude",
    "Histogram",
    "young_histogram",
    "tv_distance",
    "BoundReport",
    "bound_monitor",
    "integral_identity_residual",
    "identity_sides",
    "histogram_of",
    "d_compatibility",
    "DiagnosticsReport",
]

FIELD_KINDS = ("phiN", "dx_phiN", "zetaN", "xiN")


def _cells(N: int, x):
    x = np.clip(np.asarray(x, dtype=float), -1.0, 1.0)
    k = np.floor(N * x).astype(np.int64)
    theta = N * x - k
    # x = 1 belongs to the last cell with theta = 1
    last = k >= N
    k = np.where(last, N - 1, k)
    theta = np.where(last, 1.0, theta)
    return k, theta


def sample_field(s: ChainState, kind: str, x):
    """Evaluate one of the interpolated fields of ``s`` at x (scalar or array)."""
    if kind not in FIELD_KINDS:
        raise ValueError(f"unknown field kind {kind!r}; expected one of {FIELD_KINDS}")
    scalar = np.ndim(x) == 0
    N = s.N
    k, th = _cells(N, x)
    i = k + N  # array slot
    if kind == "dx_phiN":
        out = s.U[i]
    elif kind == "phiN":
        X = s.positions()
        if s.boundary != DIRICHLET:
            X = np.append(X, X[-1] + s.U[-1])
        out = ((1.0 - th) * X[i] + th * X[i + 1]) / N
    else:
        V = s.V if s.boundary == DIRICHLET else np.append(s.V, s.V[0])
        if kind == "zetaN":
            out = (1.0 - th) * V[i] + th * V[i + 1]
        else:
            out = np.where(th >= 1.0, V[i + 1], V[i])
    return float(out) if scalar else np.asarray(out, dtype=float)


class TrajectoryField:
    """Adapter exposing a trajectory as fields at its snapshot times."""

    def __init__(self, traj: Trajectory):
        self.traj = traj

    def _state(self, tau: float) -> ChainState:
        best = min(self.traj.snapshots, key=lambda rs: abs(rs[1].t / rs[1].N - tau))
        s = best[1]
        if abs(s.t / s.N - tau) > 1e-9 + self.traj.dt / s.N:
            raise KeyError(f"no snapshot near tau={tau}")
        return s

    def fields(self, tau, x):
        s = self._state(tau)
        return sample_field(s, "dx_phiN", x), sample_field(s, "zetaN", x)

    def phi(self, tau, x):
        return sample_field(self._state(tau), "phiN", x)


class FanField:
    """Adapter for a WaveFan with a fixed left-wall anchor phi_l."""

    def __init__(self, fan: WaveFan, phi_l: float):
        self.fan = fan
        self.phi_l = float(phi_l)

    def fields(self, tau, x):
        return self.fan.fields(tau, x)

    def phi(self, tau, x):
        return self.fan.phi(tau, x, self.phi_l)


def _as_exact(exact, phi_l):
    if isinstance(exact, WaveFan):
        return FanField(exact, phi_l)
    return exact


def sup_comparison(traj: Trajectory, exact, tau: float, phi_l: Optional[float] = None) -> tuple[float, float]:
    """(sup_j |X_j / N - phi(tau, j/N)|, sup_j |V_j - d_tau phi(tau, j/N)|).

    ``exact`` is a WaveFan (anchored at ``phi_l``, default the chain's left
    wall) or any object with ``fields`` and ``phi``. The exact solution is
    evaluated at the snapshot's actual time.
    """
    s = traj.snapshot_at(tau)
    N = s.N
    if phi_l is None:
        phi_l = traj.initial.x_anchor / N
    ex = _as_exact(exact, phi_l)
    t = s.t / N
    X = s.positions()
    j = np.arange(-N, -N + X.size)
    xj = j / N
    ph = np.asarray(ex.phi(t, xj), dtype=float)
    _, v = ex.fields(t, xj)
    V = s.V[: X.size]
    return float(np.max(np.abs(X / N - ph))), float(np.max(np.abs(V - v)))


def norms(field_a, field_b, taus: Sequence[float], N: int, per_cell: int = 4) -> dict:
    """L2 and H1 distances over [taus[0], taus[-1]] x [-1, 1].

    Midpoint rule on ``per_cell`` sub-points per lattice cell in x (so cell
    values of dx_phiN are integrated exactly), trapezoid in tau. H1 adds the
    d_x and d_tau (zetaN) differences.
    """
    taus = np.asarray(taus, dtype=float)
    m = 2 * N * per_cell
    h = 2.0 / m
    xs = -1.0 + h * (np.arange(m) + 0.5)
    l2 = np.empty(taus.size)
    dx2 = np.empty(taus.size)
    dt2 = np.empty(taus.size)
    for n, t in enumerate(taus):
        ua, va = field_a.fields(t, xs)
        ub, vb = field_b.fields(t, xs)
        pa = np.asarray(field_a.phi(t, xs))
        pb = np.asarray(field_b.phi(t, xs))
        l2[n] = h * np.sum((pa - pb) ** 2)
        dx2[n] = h * np.sum((ua - ub) ** 2)
        dt2[n] = h * np.sum((va - vb) ** 2)
    if taus.size == 1:
        L2 = math.sqrt(l2[0])
        H1 = math.sqrt(l2[0] + dx2[0] + dt2[0])
    else:
        L2 = math.sqrt(integrate.trapezoid(l2, taus))
        H1 = math.sqrt(integrate.trapezoid(l2 + dx2 + dt2, taus))
    return {"L2": L2, "H1": H1, "L2_dx": math.sqrt(integrate.trapezoid(dx2, taus)) if taus.size > 1 else math.sqrt(dx2[0])}


# -- light cone ---------------------------------------------------------------

def _log_factorial(n):
    return math.lgamma(n + 1)


def gronwall_u_bound(M, K: float, j: int, t: float) -> np.longdouble:
    """M (2 t sqrt K)^(2j) / (2j)! exp(2 t sqrt K), in long double."""
    a = 2.0 * t * math.sqrt(K)
    if j == 0:
        return np.longdouble(M) * np.exp(np.longdouble(a))
    if a == 0:
        return np.longdouble(0)
    lg = 2 * j * math.log(a) - _log_factorial(2 * j) + a
    return np.longdouble(M) * np.exp(np.longdouble(lg))


def gronwall_v_bound(M, K: float, j: int, t: float) -> np.longdouble:
    a = 2.0 * t * math.sqrt(K)
    if a == 0 or j < 1:
        return np.longdouble(0) if a == 0 else np.longdouble(np.inf)
    l1 = (2 * j + 1) * math.log(a) - _log_factorial(2 * j + 1) + a
    l2 = (2 * j - 1) * math.log(a) - _log_factorial(2 * j - 1) + a
    c = np.longdouble(M) * np.longdouble(math.sqrt(2.0 * K))
    return c * (np.exp(np.longdouble(l1)) + np.exp(np.longdouble(l2)))


@dataclass
class ConeReport:
    N: int
    x: float
    tau: float
    K: float
    c: float
    sup_NU_gap: np.longdouble
    sup_V_gap: np.longdouble
    M: float
    origin: int
    gronwall_margin: list = field(default_factory=list, repr=False)  # (j, t, bound_U, obs_U, bound_V, obs_V)

    @property
    def min_margin_U(self) -> float:
        if not self.gronwall_margin:
            return math.inf
        return float(min(b - o for _, _, b, o, _, _ in self.gronwall_margin))

    @property
    def min_margin_V(self) -> float:
        if not self.gronwall_margin:
            return math.inf
        return float(min(b - o for _, _, _, _, b, o in self.gronwall_margin))

    @property
    def max_ratio_U(self) -> float:
        """max observed / bound over samples with a nonzero bound."""
        r = [o / b for _, _, b, o, _, _ in self.gronwall_margin if b > 0]
        return float(max(r)) if r else 0.0

    def log10_sup_NU(self) -> float:
        v = self.sup_NU_gap
        return float(np.log10(v)) if v > 0 else -math.inf


def light_cone_experiment(
    p: PotentialSpec,
    base: ChainState,
    perturbed: ChainState,
    x: float,
    tau: float,
    params: IntegratorParams,
    origin: Optional[int] = None,
    j_max: int = 40,
    t_max: Optional[float] = None,
    sample_dt: float = 0.1,
) -> ConeReport:
    """Co-integrate ``base`` and the difference ``perturbed - base``.

    The base chain is integrated in double precision; the difference
    (dU, dV) is carried in long double with exact force increments
    W'(U + dU) - W'(U), so super-exponentially small differences far from
    the perturbation stay resolved instead of drowning in roundoff.

    Records N sup |dU_j| and sup |dV_j| over t < N tau, j > N x, and the
    Groenwall bounds on gaps origin + j (1 <= j <= j_max) at times t <= t_max
    sampled every ``sample_dt``; M is the running sup of |dU_origin|.
    """
    if base.N != perturbed.N or base.boundary != perturbed.boundary:
        raise ValueError("base and perturbed must share N and boundary type")
    if base.boundary != DIRICHLET:
        raise ValueError("light-cone experiments use Dirichlet chains")
    if p.needs_x:
        raise ValueError("x-dependent potentials are not supported here")
    N = base.N
    U = np.array(base.U, dtype=float)
    V = np.array(base.V, dtype=float)
    dU = np.asarray(perturbed.U, dtype=np.longdouble) - np.asarray(base.U, dtype=np.longdouble)
    dV = np.asarray(perturbed.V, dtype=np.longdouble) - np.asarray(base.V, dtype=np.longdouble)
    gi = np.arange(-N, N)
    vi = np.arange(-N, N + 1)
    diff_u = np.nonzero(dU != 0)[0]
    diff_v = np.nonzero(dV != 0)[0]
    support = max([gi[i] for i in diff_u] + [vi[i] - 1 for i in diff_v] + [-N])
    if origin is None:
        origin = int(support)
    if support > origin:
        raise ValueError(f"perturbation reaches gap {support} beyond origin {origin}")
    jx = math.floor(N * x)  # region j > N x
    if jx < support:
        raise ValueError("perturbation support intersects the region j > N x")
    cone_u = gi > N * x
    cone_v = vi > N * x
    dt = params.dt
    n_cone = steps_for(N, tau, dt)
    if t_max is None:
        t_max = 0.0
    n_gron = steps_for(1, t_max, dt) if t_max > 0 else 0
    n_total = max(n_cone, n_gron)
    every = max(1, int(round(sample_dt / dt)))
    js = np.arange(1, j_max + 1)
    gslots = origin + js + N
    gslots = gslots[gslots < 2 * N]
    vslots = origin + js + N  # V index j + origin -> slot origin + j + N
    vslots = vslots[vslots < 2 * N + 1]

    lo = min(float(np.min(U)), float(np.min(np.asarray(U + dU, dtype=float))))
    hi = max(float(np.max(U)), float(np.max(np.asarray(U + dU, dtype=float))))
    sup_u = np.longdouble(0)
    sup_v = np.longdouble(0)
    M = float(abs(dU[origin + N]))
    samples = []
    h = 0.5 * dt

    def drift(step):
        nonlocal U, dU
        U[:] += step * (V[1:] - V[:-1])
        dU += np.longdouble(step) * (dV[1:] - dV[:-1])

    def record_cone():
        nonlocal sup_u, sup_v
        a = np.max(np.abs(dU[cone_u])) if np.any(cone_u) else np.longdouble(0)
        b = np.max(np.abs(dV[cone_v])) if np.any(cone_v) else np.longdouble(0)
        sup_u = max(sup_u, a)
        sup_v = max(sup_v, b)

    def record_hull():
        nonlocal lo, hi
        pert = np.asarray(U + dU, dtype=float)
        lo = min(lo, float(np.min(U)), float(np.min(pert)))
        hi = max(hi, float(np.max(U)), float(np.max(pert)))

    raw = []
    record_cone()
    if n_gron:
        raw.append((0.0, np.abs(dU[gslots]).copy(), np.abs(dV[vslots]).copy()))
    for n in range(n_total):
        drift(h)
        F = p.dW(U)
        dF = np.asarray(p.dW_increment(U, dU), dtype=np.longdouble)
        V[1:-1] += dt * (F[1:] - F[:-1])
        dV[1:-1] += np.longdouble(dt) * (dF[1:] - dF[:-1])
        drift(h)
        M = max(M, float(abs(dU[origin + N])))
        k = n + 1
        if k < n_cone:  # t < N tau
            record_cone()
        if k % every == 0 or k == n_total:
            record_hull()
            if k <= n_gron:
                raw.append((k * dt, np.abs(dU[gslots]).copy(), np.abs(dV[vslots]).copy()))
    if not np.all(np.isfinite(U)):
        raise RuntimeError("non-finite state in light-cone run")
    record_hull()
    d2 = np.asarray(p.d2W(np.linspace(lo, hi, 513)), dtype=float)
    K = float(np.max(np.abs(d2)))
    margins = []
    for t, au, av in raw:
        for n_j, j in enumerate(js[: au.size]):
            bu = gronwall_u_bound(M, K, int(j), t)
            bv = gronwall_v_bound(M, K, int(j), t) if n_j < av.size else np.longdouble(np.inf)
            ov = av[n_j] if n_j < av.size else np.longdouble(0)
            margins.append((int(j), t, bu, au[n_j], bv, ov))
    return ConeReport(
        N=N, x=float(x), tau=float(tau), K=K, c=math.exp(2.0) * math.sqrt(K),
        sup_NU_gap=np.longdouble(N) * sup_u, sup_V_gap=sup_v, M=M, origin=int(origin),
        gronwall_margin=margins,
    )


# -- oscillation diagnostics -------------------------------------------------

def oscillation_amplitude(s: ChainState, window: Sequence[float]) -> dict:
    """Mean-removed peak-to-peak of U_j over cells j/N in [a, b) and the
    dominant wavelength in cells from the zero-crossing count."""
    a, b = float(window[0]), float(window[1])
    N = s.N
    j = np.arange(-N, N)
    m = (j / N >= a) & (j / N < b)
    if np.count_nonzero(m) < 8:
        raise ValueError("oscillation window holds fewer than 8 cells")
    u = s.U[m] - np.mean(s.U[m])
    ptp = float(np.max(u) - np.min(u))
    sgn = np.sign(u)
    sgn = sgn[sgn != 0]
    crossings = int(np.count_nonzero(sgn[1:] != sgn[:-1]))
    wl = 2.0 * u.size / crossings if crossings else math.inf
    return {"peak_to_peak": ptp, "dominant_wavelength_cells": wl, "cells": int(u.size)}


@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray
    weights: np.ndarray  # sums to 1
    samples: int
    quartiles: tuple

    @property
    def iqr(self) -> float:
        return self.quartiles[2] - self.quartiles[0]

    def occupied_bins(self) -> int:
        return int(np.count_nonzero(self.weights))


def young_histogram(
    traj: Trajectory,
    region: Sequence[float],
    bins: int = 50,
    value_range: Optional[Sequence[float]] = None,
    min_samples: int = 100,
) -> Histogram:
    """Normalized histogram of U_{k(x)} over snapshots with tau in
    [region[0], region[1]] and cells with x in [region[2], region[3])."""
    t0, t1, x0, x1 = (float(r) for r in region)
    vals = []
    for _, s in traj.snapshots:
        tt = s.t / s.N
        if tt < t0 - 1e-12 or tt > t1 + 1e-12:
            continue
        j = np.arange(-s.N, s.N) / s.N
        vals.append(s.U[(j >= x0) & (j < x1)])
    data = np.concatenate(vals) if vals else np.empty(0)
    return histogram_of(data, bins, value_range, min_samples)


def histogram_of(data, bins: int = 50, value_range=None, min_samples: int = 100) -> Histogram:
    data = np.asarray(data, dtype=float)
    if data.size < min_samples:
        raise ValueError(f"region holds {data.size} samples, need at least {min_samples}")
    if value_range is None:
        lo, hi = float(np.min(data)), float(np.max(data))
        if hi == lo:
            lo, hi = lo - 0.5, hi + 0.5
        value_range = (lo, hi)
    counts, edges = np.histogram(data, bins=bins, range=tuple(value_range))
    w = counts / max(1, counts.sum())
    q = tuple(float(v) for v in np.percentile(data, [25, 50, 75]))
    return Histogram(edges, w, int(data.size), q)


def tv_distance(a: Histogram, b: Histogram) -> float:
    if a.edges.shape != b.edges.shape or not np.allclose(a.edges, b.edges):
        raise ValueError("histograms must share bin edges")
    return 0.5 * float(np.sum(np.abs(a.weights - b.weights)))


@dataclass(frozen=True)
class BoundReport:
    u_min: float
    u_max: float
    over_time: np.ndarray  # columns t, running min, running max

    @property
    def width(self) -> float:
        return self.u_max - self.u_min


def bound_monitor(traj: Trajectory) -> BoundReport:
    """Running gap hull over every kick of the run (integrator cadence)."""
    gb = traj.gap_bounds
    if gb.size == 0:
        lo = min(float(np.min(s.U)) for _, s in traj.snapshots)
        hi = max(float(np.max(s.U)) for _, s in traj.snapshots)
        return BoundReport(lo, hi, gb)
    return BoundReport(float(np.min(gb[:, 1])), float(np.max(gb[:, 2])), gb)


def identity_sides(traj: Trajectory, p: PotentialSpec, T: float) -> tuple[float, float]:
    """Both sides of the summed discrete identity, trapezoid in tau over the
    snapshots with tau <= T:

        (1/N) sum_k int (T - tau) [W'(U_k) - W'(U_{-N})] dtau
        int int (1 - floor(N x)/N) (xiN(tau, x) - xiN(0, x)) dx dtau
    """
    snaps = sorted({s.t: s for _, s in traj.snapshots}.items())
    N = traj.N
    snaps = [s for t, s in snaps if t / N <= T + 1e-12]
    if len(snaps) < 4:
        raise ValueError("integral identity needs at least 4 snapshots in [0, T]")
    if snaps[0].t != traj.initial.t or any(s.boundary != DIRICHLET for s in snaps):
        raise ValueError("identity needs the initial snapshot and a Dirichlet chain")
    if abs(snaps[-1].t / N - T) > 1e-9 + traj.dt / N:
        raise ValueError("last snapshot does not reach T")
    j = np.arange(-N, N)
    wgt = (1.0 - j / N) / N
    V0 = traj.initial.V[: 2 * N]
    taus = np.array([s.t / N for s in snaps])
    lhs = np.empty(taus.size)
    rhs = np.empty(taus.size)
    for n, s in enumerate(snaps):
        F = p.dW(s.U)
        lhs[n] = (T - taus[n]) * math.fsum(F - F[0]) / N
        rhs[n] = math.fsum(wgt * (s.V[: 2 * N] - V0))
    return float(integrate.trapezoid(lhs, taus)), float(integrate.trapezoid(rhs, taus))


def integral_identity_residual(traj: Trajectory, p: PotentialSpec, T: float) -> float:
    a, b = identity_sides(traj, p, T)
    return abs(a - b)


def d_compatibility(traj: Trajectory, data: InitialData, delta: float = 0.05) -> dict:
    """sup over snapshots of |dx_phiN - phi0_x(+-1)| and |d_tau phiN| on the
    boundary bands [-1, -1 + delta] and [1 - delta, 1]."""
    N = traj.N
    ul, ur = data.phi0_x(-1.0), data.phi0_x(1.0)
    j = np.arange(-N, N) / N
    left = j < -1 + delta
    right = j >= 1 - delta
    vj = np.arange(-N, N + 1) / N
    vl = vj <= -1 + delta
    vr = vj >= 1 - delta
    su = sv = 0.0
    for _, s in traj.snapshots:
        su = max(su, float(np.max(np.abs(s.U[left] - ul))), float(np.max(np.abs(s.U[right] - ur))))
        V = s.V if s.V.size == 2 * N + 1 else np.append(s.V, s.V[0])
        sv = max(sv, float(np.max(np.abs(V[vl]))), float(np.max(np.abs(V[vr]))))
    return {"sup_dx": su, "sup_dtau": sv, "delta": delta}


@dataclass
class DiagnosticsReport:
    experiment: str
    rows: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    def add(self, N, quantity: str, value) -> None:
        self.rows.append((self.experiment, N, quantity, value))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["experiment", "N", "quantity", "value"])
            for e, N, q, v in self.rows:
                w.writerow([e, "" if N is None else N, q, _fmt(v)])

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(_jsonable(self.summary), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, np.longdouble):
        return np.format_float_scientific(v, precision=17, unique=False, trim="k")
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return str(v)


def _jsonable(o):
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, np.longdouble):
        return _fmt(o) if (o != 0 and abs(o) < np.finfo(float).tiny) else float(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return _jsonable(o.tolist())
    if isinstance(o, float) and not math.isfinite(o):
        return str(o)
    return o
