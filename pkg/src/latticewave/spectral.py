"""Exact normal-mode solution of the periodic harmonic chain, and the
time-reversal construction of initially bounded data whose gaps grow with N.

Modes are realized by the unitary DFT over the 2N sites; the mode index k
has eigenvalue ``lambda_k = 4 sin^2(k pi / 2N)``. Most work is done in gap
space (U, V), where the evolution diagonalizes with the same eigenvalues.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .lattice import PERIODIC, ChainState, delta_gap_state

__all__ = [
    "ModeBasis",
    "evolve_periodic_linear",
    "evolve_periodic_gaps",
    "delta_gap_evolution",
    "delta_gap_kernel",
    "blowup_construction",
    "DeltaGapResult",
    "BlowupResult",
]


@dataclass(frozen=True)
class ModeBasis:
    N: int

    @property
    def size(self) -> int:
        return 2 * self.N

    @property
    def eigenvalues(self) -> np.ndarray:
        k = np.arange(self.size)
        return 4.0 * np.sin(k * np.pi / (2 * self.N)) ** 2

    @property
    def frequencies(self) -> np.ndarray:
        k = np.arange(self.size)
        return 2.0 * np.abs(np.sin(k * np.pi / (2 * self.N)))

    def omega(self, k: int) -> complex:
        return complex(np.exp(1j * k * np.pi / self.N))

    def mode(self, k: int) -> np.ndarray:
        """Omega_k = (1, w_k, ..., w_k^(2N-1)) / sqrt(2N) over array slots."""
        i = np.arange(self.size)
        return np.exp(1j * k * np.pi * i / self.N) / math.sqrt(self.size)

    @staticmethod
    def inner(y: np.ndarray, z: np.ndarray) -> complex:
        """Hermitian product (Y|Z) = sum_k Y_k conj(Z_k)."""
        return complex(np.sum(np.asarray(y) * np.conj(z)))

    def analysis(self, y: np.ndarray) -> np.ndarray:
        """Coefficients (Y|Omega_k) for every k."""
        return np.fft.fft(np.asarray(y), norm="ortho")

    def synthesis(self, c: np.ndarray) -> np.ndarray:
        return np.fft.ifft(np.asarray(c), norm="ortho")


def evolve_periodic_linear(X0, V0, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Positions and velocities of the periodic harmonic chain at time t.

    Nonzero modes rotate with frequency sqrt(lambda_k); the zero mode drifts
    with the mean velocity.
    """
    X0 = np.asarray(X0, dtype=float)
    V0 = np.asarray(V0, dtype=float)
    if X0.shape != V0.shape or X0.size % 2:
        raise ValueError("X0 and V0 must have the same even length 2N")
    basis = ModeBasis(X0.size // 2)
    w = basis.frequencies
    xh = basis.analysis(X0)
    vh = basis.analysis(V0)
    c, s = np.cos(w * t), np.sin(w * t)
    safe = np.where(w > 0, w, 1.0)
    sinc = np.where(w > 0, s / safe, t)
    xt = xh * c + vh * sinc
    vt = vh * c - xh * w * s
    return basis.synthesis(xt).real, basis.synthesis(vt).real


def evolve_periodic_gaps(U0, V0, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Gaps and velocities of the periodic harmonic chain at time t.

    In mode space dU/dt = (w - 1) V and dV/dt = (1 - conj(w)) U with
    w = exp(i k pi / N).
    """
    U0 = np.asarray(U0, dtype=float)
    V0 = np.asarray(V0, dtype=float)
    if U0.shape != V0.shape or U0.size % 2:
        raise ValueError("U0 and V0 must have the same even length 2N")
    N = U0.size // 2
    k = np.arange(2 * N)
    om = np.exp(1j * k * np.pi / N)
    w = 2.0 * np.abs(np.sin(k * np.pi / (2 * N)))
    uh = np.fft.fft(U0)
    vh = np.fft.fft(V0)
    c, s = np.cos(w * t), np.sin(w * t)
    safe = np.where(w > 0, w, 1.0)
    sinc = np.where(w > 0, s / safe, t)
    ut = uh * c + (om - 1.0) * vh * sinc
    vt = vh * c + (1.0 - np.conj(om)) * uh * sinc
    return np.fft.ifft(ut).real, np.fft.ifft(vt).real


def delta_gap_kernel(N: int, tau: float, k: Optional[np.ndarray] = None) -> np.ndarray:
    """Direct evaluation of U_k(N tau) for delta gap data:

        (1 / 2N) sum_{j=-N}^{N-1} cos(2 N tau sin(j pi / 2N)) exp(i j k pi / N)

    O(N^2); independent of the FFT route. Uses compensated (fsum) summation
    for N >= 4096.
    """
    j = np.arange(-N, N)
    kern = np.cos(2.0 * N * tau * np.sin(j * np.pi / (2 * N)))
    ks = np.arange(-N, N) if k is None else np.atleast_1d(k)
    out = np.empty(ks.size)
    for n, kk in enumerate(ks):
        # kernel is even in j, so only the cosine part survives
        terms = kern * np.cos(j * kk * np.pi / N)
        out[n] = (math.fsum(terms) if N >= 4096 else float(np.sum(terms))) / (2 * N)
    return out


@dataclass(frozen=True)
class DeltaGapResult:
    N: int
    tau0: float
    U: np.ndarray
    V: np.ndarray
    sup_norm: float
    sup_norm_V: float


def delta_gap_evolution(N: int, tau0: float) -> DeltaGapResult:
    """Evolve U_j = delta_j^0, V = 0 exactly to microscopic time N tau0."""
    if tau0 < 0:
        raise ValueError("tau0 must be non-negative")
    s = delta_gap_state(N)
    U, V = evolve_periodic_gaps(s.U, s.V, N * tau0)
    if tau0 == 0:
        U, V = np.array(s.U), np.array(s.V)
    return DeltaGapResult(N, tau0, U, V, float(np.max(np.abs(U))), float(np.max(np.abs(V))))


@dataclass(frozen=True)
class BlowupResult:
    initial: ChainState
    growth_factor: float
    delta: DeltaGapResult


def blowup_construction(N: int, tau0: float) -> BlowupResult:
    """Reversed, rescaled delta-gap evolution.

    U~(0) = K U(N tau0), V~(0) = -K V(N tau0) with
    K = 1 / max(|U(N tau0)|_inf, |V(N tau0)|_inf). Both initial sup norms are
    at most 1 and the harmonic flow reaches U~(N tau0) = K delta.
    """
    d = delta_gap_evolution(N, tau0)
    K = 1.0 / max(d.sup_norm, d.sup_norm_V)
    init = ChainState(N=N, t=0.0, boundary=PERIODIC, U=K * d.U, V=-K * d.V)
    return BlowupResult(init, K, d)
