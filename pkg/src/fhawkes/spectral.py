"""Finite Fourier transform of event data and the spectral empirical process."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numba
import numpy as np

from .errors import ContractError, DomainError, ShapeError
from .simulate import EventLog

# The bundled TBB is too old for numba; skip the warning it would emit.
numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

ANCHOR = 512

MT_RULES = ("2T", "TlogT", "10sqrtT")


def mt_from_rule(rule, T: float) -> int:
    """Number of Fourier frequencies for a rule name or a fixed integer."""
    if isinstance(rule, (int, np.integer)) or (isinstance(rule, str) and rule.isdigit()):
        m = int(rule)
    elif rule == "2T":
        m = math.floor(2.0 * T)
    elif rule == "TlogT":
        m = math.floor(T * math.log(T))
    elif rule == "10sqrtT":
        m = math.floor(10.0 * math.sqrt(T))
    else:
        raise DomainError(f"unknown M_T rule {rule!r}; expected an integer or one of {MT_RULES}")
    if m < 1:
        raise DomainError(f"M_T rule {rule!r} gives {m} frequencies at T={T}")
    return m


@dataclass(frozen=True)
class FourierGrid:
    """Fourier frequencies ``2 pi p / T`` for ``p = 1..M``."""

    T: float
    M: int

    def __post_init__(self):
        if not self.T > 0:
            raise DomainError("T must be positive")
        if int(self.M) != self.M or self.M < 1:
            raise DomainError(f"M must be a positive integer, got {self.M}")
        object.__setattr__(self, "M", int(self.M))

    @property
    def omegas(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(1, self.M + 1) / self.T

    @property
    def L(self) -> float:
        return self.M / self.T


@dataclass(frozen=True, eq=False)
class FourierFrame:
    """``J[j, p-1] = J_T^j(omega_p)`` for marks ``j`` and grid frequencies ``p``."""

    grid: FourierGrid
    J: np.ndarray

    @property
    def D(self) -> int:
        return self.J.shape[0]

    @property
    def T(self) -> float:
        return self.grid.T

    def to_csv(self, path) -> None:
        """Rows ``p,omega,mark,re,im`` with 1-based p and mark."""
        om = self.grid.omegas.tolist()
        with open(path, "w") as fh:
            fh.write("p,omega,mark,re,im\n")
            for p in range(self.grid.M):
                for j in range(self.D):
                    z = complex(self.J[j, p])
                    fh.write(f"{p + 1},{om[p]!r},{j + 1},{z.real!r},{z.imag!r}\n")


@numba.njit(parallel=True, cache=True)
def _fft_blocks(times, marks, D, T, M, anchor):
    J = np.zeros((D, M), dtype=np.complex128)
    nblocks = (M + anchor - 1) // anchor
    base = 2.0 * np.pi / T
    for b in numba.prange(nblocks):
        p0 = b * anchor
        p1 = min(M, p0 + anchor)
        for k in range(times.size):
            t = times[k]
            j = marks[k]
            ang = -base * t
            step = complex(math.cos(ang), math.sin(ang))
            a0 = ang * (p0 + 1)
            phase = complex(math.cos(a0), math.sin(a0))
            for p in range(p0, p1):
                J[j, p] += phase
                phase *= step
    return J


def finite_fourier(log: EventLog, grid: FourierGrid) -> FourierFrame:
    """``J_T^j(w_p) = T^-1/2 sum_{marks j} exp(-i w_p t)`` on the whole grid."""
    if log.T != grid.T:
        raise ShapeError(f"log horizon {log.T} differs from grid horizon {grid.T}")
    if len(log) == 0:
        return FourierFrame(grid, np.zeros((log.D, grid.M), dtype=complex))
    J = _fft_blocks(log.times, log.marks - 1, log.D, grid.T, grid.M, ANCHOR)
    return FourierFrame(grid, J / math.sqrt(grid.T))


def fourier_at(log: EventLog, omegas) -> np.ndarray:
    """Direct evaluation at arbitrary frequencies, shape (D, len(omegas))."""
    w = np.atleast_1d(np.asarray(omegas, dtype=float))
    out = np.zeros((log.D, w.size), dtype=complex)
    for j in range(log.D):
        t = log.select(j + 1)
        if t.size:
            out[j] = np.exp(-1j * np.outer(w, t)).sum(axis=1)
    return out / math.sqrt(log.T)


def _phi_values(frame: FourierFrame, phi) -> np.ndarray:
    D, M = frame.D, frame.grid.M
    if callable(phi):
        vals = np.array([np.asarray(phi(w), dtype=complex).reshape(D, D) for w in frame.grid.omegas])
    else:
        vals = np.asarray(phi, dtype=complex)
        if vals.shape == (D, D):
            vals = np.broadcast_to(vals, (M, D, D))
    if vals.shape != (M, D, D):
        raise ShapeError(f"phi must give {D}x{D} matrices on {M} frequencies, got {vals.shape}")
    return vals


def quadratic_forms(frame: FourierFrame, phi_values: np.ndarray) -> np.ndarray:
    """``J(w_p)^H Phi_p J(w_p)`` for each p (complex)."""
    Jt = frame.J.T
    return np.einsum("pi,pij,pj->p", np.conj(Jt), phi_values, Jt)


def spectral_empirical(frame: FourierFrame, phi: Callable | np.ndarray, tol: float = 1e-10) -> float:
    """``A_T(Phi) = (1/T) sum_p J^H(w_p) Phi(w_p) J(w_p)``.

    ``phi`` is a callable ``omega -> (D, D)`` or precomputed values of shape
    (M, D, D) or (D, D).  Each matrix must be Hermitian.
    """
    vals = _phi_values(frame, phi)
    skew = np.max(np.abs(vals - np.conj(np.swapaxes(vals, 1, 2))), initial=0.0)
    scale = max(np.max(np.abs(vals), initial=0.0), 1.0)
    if skew > tol * scale:
        raise ContractError(f"Phi is not Hermitian (max deviation {skew:.3g})")
    total = quadratic_forms(frame, vals).sum() / frame.T
    if abs(total.imag) > tol * max(abs(total.real), 1.0):
        raise ContractError(f"quadratic form has imaginary part {total.imag:.3g}")
    return float(total.real)


def periodogram_cross(frame: FourierFrame, p: int, u: int, v: int) -> complex:
    """``J^u(w_p) conj(J^v(w_p))`` with 1-based ``p``, ``u`` and ``v``."""
    if not (1 <= p <= frame.grid.M and 1 <= u <= frame.D and 1 <= v <= frame.D):
        raise IndexError(f"(p, u, v) = ({p}, {u}, {v}) out of range")
    return complex(frame.J[u - 1, p - 1] * np.conj(frame.J[v - 1, p - 1]))


def periodogram_matrix(frame: FourierFrame) -> np.ndarray:
    """All cross-periodograms, shape (M, D, D)."""
    Jt = frame.J.T
    return Jt[:, :, None] * np.conj(Jt[:, None, :])
