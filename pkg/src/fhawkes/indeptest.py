"""Chi-square test of mutual independence of the component processes.

Independence holds exactly when the spectral matrix at frequency zero is
diagonal.  Zero itself is never used; instead each entry of ``f2(0)`` is the
intercept of a weighted quadratic regression of low-frequency cross
periodograms on ``omega^2``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate

from .errors import DataError, DomainError, KernelError
from .mlspecial import regularized_upper_gamma
from .simulate import EventLog
from .spectral import FourierFrame, FourierGrid, finite_fourier, mt_from_rule


@dataclass(frozen=True)
class WeightKernel:
    """Symmetric nonnegative weight function on [-1, 1]."""

    name: str
    func: Callable[[np.ndarray], np.ndarray]

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(np.abs(x) <= 1.0, self.func(x), 0.0)

    def validate(self) -> None:
        grid = np.linspace(0.0, 1.0, 201)
        left, right = self(-grid), self(grid)
        if np.any(right < 0) or not np.allclose(left, right, rtol=1e-12, atol=1e-14):
            raise KernelError(f"kernel {self.name!r} must be symmetric and nonnegative")
        if not integrate.quad(lambda t: float(self(t)), 0.0, 1.0)[0] > 0:
            raise KernelError(f"kernel {self.name!r} has zero mass on [0, 1]")


FLAT = WeightKernel("flat", lambda x: np.ones_like(x))
EPANECHNIKOV = WeightKernel("epanechnikov", lambda x: 0.75 * (1.0 - x * x))
KERNELS = {k.name: k for k in (FLAT, EPANECHNIKOV)}


def _moment(K: WeightKernel, power: int) -> float:
    return integrate.quad(lambda x: float(K(x)) * x**power, 0.0, 1.0, epsabs=1e-13, epsrel=1e-13)[0]


def kernel_constant(K: WeightKernel) -> float:
    """``int_0^1 ((H4 - H2 x^2) K(x) / (H4 H0 - H2^2))^2 dx`` with ``H_k = int_0^1 K x^k``."""
    h0, h2, h4 = (_moment(K, k) for k in (0, 2, 4))
    det = h4 * h0 - h2 * h2
    if not det > 1e-12 * max(h0 * h4, 1e-300):
        raise KernelError(f"kernel {K.name!r} is degenerate (H4 H0 - H2^2 = {det:.3g})")
    val, _ = integrate.quad(
        lambda x: ((h4 - h2 * x * x) * float(K(x)) / det) ** 2, 0.0, 1.0, epsabs=1e-12, epsrel=1e-12
    )
    return val


def regression_weights(grid: FourierGrid, M_T: int, K: WeightKernel) -> np.ndarray:
    """``K_delta(w_p) = K(w_p / (2 pi delta)) / (2 pi delta)`` with ``delta = M_T / T``."""
    scale = 2.0 * math.pi * M_T / grid.T
    return K(grid.omegas[:M_T] / scale) / scale


def wls_intercepts(omegas: np.ndarray, y: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Intercepts of weighted fits of ``y[p, ...]`` on ``(1, omega_p^2)``."""
    x2 = omegas**2
    s0, s1, s2 = weights.sum(), (weights * x2).sum(), (weights * x2 * x2).sum()
    det = s0 * s2 - s1 * s1
    if not det > 0:
        raise DataError("regression design is singular")
    t0 = np.tensordot(weights, y, axes=(0, 0))
    t1 = np.tensordot(weights * x2, y, axes=(0, 0))
    return (s2 * t0 - s1 * t1) / det


def intercept_estimates(frame: FourierFrame, M_T: int, K: WeightKernel = FLAT) -> np.ndarray:
    """Symmetric D x D matrix of low-frequency intercepts, an estimate of ``f2(0)``."""
    if not 3 <= M_T <= frame.grid.M:
        raise DomainError(f"need 3 <= M_T <= {frame.grid.M}, got {M_T}")
    J = frame.J[:, :M_T]
    D = frame.D
    w = regression_weights(frame.grid, M_T, K)
    iu, ju = np.triu_indices(D)
    y = (J[iu] * np.conj(J[ju])).real.T  # (M_T, pairs)
    est = wls_intercepts(frame.grid.omegas[:M_T], y, w)
    phi = np.zeros((D, D))
    phi[iu, ju] = est
    phi[ju, iu] = est
    return phi


def independence_statistic(phi_hat, M_T: int, c_K: float, diagonal=None) -> float:
    """``M_T (2 / c_K) sum_{u<v} phi_uv^2 / (phi_uu phi_vv)``.

    ``diagonal`` replaces the plug-in ``phi_uu`` with known values.
    """
    phi = np.asarray(phi_hat, dtype=float)
    diag = np.diag(phi) if diagonal is None else np.asarray(diagonal, dtype=float)
    if not np.all(diag > 0):
        raise DataError(f"diagonal intercepts must be positive, got {diag}")
    iu, ju = np.triu_indices(phi.shape[0], k=1)
    return float(M_T * (2.0 / c_K) * np.sum(phi[iu, ju] ** 2 / (diag[iu] * diag[ju])))


def chi_square_sf(x: float, k: int) -> float:
    """Upper tail probability of the chi-square law with ``k`` degrees of freedom."""
    if k < 1:
        raise DomainError("degrees of freedom must be positive")
    if x < 0:
        raise DomainError("chi-square argument must be nonnegative")
    return regularized_upper_gamma(0.5 * k, 0.5 * x)


@dataclass(frozen=True, eq=False)
class IndependenceReport:
    phi_hat: np.ndarray
    M_T: int
    delta_T: float
    c_K: float
    statistic: float
    df: int
    p_value: float
    kernel: str

    def to_dict(self) -> dict:
        return {
            "phi_hat": self.phi_hat.tolist(),
            "M_T": self.M_T,
            "delta_T": self.delta_T,
            "c_K": self.c_K,
            "statistic": self.statistic,
            "df": self.df,
            "p_value": self.p_value,
            "kernel": self.kernel,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def run_independence_test(log: EventLog, mt_rule="10sqrtT", K: WeightKernel = FLAT,
                          diagonal=None) -> IndependenceReport:
    if log.D < 2:
        raise DataError("need D >= 2 marks for an independence test")
    M = mt_from_rule(mt_rule, log.T)
    frame = finite_fourier(log, FourierGrid(log.T, M))
    phi = intercept_estimates(frame, M, K)
    cK = kernel_constant(K)
    stat = independence_statistic(phi, M, cK, diagonal)
    df = log.D * (log.D - 1) // 2
    return IndependenceReport(phi, M, M / log.T, cK, stat, df, chi_square_sf(stat, df), K.name)
