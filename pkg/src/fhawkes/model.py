"""Hawkes model container, stationarity, average intensity and the Bartlett spectrum."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigurationError, DomainError, EvaluationError, NonstationaryError, ShapeError
from .mlspecial import MLParams, ml_cdf, ml_density, ml_fourier, ml_sample

EXPONENTIAL = "exponential"
MITTAG_LEFFLER = "mittag-leffler"


@dataclass(frozen=True)
class KernelSpec:
    """Excitation kernel: a probability density on (0, inf).

    ``exponential`` has density ``c exp(-c x)``; ``mittag-leffler`` is the
    Mittag-Leffler law with tail exponent ``beta`` (``beta = 1`` is exponential).
    """

    family: str
    c: float
    beta: float = 1.0

    def __post_init__(self):
        if self.family not in (EXPONENTIAL, MITTAG_LEFFLER):
            raise ConfigurationError(f"unknown kernel family {self.family!r}")
        if not (self.c > 0 and math.isfinite(self.c)):
            raise DomainError(f"kernel rate must be positive, got {self.c}")
        if self.family == EXPONENTIAL and self.beta != 1.0:
            raise ConfigurationError("exponential kernel has no beta parameter")
        if not (0.0 < self.beta <= 1.0):
            raise DomainError(f"beta must lie in (0, 1], got {self.beta}")

    @classmethod
    def exponential(cls, c: float) -> "KernelSpec":
        return cls(EXPONENTIAL, float(c))

    @classmethod
    def mittag_leffler(cls, beta: float, c: float) -> "KernelSpec":
        return cls(MITTAG_LEFFLER, float(c), float(beta))

    @property
    def is_exponential(self) -> bool:
        return self.beta == 1.0

    @property
    def ml_params(self) -> MLParams:
        return MLParams(self.beta, self.c)

    def ft(self, omega):
        if self.is_exponential:
            w = np.asarray(omega, dtype=float)
            out = self.c / (self.c + 1j * w)
            return complex(out) if w.ndim == 0 else out
        return ml_fourier(omega, self.ml_params)

    def density(self, x):
        if self.is_exponential:
            x = np.asarray(x, dtype=float)
            out = np.where(x > 0, self.c * np.exp(-self.c * np.maximum(x, 0.0)), 0.0)
            return float(out) if out.ndim == 0 else out
        return ml_density(x, self.ml_params)

    def cdf(self, x):
        if self.is_exponential:
            x = np.asarray(x, dtype=float)
            out = np.where(x > 0, -np.expm1(-self.c * np.maximum(x, 0.0)), 0.0)
            return float(out) if out.ndim == 0 else out
        return ml_cdf(x, self.ml_params)

    def sample(self, rng: np.random.Generator, size=None):
        if self.is_exponential:
            return rng.standard_exponential(size) / self.c
        return ml_sample(self.ml_params, rng, size)


def kernel_ft(k: KernelSpec, omega):
    """Fourier transform ``int exp(-i w x) g(x) dx`` of a kernel."""
    return k.ft(omega)


def spectral_radius(nu) -> float:
    nu = np.asarray(nu, dtype=float)
    if nu.ndim != 2 or nu.shape[0] != nu.shape[1]:
        raise ShapeError(f"interaction matrix must be square, got shape {nu.shape}")
    return float(np.max(np.abs(np.linalg.eigvals(nu))))


@dataclass(frozen=True, eq=False)
class HawkesModel:
    """Background rates ``mu``, interactions ``nu`` and kernels ``kernels[i][j] = g_ij``.

    ``nu[i, j]`` is the mean number of type-``i`` children of a type-``j`` event.
    """

    mu: np.ndarray
    nu: np.ndarray
    kernels: tuple

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu, dtype=float)).copy()
        nu = np.atleast_2d(np.asarray(self.nu, dtype=float)).copy()
        d = mu.size
        if nu.shape != (d, d):
            raise ShapeError(f"nu must be {d}x{d}, got {nu.shape}")
        kernels = self.kernels
        if isinstance(kernels, KernelSpec):
            kernels = tuple(tuple(kernels for _ in range(d)) for _ in range(d))
        kernels = tuple(tuple(row) for row in kernels)
        if len(kernels) != d or any(len(row) != d for row in kernels):
            raise ShapeError("kernel matrix must be D x D")
        if not np.all(mu > 0) or not np.all(np.isfinite(mu)):
            raise DomainError("background rates must be positive")
        if not np.all(nu >= 0) or not np.all(np.isfinite(nu)):
            raise DomainError("interactions must be nonnegative")
        mu.flags.writeable = False
        nu.flags.writeable = False
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "nu", nu)
        object.__setattr__(self, "kernels", kernels)

    @property
    def D(self) -> int:
        return self.mu.size

    @property
    def spectral_radius(self) -> float:
        return spectral_radius(self.nu)

    @property
    def is_stationary(self) -> bool:
        return self.spectral_radius < 1.0

    def require_stationary(self) -> None:
        rho = self.spectral_radius
        if not rho < 1.0:
            raise NonstationaryError(f"nonstationary model: spectral radius of nu is {rho:.6g} >= 1")

    def to_dict(self) -> dict:
        return {
            "mu": self.mu.tolist(),
            "nu": self.nu.tolist(),
            "kernels": [[{"family": k.family, "c": k.c, "beta": k.beta} for k in row] for row in self.kernels],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "HawkesModel":
        try:
            mu = data["mu"]
            nu = data["nu"]
            raw = data["kernels"]
        except KeyError as exc:
            raise ConfigurationError(f"model is missing key {exc}") from None
        d = len(np.atleast_1d(mu))
        if isinstance(raw, dict):
            raw = [[raw] * d for _ in range(d)]
        kernels = tuple(
            tuple(KernelSpec(k.get("family", MITTAG_LEFFLER), float(k["c"]), float(k.get("beta", 1.0))) for k in row)
            for row in raw
        )
        return cls(np.asarray(mu, float), np.asarray(nu, float), kernels)


def average_intensity(m: HawkesModel) -> np.ndarray:
    """Stationary mean rates ``(I - nu)^-1 mu``."""
    m.require_stationary()
    lam = np.linalg.solve(np.eye(m.D) - m.nu, m.mu)
    return lam


def kernel_ft_matrix(m: HawkesModel, omegas) -> np.ndarray:
    """``nu * G_hat(w)`` for each frequency, shape (M, D, D)."""
    w = np.atleast_1d(np.asarray(omegas, dtype=float))
    out = np.zeros((w.size, m.D, m.D), dtype=complex)
    cache: dict[KernelSpec, np.ndarray] = {}
    for i in range(m.D):
        for j in range(m.D):
            if m.nu[i, j] == 0.0:
                continue
            k = m.kernels[i][j]
            if k not in cache:
                cache[k] = np.asarray(k.ft(w))
            out[:, i, j] = m.nu[i, j] * cache[k]
    return out


def spectral_density(m: HawkesModel, omegas) -> np.ndarray:
    """Bartlett spectral density matrices ``f2(w)`` stacked along the first axis.

    ``f2(w) = (I - nu.G(w))^-1 Diag(lambda) [(I - nu.G(w))^-1]^H``.
    """
    lam = average_intensity(m)
    a = np.eye(m.D)[None, :, :] - kernel_ft_matrix(m, omegas)
    if m.D == 1:
        return (lam[0] / np.abs(a[:, 0, 0]) ** 2)[:, None, None].astype(complex)
    try:
        inv = np.linalg.inv(a)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - cannot happen when rho(nu) < 1
        raise EvaluationError("I - nu.G(w) is singular") from exc
    f2 = (inv * lam[None, None, :]) @ np.conj(np.swapaxes(inv, 1, 2))
    # Exactly Hermitian: the product leaves round-off on the diagonal imaginary parts.
    return 0.5 * (f2 + np.conj(np.swapaxes(f2, 1, 2)))


@dataclass(frozen=True)
class SpectralMatrix:
    omega: float
    values: np.ndarray


def bartlett_spectral_matrix(m: HawkesModel, omega: float) -> SpectralMatrix:
    values = spectral_density(m, [omega])[0]
    return SpectralMatrix(float(omega), values)


# ---------------------------------------------------------------------------
# Parametric families


def _softplus(x):
    return np.logaddexp(0.0, x)


def _softplus_inv(y):
    y = np.asarray(y, dtype=float)
    return np.where(y > 30, y, np.log(np.expm1(np.minimum(y, 30.0))))


_BETA_CEIL = 1.0 - 1e-6


TRANSFORMS: dict[str, tuple[Callable, Callable]] = {
    # name: (unconstrained -> constrained, constrained -> unconstrained)
    "log": (np.exp, np.log),
    "softplus": (_softplus, _softplus_inv),
    "logistic": (
        lambda x: 1.0 / (1.0 + np.exp(-np.asarray(x, dtype=float))),
        lambda y: np.log(np.minimum(y, _BETA_CEIL)) - np.log1p(-np.minimum(y, _BETA_CEIL)),
    ),
}


@dataclass(frozen=True)
class ParamSpec:
    name: str
    transform: str
    default: float


def _ml(beta, c):
    return KernelSpec.mittag_leffler(beta, c)


def _poisson(v):
    return HawkesModel([v["mu"]], [[0.0]], KernelSpec.exponential(1.0))


def _uni_exp(v):
    return HawkesModel([v["mu"]], [[v["nu"]]], KernelSpec.exponential(v["c"]))


def _uni_ml(v):
    return HawkesModel([v["mu"]], [[v["nu"]]], _ml(v["beta"], v["c"]))


def _bi_matrices(v):
    nu = np.array([[v["nu11"], v["nu12"]], [v["nu21"], v["nu22"]]])
    kernels = (
        (_ml(v["beta11"], v["c11"]), _ml(v["beta12"], v["c12"])),
        (_ml(v["beta21"], v["c21"]), _ml(v["beta22"], v["c22"])),
    )
    return nu, kernels


def _bi_ml(v):
    nu, kernels = _bi_matrices(v)
    lam = np.array([1.0 / v["inv_lambda1"], 1.0 / v["inv_lambda2"]])
    mu = (np.eye(2) - nu) @ lam
    if np.any(mu <= 0):
        raise EvaluationError(f"implied background rate {mu} is not positive")
    return HawkesModel(mu, nu, kernels)


def _bi_ml_mu(v):
    nu, kernels = _bi_matrices(v)
    return HawkesModel([v["mu1"], v["mu2"]], nu, kernels)


def _fh6(v):
    nu = np.array([[v["nu11"], v["a"]], [v["b"], v["nu22"]]])
    kernels = (
        (_ml(v["beta11"], v["c11"]), _ml(v["beta12"], v["c12"])),
        (_ml(v["beta21"], v["c21"]), _ml(v["beta22"], v["c22"])),
    )
    return HawkesModel([v["mu1"], v["mu2"]], nu, kernels)


# Defaults are midpoints of plausible boxes: mu, c in (0, 3); beta in (0.3, 1];
# nu in (0, 1) univariate and (0, 0.6) per entry bivariate; 1/lambda in (0, 1).
_BI_SHAPE = [
    ParamSpec("nu11", "softplus", 0.3), ParamSpec("nu21", "softplus", 0.3),
    ParamSpec("nu12", "softplus", 0.3), ParamSpec("nu22", "softplus", 0.3),
    ParamSpec("beta11", "logistic", 0.65), ParamSpec("beta21", "logistic", 0.65),
    ParamSpec("beta12", "logistic", 0.65), ParamSpec("beta22", "logistic", 0.65),
    ParamSpec("c11", "log", 1.5), ParamSpec("c21", "log", 1.5),
    ParamSpec("c12", "log", 1.5), ParamSpec("c22", "log", 1.5),
]

FAMILIES: dict[str, tuple[list[ParamSpec], Callable[[dict], HawkesModel]]] = {
    "poisson": ([ParamSpec("mu", "log", 1.5)], _poisson),
    "univariate-exponential": (
        [ParamSpec("mu", "log", 1.5), ParamSpec("nu", "softplus", 0.5), ParamSpec("c", "log", 1.5)],
        _uni_exp,
    ),
    "univariate-ml": (
        [ParamSpec("mu", "log", 1.5), ParamSpec("nu", "softplus", 0.5),
         ParamSpec("beta", "logistic", 0.65), ParamSpec("c", "log", 1.5)],
        _uni_ml,
    ),
    "bivariate-ml": (
        [ParamSpec("inv_lambda1", "log", 0.5), ParamSpec("inv_lambda2", "log", 0.5)] + _BI_SHAPE,
        _bi_ml,
    ),
    "bivariate-ml-mu": (
        [ParamSpec("mu1", "log", 1.5), ParamSpec("mu2", "log", 1.5)] + _BI_SHAPE,
        _bi_ml_mu,
    ),
    "bivariate-ml-symmetric-fh6": (
        [ParamSpec("a", "softplus", 0.1), ParamSpec("b", "softplus", 0.1),
         ParamSpec("mu1", "log", 0.5), ParamSpec("mu2", "log", 0.5),
         ParamSpec("nu11", "softplus", 0.5), ParamSpec("nu22", "softplus", 0.5),
         ParamSpec("beta11", "logistic", 1.0), ParamSpec("beta12", "logistic", 0.9),
         ParamSpec("beta21", "logistic", 0.8), ParamSpec("beta22", "logistic", 1.0),
         ParamSpec("c11", "log", 1.0), ParamSpec("c12", "log", 1.1),
         ParamSpec("c21", "log", 0.9), ParamSpec("c22", "log", 1.0)],
        _fh6,
    ),
}

# Entries fixed by default for families that are only partly free.
_DEFAULT_FIXED = {
    "bivariate-ml-symmetric-fh6": {
        "mu1": 0.5, "mu2": 0.5, "nu11": 0.5, "nu22": 0.5,
        "beta11": 1.0, "beta12": 0.9, "beta21": 0.8, "beta22": 1.0,
        "c11": 1.0, "c12": 1.1, "c21": 0.9, "c22": 1.0,
    },
}


@dataclass(frozen=True, eq=False)
class Parameterization:
    """Map between a free parameter vector and a :class:`HawkesModel`.

    ``theta`` lives on the constrained (natural) scale; ``to_unconstrained`` and
    ``to_constrained`` transform to and from R^d for optimisation.  Stationarity
    is not built into the transform; :meth:`penalty` supplies a barrier.
    """

    family: str
    free: tuple[ParamSpec, ...]
    fixed: dict = field(default_factory=dict)
    kappa: float = 1e6
    eps: float = 1e-3

    @property
    def d(self) -> int:
        return len(self.free)

    @property
    def names(self) -> list[str]:
        return [p.name for p in self.free]

    @property
    def initial(self) -> np.ndarray:
        return np.array([p.default for p in self.free])

    def to_constrained(self, theta_u) -> np.ndarray:
        theta_u = np.asarray(theta_u, dtype=float)
        return np.array([TRANSFORMS[p.transform][0](x) for p, x in zip(self.free, theta_u)], dtype=float)

    def to_unconstrained(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        return np.array([TRANSFORMS[p.transform][1](x) for p, x in zip(self.free, theta)], dtype=float)

    def values(self, theta) -> dict:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.d,):
            raise ShapeError(f"expected {self.d} parameters, got shape {theta.shape}")
        out = dict(self.fixed)
        out.update({p.name: float(x) for p, x in zip(self.free, theta)})
        return out

    def model(self, theta) -> HawkesModel:
        """Model at ``theta``; raises for parameters outside the valid region."""
        for p, x in zip(self.free, np.asarray(theta, dtype=float)):
            if p.transform == "logistic" and not (0.0 < x <= 1.0):
                raise DomainError(f"{p.name}={x} outside (0, 1]")
            if p.transform in ("log",) and not x > 0:
                raise DomainError(f"{p.name}={x} must be positive")
            if p.transform == "softplus" and x < 0:
                raise DomainError(f"{p.name}={x} must be nonnegative")
        return FAMILIES[self.family][1](self.values(theta))

    def penalty(self, m: HawkesModel) -> float:
        """Smooth barrier ``kappa * max(0, rho - (1 - eps))^2``."""
        excess = m.spectral_radius - (1.0 - self.eps)
        return self.kappa * excess * excess if excess > 0 else 0.0

    def theta_of(self, values: dict) -> np.ndarray:
        return np.array([values[p.name] for p in self.free], dtype=float)


def make_parameterization(descriptor) -> Parameterization:
    """Build a :class:`Parameterization` from a family name or a descriptor mapping.

    A mapping may carry ``family``, ``fixed`` (name -> value, removed from the
    free vector) and ``initial`` (name -> default starting value).
    """
    if isinstance(descriptor, str):
        descriptor = {"family": descriptor}
    family = descriptor.get("family")
    if family not in FAMILIES:
        raise ConfigurationError(f"unknown parameter family {family!r}; known: {sorted(FAMILIES)}")
    specs, _ = FAMILIES[family]
    known = {p.name for p in specs}
    fixed = dict(_DEFAULT_FIXED.get(family, {}))
    fixed.update(descriptor.get("fixed") or {})
    initial = descriptor.get("initial") or {}
    for name in list(fixed) + list(initial):
        if name not in known:
            raise ConfigurationError(f"family {family!r} has no parameter {name!r}")
    free = tuple(
        ParamSpec(p.name, p.transform, float(initial.get(p.name, p.default)))
        for p in specs
        if p.name not in fixed
    )
    kwargs = {k: float(descriptor[k]) for k in ("kappa", "eps") if k in descriptor}
    return Parameterization(family, free, {k: float(v) for k, v in fixed.items()}, **kwargs)


def model_to_theta(par: Parameterization, m: HawkesModel) -> np.ndarray:
    """Inverse of :meth:`Parameterization.model` for the built-in families."""
    v: dict[str, float] = {}
    if par.family == "poisson":
        v["mu"] = m.mu[0]
    elif par.family.startswith("univariate"):
        k = m.kernels[0][0]
        v.update(mu=m.mu[0], nu=m.nu[0, 0], beta=k.beta, c=k.c)
    else:
        for i in range(2):
            for j in range(2):
                tag = f"{i + 1}{j + 1}"
                v["nu" + tag] = m.nu[i, j]
                v["beta" + tag] = m.kernels[i][j].beta
                v["c" + tag] = m.kernels[i][j].c
        v["mu1"], v["mu2"] = m.mu
        v["a"], v["b"] = m.nu[0, 1], m.nu[1, 0]
        if par.family == "bivariate-ml":
            lam = average_intensity(m)
            v["inv_lambda1"], v["inv_lambda2"] = 1.0 / lam
    return par.theta_of(v)
