"""Whittle estimation, the exact Hawkes likelihood and bootstrap covariances."""

from __future__ import annotations

import dataclasses
import json
import math
import warnings
from dataclasses import dataclass

import numba
import numpy as np
from scipy import integrate, optimize

from .errors import CovarianceError, DomainError, EvaluationError, FitError, HawkesError
from .mlspecial import ml_exponential_mixture
from .model import HawkesModel, Parameterization, spectral_density
from .simulate import EventLog, SimConfig, replication_rng, simulate_hawkes
from .spectral import FourierFrame, FourierGrid, finite_fourier, mt_from_rule

@dataclass(frozen=True)
class FitOptions:
    """Simplex settings shared by Whittle and likelihood fits.

    ``initial`` is on the constrained scale (``None`` uses the family defaults).
    ``restarts`` counts simplex runs: the first starts at ``initial``, the rest at
    points jittered multiplicatively by up to ``jitter``.  ``max_iter=None`` means
    ``2000 * d``.  ``kappa`` and ``eps`` override the barrier constants.
    """

    mt_rule: str | int = "TlogT"
    initial: tuple | None = None
    max_iter: int | None = None
    x_tol: float = 1e-6
    f_tol: float = 1e-9
    restarts: int = 3
    jitter: float = 0.1
    seed: int = 0
    kappa: float | None = None
    eps: float | None = None

    def __post_init__(self):
        if self.max_iter is not None and self.max_iter <= 0:
            raise DomainError("max_iter must be positive")
        if not (self.x_tol > 0 and self.f_tol > 0):
            raise DomainError("tolerances must be positive")
        if self.restarts < 1:
            raise DomainError("need at least one start")


@dataclass(frozen=True)
class FitResult:
    method: str
    family: str
    names: tuple
    theta_hat: tuple
    theta_unconstrained: tuple
    objective: float
    iterations: int
    evaluations: int
    converged: bool
    restart_index: int
    M_T: int | None = None

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        d = self.to_dict()
        d["theta_hat"] = dict(zip(self.names, self.theta_hat))
        d["theta_unconstrained"] = dict(zip(self.names, self.theta_unconstrained))
        return json.dumps(d, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "FitResult":
        d = json.loads(text)
        names = tuple(d["names"])
        d["names"] = names
        d["theta_hat"] = tuple(d["theta_hat"][n] for n in names)
        d["theta_unconstrained"] = tuple(d["theta_unconstrained"][n] for n in names)
        return cls(**d)


def _with_penalty(par: Parameterization, opts: FitOptions) -> Parameterization:
    changes = {k: getattr(opts, k) for k in ("kappa", "eps") if getattr(opts, k) is not None}
    return dataclasses.replace(par, **changes) if changes else par


# ---------------------------------------------------------------------------
# Whittle objective


class WhittleObjective:
    """``l_W`` for a fixed frame, reusable across parameter values."""

    def __init__(self, frame: FourierFrame, par: Parameterization):
        self.frame = frame
        self.par = par
        self.omegas = frame.grid.omegas
        self.T = frame.T
        self.Jt = np.ascontiguousarray(frame.J.T)  # (M, D)
        self.periodogram = np.abs(self.Jt[:, 0]) ** 2 if frame.D == 1 else None

    def model(self, theta) -> HawkesModel:
        try:
            m = self.par.model(theta)
        except HawkesError as exc:
            raise EvaluationError(str(exc)) from exc
        if m.D != self.frame.D:
            raise EvaluationError(f"model dimension {m.D} does not match data dimension {self.frame.D}")
        if not m.is_stationary:
            raise EvaluationError("nonstationary parameter")
        return m

    def parts(self, theta) -> tuple[float, float, float]:
        """(quadratic-form term, log-det term, barrier)."""
        m = self.model(theta)
        psi = spectral_density(m, self.omegas)
        if self.periodogram is not None:
            p = psi[:, 0, 0].real
            if not np.all(p > 0):
                raise EvaluationError("spectral density is not positive")
            quad = float(np.sum(self.periodogram / p))
            logdet = float(np.sum(np.log(p)))
        else:
            try:
                chol = np.linalg.cholesky(psi)
            except np.linalg.LinAlgError as exc:
                raise EvaluationError("spectral matrix is not positive definite") from exc
            y = np.linalg.solve(chol, self.Jt[:, :, None])[:, :, 0]
            quad = float(np.sum(np.abs(y) ** 2))
            logdet = float(2.0 * np.sum(np.log(np.diagonal(chol, axis1=1, axis2=2).real)))
        return quad / self.T, logdet / self.T, self.par.penalty(m)

    def __call__(self, theta) -> float:
        q, ld, pen = self.parts(theta)
        value = q + ld + pen
        if not math.isfinite(value):
            raise EvaluationError("objective is not finite")
        return value


def whittle_negloglik(frame: FourierFrame, par: Parameterization, theta) -> float:
    """``(1/T) sum_p [J^H Psi^-1 J + log det Psi](w_p)`` plus the stationarity barrier."""
    return WhittleObjective(frame, par)(theta)


def population_contrast(m_true: HawkesModel, par: Parameterization, theta, L: float) -> float:
    """``(1/2pi) int_0^{2 pi L} [log det Psi_theta + tr(f2 Psi_theta^-1)] dx``."""
    m_true.require_stationary()
    m = par.model(theta)
    m.require_stationary()

    def integrand(x):
        psi = spectral_density(m, [x])[0]
        f2 = spectral_density(m_true, [x])[0]
        sign, logdet = np.linalg.slogdet(psi)
        return float(logdet + np.trace(np.linalg.solve(psi, f2)).real)

    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, _ = integrate.quad(integrand, 0.0, 2.0 * math.pi * L, epsabs=1e-8, epsrel=1e-10, limit=500)
        except integrate.IntegrationWarning as exc:
            raise EvaluationError(f"quadrature did not converge: {exc}") from exc
    return val / (2.0 * math.pi)


# ---------------------------------------------------------------------------
# Exact likelihood


@numba.njit(cache=True)
def _mixture_loglik(times, marks, T, mu, pair_target, pair_source, offsets, rates, weights, surv_weights):
    """Sum of log intensities and compensator with kernels as exponential mixtures.

    Node ``q`` of pair ``e`` contributes ``weights[q] exp(-rates[q] x)`` to the
    intensity of mark ``pair_target[e]`` at lag ``x`` after a ``pair_source[e]``
    event and ``surv_weights[q] exp(-rates[q] x)`` to the compensator tail.
    """
    n_nodes = rates.size
    state = np.zeros(n_nodes)
    loglik = 0.0
    last = 0.0
    for k in range(times.size):
        t = times[k]
        dt = t - last
        for q in range(n_nodes):
            state[q] *= math.exp(-rates[q] * dt)
        j = marks[k]
        lam = mu[j]
        for e in range(pair_target.size):
            if pair_target[e] == j:
                for q in range(offsets[e], offsets[e + 1]):
                    lam += weights[q] * state[q]
        if not lam > 0.0:
            return np.nan, np.nan
        loglik += math.log(lam)
        for e in range(pair_source.size):
            if pair_source[e] == j:
                for q in range(offsets[e], offsets[e + 1]):
                    state[q] += 1.0
        last = t
    dt = T - last
    comp = mu.sum() * T
    for q in range(n_nodes):
        comp += surv_weights[q] * state[q] * math.exp(-rates[q] * dt)
    return loglik, comp


def _mixture_terms(log: EventLog, m: HawkesModel):
    gaps = np.diff(log.times)
    smallest = min(float(gaps.min()) if gaps.size else log.T, log.T - float(log.times[-1]))
    smallest = max(smallest, 1e-300)
    targets, sources, offsets, rates, weights, surv, nu_counts = [], [], [0], [], [], [], 0.0
    counts = log.counts()
    for i in range(m.D):
        for j in range(m.D):
            nu = m.nu[i, j]
            if nu == 0.0:
                continue
            k = m.kernels[i][j]
            w, r = ml_exponential_mixture(k.beta, k.c * smallest, k.c * log.T)
            a = k.c * r
            targets.append(i)
            sources.append(j)
            rates.append(a)
            weights.append(nu * w * a)
            # compensator: nu * (N_j - sum_k S(T - t_k)), the survival part enters with a minus sign
            surv.append(-nu * w)
            nu_counts += nu * counts[j]
            offsets.append(offsets[-1] + a.size)
    if not targets:
        empty_i = np.zeros(0, dtype=np.int64)
        return empty_i, empty_i, np.zeros(1, dtype=np.int64), np.zeros(0), np.zeros(0), np.zeros(0), 0.0
    return (
        np.array(targets, dtype=np.int64),
        np.array(sources, dtype=np.int64),
        np.array(offsets, dtype=np.int64),
        np.concatenate(rates),
        np.concatenate(weights),
        np.concatenate(surv),
        nu_counts,
    )


def _negloglik_mixture(log: EventLog, m: HawkesModel) -> float:
    mu = np.asarray(m.mu, dtype=float)
    if len(log) == 0:
        return float(mu.sum() * log.T)
    tg, src, off, rates, w, surv, nu_counts = _mixture_terms(log, m)
    loglik, comp = _mixture_loglik(log.times, log.marks - 1, log.T, mu, tg, src, off, rates, w, surv)
    if not math.isfinite(loglik):
        raise DomainError("conditional intensity is not positive at an event")
    return float(comp + nu_counts - loglik)


def _negloglik_generic(log: EventLog, m: HawkesModel) -> float:
    times, marks = log.times, log.marks - 1
    comp = float(m.mu.sum() * log.T)
    loglik = 0.0
    for k in range(len(log)):
        lam = m.mu[marks[k]]
        lags = times[k] - times[:k]
        src = marks[:k]
        i = marks[k]
        for j in range(m.D):
            sel = src == j
            if m.nu[i, j] != 0.0 and sel.any():
                lam += m.nu[i, j] * float(np.sum(m.kernels[i][j].density(lags[sel])))
        if not lam > 0:
            raise DomainError("conditional intensity is not positive at an event")
        loglik += math.log(lam)
    for j in range(m.D):
        tail = log.T - log.select(j + 1)
        if tail.size == 0:
            continue
        for i in range(m.D):
            if m.nu[i, j] != 0.0:
                comp += m.nu[i, j] * float(np.sum(m.kernels[i][j].cdf(tail)))
    return comp - loglik


def hawkes_mle_negloglik(log: EventLog, m: HawkesModel, method: str = "mixture") -> float:
    """``-sum_k log lambda(t_k) + sum_i int_0^T lambda_i``.

    ``method="mixture"`` writes every kernel as a finite exponential mixture (one
    node for exponential kernels) and runs an O(n Q) recursion; ``"generic"``
    sums densities over all earlier events in O(n^2).
    """
    if log.D != m.D:
        raise DomainError(f"log has {log.D} marks but the model has {m.D}")
    if method == "mixture":
        return _negloglik_mixture(log, m)
    if method == "generic":
        return _negloglik_generic(log, m)
    raise DomainError(f"unknown likelihood method {method!r}")


class LikelihoodObjective:
    def __init__(self, log: EventLog, par: Parameterization):
        self.log = log
        self.par = par

    def __call__(self, theta) -> float:
        try:
            m = self.par.model(theta)
            if m.D != self.log.D:
                raise EvaluationError("dimension mismatch")
            value = hawkes_mle_negloglik(self.log, m) + self.par.penalty(m)
        except HawkesError as exc:
            raise EvaluationError(str(exc)) from exc
        if not math.isfinite(value):
            raise EvaluationError("objective is not finite")
        return value


# ---------------------------------------------------------------------------
# Simplex driver


def _starts(par: Parameterization, opts: FitOptions) -> list[np.ndarray]:
    base = np.asarray(opts.initial if opts.initial is not None else par.initial, dtype=float)
    if base.shape != (par.d,):
        raise DomainError(f"initial value needs {par.d} entries")
    rng = replication_rng(opts.seed)
    starts = [base]
    for _ in range(opts.restarts - 1):
        pt = base * (1.0 + opts.jitter * rng.uniform(-1.0, 1.0, par.d))
        for k, p in enumerate(par.free):
            if p.transform == "logistic":
                pt[k] = min(pt[k], 1.0 - 1e-6)
        starts.append(pt)
    return starts


def minimize_objective(objective, par: Parameterization, opts: FitOptions, method: str, M_T=None) -> FitResult:
    """Nelder-Mead on the unconstrained scale from each start; keep the best."""

    def f(u):
        try:
            return objective(par.to_constrained(u))
        except (HawkesError, np.linalg.LinAlgError, FloatingPointError, ZeroDivisionError, OverflowError):
            return math.inf

    max_iter = opts.max_iter or 2000 * par.d
    best = None
    for idx, start in enumerate(_starts(par, opts)):
        u0 = par.to_unconstrained(start)
        if not math.isfinite(f(u0)):
            continue
        with np.errstate(all="ignore"):
            res = optimize.minimize(
                f, u0, method="Nelder-Mead",
                options={"maxiter": max_iter, "maxfev": 2 * max_iter, "xatol": opts.x_tol, "fatol": opts.f_tol},
            )
        if not math.isfinite(res.fun):
            continue
        if best is None or res.fun < best[1].fun:
            best = (idx, res)
    if best is None:
        raise FitError("objective could not be evaluated at any start")
    idx, res = best
    theta = par.to_constrained(res.x)
    return FitResult(
        method=method,
        family=par.family,
        names=tuple(par.names),
        theta_hat=tuple(float(x) for x in theta),
        theta_unconstrained=tuple(float(x) for x in res.x),
        objective=float(res.fun),
        iterations=int(res.nit),
        evaluations=int(res.nfev),
        converged=bool(res.success),
        restart_index=idx,
        M_T=M_T,
    )


def whittle_fit(log: EventLog, par: Parameterization, opts: FitOptions = FitOptions()) -> FitResult:
    if len(log) == 0:
        raise FitError("cannot fit an empty event log")
    par = _with_penalty(par, opts)
    M = mt_from_rule(opts.mt_rule, log.T)
    frame = finite_fourier(log, FourierGrid(log.T, M))
    return minimize_objective(WhittleObjective(frame, par), par, opts, "whittle", M)


def mle_fit(log: EventLog, par: Parameterization, opts: FitOptions = FitOptions()) -> FitResult:
    if len(log) == 0:
        raise FitError("cannot fit an empty event log")
    par = _with_penalty(par, opts)
    return minimize_objective(LikelihoodObjective(log, par), par, opts, "mle")


FITTERS = {"whittle": whittle_fit, "mle": mle_fit}


def fit_covariance_bootstrap(
    par: Parameterization,
    theta_hat,
    T: float,
    opts: FitOptions = FitOptions(),
    reps: int = 200,
    seed: int = 0,
    method: str = "whittle",
    burn_in: float | None = None,
) -> np.ndarray:
    """Parametric bootstrap estimate of ``Cov(sqrt(T) theta_hat)``.

    Replication ``r`` simulates from the fitted model with stream ``(seed, r)``
    and refits starting from ``theta_hat``.
    """
    if reps < 50:
        raise DomainError("bootstrap needs at least 50 replications")
    theta_hat = np.asarray(theta_hat, dtype=float)
    m = par.model(theta_hat)
    m.require_stationary()
    if opts.initial is None:
        opts = dataclasses.replace(opts, initial=tuple(theta_hat))
    fit = FITTERS[method]
    draws, failures = [], 0
    for r in range(reps):
        log = simulate_hawkes(m, SimConfig(T, seed=seed, burn_in=burn_in), replication_rng(seed, r))
        try:
            res = fit(log, par, opts)
        except HawkesError:
            failures += 1
            continue
        if not res.converged:
            failures += 1
        draws.append(np.asarray(res.theta_hat))
    if failures > 0.2 * reps:
        raise CovarianceError(f"{failures} of {reps} bootstrap fits failed or did not converge")
    z = math.sqrt(T) * (np.array(draws) - theta_hat)
    cov = np.atleast_2d(np.cov(z, rowvar=False, ddof=1))
    return 0.5 * (cov + cov.T)
