import math

import numpy as np
import pytest
from scipy import integrate

from fhawkes.errors import CovarianceError, DomainError, EvaluationError, FitError
from fhawkes.harness.metrics import relative_error
from fhawkes.harness.presets import fh5_model, univariate_ml
from fhawkes.model import HawkesModel, KernelSpec, make_parameterization, model_to_theta, spectral_density
from fhawkes.simulate import EventLog, SimConfig, replication_rng, simulate_hawkes
from fhawkes.spectral import FourierFrame, FourierGrid, finite_fourier, spectral_empirical
from fhawkes.whittle import (
    FitOptions,
    FitResult,
    WhittleObjective,
    fit_covariance_bootstrap,
    hawkes_mle_negloglik,
    mle_fit,
    population_contrast,
    whittle_fit,
    whittle_negloglik,
)

ML = KernelSpec.mittag_leffler
UNI = make_parameterization("univariate-ml")
POISSON = make_parameterization("poisson")
FH4_THETA = np.array([1.0, 0.5, 0.9, 1.0])


def fh4_log(T, seed=0, rep=0):
    return simulate_hawkes(univariate_ml(0.9), SimConfig(T, burn_in=T), replication_rng(seed, rep))


@pytest.fixture(scope="module")
def fh4_data():
    log = fh4_log(400.0, seed=1)
    return log, finite_fourier(log, FourierGrid(400.0, 800))


@pytest.fixture(scope="module")
def fh4_frame(fh4_data):
    return fh4_data[1]


class TestWhittleObjective:
    def test_collapsing_quadratic_form(self):
        T, M = 50.0, 120
        grid = FourierGrid(T, M)
        psi = spectral_density(univariate_ml(0.9), grid.omegas)[:, 0, 0].real
        rng = np.random.default_rng(0)
        phase = np.exp(1j * rng.uniform(0, 2 * np.pi, M))
        frame = FourierFrame(grid, (np.sqrt(psi) * phase)[None, :])
        expected = M / T + np.sum(np.log(psi)) / T
        assert whittle_negloglik(frame, UNI, FH4_THETA) == pytest.approx(expected, rel=1e-13)

    def test_poisson_minimiser_is_mean_periodogram(self, fh4_data):
        log, frame = fh4_data
        a = np.mean(np.abs(frame.J[0]) ** 2)
        obj = WhittleObjective(frame, POISSON)
        assert obj([a]) < obj([a * 1.01]) and obj([a]) < obj([a * 0.99])
        res = whittle_fit(log, POISSON, FitOptions(mt_rule=800))
        assert res.theta_hat[0] == pytest.approx(a, rel=1e-5)

    def test_decomposition(self):
        log = simulate_hawkes(fh5_model(), SimConfig(200.0, seed=2))
        frame = finite_fourier(log, FourierGrid(200.0, 400))
        par = make_parameterization("bivariate-ml")
        theta = model_to_theta(par, fh5_model())
        obj = WhittleObjective(frame, par)
        quad, logdet, pen = obj.parts(theta)
        psi = spectral_density(fh5_model(), frame.grid.omegas)
        assert quad == pytest.approx(spectral_empirical(frame, np.linalg.inv(psi)), rel=1e-10)
        ld = np.sum(np.log(np.linalg.det(psi).real)) / frame.T
        assert logdet == pytest.approx(ld, rel=1e-10)
        assert pen == 0.0
        assert obj(theta) == quad + logdet + pen

    def test_barrier_added(self, fh4_frame):
        par = make_parameterization({"family": "univariate-ml", "eps": 0.2})
        q, ld, pen = WhittleObjective(fh4_frame, par).parts([1.0, 0.9, 0.9, 1.0])
        assert pen == pytest.approx(1e6 * 0.1**2)

    def test_invalid_parameters(self, fh4_frame):
        obj = WhittleObjective(fh4_frame, UNI)
        with pytest.raises(EvaluationError):
            obj([1.0, 1.2, 0.9, 1.0])
        with pytest.raises(EvaluationError):
            obj([1.0, 0.5, 1.4, 1.0])
        with pytest.raises(EvaluationError):
            WhittleObjective(fh4_frame, make_parameterization("bivariate-ml"))(np.full(14, 0.2))

    def test_order_invariance(self):
        log = fh4_log(100.0, seed=4)
        frame = finite_fourier(log, FourierGrid(100.0, 300))
        shuffled = np.random.default_rng(0).permutation(log.times)
        J = np.exp(-1j * np.outer(frame.grid.omegas, shuffled)).sum(axis=1) / math.sqrt(100.0)
        frame2 = FourierFrame(frame.grid, J[None, :])
        assert whittle_negloglik(frame2, UNI, FH4_THETA) == pytest.approx(
            whittle_negloglik(frame, UNI, FH4_THETA), rel=1e-12
        )

    def test_true_value_beats_perturbed_on_average(self):
        par = UNI
        worse = FH4_THETA.copy()
        worse[1] = 0.7
        at_truth, at_worse = [], []
        for r in range(100):
            frame = finite_fourier(fh4_log(300.0, seed=5, rep=r), FourierGrid(300.0, 600))
            obj = WhittleObjective(frame, par)
            at_truth.append(obj(FH4_THETA))
            at_worse.append(obj(worse))
        assert np.mean(at_truth) < np.mean(at_worse)


class TestPopulationContrast:
    def test_equality_case(self):
        m = univariate_ml(0.9)
        L = 2.0
        h = population_contrast(m, UNI, FH4_THETA, L)
        ld = integrate.quad(lambda x: math.log(spectral_density(m, [x])[0, 0, 0].real), 0, 2 * math.pi * L,
                            epsabs=1e-10, limit=500)[0] / (2 * math.pi)
        assert h - ld == pytest.approx(L * 1, abs=1e-7)

    def test_constant_spectra(self):
        a, L = 2.0, 1.5
        truth = HawkesModel([a], [[0.0]], ML(0.5, 1.0))
        for b in (1.0, 2.0, 3.5):
            assert population_contrast(truth, POISSON, [b], L) == pytest.approx(L * (math.log(b) + a / b), abs=1e-8)

    def test_bivariate_equality_case(self):
        par = make_parameterization("bivariate-ml")
        m = fh5_model()
        theta = model_to_theta(par, m)
        L = 0.5
        ld = integrate.quad(lambda x: math.log(np.linalg.det(spectral_density(m, [x])[0]).real),
                            0, 2 * math.pi * L, epsabs=1e-10, limit=500)[0] / (2 * math.pi)
        assert population_contrast(m, par, theta, L) - ld == pytest.approx(L * 2, abs=1e-7)

    def test_local_identifiability(self):
        m = univariate_ml(0.9)
        L = 2.0
        h0 = population_contrast(m, UNI, FH4_THETA, L)
        rng = np.random.default_rng(8)
        for _ in range(20):
            theta = FH4_THETA * (1 + rng.uniform(-0.15, 0.15, 4))
            theta[2] = min(theta[2], 1.0)
            assert population_contrast(m, UNI, theta, L) > h0


class TestLikelihood:
    def test_empty_log(self):
        m = HawkesModel([1.0], [[0.5]], KernelSpec.exponential(1.0))
        log = EventLog(2.0, [], [])
        for method in ("mixture", "generic"):
            assert hawkes_mle_negloglik(log, m, method) == 2.0

    def test_single_event(self):
        m = HawkesModel([1.0], [[0.5]], KernelSpec.exponential(1.0))
        log = EventLog(2.0, [0.5], [1])
        expected = 2.0 + 0.5 * (1 - math.exp(-1.5))
        assert expected == pytest.approx(2.38843, abs=5e-6)
        for method in ("mixture", "generic"):
            assert hawkes_mle_negloglik(log, m, method) == pytest.approx(expected, abs=1e-13)

    @pytest.mark.parametrize("kind", ["exponential", "mittag-leffler", "bivariate"])
    def test_fast_path_matches_generic(self, kind):
        rng = np.random.default_rng({"exponential": 0, "mittag-leffler": 1, "bivariate": 2}[kind])
        worst = 0.0
        for k in range(100 if kind == "exponential" else 40):
            if kind == "exponential":
                m = HawkesModel([rng.uniform(0.5, 2)], [[rng.uniform(0, 0.8)]], KernelSpec.exponential(rng.uniform(0.3, 3)))
            elif kind == "mittag-leffler":
                m = HawkesModel([rng.uniform(0.5, 2)], [[rng.uniform(0, 0.8)]], ML(rng.uniform(0.4, 1), rng.uniform(0.3, 3)))
            else:
                nu = rng.uniform(0, 0.45, (2, 2))
                kernels = [[ML(rng.uniform(0.5, 1), rng.uniform(0.5, 2)) for _ in range(2)] for _ in range(2)]
                m = HawkesModel(rng.uniform(0.2, 1, 2), nu, kernels)
            T = float(rng.uniform(20, 60))
            log = simulate_hawkes(m, SimConfig(T), replication_rng(k, 99))
            fast = hawkes_mle_negloglik(log, m, "mixture")
            slow = hawkes_mle_negloglik(log, m, "generic")
            worst = max(worst, abs(fast - slow) / max(1.0, abs(slow)))
        assert worst < 1e-10

    def test_dimension_mismatch(self):
        with pytest.raises(DomainError):
            hawkes_mle_negloglik(EventLog(2.0, [0.5], [1]), fh5_model())
        with pytest.raises(DomainError):
            hawkes_mle_negloglik(EventLog(2.0, [0.5], [1]), univariate_ml(0.9), "quadratic")


class TestFits:
    def test_poisson_whittle(self):
        m = HawkesModel([2.0], [[0.0]], ML(0.5, 1.0))
        log = simulate_hawkes(m, SimConfig(2000.0, seed=11))
        res = whittle_fit(log, POISSON, FitOptions(mt_rule="2T"))
        assert abs(res.theta_hat[0] - 2.0) < 3 * math.sqrt(2.0 / 2000.0)
        assert res.converged and res.M_T == 4000

    def test_poisson_mle_is_rate(self):
        m = HawkesModel([2.0], [[0.0]], ML(0.5, 1.0))
        log = simulate_hawkes(m, SimConfig(500.0, seed=12))
        res = mle_fit(log, POISSON)
        assert res.theta_hat[0] == pytest.approx(len(log) / 500.0, rel=1e-5)

    def test_fh4_whittle_deterministic(self):
        log = fh4_log(300.0, seed=13)
        a = whittle_fit(log, UNI, FitOptions(mt_rule="2T"))
        b = whittle_fit(log, UNI, FitOptions(mt_rule="2T"))
        assert a == b
        assert a.restart_index in (0, 1, 2)
        assert relative_error(a.theta_hat, FH4_THETA) < 2.0

    def test_fh4_mle_deterministic(self):
        log = fh4_log(150.0, seed=14)
        a = mle_fit(log, UNI, FitOptions(restarts=1))
        b = mle_fit(log, UNI, FitOptions(restarts=1))
        assert a == b and a.method == "mle"

    def test_restarts_never_hurt(self):
        log = fh4_log(200.0, seed=15)
        one = whittle_fit(log, UNI, FitOptions(mt_rule="2T", restarts=1))
        three = whittle_fit(log, UNI, FitOptions(mt_rule="2T", restarts=3))
        assert three.objective <= one.objective

    def test_empty_log(self):
        with pytest.raises(FitError):
            whittle_fit(EventLog(10.0, [], []), UNI)
        with pytest.raises(FitError):
            mle_fit(EventLog(10.0, [], []), UNI)

    def test_bad_options(self):
        with pytest.raises(DomainError):
            FitOptions(restarts=0)
        with pytest.raises(DomainError):
            FitOptions(x_tol=0.0)
        with pytest.raises(DomainError):
            FitOptions(max_iter=0)

    def test_result_json_round_trip(self):
        res = whittle_fit(fh4_log(100.0, seed=16), UNI, FitOptions(mt_rule="2T", restarts=1))
        text = res.to_json()
        assert '"mu":' in text and '"theta_unconstrained"' in text
        assert FitResult.from_json(text) == res


class TestBootstrap:
    def test_poisson_variance_mle(self):
        # n / T has variance mu / T: the Fisher information bound.
        mu, T = 2.0, 400.0
        C = fit_covariance_bootstrap(POISSON, [mu], T, FitOptions(restarts=1), reps=200, seed=3, method="mle")
        assert C.shape == (1, 1)
        assert abs(C[0, 0] / mu - 1) < 0.25

    def test_poisson_variance_whittle(self):
        # The mean of M periodogram ordinates: mu^2 / M from the ordinates plus mu / T
        # from the fourth cumulant, so Var(sqrt(T) mu_hat) = mu + mu^2 T / M.
        mu, T = 2.0, 400.0
        C = fit_covariance_bootstrap(POISSON, [mu], T, FitOptions(mt_rule="2T", restarts=1), reps=200, seed=3)
        assert abs(C[0, 0] / (mu + mu * mu / 2) - 1) < 0.25

    def test_symmetric(self):
        par = make_parameterization({"family": "univariate-ml", "fixed": {"beta": 0.9, "c": 1.0}})
        C = fit_covariance_bootstrap(par, [1.0, 0.5], 150.0, FitOptions(mt_rule="2T", restarts=1), reps=50, seed=4)
        assert C.shape == (2, 2)
        assert np.array_equal(C, C.T)
        assert np.linalg.eigvalsh(C).min() >= -1e-12

    def test_needs_fifty(self):
        with pytest.raises(DomainError):
            fit_covariance_bootstrap(POISSON, [1.0], 10.0, reps=49)

    def test_too_many_failures(self):
        opts = FitOptions(mt_rule="2T", restarts=1, max_iter=1)
        with pytest.raises(CovarianceError):
            fit_covariance_bootstrap(UNI, FH4_THETA, 50.0, opts, reps=50, seed=5)

    @pytest.mark.slow
    def test_fh4_root_t_rate(self):
        opts = FitOptions(restarts=1)
        sd = {}
        for T in (1250.0, 2500.0):
            # Standard deviations of theta_hat itself, so the rate shows as sqrt(2).
            C = fit_covariance_bootstrap(UNI, FH4_THETA, T, opts, reps=100, seed=6, burn_in=T)
            sd[T] = np.sqrt(np.diag(C) / T)
        ratio = sd[1250.0] / sd[2500.0]
        np.testing.assert_allclose(ratio, math.sqrt(2), rtol=0.25)
