"""Experiment presets FH1-FH6."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError
from ..model import HawkesModel, KernelSpec, make_parameterization, model_to_theta

ML = KernelSpec.mittag_leffler

RELATIVE_ERROR = "relative_error"
REJECTION_RATE = "rejection_rate"

FH6_GRID = (0.0, 0.1, 0.2, 0.3)


@dataclass(frozen=True, eq=False)
class ExperimentPreset:
    """A data-generating model with its estimation setup.

    ``burn_in_factor`` multiplies T to give the burn-in; it was chosen so that
    doubling it moves the mean event count by less than 0.5 %.
    """

    name: str
    model: HawkesModel
    family: str
    T: tuple
    mt_rules: tuple
    reps: int
    metric: str
    estimators: tuple = ("whittle",)
    burn_in_factor: float = 1.0
    grid: tuple = field(default_factory=tuple)

    @property
    def parameterization(self):
        return make_parameterization(self.family)

    @property
    def theta0(self) -> np.ndarray:
        return model_to_theta(self.parameterization, self.model)


def univariate_ml(beta: float) -> HawkesModel:
    return HawkesModel([1.0], [[0.5]], ML(beta, 1.0))


def fh5_model() -> HawkesModel:
    kernels = ((ML(0.75, 0.8), ML(0.85, 1.0)), (ML(0.8, 0.9), ML(0.9, 1.1)))
    return HawkesModel([0.2, 0.1], [[0.3, 1.0], [0.5, 0.2]], kernels)


def fh6_model(a: float, b: float) -> HawkesModel:
    """Stationary iff ``a b < 1/4``; the components are independent iff ``a = b = 0``."""
    kernels = ((ML(1.0, 1.0), ML(0.9, 1.1)), (ML(0.8, 0.9), ML(1.0, 1.0)))
    return HawkesModel([0.5, 0.5], [[0.5, a], [b, 0.5]], kernels)


def fh6_f12_zero(a: float, b: float) -> float:
    """Closed form of the cross spectrum at zero for the FH6 family."""
    return (a * b / 2.0 + (a + b) / 8.0) / (0.25 - a * b) ** 3


_UNI = dict(family="univariate-ml", T=(1250.0, 2500.0), mt_rules=("2T", "TlogT"), reps=200,
            metric=RELATIVE_ERROR, estimators=("mle", "whittle"))

PRESETS: dict[str, ExperimentPreset] = {
    "FH1": ExperimentPreset("FH1", univariate_ml(0.4), burn_in_factor=8.0, **_UNI),
    "FH2": ExperimentPreset("FH2", univariate_ml(0.5), **_UNI),
    "FH3": ExperimentPreset("FH3", univariate_ml(0.6), **_UNI),
    "FH4": ExperimentPreset("FH4", univariate_ml(0.9), **_UNI),
    "FH5": ExperimentPreset("FH5", fh5_model(), "bivariate-ml", (1250.0, 2500.0), ("2T", "TlogT"), 200,
                            RELATIVE_ERROR, burn_in_factor=2.0),
    "FH6": ExperimentPreset("FH6", fh6_model(0.0, 0.0), "bivariate-ml-symmetric-fh6", (5000.0,), ("10sqrtT",),
                            200, REJECTION_RATE, estimators=("independence",),
                            grid=tuple((a, b) for a in FH6_GRID for b in FH6_GRID)),
}


def get_preset(name: str) -> ExperimentPreset:
    key = name.upper()
    if key not in PRESETS:
        raise ConfigurationError(f"unknown preset {name!r}; known: {sorted(PRESETS)}")
    return PRESETS[key]


def preset_models(p: ExperimentPreset) -> list[tuple[tuple, HawkesModel]]:
    """(cell label, model) pairs; a single unlabeled cell for non-grid presets."""
    if p.grid:
        return [(cell, fh6_model(*cell)) for cell in p.grid]
    return [((), p.model)]
