"""Configuration files: JSON objects.

A simulation config looks like::

    {"model": "FH4", "T": 100, "seed": 7, "burn_in": null}

``model`` is a preset name, ``{"preset": "FH6", "a": 0.1, "b": 0.0}``, or an
explicit model::

    {"mu": [0.2, 0.1], "nu": [[0.3, 1.0], [0.5, 0.2]],
     "kernels": [[{"family": "mittag-leffler", "beta": 0.75, "c": 0.8}, ...], ...]}

A single kernel object instead of a matrix is shared by all pairs.  A family
config for fitting is ``{"family": "univariate-ml", "fixed": {...},
"initial": {...}}`` (see :func:`fhawkes.model.make_parameterization`).
"""

from __future__ import annotations

import json

from ..errors import ConfigurationError, HawkesError
from ..model import HawkesModel
from .presets import fh6_model, get_preset


def load_json(path) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigurationError(f"config {path} must hold a JSON object")
    return data


def resolve_model(spec) -> HawkesModel:
    if isinstance(spec, str):
        return get_preset(spec).model
    if not isinstance(spec, dict):
        raise ConfigurationError("model must be a preset name or an object")
    if "preset" in spec:
        name = spec["preset"].upper()
        if name == "FH6":
            return fh6_model(float(spec.get("a", 0.0)), float(spec.get("b", 0.0)))
        return get_preset(name).model
    try:
        return HawkesModel.from_dict(spec)
    except HawkesError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"invalid model: {exc}") from None
