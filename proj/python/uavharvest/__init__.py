"""UAV trajectory and scheduling planner under angle-dependent Rician fading."""

import json

from ._core import (
    InvalidInput,
    IoError,
    NumericalError,
    exact_effective_power,
    fading_power_cdf,
    inverse_q,
    k_threshold,
    lemma1_effective_power,
    marcum_q1,
)
from . import _core

__all__ = [
    "InvalidInput",
    "IoError",
    "NumericalError",
    "exact_effective_power",
    "fading_power_cdf",
    "fit_model",
    "inverse_q",
    "k_threshold",
    "lemma1_effective_power",
    "load_scenario",
    "marcum_q1",
    "resolve_scenario",
    "run_scheme",
    "trajectory_csv",
]


def fit_model(kmin_db=0.0, kmax_db=30.0, eps=0.01, grid=200):
    return json.loads(_core.fit_model_json(kmin_db, kmax_db, eps, grid))


def load_scenario(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def resolve_scenario(doc):
    return json.loads(_core.resolve_scenario_json(json.dumps(doc)))


def run_scheme(scenario, scheme="rfb", model=None, trials=0, seed=None, max_iterations=50):
    """Plan and score one scheme; returns the result document as a dict."""
    if isinstance(scenario, str):
        scenario = load_scenario(scenario)
    model_text = None if model is None else json.dumps(model)
    text = _core.run_scheme_json(json.dumps(scenario), scheme, model_text, trials, seed, max_iterations)
    return json.loads(text)


def trajectory_csv(run):
    return _core.trajectory_csv(json.dumps(run))
