"""Adaptive two-arm trial engine: DLM filtering, response-adaptive weights,
Bayes-factor stopping and Monte Carlo drivers."""

import json as _json

from . import _core
from ._core import (
    FormatError,
    NumericalDomainError,
    ProtocolError,
    bayes_factor,
    detect_switch,
    evolve,
    forecast,
    std_normal_cdf,
    two_sample_t,
    update,
)

__version__ = _core.__version__

__all__ = [
    "FormatError",
    "LiveSession",
    "NumericalDomainError",
    "ProtocolError",
    "bayes_factor",
    "default_config",
    "detect_switch",
    "evolve",
    "forecast",
    "replay",
    "run_scenarios",
    "run_sweep",
    "run_trial",
    "std_normal_cdf",
    "two_sample_t",
    "update",
    "weights",
]


def default_config():
    return _json.loads(_core.default_config_json())


def weights(f_a, q_a, f_b, q_b, rule="bb", scale="stddev", preference="lower"):
    return _json.loads(_core.weights_json(rule, scale, preference, f_a, q_a, f_b, q_b))


def run_trial(config):
    """One simulated trial. `config` needs a "truth" entry."""
    return _json.loads(_core.run_trial_json(_json.dumps(config)))


def run_scenarios(rule, n_sims, seed, threads=0, **model):
    return _json.loads(_core.run_scenarios_json(rule, n_sims, seed, threads, _json.dumps(model)))


def run_sweep(seed, threads=0, **grid):
    return _json.loads(_core.run_sweep_json(_json.dumps(grid), seed, threads))


def replay(log_text):
    return _json.loads(_core.replay_json(log_text))


class LiveSession:
    def __init__(self, config=None, *, _core_session=None):
        self._s = _core_session or _core.LiveSession(_json.dumps(config or {}))

    @classmethod
    def restore(cls, log_text, pending=None):
        return cls(_core_session=_core.LiveSession.restore(log_text, pending))

    @property
    def phase(self):
        return self._s.phase

    def enroll(self):
        return _json.loads(self._s.enroll_json())

    def record_outcome(self, y):
        return _json.loads(self._s.record_outcome_json(float(y)))

    def event_log(self):
        return self._s.event_log()

    def snapshot(self):
        return _json.loads(self._s.snapshot_json())
