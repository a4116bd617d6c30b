"""Odometry-aided monocular SLAM: simulator, estimator and evaluation."""

import json

from ._core import OdoslamError, ate, cli, config_version, exp_se3, log_se3
from . import _core

__all__ = [
    "OdoslamError",
    "ate",
    "cli",
    "config_version",
    "default_config",
    "exp_se3",
    "log_se3",
    "simulate",
    "slam",
]


def default_config():
    return json.loads(_core.default_config())


def simulate(config=None):
    """Simulated run (frames, ground truth, landmarks) as a dict."""
    return json.loads(_core.simulate(json.dumps(config or default_config())))


def slam(config=None, run=None):
    """Runs the estimator; returns {"initialized", "report", "ate"}.

    Without `run` the simulation section of the config is simulated first.
    """
    run_json = json.dumps(run) if run is not None else ""
    return json.loads(_core.slam(json.dumps(config or default_config()), run_json))
