"""Python bindings for the nsrlab C++ core.

Configs are plain dicts (or paths to JSON files) in the same format the
command-line tool reads. Policies travel as their JSON serialization.
"""

import json
import os

from . import _nsrlab
from ._nsrlab import (
    ConfigError,
    Error,
    InconsistentPolicy,
    InvalidArgument,
    NumericalError,
    OutOfRange,
    default_k_grid,
    gradcheck,
    pass_at_k,
    pass_at_k_oracle,
)

__all__ = [
    "ConfigError",
    "Error",
    "InconsistentPolicy",
    "InvalidArgument",
    "NumericalError",
    "OutOfRange",
    "default_k_grid",
    "evaluate",
    "gradcheck",
    "load_config",
    "pass_at_k",
    "pass_at_k_oracle",
    "resolve_config",
    "run_cli",
    "schedule_weights",
    "train",
]


def _config_text(config):
    if isinstance(config, (str, os.PathLike)):
        with open(config, encoding="utf-8") as f:
            return f.read()
    return json.dumps(config)


def load_config(path):
    with open(path, encoding="utf-8") as f:
        return json.load(f)


def resolve_config(config):
    """Validate a config and return it with defaults filled in."""
    return json.loads(_nsrlab.resolve_config(_config_text(config)))


def schedule_weights(config, t, p_correct=None):
    """(lambda_t, beta_t) of the config's schedule at step t."""
    return _nsrlab.schedule_weights(_config_text(config), float(t), p_correct)


def train(config, seed=None):
    """Run training; returns {"metrics": [row, ...], "policy": policy_json}."""
    return _nsrlab.train(_config_text(config), seed)


def evaluate(config, policy, seed=None):
    """Pass@k report for `policy` (a JSON string or dict) as a dict."""
    if not isinstance(policy, str):
        policy = json.dumps(policy)
    return json.loads(_nsrlab.evaluate(_config_text(config), policy, seed))


def run_cli(*args):
    """Run the command-line tool in-process: (exit code, stdout, stderr)."""
    return _nsrlab.run_cli([str(a) for a in args])
