"""Adaptive constrained policy optimization on exact gridworld CMDPs."""

import json

from ._core import (
    CmdpSpec,
    ConfigError,
    NumericError,
    exact_eval,
    front_csv,
    gridworld,
    lp_solve,
)
from . import _core


def _text(config):
    return config if isinstance(config, str) else json.dumps(config)


def canonical_config(config):
    """Validated config dict with every default filled in."""
    return json.loads(_core.canonical_config(_text(config)))


def environment(config):
    return _core.environment_from_config(_text(config))


def run(config, out_dir):
    """Train one configuration, write its artifacts to out_dir, return the summary."""
    return json.loads(_core.run(_text(config), str(out_dir)))


def verify(suite, seed=0):
    """Run the lemma, gap or gradient suite and return its verdicts."""
    return json.loads(_core.verify(suite, seed))


__all__ = [
    "CmdpSpec",
    "ConfigError",
    "NumericError",
    "canonical_config",
    "environment",
    "exact_eval",
    "front_csv",
    "gridworld",
    "lp_solve",
    "run",
    "verify",
]
