"""Turn-over dropout: per-instance masks, training and influence estimation.

Configs are plain dicts with the same keys as the JSON config files.
"""

import json

from . import _core
from ._core import (
    DataError,
    Model,
    PreconditionError,
    ShapeError,
    TurnoverError,
    UsageError,
    command_names,
    pass_counters,
    replay,
    reset_pass_counters,
    run_command,
)

__version__ = _core.__version__

_DIRECT = {"kind": "direct"}


def mask_plan(model, seed, scheme=None):
    """Mask plan dict for a model config dict."""
    return json.loads(_core.mask_plan(json.dumps(model), seed, json.dumps(scheme or _DIRECT)))


def generate_mask(plan, instance_id):
    """Per-layer arrays with entries in {0, 1/p}."""
    return _core.generate_mask(json.dumps(plan), instance_id)


def flipped_mask(plan, instance_id):
    return _core.flipped_mask(json.dumps(plan), instance_id)


def generate_synthetic(spec):
    """Returns {"train"|"val"|"test": (X, y, flipped_ids)}."""
    return _core.generate_synthetic(json.dumps(spec))


def train(x, y, model, train=None, seed=0, turnover=True, scheme=None):
    """Train an MLP. With turnover=True each instance updates only its own sub-network."""
    return _core.train(x, y, json.dumps(model), json.dumps(train or {}), seed, turnover,
                       json.dumps(scheme or _DIRECT))


def estimate_influence(model, x, label, train_ids=None, n_train=0, estimator="standard", jobs=1):
    """Influence of each training id on the loss at (x, label).

    Pass train_ids, or n_train to score ids 0..n_train-1.
    """
    return _core.estimate_influence(model, x, label, train_ids, n_train, estimator, jobs)


def self_influence(model, x, y, jobs=1):
    return _core.self_influence(model, x, y, jobs)


def mean_influence_on_set(model, x_val, y_val, n_train, jobs=1):
    return _core.mean_influence_on_set(model, x_val, y_val, n_train, jobs)
