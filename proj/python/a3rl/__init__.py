"""Advantage- and density-aware replay for offline-to-online RL."""

import json

from . import _a3rl
from ._a3rl import (
    ConfigError,
    DimensionError,
    IoError,
    NumericalError,
    a3_priority,
    anneal_beta,
    bandit_R,
    check_lemma1,
    dataset_info,
    env_names,
    env_reset,
    env_step,
    f,
    f_conj_of_fprime,
    f_prime,
    generate_dataset,
    importance_weights,
    lemma1_sweep,
    load_checkpoint,
    mode_names,
    policy_names,
    priority_probs,
    sample_batch,
)

__all__ = [
    "ConfigError", "DimensionError", "IoError", "NumericalError",
    "a3_priority", "anneal_beta", "bandit_R", "check_lemma1", "config", "dataset_info",
    "default_config", "env_names", "env_reset", "env_step", "f", "f_conj_of_fprime", "f_prime",
    "generate_dataset", "importance_weights", "lemma1_sweep", "load_checkpoint", "mode_names",
    "policy_names", "priority_probs", "run_ablation_suite", "sample_batch", "train",
]


def default_config():
    """Default experiment config as a dict."""
    return json.loads(_a3rl.default_config())


def config(base=None, **overrides):
    """Validated config dict: defaults, then `base`, then keyword overrides."""
    merged = dict(base or {})
    merged.update(overrides)
    return json.loads(_a3rl.normalize_config(json.dumps(merged)))


def train(cfg=None, metrics_csv=None, checkpoint=None, **overrides):
    """Run one training job. Returns a dict with `metrics` rows and counters."""
    text = json.dumps(config(cfg, **overrides))
    return _a3rl.train(text, metrics_csv, checkpoint)


def run_ablation_suite(cfg, seeds, out_dir):
    """All eight suite entries over `seeds` seeds; returns the summary rows."""
    return _a3rl.run_ablation_suite(json.dumps(config(cfg)), seeds, out_dir)
