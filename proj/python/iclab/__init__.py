"""Gated in-context/in-weight learning laboratory."""

from ._core import (
    InWeightTable,
    alpha_update,
    default_config_json,
    entropy_threshold,
    gate_eta,
    generalization_bound,
    ic_ce_bounds,
    ic_l1_bounds,
    ic_predict_identity,
    icl_floor_binary,
    kt_excess_bound,
    noise_tradeoff,
    run_sweep,
    train_summary,
)

__all__ = [
    "InWeightTable",
    "alpha_update",
    "default_config_json",
    "entropy_threshold",
    "gate_eta",
    "generalization_bound",
    "ic_ce_bounds",
    "ic_l1_bounds",
    "ic_predict_identity",
    "icl_floor_binary",
    "kt_excess_bound",
    "noise_tradeoff",
    "run_sweep",
    "train_summary",
]
