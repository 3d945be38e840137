"""Federated multi-site DAG structure learning."""

from feddag._core import (
    confusion,
    dipa,
    edge_metrics,
    fit,
    gen_problem,
    h_and_grad,
    is_acyclic,
    local_update,
    matrix_exp,
    prox_group_fused,
    prox_l1,
    shd,
    threshold_graph,
    two_sample_proportion_test,
)

__all__ = [
    "confusion",
    "dipa",
    "edge_metrics",
    "fit",
    "gen_problem",
    "h_and_grad",
    "is_acyclic",
    "local_update",
    "matrix_exp",
    "prox_group_fused",
    "prox_l1",
    "shd",
    "threshold_graph",
    "two_sample_proportion_test",
]
