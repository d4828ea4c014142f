"""Prototype-based label propagation for transductive few-shot classification."""

import json

from ._protolp import (
    Episode,
    Error,
    FeatureStore,
    aggregate_stats,
    classical_lp,
    load_features,
    ncm_predict,
    nonparam_propagate,
    preprocess,
    prototype_graph,
    run,
    sample_episode,
    sinkhorn,
    soft_assign,
    soft_kmeans,
    solve_projection,
    synth_generate,
    write_features,
)
from ._protolp import _run_benchmark_json

__all__ = [
    "Episode",
    "Error",
    "FeatureStore",
    "aggregate_stats",
    "classical_lp",
    "load_features",
    "ncm_predict",
    "nonparam_propagate",
    "preprocess",
    "prototype_graph",
    "run",
    "run_benchmark",
    "sample_episode",
    "sinkhorn",
    "soft_assign",
    "soft_kmeans",
    "solve_projection",
    "synth_generate",
    "write_features",
]


def run_benchmark(method="protolp", *, features=None, feature_format="plpf", synth=None,
                  preprocess="none", ways=5, shots=1, queries=75, query_dist="balanced",
                  unlabeled_per_class=0, episodes=100, seed=0, lam=None, alpha=0.2,
                  steps=20, sinkhorn="on", kmeans_iters=1, parallel=1, timing=False):
    """Run an episodic benchmark and return the report as a dict.

    Exactly one of ``features`` (a file path) or ``synth`` (a tuple
    ``(K, D, rho, sigma_w[, pool])``) selects the feature source.
    """
    text = _run_benchmark_json(
        method, None if features is None else str(features), feature_format,
        None if synth is None else [float(v) for v in synth], preprocess, ways, shots,
        queries, query_dist, unlabeled_per_class, episodes, seed, lam, alpha, steps,
        sinkhorn, kmeans_iters, parallel, timing)
    return json.loads(text)
