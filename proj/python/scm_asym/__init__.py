"""Asymptotic laws of distances between sample covariance matrices."""

import json

from ._core import (
    DomainError,
    NumericError,
    deterministic_equivalent,
    empirical_distance,
    mu0,
    sample_observations,
    second_order_mean,
    toeplitz,
    variance,
)
from . import _core

__all__ = [
    "DomainError",
    "NumericError",
    "deterministic_equivalent",
    "describe",
    "empirical_distance",
    "mu0",
    "predict",
    "sample_observations",
    "second_order_mean",
    "toeplitz",
    "variance",
]


def describe(scenario, kinds=(), M=0):
    """Descriptor set of a scenario file as a dict."""
    return json.loads(_core._describe(str(scenario), list(kinds), M))


def predict(scenario, kinds=(), sweep_m=(), trials=0, samples=100000, seed=1):
    """Clustering probabilities of a scenario file as a dict."""
    return json.loads(_core._predict(str(scenario), list(kinds), list(sweep_m), trials, samples, seed))
