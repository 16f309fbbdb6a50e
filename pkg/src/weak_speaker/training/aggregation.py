"""Cluster-axis aggregation of segment similarities into recording logits.

`o` has shape (C, J): one row per cluster of the recording, one column per class.
Both aggregations map values in [-1, 1] back into [-1, 1].
"""

from __future__ import annotations

from typing import Literal

import numpy as np
from scipy.special import softmax

from ..errors import ConfigurationError

AggregationKind = Literal["max", "lse"]


def _check(kind: str, tau: float) -> None:
    if kind == "lse" and not tau > 0:
        raise ConfigurationError(f"log-sum-exp aggregation requires tau > 0, got {tau}")
    if kind not in ("max", "lse"):
        raise ConfigurationError(f"unknown aggregation kind {kind!r}")


def aggregate(o: np.ndarray, kind: AggregationKind, tau: float = 1.0) -> np.ndarray:
    """Recording logits l_j; a 1-D input is treated as a single class column."""

    _check(kind, tau)
    o = np.asarray(o, dtype=np.float64)
    squeeze = o.ndim == 1
    if squeeze:
        o = o[:, None]
    peak = o.max(axis=0)
    if kind == "max":
        result = peak
    else:
        result = peak + tau * np.log(np.mean(np.exp((o - peak) / tau), axis=0))
    return result[0] if squeeze else result


def cluster_posteriors(o: np.ndarray, kind: AggregationKind, tau: float = 1.0) -> np.ndarray:
    """p(c | j): d l_j / d o_{c,j}; a softmax over clusters, or the argmax indicator."""

    _check(kind, tau)
    o = np.asarray(o, dtype=np.float64)
    if kind == "lse":
        return softmax(o / tau, axis=0)
    posterior = np.zeros_like(o)
    winners = np.argmax(o, axis=0)
    posterior[winners, np.arange(o.shape[1])] = 1.0
    return posterior
