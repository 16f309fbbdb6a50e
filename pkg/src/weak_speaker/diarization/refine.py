"""Viterbi re-segmentation with per-cluster diagonal GMMs.

Each cluster is a chain of `min_duration` HMM states: entering the cluster means
walking the whole chain, and only the last state may loop or leave. From that state
the self-loop has weight α and every switch weight 1, normalized over the C options.
"""

from __future__ import annotations

import math

import numpy as np
import structlog
from sklearn.mixture import GaussianMixture

from ..streams import substream
from .clustering import Clustering, clustering_from_labels

logger = structlog.get_logger(__name__)


def cluster_log_likelihoods(
    clustering: Clustering,
    features: np.ndarray,
    n_components: int,
    *,
    em_iterations: int = 20,
    seed: int = 0,
    iteration: int = 0,
) -> np.ndarray:
    """(T, C) frame log-likelihoods under one GMM trained per cluster."""

    features = np.asarray(features, dtype=np.float64)
    columns = []
    for index in range(clustering.num_clusters):
        frames = clustering.cluster_frames(features, index)
        components = n_components if frames.shape[0] >= 2 * n_components else 1
        rng = substream(seed, "diarization.gmm", clustering.recording_id, iteration, index)
        gmm = GaussianMixture(
            n_components=components,
            covariance_type="diag",
            max_iter=em_iterations,
            reg_covar=1e-6,
            random_state=int(rng.integers(2**31 - 1)),
        )
        gmm.fit(frames)
        columns.append(gmm.score_samples(features))
    return np.stack(columns, axis=1)


def viterbi_decode(
    log_likelihoods: np.ndarray,
    min_duration: int,
    self_loop_bonus: float,
) -> np.ndarray:
    """Most likely cluster per frame under the chained minimum-duration HMM."""

    num_frames, num_clusters = log_likelihoods.shape
    depth = max(1, int(min_duration))
    denominator = self_loop_bonus + num_clusters - 1
    log_stay = math.log(self_loop_bonus / denominator)
    log_switch = math.log(1.0 / denominator)

    delta = np.full((num_clusters, depth), -np.inf)
    delta[:, 0] = -math.log(num_clusters) + log_likelihoods[0]
    entered_from = np.zeros((num_frames, num_clusters), dtype=np.int64)
    stayed = np.zeros((num_frames, num_clusters), dtype=bool)
    cluster_index = np.arange(num_clusters)

    for t in range(1, num_frames):
        last = delta[:, -1]
        order = np.argsort(-last, kind="stable")
        best, runner_up = order[0], order[1] if num_clusters > 1 else order[0]
        source = np.where(cluster_index == best, runner_up, best)
        switch_score = last[source] + log_switch
        if num_clusters == 1:
            switch_score = np.full(1, -np.inf)

        updated = np.empty_like(delta)
        if depth == 1:
            stay_score = last + log_stay
            stayed[t] = stay_score >= switch_score
            updated[:, 0] = np.where(stayed[t], stay_score, switch_score)
            entered_from[t] = np.where(stayed[t], cluster_index, source)
        else:
            updated[:, 0] = switch_score
            entered_from[t] = source
            updated[:, 1 : depth - 1] = delta[:, 0 : depth - 2]
            stay_score = last + log_stay
            advance_score = delta[:, depth - 2]
            stayed[t] = stay_score > advance_score
            updated[:, -1] = np.where(stayed[t], stay_score, advance_score)
        delta = updated + log_likelihoods[t][:, None]

    flat = int(np.argmax(delta))
    cluster, position = divmod(flat, depth)
    labels = np.empty(num_frames, dtype=np.int64)
    for t in range(num_frames - 1, -1, -1):
        labels[t] = cluster
        if t == 0:
            break
        if depth == 1:
            cluster = int(entered_from[t, cluster])
        elif position == 0:
            cluster, position = int(entered_from[t, cluster]), depth - 1
        elif position == depth - 1 and stayed[t, cluster]:
            pass
        else:
            position -= 1
    return labels


def viterbi_refine(
    clustering: Clustering,
    features: np.ndarray,
    n_components: int = 8,
    n_iters: int = 2,
    *,
    min_duration: int = 50,
    self_loop_bonus: float = 10.0,
    em_iterations: int = 20,
    seed: int = 0,
) -> Clustering:
    if clustering.num_clusters <= 1:
        return clustering

    current = clustering
    for iteration in range(n_iters):
        log_likelihoods = cluster_log_likelihoods(
            current,
            features,
            n_components,
            em_iterations=em_iterations,
            seed=seed,
            iteration=iteration,
        )
        labels = viterbi_decode(log_likelihoods, min_duration, self_loop_bonus)
        refined = clustering_from_labels(current.recording_id, labels)
        if refined.num_clusters != current.num_clusters:
            logger.info(
                "diarization.refine.cluster_vanished",
                recording_id=current.recording_id,
                iteration=iteration,
                clusters_before=current.num_clusters,
                clusters_after=refined.num_clusters,
            )
            break
        current = refined
    return current
