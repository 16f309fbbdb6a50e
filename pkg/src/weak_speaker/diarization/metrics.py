from __future__ import annotations

import numpy as np

from .clustering import Clustering


def purity_coverage(clustering: Clustering, ground_truth: np.ndarray) -> tuple[float, float]:
    """Frame-weighted cluster purity and mean per-speaker best-cluster coverage."""

    ground_truth = np.asarray(ground_truth)
    labels = clustering.frame_labels(ground_truth.shape[0])
    covered = labels >= 0
    speakers, speaker_index = np.unique(ground_truth, return_inverse=True)
    overlap = np.zeros((clustering.num_clusters, speakers.size), dtype=np.int64)
    np.add.at(overlap, (labels[covered], speaker_index[covered]), 1)

    total = overlap.sum()
    purity = float(overlap.max(axis=1).sum() / total) if total else 1.0
    speaker_frames = np.bincount(speaker_index, minlength=speakers.size)
    coverage = float(np.mean(overlap.max(axis=0) / speaker_frames))
    return purity, coverage


def change_points(labels: np.ndarray) -> np.ndarray:
    """Frames t where labels[t] differs from labels[t - 1]."""

    labels = np.asarray(labels)
    return np.flatnonzero(labels[1:] != labels[:-1]) + 1


def boundary_distances(
    estimated: np.ndarray,
    reference: np.ndarray,
    num_frames: int,
) -> np.ndarray:
    """Distance in frames from each reference boundary to the nearest estimated one.

    The recording edges count as estimated boundaries, so every distance is finite.
    """

    candidates = np.unique(np.concatenate(([0, num_frames], np.asarray(estimated, dtype=np.int64))))
    reference = np.asarray(reference, dtype=np.int64)
    if reference.size == 0:
        return np.zeros(0, dtype=np.int64)
    return np.min(np.abs(reference[:, None] - candidates[None, :]), axis=1)


def boundary_error(
    clustering: Clustering,
    ground_truth: np.ndarray,
) -> tuple[float, float]:
    """Mean and median distance between true speaker changes and cluster changes."""

    num_frames = int(np.asarray(ground_truth).shape[0])
    distances = boundary_distances(
        change_points(clustering.frame_labels(num_frames)),
        change_points(ground_truth),
        num_frames,
    )
    if distances.size == 0:
        return 0.0, 0.0
    return float(distances.mean()), float(np.median(distances))
