from __future__ import annotations

import math
from typing import Mapping, Sequence

import numpy as np
import structlog

from ..audio.features import normalize_frames
from ..diarization.clustering import Clustering
from .objective import Minibatch, RecordingEntry

logger = structlog.get_logger(__name__)


def crop_segment(chunk_features: np.ndarray, segment_frames: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform random crop of `segment_frames`; short chunks are tiled cyclically first."""

    length = chunk_features.shape[0]
    if length == 0:
        raise ValueError("cannot crop an empty chunk")
    if length >= segment_frames:
        start = int(rng.integers(0, length - segment_frames + 1))
        return chunk_features[start : start + segment_frames]
    offset = int(rng.integers(0, length))
    repeats = math.ceil((segment_frames + offset) / length)
    tiled = np.tile(chunk_features, (repeats, 1))
    return tiled[offset : offset + segment_frames]


def plan_minibatches(
    order: Sequence[int],
    cluster_counts: Mapping[int, int],
    budget: int,
) -> list[list[int]]:
    """Group recordings into batches whose cluster counts fit the segment budget.

    Recordings are taken in `order`; a recording enters the open batch only if its
    cluster count fits what is left of the budget, otherwise it waits for a later
    batch. Recordings larger than the budget are dropped.
    """

    pending = [recording for recording in order if cluster_counts[recording] <= budget]
    batches: list[list[int]] = []
    while pending:
        batch: list[int] = []
        remaining = budget
        waiting: list[int] = []
        for recording in pending:
            size = cluster_counts[recording]
            if size <= remaining:
                batch.append(recording)
                remaining -= size
            else:
                waiting.append(recording)
        batches.append(batch)
        pending = waiting
    return batches


def eligible_recordings(clusterings: Mapping[int, Clustering], budget: int) -> list[int]:
    eligible = []
    for recording_id in sorted(clusterings):
        clusters = clusterings[recording_id].num_clusters
        if clusters > budget:
            logger.warning(
                "training.recording.skipped",
                recording_id=recording_id,
                clusters=clusters,
                budget=budget,
            )
            continue
        eligible.append(recording_id)
    return eligible


def draw_segments(
    features: np.ndarray,
    clustering: Clustering,
    segment_frames: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """One instance-normalized crop from one uniformly drawn chunk per cluster."""

    segments = []
    for index in range(clustering.num_clusters):
        chunks = clustering.clusters[index]
        chunk = chunks[int(rng.integers(len(chunks)))]
        segment = crop_segment(chunk.frames(features), segment_frames, rng)
        segments.append(normalize_frames(segment))
    return np.stack(segments)


def sample_minibatch(
    batch: Sequence[int],
    features: Mapping[int, np.ndarray],
    clusterings: Mapping[int, Clustering],
    targets: Mapping[int, int],
    segment_frames: int,
    rng: np.random.Generator,
) -> Minibatch:
    return Minibatch(
        [
            RecordingEntry(
                recording_id=recording_id,
                target=targets[recording_id],
                segments=draw_segments(
                    features[recording_id], clusterings[recording_id], segment_frames, rng
                ),
            )
            for recording_id in batch
        ]
    )
