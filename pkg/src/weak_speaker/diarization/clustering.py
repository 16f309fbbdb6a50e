from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import structlog

from .gaussian import SegmentGaussian, delta_bic
from .segmentation import Chunk

logger = structlog.get_logger(__name__)


@dataclass(slots=True)
class Clustering:
    """Partition of one recording's chunks; cluster indices run 0..C-1."""

    recording_id: int
    clusters: dict[int, list[Chunk]] = field(default_factory=dict)

    @property
    def num_clusters(self) -> int:
        return len(self.clusters)

    def chunks(self) -> list[Chunk]:
        return sorted(chunk for chunks in self.clusters.values() for chunk in chunks)

    def frame_labels(self, num_frames: int) -> np.ndarray:
        """Cluster index per frame, -1 where no chunk covers the frame."""

        labels = np.full(num_frames, -1, dtype=np.int64)
        for index, chunks in self.clusters.items():
            for chunk in chunks:
                labels[chunk.start_frame : chunk.end_frame] = index
        return labels

    def cluster_frames(self, features: np.ndarray, index: int) -> np.ndarray:
        return np.concatenate([chunk.frames(features) for chunk in self.clusters[index]], axis=0)

    def validate(self) -> None:
        if not self.clusters or any(not chunks for chunks in self.clusters.values()):
            raise ValueError(f"recording {self.recording_id}: empty cluster")
        if sorted(self.clusters) != list(range(len(self.clusters))):
            raise ValueError(f"recording {self.recording_id}: cluster indices are not contiguous")
        chunks = self.chunks()
        for previous, current in zip(chunks, chunks[1:]):
            if current.start_frame < previous.end_frame:
                raise ValueError(f"recording {self.recording_id}: overlapping chunks")


def clustering_from_labels(recording_id: int, labels: Sequence[int]) -> Clustering:
    """Group each run of equal frame labels into a chunk of that label's cluster."""

    labels = np.asarray(labels)
    clusters: dict[int, list[Chunk]] = {}
    if labels.size == 0:
        return Clustering(recording_id, clusters)
    changes = np.flatnonzero(labels[1:] != labels[:-1]) + 1
    starts = np.concatenate(([0], changes))
    ends = np.concatenate((changes, [labels.size]))
    for start, end in zip(starts, ends):
        label = int(labels[start])
        if label < 0:
            continue
        clusters.setdefault(label, []).append(Chunk(recording_id, int(start), int(end)))
    return Clustering(recording_id, dict(sorted(clusters.items())))


def reindex(recording_id: int, groups: Iterable[list[Chunk]]) -> Clustering:
    """Number clusters contiguously in order of their earliest chunk."""

    ordered = sorted((sorted(group) for group in groups if group), key=lambda group: group[0])
    return Clustering(recording_id, {index: group for index, group in enumerate(ordered)})


def bic_ahc(chunks: Sequence[Chunk], features: np.ndarray, penalty_weight: float) -> Clustering:
    """Agglomerate chunks by merging the lowest-ΔBIC pair while that ΔBIC is negative."""

    if not chunks:
        raise ValueError("bic_ahc needs at least one chunk")
    recording_id = chunks[0].recording_id
    groups: list[list[Chunk]] = [[chunk] for chunk in sorted(chunks)]
    models = [SegmentGaussian.from_frames(group[0].frames(features)) for group in groups]

    size = len(groups)
    scores = np.full((size, size), np.inf)
    for a in range(size):
        for b in range(a + 1, size):
            scores[a, b] = delta_bic(models[a], models[b], penalty_weight)
    alive = np.ones(size, dtype=bool)

    merges = 0
    while alive.sum() > 1:
        flat = int(np.argmin(scores))
        a, b = divmod(flat, size)
        if not scores[a, b] < 0:
            break
        groups[a].extend(groups[b])
        groups[b] = []
        models[a] = models[a].merge(models[b])
        alive[b] = False
        scores[b, :] = np.inf
        scores[:, b] = np.inf
        for other in np.flatnonzero(alive):
            if other == a:
                continue
            low, high = min(a, other), max(a, other)
            scores[low, high] = delta_bic(models[low], models[high], penalty_weight)
        merges += 1

    clustering = reindex(recording_id, groups)
    logger.debug(
        "diarization.ahc.done",
        recording_id=recording_id,
        chunks=len(chunks),
        merges=merges,
        clusters=clustering.num_clusters,
    )
    return clustering
