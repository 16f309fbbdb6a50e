from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import structlog
from scipy.signal import find_peaks

from .gaussian import bic_penalty, regularized_log_det

logger = structlog.get_logger(__name__)


@dataclass(frozen=True, slots=True, order=True)
class Chunk:
    """Frames [start_frame, end_frame) of one recording."""

    recording_id: int
    start_frame: int
    end_frame: int

    def __post_init__(self) -> None:
        if not 0 <= self.start_frame < self.end_frame:
            raise ValueError(f"invalid chunk [{self.start_frame}, {self.end_frame})")

    @property
    def num_frames(self) -> int:
        return self.end_frame - self.start_frame

    def frames(self, features: np.ndarray) -> np.ndarray:
        return features[self.start_frame : self.end_frame]


def chunks_from_boundaries(recording_id: int, boundaries: list[int], num_frames: int) -> list[Chunk]:
    edges = [0, *sorted(boundaries), num_frames]
    return [Chunk(recording_id, start, end) for start, end in zip(edges[:-1], edges[1:])]


def _window_covariances(
    cum_x: np.ndarray,
    cum_xx: np.ndarray,
    start: np.ndarray,
    end: np.ndarray,
) -> np.ndarray:
    count = (end - start).astype(np.float64)
    mean = (cum_x[end] - cum_x[start]) / count[:, None]
    second = (cum_xx[end] - cum_xx[start]) / count[:, None, None]
    covariance = second - mean[:, :, None] * mean[:, None, :]
    return 0.5 * (covariance + np.swapaxes(covariance, 1, 2))


def delta_bic_curve(
    features: np.ndarray,
    candidates: np.ndarray,
    win_frames: int,
    penalty_weight: float,
) -> np.ndarray:
    """ΔBIC between the windows left and right of every candidate frame."""

    x = np.asarray(features, dtype=np.float64)
    num_frames, dim = x.shape
    cum_x = np.zeros((num_frames + 1, dim))
    cum_x[1:] = np.cumsum(x, axis=0)
    cum_xx = np.zeros((num_frames + 1, dim, dim))
    cum_xx[1:] = np.cumsum(x[:, :, None] * x[:, None, :], axis=0)

    left = np.maximum(candidates - win_frames, 0)
    right = np.minimum(candidates + win_frames, num_frames)
    n_left = (candidates - left).astype(np.float64)
    n_right = (right - candidates).astype(np.float64)
    log_det_left = regularized_log_det(_window_covariances(cum_x, cum_xx, left, candidates))
    log_det_right = regularized_log_det(_window_covariances(cum_x, cum_xx, candidates, right))
    log_det_both = regularized_log_det(_window_covariances(cum_x, cum_xx, left, right))
    total = n_left + n_right
    gain = 0.5 * (total * log_det_both - n_left * log_det_left - n_right * log_det_right)
    return gain - penalty_weight * bic_penalty(dim, total)


def change_detect(
    features: np.ndarray,
    win_frames: int,
    penalty_weight: float,
    *,
    min_chunk_frames: int = 100,
    step_frames: int = 1,
    recording_id: int = 0,
) -> list[Chunk]:
    """Split a recording at speaker changes found by sliding-window ΔBIC.

    Boundaries are the positive local maxima of the ΔBIC curve; when two peaks are
    closer than `min_chunk_frames` only the higher one survives. Candidates stay at
    least `min_chunk_frames` away from the edges, so the returned chunks tile [0, T)
    and none is shorter than `min_chunk_frames`.
    """

    num_frames = int(features.shape[0])
    if num_frames < 2 * min_chunk_frames:
        return [Chunk(recording_id, 0, num_frames)]

    candidates = np.arange(min_chunk_frames, num_frames - min_chunk_frames + 1, step_frames)
    scores = delta_bic_curve(features, candidates, win_frames, penalty_weight)
    spacing = max(1, math.ceil(min_chunk_frames / step_frames))
    peaks, _ = find_peaks(scores, height=0.0, distance=spacing)
    boundaries = [int(candidates[index]) for index in peaks if scores[index] > 0]
    logger.debug(
        "diarization.change.detected",
        recording_id=recording_id,
        boundaries=len(boundaries),
    )
    return chunks_from_boundaries(recording_id, boundaries, num_frames)
