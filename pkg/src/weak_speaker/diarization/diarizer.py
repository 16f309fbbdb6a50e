from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Sequence

import numpy as np
import structlog

from ..config.settings import DiarizationConfig
from ..corpus.synth import WeaklyLabeledRecording
from .clustering import Clustering, bic_ahc
from .refine import viterbi_refine
from .segmentation import change_detect

logger = structlog.get_logger(__name__)


def diarize(
    features: np.ndarray,
    config: DiarizationConfig,
    *,
    recording_id: int = 0,
    seed: int = 0,
) -> Clustering:
    """Change detection, then BIC clustering, then Viterbi boundary refinement."""

    chunks = change_detect(
        features,
        config.change_window_frames,
        config.change_lambda,
        min_chunk_frames=config.min_chunk_frames,
        step_frames=config.change_step_frames,
        recording_id=recording_id,
    )
    clustering = bic_ahc(chunks, features, config.ahc_lambda)
    refined = viterbi_refine(
        clustering,
        features,
        config.gmm_components,
        config.refine_iterations,
        min_duration=config.min_duration_frames,
        self_loop_bonus=config.self_loop_bonus,
        em_iterations=config.em_iterations,
        seed=seed,
    )
    logger.debug(
        "diarization.recording.done",
        recording_id=recording_id,
        chunks=len(chunks),
        clusters=refined.num_clusters,
        refined_chunks=len(refined.chunks()),
    )
    return refined


def diarize_corpus(
    recordings: Sequence[WeaklyLabeledRecording],
    config: DiarizationConfig,
    seed: int,
    *,
    threads: int = 1,
) -> list[Clustering]:
    def run(recording: WeaklyLabeledRecording) -> Clustering:
        return diarize(
            recording.diarization_input,
            config,
            recording_id=recording.recording_id,
            seed=seed,
        )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            clusterings = list(pool.map(run, recordings))
    else:
        clusterings = [run(recording) for recording in recordings]

    logger.info(
        "diarization.corpus.done",
        recordings=len(clusterings),
        mean_clusters=float(np.mean([c.num_clusters for c in clusterings])) if clusterings else 0.0,
    )
    return clusterings
